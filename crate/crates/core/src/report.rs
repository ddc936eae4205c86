//! Number formatting shared by every CSV and JSON writer.

/// Formats `v` with 12 significant digits in scientific notation. The
/// output is a pure function of the bit pattern, so reruns are
/// byte-identical.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0.00000000000e0".to_string();
    }
    format!("{v:.11e}")
}

/// Rounds `v` to 12 significant digits (for JSON numbers).
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    fmt_num(v).parse().unwrap_or(v)
}
