use membrane_lab::grid::make_lattice;
use membrane_lab::harmonic::{
    aux_h_eval, aux_tail_bound, gamma_functionals_with, h0_eval, BoundaryFunction,
};
use membrane_lab::solver::{pava_decreasing, solve_membranes, MembraneProblem, ORDERING_TOL};
use proptest::prelude::*;

fn weighted_sq(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), w)| w * (a - b).powi(2))
        .sum()
}

fn pava_input() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(0.1..5.0f64, n),
        )
    })
}

proptest! {
    #[test]
    fn pava_is_a_monotone_projection((x, w) in pava_input()) {
        let p = pava_decreasing(&x, &w).unwrap();
        prop_assert!(p.windows(2).all(|s| s[0] >= s[1]));
        let mass = |v: &[f64]| v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        prop_assert!((mass(&p) - mass(&x)).abs() <= 1e-9 * (1.0 + mass(&x).abs()));
        let again = pava_decreasing(&p, &w).unwrap();
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn pava_beats_other_monotone_sequences((x, w) in pava_input(), shift in -1.0..1.0f64) {
        let p = pava_decreasing(&x, &w).unwrap();
        // sorted copy and a shifted projection are both admissible
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let shifted: Vec<f64> = p.iter().map(|v| v + shift).collect();
        let best = weighted_sq(&x, &p, &w);
        prop_assert!(best <= weighted_sq(&x, &sorted, &w) + 1e-9);
        prop_assert!(best <= weighted_sq(&x, &shifted, &w) + 1e-9);
    }

    #[test]
    fn pava_fixes_monotone_input(mut x in prop::collection::vec(-10.0..10.0f64, 1..12)) {
        x.sort_by(|a, b| b.total_cmp(a));
        let w = vec![1.0; x.len()];
        prop_assert_eq!(pava_decreasing(&x, &w).unwrap(), x);
    }

    #[test]
    fn h0_has_the_mean_value_property(x1 in 0.2..1.5f64, x2 in -1.0..3.0f64) {
        let rho = 0.5 * x1;
        let n = 64;
        let mean = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                h0_eval(&[x1 + rho * t.cos(), x2 + rho * t.sin()]).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        let centre = h0_eval(&[x1, x2]).unwrap();
        prop_assert!((mean - centre).abs() <= 1e-9, "{} vs {}", mean, centre);
        prop_assert!((0.0..=4.0).contains(&centre));
    }

    #[test]
    fn aux_partial_sums_grow_with_the_term_count(x1 in 0.01..0.5f64, x2 in -0.5..0.5f64, k in 1usize..20) {
        let a = aux_h_eval(&[x1, x2], k).unwrap();
        let b = aux_h_eval(&[x1, x2], k + 1).unwrap();
        let far = aux_h_eval(&[x1, x2], 60).unwrap();
        prop_assert!(b >= a);
        prop_assert!(far - a <= aux_tail_bound(k) + 1e-15);
    }

    #[test]
    fn membranes_stay_ordered(
        c in prop::collection::vec(-0.5..0.5f64, 6),
        f in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let lat = make_lattice(1, 1.0, 1.0 / 32.0).unwrap();
        let mut forces = f.clone();
        forces.sort_by(|a, b| b.total_cmp(a));
        // ordered boundary values at both ends
        let mut left = c[..3].to_vec();
        let mut right = c[3..].to_vec();
        left.sort_by(|a, b| b.total_cmp(a));
        right.sort_by(|a, b| b.total_cmp(a));
        let p = MembraneProblem::from_boundary_fn(lat, forces, |x| {
            if x[0] < 0.0 { left.clone() } else { right.clone() }
        })
        .unwrap();
        let (s, rep) = solve_membranes(&p).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(s.check_ordering(ORDERING_TOL).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn gamma_functionals_are_linear(
        a in prop::collection::vec(-1.0..1.0f64, 3),
        b in prop::collection::vec(-1.0..1.0f64, 3),
        s in -2.0..2.0f64,
        t in -2.0..2.0f64,
    ) {
        let h = 1.0 / 32.0;
        let f = BoundaryFunction::fourier(&a, &[0.0, a[1], a[2]]);
        let g = BoundaryFunction::fourier(&b, &[0.0, b[2], b[1]]);
        let (f1, f2) = gamma_functionals_with(&f, h).unwrap();
        let (g1, g2) = gamma_functionals_with(&g, h).unwrap();
        let (c1, c2) = gamma_functionals_with(&f.combine(s, &g, t), h).unwrap();
        let scale = 1.0 + s.abs() + t.abs();
        prop_assert!((c1 - (s * f1 + t * g1)).abs() <= 1e-7 * scale);
        prop_assert!((c2 - (s * f2 + t * g2)).abs() <= 1e-7 * scale);
    }
}
