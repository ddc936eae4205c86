use membrane_lab::classify::{classify_intersections, classify_point, verdict_counts, Verdict};
use membrane_lab::grid::make_lattice;
use membrane_lab::profiles::{Direction, ProfileSpec, SymMatrix};
use membrane_lab::solver::{solve_membranes, MembraneProblem, MembraneStack};

const RADII: [f64; 3] = [0.125, 0.25, 0.5];

fn solved(dim: usize, h: f64, spec: &ProfileSpec) -> MembraneStack {
    let lat = make_lattice(dim, 1.0, h).unwrap();
    let (s, rep) = solve_membranes(&MembraneProblem::from_profile(lat, spec).unwrap()).unwrap();
    assert!(rep.converged);
    s
}

fn families(dim: usize) -> Vec<(ProfileSpec, Verdict)> {
    let e = if dim == 1 {
        Direction::e1(1)
    } else {
        Direction::from_angle(0.3)
    };
    // hybrid matrices have trace 1 and 3B − e⊗e ⪰ 0
    let (a, b, hb) = if dim == 1 {
        (
            SymMatrix::new_1d(1.0),
            SymMatrix::new_1d(-1.0),
            SymMatrix::new_1d(1.0),
        )
    } else {
        (
            SymMatrix::new_2d(0.6, 0.1, 0.4),
            SymMatrix::new_2d(-0.5, 0.05, -0.5),
            SymMatrix::outer(&e).combine(1.0 / 3.0, &SymMatrix::scaled_identity(2, 1.0), 1.0 / 3.0),
        )
    };
    vec![
        (ProfileSpec::SH { e }, Verdict::Reg),
        (ProfileSpec::UH { e }, Verdict::Sing1),
        (ProfileSpec::Parabola { a, b }, Verdict::Sing2),
        (ProfileSpec::HybridEB { e, b: hb }, Verdict::Hybrid),
        (ProfileSpec::HybridBE { b: hb, e }, Verdict::Hybrid),
    ]
}

#[test]
fn solved_closed_forms_classify_to_their_family() {
    for (dim, h) in [(1, 1.0 / 128.0), (2, 1.0 / 64.0)] {
        for (spec, want) in families(dim) {
            let s = solved(dim, h, &spec);
            let c = classify_point(&s, &[0.0, 0.0][..dim], &RADII).unwrap();
            println!(
                "d={dim} {}: {:?} energy/W0 {:.4} eps {:.2e}",
                spec.name(),
                c.verdict,
                c.energy / membrane_lab::classify::reference_w0(dim).unwrap(),
                c.epsilon
            );
            assert_eq!(c.verdict, want, "d={dim} {}", spec.name());
        }
    }
}

#[test]
fn verdicts_are_stable_under_refinement() {
    for (spec, want) in families(2) {
        let coarse = classify_point(&solved(2, 1.0 / 32.0, &spec), &[0.0, 0.0], &RADII).unwrap();
        let fine = classify_point(&solved(2, 1.0 / 64.0, &spec), &[0.0, 0.0], &RADII).unwrap();
        assert_eq!(coarse.verdict, want, "{} at h = 1/32", spec.name());
        assert_eq!(fine.verdict, want, "{} at h = 1/64", spec.name());
        let rel = (coarse.energy - fine.energy).abs() / fine.energy;
        assert!(rel < 0.02, "{}: energy moved by {rel}", spec.name());
    }
}

#[test]
fn unstable_line_classifies_as_sing1_throughout() {
    let s = solved(
        2,
        1.0 / 32.0,
        &ProfileSpec::UH {
            e: Direction::e1(2),
        },
    );
    let classes = classify_intersections(&s, 0.5, &RADII).unwrap();
    let counts = verdict_counts(&classes);
    assert!(!classes.is_empty());
    assert_eq!(counts[1], classes.len(), "{counts:?}");
}
