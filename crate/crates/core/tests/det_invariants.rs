use kinsplit::det_solver::{det_solve, max_stable_dt, DetScheme, NumericalFlux, SubstepPolicy};
use kinsplit::grid::{l1_distance, lp_norm, Field, TorusGrid};
use kinsplit::model::{builtin_problem, ProblemSpec};
use proptest::prelude::*;

const LO: f64 = -1.5;
const HI: f64 = 2.5;
const N: usize = 32;

fn grid() -> TorusGrid {
    TorusGrid::one_d(N).unwrap()
}

fn problems() -> Vec<ProblemSpec> {
    ["burgers", "degenerate-transport", "heat", "burgers-noise"]
        .iter()
        .map(|n| builtin_problem(n).unwrap())
        .collect()
}

fn schemes(spec: &ProblemSpec) -> Vec<DetScheme> {
    let alpha = spec.flux.max_speed(LO, HI);
    vec![
        DetScheme::standard(),
        DetScheme::new(NumericalFlux::LaxFriedrichs { alpha }, 0.9, 0.45).unwrap(),
    ]
}

/// Caps the step at the one stable for the whole value range, so two
/// solves with the same `τ` take the same steps.
fn capped(scheme: DetScheme, spec: &ProblemSpec) -> DetScheme {
    let vals = (0..N).map(|i| if i % 2 == 0 { LO } else { HI }).collect();
    let dt = max_stable_dt(&scheme, &Field::new(grid(), vals).unwrap(), spec);
    scheme.with_substeps(SubstepPolicy::Capped { dt_max: dt })
}

fn field() -> impl Strategy<Value = Field> {
    prop::collection::vec(LO..HI, N).prop_map(|v| Field::new(grid(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn l1_contraction(u in field(), v in field(), tau in 0.001f64..0.05) {
        for spec in problems() {
            for scheme in schemes(&spec) {
                let s = capped(scheme, &spec);
                let su = det_solve(&s, &u, tau, &spec).unwrap().0;
                let sv = det_solve(&s, &v, tau, &spec).unwrap().0;
                prop_assert!(l1_distance(&su, &sv).unwrap() <= l1_distance(&u, &v).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn lp_norms_do_not_grow(u in field(), tau in 0.001f64..0.05) {
        for spec in problems() {
            for scheme in schemes(&spec) {
                let su = det_solve(&scheme, &u, tau, &spec).unwrap().0;
                for p in [1.0, 2.0, 4.0, f64::INFINITY] {
                    prop_assert!(lp_norm(&su, p).unwrap() <= lp_norm(&u, p).unwrap() + 1e-10);
                }
            }
        }
    }

    #[test]
    fn mass_is_conserved_and_range_kept(u in field(), tau in 0.001f64..0.05) {
        for spec in problems() {
            for scheme in schemes(&spec) {
                let su = det_solve(&scheme, &u, tau, &spec).unwrap().0;
                prop_assert!((su.integral() - u.integral()).abs() <= 1e-12);
                prop_assert!(su.min() >= u.min() - 1e-12 && su.max() <= u.max() + 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_splits_at_step_boundaries(u in field(), k in 1usize..6) {
        let spec = builtin_problem("burgers").unwrap();
        let steps = vec![0.004; 6];
        let whole = DetScheme::standard().with_substeps(SubstepPolicy::Explicit { steps: steps.clone() });
        let head = DetScheme::standard().with_substeps(SubstepPolicy::Explicit { steps: steps[..k].to_vec() });
        let tail = DetScheme::standard().with_substeps(SubstepPolicy::Explicit { steps: steps[k..].to_vec() });
        let direct = det_solve(&whole, &u, steps.iter().sum(), &spec).unwrap().0;
        let mid = det_solve(&head, &u, steps[..k].iter().sum(), &spec).unwrap().0;
        let composed = det_solve(&tail, &mid, steps[k..].iter().sum(), &spec).unwrap().0;
        prop_assert_eq!(direct.values(), composed.values());
    }
}
