use kinsplit::grid::TorusGrid;
use kinsplit::model::builtin_problem;
use kinsplit::splitting::{run_splitting, SplitPlan};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partitions_are_capped_and_reach_the_horizon(
        eps in 0.03f64..1.5,
        name in prop::sample::select(vec!["burgers", "burgers-noise", "degenerate-transport", "pure-sde"]),
        seed in 0u64..1000,
    ) {
        let spec = builtin_problem(name).unwrap();
        let plan = SplitPlan::new(&spec, eps, seed, &[]).unwrap();
        let run = run_splitting(&spec, TorusGrid::one_d(16).unwrap(), 3, &plan).unwrap();
        let p = &run.partition;
        prop_assert_eq!(p.times[0], 0.0);
        prop_assert_eq!(*p.times.last().unwrap(), spec.horizon);
        prop_assert!(p.cells() >= (spec.horizon / eps - 1e-12).ceil() as usize);
        for w in p.widths() {
            prop_assert!(w > 0.0 && w <= eps + 1e-14, "width {} for eps {}", w, eps);
        }
        for c in &run.cells {
            prop_assert!(c.vtilde_increment <= 2.0 * eps);
        }
    }
}
