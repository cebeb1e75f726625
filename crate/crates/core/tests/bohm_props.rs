mod common;

use common::{nodeless_pair, state};
use proptest::prelude::*;
use qspace_core::bohm::integrate_many;
use qspace_core::grid_wave::Potential;
use qspace_core::qmap::transport_check;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_never_cross(spec in nodeless_pair(2, 0.6), mut starts in prop::collection::vec(0.0f64..1.0, 2..6)) {
        starts.sort_by(f64::total_cmp);
        starts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let psi = state(&spec, 128);
        let trs = integrate_many(&psi, &Potential::zero(psi.grid()), &starts, 0.05, 1e-4).unwrap();
        for i in 0..trs[0].times().len() {
            for w in trs.windows(2) {
                prop_assert!(w[0].unwrapped()[i] < w[1].unwrapped()[i]);
            }
            prop_assert!(trs[trs.len() - 1].unwrapped()[i] - trs[0].unwrapped()[i] < 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn quantile_is_conserved_along_trajectories(spec in nodeless_pair(2, 0.6), x0 in 0.0f64..1.0) {
        let psi = state(&spec, 512);
        let dev = transport_check(&psi, &Potential::zero(psi.grid()), x0, 0.2, 1e-4).unwrap();
        prop_assert!(dev < 1e-4, "{dev:e}");
    }
}
