#![allow(dead_code)]

use proptest::prelude::*;
use qspace_core::grid_wave::{make_state, Grid1D, Mode, StateSpec, Units, Wavefunction};

pub fn state(spec: &StateSpec, points: usize) -> Wavefunction<f64> {
    make_state(spec, Grid1D::new(1.0, points).unwrap(), Units::default()).unwrap()
}

/// Arbitrary superposition of box modes `-3..=3` with at least one sizeable amplitude.
pub fn superposition() -> impl Strategy<Value = StateSpec> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7)
        .prop_filter("non-trivial", |a| a.iter().any(|(re, im)| re.hypot(*im) > 0.2))
        .prop_map(|amps| StateSpec::Superposition {
            modes: amps
                .into_iter()
                .zip(-3i64..=3)
                .map(|((re, im), mode)| Mode { mode, re, im })
                .collect(),
        })
}

/// Two modes `|j|, |k| <= max_mode` with moduli `1` and `b <= max_b`, so `|ψ|`
/// stays at least `1 - max_b` (over `√L`) away from zero.
pub fn nodeless_pair(max_mode: i64, max_b: f64) -> impl Strategy<Value = StateSpec> {
    (
        -max_mode..=max_mode,
        -max_mode..=max_mode,
        0.1f64..max_b,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_filter("distinct modes", |(j, k, _, _)| j != k)
        .prop_map(|(j, k, b, phase)| StateSpec::Superposition {
            modes: vec![
                Mode {
                    mode: j,
                    re: 1.0,
                    im: 0.0,
                },
                Mode {
                    mode: k,
                    re: b * phase.cos(),
                    im: b * phase.sin(),
                },
            ],
        })
}
