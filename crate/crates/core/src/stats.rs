//! Goodness-of-fit helpers for Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square test of observed counts against bin probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins left after merging sparse neighbours.
    pub bins: usize,
}

/// Adjacent bins are merged left to right until each expected count is at
/// least `min_expected` (a trailing remainder joins the last group).
pub fn chi_square(observed: &[u64], probabilities: &[f64], min_expected: f64) -> ChiSquareTest {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    let norm: f64 = probabilities.iter().sum();
    let n = total as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&c, &p) in observed.iter().zip(probabilities) {
        o += c as f64;
        e += n * p / norm;
        if e >= min_expected {
            groups.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => groups.push((o, e)),
        }
    }
    let statistic: f64 = groups.iter().map(|&(o, e)| (o - e).powi(2) / e).sum();
    let dof = groups.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
        bins: groups.len(),
    }
}
