//! Node-crossing counts for sampled walker paths.
//!
//! The same detector is applied to every dynamics. A walker's side of a node
//! is read only at sample times where it is outside an exclusion band around
//! the node; a crossing is a change of side between two such readings.

use serde::Serialize;

use crate::real::{wrap_signed, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingDetector<T: Real> {
    nodes: Vec<T>,
    band: T,
    period: T,
}

impl<T: Real> CrossingDetector<T> {
    /// `band` is the half-width of the exclusion zone around each node.
    pub fn new(nodes: Vec<T>, band: T, period: T) -> Self {
        Self { nodes, band, period }
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn band(&self) -> T {
        self.band
    }

    /// Crossings along one walker's samples, summed over nodes.
    pub fn count(&self, path: impl IntoIterator<Item = T> + Clone) -> u64 {
        let half = self.period * T::lit(0.5);
        self.nodes
            .iter()
            .map(|&node| {
                let mut last: Option<T> = None;
                let mut hits = 0;
                for x in path.clone() {
                    let d = wrap_signed(x - node, self.period);
                    if d.abs() <= self.band {
                        continue;
                    }
                    if let Some(prev) = last {
                        // A jump through the antipode is not a crossing of this node.
                        if (prev < T::zero()) != (d < T::zero()) && (d - prev).abs() < half {
                            hits += 1;
                        }
                    }
                    last = Some(d);
                }
                hits
            })
            .sum()
    }

    /// Per-walker counts for positions stored as `positions[sample][walker]`.
    pub fn count_ensemble(&self, positions: &[Vec<T>]) -> Vec<u64> {
        let walkers = positions.first().map_or(0, Vec::len);
        (0..walkers)
            .map(|w| self.count(positions.iter().map(move |xs| xs[w])))
            .collect()
    }
}

/// Crossings per walker per unit time with a normal-approximation 95% interval
/// taken over walkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingRate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub walkers: usize,
    pub crossings: u64,
}

impl CrossingRate {
    pub fn from_counts(counts: &[u64], duration: f64) -> Self {
        let m = counts.len();
        let total: u64 = counts.iter().sum();
        if m == 0 || duration <= 0.0 {
            return Self {
                rate: 0.0,
                ci_low: 0.0,
                ci_high: 0.0,
                walkers: m,
                crossings: total,
            };
        }
        let rates: Vec<f64> = counts.iter().map(|&c| c as f64 / duration).collect();
        let mean = rates.iter().sum::<f64>() / m as f64;
        let var = if m > 1 {
            rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64
        } else {
            0.0
        };
        let half = 1.96 * (var / m as f64).sqrt();
        Self {
            rate: mean,
            ci_low: (mean - half).max(0.0),
            ci_high: mean + half,
            walkers: m,
            crossings: total,
        }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_sign_changes_outside_band() {
        let det = CrossingDetector::new(vec![0.25], 0.01, 1.0);
        assert_eq!(det.count([0.2, 0.3, 0.2]), 2);
        // Entering the band and leaving on the same side is not a crossing.
        assert_eq!(det.count([0.2, 0.245, 0.2]), 0);
        // Passing through the band counts once both sides are seen.
        assert_eq!(det.count([0.2, 0.25, 0.3]), 1);
        // Wrapping through the antipode does not count.
        assert_eq!(det.count([0.7, 0.8]), 0);
    }

    #[test]
    fn counts_each_node() {
        let det = CrossingDetector::new(vec![0.25, 0.75], 0.01, 1.0);
        assert_eq!(det.count([0.5, 0.9, 0.1, 0.5]), 2);
        assert_eq!(det.count_ensemble(&[vec![0.2, 0.5], vec![0.3, 0.5]]), vec![1, 0]);
    }

    #[test]
    fn rate_interval_brackets_mean() {
        let r = CrossingRate::from_counts(&[0, 2, 4, 2], 2.0);
        assert_eq!(r.rate, 1.0);
        assert!(r.ci_low < 1.0 && r.ci_high > 1.0);
        assert_eq!(r.crossings, 8);
        let z = CrossingRate::from_counts(&[0, 0], 1.0);
        assert_eq!((z.rate, z.ci_low, z.ci_high), (0.0, 0.0, 0.0));
        assert!(z.overlaps(&r) == (r.ci_low <= 0.0));
    }
}
