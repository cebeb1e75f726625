//! Entropies, histogram volume counting, typicality and maximum-entropy
//! densities. All entropies are in nats.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::grid_wave::{density, Grid1D, Wavefunction};
use crate::qmap::QMap;
use crate::real::Real;

/// Largest `M` for which [`sequence_count`] returns the exact integer.
pub const MAX_EXACT_SEQUENCE_M: u64 = 64;

/// Largest number of moment constraints accepted by [`MaxEntProblem`].
pub const MAX_MOMENTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("probabilities must be non-negative and sum to 1 (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("M = {0} exceeds the exact-count limit; use log_sequence_count")]
    SequenceOverflow(u64),
    #[error("volume law needs M >= 2, got {0}")]
    TooFewSamples(u64),
    #[error("density is positive where the measure vanishes (x index {index}); entropy is -inf")]
    SupportViolation { index: usize },
    #[error("array lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("negative or non-finite value at index {0}")]
    InvalidValue(usize),
    #[error("cell of {cell} is not a whole number of grid spacings {dx}")]
    IncommensurateCell { cell: f64, dx: f64 },
    #[error("interval [{0}, {1}) is malformed or outside the domain")]
    MalformedInterval(f64, f64),
    #[error("intervals overlap at {0}")]
    OverlappingIntervals(f64),
}

/// `−Σ pᵢ ln pᵢ` with `0 ln 0 = 0`.
pub fn discrete_entropy<T: Real>(p: &[T]) -> Result<T, EntropyError> {
    if let Some(i) = p.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
        return Err(EntropyError::InvalidValue(i));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
        return Err(EntropyError::NotNormalized { sum: sum.as_f64() });
    }
    Ok(-p.iter().filter(|&&v| v > T::zero()).map(|&v| v * v.ln()).sum::<T>())
}

/// Equal-width bins covering `[0, L)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    /// Bin `samples` into `bins` cells of `[0, length)`; samples are wrapped.
    pub fn from_samples<T: Real>(samples: &[T], bins: usize, length: T) -> Self {
        let mut counts = vec![0u64; bins];
        let scale = T::of_usize(bins) / length;
        for &x in samples {
            let s = crate::real::wrap(x, length) * scale;
            let b = s.to_usize().unwrap_or(0).min(bins - 1);
            counts[b] += 1;
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin edges for a domain of length `length`.
    pub fn edges(&self, length: f64) -> Vec<f64> {
        let n = self.bins();
        (0..=n).map(|i| length * i as f64 / n as f64).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / m).collect()
    }
}

/// `S_h = −M⁻¹ Σ mᵢ ln(mᵢ/M)`.
pub fn histogram_entropy(h: &Histogram) -> Result<f64, EntropyError> {
    let m = h.total();
    if m == 0 {
        return Err(EntropyError::EmptyHistogram);
    }
    let mf = m as f64;
    Ok(-h
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / mf * (c as f64 / mf).ln())
        .sum::<f64>())
}

fn multinomial(counts: &[u64]) -> BigUint {
    // Product of binomials C(m₁+…+mᵢ, mᵢ), each built incrementally so every
    // intermediate division is exact.
    let mut out = BigUint::one();
    let mut seen = 0u64;
    for &c in counts {
        for j in 1..=c {
            seen += 1;
            out *= BigUint::from(seen);
            out /= BigUint::from(j);
        }
    }
    out
}

/// Exact multinomial `M!/(m₁!⋯mₙ!)` for `M ≤ 64`.
pub fn sequence_count(h: &Histogram) -> Result<BigUint, EntropyError> {
    let m = h.total();
    if m > MAX_EXACT_SEQUENCE_M {
        return Err(EntropyError::SequenceOverflow(m));
    }
    Ok(multinomial(&h.counts))
}

fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().expect("64 bits");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln W` from the exact integer, for any `M`.
pub fn log_sequence_count(h: &Histogram) -> f64 {
    ln_big(&multinomial(&h.counts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeLaw {
    pub ratio: f64,
    pub ln_w: f64,
    pub entropy: f64,
    /// `S_h = 0` and `W = 1`: the ratio is 1 by convention.
    pub degenerate: bool,
}

/// `ln W / (M S_h)` with `ln W` taken from the exact multinomial.
pub fn volume_law_ratio(h: &Histogram) -> Result<VolumeLaw, EntropyError> {
    let m = h.total();
    if m < 2 {
        return Err(EntropyError::TooFewSamples(m));
    }
    let entropy = histogram_entropy(h)?;
    let ln_w = log_sequence_count(h);
    if entropy == 0.0 {
        return Ok(VolumeLaw {
            ratio: 1.0,
            ln_w,
            entropy,
            degenerate: true,
        });
    }
    Ok(VolumeLaw {
        ratio: ln_w / (m as f64 * entropy),
        ln_w,
        entropy,
        degenerate: false,
    })
}

fn check_pair<T: Real>(a: &[T], b: &[T]) -> Result<(), EntropyError> {
    if a.len() != b.len() {
        return Err(EntropyError::LengthMismatch(a.len(), b.len()));
    }
    for (i, v) in a.iter().chain(b).enumerate() {
        if !(v.is_finite() && *v >= T::zero()) {
            return Err(EntropyError::InvalidValue(i % a.len().max(1)));
        }
    }
    Ok(())
}

/// `−∫ ρ ln(ρ/m) dx` with explicit quadrature weights.
pub fn relative_entropy_weighted<T: Real>(rho: &[T], measure: &[T], weights: &[T]) -> Result<T, EntropyError> {
    check_pair(rho, measure)?;
    if weights.len() != rho.len() {
        return Err(EntropyError::LengthMismatch(rho.len(), weights.len()));
    }
    let mut acc = T::zero();
    for (i, ((&r, &m), &w)) in rho.iter().zip(measure).zip(weights).enumerate() {
        if r == T::zero() {
            continue;
        }
        if m == T::zero() {
            return Err(EntropyError::SupportViolation { index: i });
        }
        acc += w * r * (r / m).ln();
    }
    Ok(-acc)
}

/// `−∫ ρ ln(ρ/m) dx` on a periodic grid, where the trapezoid rule is a plain
/// sum times `dx`.
pub fn relative_entropy<T: Real>(rho: &[T], measure: &[T], grid: &Grid1D<T>) -> Result<T, EntropyError> {
    let weights = vec![grid.dx(); rho.len()];
    relative_entropy_weighted(rho, measure, &weights)
}

fn cell_points<T: Real>(grid: &Grid1D<T>, cell: T) -> Result<usize, EntropyError> {
    let ratio = cell / grid.dx();
    let n = ratio.round();
    let err = || EntropyError::IncommensurateCell {
        cell: cell.as_f64(),
        dx: grid.dx().as_f64(),
    };
    if !(n >= T::one()) || (ratio - n).abs() > T::lit(1e-9) * n {
        return Err(err());
    }
    let n = n.to_usize().ok_or_else(err)?;
    if !grid.points().is_multiple_of(n) {
        return Err(err());
    }
    Ok(n)
}

/// Averages of grid samples over consecutive cells of `per_cell` points.
pub fn cell_averages<T: Real>(values: &[T], per_cell: usize) -> Vec<T> {
    values
        .chunks(per_cell)
        .map(|c| c.iter().copied().sum::<T>() / T::of_usize(c.len()))
        .collect()
}

fn coarse_from_averages<T: Real>(rho_bar: &[T], psi_bar: &[T], cell: T) -> Result<T, EntropyError> {
    let mut acc = T::zero();
    for (i, (&r, &p)) in rho_bar.iter().zip(psi_bar).enumerate() {
        if r == T::zero() {
            continue;
        }
        if p == T::zero() {
            return Err(EntropyError::SupportViolation { index: i });
        }
        acc += cell * r * (r / p).ln();
    }
    Ok(acc)
}

/// Coarse-grained `H̄ = ∫ ρ̄ ln(ρ̄/|ψ|²̄)` over equal cells of width `cell`.
pub fn coarse_h<T: Real>(rho: &[T], psi_density: &[T], grid: &Grid1D<T>, cell: T) -> Result<T, EntropyError> {
    check_pair(rho, psi_density)?;
    if rho.len() != grid.points() {
        return Err(EntropyError::LengthMismatch(rho.len(), grid.points()));
    }
    let per = cell_points(grid, cell)?;
    coarse_from_averages(&cell_averages(rho, per), &cell_averages(psi_density, per), cell)
}

/// [`coarse_h`] with `ρ̄` estimated from walker positions.
pub fn coarse_h_samples<T: Real>(
    samples: &[T],
    psi_density: &[T],
    grid: &Grid1D<T>,
    cell: T,
) -> Result<T, EntropyError> {
    if psi_density.len() != grid.points() {
        return Err(EntropyError::LengthMismatch(psi_density.len(), grid.points()));
    }
    if samples.is_empty() {
        return Err(EntropyError::EmptyHistogram);
    }
    let per = cell_points(grid, cell)?;
    let cells = grid.points() / per;
    let hist = Histogram::from_samples(samples, cells, grid.length());
    let m = T::of_usize(samples.len());
    let rho_bar: Vec<T> = hist.counts().iter().map(|&c| T::lit(c as f64) / (m * cell)).collect();
    coarse_from_averages(&rho_bar, &cell_averages(psi_density, per), cell)
}

/// `Σ pᵢ ln(pᵢ/qᵢ)` for probability vectors.
pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T, EntropyError> {
    check_pair(p, q)?;
    let mut acc = T::zero();
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a == T::zero() {
            continue;
        }
        if b == T::zero() {
            return Err(EntropyError::SupportViolation { index: i });
        }
        acc += a * (a / b).ln();
    }
    Ok(acc)
}

/// Bin probabilities of a grid density: the integral over each of `bins`
/// equal cells, by the periodic trapezoid rule.
pub fn bin_probabilities<T: Real>(rho: &[T], grid: &Grid1D<T>, bins: usize) -> Result<Vec<T>, EntropyError> {
    let cell = grid.length() / T::of_usize(bins);
    let per = cell_points(grid, cell)?;
    let p = rho.len();
    let dx = grid.dx();
    let half = T::lit(0.5);
    Ok((0..bins)
        .map(|b| {
            let start = b * per;
            (0..per)
                .map(|i| half * (rho[start + i] + rho[(start + i + 1) % p]) * dx)
                .sum()
        })
        .collect())
}

/// KL divergence of a walker histogram from `|ψ|²`, both binned on `bins` cells.
pub fn histogram_kl<T: Real>(samples: &[T], rho: &[T], grid: &Grid1D<T>, bins: usize) -> Result<T, EntropyError> {
    if samples.is_empty() {
        return Err(EntropyError::EmptyHistogram);
    }
    let hist = Histogram::from_samples(samples, bins, grid.length());
    let p: Vec<T> = hist.probabilities().into_iter().map(T::lit).collect();
    let q = bin_probabilities(rho, grid, bins)?;
    kl_divergence(&p, &q)
}

/// `3 (bins − 1) / 2M`: three times the expected KL of an `M`-sample
/// histogram drawn from the reference itself.
pub fn kl_floor(bins: usize, walkers: usize) -> f64 {
    3.0 * (bins as f64 - 1.0) / (2.0 * walkers as f64)
}

/// Disjoint union of half-open intervals in `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet<T: Real> {
    intervals: Vec<(T, T)>,
}

impl<T: Real> IntervalSet<T> {
    pub fn new(mut intervals: Vec<(T, T)>, length: T) -> Result<Self, EntropyError> {
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a >= T::zero() && a <= b && b <= length) {
                return Err(EntropyError::MalformedInterval(a.as_f64(), b.as_f64()));
            }
        }
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(EntropyError::OverlappingIntervals(w[1].0.as_f64()));
            }
        }
        Ok(Self { intervals })
    }

    pub fn full(length: T) -> Self {
        Self {
            intervals: vec![(T::zero(), length)],
        }
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn measure(&self) -> T {
        self.intervals.iter().map(|&(a, b)| b - a).sum()
    }
}

/// `∫_A |ψ|² dx`, using the exact antiderivative of the band-limited density.
pub fn typicality<T: Real>(psi: &Wavefunction<T>, set: &IntervalSet<T>) -> T {
    let anti = psi.spectral().antiderivative(&density(psi));
    set.intervals.iter().map(|&(a, b)| anti.eval(b) - anti.eval(a)).sum()
}

/// The same measure read off the q-map: `q-volume(A) / L`.
pub fn typicality_from_map<T: Real>(map: &QMap<T>, set: &IntervalSet<T>) -> T {
    let l = map.grid().length();
    set.intervals.iter().map(|&(a, b)| map.q_volume(a, b)).sum::<T>() / l
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxEntError {
    #[error("at most {MAX_MOMENTS} moment constraints are supported, got {0}")]
    TooManyConstraints(usize),
    #[error("measure must be non-negative with positive mass")]
    InvalidMeasure,
    #[error("abscissae, measure and weights must have equal length")]
    LengthMismatch,
    #[error("moments are not realizable: multipliers diverged (|λ| = {norm:e})")]
    NotRealizable { norm: f64 },
    #[error("Newton iteration stalled with moment residual {residual:e}")]
    NoConvergence { residual: f64 },
}

/// Maximum-entropy density `ρ ∝ m(x) exp(−Σ λₖ xᵏ)` subject to `∫ρ xᵏ = fₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntProblem<T: Real> {
    xs: Vec<T>,
    measure: Vec<T>,
    weights: Vec<T>,
    targets: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntSolution<T: Real> {
    pub lambda: Vec<T>,
    pub partition: T,
    pub density: Vec<T>,
    pub residuals: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> MaxEntProblem<T> {
    pub fn new(xs: Vec<T>, measure: Vec<T>, weights: Vec<T>, targets: Vec<T>) -> Result<Self, MaxEntError> {
        if xs.len() != measure.len() || xs.len() != weights.len() || xs.is_empty() {
            return Err(MaxEntError::LengthMismatch);
        }
        if targets.len() > MAX_MOMENTS {
            return Err(MaxEntError::TooManyConstraints(targets.len()));
        }
        let valid = |v: &T| v.is_finite() && *v >= T::zero();
        if !measure.iter().all(valid) || !weights.iter().all(valid) {
            return Err(MaxEntError::InvalidMeasure);
        }
        let mass: T = measure.iter().zip(&weights).map(|(&m, &w)| m * w).sum();
        if !(mass > T::zero()) {
            return Err(MaxEntError::InvalidMeasure);
        }
        Ok(Self {
            xs,
            measure,
            weights,
            targets,
        })
    }

    /// `n + 1` nodes on `[a, b]` with trapezoid weights.
    pub fn on_interval(a: T, b: T, n: usize, measure: impl Fn(T) -> T, targets: Vec<T>) -> Result<Self, MaxEntError> {
        let h = (b - a) / T::of_usize(n);
        let xs: Vec<T> = (0..=n).map(|i| a + h * T::of_usize(i)).collect();
        let mut weights = vec![h; n + 1];
        weights[0] = h * T::lit(0.5);
        weights[n] = h * T::lit(0.5);
        let m = xs.iter().map(|&x| measure(x)).collect();
        Self::new(xs, m, weights, targets)
    }

    /// Grid nodes of a periodic domain with the measure sampled on them.
    pub fn periodic(grid: &Grid1D<T>, measure: Vec<T>, targets: Vec<T>) -> Result<Self, MaxEntError> {
        Self::new(grid.positions(), measure, vec![grid.dx(); grid.points()], targets)
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn measure(&self) -> &[T] {
        &self.measure
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    fn features(&self, x: T) -> [T; MAX_MOMENTS] {
        let mut out = [T::zero(); MAX_MOMENTS];
        let mut p = T::one();
        for f in out.iter_mut().take(self.targets.len()) {
            p *= x;
            *f = p;
        }
        out
    }

    /// Unnormalised log-weights `ln m(x) − Σλₖxᵏ` and `ln Z`.
    fn log_partition(&self, lambda: &[T]) -> (Vec<T>, T) {
        let logs: Vec<T> = self
            .xs
            .iter()
            .zip(&self.measure)
            .zip(&self.weights)
            .map(|((&x, &m), &w)| {
                if m == T::zero() || w == T::zero() {
                    return T::neg_infinity();
                }
                let f = self.features(x);
                let s: T = lambda.iter().zip(f.iter()).map(|(&l, &v)| l * v).sum();
                (m * w).ln() - s
            })
            .collect();
        let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = logs.iter().map(|&v| (v - top).exp()).sum();
        (logs, top + sum.ln())
    }

    fn dual(&self, lambda: &[T]) -> T {
        let (_, ln_z) = self.log_partition(lambda);
        ln_z + lambda.iter().zip(&self.targets).map(|(&l, &f)| l * f).sum::<T>()
    }

    /// Moments and covariance of the features under the current density.
    fn moments(&self, lambda: &[T]) -> (Vec<T>, Vec<Vec<T>>, Vec<T>) {
        let k = self.targets.len();
        let (logs, ln_z) = self.log_partition(lambda);
        // Probability mass per node.
        let mass: Vec<T> = logs.iter().map(|&v| (v - ln_z).exp()).collect();
        let mut mean = vec![T::zero(); k];
        let mut second = vec![vec![T::zero(); k]; k];
        for (&x, &p) in self.xs.iter().zip(&mass) {
            let f = self.features(x);
            for i in 0..k {
                mean[i] += p * f[i];
                for j in 0..k {
                    second[i][j] += p * f[i] * f[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                second[i][j] -= mean[i] * mean[j];
            }
        }
        (mean, second, mass)
    }

    /// Damped Newton on the convex dual `ln Z(λ) + Σ λₖ fₖ`, from `λ = 0`.
    pub fn solve(&self) -> Result<MaxEntSolution<T>, MaxEntError> {
        let k = self.targets.len();
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(64.0));
        let mut lambda = vec![T::zero(); k];
        let mut iterations = 0;
        loop {
            let (mean, cov, _) = self.moments(&lambda);
            let grad: Vec<T> = self.targets.iter().zip(&mean).map(|(&f, &m)| f - m).collect();
            let residual = grad.iter().fold(T::zero(), |a, g| a.max(g.abs()));
            if residual <= tol {
                break;
            }
            if iterations >= 200 {
                return Err(MaxEntError::NoConvergence {
                    residual: residual.as_f64(),
                });
            }
            iterations += 1;
            let step = match cholesky_solve(&cov, &grad) {
                Some(s) => s,
                None => {
                    return Err(MaxEntError::NotRealizable {
                        norm: norm(&lambda).as_f64(),
                    })
                }
            };
            // ∇ = f − E[x], ∇² = Cov[x]; Newton moves λ by −∇²⁻¹∇.
            // Rounding floor: the step no longer moves λ measurably.
            if norm(&step) <= T::lit(1e-13) * (T::one() + norm(&lambda)) && residual <= T::lit(1e-9) {
                break;
            }
            let before = self.dual(&lambda);
            let decrease: T = grad.iter().zip(&step).map(|(&g, &s)| g * s).sum::<T>() * T::lit(0.5);
            let mut t = T::one();
            let mut accepted = false;
            if decrease <= T::lit(1e3) * T::epsilon() * (T::one() + before.abs()) {
                // Below the resolution of the dual: the quadratic model is exact enough.
                lambda.iter_mut().zip(&step).for_each(|(l, &s)| *l -= s);
                continue;
            }
            for _ in 0..30 {
                let trial: Vec<T> = lambda.iter().zip(&step).map(|(&l, &s)| l - t * s).collect();
                let value = self.dual(&trial);
                if value.is_finite() && value <= before {
                    lambda = trial;
                    accepted = true;
                    break;
                }
                t *= T::lit(0.5);
            }
            let size = norm(&lambda);
            if !size.is_finite() || size > T::lit(1e8) {
                return Err(MaxEntError::NotRealizable { norm: size.as_f64() });
            }
            if !accepted {
                let (mean, _, _) = self.moments(&lambda);
                let r = self
                    .targets
                    .iter()
                    .zip(&mean)
                    .fold(T::zero(), |a, (&f, &m)| a.max((f - m).abs()));
                if r <= T::lit(1e-10) {
                    break;
                }
                return Err(MaxEntError::NotRealizable { norm: size.as_f64() });
            }
        }
        let (mean, _, mass) = self.moments(&lambda);
        let (_, ln_z) = self.log_partition(&lambda);
        // Z = ∫ m exp(−Σλx) dx; the density divides the integrand by Z.
        let partition = ln_z.exp();
        let density = self
            .xs
            .iter()
            .zip(&self.measure)
            .zip(mass.iter().zip(&self.weights))
            .map(|((&x, &m), (&p, &w))| {
                if w > T::zero() {
                    p / w
                } else {
                    let f = self.features(x);
                    let s: T = lambda.iter().zip(f.iter()).map(|(&l, &v)| l * v).sum();
                    m * (-s).exp() / partition
                }
            })
            .collect();
        let residuals = self.targets.iter().zip(&mean).map(|(&f, &m)| m - f).collect();
        Ok(MaxEntSolution {
            lambda,
            partition,
            density,
            residuals,
            iterations,
        })
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Solve `A x = b` for small symmetric positive definite `A`.
fn cholesky_solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: T = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > T::zero()) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let s: T = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s: T = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_wave::{make_state, StateSpec, Units};
    use crate::qmap::build_qmap;

    #[test]
    fn discrete_entropy_values() {
        assert!((discrete_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(discrete_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((discrete_entropy(&[0.25f64; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(
            discrete_entropy(&[0.5, 0.4]),
            Err(EntropyError::NotNormalized { .. })
        ));
        assert_eq!(discrete_entropy(&[1.5, -0.5]), Err(EntropyError::InvalidValue(1)));
    }

    #[test]
    fn histogram_entropy_values() {
        let h = |c: &[u64]| histogram_entropy(&Histogram::from_counts(c.to_vec())).unwrap();
        assert!((h(&[2, 2]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(h(&[4, 0]), 0.0);
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((h(&[3, 1]) - expected).abs() < 1e-15);
        assert!((h(&[3, 1]) - 0.5623351446188083).abs() < 1e-15);
        assert_eq!(
            histogram_entropy(&Histogram::from_counts(vec![0, 0])),
            Err(EntropyError::EmptyHistogram)
        );
    }

    #[test]
    fn histogram_from_samples_wraps() {
        let h = Histogram::from_samples(&[0.1, 0.6, 1.1, -0.2, 0.999_999], 2, 1.0);
        assert_eq!(h.counts(), &[2, 3]);
        assert_eq!(h.edges(1.0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn sequence_counts() {
        let w = |c: &[u64]| sequence_count(&Histogram::from_counts(c.to_vec())).unwrap();
        assert_eq!(w(&[2, 2]), BigUint::from(6u32));
        assert_eq!(w(&[4, 0]), BigUint::from(1u32));
        assert_eq!(w(&[1, 1, 1, 1]), BigUint::from(24u32));
        assert_eq!(w(&[32, 32]), "1832624140942590534".parse::<BigUint>().unwrap());
        assert_eq!(
            sequence_count(&Histogram::from_counts(vec![40, 25])),
            Err(EntropyError::SequenceOverflow(65))
        );
    }

    #[test]
    fn log_sequence_count_handles_large_m() {
        // ln C(2n, n) against the ln-gamma form.
        let n = 5000u64;
        let exact = log_sequence_count(&Histogram::from_counts(vec![n, n]));
        let lg = |x: f64| statrs::function::gamma::ln_gamma(x);
        let approx = lg(2.0 * n as f64 + 1.0) - 2.0 * lg(n as f64 + 1.0);
        assert!((exact - approx).abs() < 1e-8 * exact);
    }

    #[test]
    fn volume_law_degenerate_and_small() {
        let r = volume_law_ratio(&Histogram::from_counts(vec![4, 0])).unwrap();
        assert!(r.degenerate && r.ratio == 1.0);
        assert_eq!(
            volume_law_ratio(&Histogram::from_counts(vec![1])),
            Err(EntropyError::TooFewSamples(1))
        );
        let r = volume_law_ratio(&Histogram::from_counts(vec![2, 2])).unwrap();
        assert!((r.ratio - 6f64.ln() / (4.0 * 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_of_born_density_is_ln_length() {
        let g = Grid1D::<f64>::new(2.0, 256).unwrap();
        let psi = make_state(&StateSpec::two_mode(1, 1.0, 3, 0.5), g, Units::default()).unwrap();
        let rho = density(&psi);
        let omega: Vec<f64> = rho.iter().map(|r| 2.0 * r).collect();
        let s = relative_entropy(&rho, &omega, &g).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn concentrated_density_gives_ln_dx() {
        let g = Grid1D::<f64>::new(1.0, 128).unwrap();
        let mut rho = vec![0.0; 128];
        rho[7] = 128.0;
        let s = relative_entropy(&rho, &vec![1.0; 128], &g).unwrap();
        assert!((s - (1.0f64 / 128.0).ln()).abs() < 1e-12);
        let mut m = vec![1.0; 128];
        m[7] = 0.0;
        assert_eq!(
            relative_entropy(&rho, &m, &g),
            Err(EntropyError::SupportViolation { index: 7 })
        );
    }

    #[test]
    fn coarse_h_against_direct_sum() {
        let g = Grid1D::<f64>::new(1.0, 512).unwrap();
        let psi = make_state(&StateSpec::SinSquared, g, Units::default()).unwrap();
        let rho_psi = density(&psi);
        let uniform = vec![1.0; 512];
        let h = coarse_h(&uniform, &rho_psi, &g, 1.0 / 16.0).unwrap();
        // Brute force: cell averages of 2 sin²(πx) on the grid nodes.
        let mut oracle = 0.0;
        for c in 0..16 {
            let mut avg = 0.0;
            for i in 0..32 {
                let x = (c * 32 + i) as f64 / 512.0;
                avg += 2.0 * (std::f64::consts::PI * x).sin().powi(2);
            }
            avg /= 32.0;
            oracle += (1.0 / 16.0) * (1.0f64 / avg).ln();
        }
        assert!((h - oracle).abs() < 1e-12, "{h} vs {oracle}");
        assert!(coarse_h(&rho_psi, &rho_psi, &g, 1.0 / 16.0).unwrap().abs() < 1e-15);
        assert!(matches!(
            coarse_h(&uniform, &rho_psi, &g, 0.01),
            Err(EntropyError::IncommensurateCell { .. })
        ));
    }

    #[test]
    fn kl_floor_value() {
        assert!((kl_floor(64, 10_000) - 9.45e-3).abs() < 1e-12);
    }

    #[test]
    fn typicality_matches_q_volume() {
        let g = Grid1D::<f64>::new(1.0, 512).unwrap();
        let psi = make_state(
            &StateSpec::Gaussian {
                center: 0.4,
                width: 0.07,
                wavenumber: 10.0,
            },
            g,
            Units::default(),
        )
        .unwrap();
        let map = build_qmap(&psi);
        assert!((typicality(&psi, &IntervalSet::full(1.0f64)) - 1.0).abs() < 1e-12);
        let set = IntervalSet::new(vec![(0.1, 0.35), (0.5, 0.62)], 1.0).unwrap();
        let (a, b) = (typicality(&psi, &set), typicality_from_map(&map, &set));
        assert!((a - b).abs() < 1e-9, "{a} {b} {}", a - b);
        let sym = make_state(&StateSpec::SinSquared, g, Units::default()).unwrap();
        let half = IntervalSet::new(vec![(0.0, 0.5)], 1.0).unwrap();
        assert!((typicality(&sym, &half) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn malformed_intervals_rejected() {
        assert!(IntervalSet::new(vec![(0.5, 0.2)], 1.0).is_err());
        assert!(IntervalSet::new(vec![(0.0, 1.5)], 1.0).is_err());
        assert_eq!(
            IntervalSet::new(vec![(0.0, 0.5), (0.4, 0.6)], 1.0),
            Err(EntropyError::OverlappingIntervals(0.4))
        );
    }

    #[test]
    fn maxent_without_constraints_is_normalised_measure() {
        let p = MaxEntProblem::on_interval(0.0, 1.0, 200, |x: f64| 1.0 + x * x, vec![]).unwrap();
        let sol = p.solve().unwrap();
        let mass: f64 = p.measure().iter().zip(p.weights()).map(|(m, w)| m * w).sum();
        assert!((sol.partition - mass).abs() < 1e-14);
        for (r, m) in sol.density.iter().zip(p.measure()) {
            assert!((r - m / mass).abs() < 1e-14);
        }
    }

    #[test]
    fn maxent_mean_half_is_uniform() {
        let p = MaxEntProblem::on_interval(0.0, 1.0, 400, |_| 1.0f64, vec![0.5]).unwrap();
        let sol = p.solve().unwrap();
        assert!(sol.lambda[0].abs() < 1e-12);
        assert!(sol.density.iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn maxent_mean_point_six_matches_root_find() {
        let n = 400;
        let p = MaxEntProblem::on_interval(0.0, 1.0, n, |_| 1.0, vec![0.6]).unwrap();
        let sol = p.solve().unwrap();
        // Independent bisection on the trapezoid mean as a function of λ.
        let mean = |lam: f64| {
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..=n {
                let x = i as f64 / n as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let e = w * (-lam * x).exp();
                num += x * e;
                den += e;
            }
            num / den
        };
        let (mut lo, mut hi) = (-10.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean(mid) > 0.6 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((sol.lambda[0] - oracle).abs() < 1e-8, "{} vs {oracle}", sol.lambda[0]);
        assert!(sol.residuals[0].abs() < 1e-8);
    }

    #[test]
    fn maxent_four_moments_converge() {
        // Moments of a known exponential-family member are realizable by construction.
        let n = 400;
        let truth = [0.3, -1.0, 2.0, -0.5];
        let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let w: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.5 } else { 1.0 } / n as f64)
            .collect();
        let un: Vec<f64> = xs
            .iter()
            .map(|&x| (-(truth[0] * x + truth[1] * x * x + truth[2] * x.powi(3) + truth[3] * x.powi(4))).exp())
            .collect();
        let z: f64 = un.iter().zip(&w).map(|(u, w)| u * w).sum();
        let f: Vec<f64> = (1..=4)
            .map(|k| {
                xs.iter()
                    .zip(&un)
                    .zip(&w)
                    .map(|((x, u), w)| x.powi(k) * u * w)
                    .sum::<f64>()
                    / z
            })
            .collect();
        let sol = MaxEntProblem::new(xs, vec![1.0; n + 1], w, f).unwrap().solve().unwrap();
        assert!(sol.residuals.iter().all(|r| r.abs() < 1e-8));
        for (l, t) in sol.lambda.iter().zip(truth) {
            assert!((l - t).abs() < 1e-5, "{l} vs {t}");
        }
    }

    #[test]
    fn maxent_rejects_unrealizable_moments() {
        let p = MaxEntProblem::on_interval(0.0, 1.0, 100, |_| 1.0, vec![1.2]).unwrap();
        assert!(matches!(p.solve(), Err(MaxEntError::NotRealizable { .. })));
        assert!(matches!(
            MaxEntProblem::on_interval(0.0, 1.0, 10, |_| 1.0, vec![0.1; 5]),
            Err(MaxEntError::TooManyConstraints(5))
        ));
    }

    #[test]
    fn born_rule_is_unconstrained_maxent_over_density_of_states() {
        let g = Grid1D::<f64>::new(1.0, 256).unwrap();
        let psi = make_state(&StateSpec::two_mode(1, 1.0, -2, 0.7), g, Units::default()).unwrap();
        let map = build_qmap(&psi);
        let sol = MaxEntProblem::periodic(&g, map.omega().to_vec(), vec![])
            .unwrap()
            .solve()
            .unwrap();
        for (r, b) in sol.density.iter().zip(density(&psi)) {
            assert!((r - b).abs() < 1e-10);
        }
    }
}
