//! Random motion in q-space with a translation-invariant, zero-mean kernel,
//! and the physical-space conditional density it induces.
//!
//! Walkers carry only their q-coordinate between samples. Because the maps
//! from [`MapTracker`] are Lagrangian, advection is entirely inside the map:
//! the physical position at a sample time is `x = Q_t⁻¹(q)`. With the zero
//! kernel this is exactly 1D Bohmian motion.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bohm::{step_count, BohmError};
use crate::grid_wave::{density, Potential, Units, WaveError, Wavefunction};
use crate::qmap::{MapTracker, QMap};
use crate::real::{wrap, Real};
use crate::rng::{walker_rngs, PURPOSE_DYNAMICS, PURPOSE_INIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QWalkError {
    #[error("kernel `{0}` has no closed-form transition density")]
    DegenerateDensity(&'static str),
    #[error("kernel parameters invalid: {0}")]
    InvalidKernel(String),
    #[error("sample time {0} is outside [0, T] or not a multiple of dt")]
    InvalidSampleTime(f64),
    #[error("maps and wavefunction live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Bohm(#[from] BohmError),
}

impl From<WaveError> for QWalkError {
    fn from(e: WaveError) -> Self {
        QWalkError::Bohm(BohmError::Wave(e))
    }
}

fn default_alpha() -> f64 {
    0.5
}

fn default_mass_exponent() -> f64 {
    1.0
}

/// Kernel description as it appears in experiment configs.
///
/// For the diffusive kinds the q-space diffusion constant is
/// `D_q = alpha · ħ / m^mass_exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    WrappedGaussian {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_mass_exponent")]
        mass_exponent: f64,
    },
    /// Uniform jump on `[-a, a]` with `a = √(6 D_q dt)`, matching the
    /// Gaussian kernel's variance per step.
    UniformJump {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_mass_exponent")]
        mass_exponent: f64,
    },
    Zero,
    /// Constant q-velocity `±speed`, direction drawn once per walker.
    UniformVelocity {
        speed: f64,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::WrappedGaussian {
            alpha: default_alpha(),
            mass_exponent: default_mass_exponent(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    WrappedGaussian,
    UniformJump,
    Zero,
    UniformVelocity,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::WrappedGaussian => "wrapped-gaussian",
            KernelKind::UniformJump => "uniform-jump",
            KernelKind::Zero => "zero",
            KernelKind::UniformVelocity => "uniform-velocity",
        }
    }
}

/// Law of the q-space increment over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionKernel<T: Real> {
    kind: KernelKind,
    diffusion: T,
    speed: T,
}

impl<T: Real> TransitionKernel<T> {
    pub fn zero() -> Self {
        Self {
            kind: KernelKind::Zero,
            diffusion: T::zero(),
            speed: T::zero(),
        }
    }

    pub fn wrapped_gaussian(diffusion: T) -> Self {
        Self {
            kind: KernelKind::WrappedGaussian,
            diffusion,
            speed: T::zero(),
        }
    }

    pub fn uniform_jump(diffusion: T) -> Self {
        Self {
            kind: KernelKind::UniformJump,
            diffusion,
            speed: T::zero(),
        }
    }

    pub fn uniform_velocity(speed: T) -> Self {
        Self {
            kind: KernelKind::UniformVelocity,
            diffusion: T::zero(),
            speed,
        }
    }

    pub fn from_spec(spec: &KernelSpec, units: Units) -> Result<Self, QWalkError> {
        let diffusion = |alpha: f64, p: f64| -> Result<T, QWalkError> {
            let d = alpha * units.hbar / units.mass.powf(p);
            if !(d.is_finite() && d > 0.0) {
                return Err(QWalkError::InvalidKernel(format!(
                    "D_q = {d} from alpha = {alpha}, mass exponent = {p}"
                )));
            }
            Ok(T::lit(d))
        };
        Ok(match *spec {
            KernelSpec::WrappedGaussian { alpha, mass_exponent } => {
                Self::wrapped_gaussian(diffusion(alpha, mass_exponent)?)
            }
            KernelSpec::UniformJump { alpha, mass_exponent } => Self::uniform_jump(diffusion(alpha, mass_exponent)?),
            KernelSpec::Zero => Self::zero(),
            KernelSpec::UniformVelocity { speed } => {
                if !(speed.is_finite() && speed >= 0.0) {
                    return Err(QWalkError::InvalidKernel(format!("speed {speed}")));
                }
                Self::uniform_velocity(T::lit(speed))
            }
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    /// q-space diffusion constant `D_q`.
    pub fn diffusion(&self) -> T {
        self.diffusion
    }

    /// Variance of the unwrapped increment accumulated over `dt`.
    pub fn variance(&self, dt: T) -> T {
        match self.kind {
            KernelKind::WrappedGaussian | KernelKind::UniformJump => T::lit(2.0) * self.diffusion * dt,
            KernelKind::Zero => T::zero(),
            KernelKind::UniformVelocity => self.speed * self.speed * dt * dt,
        }
    }

    /// Per-walker constant velocity for the uniform-velocity kind, else 0.
    pub fn initial_velocity<R: Rng>(&self, rng: &mut R) -> T {
        match self.kind {
            KernelKind::UniformVelocity => {
                if rng.random::<bool>() {
                    self.speed
                } else {
                    -self.speed
                }
            }
            _ => T::zero(),
        }
    }

    /// Draw one unwrapped increment.
    pub fn sample_increment<R: Rng>(&self, rng: &mut R, dt: T, velocity: T) -> T {
        match self.kind {
            KernelKind::WrappedGaussian => {
                let z: f64 = rng.sample(StandardNormal);
                T::lit(z) * self.variance(dt).sqrt()
            }
            KernelKind::UniformJump => {
                let a = (T::lit(3.0) * self.variance(dt)).sqrt();
                let u: f64 = rng.random();
                (T::lit(2.0) * T::lit(u) - T::one()) * a
            }
            KernelKind::Zero => T::zero(),
            KernelKind::UniformVelocity => velocity * dt,
        }
    }

    /// Density of the wrapped increment `Δ` after time `dt` on a circle of
    /// circumference `period`.
    pub fn density(&self, delta: T, dt: T, period: T) -> Result<T, QWalkError> {
        match self.kind {
            KernelKind::WrappedGaussian => Ok(wrapped_gaussian_density(delta, self.variance(dt), period)),
            KernelKind::UniformJump => {
                let a = (T::lit(3.0) * self.variance(dt)).sqrt();
                if a >= period * T::lit(0.5) {
                    // Several images overlap; count them explicitly.
                    let images = (a / period).ceil().to_i64().unwrap_or(0) + 1;
                    let mut acc = T::zero();
                    for n in -images..=images {
                        let d = delta + T::lit(n as f64) * period;
                        if d.abs() < a {
                            acc += T::one();
                        }
                    }
                    return Ok(acc / (T::lit(2.0) * a));
                }
                let d = crate::real::wrap_signed(delta, period);
                Ok(if d.abs() < a {
                    (T::lit(2.0) * a).recip()
                } else {
                    T::zero()
                })
            }
            KernelKind::Zero => Err(QWalkError::DegenerateDensity("zero")),
            KernelKind::UniformVelocity => Err(QWalkError::DegenerateDensity("uniform-velocity")),
        }
    }
}

/// Wrapped normal density with variance `var` on a circle.
pub fn wrapped_gaussian_density<T: Real>(delta: T, var: T, period: T) -> T {
    let sd = var.sqrt();
    let two = T::lit(2.0);
    if sd <= period / T::lit(3.0) {
        let d = crate::real::wrap_signed(delta, period);
        let images = (T::lit(8.0) * sd / period).ceil().to_i64().unwrap_or(0) + 1;
        let norm = (T::TAU() * var).sqrt().recip();
        (-images..=images)
            .map(|n| {
                let e = d + T::lit(n as f64) * period;
                norm * (-(e * e) / (two * var)).exp()
            })
            .sum()
    } else {
        // Theta-series form converges fast for wide kernels.
        let mut acc = period.recip();
        let mut n = 1;
        loop {
            let k = T::TAU() * T::lit(n as f64) / period;
            let w = (-var * k * k / two).exp();
            if w < T::lit(1e-18) {
                break;
            }
            acc += two / period * w * (k * delta).cos();
            n += 1;
        }
        acc
    }
}

/// Position of one walker in both coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerState<T: Real> {
    pub q: T,
    pub x: T,
    pub stream: u64,
    /// Only used by the uniform-velocity kernel.
    pub velocity: T,
}

/// Diffuse in q, then read the physical position off the map at `t + dt`.
pub fn step<T: Real, R: Rng>(
    walker: &WalkerState<T>,
    kernel: &TransitionKernel<T>,
    map_next: &QMap<T>,
    dt: T,
    rng: &mut R,
) -> WalkerState<T> {
    let l = map_next.grid().length();
    let q = wrap(walker.q + kernel.sample_increment(rng, dt, walker.velocity), l);
    WalkerState {
        q,
        x: map_next.inverse(q),
        stream: walker.stream,
        velocity: walker.velocity,
    }
}

/// Walkers together with their private random streams.
#[derive(Debug, Clone)]
pub struct Ensemble<T: Real> {
    walkers: Vec<WalkerState<T>>,
    rngs: Vec<ChaCha8Rng>,
}

impl<T: Real> Ensemble<T> {
    /// Walkers at given physical positions, mapped through `map0`.
    pub fn from_positions(positions: &[T], map0: &QMap<T>, kernel: &TransitionKernel<T>, seed: u64) -> Self {
        let mut rngs = walker_rngs(seed, PURPOSE_DYNAMICS, positions.len());
        let walkers = positions
            .iter()
            .zip(rngs.iter_mut())
            .enumerate()
            .map(|(i, (&x, rng))| {
                let x = wrap(x, map0.grid().length());
                WalkerState {
                    q: map0.forward(x),
                    x,
                    stream: i as u64,
                    velocity: kernel.initial_velocity(rng),
                }
            })
            .collect();
        Self { walkers, rngs }
    }

    /// `count` walkers in quantum equilibrium: uniform in q, pulled back by `map0`.
    pub fn quantum_equilibrium(count: usize, map0: &QMap<T>, kernel: &TransitionKernel<T>, seed: u64) -> Self {
        let positions = sample_quantum_equilibrium(count, map0, seed);
        Self::from_positions(&positions, map0, kernel, seed)
    }

    pub fn walkers(&self) -> &[WalkerState<T>] {
        &self.walkers
    }

    pub fn len(&self) -> usize {
        self.walkers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walkers.is_empty()
    }

    pub fn positions(&self) -> Vec<T> {
        self.walkers.iter().map(|w| w.x).collect()
    }
}

/// Positions distributed as `|ψ|²` by inverse-transform sampling of the map.
pub fn sample_quantum_equilibrium<T: Real>(count: usize, map0: &QMap<T>, seed: u64) -> Vec<T> {
    let l = map0.grid().length();
    walker_rngs(seed, PURPOSE_INIT, count)
        .into_iter()
        .map(|mut rng| {
            let u: f64 = rng.random();
            map0.inverse(map0.forward(T::zero()) + T::lit(u) * l)
        })
        .collect()
}

/// Positions uniform on `[0, L)`, independent of ψ.
pub fn sample_uniform<T: Real>(count: usize, length: T, seed: u64) -> Vec<T> {
    walker_rngs(seed, PURPOSE_INIT, count)
        .into_iter()
        .map(|mut rng| T::lit(rng.random::<f64>()) * length)
        .collect()
}

/// Positions and q-coordinates of every walker at each sample time, plus
/// the wavefunction at those times.
#[derive(Debug, Clone)]
pub struct EnsembleTrace<T: Real> {
    pub times: Vec<T>,
    pub positions: Vec<Vec<T>>,
    pub q: Vec<Vec<T>>,
    pub snapshots: Vec<Wavefunction<T>>,
}

impl<T: Real> EnsembleTrace<T> {
    pub fn densities(&self) -> Vec<Vec<T>> {
        self.snapshots.iter().map(density).collect()
    }
}

/// Step indices of the sample times; the offending time on failure.
pub(crate) fn sample_steps<T: Real>(sample_times: &[T], total: T, dt: T, steps: usize) -> Result<Vec<usize>, f64> {
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        let r = ts / dt;
        let n = r.round();
        if !(ts >= T::zero() && ts <= total * (T::one() + T::lit(1e-12)))
            || (r - n).abs() > T::lit(1e-6) * n.max(T::one())
        {
            return Err(ts.as_f64());
        }
        let n = n.to_usize().unwrap_or(usize::MAX);
        if n > steps {
            return Err(ts.as_f64());
        }
        out.push(n);
    }
    Ok(out)
}

/// Co-evolve ψ, rebuild the Lagrangian map each step and diffuse every
/// walker in q; positions are resolved at `sample_times` only.
pub fn evolve_ensemble<T: Real>(
    ensemble: &mut Ensemble<T>,
    kernel: &TransitionKernel<T>,
    psi0: &Wavefunction<T>,
    pot: &Potential<T>,
    total_time: T,
    dt: T,
    sample_times: &[T],
) -> Result<EnsembleTrace<T>, QWalkError> {
    let steps = step_count(total_time, dt)?;
    let sample_at = sample_steps(sample_times, total_time, dt, steps).map_err(QWalkError::InvalidSampleTime)?;
    let mut tracker = MapTracker::new(psi0.clone(), pot, dt)?;
    let l = psi0.grid().length();
    let mut trace = EnsembleTrace {
        times: Vec::with_capacity(sample_at.len()),
        positions: Vec::with_capacity(sample_at.len()),
        q: Vec::with_capacity(sample_at.len()),
        snapshots: Vec::with_capacity(sample_at.len()),
    };
    let mut record = |tracker: &MapTracker<T>, ens: &mut Ensemble<T>, step_index: usize| {
        let hits = sample_at.iter().filter(|&&s| s == step_index).count();
        if hits == 0 {
            return;
        }
        let map = tracker.map();
        ens.walkers.par_iter_mut().for_each(|w| w.x = map.inverse(w.q));
        let t = T::of_usize(step_index) * dt;
        for _ in 0..hits {
            trace.times.push(t);
            trace.positions.push(ens.walkers.iter().map(|w| w.x).collect());
            trace.q.push(ens.walkers.iter().map(|w| w.q).collect());
            trace.snapshots.push(tracker.psi().clone());
        }
    };
    record(&tracker, ensemble, 0);
    for n in 1..=steps {
        tracker.advance();
        ensemble
            .walkers
            .par_iter_mut()
            .zip(ensemble.rngs.par_iter_mut())
            .for_each(|(w, rng)| {
                w.q = wrap(w.q + kernel.sample_increment(rng, dt, w.velocity), l);
            });
        record(&tracker, ensemble, n);
    }
    Ok(trace)
}

/// `ρ(x₂, t₂ | x₁, t₁) = L |ψ(x₂, t₂)|² ρ_q(Q₂(x₂) − Q₁(x₁))` on the grid.
pub fn conditional_density_predicted<T: Real>(
    map1: &QMap<T>,
    map2: &QMap<T>,
    psi2: &Wavefunction<T>,
    x1: T,
    kernel: &TransitionKernel<T>,
    elapsed: T,
) -> Result<Vec<T>, QWalkError> {
    if map1.grid() != map2.grid() || map2.grid() != psi2.grid() {
        return Err(QWalkError::GridMismatch);
    }
    let grid = psi2.grid();
    let l = grid.length();
    let q1 = map1.forward(x1);
    density(psi2)
        .into_iter()
        .enumerate()
        .map(|(j, rho)| {
            let q2 = map2.forward(grid.x(j));
            Ok(l * rho * kernel.density(q2 - q1, elapsed, l)?)
        })
        .collect()
}
