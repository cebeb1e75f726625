//! Nelson stochastic mechanics as a comparator: forward diffusion with drift
//! `v + ν ∂ₓ ln|ψ|²` and diffusion constant `ν = ħ/2m`.
//!
//! The osmotic term repels walkers from nodes of ψ, so unlike q-space walkers
//! they do not pass through them in the continuum limit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::bohm::{step_count, BohmError, GuidanceField};
use crate::grid_wave::{density_gradient, Potential, SplitStep, Units, Wavefunction};
use crate::interp::PeriodicSpline;
use crate::qwalk::sample_steps;
use crate::real::{wrap, Real};
use crate::rng::{walker_rngs, PURPOSE_DYNAMICS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NelsonError {
    #[error("diffusion constant must be positive, got {0}")]
    InvalidDiffusion(f64),
    #[error("sample time {0} is outside [0, T] or not a multiple of dt")]
    InvalidSampleTime(f64),
    #[error(transparent)]
    Bohm(#[from] BohmError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelsonParams<T: Real> {
    diffusion: T,
    dt: T,
}

impl<T: Real> NelsonParams<T> {
    pub fn new(diffusion: T, dt: T) -> Result<Self, NelsonError> {
        if !(diffusion.is_finite() && diffusion > T::zero()) {
            return Err(NelsonError::InvalidDiffusion(diffusion.as_f64()));
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(BohmError::Wave(crate::grid_wave::WaveError::InvalidTimeStep(dt.as_f64())).into());
        }
        Ok(Self { diffusion, dt })
    }

    /// `ν = ħ / 2m`.
    pub fn from_units(units: Units, dt: T) -> Result<Self, NelsonError> {
        Self::new(T::lit(units.hbar / (2.0 * units.mass)), dt)
    }

    pub fn diffusion(&self) -> T {
        self.diffusion
    }

    pub fn dt(&self) -> T {
        self.dt
    }
}

/// Interpolated Bohmian velocity, density and density gradient of one snapshot.
#[derive(Debug, Clone)]
pub struct NelsonField<T: Real> {
    guidance: GuidanceField<T>,
    gradient: PeriodicSpline<T>,
}

impl<T: Real> NelsonField<T> {
    pub fn new(psi: &Wavefunction<T>) -> Self {
        Self {
            guidance: GuidanceField::new(psi),
            gradient: PeriodicSpline::new(density_gradient(psi), psi.grid().length(), psi.spectral()),
        }
    }

    /// `ν ∂ₓ ln|ψ|²`.
    pub fn osmotic(&self, x: T, diffusion: T) -> Result<T, BohmError> {
        let rho = self.guidance.admissible_density(x)?;
        Ok(diffusion * self.gradient.eval(x) / rho)
    }

    pub fn drift(&self, x: T, diffusion: T) -> Result<T, BohmError> {
        Ok(self.guidance.velocity(x)? + self.osmotic(x, diffusion)?)
    }

    /// One Euler–Maruyama step from `x`, wrapped to `[0, L)`.
    pub fn step<R: Rng>(&self, x: T, params: &NelsonParams<T>, length: T, rng: &mut R) -> Result<T, BohmError> {
        let drift = self.drift(x, params.diffusion)?;
        let xi: f64 = rng.sample(StandardNormal);
        let noise = (T::lit(2.0) * params.diffusion * params.dt).sqrt() * T::lit(xi);
        Ok(wrap(x + drift * params.dt + noise, length))
    }
}

/// One Euler–Maruyama step against a single snapshot of ψ.
pub fn nelson_step<T: Real, R: Rng>(
    x: T,
    psi: &Wavefunction<T>,
    params: &NelsonParams<T>,
    rng: &mut R,
) -> Result<T, BohmError> {
    NelsonField::new(psi).step(x, params, psi.grid().length(), rng)
}

/// Walker positions at the requested sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct NelsonTrace<T: Real> {
    pub times: Vec<T>,
    pub positions: Vec<Vec<T>>,
}

/// Evolve independent Nelson walkers with ψ co-evolving by split-step.
pub fn evolve_nelson<T: Real>(
    starts: &[T],
    psi0: &Wavefunction<T>,
    pot: &Potential<T>,
    params: &NelsonParams<T>,
    total_time: T,
    sample_times: &[T],
    seed: u64,
) -> Result<NelsonTrace<T>, NelsonError> {
    let dt = params.dt;
    let steps = step_count(total_time, dt)?;
    let sample_at = sample_steps(sample_times, total_time, dt, steps).map_err(NelsonError::InvalidSampleTime)?;
    let length = psi0.grid().length();
    let stepper = SplitStep::new(psi0, pot, dt).map_err(BohmError::from)?;
    let mut psi = psi0.clone();
    let mut rngs: Vec<ChaCha8Rng> = walker_rngs(seed, PURPOSE_DYNAMICS, starts.len());
    let mut xs: Vec<T> = starts.iter().map(|&x| wrap(x, length)).collect();
    let mut trace = NelsonTrace {
        times: Vec::with_capacity(sample_at.len()),
        positions: Vec::with_capacity(sample_at.len()),
    };
    let mut record = |t: T, xs: &[T], n: usize| {
        for _ in sample_at.iter().filter(|&&s| s == n) {
            trace.times.push(t);
            trace.positions.push(xs.to_vec());
        }
    };
    record(T::zero(), &xs, 0);
    for n in 1..=steps {
        let field = NelsonField::new(&psi);
        xs.par_iter_mut()
            .zip(rngs.par_iter_mut())
            .try_for_each(|(x, rng)| -> Result<(), BohmError> {
                *x = field.step(*x, params, length, rng)?;
                Ok(())
            })?;
        stepper.step(&mut psi);
        record(T::of_usize(n) * dt, &xs, n);
    }
    Ok(trace)
}
