//! Wavefunctions on a periodic 1D grid, split-step evolution, and the
//! density / flux / continuity diagnostics built on them.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{wrap_signed, Real};
use crate::spectral::Spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("grid must have a power-of-two point count, got {0}")]
    NotPowerOfTwo(usize),
    #[error("grid length must be finite and positive, got {0}")]
    InvalidLength(f64),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("potential has {found} samples but the grid has {expected}")]
    PotentialSize { expected: usize, found: usize },
    #[error("potential sample {index} is not finite")]
    NonFinitePotential { index: usize },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("state cannot be normalised: {0}")]
    NonNormalizable(String),
    #[error("units must be positive and finite (hbar={hbar}, mass={mass})")]
    InvalidUnits { hbar: f64, mass: f64 },
}

/// Uniform periodic grid on `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T: Real> {
    length: T,
    points: usize,
}

impl<T: Real> Grid1D<T> {
    pub fn new(length: T, points: usize) -> Result<Self, WaveError> {
        if !points.is_power_of_two() || points < 2 {
            return Err(WaveError::NotPowerOfTwo(points));
        }
        if !(length.is_finite() && length > T::zero()) {
            return Err(WaveError::InvalidLength(length.as_f64()));
        }
        Ok(Self { length, points })
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> T {
        self.length / T::of_usize(self.points)
    }

    pub fn x(&self, j: usize) -> T {
        T::of_usize(j) * self.dx()
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.points).map(|j| self.x(j)).collect()
    }
}

/// Physical constants carried by a wavefunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

/// Static external potential sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T: Real> {
    values: Vec<T>,
}

impl<T: Real> Potential<T> {
    pub fn from_values(grid: &Grid1D<T>, values: Vec<T>) -> Result<Self, WaveError> {
        if values.len() != grid.points() {
            return Err(WaveError::PotentialSize {
                expected: grid.points(),
                found: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(WaveError::NonFinitePotential { index });
        }
        Ok(Self { values })
    }

    pub fn zero(grid: &Grid1D<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.points()],
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Potential families accepted by the experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * cos(2π mode x / L)`
    Cosine {
        amplitude: f64,
        mode: i64,
    },
    /// `m ω² d² / 2` with `d` the periodic distance to `center`.
    Harmonic {
        omega: f64,
        center: f64,
    },
}

impl PotentialSpec {
    pub fn build<T: Real>(&self, grid: &Grid1D<T>, units: Units) -> Result<Potential<T>, WaveError> {
        let l = grid.length().as_f64();
        let values = grid
            .positions()
            .into_iter()
            .map(|x| {
                let x = x.as_f64();
                let v = match *self {
                    PotentialSpec::Zero => 0.0,
                    PotentialSpec::Constant { value } => value,
                    PotentialSpec::Cosine { amplitude, mode } => {
                        amplitude * (std::f64::consts::TAU * mode as f64 * x / l).cos()
                    }
                    PotentialSpec::Harmonic { omega, center } => {
                        let d = wrap_signed(x - center, l);
                        0.5 * units.mass * omega * omega * d * d
                    }
                };
                T::lit(v)
            })
            .collect();
        Potential::from_values(grid, values)
    }
}

/// One plane-wave component `amplitude · e^{2πi mode x / L}` of a superposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub mode: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Initial-condition families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    /// Constant amplitude.
    Uniform,
    /// Periodic-box momentum eigenstate with `k = 2π mode / L`.
    Momentum { mode: i64 },
    /// Finite superposition of box momentum eigenstates.
    Superposition { modes: Vec<Mode> },
    /// Gaussian packet `exp(-d²/4σ² + i k d)`, `d` the periodic offset from `center`.
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        wavenumber: f64,
    },
    /// Real standing wave `cos(2π mode x / L)`: nodes at `(2n+1) L / (4 mode)`.
    StandingWave { mode: i64 },
    /// Smooth state with `|ψ|² = (2/L) sin²(πx/L)` at t = 0.
    SinSquared,
}

impl StateSpec {
    /// `a·φ_j + b·φ_k` with real amplitudes.
    pub fn two_mode(j: i64, a: f64, k: i64, b: f64) -> Self {
        StateSpec::Superposition {
            modes: vec![
                Mode {
                    mode: j,
                    re: a,
                    im: 0.0,
                },
                Mode {
                    mode: k,
                    re: b,
                    im: 0.0,
                },
            ],
        }
    }

    fn samples(&self, grid: &Grid1D<f64>) -> Result<Vec<Complex<f64>>, WaveError> {
        let l = grid.length();
        let plane = |n: i64, x: f64| Complex::from_polar(1.0, std::f64::consts::TAU * n as f64 * x / l);
        let xs = grid.positions();
        let out = match self {
            StateSpec::Uniform => vec![Complex::new(1.0, 0.0); xs.len()],
            StateSpec::Momentum { mode } => {
                if mode.unsigned_abs() >= (grid.points() / 2) as u64 {
                    return Err(WaveError::NonNormalizable(format!(
                        "mode {mode} is not resolved by {} points",
                        grid.points()
                    )));
                }
                xs.iter().map(|&x| plane(*mode, x)).collect()
            }
            StateSpec::Superposition { modes } => {
                if modes.is_empty() {
                    return Err(WaveError::NonNormalizable("superposition has no modes".into()));
                }
                if modes.iter().any(|m| !(m.re.is_finite() && m.im.is_finite())) {
                    return Err(WaveError::NonNormalizable("non-finite amplitude".into()));
                }
                let nyquist = (grid.points() / 2) as i64;
                if let Some(m) = modes.iter().find(|m| m.mode.abs() >= nyquist) {
                    return Err(WaveError::NonNormalizable(format!(
                        "mode {} is not resolved by {} points",
                        m.mode,
                        grid.points()
                    )));
                }
                xs.iter()
                    .map(|&x| modes.iter().map(|m| Complex::new(m.re, m.im) * plane(m.mode, x)).sum())
                    .collect()
            }
            StateSpec::Gaussian {
                center,
                width,
                wavenumber,
            } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(WaveError::NonNormalizable(format!("width {width} must be positive")));
                }
                // Density at the antipode must be negligible for the periodic image to be smooth.
                let tail = (-(l * 0.5).powi(2) / (2.0 * width * width)).exp();
                if tail > 1e-10 {
                    return Err(WaveError::NonNormalizable(format!(
                        "width {width} too large for a periodic domain of length {l}"
                    )));
                }
                if *width < 2.0 * grid.dx() {
                    return Err(WaveError::NonNormalizable(format!(
                        "width {width} not resolved by spacing {}",
                        grid.dx()
                    )));
                }
                xs.iter()
                    .map(|&x| {
                        let d = wrap_signed(x - center, l);
                        Complex::from_polar((-d * d / (4.0 * width * width)).exp(), wavenumber * d)
                    })
                    .collect()
            }
            StateSpec::StandingWave { mode } => {
                if *mode == 0 {
                    return Err(WaveError::NonNormalizable("standing wave needs mode != 0".into()));
                }
                xs.iter()
                    .map(|&x| Complex::new((std::f64::consts::TAU * *mode as f64 * x / l).cos(), 0.0))
                    .collect()
            }
            // (1 - e^{2πix/L}) has modulus 2 sin(πx/L).
            StateSpec::SinSquared => xs.iter().map(|&x| Complex::new(1.0, 0.0) - plane(1, x)).collect(),
        };
        Ok(out)
    }
}

/// Complex amplitudes on the grid at time `t`.
#[derive(Clone)]
pub struct Wavefunction<T: Real> {
    grid: Grid1D<T>,
    amplitudes: Vec<Complex<T>>,
    time: T,
    hbar: T,
    mass: T,
    spectral: Arc<Spectral<T>>,
}

impl<T: Real> std::fmt::Debug for Wavefunction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wavefunction")
            .field("grid", &self.grid)
            .field("time", &self.time)
            .field("hbar", &self.hbar)
            .field("mass", &self.mass)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Wavefunction<T> {
    /// Normalises `amplitudes` and stamps them with time 0.
    pub fn new(grid: Grid1D<T>, amplitudes: Vec<Complex<T>>, units: Units) -> Result<Self, WaveError> {
        if !(units.hbar.is_finite() && units.hbar > 0.0 && units.mass.is_finite() && units.mass > 0.0) {
            return Err(WaveError::InvalidUnits {
                hbar: units.hbar,
                mass: units.mass,
            });
        }
        if amplitudes.len() != grid.points() {
            return Err(WaveError::GridMismatch);
        }
        let spectral = Arc::new(Spectral::new(grid.points(), grid.length()));
        let mut psi = Self {
            grid,
            amplitudes,
            time: T::zero(),
            hbar: T::lit(units.hbar),
            mass: T::lit(units.mass),
            spectral,
        };
        let norm = psi.norm();
        if !(norm.is_finite() && norm > T::zero()) {
            return Err(WaveError::NonNormalizable(format!("norm is {norm}")));
        }
        let scale = norm.sqrt().recip();
        for z in psi.amplitudes.iter_mut() {
            *z = *z * scale;
        }
        Ok(psi)
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn units(&self) -> Units {
        Units {
            hbar: self.hbar.as_f64(),
            mass: self.mass.as_f64(),
        }
    }

    pub(crate) fn spectral(&self) -> &Spectral<T> {
        &self.spectral
    }

    /// `∫|ψ|² dx` by the periodic trapezoid rule.
    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>() * self.grid.dx()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid
    }
}

/// Build a normalised initial state at `t = 0`.
pub fn make_state<T: Real>(spec: &StateSpec, grid: Grid1D<T>, units: Units) -> Result<Wavefunction<T>, WaveError> {
    let g64 = Grid1D::<f64>::new(grid.length().as_f64(), grid.points())?;
    let amps = spec
        .samples(&g64)?
        .into_iter()
        .map(|z| Complex::new(T::lit(z.re), T::lit(z.im)))
        .collect();
    Wavefunction::new(grid, amps, units)
}

/// Pointwise `|ψ|²`.
pub fn density<T: Real>(psi: &Wavefunction<T>) -> Vec<T> {
    psi.amplitudes.iter().map(|z| z.norm_sqr()).collect()
}

/// Probability current `(ħ/m) Im(ψ* ∂ₓψ)`, derivative taken spectrally.
pub fn flux<T: Real>(psi: &Wavefunction<T>) -> Vec<T> {
    let d = psi.spectral.derivative(&psi.amplitudes);
    let c = psi.hbar / psi.mass;
    psi.amplitudes
        .iter()
        .zip(d)
        .map(|(z, dz)| c * (z.conj() * dz).im)
        .collect()
}

/// Spectral `∂ₓ|ψ|²`.
pub fn density_gradient<T: Real>(psi: &Wavefunction<T>) -> Vec<T> {
    psi.spectral.real_derivative(&density(psi))
}

/// `⟨ψ|H|ψ⟩` with the kinetic part evaluated in Fourier space.
pub fn energy<T: Real>(psi: &Wavefunction<T>, pot: &Potential<T>) -> T {
    let mut hat = psi.amplitudes.clone();
    psi.spectral.forward_in_place(&mut hat);
    let p = T::of_usize(psi.grid.points());
    let half = T::lit(0.5);
    // Parseval: Σ|ψ_j|² dx = (dx/P) Σ|ψ̂_k|²
    let kinetic = hat
        .iter()
        .zip(psi.spectral.wavenumbers())
        .map(|(z, &k)| z.norm_sqr() * k * k)
        .sum::<T>()
        * psi.hbar
        * psi.hbar
        * half
        / psi.mass
        * psi.grid.dx()
        / p;
    let potential = psi
        .amplitudes
        .iter()
        .zip(pot.values())
        .map(|(z, &v)| z.norm_sqr() * v)
        .sum::<T>()
        * psi.grid.dx();
    kinetic + potential
}

/// Second-order Strang splitting: half potential, full kinetic, half potential.
#[derive(Debug, Clone)]
pub struct SplitStep<T: Real> {
    dt: T,
    potential_half: Vec<Complex<T>>,
    kinetic: Vec<Complex<T>>,
}

impl<T: Real> SplitStep<T> {
    pub fn new(psi: &Wavefunction<T>, pot: &Potential<T>, dt: T) -> Result<Self, WaveError> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(WaveError::InvalidTimeStep(dt.as_f64()));
        }
        if pot.values().len() != psi.grid.points() {
            return Err(WaveError::PotentialSize {
                expected: psi.grid.points(),
                found: pot.values().len(),
            });
        }
        let half = T::lit(0.5);
        let potential_half = pot
            .values()
            .iter()
            .map(|&v| Complex::from_polar(T::one(), -v * dt * half / psi.hbar))
            .collect();
        let kinetic = psi
            .spectral
            .wavenumbers()
            .iter()
            .map(|&k| Complex::from_polar(T::one(), -psi.hbar * k * k * dt * half / psi.mass))
            .collect();
        Ok(Self {
            dt,
            potential_half,
            kinetic,
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn step(&self, psi: &mut Wavefunction<T>) {
        for (z, ph) in psi.amplitudes.iter_mut().zip(&self.potential_half) {
            *z = *z * *ph;
        }
        let spectral = Arc::clone(&psi.spectral);
        spectral.forward_in_place(&mut psi.amplitudes);
        for (z, ph) in psi.amplitudes.iter_mut().zip(&self.kinetic) {
            *z = *z * *ph;
        }
        spectral.inverse_in_place(&mut psi.amplitudes);
        for (z, ph) in psi.amplitudes.iter_mut().zip(&self.potential_half) {
            *z = *z * *ph;
        }
        psi.time += self.dt;
    }

    pub fn advance(&self, psi: &mut Wavefunction<T>, steps: usize) {
        for _ in 0..steps {
            self.step(psi);
        }
    }
}

/// One split-step of length `dt`.
pub fn evolve_step<T: Real>(psi: &Wavefunction<T>, pot: &Potential<T>, dt: T) -> Result<Wavefunction<T>, WaveError> {
    let stepper = SplitStep::new(psi, pot, dt)?;
    let mut next = psi.clone();
    stepper.step(&mut next);
    Ok(next)
}

/// Max-norm of `Δ|ψ|²/dt + ∂ₓF` with `F` taken at the temporal midpoint.
///
/// The midpoint state is produced by a half step from `before`, so the
/// residual measures the time discretisation error of the density update and
/// decays like `dt²`.
pub fn continuity_residual<T: Real>(
    before: &Wavefunction<T>,
    after: &Wavefunction<T>,
    pot: &Potential<T>,
    dt: T,
) -> Result<T, WaveError> {
    if !before.same_grid(after) || pot.values().len() != before.grid.points() {
        return Err(WaveError::GridMismatch);
    }
    let mid = evolve_step(before, pot, dt * T::lit(0.5))?;
    let div = mid.spectral.real_derivative(&flux(&mid));
    let r0 = density(before);
    let r1 = density(after);
    Ok(r0
        .iter()
        .zip(&r1)
        .zip(&div)
        .map(|((a, b), d)| ((*b - *a) / dt + *d).abs())
        .fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn grid(p: usize) -> Grid1D<f64> {
        Grid1D::new(1.0, p).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert_eq!(Grid1D::<f64>::new(1.0, 100), Err(WaveError::NotPowerOfTwo(100)));
        assert!(matches!(Grid1D::<f64>::new(-1.0, 64), Err(WaveError::InvalidLength(_))));
        let g = grid(512);
        assert_eq!(g.dx() * 512.0, 1.0);
    }

    #[test]
    fn uniform_state_is_one() {
        let psi = make_state(&StateSpec::Uniform, grid(64), Units::default()).unwrap();
        for z in psi.amplitudes() {
            assert!((z.re - 1.0).abs() < 1e-14 && z.im.abs() < 1e-14);
        }
        assert!((psi.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_on_longer_box_has_density_inverse_length() {
        let g = Grid1D::new(2.0, 64).unwrap();
        let psi = make_state(&StateSpec::Uniform, g, Units::default()).unwrap();
        assert!(density(&psi).iter().all(|r: &f64| (r - 0.5).abs() < 1e-14));
    }

    #[test]
    fn momentum_eigenstate_density_and_flux() {
        let g = grid(128);
        let psi = make_state(&StateSpec::Momentum { mode: 1 }, g, Units::default()).unwrap();
        for r in density(&psi) {
            assert!((r - 1.0).abs() < 1e-13);
        }
        for f in flux(&psi) {
            assert!((f - TAU).abs() < 1e-10);
        }
    }

    #[test]
    fn counter_propagating_pair_is_standing_wave() {
        let g = grid(256);
        let psi = make_state(&StateSpec::two_mode(1, 1.0, -1, 1.0), g, Units::default()).unwrap();
        let rho = density(&psi);
        for (j, r) in rho.iter().enumerate() {
            let x = g.x(j);
            assert!((r - 2.0 * (TAU * x).cos().powi(2)).abs() < 1e-12);
        }
        assert!(rho[64] < 1e-28 && rho[192] < 1e-28);
        assert!(flux(&psi).iter().all(|f| f.abs() < 1e-10));
    }

    #[test]
    fn real_state_has_no_flux() {
        let psi = make_state(&StateSpec::StandingWave { mode: 2 }, grid(128), Units::default()).unwrap();
        assert!(flux(&psi).iter().all(|f| f.abs() < 1e-12));
    }

    #[test]
    fn sin_squared_density() {
        let g = grid(128);
        let psi = make_state(&StateSpec::SinSquared, g, Units::default()).unwrap();
        for (j, r) in density(&psi).iter().enumerate() {
            assert!((r - 2.0 * (PI * g.x(j)).sin().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_states_are_rejected() {
        let g = grid(64);
        let u = Units::default();
        assert!(make_state(&StateSpec::Superposition { modes: vec![] }, g, u).is_err());
        assert!(make_state(&StateSpec::two_mode(1, 0.0, 2, 0.0), g, u).is_err());
        assert!(make_state(
            &StateSpec::Gaussian {
                center: 0.5,
                width: 0.5,
                wavenumber: 0.0
            },
            g,
            u
        )
        .is_err());
        assert!(make_state(&StateSpec::Momentum { mode: 40 }, g, u).is_err());
        assert!(make_state(&StateSpec::two_mode(40, 1.0, 1, 1.0), g, u).is_err());
        assert!(make_state(&StateSpec::Uniform, g, Units { hbar: 0.0, mass: 1.0 }).is_err());
    }

    #[test]
    fn free_plane_wave_picks_up_dispersion_phase() {
        let g = grid(128);
        let u = Units::default();
        let mut psi = make_state(&StateSpec::Momentum { mode: 3 }, g, u).unwrap();
        let psi0 = psi.clone();
        let dt = 1e-4;
        let steps = 250;
        let stepper = SplitStep::new(&psi, &Potential::zero(&g), dt).unwrap();
        stepper.advance(&mut psi, steps);
        let t = dt * steps as f64;
        let k = TAU * 3.0;
        let phase = Complex::from_polar(1.0, -k * k * t / 2.0);
        for (a, b) in psi.amplitudes().iter().zip(psi0.amplitudes()) {
            assert!((*a - *b * phase).norm() < 1e-8);
        }
        assert!((psi.time() - t).abs() < 1e-15);
    }

    #[test]
    fn constant_potential_is_global_phase() {
        let g = grid(64);
        let u = Units::default();
        let psi0 = make_state(
            &StateSpec::Gaussian {
                center: 0.5,
                width: 0.05,
                wavenumber: 10.0,
            },
            g,
            u,
        )
        .unwrap();
        let c = 3.5;
        let pot = PotentialSpec::Constant { value: c }.build(&g, u).unwrap();
        let free = SplitStep::new(&psi0, &Potential::zero(&g), 1e-3).unwrap();
        let shifted = SplitStep::new(&psi0, &pot, 1e-3).unwrap();
        let (mut a, mut b) = (psi0.clone(), psi0.clone());
        free.advance(&mut a, 100);
        shifted.advance(&mut b, 100);
        let phase = Complex::from_polar(1.0, -c * 0.1);
        for (za, zb) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((*za * phase - *zb).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_and_energy_are_conserved_in_cosine_potential() {
        let g = grid(256);
        let u = Units::default();
        let mut psi = make_state(
            &StateSpec::Gaussian {
                center: 0.3,
                width: 0.05,
                wavenumber: 20.0,
            },
            g,
            u,
        )
        .unwrap();
        let pot = PotentialSpec::Cosine {
            amplitude: 10.0,
            mode: 1,
        }
        .build(&g, u)
        .unwrap();
        let e0 = energy(&psi, &pot);
        let stepper = SplitStep::new(&psi, &pot, 1e-4).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..20 {
            stepper.advance(&mut psi, 100);
            worst = worst.max((energy(&psi, &pot) - e0).abs() / e0.abs());
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
        assert!(worst < 1e-6, "relative energy drift {worst}");
    }

    #[test]
    fn plane_wave_energy_is_kinetic() {
        let g = grid(64);
        let psi = make_state(&StateSpec::Momentum { mode: 2 }, g, Units::default()).unwrap();
        let e = energy(&psi, &Potential::zero(&g));
        assert!((e - (TAU * 2.0).powi(2) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn continuity_residual_is_tiny_for_plane_wave() {
        let g = grid(128);
        let u = Units::default();
        let psi = make_state(&StateSpec::Momentum { mode: 1 }, g, u).unwrap();
        let pot = Potential::zero(&g);
        let after = evolve_step(&psi, &pot, 1e-4).unwrap();
        assert!(continuity_residual(&psi, &after, &pot, 1e-4).unwrap() < 1e-8);
    }

    #[test]
    fn continuity_residual_rejects_mismatched_grids() {
        let a = make_state(&StateSpec::Uniform, grid(64), Units::default()).unwrap();
        let b = make_state(&StateSpec::Uniform, grid(128), Units::default()).unwrap();
        let pot = Potential::zero(&grid(64));
        assert_eq!(continuity_residual(&a, &b, &pot, 1e-3), Err(WaveError::GridMismatch));
    }

    #[test]
    fn potential_validation() {
        let g = grid(8);
        assert!(matches!(
            Potential::from_values(&g, vec![0.0; 4]),
            Err(WaveError::PotentialSize { .. })
        ));
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert_eq!(
            Potential::from_values(&g, v),
            Err(WaveError::NonFinitePotential { index: 3 })
        );
    }

    #[test]
    fn single_precision_stepping_runs() {
        let g = Grid1D::<f32>::new(1.0, 64).unwrap();
        let mut psi = make_state(&StateSpec::SinSquared, g, Units::default()).unwrap();
        let stepper = SplitStep::new(&psi, &Potential::zero(&g), 1e-3).unwrap();
        stepper.advance(&mut psi, 50);
        assert!((psi.norm() - 1.0).abs() < 1e-5);
    }
}
