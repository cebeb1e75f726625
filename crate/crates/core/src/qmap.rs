//! The q-space coordinate map `Q(x) = L ∫₀ˣ |ψ|²`, whose Jacobian is the
//! density of states `ω = L|ψ|²`, and its Lagrangian time dependence.
//!
//! On the periodic domain the map is fixed only up to a rotation. A freshly
//! built map is anchored at `Q(0) = 0`. Maps produced by [`MapTracker`]
//! carry an additional rotation equal to `L` times the probability that has
//! flowed through `x = 0`, which makes `Q_t(x(t))` constant along Bohmian
//! trajectories and lets q-space walkers be advected by the map alone.

use thiserror::Error;

use crate::bohm::{self, BohmError};
use crate::grid_wave::{density, flux, Grid1D, Potential, SplitStep, WaveError, Wavefunction};
use crate::interp::MonotoneHermite;
use crate::real::{circular_distance, wrap, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QMapError {
    #[error("map and wavefunction live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Monotone map `x ↦ q` at a fixed time.
#[derive(Debug, Clone)]
pub struct QMap<T: Real> {
    grid: Grid1D<T>,
    table: MonotoneHermite<T>,
    omega: Vec<T>,
    shift: T,
    time: T,
}

/// Build `Q(x) = L ∫₀ˣ|ψ|²` anchored at `Q(0) = 0`.
///
/// Cell integrals use the trapezoid rule with its first two Euler–Maclaurin
/// endpoint corrections (spectral first and third derivatives of `|ψ|²` at
/// the nodes), so the table is accurate to sixth order in `dx`. The table is rescaled so `Q(L) = L` exactly.
/// Between nodes `Q` is a Hermite interpolant matching `ω` and `ω'`, reduced
/// to a limited cubic in cells where that would not be monotone.
pub fn build_qmap<T: Real>(psi: &Wavefunction<T>) -> QMap<T> {
    let grid = *psi.grid();
    let p = grid.points();
    let h = grid.dx();
    let l = grid.length();
    let rho = density(psi);
    let spectral = psi.spectral();
    let drho = spectral.real_derivative(&rho);
    let d3rho = spectral.real_derivative(&spectral.real_derivative(&drho));
    let half = T::lit(0.5);
    let twelfth = T::one() / T::lit(12.0);
    let h4 = h * h * h * h / T::lit(720.0);
    let cells: Vec<T> = (0..p)
        .map(|j| {
            let k = (j + 1) % p;
            let c = h * (rho[j] + rho[k]) * half + h * h * (drho[j] - drho[k]) * twelfth + h4 * (d3rho[k] - d3rho[j]);
            c.max(T::zero())
        })
        .collect();
    let total: T = cells.iter().copied().sum();
    let scale = l / total;
    let mut nodes = Vec::with_capacity(p + 1);
    let mut acc = T::zero();
    nodes.push(T::zero());
    for c in &cells[..p - 1] {
        acc += *c * scale;
        nodes.push(acc);
    }
    nodes.push(l);
    let omega: Vec<T> = rho.iter().map(|&r| r * scale).collect();
    let mut slopes = omega.clone();
    slopes.push(omega[0]);
    let mut curvatures: Vec<T> = drho.iter().map(|&d| d * scale).collect();
    curvatures.push(curvatures[0]);
    QMap {
        grid,
        table: MonotoneHermite::with_curvature(nodes, slopes, curvatures, h),
        omega,
        shift: T::zero(),
        time: psi.time(),
    }
}

impl<T: Real> QMap<T> {
    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Gauge rotation subtracted from the anchored table.
    pub fn shift(&self) -> T {
        self.shift
    }

    /// Same map rotated so that `forward(x)` becomes `Q(x) - shift (mod L)`.
    pub fn with_shift(mut self, shift: T) -> Self {
        self.shift = wrap(shift, self.grid.length());
        self
    }

    /// Anchored cumulative table `Q(x_j)`, `j = 0..=P`.
    pub fn table(&self) -> &[T] {
        self.table.nodes()
    }

    /// Density of states `ω = L|ψ|²` at the grid nodes.
    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Anchored, unrotated `Q(x)` for `x ∈ [0, L]`.
    pub fn anchored(&self, x: T) -> T {
        self.table.eval(x)
    }

    /// q-volume of `[a, b)`, `0 ≤ a ≤ b ≤ L`; independent of the gauge.
    pub fn q_volume(&self, a: T, b: T) -> T {
        self.table.eval(b) - self.table.eval(a)
    }

    pub fn forward(&self, x: T) -> T {
        let l = self.grid.length();
        wrap(self.table.eval(wrap(x, l)) - self.shift, l)
    }

    /// Preimage of `q`; on flat segments (nodes of ψ) the left endpoint.
    pub fn inverse(&self, q: T) -> T {
        let l = self.grid.length();
        wrap(self.table.inverse(wrap(q + self.shift, l)), l)
    }
}

/// Max over cells of `|ΔQ/Δx − L·⟨|ψ|²⟩_cell|`.
///
/// The reference cell mean is the exact mean of the band-limited interpolant
/// of `|ψ|²`, computed spectrally and independently of the map's quadrature.
pub fn jacobian_residual<T: Real>(map: &QMap<T>, psi: &Wavefunction<T>) -> Result<T, QMapError> {
    if map.grid != *psi.grid() {
        return Err(QMapError::GridMismatch);
    }
    let h = map.grid.dx();
    let l = map.grid.length();
    let means = psi.spectral().cell_means(&density(psi));
    let q = map.table();
    Ok(means
        .iter()
        .enumerate()
        .map(|(j, m)| ((q[j + 1] - q[j]) / h - l * *m).abs())
        .fold(T::zero(), T::max))
}

/// Co-evolves ψ and emits Lagrangian-gauged maps.
///
/// The gauge rotation is `L·Φ(t)` with `Φ(t) = ∫₀ᵗ F(0, s) ds`, integrated by
/// Simpson's rule over each step using the half-step state.
#[derive(Debug, Clone)]
pub struct MapTracker<T: Real> {
    psi: Wavefunction<T>,
    half: SplitStep<T>,
    through_anchor: T,
    flux_at_anchor: T,
}

impl<T: Real> MapTracker<T> {
    pub fn new(psi0: Wavefunction<T>, pot: &Potential<T>, dt: T) -> Result<Self, WaveError> {
        let half = SplitStep::new(&psi0, pot, dt * T::lit(0.5))?;
        let flux_at_anchor = flux(&psi0)[0];
        Ok(Self {
            psi: psi0,
            half,
            through_anchor: T::zero(),
            flux_at_anchor,
        })
    }

    pub fn psi(&self) -> &Wavefunction<T> {
        &self.psi
    }

    pub fn dt(&self) -> T {
        self.half.dt() * T::lit(2.0)
    }

    /// Probability that has crossed `x = 0` in the positive direction.
    pub fn through_anchor(&self) -> T {
        self.through_anchor
    }

    pub fn map(&self) -> QMap<T> {
        let l = self.psi.grid().length();
        build_qmap(&self.psi).with_shift(l * self.through_anchor)
    }

    pub fn advance(&mut self) {
        let f0 = self.flux_at_anchor;
        self.half.step(&mut self.psi);
        let fm = flux(&self.psi)[0];
        self.half.step(&mut self.psi);
        let f1 = flux(&self.psi)[0];
        self.through_anchor += self.dt() * (f0 + T::lit(4.0) * fm + f1) / T::lit(6.0);
        self.flux_at_anchor = f1;
    }
}

/// Runs a Bohmian trajectory from `x0` and returns
/// `max_t |Q_t(x(t)) − Q_0(x0)|` (circular distance) with Lagrangian-gauged
/// maps. In one dimension this is the statement that q-coordinates follow
/// the flow, so the result should vanish up to discretisation error.
pub fn transport_check<T: Real>(
    psi0: &Wavefunction<T>,
    pot: &Potential<T>,
    x0: T,
    total_time: T,
    dt: T,
) -> Result<T, BohmError> {
    let traj = bohm::integrate(psi0, pot, x0, total_time, dt)?;
    let mut tracker = MapTracker::new(psi0.clone(), pot, dt)?;
    let l = psi0.grid().length();
    let q0 = tracker.map().forward(x0);
    let positions = traj.positions();
    let mut worst = T::zero();
    for (i, x) in positions.iter().enumerate() {
        if i > 0 {
            tracker.advance();
        }
        let q = tracker.map().forward(*x);
        worst = worst.max(circular_distance(q, q0, l));
    }
    Ok(worst)
}
