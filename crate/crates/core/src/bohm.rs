//! Deterministic trajectories under the guidance condition `v = F / |ψ|²`.

use thiserror::Error;

use crate::grid_wave::{density, flux, Potential, SplitStep, WaveError, Wavefunction};
use crate::interp::PeriodicSpline;
use crate::real::{wrap, Real};

/// Relative density below which the guidance field is not evaluated.
pub const NODE_FLOOR: f64 = 1e-12;

/// Largest displacement, in grid cells, accepted from a single RK4 stage.
pub const MAX_STAGE_CELLS: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BohmError {
    #[error("|ψ|² = {density:e} at x = {x} is below the node floor {floor:e}")]
    NodeProximity { x: f64, density: f64, floor: f64 },
    #[error("step at t = {time} moves {cells:.1} cells; reduce dt near nodes")]
    StepResolution { time: f64, cells: f64 },
    #[error("total time {total} is not an integer multiple of dt {dt}")]
    Incommensurate { total: f64, dt: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Spline-interpolated `|ψ|²` and flux for one wavefunction snapshot.
#[derive(Debug, Clone)]
pub struct GuidanceField<T: Real> {
    density: PeriodicSpline<T>,
    flux: PeriodicSpline<T>,
    floor: T,
}

impl<T: Real> GuidanceField<T> {
    pub fn new(psi: &Wavefunction<T>) -> Self {
        let length = psi.grid().length();
        let rho = density(psi);
        let peak = rho.iter().copied().fold(T::zero(), T::max);
        let floor = T::lit(NODE_FLOOR) * peak;
        let spectral = psi.spectral();
        Self {
            density: PeriodicSpline::new(rho, length, spectral),
            flux: PeriodicSpline::new(flux(psi), length, spectral),
            floor,
        }
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    /// Interpolated `|ψ|²`, refusing points at or below the node floor.
    pub fn admissible_density(&self, x: T) -> Result<T, BohmError> {
        let rho = self.density.eval(x);
        if rho <= self.floor {
            return Err(BohmError::NodeProximity {
                x: x.as_f64(),
                density: rho.as_f64(),
                floor: self.floor.as_f64(),
            });
        }
        Ok(rho)
    }

    pub fn velocity(&self, x: T) -> Result<T, BohmError> {
        let rho = self.admissible_density(x)?;
        Ok(self.flux.eval(x) / rho)
    }
}

/// Bohmian velocity at `x`.
pub fn velocity<T: Real>(psi: &Wavefunction<T>, x: T) -> Result<T, BohmError> {
    GuidanceField::new(psi).velocity(x)
}

/// Sampled path of one walker. Positions are stored unwrapped so the
/// winding number survives; [`Trajectory::positions`] wraps them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    walker: usize,
    length: T,
    times: Vec<T>,
    unwrapped: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn walker(&self) -> usize {
        self.walker
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn positions(&self) -> Vec<T> {
        self.unwrapped.iter().map(|&x| wrap(x, self.length)).collect()
    }

    pub fn unwrapped(&self) -> &[T] {
        &self.unwrapped
    }

    pub fn winding(&self, i: usize) -> i64 {
        (self.unwrapped[i] / self.length).floor().to_i64().unwrap_or(0)
    }

    pub fn last_position(&self) -> T {
        wrap(*self.unwrapped.last().expect("non-empty trajectory"), self.length)
    }
}

pub(crate) fn step_count<T: Real>(total: T, dt: T) -> Result<usize, BohmError> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(WaveError::InvalidTimeStep(dt.as_f64()).into());
    }
    let ratio = total / dt;
    let n = ratio.round();
    if !(total >= T::zero()) || (ratio - n).abs() > T::lit(1e-6) * n.max(T::one()) {
        return Err(BohmError::Incommensurate {
            total: total.as_f64(),
            dt: dt.as_f64(),
        });
    }
    Ok(n.to_usize().unwrap_or(0))
}

/// RK4 integration of `dx/dt = F/|ψ|²` with ψ advanced in lockstep.
pub fn integrate<T: Real>(
    psi0: &Wavefunction<T>,
    pot: &Potential<T>,
    x0: T,
    total_time: T,
    dt: T,
) -> Result<Trajectory<T>, BohmError> {
    Ok(integrate_many(psi0, pot, &[x0], total_time, dt)?
        .pop()
        .expect("one trajectory"))
}

/// Integrate several walkers against shared wavefunction snapshots.
pub fn integrate_many<T: Real>(
    psi0: &Wavefunction<T>,
    pot: &Potential<T>,
    starts: &[T],
    total_time: T,
    dt: T,
) -> Result<Vec<Trajectory<T>>, BohmError> {
    let steps = step_count(total_time, dt)?;
    let length = psi0.grid().length();
    let max_stage = T::lit(MAX_STAGE_CELLS) * psi0.grid().dx();
    let half_step = SplitStep::new(psi0, pot, dt * T::lit(0.5))?;
    let mut psi = psi0.clone();
    let mut field_now = GuidanceField::new(&psi);
    for &x in starts {
        field_now.admissible_density(x)?;
    }
    let mut trajs: Vec<Trajectory<T>> = starts
        .iter()
        .enumerate()
        .map(|(walker, &x)| Trajectory {
            walker,
            length,
            times: {
                let mut v = Vec::with_capacity(steps + 1);
                v.push(psi.time());
                v
            },
            unwrapped: {
                let mut v = Vec::with_capacity(steps + 1);
                v.push(wrap(x, length));
                v
            },
        })
        .collect();
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    for _ in 0..steps {
        let t = psi.time();
        half_step.step(&mut psi);
        let field_mid = GuidanceField::new(&psi);
        half_step.step(&mut psi);
        let field_end = GuidanceField::new(&psi);
        for traj in trajs.iter_mut() {
            let x = *traj.unwrapped.last().expect("seeded");
            let check = |v: T| -> Result<T, BohmError> {
                if (v * dt).abs() > max_stage {
                    Err(BohmError::StepResolution {
                        time: t.as_f64(),
                        cells: ((v * dt).abs() / (max_stage / T::lit(MAX_STAGE_CELLS))).as_f64(),
                    })
                } else {
                    Ok(v)
                }
            };
            let k1 = check(field_now.velocity(x)?)?;
            let k2 = check(field_mid.velocity(x + half * dt * k1)?)?;
            let k3 = check(field_mid.velocity(x + half * dt * k2)?)?;
            let k4 = check(field_end.velocity(x + dt * k3)?)?;
            let next = x + dt * sixth * (k1 + T::lit(2.0) * (k2 + k3) + k4);
            traj.unwrapped.push(next);
            traj.times.push(psi.time());
        }
        field_now = field_end;
    }
    Ok(trajs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_wave::{make_state, Grid1D, StateSpec, Units};
    use std::f64::consts::TAU;

    fn state(spec: StateSpec, p: usize) -> Wavefunction<f64> {
        make_state(&spec, Grid1D::new(1.0, p).unwrap(), Units::default()).unwrap()
    }

    #[test]
    fn plane_wave_velocity_is_hbar_k_over_m() {
        let psi = state(StateSpec::Momentum { mode: 1 }, 128);
        for &x in &[0.0, 0.123, 0.5, 0.97] {
            assert!((velocity(&psi, x).unwrap() - TAU).abs() < 1e-9);
        }
    }

    #[test]
    fn mass_and_hbar_scale_velocity() {
        let g = Grid1D::new(1.0, 64).unwrap();
        let psi = make_state(&StateSpec::Momentum { mode: 2 }, g, Units { hbar: 2.0, mass: 4.0 }).unwrap();
        assert!((velocity(&psi, 0.3).unwrap() - 2.0 * 2.0 * TAU / 4.0).abs() < 1e-9);
    }

    #[test]
    fn standing_wave_has_zero_velocity_and_refuses_nodes() {
        let psi = state(StateSpec::StandingWave { mode: 1 }, 128);
        assert!(velocity(&psi, 0.1).unwrap().abs() < 1e-12);
        assert!(matches!(velocity(&psi, 0.25), Err(BohmError::NodeProximity { .. })));
    }

    #[test]
    fn plane_wave_trajectory_is_uniform_motion() {
        let psi = state(StateSpec::Momentum { mode: 1 }, 128);
        let g = *psi.grid();
        let tr = integrate(&psi, &Potential::zero(&g), 0.3, 0.1, 1e-4).unwrap();
        let expected = wrap(0.3 + TAU * 0.1, 1.0);
        assert!((tr.last_position() - expected).abs() < 1e-9);
        assert_eq!(tr.times().len(), 1001);
        assert!(tr.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn real_state_trajectory_stays_put() {
        let psi = state(StateSpec::StandingWave { mode: 1 }, 128);
        let g = *psi.grid();
        let tr = integrate(&psi, &Potential::zero(&g), 0.6, 0.05, 1e-3).unwrap();
        assert!(tr.positions().iter().all(|x| (x - 0.6).abs() < 1e-12));
    }

    #[test]
    fn packet_center_follows_group_velocity() {
        let k = TAU * 2.0;
        let psi = state(
            StateSpec::Gaussian {
                center: 0.3,
                width: 0.06,
                wavenumber: k,
            },
            512,
        );
        let g = *psi.grid();
        let tr = integrate(&psi, &Potential::zero(&g), 0.3, 0.02, 1e-4).unwrap();
        assert!((tr.last_position() - (0.3 + k * 0.02)).abs() < 1e-6);
    }

    #[test]
    fn trajectories_keep_their_order() {
        let psi = state(StateSpec::two_mode(1, 1.0, 2, 0.6), 256);
        let g = *psi.grid();
        let starts = [0.05, 0.2, 0.35, 0.6, 0.9];
        let trs = integrate_many(&psi, &Potential::zero(&g), &starts, 0.2, 1e-4).unwrap();
        for i in 0..trs[0].times().len() {
            for w in trs.windows(2) {
                assert!(w[0].unwrapped()[i] < w[1].unwrapped()[i]);
            }
            assert!(trs[4].unwrapped()[i] - trs[0].unwrapped()[i] < 1.0);
        }
    }

    #[test]
    fn incommensurate_time_is_rejected() {
        let psi = state(StateSpec::Uniform, 64);
        let g = *psi.grid();
        assert!(matches!(
            integrate(&psi, &Potential::zero(&g), 0.1, 0.1003, 0.01),
            Err(BohmError::Incommensurate { .. })
        ));
    }
}
