//! CSV writers for grid fields, trajectories, maps and run summaries.
//!
//! Numbers use Rust's shortest round-trip formatting, so output is locale
//! free and byte-identical for identical inputs.

use std::io::Write;

use crate::bohm::Trajectory;
use crate::crossing::CrossingRate;
use crate::grid_wave::Grid1D;
use crate::qmap::QMap;
use crate::real::Real;

pub type CsvResult = Result<(), csv::Error>;

fn num<T: Real>(x: T) -> String {
    x.as_f64().to_string()
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

/// Columns `x, rho, F`.
pub fn write_density_flux<T: Real, W: Write>(w: W, grid: &Grid1D<T>, rho: &[T], flux: &[T]) -> CsvResult {
    let mut out = writer(w, &["x", "rho", "F"])?;
    for (j, (r, f)) in rho.iter().zip(flux).enumerate() {
        out.write_record([num(grid.x(j)), num(*r), num(*f)])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, x` for one walker.
pub fn write_trajectory<T: Real, W: Write>(w: W, traj: &Trajectory<T>) -> CsvResult {
    let mut out = writer(w, &["t", "x"])?;
    for (t, x) in traj.times().iter().zip(traj.positions()) {
        out.write_record([num(*t), num(x)])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format `t, walker_id, x` for several trajectories.
pub fn write_trajectories<T: Real, W: Write>(w: W, trajs: &[Trajectory<T>]) -> CsvResult {
    let mut out = writer(w, &["t", "walker_id", "x"])?;
    for traj in trajs {
        for (t, x) in traj.times().iter().zip(traj.positions()) {
            out.write_record([num(*t), traj.walker().to_string(), num(x)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Columns `x, Q, omega` at the grid nodes.
pub fn write_qmap<T: Real, W: Write>(w: W, map: &QMap<T>) -> CsvResult {
    let mut out = writer(w, &["x", "Q", "omega"])?;
    for (j, om) in map.omega().iter().enumerate() {
        let x = map.grid().x(j);
        out.write_record([num(x), num(map.forward(x)), num(*om)])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format `t, walker_id, x, q`; `x[s][w]` and `q[s][w]` per sample `s`.
pub fn write_ensemble<T: Real, W: Write>(w: W, times: &[T], x: &[Vec<T>], q: &[Vec<T>]) -> CsvResult {
    let mut out = writer(w, &["t", "walker_id", "x", "q"])?;
    for ((t, xs), qs) in times.iter().zip(x).zip(q) {
        for (id, (xv, qv)) in xs.iter().zip(qs).enumerate() {
            out.write_record([num(*t), id.to_string(), num(*xv), num(*qv)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row of the crossing-rate report.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingRow {
    pub dynamics: String,
    pub dt: f64,
    pub rate: CrossingRate,
}

/// Columns `dynamics, dt, crossings_per_unit_time, walkers, ci_low, ci_high`.
pub fn write_crossing_rates<W: Write>(w: W, rows: &[CrossingRow]) -> CsvResult {
    let mut out = writer(
        w,
        &[
            "dynamics",
            "dt",
            "crossings_per_unit_time",
            "walkers",
            "ci_low",
            "ci_high",
        ],
    )?;
    for r in rows {
        out.write_record([
            r.dynamics.clone(),
            r.dt.to_string(),
            r.rate.rate.to_string(),
            r.rate.walkers.to_string(),
            r.rate.ci_low.to_string(),
            r.rate.ci_high.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, H_coarse, S_relative`.
pub fn write_entropy_series<W: Write>(w: W, rows: &[(f64, f64, f64)]) -> CsvResult {
    let mut out = writer(w, &["t", "H_coarse", "S_relative"])?;
    for (t, h, s) in rows {
        out.write_record([t.to_string(), h.to_string(), s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
