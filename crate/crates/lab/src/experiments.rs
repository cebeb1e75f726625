//! The named experiments.
//!
//! Each experiment writes its CSV artifacts into the run directory and
//! records criteria and metrics on a [`RunReport`]. Runtime failures are
//! recorded on the report as well, so a report is always written.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use qspace_core::bohm::{integrate_many, BohmError};
use qspace_core::crossing::{CrossingDetector, CrossingRate};
use qspace_core::entropy_stats::{
    bin_probabilities, coarse_h_samples, histogram_kl, kl_floor, relative_entropy_weighted, typicality,
    typicality_from_map, volume_law_ratio, EntropyError, Histogram, IntervalSet, MaxEntError, MaxEntProblem,
};
use qspace_core::export::{self, CrossingRow};
use qspace_core::grid_wave::{density, flux, make_state, Grid1D, Potential, WaveError, Wavefunction};
use qspace_core::nelson::{evolve_nelson, NelsonError, NelsonParams};
use qspace_core::qmap::{build_qmap, jacobian_residual, transport_check, MapTracker, QMapError};
use qspace_core::qwalk::{
    conditional_density_predicted, evolve_ensemble, sample_quantum_equilibrium, sample_uniform, Ensemble, QWalkError,
    TransitionKernel,
};
use qspace_core::real::circular_distance;
use qspace_core::rng::walker_rng;
use qspace_core::stats::chi_square;
use rand::Rng;
use thiserror::Error;

use crate::config::{
    ConditionalParams, CrossingParams, ExperimentConfig, MaxEntParams, Params, RelaxationParams, TypicalityParams,
    ZeroNoiseParams, OUTPUT_ROOT_ENV,
};
use crate::report::RunReport;

/// Stream family for the max-ent perturbation draws.
const PURPOSE_PERTURB: u64 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Bohm(#[from] BohmError),
    #[error(transparent)]
    QMap(#[from] QMapError),
    #[error(transparent)]
    QWalk(#[from] QWalkError),
    #[error(transparent)]
    Nelson(#[from] NelsonError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error("writing {path}: {message}")]
    Artifact { path: String, message: String },
}

/// Run directory: `$QSPACE_OUTPUT_ROOT` (or `.`) joined with the config's
/// `output_dir`, defaulting to the experiment name.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    root.join(cfg.output_dir.as_deref().unwrap_or(cfg.experiment.name()))
}

/// Run a validated config into `dir` and write `report.json` there.
///
/// The returned error is only for failing to write the report itself.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> io::Result<RunReport> {
    fs::create_dir_all(dir)?;
    let mut report = RunReport::new(cfg.experiment.name(), cfg.raw.clone());
    let mut ctx = Context {
        cfg,
        dir,
        report: &mut report,
    };
    if let Err(e) = ctx.dispatch() {
        report.error = Some(e.to_string());
    }
    report.finish();
    report.write(dir)?;
    Ok(report)
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    report: &'a mut RunReport,
}

struct Setup {
    grid: Grid1D<f64>,
    psi0: Wavefunction<f64>,
    pot: Potential<f64>,
    kernel: TransitionKernel<f64>,
}

impl Context<'_> {
    fn dispatch(&mut self) -> Result<(), RunError> {
        match &self.cfg.params {
            Params::Stationarity(_) => self.qe_stationarity(),
            Params::Relaxation(p) => self.qe_relaxation(p),
            Params::ZeroNoise(p) => self.zero_noise(p),
            Params::Crossing(p) => self.nodal_crossing(p),
            Params::Conditional(p) => self.conditional_density(p),
            Params::Typicality(p) => self.typicality(p),
            Params::MaxEnt(p) => self.maxent(p),
        }
    }

    fn setup(&self) -> Result<Setup, RunError> {
        let c = self.cfg;
        let grid = Grid1D::new(c.grid.length, c.grid.points)?;
        let psi0 = make_state(&c.state, grid, c.units)?;
        let pot = c.potential.build(&grid, c.units)?;
        let kernel = TransitionKernel::from_spec(&c.kernel, c.units)?;
        Ok(Setup {
            grid,
            psi0,
            pot,
            kernel,
        })
    }

    fn write<F>(&mut self, name: &str, f: F) -> Result<(), RunError>
    where
        F: FnOnce(BufWriter<File>) -> Result<(), csv::Error>,
    {
        let path = self.dir.join(name);
        let fail = |message: String| RunError::Artifact {
            path: path.display().to_string(),
            message,
        };
        let file = File::create(&path).map_err(|e| fail(e.to_string()))?;
        f(BufWriter::new(file)).map_err(|e| fail(e.to_string()))?;
        self.report.artifact(name);
        Ok(())
    }

    fn density_flux(&mut self, psi: &Wavefunction<f64>) -> Result<(), RunError> {
        let (rho, f) = (density(psi), flux(psi));
        let grid = *psi.grid();
        self.write("density_flux.csv", |w| export::write_density_flux(w, &grid, &rho, &f))
    }

    fn qe_stationarity(&mut self) -> Result<(), RunError> {
        let Setup {
            grid,
            psi0,
            pot,
            kernel,
        } = self.setup()?;
        let c = self.cfg;
        let map0 = build_qmap(&psi0);
        let mut ens = Ensemble::quantum_equilibrium(c.walkers, &map0, &kernel, c.seed);
        let trace = evolve_ensemble(
            &mut ens,
            &kernel,
            &psi0,
            &pot,
            c.time.total,
            c.time.dt,
            &c.time.sample_times(),
        )?;
        let floor = kl_floor(c.bins, c.walkers);
        let cell = grid.length() / c.bins as f64;
        let ln_l = grid.length().ln();
        let mut worst: f64 = 0.0;
        let mut last = f64::NAN;
        let mut series = Vec::new();
        for ((t, xs), rho) in trace.times.iter().zip(&trace.positions).zip(trace.densities()) {
            last = histogram_kl(xs, &rho, &grid, c.bins)?;
            worst = worst.max(last);
            let h = coarse_h_samples(xs, &rho, &grid, cell)?;
            series.push((*t, h, ln_l - h));
        }
        self.report.metric("kl_final", last);
        self.report.metric("kl_max", worst);
        self.report.metric("kl_floor", floor);
        self.report.below("kl_below_floor", worst, floor);
        self.write("ensemble.csv", |w| {
            export::write_ensemble(w, &trace.times, &trace.positions, &trace.q)
        })?;
        self.write("entropy_series.csv", |w| export::write_entropy_series(w, &series))?;
        self.density_flux(trace.snapshots.last().unwrap_or(&psi0))
    }

    fn qe_relaxation(&mut self, p: &RelaxationParams) -> Result<(), RunError> {
        let Setup {
            grid,
            psi0,
            pot,
            kernel,
        } = self.setup()?;
        let c = self.cfg;
        let map0 = build_qmap(&psi0);
        let starts = sample_uniform(c.walkers, grid.length(), c.seed);
        let mut ens = Ensemble::from_positions(&starts, &map0, &kernel, c.seed);
        let samples = if c.time.samples.is_empty() {
            vec![0.0, c.time.total / 2.0, c.time.total]
        } else {
            c.time.samples.clone()
        };
        let trace = evolve_ensemble(&mut ens, &kernel, &psi0, &pot, c.time.total, c.time.dt, &samples)?;
        let cell = grid.length() / p.cells as f64;
        let ln_l = grid.length().ln();
        let mut series = Vec::new();
        for ((t, xs), rho) in trace.times.iter().zip(&trace.positions).zip(trace.densities()) {
            let h = coarse_h_samples(xs, &rho, &grid, cell)?;
            series.push((*t, h, ln_l - h));
        }
        let h0 = series.first().map_or(f64::NAN, |s| s.1);
        let h_end = series.last().map_or(f64::NAN, |s| s.1);
        let tolerance = kl_floor(p.cells, c.walkers);
        let rise = series
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, s) in series.iter().enumerate() {
            self.report.metric(&format!("h_coarse_{i}"), s.1);
        }
        self.report.metric("h_ratio", h_end / h0);
        self.report.criterion(
            "h_decreases_by_ratio",
            h_end < p.ratio * h0,
            h_end,
            p.ratio * h0,
            format!("H(T) = {h_end:e} < {} * H(0) = {:e}", p.ratio, p.ratio * h0),
        );
        self.report.criterion(
            "h_non_increasing",
            series.len() < 2 || rise <= tolerance,
            rise,
            tolerance,
            format!("largest step increase {rise:e} <= {tolerance:e}"),
        );
        self.write("entropy_series.csv", |w| export::write_entropy_series(w, &series))?;
        self.write("ensemble.csv", |w| {
            export::write_ensemble(w, &trace.times, &trace.positions, &trace.q)
        })?;
        self.density_flux(trace.snapshots.last().unwrap_or(&psi0))
    }

    fn zero_noise(&mut self, p: &ZeroNoiseParams) -> Result<(), RunError> {
        let Setup { grid, psi0, pot, .. } = self.setup()?;
        let c = self.cfg;
        let (total, dt) = (c.time.total, c.time.dt);
        let l = grid.length();
        let starts = if p.starts.is_empty() {
            vec![0.3 * l, 0.2 * l, 0.1 * l]
        } else {
            p.starts.clone()
        };
        let stride = (p.sample_interval / dt).round() as usize;
        let n_samples = (total / p.sample_interval).round() as usize;
        let sample_steps: Vec<usize> = (0..=n_samples)
            .map(|k| k * stride)
            .filter(|&n| n as f64 * dt <= total * (1.0 + 1e-12))
            .collect();
        let sample_times: Vec<f64> = sample_steps.iter().map(|&n| n as f64 * dt).collect();

        let bohm = integrate_many(&psi0, &pot, &starts, total, dt)?;
        let map0 = build_qmap(&psi0);
        let zero = TransitionKernel::zero();
        let mut ens = Ensemble::from_positions(&starts, &map0, &zero, c.seed);
        let trace = evolve_ensemble(&mut ens, &zero, &psi0, &pot, total, dt, &sample_times)?;

        let mut deviation: f64 = 0.0;
        for (s, &n) in sample_steps.iter().enumerate() {
            for (w, traj) in bohm.iter().enumerate() {
                let xb = traj.positions()[n];
                deviation = deviation.max(circular_distance(xb, trace.positions[s][w], l));
            }
        }
        let mut transport: f64 = 0.0;
        for &x0 in &starts {
            transport = transport.max(transport_check(&psi0, &pot, x0, total, dt)?);
        }
        self.report.metric("max_traj_deviation", deviation);
        self.report.metric("transport_deviation", transport);
        self.report.below("zero_noise_matches_bohm", deviation, p.tolerance);
        self.report.below("quantile_transport", transport, p.tolerance);
        self.write("trajectories.csv", |w| export::write_trajectories(w, &bohm))?;
        self.write("ensemble.csv", |w| {
            export::write_ensemble(w, &trace.times, &trace.positions, &trace.q)
        })?;
        self.write("qmap.csv", |w| export::write_qmap(w, &map0))
    }

    fn nodal_crossing(&mut self, p: &CrossingParams) -> Result<(), RunError> {
        let Setup {
            grid,
            psi0,
            pot,
            kernel,
        } = self.setup()?;
        let c = self.cfg;
        let total = c.time.total;
        let dts = if p.dts.is_empty() {
            vec![c.time.dt, c.time.dt / 2.0, c.time.dt / 4.0]
        } else {
            p.dts.clone()
        };
        let nodes = if p.nodes.is_empty() {
            detect_nodes(&grid, &density(&psi0))
        } else {
            p.nodes.clone()
        };
        let detector = CrossingDetector::new(nodes.clone(), p.band_cells * grid.dx(), grid.length());
        let n_samples = (total / p.sample_interval).round() as usize;
        let sample_times: Vec<f64> = (0..=n_samples).map(|k| k as f64 * p.sample_interval).collect();
        let map0 = build_qmap(&psi0);
        let starts = sample_quantum_equilibrium(c.walkers, &map0, c.seed);

        let mut rows = Vec::new();
        for &dt in &dts {
            let params = NelsonParams::from_units(c.units, dt)?;
            let trace = evolve_nelson(&starts, &psi0, &pot, &params, total, &sample_times, c.seed)?;
            let rate = CrossingRate::from_counts(&detector.count_ensemble(&trace.positions), total);
            rows.push(CrossingRow {
                dynamics: "nelson".into(),
                dt,
                rate,
            });
        }
        for &dt in &dts {
            let mut ens = Ensemble::from_positions(&starts, &map0, &kernel, c.seed);
            let trace = evolve_ensemble(&mut ens, &kernel, &psi0, &pot, total, dt, &sample_times)?;
            let rate = CrossingRate::from_counts(&detector.count_ensemble(&trace.positions), total);
            rows.push(CrossingRow {
                dynamics: "qwalk".into(),
                dt,
                rate,
            });
        }
        let k = dts.len();
        let (nelson, qwalk) = (&rows[..k], &rows[k..]);
        // A zero Nelson count is read as one crossing in the whole ensemble.
        let resolution = 1.0 / (c.walkers as f64 * total);
        let ratio = qwalk[0].rate.rate / nelson[0].rate.rate.max(resolution);
        self.report.metric("node_count", nodes.len() as f64);
        self.report.metric("nelson_rate", nelson[0].rate.rate);
        self.report.metric("qwalk_rate", qwalk[0].rate.rate);
        self.report.metric("rate_ratio", ratio);
        self.report.criterion(
            "qwalk_crosses_more",
            ratio >= p.min_ratio,
            ratio,
            p.min_ratio,
            format!("qwalk/nelson = {ratio:.4} >= {}", p.min_ratio),
        );
        let mut order: Vec<&CrossingRow> = nelson.iter().collect();
        order.sort_by(|a, b| b.dt.total_cmp(&a.dt));
        let decreasing = order.windows(2).all(|w| w[1].rate.rate < w[0].rate.rate);
        let rates: Vec<String> = order.iter().map(|r| format!("{}@{}", r.rate.rate, r.dt)).collect();
        self.report.criterion(
            "nelson_decreases_with_dt",
            decreasing,
            order.last().map_or(f64::NAN, |r| r.rate.rate),
            order.first().map_or(f64::NAN, |r| r.rate.rate),
            format!("nelson rates {}", rates.join(", ")),
        );
        let stable = qwalk.iter().all(|a| qwalk.iter().all(|b| a.rate.overlaps(&b.rate)));
        let spread = qwalk.iter().map(|r| r.rate.rate).fold(f64::NEG_INFINITY, f64::max)
            - qwalk.iter().map(|r| r.rate.rate).fold(f64::INFINITY, f64::min);
        let rates: Vec<String> = qwalk
            .iter()
            .map(|r| format!("{}@{} [{}, {}]", r.rate.rate, r.dt, r.rate.ci_low, r.rate.ci_high))
            .collect();
        self.report.criterion(
            "qwalk_stable_with_dt",
            stable,
            spread,
            f64::NAN,
            format!("qwalk rates {}", rates.join(", ")),
        );
        self.write("crossing_rates.csv", |w| export::write_crossing_rates(w, &rows))
    }

    fn conditional_density(&mut self, p: &ConditionalParams) -> Result<(), RunError> {
        let Setup {
            grid,
            psi0,
            pot,
            kernel,
        } = self.setup()?;
        let c = self.cfg;
        let elapsed = p.delta_t.unwrap_or(c.time.dt);
        let mut tracker = MapTracker::new(psi0.clone(), &pot, elapsed)?;
        let map1 = tracker.map();
        tracker.advance();
        let map2 = tracker.map();
        let predicted = conditional_density_predicted(&map1, &map2, tracker.psi(), p.x1, &kernel, elapsed)?;
        let integral: f64 = predicted.iter().sum::<f64>() * grid.dx();

        let mut ens = Ensemble::from_positions(&vec![p.x1; c.walkers], &map1, &kernel, c.seed);
        let trace = evolve_ensemble(&mut ens, &kernel, &psi0, &pot, elapsed, elapsed, &[elapsed])?;
        let hist = Histogram::from_samples(&trace.positions[0], c.bins, grid.length());
        let probs = bin_probabilities(&predicted, &grid, c.bins)?;
        let test = chi_square(hist.counts(), &probs, 5.0);

        self.report.metric("chi_square", test.statistic);
        self.report.metric("dof", test.dof as f64);
        self.report.metric("p_value", test.p_value);
        self.report.metric("prediction_integral", integral);
        self.report.criterion(
            "chi_square_p_value",
            test.p_value > p.p_min,
            test.p_value,
            p.p_min,
            format!(
                "chi2 = {:.3} on {} dof, p = {:.4} > {}",
                test.statistic, test.dof, test.p_value, p.p_min
            ),
        );
        self.report.below("prediction_normalized", (integral - 1.0).abs(), 1e-6);
        let edges = hist.edges(grid.length());
        let n = hist.total() as f64;
        let norm: f64 = probs.iter().sum();
        let rows: Vec<[f64; 4]> = (0..hist.bins())
            .map(|b| [edges[b], edges[b + 1], hist.counts()[b] as f64, n * probs[b] / norm])
            .collect();
        self.write("conditional_density.csv", |w| {
            write_rows(w, &["bin_low", "bin_high", "observed", "expected"], &rows)
        })?;
        self.density_flux(tracker.psi())
    }

    fn typicality(&mut self, p: &TypicalityParams) -> Result<(), RunError> {
        let Setup { grid, psi0, .. } = self.setup()?;
        let c = self.cfg;
        let l = grid.length();
        let map0 = build_qmap(&psi0);
        let samples = sample_quantum_equilibrium(c.walkers, &map0, c.seed);
        let mut sets: Vec<IntervalSet<f64>> = p
            .intervals
            .iter()
            .map(|&(a, b)| IntervalSet::new(vec![(a, b)], l))
            .collect::<Result<_, _>>()?;
        if p.intervals.len() > 1 {
            sets.push(IntervalSet::new(p.intervals.clone(), l)?);
        }
        sets.push(IntervalSet::full(l));
        let mut worst_gap: f64 = 0.0;
        let mut worst_sigma: f64 = 0.0;
        let mut rows = Vec::new();
        for set in &sets {
            let typ = typicality(&psi0, set);
            let qv = typicality_from_map(&map0, set);
            let inside = samples
                .iter()
                .filter(|&&x| set.intervals().iter().any(|&(a, b)| x >= a && x < b))
                .count();
            let frac = inside as f64 / samples.len() as f64;
            let se = (typ * (1.0 - typ) / samples.len() as f64).sqrt();
            if se > 0.0 {
                worst_sigma = worst_sigma.max((frac - typ).abs() / se);
            }
            worst_gap = worst_gap.max((typ - qv).abs());
            for &(a, b) in set.intervals() {
                rows.push([a, b, set.measure(), typ, qv, frac]);
            }
        }
        let full = typicality(&psi0, &IntervalSet::full(l));
        self.report.metric("typicality_full", full);
        self.report.metric("typicality_gap", worst_gap);
        self.report.metric("empirical_sigma", worst_sigma);
        self.report.below("typicality_equals_q_volume", worst_gap, 1e-9);
        self.report.below("full_domain_typicality", (full - 1.0).abs(), 1e-9);
        self.report.below("empirical_fraction_sigma", worst_sigma, 4.0);

        let residual = jacobian_residual(&map0, &psi0)?;
        self.report.metric("jacobian_residual", residual);
        self.report.below("jacobian_residual", residual, 1e-5);

        let mut ratios = Vec::new();
        for &m in &p.volume_law_m {
            let law = volume_law_ratio(&Histogram::from_counts(vec![m / 2, m / 2]))?;
            self.report.metric(&format!("volume_ratio_m{m}"), law.ratio);
            ratios.push([m as f64, law.ln_w, m as f64 * law.entropy, law.ratio]);
        }
        let increasing = ratios.windows(2).all(|w| w[1][3] > w[0][3] && w[1][0] > w[0][0]);
        let listed: Vec<String> = ratios.iter().map(|r| format!("{}:{:.10}", r[0], r[3])).collect();
        self.report.criterion(
            "volume_ratio_increasing",
            increasing && ratios.iter().all(|r| r[3] < 1.0),
            ratios.last().map_or(f64::NAN, |r| r[3]),
            1.0,
            format!("ratios {}", listed.join(", ")),
        );
        self.write("typicality.csv", |w| {
            write_rows(
                w,
                &[
                    "a",
                    "b",
                    "set_measure",
                    "typicality",
                    "q_volume_fraction",
                    "empirical_fraction",
                ],
                &rows,
            )
        })?;
        self.write("volume_law.csv", |w| {
            write_rows(w, &["M", "ln_W", "M_S", "ratio"], &ratios)
        })?;
        self.write("qmap.csv", |w| export::write_qmap(w, &map0))
    }

    fn maxent(&mut self, p: &MaxEntParams) -> Result<(), RunError> {
        let Setup { grid, psi0, .. } = self.setup()?;
        let c = self.cfg;
        let map0 = build_qmap(&psi0);

        // Born rule as the unconstrained solution over the density of states.
        let born = MaxEntProblem::periodic(&grid, map0.omega().to_vec(), vec![])?.solve()?;
        let born_gap = born
            .density
            .iter()
            .zip(density(&psi0))
            .map(|(r, b)| (r - b).abs())
            .fold(0.0, f64::max);
        self.report.metric("born_identity_gap", born_gap);
        self.report.below("qe_is_unconstrained_maxent", born_gap, 1e-10);

        let measure = |x: f64| 1.0 + 0.5 * (std::f64::consts::TAU * x).cos();
        let free = MaxEntProblem::on_interval(0.0, 1.0, p.nodes, measure, vec![])?;
        let free_sol = free.solve()?;
        let mass: f64 = free.measure().iter().zip(free.weights()).map(|(m, w)| m * w).sum();
        let free_gap = free_sol
            .density
            .iter()
            .zip(free.measure())
            .map(|(r, m)| (r - m / mass).abs())
            .fold(0.0, f64::max);
        self.report.metric("unconstrained_gap", free_gap);
        self.report
            .below("unconstrained_is_normalized_measure", free_gap, 1e-12);

        let half = MaxEntProblem::on_interval(0.0, 1.0, p.nodes, |_| 1.0, vec![0.5])?.solve()?;
        self.report.metric("lambda_mean_half", half.lambda[0]);
        self.report.below("mean_half_is_uniform", half.lambda[0].abs(), 1e-10);

        let problem = MaxEntProblem::on_interval(0.0, 1.0, p.nodes, |_| 1.0, vec![p.mean_target])?;
        let sol = problem.solve()?;
        let oracle = bisect_mean_multiplier(p.nodes, p.mean_target);
        let lambda_gap = (sol.lambda[0] - oracle).abs();
        self.report.metric("lambda_mean", sol.lambda[0]);
        self.report.metric("lambda_oracle", oracle);
        self.report.metric("moment_residual", sol.residuals[0].abs());
        self.report.below("mean_multiplier_matches_root_find", lambda_gap, 1e-8);
        self.report.below("moment_residual", sol.residuals[0].abs(), 1e-8);

        let (worst, rows) = perturbation_check(&problem, &sol.density, p.perturbations, c.seed)?;
        self.report.metric("best_perturbed_gain", worst);
        self.report.criterion(
            "maxent_optimal_under_perturbation",
            worst <= 0.0,
            worst,
            0.0,
            format!("largest entropy gain over {} perturbations: {worst:e}", p.perturbations),
        );
        let solution_rows: Vec<[f64; 3]> = problem
            .xs()
            .iter()
            .zip(problem.measure())
            .zip(&sol.density)
            .map(|((x, m), r)| [*x, *m, *r])
            .collect();
        self.write("maxent_density.csv", |w| {
            write_rows(w, &["x", "measure", "rho"], &solution_rows)
        })?;
        self.write("maxent_perturbations.csv", |w| {
            write_rows(w, &["index", "entropy_change"], &rows)
        })
    }
}

/// Local minima of the density that fall below a thousandth of its maximum.
fn detect_nodes(grid: &Grid1D<f64>, rho: &[f64]) -> Vec<f64> {
    let n = rho.len();
    let cut = 1e-3 * rho.iter().copied().fold(0.0, f64::max);
    (0..n)
        .filter(|&j| {
            let (l, r) = (rho[(j + n - 1) % n], rho[(j + 1) % n]);
            rho[j] < cut && rho[j] <= l && rho[j] < r
        })
        .map(|j| grid.x(j))
        .collect()
}

/// λ with trapezoid mean `target` for `ρ ∝ exp(−λx)` on `n + 1` nodes of `[0, 1]`.
fn bisect_mean_multiplier(n: usize, target: f64) -> f64 {
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
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Entropy change `S(ρ′) − S(ρ)` for random perturbations `ρ′ = ρ(1 + εg)`
/// with `g` orthogonal, in the `ρ`-weighted inner product, to `1` and every
/// constrained power, so that normalization and moments are unchanged.
fn perturbation_check(
    problem: &MaxEntProblem<f64>,
    rho: &[f64],
    count: usize,
    seed: u64,
) -> Result<(f64, Vec<[f64; 2]>), RunError> {
    let xs = problem.xs();
    let w = problem.weights();
    let m = problem.measure();
    let base = relative_entropy_weighted(rho, m, w)?;
    let basis: Vec<Vec<f64>> = (0..=problem.targets().len())
        .map(|k| xs.iter().map(|x| x.powi(k as i32)).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(rho)
            .zip(w)
            .map(|(((a, b), r), w)| a * b * r * w)
            .sum()
    };
    // Gram-Schmidt on the constraint functions.
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for v in basis {
        let mut v = v;
        for u in &ortho {
            let c = dot(&v, u) / dot(u, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        ortho.push(v);
    }
    let mut worst = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = walker_rng(seed, PURPOSE_PERTURB, i as u64);
        let coeffs: Vec<(f64, f64)> = (1..=4)
            .map(|_| (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut g: Vec<f64> = xs
            .iter()
            .map(|&x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let arg = std::f64::consts::TAU * (k + 1) as f64 * x;
                        a * arg.cos() + b * arg.sin()
                    })
                    .sum()
            })
            .collect();
        for u in &ortho {
            let c = dot(&g, u) / dot(u, u);
            g.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let peak = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let eps = (0.5 * rng.random::<f64>() + 0.01) / peak;
        let perturbed: Vec<f64> = rho.iter().zip(&g).map(|(r, g)| r * (1.0 + eps * g)).collect();
        let change = relative_entropy_weighted(&perturbed, m, w)? - base;
        worst = worst.max(change);
        rows.push([i as f64, change]);
    }
    Ok((worst, rows))
}

fn write_rows<W: io::Write, const N: usize>(w: W, header: &[&str], rows: &[[f64; N]]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}
