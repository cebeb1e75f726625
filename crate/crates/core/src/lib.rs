//! Simulation laboratory for pilot-wave dynamics in a density-of-states
//! picture: the q-space map whose Jacobian is `|ψ|²`, deterministic and
//! stochastic trajectories, a Nelson-diffusion comparator, and the
//! entropy / typicality / maximum-entropy toolkit.
//!
//! All numerical types are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below are what the experiment runner uses.

// `!(a > b)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod crossing;
pub mod entropy_stats;
pub mod export;
pub mod grid_wave;
pub mod interp;
pub mod nelson;
pub mod qmap;
pub mod qwalk;
pub mod real;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use real::Real;

pub type Grid = grid_wave::Grid1D<f64>;
pub type Wavefunction64 = grid_wave::Wavefunction<f64>;
pub type Potential64 = grid_wave::Potential<f64>;
pub type QMap64 = qmap::QMap<f64>;
pub type Trajectory64 = bohm::Trajectory<f64>;
pub type TransitionKernel64 = qwalk::TransitionKernel<f64>;
pub type NelsonParams64 = nelson::NelsonParams<f64>;
pub type MaxEntProblem64 = entropy_stats::MaxEntProblem<f64>;
