//! FFT plumbing for periodic grids: wavenumbers, spectral derivatives and
//! exact integrals of the band-limited interpolant.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::real::Real;

/// Forward/inverse transforms and wavenumbers for one periodic grid.
#[derive(Clone)]
pub struct Spectral<T: Real> {
    points: usize,
    length: T,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    wavenumbers: Vec<T>,
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("points", &self.points)
            .field("length", &self.length)
            .finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(points: usize, length: T) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let base = T::TAU() / length;
        let wavenumbers = (0..points)
            .map(|k| {
                let signed = if k <= points / 2 {
                    k as f64
                } else {
                    k as f64 - points as f64
                };
                base * T::lit(signed)
            })
            .collect();
        Self {
            points,
            length,
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Angular wavenumber of each FFT bin (Nyquist bin reported as +π/dx).
    pub fn wavenumbers(&self) -> &[T] {
        &self.wavenumbers
    }

    fn nyquist(&self, k: usize) -> bool {
        self.points.is_multiple_of(2) && k == self.points / 2
    }

    pub fn forward_in_place(&self, data: &mut [Complex<T>]) {
        self.forward.process(data);
    }

    /// Inverse transform including the `1/P` normalisation.
    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) {
        self.inverse.process(data);
        let scale = T::one() / T::of_usize(self.points);
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }

    /// Spectral first derivative of periodic complex samples.
    pub fn derivative(&self, samples: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = samples.to_vec();
        self.forward_in_place(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            *z = if self.nyquist(k) {
                Complex::new(T::zero(), T::zero())
            } else {
                *z * Complex::new(T::zero(), self.wavenumbers[k])
            };
        }
        self.inverse_in_place(&mut buf);
        buf
    }

    /// Spectral first derivative of periodic real samples.
    pub fn real_derivative(&self, samples: &[T]) -> Vec<T> {
        let buf: Vec<Complex<T>> = samples.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.derivative(&buf).into_iter().map(|z| z.re).collect()
    }

    /// Exact mean of the trigonometric interpolant over each cell `[x_j, x_{j+1})`.
    pub fn cell_means(&self, samples: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = samples.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.forward_in_place(&mut buf);
        let h = self.length / T::of_usize(self.points);
        for (k, z) in buf.iter_mut().enumerate() {
            if k == 0 {
                continue;
            }
            if self.nyquist(k) {
                *z = Complex::new(T::zero(), T::zero());
                continue;
            }
            let theta = self.wavenumbers[k] * h;
            // (e^{iθ} - 1) / (iθ)
            let factor = Complex::new(theta.sin() / theta, (T::one() - theta.cos()) / theta);
            *z = *z * factor;
        }
        self.inverse_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Antiderivative of the trigonometric interpolant of `samples`, anchored at 0.
    pub fn antiderivative(&self, samples: &[T]) -> Antiderivative<T> {
        let mut coeffs: Vec<Complex<T>> = samples.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.forward_in_place(&mut coeffs);
        let scale = T::one() / T::of_usize(self.points);
        for z in coeffs.iter_mut() {
            *z = *z * scale;
        }
        Antiderivative {
            coeffs,
            wavenumbers: self.wavenumbers.clone(),
            nyquist: if self.points.is_multiple_of(2) {
                Some(self.points / 2)
            } else {
                None
            },
        }
    }
}

/// `x ↦ ∫₀ˣ f` for a band-limited periodic `f`, evaluated in O(P) per point.
#[derive(Debug, Clone)]
pub struct Antiderivative<T: Real> {
    coeffs: Vec<Complex<T>>,
    wavenumbers: Vec<T>,
    nyquist: Option<usize>,
}

impl<T: Real> Antiderivative<T> {
    pub fn eval(&self, x: T) -> T {
        let mut acc = self.coeffs[0].re * x;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let kw = self.wavenumbers[k];
            if Some(k) == self.nyquist {
                // Real cosine mode: c·cos(k x) integrates to c·sin(k x)/k.
                acc += c.re * (kw * x).sin() / kw;
                continue;
            }
            // c·(e^{ikx} - 1)/(ik)
            let (s, co) = (kw * x).sin_cos();
            let term = Complex::new(s, T::one() - co) * *c / Complex::new(kw, T::zero());
            acc += term.re;
        }
        acc
    }

    /// Integral of one period.
    pub fn total(&self, length: T) -> T {
        self.coeffs[0].re * length
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(p: usize) -> Vec<f64> {
        (0..p).map(|j| j as f64 / p as f64).collect()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let sp = Spectral::<f64>::new(64, 1.0);
        let xs = grid(64);
        let f: Vec<f64> = xs.iter().map(|x| (std::f64::consts::TAU * 3.0 * x).sin()).collect();
        let d = sp.real_derivative(&f);
        for (x, dv) in xs.iter().zip(d) {
            let exact = std::f64::consts::TAU * 3.0 * (std::f64::consts::TAU * 3.0 * x).cos();
            assert!((dv - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn cell_means_match_closed_form() {
        let p = 32;
        let sp = Spectral::<f64>::new(p, 1.0);
        let xs = grid(p);
        let k = std::f64::consts::TAU * 2.0;
        let f: Vec<f64> = xs.iter().map(|x| 1.0 + (k * x).cos()).collect();
        let means = sp.cell_means(&f);
        let h = 1.0 / p as f64;
        for (j, m) in means.iter().enumerate() {
            let a = j as f64 * h;
            let exact = 1.0 + ((k * (a + h)).sin() - (k * a).sin()) / (k * h);
            assert!((m - exact).abs() < 1e-13, "{j}: {m} vs {exact}");
        }
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let p = 64;
        let sp = Spectral::<f64>::new(p, 2.0);
        let k = std::f64::consts::TAU / 2.0;
        let f: Vec<f64> = (0..p)
            .map(|j| {
                let x = 2.0 * j as f64 / p as f64;
                1.0 - (k * x).cos()
            })
            .collect();
        let anti = sp.antiderivative(&f);
        for &x in &[0.0, 0.3, 1.0, 1.7] {
            let exact = x - (k * x).sin() / k;
            assert!((anti.eval(x) - exact).abs() < 1e-13);
        }
        assert!((anti.total(2.0) - 2.0).abs() < 1e-13);
    }
}
