//! Off-grid evaluation of grid fields.

use num_complex::Complex;

use crate::real::{wrap, Real};
use crate::spectral::Spectral;

/// Periodic cubic spline through uniformly spaced samples.
///
/// The second-derivative system is circulant, so it is solved in Fourier
/// space instead of with a cyclic tridiagonal sweep.
#[derive(Debug, Clone)]
pub struct PeriodicSpline<T: Real> {
    values: Vec<T>,
    second: Vec<T>,
    spacing: T,
    period: T,
}

impl<T: Real> PeriodicSpline<T> {
    pub fn new(values: Vec<T>, period: T, spectral: &Spectral<T>) -> Self {
        let p = values.len();
        assert_eq!(p, spectral.points(), "spline/grid size mismatch");
        let spacing = period / T::of_usize(p);
        let six_over_h2 = T::lit(6.0) / (spacing * spacing);
        // rhs_j = 6 (y_{j-1} - 2 y_j + y_{j+1}) / h²
        let mut buf: Vec<Complex<T>> = (0..p)
            .map(|j| {
                let prev = values[(j + p - 1) % p];
                let next = values[(j + 1) % p];
                Complex::new(six_over_h2 * (prev - T::lit(2.0) * values[j] + next), T::zero())
            })
            .collect();
        spectral.forward_in_place(&mut buf);
        for (k, z) in buf.iter_mut().enumerate() {
            let theta = T::TAU() * T::of_usize(k) / T::of_usize(p);
            let eig = T::lit(4.0) + T::lit(2.0) * theta.cos();
            *z = *z / eig;
        }
        spectral.inverse_in_place(&mut buf);
        let second = buf.into_iter().map(|z| z.re).collect();
        Self {
            values,
            second,
            spacing,
            period,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn locate(&self, x: T) -> (usize, T) {
        let p = self.values.len();
        let s = wrap(x, self.period) / self.spacing;
        let j = s.floor().to_usize().unwrap_or(0).min(p - 1);
        let t = s - T::of_usize(j);
        (j, t)
    }

    pub fn eval(&self, x: T) -> T {
        let p = self.values.len();
        let (j, t) = self.locate(x);
        let k = (j + 1) % p;
        let a = T::one() - t;
        let h2 = self.spacing * self.spacing;
        let six = T::lit(6.0);
        a * self.values[j]
            + t * self.values[k]
            + ((a * a * a - a) * self.second[j] + (t * t * t - t) * self.second[k]) * h2 / six
    }

    pub fn derivative(&self, x: T) -> T {
        let p = self.values.len();
        let (j, t) = self.locate(x);
        let k = (j + 1) % p;
        let a = T::one() - t;
        let h = self.spacing;
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        (self.values[k] - self.values[j]) / h
            + ((T::one() - three * a * a) * self.second[j] + (three * t * t - T::one()) * self.second[k]) * h / six
    }
}

/// Piecewise cubic Hermite interpolant on `[0, L]` through node values and
/// node slopes, with slopes limited so the interpolant is monotone whenever
/// the node values are.
#[derive(Debug, Clone)]
pub struct MonotoneHermite<T: Real> {
    values: Vec<T>,
    slopes: Vec<T>,
    spacing: T,
    /// Bernstein control points of cells that use the quintic form.
    quintic: Vec<Option<[T; 6]>>,
}

impl<T: Real> MonotoneHermite<T> {
    /// `values` and `slopes` have one entry per node, nodes at `j * spacing`.
    pub fn new(values: Vec<T>, mut slopes: Vec<T>, spacing: T) -> Self {
        assert_eq!(values.len(), slopes.len());
        assert!(values.len() >= 2);
        let n = values.len() - 1;
        for s in slopes.iter_mut() {
            if *s < T::zero() {
                *s = T::zero();
            }
        }
        // Fritsch–Carlson: keep (α, β) inside the circle of radius 3.
        for j in 0..n {
            let secant = (values[j + 1] - values[j]) / spacing;
            if secant <= T::zero() {
                slopes[j] = T::zero();
                slopes[j + 1] = T::zero();
                continue;
            }
            let alpha = slopes[j] / secant;
            let beta = slopes[j + 1] / secant;
            let r2 = alpha * alpha + beta * beta;
            if r2 > T::lit(9.0) {
                let tau = T::lit(3.0) / r2.sqrt();
                slopes[j] = tau * alpha * secant;
                slopes[j + 1] = tau * beta * secant;
            }
        }
        let quintic = vec![None; n];
        Self {
            values,
            slopes,
            spacing,
            quintic,
        }
    }

    /// Like [`MonotoneHermite::new`], but cells where the quintic Hermite
    /// interpolant through values, slopes and second derivatives is provably
    /// monotone (non-negative Bernstein differences) use it instead of the
    /// limited cubic.
    pub fn with_curvature(values: Vec<T>, slopes: Vec<T>, curvatures: Vec<T>, spacing: T) -> Self {
        assert_eq!(values.len(), curvatures.len());
        let raw = slopes.clone();
        let mut out = Self::new(values, slopes, spacing);
        let h = spacing;
        let (five, twenty) = (T::lit(5.0), T::lit(20.0));
        for j in 0..out.cells() {
            let (y0, y1) = (out.values[j], out.values[j + 1]);
            let b = [
                y0,
                y0 + h * raw[j] / five,
                y0 + T::lit(2.0) * h * raw[j] / five + h * h * curvatures[j] / twenty,
                y1 - T::lit(2.0) * h * raw[j + 1] / five + h * h * curvatures[j + 1] / twenty,
                y1 - h * raw[j + 1] / five,
                y1,
            ];
            if y1 > y0 && b.windows(2).all(|w| w[1] >= w[0]) {
                out.quintic[j] = Some(b);
            }
        }
        out
    }

    pub fn nodes(&self) -> &[T] {
        &self.values
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    /// Evaluate inside cell `j` at local coordinate `t ∈ [0, 1]`.
    pub fn eval_cell(&self, j: usize, t: T) -> T {
        if let Some(b) = &self.quintic[j] {
            return bernstein(b, t);
        }
        let (h00, h10, h01, h11) = hermite_basis(t);
        h00 * self.values[j]
            + h10 * self.spacing * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * self.spacing * self.slopes[j + 1]
    }

    /// Evaluate at `x ∈ [0, L]` (clamped).
    pub fn eval(&self, x: T) -> T {
        let n = self.cells();
        let s = (x / self.spacing).max(T::zero());
        let j = s.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = (s - T::of_usize(j)).min(T::one());
        self.eval_cell(j, t)
    }

    /// Smallest `x` with `eval(x) >= y`, for `y` within the node range.
    pub fn inverse(&self, y: T) -> T {
        let n = self.cells();
        let idx = self.values.partition_point(|&v| v < y);
        if idx == 0 {
            return T::zero();
        }
        if idx > n {
            return T::of_usize(n) * self.spacing;
        }
        if self.values[idx] == y {
            // Leftmost node attaining y: start of any flat run.
            return T::of_usize(idx) * self.spacing;
        }
        let j = idx - 1;
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut t = (y - self.values[j]) / (self.values[j + 1] - self.values[j]);
        let tol = T::epsilon() * T::lit(4.0);
        for _ in 0..100 {
            let f = self.eval_cell(j, t) - y;
            if f.abs() <= tol * (T::one() + y.abs()) {
                break;
            }
            if f < T::zero() {
                lo = t;
            } else {
                hi = t;
            }
            let df = self.cell_slope(j, t);
            let newton = t - f / df;
            t = if df > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * T::lit(0.5)
            };
            if hi - lo < tol {
                break;
            }
        }
        (T::of_usize(j) + t) * self.spacing
    }

    /// d/dt of the cell polynomial.
    fn cell_slope(&self, j: usize, t: T) -> T {
        if let Some(b) = &self.quintic[j] {
            let d = [b[1] - b[0], b[2] - b[1], b[3] - b[2], b[4] - b[3], b[5] - b[4]];
            return T::lit(5.0) * bernstein(&d, t);
        }
        let six = T::lit(6.0);
        let t2 = t * t;
        let d00 = six * t2 - six * t;
        let d10 = T::lit(3.0) * t2 - T::lit(4.0) * t + T::one();
        let d01 = -d00;
        let d11 = T::lit(3.0) * t2 - T::lit(2.0) * t;
        d00 * self.values[j]
            + d10 * self.spacing * self.slopes[j]
            + d01 * self.values[j + 1]
            + d11 * self.spacing * self.slopes[j + 1]
    }
}

/// De Casteljau evaluation of a Bernstein polynomial.
fn bernstein<T: Real, const N: usize>(coeffs: &[T; N], t: T) -> T {
    let mut b = *coeffs;
    let s = T::one() - t;
    for r in 1..N {
        for i in 0..N - r {
            b[i] = s * b[i] + t * b[i + 1];
        }
    }
    b[0]
}

fn hermite_basis<T: Real>(t: T) -> (T, T, T, T) {
    let t2 = t * t;
    let t3 = t2 * t;
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    (
        two * t3 - three * t2 + T::one(),
        t3 - two * t2 + t,
        -two * t3 + three * t2,
        t3 - t2,
    )
}
