//! Cubic smoothing splines with natural boundary conditions.
//!
//! The fit minimises `Σ (y_i − g(x_i))² + λ ∫ g''(t)² dt`. With `λ = 0` the
//! result is the natural interpolating cubic spline through the knots.

use nalgebra::{DMatrix, DVector};

use super::CodecError;

/// A natural cubic spline stored as knot values and knot second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    /// Fits a smoothing spline through `(knots[i], data[i])`.
    ///
    /// Knots must be strictly increasing and there must be at least three of
    /// them. `smoothing` is the non-negative roughness penalty λ.
    pub fn smoothing(knots: &[f64], data: &[f64], smoothing: f64) -> Result<Self, CodecError> {
        let n = knots.len();
        if n != data.len() {
            return Err(CodecError::Spline("knot and data lengths differ"));
        }
        if n < 3 {
            return Err(CodecError::Spline("at least three knots are required"));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(CodecError::Spline("smoothing parameter must be finite and non-negative"));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        if h.iter().any(|&hi| !(hi > 0.0)) {
            return Err(CodecError::Spline("knots must be strictly increasing"));
        }

        // Q is n x (n-2), R is (n-2) x (n-2) tridiagonal.
        let m = n - 2;
        let mut q = DMatrix::<f64>::zeros(n, m);
        let mut r = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let y = DVector::from_column_slice(data);
        let lhs = &r + q.transpose() * &q * smoothing;
        let rhs = q.transpose() * &y;
        let gamma = lhs
            .cholesky()
            .ok_or(CodecError::Spline("spline system is not positive definite"))?
            .solve(&rhs);
        let fitted = &y - &q * &gamma * smoothing;

        let mut second = Vec::with_capacity(n);
        second.push(0.0);
        second.extend(gamma.iter().copied());
        second.push(0.0);
        Ok(Self {
            knots: knots.to_vec(),
            values: fitted.iter().copied().collect(),
            second,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Spline values at the knots (equal to the data when λ = 0).
    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates the spline. Outside the knot range the end segments are
    /// extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let seg = self.knots[1..n - 1].partition_point(|&k| k <= t);
        let (x0, x1) = (self.knots[seg], self.knots[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        a * self.values[seg]
            + b * self.values[seg + 1]
            + ((a * a * a - a) * self.second[seg] + (b * b * b - b) * self.second[seg + 1]) * h * h
                / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_without_smoothing() {
        let x = [0.0, 1.0, 2.5, 3.0, 4.0];
        let y = [1.0, -2.0, 0.5, 0.0, 3.0];
        let s = CubicSpline::smoothing(&x, &y, 0.0).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_straight_lines_for_any_smoothing() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v - 1.0).collect();
        for lambda in [0.0, 0.5, 100.0] {
            let s = CubicSpline::smoothing(&x, &y, lambda).unwrap();
            assert!((s.eval(3.7) - (0.3 * 3.7 - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn heavy_smoothing_tends_to_least_squares_line() {
        let x: Vec<f64> = (0..6).map(f64::from).collect();
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let s = CubicSpline::smoothing(&x, &y, 1e9).unwrap();
        // least-squares line through the data: slope 3/35, intercept 2/7
        let line = |t: f64| 2.0 / 7.0 + 3.0 / 35.0 * t;
        for t in [0.0, 2.2, 5.0] {
            assert!((s.eval(t) - line(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::smoothing(&[0.0, 1.0], &[0.0, 1.0], 0.0).is_err());
        assert!(CubicSpline::smoothing(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 0.0).is_err());
        assert!(CubicSpline::smoothing(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], -1.0).is_err());
    }
}
