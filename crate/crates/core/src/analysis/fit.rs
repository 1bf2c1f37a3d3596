//! Two-parameter fit of retrieval efficiency against signal width.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;
const MAX_ITERATIONS: usize = 200;

/// `η(T) = η0 / √(1 + (4 ln 2 / (T γ))²)` for signal FWHM `T`.
pub fn bandwidth_model(fwhm: f64, eta0: f64, gamma: f64) -> f64 {
    let u = FOUR_LN2 / (fwhm * gamma);
    eta0 / (1.0 + u * u).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthFit {
    pub eta0: f64,
    pub gamma_fit: f64,
    /// Euclidean norm of the efficiency residuals.
    pub residual_norm: f64,
    /// `(fwhm, eta)` pairs the fit was made to.
    pub points: Vec<(f64, f64)>,
}

impl BandwidthFit {
    pub fn eval(&self, fwhm: f64) -> f64 {
        bandwidth_model(fwhm, self.eta0, self.gamma_fit)
    }
}

/// Least-squares fit of `(eta0, gamma)` with `eta0 ∈ (0, 1]`, `gamma > 0`.
///
/// The starting point comes from the linearisation
/// `1/η² = 1/η0² + (4 ln 2)² / (η0² γ²) · 1/T²`, then a projected
/// Levenberg–Marquardt iteration minimises the residuals in `η` itself.
pub fn bandwidth_fit(points: &[(f64, f64)]) -> Result<BandwidthFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    for &(fwhm, eta) in points {
        if !(fwhm.is_finite() && fwhm > 0.0) {
            return Err(AnalysisError::Fit(format!("fwhm must be positive, got {fwhm}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(AnalysisError::Fit(format!("efficiency must be positive, got {eta}")));
        }
    }
    let first = points[0].0;
    if points.iter().all(|&(fwhm, _)| fwhm == first) {
        return Err(AnalysisError::RankDeficient);
    }

    let (mut eta0, mut log_gamma) = initial_guess(points);
    let mut cost = sum_sq(points, eta0, log_gamma);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let gamma = log_gamma.exp();
        // normal equations of the residual r_i = model_i − η_i
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(fwhm, eta) in points {
            let u = FOUR_LN2 / (fwhm * gamma);
            let w = 1.0 / (1.0 + u * u).sqrt();
            let r = eta0 * w - eta;
            let j1 = w;
            let j2 = eta0 * u * u * w * w * w;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (b11, b22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
            let det = b11 * b22 - a12 * a12;
            if det <= 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let d1 = -(b22 * g1 - a12 * g2) / det;
            let d2 = -(b11 * g2 - a12 * g1) / det;
            let trial_eta0 = (eta0 + d1).clamp(f64::MIN_POSITIVE, 1.0);
            let trial_log_gamma = log_gamma + d2;
            let trial_cost = sum_sq(points, trial_eta0, trial_log_gamma);
            if trial_cost <= cost {
                let step = (trial_eta0 - eta0).abs() + (trial_log_gamma - log_gamma).abs();
                eta0 = trial_eta0;
                log_gamma = trial_log_gamma;
                let gain = cost - trial_cost;
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-15);
                improved = step > 1e-15 && gain > cost * 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }

    let gamma_fit = log_gamma.exp();
    if !(eta0 > 0.0 && gamma_fit.is_finite() && gamma_fit > 0.0) {
        return Err(AnalysisError::Fit("iteration left the feasible region".into()));
    }
    Ok(BandwidthFit {
        eta0,
        gamma_fit,
        residual_norm: cost.sqrt(),
        points: points.to_vec(),
    })
}

fn sum_sq(points: &[(f64, f64)], eta0: f64, log_gamma: f64) -> f64 {
    let gamma = log_gamma.exp();
    points
        .iter()
        .map(|&(fwhm, eta)| {
            let r = bandwidth_model(fwhm, eta0, gamma) - eta;
            r * r
        })
        .sum()
}

fn initial_guess(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(t, _)| 1.0 / (t * t)).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| 1.0 / (e * e)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let eta_max = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let t_mid = points.iter().map(|p| p.0).sum::<f64>() / n;
    if intercept > 0.0 && slope > 0.0 {
        let eta0 = (1.0 / intercept.sqrt()).min(1.0);
        let gamma = FOUR_LN2 * (intercept / slope).sqrt();
        (eta0, gamma.ln())
    } else {
        (eta_max.min(1.0), (FOUR_LN2 / t_mid).ln())
    }
}
