//! Objective functions: internal efficiency, the proxy fitness used during
//! optimisation, and the energy-constrained wrapper.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory_sim::{ExperimentTiming, MemoryTrace, SimError};
use crate::pulse_codec::{CodecError, DecodeContext, Genome, Waveform};

/// Slack allowed above 1 before an efficiency is treated as invalid.
const ETA_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EfficiencyError {
    #[error("input energy is zero; efficiency is undefined")]
    ZeroInput,
    #[error("trace [{trace_start}, {trace_end}] does not cover window [{lo}, {hi}]")]
    Coverage {
        lo: f64,
        hi: f64,
        trace_start: f64,
        trace_end: f64,
    },
    #[error("efficiency {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("input tap fraction must be in (0, 1], got {0}")]
    BadTap(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("decode failed: {0}")]
    Codec(#[from] CodecError),
    #[error("simulation failed: {0}")]
    Simulation(#[from] SimError),
    #[error("efficiency failed: {0}")]
    Efficiency(#[from] EfficiencyError),
    #[error("energy constraint: {0}")]
    Constraint(String),
    #[error("{0}")]
    Failed(String),
}

/// Result of scoring one genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    /// Renormalisation factor when an energy constraint was applied.
    pub beta: Option<f64>,
    pub trace: Option<MemoryTrace>,
}

impl Evaluation {
    pub fn fitness_only(fitness: f64) -> Self {
        Self {
            fitness,
            beta: None,
            trace: None,
        }
    }
}

/// A total function from genome to fitness. Implementations must be
/// deterministic for a fixed configuration.
pub trait FitnessBackend: Sync {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError>;

    /// Scores a batch, possibly in parallel. The result order matches the
    /// input order and one failure does not stop the others.
    fn evaluate_batch(&self, genomes: &[Genome]) -> Vec<Result<Evaluation, BackendError>> {
        genomes.par_iter().map(|g| self.evaluate(g)).collect()
    }
}

impl<B: FitnessBackend + ?Sized> FitnessBackend for &B {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError> {
        (**self).evaluate(genome)
    }

    fn evaluate_batch(&self, genomes: &[Genome]) -> Vec<Result<Evaluation, BackendError>> {
        (**self).evaluate_batch(genomes)
    }
}

/// Wraps a plain function of the genes.
pub struct FnBackend<F>(pub F);

impl<F> FitnessBackend for FnBackend<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError> {
        Ok(Evaluation::fitness_only((self.0)(genome.genes())))
    }
}

/// Cheap analytic backend: how closely the decoded waveform matches a target,
/// `1 − Σ(w − target)² / Σ target²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformMatchBackend {
    pub decode: DecodeContext,
    target: Waveform,
}

impl WaveformMatchBackend {
    /// The target must be sampled on the decode grid.
    pub fn new(decode: DecodeContext, target: Waveform) -> Result<Self, CodecError> {
        let samples = (decode.window.duration() / decode.dt_sample + 1e-9).floor() as usize + 1;
        if samples != target.len() || decode.window.start != target.t_start() || decode.dt_sample != target.dt() {
            return Err(CodecError::InvalidWindow {
                start: target.t_start(),
                end: target.t_end(),
                dt: target.dt(),
            });
        }
        Ok(Self { decode, target })
    }

    pub fn target(&self) -> &Waveform {
        &self.target
    }
}

impl FitnessBackend for WaveformMatchBackend {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError> {
        let wf = self.decode.decode(genome)?;
        let (mut err, mut norm) = (0.0, 0.0);
        for (w, t) in wf.samples().iter().zip(self.target.samples()) {
            err += (w - t) * (w - t);
            norm += t * t;
        }
        Ok(Evaluation::fitness_only(1.0 - err / norm.max(f64::MIN_POSITIVE)))
    }
}

/// Efficiency with the energies and windows it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub eta_int: f64,
    pub retrieved_energy: f64,
    pub input_energy: f64,
    pub input_window: (f64, f64),
    pub output_window: (f64, f64),
}

/// Integral over `[lo, hi]` of the piecewise-linear interpolant of uniformly
/// sampled values. Equals the trapezoid rule when the limits are on the grid.
pub fn window_integral(t_start: f64, dt: f64, values: &[f64], lo: f64, hi: f64) -> Result<f64, EfficiencyError> {
    let t_end = t_start + (values.len() - 1) as f64 * dt;
    let tol = 1e-9 * dt;
    if lo < t_start - tol || hi > t_end + tol || hi < lo {
        return Err(EfficiencyError::Coverage {
            lo,
            hi,
            trace_start: t_start,
            trace_end: t_end,
        });
    }
    let last = values.len() - 1;
    let pos = |t: f64| ((t - t_start) / dt).clamp(0.0, last as f64);
    let value_at = |u: f64| {
        let i = (u.floor() as usize).min(last - 1);
        let f = u - i as f64;
        values[i] + f * (values[i + 1] - values[i])
    };
    let (ua, ub) = (pos(lo), pos(hi));
    let snap = |u: f64| {
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            r
        } else {
            u
        }
    };
    let (ua, ub) = (snap(ua), snap(ub));
    let first_node = ua.ceil() as usize;
    let last_node = ub.floor() as usize;
    if first_node > last_node {
        return Ok(0.5 * (value_at(ua) + value_at(ub)) * (ub - ua) * dt);
    }
    let mut sum = 0.5 * (value_at(ua) + values[first_node]) * (first_node as f64 - ua);
    for i in first_node..last_node {
        sum += 0.5 * (values[i] + values[i + 1]);
    }
    sum += 0.5 * (values[last_node] + value_at(ub)) * (ub - last_node as f64);
    Ok(sum * dt)
}

/// Retrieved energy in `[Δt/2, 3Δt/2]` over input energy in `[−Δt/2, Δt/2]`.
pub fn internal_efficiency(trace: &MemoryTrace, timing: &ExperimentTiming) -> Result<EfficiencyResult, EfficiencyError> {
    let input_window = timing.input_window();
    let output_window = timing.output_window();
    let input_energy = window_integral(trace.t_start, trace.dt, &trace.input_intensity, input_window.0, input_window.1)?;
    let retrieved_energy =
        window_integral(trace.t_start, trace.dt, &trace.output_intensity, output_window.0, output_window.1)?;
    if !(input_energy > 0.0) {
        return Err(EfficiencyError::ZeroInput);
    }
    let eta_int = retrieved_energy / input_energy;
    if !(0.0..=1.0 + ETA_SLACK).contains(&eta_int) {
        return Err(EfficiencyError::OutOfRange(eta_int));
    }
    Ok(EfficiencyResult {
        eta_int,
        retrieved_energy,
        input_energy,
        input_window,
        output_window,
    })
}

/// Fraction of the input signal seen by the normalising detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputTap {
    pub fraction: f64,
}

impl Default for InputTap {
    fn default() -> Self {
        Self { fraction: 1.0 }
    }
}

/// Retrieved energy normalised by the tapped input energy. With the full
/// input as tap this equals the internal efficiency.
pub fn proxy_fitness(trace: &MemoryTrace, timing: &ExperimentTiming, tap: &InputTap) -> Result<f64, EfficiencyError> {
    if !(tap.fraction > 0.0 && tap.fraction <= 1.0) {
        return Err(EfficiencyError::BadTap(tap.fraction));
    }
    let eff = internal_efficiency(trace, timing)?;
    Ok(eff.retrieved_energy / (tap.fraction * eff.input_energy))
}

/// Hard limit on the decoded pulse area, `I(θ) ≤ α · I(θ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstraint {
    /// Area of the reference (unconstrained best) pulse.
    pub i_max: f64,
    pub alpha: f64,
}

impl EnergyConstraint {
    pub fn new(i_max: f64, alpha: f64) -> Result<Self, BackendError> {
        if !(i_max > 0.0 && i_max.is_finite()) {
            return Err(BackendError::Constraint(format!("i_max must be positive, got {i_max}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BackendError::Constraint(format!("alpha must be in (0, 1], got {alpha}")));
        }
        Ok(Self { i_max, alpha })
    }

    pub fn limit(&self) -> f64 {
        self.alpha * self.i_max
    }
}

/// Scales the amplitude genes so the decoded area meets the limit.
///
/// Returns the genome to evaluate and `β`. Within budget the genome is
/// returned unchanged with `β = 1`. Otherwise `β` starts at
/// `I(θ) / (α I(θ̂))`; when clipping at the top of the drive range makes the
/// area non-linear in the scale, `β` is refined by bisection so that the
/// decoded area equals the limit to within 1e-9 relative, never above it.
pub fn renormalize(
    genome: &Genome,
    constraint: &EnergyConstraint,
    decode: &DecodeContext,
) -> Result<(Genome, f64), CodecError> {
    let limit = constraint.limit();
    let area = decode.area(genome)?;
    if area <= limit {
        return Ok((genome.clone(), 1.0));
    }
    let scaled_area = |beta: f64| -> Result<(Genome, f64), CodecError> {
        let g = decode.encoding.scale_amplitude(genome, beta);
        let a = decode.area(&g)?;
        Ok((g, a))
    };
    let close = |a: f64| a <= limit && (limit - a) <= 1e-9 * limit;

    let beta0 = area / limit;
    let (g0, a0) = scaled_area(beta0)?;
    if close(a0) {
        return Ok((g0, beta0));
    }
    // area is non-increasing in beta; bracket [lo, hi] with area(hi) <= limit
    let (mut lo, mut hi) = if a0 > limit { (beta0, beta0 * 2.0) } else { (1.0, beta0) };
    let mut best = if a0 <= limit { Some((g0, beta0)) } else { None };
    while best.is_none() {
        let (g, a) = scaled_area(hi)?;
        if a <= limit {
            best = Some((g, hi));
        } else {
            lo = hi;
            hi *= 2.0;
        }
    }
    let mut best = best.expect("bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (g, a) = scaled_area(mid)?;
        if a <= limit {
            hi = mid;
            best = (g, mid);
            if close(a) {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(best)
}

/// Evaluates `θ` within budget, otherwise `θ/β`.
pub fn energy_constrained_fitness<B: FitnessBackend + ?Sized>(
    genome: &Genome,
    constraint: &EnergyConstraint,
    decode: &DecodeContext,
    inner: &B,
) -> Result<(Evaluation, f64), BackendError> {
    let (scaled, beta) = renormalize(genome, constraint, decode)?;
    let mut eval = inner.evaluate(&scaled)?;
    eval.beta = Some(beta);
    Ok((eval, beta))
}

/// Backend adaptor applying an energy constraint before the inner backend.
pub struct EnergyConstrainedBackend<B> {
    pub inner: B,
    pub constraint: EnergyConstraint,
    pub decode: DecodeContext,
}

impl<B: FitnessBackend> FitnessBackend for EnergyConstrainedBackend<B> {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError> {
        energy_constrained_fitness(genome, &self.constraint, &self.decode, &self.inner).map(|(e, _)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse_codec::{Encoding, FREEFORM_POINTS};

    fn trace_from(t_start: f64, dt: f64, input: Vec<f64>, output: Vec<f64>) -> MemoryTrace {
        MemoryTrace {
            t_start,
            dt,
            input_intensity: input,
            output_intensity: output,
            final_spin_wave_norm: 0.0,
        }
    }

    fn rect(t_start: f64, n: usize, lo: f64, hi: f64, height: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = t_start + k as f64;
                if (lo..=hi).contains(&t) {
                    height
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn rectangles_give_exact_ratio() {
        let n = 401;
        let input = rect(-100.0, n, -10.0, 10.0, 1.0);
        let output = rect(-100.0, n, 195.0, 205.0, 0.25);
        let trace = trace_from(-100.0, 1.0, input, output);
        let eff = internal_efficiency(&trace, &ExperimentTiming::default()).unwrap();
        assert!((eff.eta_int - 0.25 * 11.0 / 21.0).abs() < 1e-15);

        let output = rect(-100.0, n, 190.0, 210.0, 0.25);
        let trace = trace_from(-100.0, 1.0, trace.input_intensity, output);
        let eff = internal_efficiency(&trace, &ExperimentTiming::default()).unwrap();
        assert!((eff.eta_int - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shifted_copy_has_unit_efficiency() {
        let n = 401;
        let pulse: Vec<f64> = (0..n).map(|k| (-((k as f64 - 100.0) / 12.0).powi(2)).exp()).collect();
        let mut output = vec![0.0; n];
        output[200..].copy_from_slice(&pulse[..201]);
        let trace = trace_from(-100.0, 1.0, pulse, output);
        let eff = internal_efficiency(&trace, &ExperimentTiming::default()).unwrap();
        assert!((eff.eta_int - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_output_and_dark_input() {
        let n = 401;
        let input = rect(-100.0, n, -10.0, 10.0, 1.0);
        let trace = trace_from(-100.0, 1.0, input, vec![0.0; n]);
        let timing = ExperimentTiming::default();
        assert_eq!(internal_efficiency(&trace, &timing).unwrap().eta_int, 0.0);
        assert_eq!(proxy_fitness(&trace, &timing, &InputTap::default()).unwrap(), 0.0);
        let dark = trace_from(-100.0, 1.0, vec![0.0; n], vec![0.0; n]);
        assert_eq!(internal_efficiency(&dark, &timing), Err(EfficiencyError::ZeroInput));
    }

    #[test]
    fn short_trace_is_a_coverage_error() {
        let trace = trace_from(-50.0, 1.0, vec![1.0; 100], vec![0.0; 100]);
        let err = internal_efficiency(&trace, &ExperimentTiming::default()).unwrap_err();
        assert!(matches!(err, EfficiencyError::Coverage { .. }));
    }

    #[test]
    fn half_tap_doubles_proxy() {
        let n = 401;
        let trace = trace_from(
            -100.0,
            1.0,
            rect(-100.0, n, -10.0, 10.0, 1.0),
            rect(-100.0, n, 190.0, 210.0, 0.25),
        );
        let timing = ExperimentTiming::default();
        let eta = internal_efficiency(&trace, &timing).unwrap().eta_int;
        let full = proxy_fitness(&trace, &timing, &InputTap::default()).unwrap();
        let half = proxy_fitness(&trace, &timing, &InputTap { fraction: 0.5 }).unwrap();
        assert_eq!(full, eta);
        assert!((half - 2.0 * eta).abs() < 1e-15);
    }

    #[test]
    fn window_integral_handles_off_grid_limits() {
        // f(t) = t on [0, 10]: integral over [2.5, 7.25] = (7.25² − 2.5²) / 2
        let values: Vec<f64> = (0..=10).map(f64::from).collect();
        let got = window_integral(0.0, 1.0, &values, 2.5, 7.25).unwrap();
        assert!((got - (7.25f64.powi(2) - 2.5f64.powi(2)) / 2.0).abs() < 1e-12);
        let inside = window_integral(0.0, 1.0, &values, 3.2, 3.7).unwrap();
        assert!((inside - 0.5 * 3.45).abs() < 1e-12);
    }

    #[test]
    fn within_budget_is_unchanged() {
        let decode = DecodeContext::new(Encoding::Freeform);
        let genome = Genome::new(vec![0.5; FREEFORM_POINTS]);
        let area = decode.area(&genome).unwrap();
        let constraint = EnergyConstraint::new(area / (0.5 * 0.8), 0.8).unwrap();
        let (g, beta) = renormalize(&genome, &constraint, &decode).unwrap();
        assert_eq!(beta, 1.0);
        assert_eq!(g, genome);
    }

    #[test]
    fn double_area_halves_every_point() {
        let decode = DecodeContext::new(Encoding::Freeform);
        let points: Vec<f64> = (0..FREEFORM_POINTS).map(|i| 0.2 + 0.04 * i as f64).collect();
        let genome = Genome::new(points.clone());
        let area = decode.area(&genome).unwrap();
        let constraint = EnergyConstraint::new(area / (2.0 * 0.6), 0.6).unwrap();
        let (g, beta) = renormalize(&genome, &constraint, &decode).unwrap();
        assert!((beta - 2.0).abs() < 1e-12);
        for (scaled, orig) in g.genes().iter().zip(&points) {
            assert!((scaled - orig / 2.0).abs() < 1e-12);
        }
        let scaled_area = decode.area(&g).unwrap();
        assert!((scaled_area - constraint.limit()).abs() <= 1e-6 * constraint.limit());
    }

    #[test]
    fn clipped_pulse_is_renormalized_by_bisection() {
        let decode = DecodeContext::new(Encoding::Freeform);
        let mut points = vec![0.0; FREEFORM_POINTS];
        points[6..10].fill(1.0);
        let genome = Genome::new(points);
        let area = decode.area(&genome).unwrap();
        let constraint = EnergyConstraint::new(area, 0.3).unwrap();
        let (g, beta) = renormalize(&genome, &constraint, &decode).unwrap();
        let got = decode.area(&g).unwrap();
        assert!(got <= constraint.limit());
        assert!((got - constraint.limit()).abs() <= 1e-6 * constraint.limit());
        assert!(beta > 1.0);
    }

    #[test]
    fn gaussian_scaling_moves_only_amplitude() {
        let decode = DecodeContext::new(Encoding::Gaussian);
        let genome = Genome::new(vec![1.0, 30.0, -20.0]);
        let area = decode.area(&genome).unwrap();
        let constraint = EnergyConstraint::new(area, 0.4).unwrap();
        let (g, _) = renormalize(&genome, &constraint, &decode).unwrap();
        assert_eq!(&g.genes()[1..], &[30.0, -20.0]);
        assert!((decode.area(&g).unwrap() - 0.4 * area).abs() <= 1e-9 * area);
    }
}
