//! Storage-and-retrieval simulator used as the default fitness backend.
//!
//! One experiment runs three phases on a uniform time grid covering
//! `[−Δt/2, 3Δt/2]`:
//!
//! 1. **write**: the signal pulse (centred at `t = 0`) enters the medium
//!    together with the write control pulse; whatever is not mapped onto the
//!    spin wave leaves as leakage;
//! 2. **dark storage**: no fields, the spin wave decays at `γs`;
//! 3. **read**: a Gaussian read control pulse centred at `t = Δt` converts
//!    the spin wave back into an output field.
//!
//! Rates are in rad/ns and times in ns. The atoms start in the ground state,
//! so nothing happens before the signal arrives; integration starts 3.5 signal
//! FWHM before the signal centre and the output there equals the input. When
//! the write and read phases are separated by a dark interval it is applied
//! in closed form.

mod instrument;
mod maxwell_bloch;

use std::f64::consts::{LN_2, PI};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{proxy_fitness, BackendError, Evaluation, FitnessBackend, InputTap};
use crate::pulse_codec::{decode_gaussian, CodecError, DecodeContext, GaussianGenome, Genome, TimeWindow, Waveform};

pub use instrument::{apply_instrument, ControlEnvelope, InstrumentModel};
use maxwell_bloch::{Coefficients, MediumState};

/// Peak Rabi frequency (rad/ns) at full drive.
///
/// Chosen as the value that maximises the efficiency of the reference write
/// pulse (`a = 1`, `f = 40 ns`, `d = −10 ns`) for an 18 ns signal at optical
/// depth 10 with the other defaults; see `calibrate_omega_max`.
pub const DEFAULT_OMEGA_MAX: f64 = 1.0;

/// Largest `dt · ρ` accepted, where ρ bounds the spectral radius of the
/// right-hand side. Classical RK4 is stable up to about 2.78 on the real
/// axis and 2.83 on the imaginary axis.
pub const STABILITY_LIMIT: f64 = 2.5;

/// Signal leading edge where integration starts, in signal FWHM.
const SIGNAL_SUPPORT: f64 = 3.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(
        "integrator unstable: dt_int·(γ + |Δ| + d·γ + Ω_peak + γs) = {value:.3} exceeds {limit} \
         (dt_int = {dt}, Ω_peak = {omega_peak:.3}); reduce dt_int"
    )]
    Unstable {
        value: f64,
        limit: f64,
        dt: f64,
        omega_peak: f64,
    },
    #[error("non-finite values in the medium state at t = {0} ns")]
    NonFinite(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Medium and integrator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Dimensionless optical depth `d`; resonant intensity transmission
    /// without control is `exp(−2d)`.
    pub optical_depth: f64,
    /// Excited-state coherence decay rate γ (1/ns).
    pub gamma: f64,
    /// Spin-wave amplitude decay rate γs (1/ns).
    pub gamma_s: f64,
    /// One-photon detuning Δ (rad/ns).
    pub detuning: f64,
    /// Spatial grid points.
    pub n_z: usize,
    /// Integrator step (ns).
    pub dt_int: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            optical_depth: 10.0,
            gamma: 0.5,
            // spin-wave energy after 200 ns is 1/1.3 of its initial value
            gamma_s: 1.3f64.ln() / 400.0,
            detuning: 2.0 * PI,
            n_z: 64,
            dt_int: 0.05,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let check = |name, value: f64, ok: bool, reason| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(SimError::InvalidParameter { name, value, reason })
            }
        };
        check("optical_depth", self.optical_depth, self.optical_depth > 0.0, "must be positive")?;
        check("gamma", self.gamma, self.gamma >= 0.0, "must be non-negative")?;
        check("gamma_s", self.gamma_s, self.gamma_s >= 0.0, "must be non-negative")?;
        check("detuning", self.detuning, true, "must be finite")?;
        check("n_z", self.n_z as f64, self.n_z >= 2, "needs at least two points")?;
        check("dt_int", self.dt_int, self.dt_int > 0.0, "must be positive")
    }
}

/// Timing of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentTiming {
    /// Time between signal centre and read-pulse centre, Δt (ns).
    pub storage_time: f64,
    /// Intensity FWHM of the Gaussian read drive (ns).
    pub read_fwhm: f64,
}

impl Default for ExperimentTiming {
    fn default() -> Self {
        Self {
            storage_time: 200.0,
            read_fwhm: 40.0,
        }
    }
}

impl ExperimentTiming {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.storage_time > 0.0 && self.storage_time.is_finite()) {
            return Err(SimError::InvalidParameter {
                name: "storage_time",
                value: self.storage_time,
                reason: "must be positive",
            });
        }
        if !(self.read_fwhm > 0.0 && self.read_fwhm.is_finite()) {
            return Err(SimError::InvalidParameter {
                name: "read_fwhm",
                value: self.read_fwhm,
                reason: "must be positive",
            });
        }
        Ok(())
    }

    pub fn trace_start(&self) -> f64 {
        -0.5 * self.storage_time
    }

    pub fn trace_end(&self) -> f64 {
        1.5 * self.storage_time
    }

    /// Interval over which the input energy is integrated.
    pub fn input_window(&self) -> (f64, f64) {
        (-0.5 * self.storage_time, 0.5 * self.storage_time)
    }

    /// Interval over which the retrieved energy is integrated.
    pub fn output_window(&self) -> (f64, f64) {
        (0.5 * self.storage_time, 1.5 * self.storage_time)
    }

    /// Electrical read waveform, full drive, spanning ±3 FWHM about Δt.
    pub fn read_waveform(&self, dt: f64) -> Result<Waveform, CodecError> {
        let half = 3.0 * self.read_fwhm;
        let pulse = GaussianGenome {
            amplitude: 1.0,
            fwhm: self.read_fwhm,
            delay: self.storage_time,
        };
        decode_gaussian(
            &pulse,
            &TimeWindow::new(self.storage_time - half, self.storage_time + half)?,
            dt,
        )
    }
}

/// Gaussian signal pulse centred at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    /// Intensity FWHM (ns).
    pub fwhm: f64,
    /// Peak field amplitude.
    pub amplitude: f64,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            fwhm: 18.0,
            amplitude: 1.0,
        }
    }
}

impl SignalSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(SimError::InvalidParameter {
                name: "signal.fwhm",
                value: self.fwhm,
                reason: "must be positive",
            });
        }
        if !self.amplitude.is_finite() {
            return Err(SimError::InvalidParameter {
                name: "signal.amplitude",
                value: self.amplitude,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// Field envelope of the signal; the field FWHM is `√2` times the intensity FWHM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPulse {
    amplitude: f64,
    rate: f64,
}

impl SignalPulse {
    pub fn field(&self, t: f64) -> f64 {
        self.amplitude * (-self.rate * t * t).exp()
    }

    pub fn intensity(&self, t: f64) -> f64 {
        let e = self.field(t);
        e * e
    }
}

/// Signal envelope `A · exp(−2 ln2 t² / fwhm²)`, centred at the signal time
/// origin. The timing is accepted for symmetry with the other builders; the
/// signal always sits at `t = 0`.
pub fn make_signal(spec: &SignalSpec, _timing: &ExperimentTiming) -> SignalPulse {
    SignalPulse {
        amplitude: spec.amplitude,
        rate: 2.0 * LN_2 / (spec.fwhm * spec.fwhm),
    }
}

/// Input and output intensities of one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTrace {
    pub t_start: f64,
    pub dt: f64,
    /// `|E_in|²` of the lossless reference signal.
    pub input_intensity: Vec<f64>,
    /// `|E_out|²` at the cell exit (leakage and retrieval).
    pub output_intensity: Vec<f64>,
    /// `∫|S|² dz` at the end of the trace.
    pub final_spin_wave_norm: f64,
}

impl MemoryTrace {
    pub fn len(&self) -> usize {
        self.input_intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_intensity.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t_start + index as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    /// Writes `time,input_intensity,output_intensity` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,input_intensity,output_intensity")?;
        for (k, (i, o)) in self.input_intensity.iter().zip(&self.output_intensity).enumerate() {
            writeln!(out, "{},{},{}", self.time(k), i, o)?;
        }
        Ok(())
    }
}

/// Runs one write / store / read experiment.
pub fn simulate_experiment(
    write: &Waveform,
    signal: &SignalSpec,
    timing: &ExperimentTiming,
    params: &SimParams,
    instrument: &InstrumentModel,
) -> Result<MemoryTrace, SimError> {
    params.validate()?;
    timing.validate()?;
    signal.validate()?;
    if !(instrument.rise_time >= 0.0 && instrument.omega_max >= 0.0 && instrument.omega_max.is_finite()) {
        return Err(SimError::InvalidParameter {
            name: "instrument",
            value: instrument.rise_time.min(instrument.omega_max),
            reason: "rise time and omega_max must be non-negative",
        });
    }

    let write_ctrl = apply_instrument(write, instrument);
    let read_ctrl = apply_instrument(&timing.read_waveform(write.dt())?, instrument);
    let omega_peak = write_ctrl.peak().max(read_ctrl.peak());

    let dt = params.dt_int;
    let rho = params.gamma
        + params.detuning.abs()
        + params.optical_depth * params.gamma
        + omega_peak
        + params.gamma_s;
    if dt * rho > STABILITY_LIMIT {
        return Err(SimError::Unstable {
            value: dt * rho,
            limit: STABILITY_LIMIT,
            dt,
            omega_peak,
        });
    }

    let pulse = make_signal(signal, timing);
    let t0 = timing.trace_start();
    let steps = ((timing.trace_end() - t0) / dt - 1e-9).ceil() as usize;
    let n = steps + 1;
    let time = |k: usize| t0 + k as f64 * dt;
    let index_floor = |t: f64| (((t - t0) / dt).floor().max(0.0) as usize).min(steps);
    let index_ceil = |t: f64| (((t - t0) / dt).ceil().max(0.0) as usize).min(steps);

    let input: Vec<f64> = (0..n).map(|k| pulse.intensity(time(k))).collect();
    let mut output = input.clone();

    let onset = index_floor(-SIGNAL_SUPPORT * signal.fwhm);
    let write_end = {
        let tail = if params.gamma > 0.0 { 10.0 / params.gamma } else { f64::INFINITY };
        index_ceil(write_ctrl.t_end().max(SIGNAL_SUPPORT * signal.fwhm) + tail)
    };
    let read_start = index_floor(timing.storage_time - 3.0 * timing.read_fwhm);
    let gap = (write_end < read_start).then_some((write_end, read_start));

    let coef = Coefficients::new(
        params.optical_depth,
        params.gamma,
        params.gamma_s,
        params.detuning,
        params.n_z,
    );
    let mut medium = MediumState::new(params.n_z);
    let drive = |t: f64| write_ctrl.at(t) + read_ctrl.at(t);

    let mut k = onset;
    loop {
        let t = time(k);
        output[k] = medium.output_field(&coef, pulse.field(t)).norm_sqr();
        if k == steps {
            break;
        }
        if let Some((from, to)) = gap.filter(|&(from, _)| from == k) {
            medium.store(params.gamma_s, (to - from) as f64 * dt);
            output[from + 1..to].iter_mut().for_each(|v| *v = 0.0);
            k = to;
            continue;
        }
        let mid = t + 0.5 * dt;
        let next = time(k + 1);
        medium.step(
            &coef,
            dt,
            [pulse.field(t), pulse.field(mid), pulse.field(next)],
            [drive(t), drive(mid), drive(next)],
        );
        if k % 256 == 0 && !medium.is_finite() {
            return Err(SimError::NonFinite(next));
        }
        k += 1;
    }
    if !medium.is_finite() || output.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFinite(time(steps)));
    }

    Ok(MemoryTrace {
        t_start: t0,
        dt,
        input_intensity: input,
        output_intensity: output,
        final_spin_wave_norm: medium.spin_wave_norm(),
    })
}

/// Simulator-backed fitness: decode, simulate, score with the proxy fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBackend {
    pub decode: DecodeContext,
    pub signal: SignalSpec,
    pub timing: ExperimentTiming,
    pub params: SimParams,
    pub instrument: InstrumentModel,
    pub tap: InputTap,
}

impl SimBackend {
    /// Default physics for the given decode context.
    pub fn new(decode: DecodeContext) -> Self {
        Self {
            decode,
            signal: SignalSpec::default(),
            timing: ExperimentTiming::default(),
            params: SimParams::default(),
            instrument: InstrumentModel::default(),
            tap: InputTap::default(),
        }
    }

    pub fn simulate_waveform(&self, write: &Waveform) -> Result<MemoryTrace, SimError> {
        simulate_experiment(write, &self.signal, &self.timing, &self.params, &self.instrument)
    }

    pub fn simulate(&self, genome: &Genome) -> Result<MemoryTrace, BackendError> {
        let write = self.decode.decode(genome)?;
        Ok(self.simulate_waveform(&write)?)
    }

    /// One experiment per genome; results keep the input order.
    pub fn evaluate_batch(&self, genomes: &[Genome]) -> Vec<Result<(MemoryTrace, f64), BackendError>> {
        FitnessBackend::evaluate_batch(self, genomes)
            .into_iter()
            .map(|r| {
                r.map(|e| {
                    let fitness = e.fitness;
                    (e.trace.expect("simulator always returns a trace"), fitness)
                })
            })
            .collect()
    }
}

impl FitnessBackend for SimBackend {
    fn evaluate(&self, genome: &Genome) -> Result<Evaluation, BackendError> {
        let trace = self.simulate(genome)?;
        let fitness = proxy_fitness(&trace, &self.timing, &self.tap)?;
        Ok(Evaluation {
            fitness,
            beta: None,
            trace: Some(trace),
        })
    }
}
