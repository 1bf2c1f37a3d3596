use serde::{Deserialize, Serialize};

use crate::pulse_codec::Waveform;

/// Modulator response and drive-to-Rabi-frequency mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstrumentModel {
    /// 10–90 % rise time of the first-order low-pass (ns). Zero disables it.
    pub rise_time: f64,
    /// Rabi frequency at filtered drive amplitude 1 (rad/ns).
    pub omega_max: f64,
}

impl Default for InstrumentModel {
    fn default() -> Self {
        Self {
            rise_time: 15.0,
            omega_max: super::DEFAULT_OMEGA_MAX,
        }
    }
}

impl InstrumentModel {
    /// Time constant of the low-pass, `rise_time / ln 9`.
    pub fn time_constant(&self) -> f64 {
        self.rise_time / 9f64.ln()
    }
}

/// Rabi frequency sampled on a uniform grid, zero outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEnvelope {
    t_start: f64,
    dt: f64,
    rabi: Vec<f64>,
}

impl ControlEnvelope {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + (self.rabi.len() - 1) as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.rabi
    }

    pub fn peak(&self) -> f64 {
        self.rabi.iter().cloned().fold(0.0, f64::max)
    }

    /// Linear interpolation between samples.
    pub fn at(&self, t: f64) -> f64 {
        let u = (t - self.t_start) / self.dt;
        let last = (self.rabi.len() - 1) as f64;
        if !(u >= 0.0 && u <= last) {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.rabi.len() - 2);
        let frac = u - i as f64;
        self.rabi[i] + frac * (self.rabi[i + 1] - self.rabi[i])
    }
}

/// Filters the electrical waveform with the modulator low-pass and maps the
/// result to a Rabi frequency `omega_max · √amplitude`.
///
/// The filter is integrated exactly for piecewise-linear input. When the
/// filter is active the envelope is extended by five time constants so the
/// falling flank decays instead of being cut at the window edge.
pub fn apply_instrument(wf: &Waveform, model: &InstrumentModel) -> ControlEnvelope {
    let dt = wf.dt();
    let tau = model.time_constant();
    let x = wf.samples();
    let filtered: Vec<f64> = if tau > 0.0 {
        // y' = (x - y) / tau with x linear between samples:
        // y[n+1] = x[n+1] - (x[n+1] - x[n]) * ramp + (y[n] - x[n]) * decay
        let pad = (5.0 * tau / dt).ceil() as usize;
        let decay = (-dt / tau).exp();
        let ramp = tau / dt * (1.0 - decay);
        let mut y = Vec::with_capacity(x.len() + pad);
        y.push(0.0);
        let mut prev = (x[0], 0.0);
        for &xn in x[1..].iter().chain(std::iter::repeat_n(&0.0, pad)) {
            let (x0, y0) = prev;
            let yn = (xn - (xn - x0) * ramp + (y0 - x0) * decay).max(0.0);
            y.push(yn);
            prev = (xn, yn);
        }
        y
    } else {
        x.to_vec()
    };
    ControlEnvelope {
        t_start: wf.t_start(),
        dt,
        rabi: filtered.iter().map(|&a| model.omega_max * a.max(0.0).sqrt()).collect(),
    }
}
