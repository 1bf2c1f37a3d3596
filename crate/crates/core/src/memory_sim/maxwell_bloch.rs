//! Method-of-lines integration of the Λ-system Maxwell–Bloch equations in
//! the co-moving frame, with the medium mapped to `z ∈ [0, 1]`:
//!
//! ```text
//! ∂z E = i √d P
//! ∂t P = −(γ + iΔ) P + i √d γ E + i Ω(t) S
//! ∂t S = −γs S + i Ω(t) P
//! ```
//!
//! `E(z, t)` is slaved to `P` by the spatial equation, integrated from the
//! cell entrance with the trapezoid rule at every stage; `P` and `S` are
//! advanced with classical fourth-order Runge–Kutta.

use num_complex::Complex64 as C64;

const I: C64 = C64::new(0.0, 1.0);

/// Coefficients of the right-hand side.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coefficients {
    pub polarization_decay: C64,
    pub drive: C64,
    pub spin_decay: f64,
    /// `i √d dz / 2`, the trapezoid weight of the field update.
    pub field_step: C64,
}

impl Coefficients {
    pub fn new(optical_depth: f64, gamma: f64, gamma_s: f64, detuning: f64, n_z: usize) -> Self {
        let sqrt_d = optical_depth.sqrt();
        let dz = 1.0 / (n_z - 1) as f64;
        Self {
            polarization_decay: C64::new(gamma, detuning),
            drive: I * sqrt_d * gamma,
            spin_decay: gamma_s,
            field_step: I * sqrt_d * dz * 0.5,
        }
    }
}

/// Polarisation and spin-wave profiles plus RK4 scratch space.
pub(crate) struct MediumState {
    pub p: Vec<C64>,
    pub s: Vec<C64>,
    field: Vec<C64>,
    stage_p: Vec<C64>,
    stage_s: Vec<C64>,
    kp: [Vec<C64>; 4],
    ks: [Vec<C64>; 4],
}

impl MediumState {
    pub fn new(n_z: usize) -> Self {
        let zeros = || vec![C64::new(0.0, 0.0); n_z];
        Self {
            p: zeros(),
            s: zeros(),
            field: zeros(),
            stage_p: zeros(),
            stage_s: zeros(),
            kp: [zeros(), zeros(), zeros(), zeros()],
            ks: [zeros(), zeros(), zeros(), zeros()],
        }
    }

    /// Field leaving the medium for the current polarisation.
    pub fn output_field(&self, coef: &Coefficients, e_in: f64) -> C64 {
        let mut e = C64::new(e_in, 0.0);
        for w in self.p.windows(2) {
            e += coef.field_step * (w[0] + w[1]);
        }
        e
    }

    /// `∫ |S|² dz` by the trapezoid rule.
    pub fn spin_wave_norm(&self) -> f64 {
        let n = self.s.len();
        let dz = 1.0 / (n - 1) as f64;
        let inner: f64 = self.s[1..n - 1].iter().map(|v| v.norm_sqr()).sum();
        dz * (inner + 0.5 * (self.s[0].norm_sqr() + self.s[n - 1].norm_sqr()))
    }

    /// Dark storage: spin wave decays, optical coherence is gone.
    pub fn store(&mut self, spin_decay: f64, duration: f64) {
        let factor = (-spin_decay * duration).exp();
        self.s.iter_mut().for_each(|v| *v *= factor);
        self.p.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    }

    /// One RK4 step of length `h`. Drive values are at `t`, `t + h/2`, `t + h`.
    pub fn step(&mut self, coef: &Coefficients, h: f64, e_in: [f64; 3], omega: [f64; 3]) {
        let stages = [(0usize, 0.0), (1, 0.5), (1, 0.5), (2, 1.0)];
        for (k, &(node, weight)) in stages.iter().enumerate() {
            if k == 0 {
                self.stage_p.copy_from_slice(&self.p);
                self.stage_s.copy_from_slice(&self.s);
            } else {
                let (prev_p, prev_s) = (&self.kp[k - 1], &self.ks[k - 1]);
                let hw = h * weight;
                for j in 0..self.p.len() {
                    self.stage_p[j] = self.p[j] + prev_p[j] * hw;
                    self.stage_s[j] = self.s[j] + prev_s[j] * hw;
                }
            }
            derivative(
                coef,
                e_in[node],
                omega[node],
                &self.stage_p,
                &self.stage_s,
                &mut self.field,
                &mut self.kp[k],
                &mut self.ks[k],
            );
        }
        let sixth = h / 6.0;
        for j in 0..self.p.len() {
            self.p[j] += (self.kp[0][j] + (self.kp[1][j] + self.kp[2][j]) * 2.0 + self.kp[3][j]) * sixth;
            self.s[j] += (self.ks[0][j] + (self.ks[1][j] + self.ks[2][j]) * 2.0 + self.ks[3][j]) * sixth;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.s).all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[allow(clippy::too_many_arguments)]
fn derivative(
    coef: &Coefficients,
    e_in: f64,
    omega: f64,
    p: &[C64],
    s: &[C64],
    field: &mut [C64],
    dp: &mut [C64],
    ds: &mut [C64],
) {
    field[0] = C64::new(e_in, 0.0);
    for j in 1..p.len() {
        field[j] = field[j - 1] + coef.field_step * (p[j - 1] + p[j]);
    }
    let i_omega = I * omega;
    for j in 0..p.len() {
        dp[j] = -coef.polarization_decay * p[j] + coef.drive * field[j] + i_omega * s[j];
        ds[j] = -coef.spin_decay * s[j] + i_omega * p[j];
    }
}
