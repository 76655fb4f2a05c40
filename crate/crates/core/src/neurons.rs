//! Fixed-step neuron dynamics.
//!
//! Both models advance by explicit forward Euler at a fixed `dt` (ms). The
//! LIF update order is current, voltage, spike test, reset, threshold; the RAF
//! updates its angular variable and voltage from the same previous state,
//! then tests and resets.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Result, SnnError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParams {
    pub tau_v_ms: f64,
    pub gamma_v: f64,
    pub v_rest: f64,
    /// Membrane resistance per unit of `tau_v_ms`; `R_v = tau_v_ms * r_v_prime`.
    pub r_v_prime: f64,
    /// Absolute membrane resistance, overriding `r_v_prime` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_v: Option<f64>,
    pub tau_j_ms: f64,
    pub gamma_j: f64,
    pub kappa: f64,
    pub v_reset: f64,
    pub theta_base: f64,
    pub tau_theta_ms: f64,
    pub kappa_theta: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_v_ms: 10.0,
            gamma_v: 1.0,
            v_rest: 0.0,
            r_v_prime: 1.0,
            r_v: None,
            tau_j_ms: 5.0,
            gamma_j: 1.0,
            kappa: 1.0,
            v_reset: 0.0,
            theta_base: 1.0,
            tau_theta_ms: 100.0,
            kappa_theta: 0.1,
        }
    }
}

impl LifParams {
    /// Effective membrane resistance `R_v`.
    pub fn resistance(&self) -> f64 {
        self.r_v
            .unwrap_or_else(|| scaled_resistance(self.tau_v_ms, self.r_v_prime))
    }

    /// Parameter findings for stepping at `dt_ms`.
    pub fn diagnostics(&self, dt_ms: f64) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, v) in [
            ("tau_v_ms", self.tau_v_ms),
            ("tau_j_ms", self.tau_j_ms),
            ("tau_theta_ms", self.tau_theta_ms),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(Diagnostic::error("non_positive_time_constant", name, format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("gamma_v", self.gamma_v),
            ("v_rest", self.v_rest),
            ("r_v_prime", self.r_v_prime),
            ("r_v", self.r_v.unwrap_or(0.0)),
            ("gamma_j", self.gamma_j),
            ("kappa", self.kappa),
            ("v_reset", self.v_reset),
            ("theta_base", self.theta_base),
            ("kappa_theta", self.kappa_theta),
        ] {
            if !v.is_finite() {
                out.push(Diagnostic::error("non_finite_parameter", name, format!("{name} must be finite")));
            }
        }
        if self.kappa_theta < 0.0 {
            out.push(Diagnostic::error(
                "negative_threshold_increment",
                "kappa_theta",
                "kappa_theta must be >= 0 so the homeostatic offset stays non-negative",
            ));
        }
        if !out.is_empty() {
            return out;
        }
        if dt_ms > self.tau_theta_ms {
            out.push(Diagnostic::error(
                "threshold_decay_overshoot",
                "tau_theta_ms",
                format!("dt {dt_ms} ms exceeds tau_theta_ms {}; the threshold offset would turn negative", self.tau_theta_ms),
            ));
        }
        if self.theta_base <= self.v_reset {
            out.push(Diagnostic::warning(
                "collapsed_dynamics",
                "theta_base",
                format!(
                    "theta_base {} <= v_reset {}: the neuron can fire on every step",
                    self.theta_base, self.v_reset
                ),
            ));
        }
        if self.gamma_v > 0.0 && dt_ms >= self.tau_v_ms / self.gamma_v {
            out.push(Diagnostic::warning(
                "collapsed_dynamics",
                "tau_v_ms",
                format!(
                    "dt {dt_ms} ms >= tau_v/gamma_v = {} ms: voltage decay overshoots rest",
                    self.tau_v_ms / self.gamma_v
                ),
            ));
        }
        if self.gamma_j > 0.0 && dt_ms >= self.tau_j_ms / self.gamma_j {
            out.push(Diagnostic::warning(
                "collapsed_dynamics",
                "tau_j_ms",
                format!(
                    "dt {dt_ms} ms >= tau_j/gamma_j = {} ms: current decay overshoots zero",
                    self.tau_j_ms / self.gamma_j
                ),
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifState {
    pub v: Vec<f64>,
    pub j: Vec<f64>,
    pub theta_hat: Vec<f64>,
}

impl LifState {
    /// `n` neurons at rest with no current and no threshold offset.
    pub fn at_rest(n: usize, p: &LifParams) -> Self {
        LifState {
            v: vec![p.v_rest; n],
            j: vec![0.0; n],
            theta_hat: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn threshold(&self, p: &LifParams, neuron: usize) -> f64 {
        p.theta_base + self.theta_hat[neuron]
    }
}

/// Advances every LIF neuron by one step of `dt_ms` under input current `i_in`.
pub fn lif_step(state: &mut LifState, p: &LifParams, i_in: &[f64], dt_ms: f64) -> Result<Vec<bool>> {
    check_step(state.len(), i_in, dt_ms)?;
    let r_v = p.resistance();
    let mut spikes = Vec::with_capacity(state.len());
    for k in 0..state.len() {
        let j = state.j[k] + dt_ms / p.tau_j_ms * (-p.gamma_j * state.j[k] + p.kappa * i_in[k]);
        let mut v = state.v[k] + dt_ms / p.tau_v_ms * (-p.gamma_v * (state.v[k] - p.v_rest) + r_v * j);
        let theta_hat = state.theta_hat[k];
        let fired = v > p.theta_base + theta_hat;
        if fired {
            v = p.v_reset;
        }
        let s = if fired { 1.0 } else { 0.0 };
        let theta_hat = theta_hat + dt_ms * (-theta_hat / p.tau_theta_ms + p.kappa_theta * s);
        if !(v.is_finite() && j.is_finite() && theta_hat.is_finite()) {
            return Err(SnnError::divergence(k));
        }
        state.j[k] = j;
        state.v[k] = v;
        state.theta_hat[k] = theta_hat;
        spikes.push(fired);
    }
    Ok(spikes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RafParams {
    /// Eigenfrequency in cycles per second.
    pub omega_hz: f64,
    /// Dampening factor; negative for decaying oscillation.
    pub b: f64,
    pub tau_v_ms: f64,
    pub tau_c_ms: f64,
    /// Input resistance scale.
    pub r: f64,
    pub v_thr: f64,
    pub v_reset: f64,
    pub c_reset: f64,
}

impl Default for RafParams {
    fn default() -> Self {
        RafParams {
            omega_hz: 40.0,
            b: -0.02,
            tau_v_ms: 1.0,
            tau_c_ms: 1.0,
            r: 1.0,
            v_thr: 1.0,
            v_reset: 0.0,
            c_reset: 0.0,
        }
    }
}

impl RafParams {
    /// Angular eigenfrequency in rad/ms.
    pub fn omega_rad_per_ms(&self) -> f64 {
        TAU * self.omega_hz / 1000.0
    }

    /// Eigenperiod `2π/ω` in ms.
    pub fn eigenperiod_ms(&self) -> f64 {
        TAU / self.omega_rad_per_ms()
    }

    pub fn diagnostics(&self, dt_ms: f64) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, v) in [("tau_v_ms", self.tau_v_ms), ("tau_c_ms", self.tau_c_ms)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(Diagnostic::error("non_positive_time_constant", name, format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("omega_hz", self.omega_hz),
            ("b", self.b),
            ("r", self.r),
            ("v_thr", self.v_thr),
            ("v_reset", self.v_reset),
            ("c_reset", self.c_reset),
        ] {
            if !v.is_finite() {
                out.push(Diagnostic::error("non_finite_parameter", name, format!("{name} must be finite")));
            }
        }
        if self.b >= 0.0 {
            out.push(Diagnostic::error(
                "undamped_oscillator",
                "b",
                format!("b must be < 0 for a damped oscillation, got {}", self.b),
            ));
        }
        if self.omega_hz == 0.0 {
            out.push(Diagnostic::error("zero_eigenfrequency", "omega_hz", "omega_hz must be non-zero"));
        }
        if !out.is_empty() {
            return out;
        }
        let radius = self.euler_spectral_radius(dt_ms);
        if radius >= 1.0 {
            out.push(Diagnostic::warning(
                "collapsed_dynamics",
                "b",
                format!("forward-Euler growth factor {radius:.4} >= 1 at dt {dt_ms} ms: subthreshold oscillation grows instead of decaying"),
            ));
        }
        if self.v_thr <= self.v_reset {
            out.push(Diagnostic::warning(
                "collapsed_dynamics",
                "v_thr",
                format!("v_thr {} <= v_reset {}", self.v_thr, self.v_reset),
            ));
        }
        out
    }

    /// Spectral radius of the linear per-step update on `(c, v)`.
    pub fn euler_spectral_radius(&self, dt_ms: f64) -> f64 {
        let w = self.omega_rad_per_ms();
        let a = 1.0 + dt_ms * self.b / self.tau_c_ms;
        let bb = -dt_ms * w / self.tau_c_ms;
        let c = dt_ms * w / self.tau_v_ms;
        let d = 1.0 + dt_ms * self.b / self.tau_v_ms;
        let trace = a + d;
        let det = a * d - bb * c;
        let disc = trace * trace / 4.0 - det;
        if disc >= 0.0 {
            (trace / 2.0).abs() + disc.sqrt()
        } else {
            det.sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RafState {
    pub v: Vec<f64>,
    pub c: Vec<f64>,
}

impl RafState {
    pub fn at_rest(n: usize) -> Self {
        RafState {
            v: vec![0.0; n],
            c: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Advances every RAF neuron by one step. The input is scaled to
/// `j = (tau_v/dt) * i_in`, so a single-step pulse of size `w` moves the
/// angular variable by `r * w * tau_v / tau_c` regardless of `dt`.
pub fn raf_step(state: &mut RafState, p: &RafParams, i_in: &[f64], dt_ms: f64) -> Result<Vec<bool>> {
    check_step(state.len(), i_in, dt_ms)?;
    let w = p.omega_rad_per_ms();
    let mut spikes = Vec::with_capacity(state.len());
    for k in 0..state.len() {
        let (v0, c0) = (state.v[k], state.c[k]);
        let j = p.tau_v_ms / dt_ms * i_in[k];
        let mut c = c0 + dt_ms / p.tau_c_ms * (c0 * p.b - v0 * w + p.r * j);
        let mut v = v0 + dt_ms / p.tau_v_ms * (w * c0 + v0 * p.b);
        let fired = v > p.v_thr;
        if fired {
            v = p.v_reset;
            c = p.c_reset;
        }
        if !(v.is_finite() && c.is_finite()) {
            return Err(SnnError::divergence(k));
        }
        state.v[k] = v;
        state.c[k] = c;
        spikes.push(fired);
    }
    Ok(spikes)
}

fn check_step(n: usize, i_in: &[f64], dt_ms: f64) -> Result<()> {
    if !(dt_ms.is_finite() && dt_ms > 0.0) {
        return Err(SnnError::InputDomain(format!("dt must be > 0, got {dt_ms}")));
    }
    if i_in.len() != n {
        return Err(SnnError::ShapeMismatch {
            expected: n,
            actual: i_in.len(),
        });
    }
    if let Some(k) = i_in.iter().position(|x| !x.is_finite()) {
        return Err(SnnError::InputDomain(format!("input current {k} is not finite")));
    }
    Ok(())
}

/// `γ/τ` (1/ms) that decays a value to `fraction` of itself after `dt_ms`.
pub fn decay_ratio_for_fraction(fraction: f64, dt_ms: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SnnError::InputDomain(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if !(dt_ms.is_finite() && dt_ms > 0.0) {
        return Err(SnnError::InputDomain(format!("dt must be > 0, got {dt_ms}")));
    }
    Ok(-fraction.ln() / dt_ms)
}

/// Exact solution of `tau * dphi/dt = -gamma * phi` from `(t0, phi0)`.
pub fn closed_form_decay(phi0: f64, t0_ms: f64, t_ms: f64, tau_ms: f64, gamma: f64) -> f64 {
    phi0 * (gamma * (t0_ms - t_ms) / tau_ms).exp()
}

/// Membrane resistance under the `R_v = tau_v * R_v'` convention.
pub fn scaled_resistance(tau_v_ms: f64, r_prime: f64) -> f64 {
    tau_v_ms * r_prime
}
