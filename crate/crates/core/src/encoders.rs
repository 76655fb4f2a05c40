//! Real-valued input to spike-train conversion.
//!
//! Four schemes are provided: per-step Bernoulli coin flips, the rate-scaled
//! Poisson-process variant, rotating phasors, and RC-circuit latency coding.
//! Inputs are normalized intensities in `[0, 1]` except for latency coding,
//! which treats them as injected currents.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::spike_train::SpikeTrain;

/// Expected events per integration step for a rate given in events/second and
/// a step given in milliseconds.
pub fn events_per_step(rate_hz: f64, dt_ms: f64) -> Result<f64> {
    if !rate_hz.is_finite() || rate_hz < 0.0 {
        return Err(SnnError::InputDomain(format!(
            "event frequency must be finite and >= 0, got {rate_hz}"
        )));
    }
    if !dt_ms.is_finite() || dt_ms <= 0.0 {
        return Err(SnnError::InputDomain(format!(
            "dt must be finite and > 0, got {dt_ms}"
        )));
    }
    Ok(rate_hz * dt_ms / 1000.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderTiming {
    pub rate_hz: f64,
    pub dt_ms: f64,
    events_per_step: f64,
}

impl EncoderTiming {
    pub fn new(rate_hz: f64, dt_ms: f64) -> Result<Self> {
        Ok(EncoderTiming {
            rate_hz,
            dt_ms,
            events_per_step: events_per_step(rate_hz, dt_ms)?,
        })
    }

    pub fn events_per_step(&self) -> f64 {
        self.events_per_step
    }

    /// True when some intensity in `[0, 1]` would need a probability above one.
    pub fn clamps(&self) -> bool {
        self.events_per_step > 1.0
    }
}

fn check_intensities(x: &[f64]) -> Result<()> {
    match x
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        Some((i, v)) => Err(SnnError::InputDomain(format!(
            "intensity {i} must lie in [0, 1], got {v}"
        ))),
        None => Ok(()),
    }
}

fn coin_flips<R: Rng + ?Sized>(probs: impl Iterator<Item = f64>, rng: &mut R) -> Vec<bool> {
    // One uniform draw per neuron keeps stream consumption independent of the
    // probabilities, so p = 0 and p = 1 never desynchronize later draws.
    probs.map(|p| rng.random::<f64>() < p).collect()
}

/// One step of Bernoulli encoding: neuron `i` fires with probability `x[i]`.
pub fn bernoulli_step<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    check_intensities(x)?;
    Ok(coin_flips(x.iter().copied(), rng))
}

/// One step of Poisson-process encoding: probability `x[i]` scaled by the
/// expected events per step, clamped to `[0, 1]`.
pub fn poisson_step<R: Rng + ?Sized>(
    x: &[f64],
    timing: &EncoderTiming,
    rng: &mut R,
) -> Result<Vec<bool>> {
    check_intensities(x)?;
    let f_hat = timing.events_per_step();
    Ok(coin_flips(x.iter().map(|v| (v * f_hat).clamp(0.0, 1.0)), rng))
}

/// Population of rotating phasors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasorState {
    /// Phase per neuron, radians in `[0, 2π)`.
    pub theta: Vec<f64>,
    /// Sampled firing rate per neuron (Hz).
    pub rate_hz: Vec<f64>,
    /// Angular velocity per neuron (radians/step).
    pub velocity: Vec<f64>,
    /// Standard deviation of the multiplicative velocity jitter.
    pub sigma: f64,
}

/// Samples each phasor's rate from `Poisson(rate_hz)` and converts it to an
/// angular velocity. Initial phases are uniform on `[0, 2π)`.
pub fn phasor_init<R: Rng + ?Sized>(
    timing: &EncoderTiming,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<PhasorState> {
    phasor_init_scaled(timing, &vec![1.0; n], sigma, rng)
}

/// As [`phasor_init`], with neuron `i` sampling from `Poisson(x[i] · rate_hz)`.
pub fn phasor_init_scaled<R: Rng + ?Sized>(
    timing: &EncoderTiming,
    x: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<PhasorState> {
    if x.is_empty() {
        return Err(SnnError::EmptyPopulation);
    }
    check_intensities(x)?;
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(SnnError::InputDomain(format!(
            "phasor jitter must be finite and >= 0, got {sigma}"
        )));
    }
    let mut rate_hz = Vec::with_capacity(x.len());
    for &xi in x {
        let lambda = xi * timing.rate_hz;
        let f = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| SnnError::InputDomain(format!("poisson rate {lambda}: {e}")))?
                .sample(rng)
        } else {
            0.0
        };
        rate_hz.push(f);
    }
    let velocity = rate_hz
        .iter()
        .map(|f| PI * timing.dt_ms / 500.0 * f)
        .collect();
    let theta = (0..x.len()).map(|_| rng.random::<f64>() * TAU).collect();
    Ok(PhasorState {
        theta,
        rate_hz,
        velocity,
        sigma,
    })
}

/// Advances every phasor by its jittered velocity and fires on each full turn.
pub fn phasor_step<R: Rng + ?Sized>(state: &mut PhasorState, rng: &mut R) -> Vec<bool> {
    let jitter = (state.sigma > 0.0).then(|| Normal::new(1.0, state.sigma).expect("sigma >= 0"));
    let mut spikes = Vec::with_capacity(state.theta.len());
    for (theta, v) in state.theta.iter_mut().zip(&state.velocity) {
        let eta = match &jitter {
            Some(normal) => normal.sample(rng).clamp(0.0, 2.0),
            None => 1.0,
        };
        *theta += v * eta;
        let fired = *theta >= TAU;
        if fired {
            *theta -= TAU;
            // A velocity above 2π per step can leave several turns behind.
            *theta = theta.rem_euclid(TAU);
        }
        spikes.push(fired);
    }
    spikes
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Sub-threshold inputs spike on the window's final step.
    #[default]
    LastStep,
    /// Sub-threshold inputs never spike.
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyParams {
    /// RC time constant τ_in (ms).
    pub tau_in_ms: f64,
    /// Input resistance scale.
    #[serde(default = "one")]
    pub resistance: f64,
    pub v_thr: f64,
    /// Stimulus window T (ms).
    pub window_ms: f64,
    #[serde(default)]
    pub clip_mode: ClipMode,
}

fn one() -> f64 {
    1.0
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SnnError::InputDomain(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("tau_in_ms", self.tau_in_ms)?;
        positive("resistance", self.resistance)?;
        positive("v_thr", self.v_thr)?;
        positive("window_ms", self.window_ms)
    }

    /// Number of integration steps in the window; errors unless `window/dt`
    /// is integral.
    pub fn window_steps(&self, dt_ms: f64) -> Result<usize> {
        integral_steps(self.window_ms, dt_ms)
            .ok_or_else(|| SnnError::Configuration(format!(
                "latency window {} ms is not a whole number of {} ms steps",
                self.window_ms, dt_ms
            )))
    }
}

pub(crate) fn integral_steps(span_ms: f64, dt_ms: f64) -> Option<usize> {
    if !(dt_ms > 0.0 && span_ms >= 0.0 && span_ms.is_finite()) {
        return None;
    }
    let n = (span_ms / dt_ms).round();
    ((n * dt_ms - span_ms).abs() <= 1e-9 * span_ms.max(dt_ms)).then_some(n as usize)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatencyTime {
    At(f64),
    Clipped,
}

/// Time (ms) at which the RC circuit driven by `i_in` crosses threshold.
pub fn latency_spike_time(i_in: f64, p: &LatencyParams) -> Result<LatencyTime> {
    if !i_in.is_finite() || i_in < 0.0 {
        return Err(SnnError::InputDomain(format!(
            "latency input must be finite and >= 0, got {i_in}"
        )));
    }
    let drive = i_in * p.resistance;
    if drive > p.v_thr {
        Ok(LatencyTime::At(p.tau_in_ms * (drive / (drive - p.v_thr)).ln()))
    } else {
        Ok(LatencyTime::Clipped)
    }
}

/// Encodes each input as a single spike within one window of `window/dt`
/// steps, at the nearest step to its crossing time. Crossings that round past
/// the window are treated as clipped.
pub fn latency_encode(x: &[f64], p: &LatencyParams, dt_ms: f64) -> Result<SpikeTrain> {
    p.validate()?;
    let steps = p.window_steps(dt_ms)?;
    let mut train = SpikeTrain::zeros(steps, x.len());
    if steps == 0 {
        return Ok(train);
    }
    for (neuron, &i_in) in x.iter().enumerate() {
        let index = match latency_spike_time(i_in, p)? {
            LatencyTime::At(t) => Some((t / dt_ms).round() as usize).filter(|&k| k < steps),
            LatencyTime::Clipped => None,
        };
        let index = index.or(match p.clip_mode {
            ClipMode::LastStep => Some(steps - 1),
            ClipMode::Drop => None,
        });
        if let Some(k) = index {
            train.set(k, neuron, true);
        }
    }
    Ok(train)
}

/// Runtime encoder owned by an engine population.
#[derive(Clone, Debug)]
pub enum EncoderUnit {
    Bernoulli { inputs: Vec<f64> },
    Poisson { inputs: Vec<f64>, timing: EncoderTiming },
    Phasor(PhasorState),
    /// Precomputed window replayed every `train.steps()` steps.
    Latency { train: SpikeTrain },
}

impl EncoderUnit {
    pub fn size(&self) -> usize {
        match self {
            EncoderUnit::Bernoulli { inputs } | EncoderUnit::Poisson { inputs, .. } => inputs.len(),
            EncoderUnit::Phasor(s) => s.theta.len(),
            EncoderUnit::Latency { train } => train.neurons(),
        }
    }

    pub fn emit<R: Rng + ?Sized>(&mut self, step: u64, rng: &mut R) -> Result<Vec<bool>> {
        match self {
            EncoderUnit::Bernoulli { inputs } => bernoulli_step(inputs, rng),
            EncoderUnit::Poisson { inputs, timing } => poisson_step(inputs, timing, rng),
            EncoderUnit::Phasor(state) => Ok(phasor_step(state, rng)),
            EncoderUnit::Latency { train } => {
                if train.steps() == 0 {
                    return Ok(vec![false; train.neurons()]);
                }
                let k = (step % train.steps() as u64) as usize;
                Ok(train.row(k).to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn latency(tau: f64, thr: f64, window: f64, clip_mode: ClipMode) -> LatencyParams {
        LatencyParams {
            tau_in_ms: tau,
            resistance: 1.0,
            v_thr: thr,
            window_ms: window,
            clip_mode,
        }
    }

    #[test]
    fn events_per_step_examples() {
        assert_eq!(events_per_step(100.0, 1.0).unwrap(), 0.1);
        assert_eq!(events_per_step(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(events_per_step(50.0, 2.0).unwrap(), 0.1);
    }

    #[test]
    fn events_per_step_rejects_bad_inputs() {
        assert!(events_per_step(-1.0, 1.0).is_err());
        assert!(events_per_step(f64::NAN, 1.0).is_err());
        assert!(events_per_step(10.0, 0.0).is_err());
        assert!(events_per_step(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn bernoulli_degenerate_probabilities() {
        let mut rng = SimRng::from_seed(1);
        for _ in 0..1000 {
            assert_eq!(bernoulli_step(&[0.0, 0.0, 0.0], &mut rng).unwrap(), vec![false; 3]);
            assert_eq!(bernoulli_step(&[1.0, 1.0], &mut rng).unwrap(), vec![true; 2]);
        }
    }

    #[test]
    fn bernoulli_rejects_out_of_range() {
        let mut rng = SimRng::from_seed(1);
        assert!(matches!(
            bernoulli_step(&[0.5, 1.5], &mut rng),
            Err(SnnError::InputDomain(_))
        ));
        assert!(bernoulli_step(&[-0.1], &mut rng).is_err());
        assert!(poisson_step(&[f64::NAN], &EncoderTiming::new(10.0, 1.0).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn bernoulli_half_mean() {
        // 10^6 fair flips: sd of the mean is 5e-4, so ±0.002 is a 4σ band
        // (two-sided miss probability ~6e-5).
        let mut rng = SimRng::from_seed(11);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| bernoulli_step(&[0.5], &mut rng).unwrap()[0])
            .count();
        let mean = hits as f64 / n as f64;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn poisson_step_zero_input_never_fires() {
        let timing = EncoderTiming::new(1000.0, 1.0).unwrap();
        let mut rng = SimRng::from_seed(3);
        for _ in 0..1000 {
            assert_eq!(poisson_step(&[0.0], &timing, &mut rng).unwrap(), vec![false]);
        }
    }

    #[test]
    fn poisson_step_clamps_probability() {
        let timing = EncoderTiming::new(2000.0, 1.0).unwrap();
        assert!(timing.clamps());
        let mut rng = SimRng::from_seed(3);
        for _ in 0..100 {
            assert_eq!(poisson_step(&[1.0], &timing, &mut rng).unwrap(), vec![true]);
        }
    }

    #[test]
    fn phasor_velocity_matches_rate() {
        let timing = EncoderTiming::new(10.0, 1.0).unwrap();
        let mut rng = SimRng::from_seed(5);
        let s = phasor_init(&timing, 50, 0.1, &mut rng).unwrap();
        for (v, f) in s.velocity.iter().zip(&s.rate_hz) {
            assert_eq!(*v, PI / 500.0 * f);
        }
        assert!(s.theta.iter().all(|t| (0.0..TAU).contains(t)));
    }

    #[test]
    fn phasor_zero_rate_is_silent() {
        let timing = EncoderTiming::new(0.0, 1.0).unwrap();
        let mut rng = SimRng::from_seed(5);
        let mut s = phasor_init(&timing, 8, 0.1, &mut rng).unwrap();
        assert!(s.rate_hz.iter().all(|f| *f == 0.0));
        for _ in 0..1000 {
            assert!(phasor_step(&mut s, &mut rng).iter().all(|b| !b));
        }
    }

    #[test]
    fn phasor_empty_population_rejected() {
        let timing = EncoderTiming::new(10.0, 1.0).unwrap();
        let mut rng = SimRng::from_seed(5);
        assert!(matches!(
            phasor_init(&timing, 0, 0.1, &mut rng),
            Err(SnnError::EmptyPopulation)
        ));
    }

    #[test]
    fn phasor_quarter_turn_fires_every_fourth_step() {
        let mut s = PhasorState {
            theta: vec![0.0],
            rate_hz: vec![0.0],
            velocity: vec![PI / 2.0],
            sigma: 0.0,
        };
        let mut rng = SimRng::from_seed(0);
        let times: Vec<usize> = (0..40).filter(|_| phasor_step(&mut s, &mut rng)[0]).collect();
        assert_eq!(times.len(), 10);
        assert!(times.windows(2).all(|w| w[1] - w[0] == 4), "{times:?}");
    }

    #[test]
    fn phasor_zero_velocity_never_fires() {
        let mut s = PhasorState {
            theta: vec![1.0],
            rate_hz: vec![0.0],
            velocity: vec![0.0],
            sigma: 0.3,
        };
        let mut rng = SimRng::from_seed(0);
        assert!((0..1000).all(|_| !phasor_step(&mut s, &mut rng)[0]));
    }

    #[test]
    fn latency_examples() {
        let p = latency(1.0, 1.0, 10.0, ClipMode::LastStep);
        match latency_spike_time(2.0, &p).unwrap() {
            LatencyTime::At(t) => assert!((t - std::f64::consts::LN_2).abs() < 1e-12),
            LatencyTime::Clipped => panic!("should fire"),
        }
        assert_eq!(latency_spike_time(0.5, &p).unwrap(), LatencyTime::Clipped);
        // Exactly at threshold the crossing time is infinite.
        assert_eq!(latency_spike_time(1.0, &p).unwrap(), LatencyTime::Clipped);
        assert!(latency_spike_time(f64::NAN, &p).is_err());
    }

    #[test]
    fn latency_times_decrease_with_intensity() {
        let p = latency(1.0, 0.05, 10.0, ClipMode::LastStep);
        let times: Vec<f64> = (1..=10)
            .map(|k| match latency_spike_time(k as f64 / 10.0, &p).unwrap() {
                LatencyTime::At(t) => t,
                LatencyTime::Clipped => panic!("clipped"),
            })
            .collect();
        assert!(times.windows(2).all(|w| w[1] < w[0]), "{times:?}");
    }

    #[test]
    fn latency_encode_rounds_to_nearest_step() {
        let p = latency(1.0, 1.0, 5.0, ClipMode::Drop);
        let train = latency_encode(&[2.0], &p, 1.0).unwrap();
        assert_eq!(train.first_spike(0), Some(1));
        assert_eq!(train.count(), 1);
    }

    #[test]
    fn latency_encode_clip_modes() {
        let drop = latency(1.0, 1.0, 5.0, ClipMode::Drop);
        assert_eq!(latency_encode(&[0.1, 0.5, 0.9], &drop, 1.0).unwrap().count(), 0);
        let last = latency(1.0, 1.0, 5.0, ClipMode::LastStep);
        let train = latency_encode(&[0.1, 0.5], &last, 1.0).unwrap();
        assert_eq!(train.first_spike(0), Some(4));
        assert_eq!(train.first_spike(1), Some(4));
    }

    #[test]
    fn latency_encode_rejects_fractional_window() {
        let p = latency(1.0, 1.0, 5.5, ClipMode::Drop);
        assert!(matches!(
            latency_encode(&[2.0], &p, 1.0),
            Err(SnnError::Configuration(_))
        ));
    }

    #[test]
    fn latency_staircase() {
        let p = latency(50.0, 0.05, 50.0, ClipMode::LastStep);
        let x: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let train = latency_encode(&x, &p, 0.1).unwrap();
        assert_eq!(train.column_counts(), vec![1; 10]);
        let firsts: Vec<usize> = (0..10).map(|n| train.first_spike(n).unwrap()).collect();
        assert!(firsts.windows(2).all(|w| w[1] < w[0]), "{firsts:?}");
    }
}
