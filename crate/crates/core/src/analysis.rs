//! Spike statistics over recordings: rates, ISI, Fano factor, Poisson
//! conformance, winner-take-all concentration, and activity damping.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::engine::{Raster, Recording};
use crate::error::{Result, SnnError};

pub const DEFAULT_WINDOW_MS: f64 = 1000.0;
/// Minimum number of windows accepted by [`poisson_conformance`].
pub const MIN_CONFORMANCE_WINDOWS: usize = 100;
/// Expected count below which Poisson bins are pooled.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeStatistics {
    pub population: String,
    pub window_ms: f64,
    pub events: usize,
    pub rate_hz: Vec<f64>,
    /// Absent for neurons with fewer than two spikes.
    pub isi_mean_ms: Vec<Option<f64>>,
    pub isi_cv: Vec<Option<f64>>,
    /// Variance over mean of population event counts in whole windows.
    pub fano: f64,
    /// Set when fewer than two windows fit or no events occurred; `fano` is 0.
    pub fano_insufficient: bool,
    /// Absent below ten neurons or with no events.
    pub concentration: Option<f64>,
    /// Mean per-neuron rate in each whole window, Hz.
    pub rate_profile: Vec<f64>,
}

impl SpikeStatistics {
    pub fn mean_rate_hz(&self) -> f64 {
        mean(&self.rate_hz).unwrap_or(0.0)
    }

    pub fn mean_isi_ms(&self) -> Option<f64> {
        mean(&self.isi_mean_ms.iter().flatten().copied().collect::<Vec<_>>())
    }

    pub fn mean_isi_cv(&self) -> Option<f64> {
        mean(&self.isi_cv.iter().flatten().copied().collect::<Vec<_>>())
    }

    /// Flat `(metric, value)` pairs; absent values are omitted.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("events", self.events as f64),
            ("mean_rate_hz", self.mean_rate_hz()),
            ("fano", self.fano),
        ];
        if let Some(v) = self.mean_isi_ms() {
            out.push(("mean_isi_ms", v));
        }
        if let Some(v) = self.mean_isi_cv() {
            out.push(("mean_isi_cv", v));
        }
        if let Some(v) = self.concentration {
            out.push(("concentration", v));
        }
        out
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
    (m, var.sqrt())
}

/// Per-neuron spike steps, ascending.
fn spike_steps(raster: &Raster) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new(); raster.size];
    for &(step, n) in &raster.events {
        out[n as usize].push(step);
    }
    out
}

/// Population event counts in consecutive whole windows of `window_steps`.
pub fn window_counts(raster: &Raster, steps: u64, window_steps: u64) -> Vec<u64> {
    if window_steps == 0 {
        return Vec::new();
    }
    let windows = (steps / window_steps) as usize;
    let mut counts = vec![0u64; windows];
    for &(step, _) in &raster.events {
        let w = (step / window_steps) as usize;
        if w < windows {
            counts[w] += 1;
        }
    }
    counts
}

/// Variance over mean of `counts`, 0 for empty or all-zero input.
pub fn fano_factor(counts: &[u64]) -> f64 {
    if counts.len() < 2 {
        return 0.0;
    }
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    var / m
}

fn window_steps(window_ms: f64, dt_ms: f64) -> Result<u64> {
    if !(window_ms.is_finite() && window_ms > 0.0) {
        return Err(SnnError::InputDomain(format!("window must be > 0 ms, got {window_ms}")));
    }
    Ok(((window_ms / dt_ms).round() as u64).max(1))
}

pub fn compute_statistics(rec: &Recording, population: &str, window_ms: f64) -> Result<SpikeStatistics> {
    let raster = rec.raster(population)?;
    let dt = rec.meta.dt_ms;
    let steps = rec.meta.steps;
    let wsteps = window_steps(window_ms, dt)?;
    let duration_s = steps as f64 * dt / 1000.0;

    let per_neuron = spike_steps(raster);
    let rate_hz = per_neuron
        .iter()
        .map(|s| if duration_s > 0.0 { s.len() as f64 / duration_s } else { 0.0 })
        .collect();
    let mut isi_mean_ms = Vec::with_capacity(raster.size);
    let mut isi_cv = Vec::with_capacity(raster.size);
    for s in &per_neuron {
        if s.len() < 2 {
            isi_mean_ms.push(None);
            isi_cv.push(None);
            continue;
        }
        let isis: Vec<f64> = s.windows(2).map(|w| (w[1] - w[0]) as f64 * dt).collect();
        let (m, sd) = mean_std(&isis);
        isi_mean_ms.push(Some(m));
        isi_cv.push(Some(sd / m));
    }

    let counts = window_counts(raster, steps, wsteps);
    let fano = fano_factor(&counts);
    let fano_insufficient = counts.len() < 2 || raster.events.is_empty();
    let window_s = wsteps as f64 * dt / 1000.0;
    let rate_profile = counts
        .iter()
        .map(|&c| if raster.size == 0 { 0.0 } else { c as f64 / (raster.size as f64 * window_s) })
        .collect();
    let concentration = if raster.size >= 10 { concentration_of(raster) } else { None };

    Ok(SpikeStatistics {
        population: population.to_string(),
        window_ms,
        events: raster.events.len(),
        rate_hz,
        isi_mean_ms,
        isi_cv,
        fano,
        fano_insufficient,
        concentration,
        rate_profile,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conformance {
    pub p_value: f64,
    pub fano: f64,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Inclusive lower edge of each pooled bin; the last bin is open above.
    pub bin_edges: Vec<u64>,
}

/// Chi-square goodness of fit of window counts against `Poisson(lambda)`.
/// Bins are pooled from the left until each expects at least five counts,
/// and the upper tail is folded into the last bin.
pub fn poisson_conformance(counts: &[u64], lambda: f64) -> Result<Conformance> {
    if counts.len() < MIN_CONFORMANCE_WINDOWS {
        return Err(SnnError::InsufficientData(format!(
            "need at least {MIN_CONFORMANCE_WINDOWS} windows, got {}",
            counts.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(SnnError::InputDomain(format!("lambda must be > 0, got {lambda}")));
    }
    let n = counts.len() as f64;
    let dist = Poisson::new(lambda).map_err(|e| SnnError::InputDomain(e.to_string()))?;

    let mut edges = Vec::new();
    let mut expected = Vec::new();
    let mut acc = 0.0;
    let mut cdf = 0.0;
    let mut lo = 0u64;
    let mut k = 0u64;
    loop {
        let p = dist.pmf(k);
        acc += p;
        cdf += p;
        let tail = (1.0 - cdf).max(0.0) * n;
        if acc * n >= MIN_EXPECTED_PER_BIN && tail >= MIN_EXPECTED_PER_BIN {
            edges.push(lo);
            expected.push(acc * n);
            acc = 0.0;
            lo = k + 1;
        } else if tail < MIN_EXPECTED_PER_BIN && (acc + (1.0 - cdf).max(0.0)) * n >= MIN_EXPECTED_PER_BIN {
            edges.push(lo);
            expected.push((acc + (1.0 - cdf).max(0.0)) * n);
            break;
        } else if tail < MIN_EXPECTED_PER_BIN && k as f64 > lambda + 50.0 * lambda.sqrt() + 50.0 {
            // whatever is left is too small to stand alone; fold into the previous bin
            match expected.last_mut() {
                Some(last) => *last += (acc + (1.0 - cdf).max(0.0)) * n,
                None => {
                    edges.push(lo);
                    expected.push(n);
                }
            }
            break;
        }
        k += 1;
    }
    if expected.len() < 2 {
        return Err(SnnError::InsufficientData(format!(
            "{} windows at lambda {lambda} give fewer than two bins",
            counts.len()
        )));
    }

    let mut observed = vec![0.0; expected.len()];
    for &c in counts {
        let bin = edges.partition_point(|&e| e <= c) - 1;
        observed[bin] += 1.0;
    }
    let chi_square: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = expected.len() - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| SnnError::InputDomain(e.to_string()))?;
    Ok(Conformance {
        p_value: chi.sf(chi_square),
        fano: fano_factor(counts),
        chi_square,
        degrees_of_freedom: dof,
        bin_edges: edges,
    })
}

fn concentration_of(raster: &Raster) -> Option<f64> {
    if raster.events.is_empty() {
        return None;
    }
    let mut ranked: Vec<(usize, usize)> = raster.counts().into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let top = (raster.size as f64 * 0.1).ceil() as usize;
    let top_events: usize = ranked.iter().take(top).map(|(_, c)| c).sum();
    Some(top_events as f64 / raster.events.len() as f64)
}

/// Fraction of events from the most active tenth of neurons (rounded up,
/// ties by lower index). Absent when the population emitted nothing.
pub fn wta_index(rec: &Recording, population: &str) -> Result<Option<f64>> {
    let raster = rec.raster(population)?;
    if raster.size < 10 {
        return Err(SnnError::InsufficientData(format!(
            "winner-take-all index needs at least 10 neurons, `{population}` has {}",
            raster.size
        )));
    }
    Ok(concentration_of(raster))
}

/// [`wta_index`] over steps `[from, to)` only.
pub fn wta_index_between(rec: &Recording, population: &str, from: u64, to: u64) -> Result<Option<f64>> {
    wta_index(rec, population)?;
    Ok(concentration_of(&rec.raster(population)?.window(from, to)))
}

/// Event rate in the second half of the run over the first half; below 1
/// means activity decays. Absent when the first half is silent.
pub fn damping_ratio(rec: &Recording, population: &str) -> Result<Option<f64>> {
    let raster = rec.raster(population)?;
    let steps = rec.meta.steps;
    if steps < 2 {
        return Err(SnnError::InsufficientData("damping ratio needs at least two steps".into()));
    }
    let half = steps / 2;
    let first = raster.events.iter().filter(|(s, _)| *s < half).count() as f64;
    let second = raster.events.len() as f64 - first;
    if first == 0.0 {
        return Ok(None);
    }
    Ok(Some((second / (steps - half) as f64) / (first / half as f64)))
}

/// Neurons that fired exactly once.
pub fn isolated_spike_count(rec: &Recording, population: &str) -> Result<usize> {
    Ok(rec.raster(population)?.counts().iter().filter(|&&c| c == 1).count())
}

/// `population,metric,value` rows.
pub fn statistics_csv(stats: &[SpikeStatistics]) -> String {
    let mut out = String::from("population,metric,value\n");
    for s in stats {
        for (metric, value) in s.metrics() {
            let _ = writeln!(out, "{},{metric},{value}", s.population);
        }
    }
    out
}

pub fn statistics_json(stats: &[SpikeStatistics]) -> String {
    serde_json::to_string_pretty(stats).expect("statistics serialize")
}
