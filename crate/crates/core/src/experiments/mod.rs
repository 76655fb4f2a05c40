//! Calibrated presets for each figure-style experiment, expectation checks,
//! and the parameter sweep runner.

mod sweep;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{compute_statistics, damping_ratio, isolated_spike_count, wta_index, DEFAULT_WINDOW_MS};
use crate::engine::{run, ModelSpec, NetworkSpec, Observable, Recording};
use crate::error::{Result, SnnError};
use crate::neurons::closed_form_decay;

pub use sweep::{sweep, sweep_csv, thread_limit, SweepAxis, SweepRow, SweepSpec, SweepTable, MAX_SWEEP_POINTS};

macro_rules! catalog {
    ($($name:literal),* $(,)?) => {
        const CATALOG: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../../presets/", $name, ".json")))),*
        ];
    };
}

catalog!(
    "fig1_latency",
    "fig2_healthy",
    "fig2_degenerate",
    "fig3_resonant",
    "fig3_nonresonant",
    "fig4_decay",
    "fig6_lif_none",
    "fig6_lif_ooom",
    "fig6_lif_omoo",
    "fig6_lif_8020",
    "fig6_raf_none",
    "fig6_raf_ooom",
    "fig6_raf_omoo",
    "fig6_raf_8020",
);

/// Documentation of the values chosen for a preset. These are local
/// calibration, not published values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub notes: String,
    #[serde(default)]
    pub values: BTreeMap<String, serde_json::Value>,
    /// Parameter path to the `[low, high]` range the calibration holds over.
    #[serde(default)]
    pub slider_ranges: BTreeMap<String, [f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SpikeCount,
    IsolatedSpikeCount,
    WtaIndex,
    DampingRatio,
    MeanRateHz,
    Fano,
    MeanIsiCv,
    MinNeuronSpikes,
    MaxNeuronSpikes,
    /// 1 when first-spike times strictly decrease with neuron index, else 0.
    FirstSpikeOrderDecreasing,
    /// Largest recorded voltage sample.
    PeakVoltage,
    /// Largest deviation of the recorded voltage from the closed-form decay,
    /// relative to the initial displacement from rest.
    DecayError,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Eq => lhs == rhs,
            Comparison::Ne => lhs != rhs,
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Eq => "==",
            Comparison::Ne => "!=",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// `metric(population) op value`, or `op metric(population)` of a baseline
/// preset's run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: Metric,
    pub population: String,
    pub op: Comparison,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
}

impl Expectation {
    pub fn describe(&self) -> String {
        let rhs = match (&self.value, &self.baseline) {
            (Some(v), _) => v.to_string(),
            (None, Some(b)) => b.to_string(),
            (None, None) => "?".into(),
        };
        format!(
            "{}({}) {} {rhs}",
            serde_json::to_value(self.metric).unwrap().as_str().unwrap(),
            self.population,
            self.op.symbol()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub calibrated: Calibration,
    #[serde(default)]
    pub expectations: Vec<Expectation>,
    pub spec: NetworkSpec,
}

pub fn preset_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(name, _)| *name).collect()
}

pub fn preset(name: &str) -> Result<Preset> {
    let (_, text) = CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SnnError::UnknownPreset {
            name: name.to_string(),
            available: preset_names().into_iter().map(String::from).collect(),
        })?;
    let preset: Preset = serde_json::from_str(text)?;
    debug_assert_eq!(preset.name, name);
    Ok(preset)
}

pub fn catalog() -> Vec<Preset> {
    preset_names()
        .into_iter()
        .map(|n| preset(n).expect("shipped presets parse"))
        .collect()
}

/// Evaluates `metric` for `population` in `rec`. `None` when the value is
/// undefined for this recording.
pub fn measure(metric: Metric, rec: &Recording, spec: &NetworkSpec, population: &str) -> Result<Option<f64>> {
    let raster = rec.raster(population)?;
    let counts = raster.counts();
    Ok(match metric {
        Metric::SpikeCount => Some(raster.events.len() as f64),
        Metric::IsolatedSpikeCount => Some(isolated_spike_count(rec, population)? as f64),
        Metric::WtaIndex => wta_index(rec, population)?,
        Metric::DampingRatio => damping_ratio(rec, population)?,
        Metric::MeanRateHz => Some(compute_statistics(rec, population, DEFAULT_WINDOW_MS)?.mean_rate_hz()),
        Metric::Fano => Some(compute_statistics(rec, population, DEFAULT_WINDOW_MS)?.fano),
        Metric::MeanIsiCv => compute_statistics(rec, population, DEFAULT_WINDOW_MS)?.mean_isi_cv(),
        Metric::MinNeuronSpikes => counts.iter().min().map(|&c| c as f64),
        Metric::MaxNeuronSpikes => counts.iter().max().map(|&c| c as f64),
        Metric::FirstSpikeOrderDecreasing => {
            let mut first = vec![None; raster.size];
            for &(step, n) in &raster.events {
                first[n as usize].get_or_insert(step);
            }
            let ordered = first.iter().all(Option::is_some)
                && first.windows(2).all(|w| w[1] < w[0]);
            Some(if ordered { 1.0 } else { 0.0 })
        }
        Metric::PeakVoltage => rec
            .trace(population, Observable::Voltage)
            .and_then(|t| t.samples.iter().flatten().copied().reduce(f64::max)),
        Metric::DecayError => decay_error(rec, spec, population)?,
    })
}

fn decay_error(rec: &Recording, spec: &NetworkSpec, population: &str) -> Result<Option<f64>> {
    let pop = spec
        .population(population)
        .ok_or_else(|| SnnError::UnknownPopulation(population.to_string()))?;
    let ModelSpec::Lif { params } = &pop.model else {
        return Err(SnnError::Parameter(format!("decay_error needs a LIF population, `{population}` is not")));
    };
    let Some(trace) = rec.trace(population, Observable::Voltage) else {
        return Ok(None);
    };
    let v0 = pop.init.as_ref().and_then(|i| i.v).unwrap_or(params.v_rest) - params.v_rest;
    if v0 == 0.0 {
        return Ok(None);
    }
    let dt = rec.meta.dt_ms;
    let mut worst: f64 = 0.0;
    for (k, sample) in trace.samples.iter().enumerate() {
        let exact = closed_form_decay(v0, 0.0, (k + 1) as f64 * dt, params.tau_v_ms, params.gamma_v);
        for v in sample {
            worst = worst.max(((v - params.v_rest) - exact).abs());
        }
    }
    Ok(Some(worst / v0.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub expectation: Expectation,
    pub description: String,
    pub measured: Option<f64>,
    /// The right-hand side actually compared against.
    pub reference: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetRun {
    pub name: String,
    pub recording: Recording,
    pub results: Vec<ExpectationResult>,
}

impl PresetRun {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    /// JSON report with pass/fail and measured values, without the recording.
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "preset": self.name,
            "passed": self.all_passed(),
            "spec_hash": self.recording.meta.spec_hash,
            "seed": self.recording.meta.seed,
            "results": self.results,
        }))
        .expect("report serializes")
    }
}

/// Runs a catalog entry and evaluates its expectations. Baseline presets
/// named by expectations are run as well.
pub fn run_preset(name: &str) -> Result<PresetRun> {
    let p = preset(name)?;
    run_preset_spec(&p, &p.spec)
}

/// As [`run_preset`] with the spec replaced, e.g. after a seed override.
pub fn run_preset_spec(p: &Preset, spec: &NetworkSpec) -> Result<PresetRun> {
    let recording = run(spec)?;
    let mut baselines: BTreeMap<String, (NetworkSpec, Recording)> = BTreeMap::new();
    let mut results = Vec::with_capacity(p.expectations.len());
    for e in &p.expectations {
        let measured = measure(e.metric, &recording, spec, &e.population)?;
        let reference = match (&e.value, &e.baseline) {
            (Some(v), _) => Some(*v),
            (None, Some(b)) => {
                if !baselines.contains_key(b) {
                    let base = preset(b)?;
                    let rec = run(&base.spec)?;
                    baselines.insert(b.clone(), (base.spec, rec));
                }
                let (bspec, brec) = &baselines[b];
                measure(e.metric, brec, bspec, &e.population)?
            }
            (None, None) => {
                return Err(SnnError::Configuration(format!(
                    "expectation `{}` has neither value nor baseline",
                    e.describe()
                )))
            }
        };
        let passed = matches!((measured, reference), (Some(m), Some(r)) if e.op.holds(m, r));
        results.push(ExpectationResult {
            expectation: e.clone(),
            description: e.describe(),
            measured,
            reference,
            passed,
        });
    }
    Ok(PresetRun {
        name: p.name.clone(),
        recording,
        results,
    })
}
