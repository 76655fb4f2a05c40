use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, NetworkSpec};
use crate::error::{Result, SnnError};
use crate::rng::mix_seed;

use super::{measure, preset, Metric};

/// Upper bound on the number of points in one sweep.
pub const MAX_SWEEP_POINTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRef {
    pub metric: Metric,
    pub population: String,
}

impl MetricRef {
    fn label(&self) -> String {
        format!(
            "{}@{}",
            serde_json::to_value(self.metric).unwrap().as_str().unwrap(),
            self.population
        )
    }
}

/// Base network (a preset name or an inline spec), axes, and metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<NetworkSpec>,
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    pub metrics: Vec<MetricRef>,
    /// Run every point with the base seed instead of a per-point seed, so
    /// differences between points come from the parameters alone.
    #[serde(default)]
    pub common_seed: bool,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn base(&self) -> Result<NetworkSpec> {
        match (&self.preset, &self.spec) {
            (Some(name), None) => Ok(preset(name)?.spec),
            (None, Some(spec)) => Ok(spec.clone()),
            _ => Err(SnnError::Configuration(
                "sweep needs exactly one of `preset` or `spec`".into(),
            )),
        }
    }

    pub fn point_count(&self) -> usize {
        self.axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
            .unwrap_or(usize::MAX)
    }

    /// Axis values of point `index`; the last axis varies fastest.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut values = vec![0.0; self.axes.len()];
        for (slot, axis) in values.iter_mut().zip(&self.axes).rev() {
            *slot = axis.values[index % axis.values.len()];
            index /= axis.values.len();
        }
        values
    }

    /// The exact spec run for point `index`.
    pub fn point_spec(&self, index: usize) -> Result<NetworkSpec> {
        let mut spec = self.base()?;
        for (axis, value) in self.axes.iter().zip(self.point(index)) {
            spec = spec.with_value(&axis.path, serde_json::json!(value))?;
        }
        if !self.common_seed {
            spec.seed = mix_seed(spec.seed, index as u64);
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub seed: u64,
    pub values: Vec<f64>,
    pub metrics: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub metrics: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Worker count for sweeps: `SNN_TUNE_THREADS` if set, else the machine's
/// parallelism.
pub fn thread_limit() -> usize {
    std::env::var("SNN_TUNE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every point of the cartesian product. A point whose spec fails to
/// build or run records the error in its row; the rest of the sweep goes on.
pub fn sweep(s: &SweepSpec) -> Result<SweepTable> {
    if s.axes.iter().any(|a| a.values.is_empty()) {
        return Err(SnnError::Configuration("sweep axis with no values".into()));
    }
    let points = s.point_count();
    if points > MAX_SWEEP_POINTS {
        return Err(SnnError::Configuration(format!(
            "sweep has {points} points, the limit is {MAX_SWEEP_POINTS}"
        )));
    }
    s.base()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_limit())
        .build()
        .map_err(|e| SnnError::Configuration(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| (0..points).into_par_iter().map(|i| run_point(s, i)).collect());
    Ok(SweepTable {
        axes: s.axes.iter().map(|a| a.path.clone()).collect(),
        metrics: s.metrics.iter().map(MetricRef::label).collect(),
        rows,
    })
}

fn run_point(s: &SweepSpec, index: usize) -> SweepRow {
    let values = s.point(index);
    let outcome = s.point_spec(index).and_then(|spec| {
        let rec = run(&spec)?;
        let metrics = s
            .metrics
            .iter()
            .map(|m| measure(m.metric, &rec, &spec, &m.population))
            .collect::<Result<Vec<_>>>()?;
        Ok((spec.seed, metrics, rec.meta.error))
    });
    match outcome {
        Ok((seed, metrics, error)) => SweepRow {
            point: index,
            seed,
            values,
            metrics,
            error,
        },
        Err(e) => SweepRow {
            point: index,
            seed: 0,
            values,
            metrics: vec![None; s.metrics.len()],
            error: Some(e.to_string()),
        },
    }
}

/// `point,seed,<axis paths>,<metric@population>,error`; absent values are
/// empty cells.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("point,seed");
    for name in table.axes.iter().chain(&table.metrics) {
        let _ = write!(out, ",{name}");
    }
    out.push_str(",error\n");
    for row in &table.rows {
        let _ = write!(out, "{},{}", row.point, row.seed);
        for v in &row.values {
            let _ = write!(out, ",{v}");
        }
        for m in &row.metrics {
            match m {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        let error = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, ",{error}");
    }
    out
}
