//! The `NetworkSpec` JSON document.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::connectivity::Pattern;
use crate::encoders::ClipMode;
use crate::error::{Result, SnnError};
use crate::neurons::{LifParams, RafParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub dt_ms: f64,
    pub duration_ms: f64,
    #[serde(default)]
    pub seed: u64,
    pub populations: Vec<PopulationSpec>,
    #[serde(default)]
    pub projections: Vec<ProjectionSpec>,
    #[serde(default)]
    pub records: Vec<RecordSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub id: String,
    pub size: usize,
    #[serde(flatten)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Lif {
        #[serde(default)]
        params: LifParams,
    },
    Raf {
        #[serde(default)]
        params: RafParams,
    },
    Encoder { encoder: EncoderSpec },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Lif { .. } => "lif",
            ModelSpec::Raf { .. } => "raf",
            ModelSpec::Encoder { .. } => "encoder",
        }
    }
}

/// Starting values applied to every neuron of a population.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    Bernoulli {
        inputs: Inputs,
    },
    Poisson {
        rate_hz: f64,
        inputs: Inputs,
    },
    Phasor {
        rate_hz: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inputs: Option<Inputs>,
    },
    Latency {
        inputs: Inputs,
        tau_in_ms: f64,
        #[serde(default = "one")]
        resistance: f64,
        v_thr: f64,
        window_ms: f64,
        #[serde(default)]
        clip_mode: ClipMode,
    },
}

fn default_sigma() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

/// Per-neuron input values: an explicit list, one value for every neuron,
/// or an evenly spaced ramp from the first to the last neuron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inputs {
    Each(Vec<f64>),
    Uniform(f64),
    Ramp { ramp: [f64; 2] },
}

impl Inputs {
    pub fn resolve(&self, size: usize) -> Result<Vec<f64>> {
        match self {
            Inputs::Each(v) if v.len() == size => Ok(v.clone()),
            Inputs::Each(v) => Err(SnnError::ShapeMismatch {
                expected: size,
                actual: v.len(),
            }),
            Inputs::Uniform(x) => Ok(vec![*x; size]),
            Inputs::Ramp { ramp: [lo, hi] } => Ok(match size {
                0 => Vec::new(),
                1 => vec![*lo],
                n => (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    /// Defaults to `<source>_to_<target>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub source: String,
    pub target: String,
    pub pattern: Pattern,
    /// Constant weight, or the signed maximum for `uniform` draws.
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<WeightKind>,
    /// Fraction of kept entries, `sparse_random` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
}

impl ProjectionSpec {
    pub fn id(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}_to_{}", self.source, self.target))
    }

    /// Constant for identity, hollow and dense; uniform for sparse random.
    pub fn weight_kind(&self) -> WeightKind {
        self.distribution.unwrap_or(match self.pattern {
            Pattern::SparseRandom => WeightKind::Uniform,
            _ => WeightKind::Constant,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Constant,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Spikes,
    Voltage,
    Current,
    Threshold,
    AngularVar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    pub population: String,
    pub what: Observable,
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// SHA-256 over the canonical (key-sorted, compact) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn population(&self, id: &str) -> Option<&PopulationSpec> {
        self.populations.iter().find(|p| p.id == id)
    }

    /// Returns a copy with the number at `path` replaced. Path segments walk
    /// object keys; inside arrays a segment selects the element whose `id`
    /// (or, for projections, derived id) matches.
    pub fn with_value(&self, path: &str, value: serde_json::Value) -> Result<NetworkSpec> {
        let mut doc = serde_json::to_value(self)?;
        if let Some(projections) = doc.get_mut("projections").and_then(|p| p.as_array_mut()) {
            for (p, spec) in projections.iter_mut().zip(&self.projections) {
                p["id"] = serde_json::Value::String(spec.id());
            }
        }
        set_path(&mut doc, path, value)?;
        let mut out: NetworkSpec =
            serde_json::from_value(doc).map_err(|e| SnnError::Parameter(format!("`{path}`: {e}")))?;
        for (new, old) in out.projections.iter_mut().zip(&self.projections) {
            if old.id.is_none() && new.id.as_deref() == Some(old.id().as_str()) {
                new.id = None;
            }
        }
        Ok(out)
    }
}

pub(crate) fn set_path(doc: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments
        .split_last()
        .ok_or_else(|| SnnError::Parameter("empty parameter path".into()))?;
    let mut node = doc;
    for seg in parents {
        node = step_into(node, seg).ok_or_else(|| SnnError::Parameter(format!("`{path}`: no element `{seg}`")))?;
    }
    match node {
        serde_json::Value::Object(map) => {
            let value = match map.get(*last) {
                Some(old) => matching_integer(old, value),
                None => value,
            };
            map.insert((*last).to_string(), value);
            Ok(())
        }
        serde_json::Value::Array(_) => {
            let slot = step_into(node, last).ok_or_else(|| SnnError::Parameter(format!("`{path}`: no element `{last}`")))?;
            *slot = matching_integer(slot, value);
            Ok(())
        }
        _ => Err(SnnError::Parameter(format!("`{path}` does not name a field"))),
    }
}

/// Integral floats replacing an integer field stay integers, so `seed` and
/// `size` can be set from numeric sweeps.
fn matching_integer(old: &serde_json::Value, value: serde_json::Value) -> serde_json::Value {
    match (old.is_u64(), value.as_f64()) {
        (true, Some(f)) if f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64 => serde_json::json!(f as u64),
        _ => value,
    }
}

fn step_into<'a>(node: &'a mut serde_json::Value, seg: &str) -> Option<&'a mut serde_json::Value> {
    match node {
        serde_json::Value::Object(map) => map.get_mut(seg),
        serde_json::Value::Array(items) => {
            if let Ok(index) = seg.parse::<usize>() {
                if index < items.len() {
                    return items.get_mut(index);
                }
            }
            items
                .iter_mut()
                .find(|item| item.get("id").and_then(|v| v.as_str()) == Some(seg))
        }
        _ => None,
    }
}
