use thiserror::Error;

use crate::diagnostics::Diagnostic;

pub type Result<T> = std::result::Result<T, SnnError>;

#[derive(Debug, Error)]
pub enum SnnError {
    /// A value lies outside the domain an operation accepts.
    #[error("input domain error: {0}")]
    InputDomain(String),

    #[error("population must contain at least one neuron")]
    EmptyPopulation,

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    /// A state variable became non-finite. `population` and `step` are filled
    /// in by the engine; bare neuron updates only know the neuron index.
    #[error("numerical divergence in neuron {neuron}{}", location(.population, .step))]
    Divergence {
        neuron: usize,
        population: Option<String>,
        step: Option<u64>,
    },

    #[error("spec failed validation with {} diagnostic(s)", .0.len())]
    Validation(Vec<Diagnostic>),

    #[error("unknown population `{0}`")]
    UnknownPopulation(String),

    #[error("unknown preset `{name}`; available: {}", .available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn location(population: &Option<String>, step: &Option<u64>) -> String {
    match (population, step) {
        (Some(p), Some(s)) => format!(" of population `{p}` at step {s}"),
        (Some(p), None) => format!(" of population `{p}`"),
        (None, Some(s)) => format!(" at step {s}"),
        (None, None) => String::new(),
    }
}

impl SnnError {
    pub(crate) fn divergence(neuron: usize) -> Self {
        SnnError::Divergence {
            neuron,
            population: None,
            step: None,
        }
    }

    pub(crate) fn at(self, pop: &str, at_step: u64) -> Self {
        match self {
            SnnError::Divergence { neuron, .. } => SnnError::Divergence {
                neuron,
                population: Some(pop.to_string()),
                step: Some(at_step),
            },
            other => other,
        }
    }
}
