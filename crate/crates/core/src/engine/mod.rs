//! Network specification, validation, the stepping engine, and recordings.

pub mod export;
pub mod network;
pub mod recording;
pub mod spec;
pub mod validate;

pub use crate::diagnostics::{Diagnostic, Severity};
pub use export::{write_exports, ExportFormat};
pub use network::{Network, Role};
pub use recording::{run, run_network, Raster, Recorder, Recording, RecordingMeta, Trace};
pub use spec::{
    EncoderSpec, InitialState, Inputs, ModelSpec, NetworkSpec, Observable, PopulationSpec, ProjectionSpec,
    RecordSpec, WeightKind,
};
pub use validate::validate;
