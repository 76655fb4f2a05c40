use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

use super::network::{Network, Role};
use super::spec::{NetworkSpec, Observable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub spec_hash: String,
    pub seed: u64,
    pub dt_ms: f64,
    pub duration_ms: f64,
    /// Steps actually executed.
    pub steps: u64,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Not serialized, so repeated runs stay byte-identical.
    #[serde(skip)]
    pub wall_clock_ms: f64,
}

/// Sparse event list for one population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub population: String,
    pub size: usize,
    pub role: Role,
    /// `(step, neuron)` pairs in step order, neurons ascending within a step.
    pub events: Vec<(u64, u32)>,
}

impl Raster {
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.size];
        for &(_, n) in &self.events {
            counts[n as usize] += 1;
        }
        counts
    }

    /// Events with `from <= step < to`.
    pub fn events_between(&self, from: u64, to: u64) -> &[(u64, u32)] {
        let lo = self.events.partition_point(|(s, _)| *s < from);
        let hi = self.events.partition_point(|(s, _)| *s < to);
        &self.events[lo..hi.max(lo)]
    }

    /// Copy restricted to steps in `[from, to)`; step indices are kept.
    pub fn window(&self, from: u64, to: u64) -> Raster {
        Raster {
            population: self.population.clone(),
            size: self.size,
            role: self.role,
            events: self.events_between(from, to).to_vec(),
        }
    }
}

/// Dense samples of one state variable. `samples[k]` holds the state at the
/// end of step `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub population: String,
    pub variable: Observable,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub rasters: Vec<Raster>,
    pub traces: Vec<Trace>,
}

impl Recording {
    pub fn raster(&self, population: &str) -> Result<&Raster> {
        self.rasters
            .iter()
            .find(|r| r.population == population)
            .ok_or_else(|| SnnError::UnknownPopulation(population.to_string()))
    }

    pub fn trace(&self, population: &str, variable: Observable) -> Option<&Trace> {
        self.traces
            .iter()
            .find(|t| t.population == population && t.variable == variable)
    }

    pub fn event_count(&self) -> usize {
        self.rasters.iter().map(|r| r.events.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("recording serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Accumulates a [`Recording`] from a network one step at a time.
#[derive(Clone, Debug)]
pub struct Recorder {
    recording: Recording,
    started: Instant,
}

impl Recorder {
    pub fn new(network: &Network) -> Self {
        let spec = network.spec();
        let rasters = network
            .populations
            .iter()
            .map(|p| Raster {
                population: p.id.clone(),
                size: p.size,
                role: p.role,
                events: Vec::new(),
            })
            .collect();
        let mut traces: Vec<Trace> = Vec::new();
        for record in &spec.records {
            if record.what == Observable::Spikes {
                continue;
            }
            if traces
                .iter()
                .any(|t| t.population == record.population && t.variable == record.what)
            {
                continue;
            }
            traces.push(Trace {
                population: record.population.clone(),
                variable: record.what,
                samples: Vec::new(),
            });
        }
        Recorder {
            recording: Recording {
                meta: RecordingMeta {
                    spec_hash: spec.hash(),
                    seed: spec.seed,
                    dt_ms: spec.dt_ms,
                    duration_ms: spec.duration_ms,
                    steps: 0,
                    complete: false,
                    error: None,
                    wall_clock_ms: 0.0,
                },
                rasters,
                traces,
            },
            started: Instant::now(),
        }
    }

    /// Appends the network's latest step.
    pub fn capture(&mut self, network: &Network) {
        let step = network.current_step() - 1;
        for (raster, spikes) in self.recording.rasters.iter_mut().zip(network.last_spikes()) {
            raster.events.extend(
                spikes
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s)
                    .map(|(n, _)| (step, n as u32)),
            );
        }
        for trace in self.recording.traces.iter_mut() {
            let values = network
                .variable(&trace.population, trace.variable)
                .expect("validated recordable");
            trace.samples.push(values.to_vec());
        }
        self.recording.meta.steps = network.current_step();
    }

    pub fn snapshot(&self) -> Recording {
        let mut copy = self.recording.clone();
        copy.meta.wall_clock_ms = self.started.elapsed().as_secs_f64() * 1000.0;
        copy
    }

    pub fn recording(&self) -> &Recording {
        &self.recording
    }

    pub fn finish(mut self, complete: bool, error: Option<String>) -> Recording {
        self.recording.meta.complete = complete;
        self.recording.meta.error = error;
        self.recording.meta.wall_clock_ms = self.started.elapsed().as_secs_f64() * 1000.0;
        self.recording
    }
}

/// Builds and runs `spec` to completion. Validation errors are returned as
/// `Err`; divergence mid-run yields a partial recording flagged incomplete.
pub fn run(spec: &NetworkSpec) -> Result<Recording> {
    let mut network = Network::new(spec)?;
    Ok(run_network(&mut network))
}

pub fn run_network(network: &mut Network) -> Recording {
    let mut recorder = Recorder::new(network);
    while !network.is_finished() {
        if let Err(e) = network.step() {
            log::warn!("run stopped early: {e}");
            return recorder.finish(false, Some(e.to_string()));
        }
        recorder.capture(network);
    }
    recorder.finish(true, None)
}
