use serde::{Deserialize, Serialize};

use crate::connectivity::{
    dense_matrix, hollow_matrix, identity_matrix, sparse_random, Pattern, Sign, SynapseMatrix, WeightDistribution,
};
use crate::diagnostics::Diagnostic;
use crate::encoders::{
    integral_steps, latency_encode, phasor_init_scaled, EncoderTiming, EncoderUnit, LatencyParams,
};
use crate::error::{Result, SnnError};
use crate::neurons::{lif_step, raf_step, LifParams, LifState, RafParams, RafState};
use crate::rng::SimRng;

use super::spec::{EncoderSpec, ModelSpec, NetworkSpec, Observable, WeightKind};
use super::validate::validate;

/// How a population's events are drawn in rasters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Input,
    Excitatory,
    Inhibitory,
}

#[derive(Clone, Debug)]
pub(crate) enum Dynamics {
    Lif { params: LifParams, state: LifState },
    Raf { params: RafParams, state: RafState },
    Encoder { unit: EncoderUnit, rng: SimRng },
}

#[derive(Clone, Debug)]
pub(crate) struct Population {
    pub id: String,
    pub size: usize,
    pub role: Role,
    pub dynamics: Dynamics,
    incoming: Vec<usize>,
}

impl Population {
    pub fn variable(&self, what: Observable) -> Option<&[f64]> {
        match (&self.dynamics, what) {
            (Dynamics::Lif { state, .. }, Observable::Voltage) => Some(&state.v),
            (Dynamics::Lif { state, .. }, Observable::Current) => Some(&state.j),
            (Dynamics::Lif { state, .. }, Observable::Threshold) => Some(&state.theta_hat),
            (Dynamics::Raf { state, .. }, Observable::Voltage) => Some(&state.v),
            (Dynamics::Raf { state, .. }, Observable::AngularVar) => Some(&state.c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Projection {
    pub id: String,
    pub source: usize,
    pub matrix: SynapseMatrix,
    /// The configured weight the matrix currently corresponds to.
    pub weight: f64,
}

/// A built, steppable network.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    warnings: Vec<Diagnostic>,
    total_steps: u64,
    step: u64,
    pub(crate) populations: Vec<Population>,
    pub(crate) projections: Vec<Projection>,
    last_spikes: Vec<Vec<bool>>,
}

impl Network {
    /// Validates and instantiates `spec`. Warnings are kept on the network.
    pub fn new(spec: &NetworkSpec) -> Result<Self> {
        let diagnostics = validate(spec);
        if diagnostics.iter().any(Diagnostic::is_error) {
            return Err(SnnError::Validation(diagnostics));
        }
        let dt = spec.dt_ms;
        let total_steps = integral_steps(spec.duration_ms, dt).expect("validated") as u64;

        let mut populations = Vec::with_capacity(spec.populations.len());
        for pop in &spec.populations {
            let dynamics = match &pop.model {
                ModelSpec::Lif { params } => {
                    let mut state = LifState::at_rest(pop.size, params);
                    if let Some(init) = &pop.init {
                        state.v.fill(init.v.unwrap_or(params.v_rest));
                        state.j.fill(init.j.unwrap_or(0.0));
                    }
                    Dynamics::Lif {
                        params: params.clone(),
                        state,
                    }
                }
                ModelSpec::Raf { params } => {
                    let mut state = RafState::at_rest(pop.size);
                    if let Some(init) = &pop.init {
                        state.v.fill(init.v.unwrap_or(0.0));
                        state.c.fill(init.c.unwrap_or(0.0));
                    }
                    Dynamics::Raf {
                        params: params.clone(),
                        state,
                    }
                }
                ModelSpec::Encoder { encoder } => {
                    let mut rng = SimRng::derive(spec.seed, &format!("encoder:{}", pop.id));
                    let unit = build_encoder(encoder, pop.size, dt, &mut rng)?;
                    Dynamics::Encoder { unit, rng }
                }
            };
            populations.push(Population {
                id: pop.id.clone(),
                size: pop.size,
                role: Role::Excitatory,
                dynamics,
                incoming: Vec::new(),
            });
        }

        let index_of = |id: &str| spec.populations.iter().position(|p| p.id == id).expect("validated");
        let mut projections = Vec::with_capacity(spec.projections.len());
        for proj in &spec.projections {
            let id = proj.id();
            let source = index_of(&proj.source);
            let target = index_of(&proj.target);
            let (n_pre, n_post) = (populations[source].size, populations[target].size);
            let mut rng = SimRng::derive(spec.seed, &format!("projection:{id}"));
            let dist = match proj.weight_kind() {
                WeightKind::Constant => WeightDistribution::Constant(proj.weight),
                WeightKind::Uniform => WeightDistribution::Uniform { max: proj.weight },
            };
            let matrix = match proj.pattern {
                Pattern::Identity => identity_matrix(n_pre, proj.weight)?,
                Pattern::Hollow => hollow_matrix(n_pre, proj.weight)?,
                Pattern::SparseRandom => {
                    sparse_random(n_pre, n_post, proj.density.expect("validated"), dist, &mut rng)?
                }
                Pattern::Dense => dense_matrix(n_pre, n_post, dist, &mut rng)?,
            };
            populations[target].incoming.push(projections.len());
            projections.push(Projection {
                id,
                source,
                matrix,
                weight: proj.weight,
            });
        }

        for (i, pop) in populations.iter_mut().enumerate() {
            let outgoing: Vec<Sign> = projections
                .iter()
                .filter(|p| p.source == i)
                .map(|p| p.matrix.sign())
                .collect();
            pop.role = if matches!(pop.dynamics, Dynamics::Encoder { .. }) {
                Role::Input
            } else if !outgoing.is_empty() && outgoing.iter().all(|s| *s == Sign::Inhibitory) {
                Role::Inhibitory
            } else {
                Role::Excitatory
            };
        }

        let last_spikes = populations.iter().map(|p| vec![false; p.size]).collect();
        Ok(Network {
            spec: spec.clone(),
            warnings: diagnostics,
            total_steps,
            step: 0,
            populations,
            projections,
            last_spikes,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn warnings(&self) -> &[Diagnostic] {
        &self.warnings
    }

    pub fn dt_ms(&self) -> f64 {
        self.spec.dt_ms
    }

    /// Steps executed so far.
    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn population_ids(&self) -> impl Iterator<Item = &str> {
        self.populations.iter().map(|p| p.id.as_str())
    }

    pub fn population_size(&self, id: &str) -> Option<usize> {
        self.populations.iter().find(|p| p.id == id).map(|p| p.size)
    }

    pub fn role(&self, id: &str) -> Option<Role> {
        self.populations.iter().find(|p| p.id == id).map(|p| p.role)
    }

    /// Spikes emitted by each population on the most recent step.
    pub fn last_spikes(&self) -> &[Vec<bool>] {
        &self.last_spikes
    }

    /// Current values of a state variable.
    pub fn variable(&self, id: &str, what: Observable) -> Option<&[f64]> {
        self.populations.iter().find(|p| p.id == id)?.variable(what)
    }

    /// One synchronous step: encoders emit, every neuron population receives
    /// the current produced by the previous step's spikes, then all neuron
    /// populations update.
    pub fn step(&mut self) -> Result<&[Vec<bool>]> {
        let dt = self.spec.dt_ms;
        let at = self.step;
        let mut next = Vec::with_capacity(self.populations.len());
        for pop in self.populations.iter_mut() {
            let spikes = match &mut pop.dynamics {
                Dynamics::Encoder { unit, rng } => unit.emit(at, rng)?,
                Dynamics::Lif { params, state } => {
                    let current = incoming_current(&pop.incoming, &self.projections, &self.last_spikes, pop.size)?;
                    lif_step(state, params, &current, dt).map_err(|e| e.at(&pop.id, at))?
                }
                Dynamics::Raf { params, state } => {
                    let current = incoming_current(&pop.incoming, &self.projections, &self.last_spikes, pop.size)?;
                    raf_step(state, params, &current, dt).map_err(|e| e.at(&pop.id, at))?
                }
            };
            next.push(spikes);
        }
        self.last_spikes = next;
        self.step += 1;
        Ok(&self.last_spikes)
    }

    /// Applies a numeric parameter change between steps.
    ///
    /// Supported paths: `populations.<id>.params.<field>` for LIF and RAF
    /// parameters, `populations.<id>.encoder.rate_hz` for Poisson encoders,
    /// and `projections.<id>.weight`, which rescales the whole matrix
    /// uniformly and may not change its sign.
    pub fn set_param(&mut self, path: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(SnnError::Parameter(format!("`{path}`: value must be finite")));
        }
        let segments: Vec<&str> = path.split('.').collect();
        let dt = self.spec.dt_ms;
        match segments.as_slice() {
            ["populations", id, "params", field] => {
                let pop = self
                    .populations
                    .iter_mut()
                    .find(|p| p.id == *id)
                    .ok_or_else(|| SnnError::UnknownPopulation(id.to_string()))?;
                match &mut pop.dynamics {
                    Dynamics::Lif { params, .. } => {
                        *params = patched(params, field, value, |p: &LifParams| p.diagnostics(dt))?;
                    }
                    Dynamics::Raf { params, .. } => {
                        *params = patched(params, field, value, |p: &RafParams| p.diagnostics(dt))?;
                    }
                    Dynamics::Encoder { .. } => {
                        return Err(SnnError::Parameter(format!("`{path}`: encoder populations have no params")))
                    }
                }
            }
            ["populations", id, "encoder", "rate_hz"] => {
                let pop = self
                    .populations
                    .iter_mut()
                    .find(|p| p.id == *id)
                    .ok_or_else(|| SnnError::UnknownPopulation(id.to_string()))?;
                match &mut pop.dynamics {
                    Dynamics::Encoder {
                        unit: EncoderUnit::Poisson { timing, .. },
                        ..
                    } => *timing = EncoderTiming::new(value, dt).map_err(|e| SnnError::Parameter(e.to_string()))?,
                    _ => {
                        return Err(SnnError::Parameter(format!(
                            "`{path}`: only poisson encoders accept live rate changes"
                        )))
                    }
                }
            }
            ["projections", id, "weight"] => {
                let proj = self
                    .projections
                    .iter_mut()
                    .find(|p| p.id == *id)
                    .ok_or_else(|| SnnError::Parameter(format!("unknown projection `{id}`")))?;
                if proj.weight == 0.0 {
                    return Err(SnnError::Parameter(format!("`{path}`: cannot rescale a zero-weight projection")));
                }
                let factor = value / proj.weight;
                if factor < 0.0 {
                    return Err(SnnError::Parameter(format!(
                        "`{path}`: {value} would flip the projection's sign"
                    )));
                }
                proj.matrix.scale(factor)?;
                proj.weight = value;
            }
            _ => {
                return Err(SnnError::Parameter(format!(
                    "`{path}` is not a live-tunable parameter"
                )))
            }
        }
        self.spec = self.spec.with_value(path, serde_json::json!(value))?;
        Ok(())
    }
}

fn patched<P>(params: &P, field: &str, value: f64, check: impl Fn(&P) -> Vec<Diagnostic>) -> Result<P>
where
    P: Serialize + for<'de> Deserialize<'de>,
{
    let mut doc = serde_json::to_value(params)?;
    let map = doc.as_object_mut().expect("params serialize to an object");
    if !map.contains_key(field) && field != "r_v" {
        return Err(SnnError::Parameter(format!("unknown parameter `{field}`")));
    }
    map.insert(field.to_string(), serde_json::json!(value));
    let next: P = serde_json::from_value(doc).map_err(|e| SnnError::Parameter(e.to_string()))?;
    let errors: Vec<Diagnostic> = check(&next).into_iter().filter(Diagnostic::is_error).collect();
    if errors.is_empty() {
        Ok(next)
    } else {
        Err(SnnError::Validation(errors))
    }
}

fn incoming_current(
    incoming: &[usize],
    projections: &[Projection],
    last_spikes: &[Vec<bool>],
    size: usize,
) -> Result<Vec<f64>> {
    let mut current = vec![0.0; size];
    for &p in incoming {
        let proj = &projections[p];
        proj.matrix.propagate_into(&last_spikes[proj.source], &mut current)?;
    }
    Ok(current)
}

fn build_encoder(spec: &EncoderSpec, size: usize, dt: f64, rng: &mut SimRng) -> Result<EncoderUnit> {
    Ok(match spec {
        EncoderSpec::Bernoulli { inputs } => EncoderUnit::Bernoulli {
            inputs: inputs.resolve(size)?,
        },
        EncoderSpec::Poisson { rate_hz, inputs } => EncoderUnit::Poisson {
            inputs: inputs.resolve(size)?,
            timing: EncoderTiming::new(*rate_hz, dt)?,
        },
        EncoderSpec::Phasor { rate_hz, sigma, inputs } => {
            let x = match inputs {
                Some(inputs) => inputs.resolve(size)?,
                None => vec![1.0; size],
            };
            EncoderUnit::Phasor(phasor_init_scaled(&EncoderTiming::new(*rate_hz, dt)?, &x, *sigma, rng)?)
        }
        EncoderSpec::Latency {
            inputs,
            tau_in_ms,
            resistance,
            v_thr,
            window_ms,
            clip_mode,
        } => {
            let params = LatencyParams {
                tau_in_ms: *tau_in_ms,
                resistance: *resistance,
                v_thr: *v_thr,
                window_ms: *window_ms,
                clip_mode: *clip_mode,
            };
            EncoderUnit::Latency {
                train: latency_encode(&inputs.resolve(size)?, &params, dt)?,
            }
        }
    })
}
