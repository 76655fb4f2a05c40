use std::collections::HashSet;

use crate::connectivity::Pattern;
use crate::diagnostics::Diagnostic;
use crate::encoders::{events_per_step, integral_steps};

use super::spec::{EncoderSpec, ModelSpec, NetworkSpec, Observable};

/// Every problem found in `spec`. An empty list, or one with only warnings,
/// means the spec can be run.
pub fn validate(spec: &NetworkSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let dt = spec.dt_ms;
    let dt_ok = dt.is_finite() && dt > 0.0;
    if !dt_ok {
        out.push(Diagnostic::error("invalid_dt", "dt_ms", format!("dt_ms must be > 0, got {dt}")));
    }
    if !(spec.duration_ms.is_finite() && spec.duration_ms >= 0.0) {
        out.push(Diagnostic::error(
            "invalid_duration",
            "duration_ms",
            format!("duration_ms must be >= 0, got {}", spec.duration_ms),
        ));
    } else if dt_ok && integral_steps(spec.duration_ms, dt).is_none() {
        out.push(Diagnostic::error(
            "fractional_duration",
            "duration_ms",
            format!("duration_ms {} is not a whole number of {dt} ms steps", spec.duration_ms),
        ));
    }

    let mut ids = HashSet::new();
    for (index, pop) in spec.populations.iter().enumerate() {
        let path = format!("populations.{}", if pop.id.is_empty() { index.to_string() } else { pop.id.clone() });
        if pop.id.is_empty() {
            out.push(Diagnostic::error("empty_id", &path, "population id must not be empty"));
        } else if !ids.insert(pop.id.as_str()) {
            out.push(Diagnostic::error("duplicate_population", &path, format!("population id `{}` is used twice", pop.id)));
        }
        if pop.size == 0 {
            out.push(Diagnostic::error("empty_population", format!("{path}.size"), "population must contain at least one neuron"));
        }
        match &pop.model {
            ModelSpec::Lif { params } if dt_ok => {
                out.extend(params.diagnostics(dt).into_iter().map(|d| d.prefixed(&format!("{path}.params"))));
            }
            ModelSpec::Raf { params } if dt_ok => {
                out.extend(params.diagnostics(dt).into_iter().map(|d| d.prefixed(&format!("{path}.params"))));
            }
            ModelSpec::Encoder { encoder } => check_encoder(encoder, pop.size, dt, dt_ok, &format!("{path}.encoder"), &mut out),
            _ => {}
        }
        if let Some(init) = &pop.init {
            let allowed: &[(&str, bool)] = match pop.model {
                ModelSpec::Lif { .. } => &[("v", true), ("j", true), ("c", false)],
                ModelSpec::Raf { .. } => &[("v", true), ("j", false), ("c", true)],
                ModelSpec::Encoder { .. } => &[("v", false), ("j", false), ("c", false)],
            };
            for (name, ok) in allowed {
                let value = match *name {
                    "v" => init.v,
                    "j" => init.j,
                    _ => init.c,
                };
                match value {
                    Some(_) if !ok => out.push(Diagnostic::error(
                        "invalid_initial_state",
                        format!("{path}.init.{name}"),
                        format!("{} populations have no `{name}` variable", pop.model.name()),
                    )),
                    Some(x) if !x.is_finite() => out.push(Diagnostic::error(
                        "invalid_initial_state",
                        format!("{path}.init.{name}"),
                        "initial value must be finite",
                    )),
                    _ => {}
                }
            }
        }
    }

    let mut projection_ids = HashSet::new();
    for proj in &spec.projections {
        let id = proj.id();
        let path = format!("projections.{id}");
        if !projection_ids.insert(id.clone()) {
            out.push(Diagnostic::error("duplicate_projection", &path, format!("projection id `{id}` is used twice")));
        }
        let source = spec.population(&proj.source);
        let target = spec.population(&proj.target);
        if source.is_none() {
            out.push(Diagnostic::error(
                "unknown_population",
                format!("{path}.source"),
                format!("projection source `{}` does not name a population", proj.source),
            ));
        }
        match target {
            None => out.push(Diagnostic::error(
                "unknown_population",
                format!("{path}.target"),
                format!("projection target `{}` does not name a population", proj.target),
            )),
            Some(t) if matches!(t.model, ModelSpec::Encoder { .. }) => out.push(Diagnostic::error(
                "encoder_target",
                format!("{path}.target"),
                format!("projection targets encoder population `{}`", proj.target),
            )),
            _ => {}
        }
        if !proj.weight.is_finite() {
            out.push(Diagnostic::error("invalid_weight", format!("{path}.weight"), "weight must be finite"));
        }
        match (proj.pattern, proj.density) {
            (Pattern::SparseRandom, None) => out.push(Diagnostic::error(
                "missing_density",
                format!("{path}.density"),
                "sparse_random projections need a density",
            )),
            (Pattern::SparseRandom, Some(d)) if !(0.0..=1.0).contains(&d) => out.push(Diagnostic::error(
                "invalid_density",
                format!("{path}.density"),
                format!("density must lie in [0, 1], got {d}"),
            )),
            (Pattern::SparseRandom, _) => {}
            (_, Some(_)) => out.push(Diagnostic::warning(
                "unused_density",
                format!("{path}.density"),
                "density only applies to sparse_random projections",
            )),
            _ => {}
        }
        if let (Some(s), Some(t)) = (source, target) {
            match proj.pattern {
                Pattern::Identity | Pattern::Hollow if s.size != t.size => out.push(Diagnostic::error(
                    "shape_mismatch",
                    format!("{path}.pattern"),
                    format!("{:?} projection needs equal sizes, got {} and {}", proj.pattern, s.size, t.size),
                )),
                Pattern::Hollow if s.size < 2 => out.push(Diagnostic::error(
                    "shape_mismatch",
                    format!("{path}.pattern"),
                    "hollow projection needs at least 2 neurons",
                )),
                _ => {}
            }
        }
    }

    for (index, rec) in spec.records.iter().enumerate() {
        let path = format!("records.{index}");
        match spec.population(&rec.population) {
            None => out.push(Diagnostic::error(
                "unknown_population",
                format!("{path}.population"),
                format!("record names unknown population `{}`", rec.population),
            )),
            Some(pop) => {
                let ok = matches!(
                    (&pop.model, rec.what),
                    (_, Observable::Spikes)
                        | (ModelSpec::Lif { .. }, Observable::Voltage | Observable::Current | Observable::Threshold)
                        | (ModelSpec::Raf { .. }, Observable::Voltage | Observable::AngularVar)
                );
                if !ok {
                    out.push(Diagnostic::error(
                        "unrecordable",
                        format!("{path}.what"),
                        format!("{} population `{}` has no {:?} variable", pop.model.name(), pop.id, rec.what),
                    ));
                }
            }
        }
    }
    out
}

fn check_encoder(encoder: &EncoderSpec, size: usize, dt: f64, dt_ok: bool, path: &str, out: &mut Vec<Diagnostic>) {
    let check_inputs = |inputs: &super::spec::Inputs, unit_range: bool, out: &mut Vec<Diagnostic>| -> Option<Vec<f64>> {
        match inputs.resolve(size) {
            Err(_) => {
                out.push(Diagnostic::error(
                    "shape_mismatch",
                    format!("{path}.inputs"),
                    format!("encoder needs {size} inputs"),
                ));
                None
            }
            Ok(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    let bad = !x.is_finite() || *x < 0.0 || (unit_range && *x > 1.0);
                    if bad {
                        out.push(Diagnostic::error(
                            "input_domain",
                            format!("{path}.inputs.{i}"),
                            format!("input {x} outside {}", if unit_range { "[0, 1]" } else { "[0, inf)" }),
                        ));
                    }
                }
                Some(xs)
            }
        }
    };
    let check_rate = |rate: f64, out: &mut Vec<Diagnostic>| -> Option<f64> {
        if !dt_ok {
            return None;
        }
        match events_per_step(rate, dt) {
            Ok(f) => Some(f),
            Err(e) => {
                out.push(Diagnostic::error("input_domain", format!("{path}.rate_hz"), e.to_string()));
                None
            }
        }
    };
    match encoder {
        EncoderSpec::Bernoulli { inputs } => {
            check_inputs(inputs, true, out);
        }
        EncoderSpec::Poisson { rate_hz, inputs } => {
            let xs = check_inputs(inputs, true, out);
            if let (Some(f_hat), Some(xs)) = (check_rate(*rate_hz, out), xs) {
                let peak = xs.iter().cloned().fold(0.0, f64::max) * f_hat;
                if peak > 1.0 {
                    out.push(Diagnostic::warning(
                        "clamped_event_probability",
                        format!("{path}.rate_hz"),
                        format!("event probability {peak} per step exceeds 1 and is clamped; every step spikes"),
                    ));
                }
            }
        }
        EncoderSpec::Phasor { rate_hz, sigma, inputs } => {
            if let Some(inputs) = inputs {
                check_inputs(inputs, true, out);
            }
            check_rate(*rate_hz, out);
            if !(sigma.is_finite() && *sigma >= 0.0) {
                out.push(Diagnostic::error("input_domain", format!("{path}.sigma"), "sigma must be >= 0"));
            }
        }
        EncoderSpec::Latency {
            inputs,
            tau_in_ms,
            resistance,
            v_thr,
            window_ms,
            ..
        } => {
            check_inputs(inputs, false, out);
            for (name, v) in [
                ("tau_in_ms", *tau_in_ms),
                ("resistance", *resistance),
                ("v_thr", *v_thr),
                ("window_ms", *window_ms),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    out.push(Diagnostic::error("input_domain", format!("{path}.{name}"), format!("{name} must be > 0, got {v}")));
                }
            }
            if dt_ok && window_ms.is_finite() && *window_ms > 0.0 && integral_steps(*window_ms, dt).is_none() {
                out.push(Diagnostic::error(
                    "fractional_window",
                    format!("{path}.window_ms"),
                    format!("window {window_ms} ms is not a whole number of {dt} ms steps"),
                ));
            }
        }
    }
}
