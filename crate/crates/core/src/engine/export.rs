//! Recording exports: NDJSON events, dense CSV, and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

use super::network::Role;
use super::recording::{Raster, Recording, Trace};
use super::spec::Observable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    #[default]
    Ndjson,
    Csv,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = SnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ndjson" => Ok(ExportFormat::Ndjson),
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(SnnError::Parameter(format!("unknown export format `{other}`"))),
        }
    }
}

#[derive(Serialize)]
struct EventLine<'a> {
    step: u64,
    t_ms: f64,
    population: &'a str,
    neuron: u32,
}

/// One JSON object per event, ordered by step, then population, then neuron.
pub fn events_ndjson(rec: &Recording) -> String {
    events_ndjson_range(rec, 0, u64::MAX)
}

/// As [`events_ndjson`], restricted to steps in `[from, to)`.
pub fn events_ndjson_range(rec: &Recording, from: u64, to: u64) -> String {
    let mut cursors: Vec<usize> = rec
        .rasters
        .iter()
        .map(|r| r.events.partition_point(|(s, _)| *s < from))
        .collect();
    let mut out = String::new();
    loop {
        let next = rec
            .rasters
            .iter()
            .zip(&cursors)
            .filter_map(|(r, &c)| r.events.get(c).map(|e| e.0))
            .min();
        let Some(step) = next else { break };
        if step >= to {
            break;
        }
        for (raster, cursor) in rec.rasters.iter().zip(cursors.iter_mut()) {
            while let Some(&(s, n)) = raster.events.get(*cursor) {
                if s != step {
                    break;
                }
                let line = EventLine {
                    step,
                    t_ms: step as f64 * rec.meta.dt_ms,
                    population: &raster.population,
                    neuron: n,
                };
                out.push_str(&serde_json::to_string(&line).expect("event serializes"));
                out.push('\n');
                *cursor += 1;
            }
        }
    }
    out
}

/// Dense 0/1 matrix, one row per step: `step,t_ms,n0,n1,...`.
pub fn raster_csv(rec: &Recording, raster: &Raster) -> String {
    let mut out = String::from("step,t_ms");
    for n in 0..raster.size {
        let _ = write!(out, ",n{n}");
    }
    out.push('\n');
    let mut events = raster.events.iter().peekable();
    let mut row = vec![false; raster.size];
    for step in 0..rec.meta.steps {
        row.fill(false);
        while let Some(&&(s, n)) = events.peek() {
            if s != step {
                break;
            }
            row[n as usize] = true;
            events.next();
        }
        let _ = write!(out, "{step},{}", step as f64 * rec.meta.dt_ms);
        for &bit in &row {
            out.push_str(if bit { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

/// Parses [`raster_csv`] output back into an event list.
pub fn raster_from_csv(population: &str, role: Role, text: &str) -> Result<Raster> {
    let bad = |msg: String| SnnError::InputDomain(format!("raster csv: {msg}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 || columns[0] != "step" || columns[1] != "t_ms" {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    let size = columns.len() - 2;
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(format!("line {}: expected {} fields", i + 2, columns.len())));
        }
        let step: u64 = fields[0]
            .parse()
            .map_err(|_| bad(format!("line {}: bad step `{}`", i + 2, fields[0])))?;
        for (n, cell) in fields[2..].iter().enumerate() {
            match *cell {
                "0" => {}
                "1" => events.push((step, n as u32)),
                other => return Err(bad(format!("line {}: bad cell `{other}`", i + 2))),
            }
        }
    }
    Ok(Raster {
        population: population.to_string(),
        size,
        role,
        events,
    })
}

/// `step,t_ms,n0,...` with `t_ms` at the end of each step.
pub fn trace_csv(rec: &Recording, trace: &Trace) -> String {
    let width = trace.samples.first().map_or(0, Vec::len);
    let mut out = String::from("step,t_ms");
    for n in 0..width {
        let _ = write!(out, ",n{n}");
    }
    out.push('\n');
    for (k, sample) in trace.samples.iter().enumerate() {
        let _ = write!(out, "{k},{}", (k + 1) as f64 * rec.meta.dt_ms);
        for v in sample {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

const PLOT_WIDTH: f64 = 800.0;
const MARGIN: f64 = 40.0;
const ROW_HEIGHT: f64 = 4.0;

/// Raster plot of every neuron population stacked top to bottom. Excitatory
/// ticks are black and inhibitory ticks red. Input populations are only
/// drawn when the recording has nothing else.
pub fn raster_svg(rec: &Recording) -> String {
    let mut shown: Vec<&Raster> = rec.rasters.iter().filter(|r| r.role != Role::Input).collect();
    if shown.is_empty() {
        shown = rec.rasters.iter().collect();
    }
    let rows: usize = shown.iter().map(|r| r.size).sum();
    let plot_height = (rows as f64 * ROW_HEIGHT).max(ROW_HEIGHT);
    let height = plot_height + 2.0 * MARGIN;
    let width = PLOT_WIDTH + 2.0 * MARGIN;
    let steps = rec.meta.steps.max(1) as f64;
    let x_of = |step: u64| MARGIN + (step as f64 + 0.5) / steps * PLOT_WIDTH;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT_WIDTH}" height="{plot_height:.1}" fill="none" stroke="gray" stroke-width="0.5"/>"#
    );
    let mut row0 = 0usize;
    for raster in &shown {
        let color = match raster.role {
            Role::Inhibitory => "red",
            _ => "black",
        };
        let top = MARGIN + row0 as f64 * ROW_HEIGHT;
        let _ = writeln!(
            out,
            r#"<text x="2" y="{:.1}" font-size="9" font-family="monospace">{}</text>"#,
            top + 9.0,
            xml_escape(&raster.population)
        );
        let _ = writeln!(out, r#"<g stroke="{color}" stroke-width="1">"#);
        for &(step, n) in &raster.events {
            let x = x_of(step);
            let y = top + n as f64 * ROW_HEIGHT;
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
                y + 0.5,
                y + ROW_HEIGHT - 0.5
            );
        }
        out.push_str("</g>\n");
        row0 += raster.size;
    }
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="10" font-family="monospace">0 ms</text>"#,
        height - MARGIN / 2.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="10" font-family="monospace" text-anchor="end">{} ms</text>"#,
        MARGIN + PLOT_WIDTH,
        height - MARGIN / 2.0,
        rec.meta.steps as f64 * rec.meta.dt_ms
    );
    out.push_str("</svg>\n");
    out
}

/// Line plot of one recorded variable, one polyline per neuron.
pub fn trace_svg(rec: &Recording, trace: &Trace) -> String {
    let plot_height = 300.0;
    let width = PLOT_WIDTH + 2.0 * MARGIN;
    let height = plot_height + 2.0 * MARGIN;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in trace.samples.iter().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let steps = trace.samples.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="20" font-size="11" font-family="monospace">{} {} [{lo:.4}, {hi:.4}]</text>"#,
        xml_escape(&trace.population),
        observable_name(trace.variable)
    );
    let width_n = trace.samples.first().map_or(0, Vec::len);
    for n in 0..width_n {
        let mut points = String::new();
        for (k, sample) in trace.samples.iter().enumerate() {
            let x = MARGIN + (k as f64 + 1.0) / steps * PLOT_WIDTH;
            let y = MARGIN + (hi - sample[n]) / (hi - lo) * plot_height;
            let _ = write!(points, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="hsl({},70%,35%)" stroke-width="1" points="{}"/>"#,
            (n * 47) % 360,
            points.trim_end()
        );
    }
    let _ = rec;
    out.push_str("</svg>\n");
    out
}

pub fn observable_name(what: Observable) -> &'static str {
    match what {
        Observable::Spikes => "spikes",
        Observable::Voltage => "voltage",
        Observable::Current => "current",
        Observable::Threshold => "threshold",
        Observable::AngularVar => "angular_var",
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes the artifacts for `format` into `dir` and returns their paths.
pub fn write_exports(rec: &Recording, dir: &Path, format: ExportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    match format {
        ExportFormat::Ndjson => put("events.ndjson".into(), events_ndjson(rec))?,
        ExportFormat::Csv => {
            for raster in &rec.rasters {
                put(format!("{}.spikes.csv", safe_name(&raster.population)), raster_csv(rec, raster))?;
            }
            for trace in &rec.traces {
                put(
                    format!("{}.{}.csv", safe_name(&trace.population), observable_name(trace.variable)),
                    trace_csv(rec, trace),
                )?;
            }
        }
        ExportFormat::Svg => {
            put("raster.svg".into(), raster_svg(rec))?;
            for trace in &rec.traces {
                put(
                    format!("{}.{}.svg", safe_name(&trace.population), observable_name(trace.variable)),
                    trace_svg(rec, trace),
                )?;
            }
        }
    }
    Ok(written)
}
