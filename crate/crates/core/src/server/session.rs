//! One simulation session, owned by a dedicated thread and driven by
//! commands from the HTTP layer.

use std::sync::mpsc::{self, Receiver, TryRecvError};
use std::thread;

use tokio::sync::{mpsc::UnboundedSender, oneshot};

use crate::analysis::compute_statistics;
use crate::diagnostics::Diagnostic;
use crate::engine::{Network, Recorder, Recording};
use crate::error::{Result, SnnError};

use super::protocol::{
    Frame, ParamPatch, PopulationInfo, PopulationSpikes, ServerMessage, SessionInfo, StatsResponse, Status, TraceSample,
};
use super::ApiError;

type Reply<T> = oneshot::Sender<std::result::Result<T, ApiError>>;

pub(crate) enum Command {
    Info(Reply<SessionInfo>),
    Run { until_ms: Option<f64>, reply: Reply<SessionInfo> },
    Pause(Reply<SessionInfo>),
    Patch { params: ParamPatch, reply: Reply<SessionInfo> },
    Stats { window_ms: f64, reply: Reply<StatsResponse> },
    Recording(Reply<Recording>),
    Subscribe { decimation: u64, sink: UnboundedSender<ServerMessage>, reply: Reply<u64> },
    SetDecimation { subscriber: u64, decimation: u64 },
    Unsubscribe(u64),
    Close,
}

struct Subscriber {
    id: u64,
    sink: UnboundedSender<ServerMessage>,
    decimation: u64,
    /// First step not yet delivered.
    next_from: u64,
}

struct Session {
    id: String,
    network: Network,
    recorder: Recorder,
    status: Status,
    until_step: Option<u64>,
    error: Option<String>,
    subscribers: Vec<Subscriber>,
    next_subscriber: u64,
}

/// Starts the session thread and returns its command channel.
pub(crate) fn spawn(id: String, network: Network) -> Result<(mpsc::Sender<Command>, thread::JoinHandle<()>)> {
    let (tx, rx) = mpsc::channel();
    let recorder = Recorder::new(&network);
    let session = Session {
        id: id.clone(),
        network,
        recorder,
        status: Status::Idle,
        until_step: None,
        error: None,
        subscribers: Vec::new(),
        next_subscriber: 0,
    };
    let handle = thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || session.serve(rx))?;
    Ok((tx, handle))
}

fn conflict(status: Status, action: &str) -> ApiError {
    ApiError::conflict(format!("cannot {action} a session that is {}", status_name(status)))
}

fn status_name(status: Status) -> &'static str {
    match status {
        Status::Idle => "idle",
        Status::Running => "running",
        Status::Paused => "paused",
        Status::Done => "done",
        Status::Failed => "failed",
    }
}

impl Session {
    fn serve(mut self, rx: Receiver<Command>) {
        loop {
            let command = if self.status == Status::Running {
                match rx.try_recv() {
                    Ok(c) => Some(c),
                    Err(TryRecvError::Empty) => None,
                    Err(TryRecvError::Disconnected) => break,
                }
            } else {
                match rx.recv() {
                    Ok(c) => Some(c),
                    Err(_) => break,
                }
            };
            match command {
                Some(Command::Close) => {
                    self.broadcast(ServerMessage::Closed {
                        reason: "session deleted".into(),
                    });
                    break;
                }
                Some(c) => self.handle(c),
                None => self.advance(),
            }
        }
        log::debug!("session {} stopped", self.id);
    }

    fn info(&self) -> SessionInfo {
        let step = self.network.current_step();
        SessionInfo {
            id: self.id.clone(),
            status: self.status,
            step,
            t_ms: step as f64 * self.network.dt_ms(),
            total_steps: self.network.total_steps(),
            dt_ms: self.network.dt_ms(),
            populations: self
                .network
                .population_ids()
                .map(|p| PopulationInfo {
                    id: p.to_string(),
                    size: self.network.population_size(p).unwrap_or(0),
                    role: self.network.role(p).expect("listed population"),
                })
                .collect(),
            diagnostics: self.network.warnings().to_vec(),
            error: self.error.clone(),
        }
    }

    fn handle(&mut self, command: Command) {
        match command {
            Command::Info(reply) => {
                let _ = reply.send(Ok(self.info()));
            }
            Command::Run { until_ms, reply } => {
                let _ = reply.send(self.start(until_ms));
            }
            Command::Pause(reply) => {
                let result = if self.status == Status::Running {
                    self.set_status(Status::Paused);
                    Ok(self.info())
                } else {
                    Err(conflict(self.status, "pause"))
                };
                let _ = reply.send(result);
            }
            Command::Patch { params, reply } => {
                let _ = reply.send(self.patch(&params));
            }
            Command::Stats { window_ms, reply } => {
                let rec = self.recorder.recording();
                let stats = rec
                    .rasters
                    .iter()
                    .map(|r| compute_statistics(rec, &r.population, window_ms))
                    .collect::<Result<Vec<_>>>()
                    .map(|populations| StatsResponse {
                        step: rec.meta.steps,
                        t_ms: rec.meta.steps as f64 * rec.meta.dt_ms,
                        window_ms,
                        populations,
                    })
                    .map_err(ApiError::from);
                let _ = reply.send(stats);
            }
            Command::Recording(reply) => {
                let mut rec = self.recorder.snapshot();
                rec.meta.complete = self.status == Status::Done;
                rec.meta.error = self.error.clone();
                let _ = reply.send(Ok(rec));
            }
            Command::Subscribe { decimation, sink, reply } => {
                if self.status.is_terminal() {
                    let _ = reply.send(Err(conflict(self.status, "stream")));
                    return;
                }
                if decimation == 0 {
                    let _ = reply.send(Err(ApiError::bad_request("decimation must be at least 1")));
                    return;
                }
                let id = self.next_subscriber;
                self.next_subscriber += 1;
                self.subscribers.push(Subscriber {
                    id,
                    sink,
                    decimation,
                    next_from: self.network.current_step(),
                });
                let _ = reply.send(Ok(id));
            }
            Command::SetDecimation { subscriber, decimation } => {
                if let Some(s) = self.subscribers.iter_mut().find(|s| s.id == subscriber) {
                    if decimation == 0 {
                        let _ = s.sink.send(ServerMessage::Error {
                            message: "decimation must be at least 1".into(),
                        });
                    } else {
                        s.decimation = decimation;
                    }
                }
                self.emit_frames(false);
            }
            Command::Unsubscribe(id) => self.subscribers.retain(|s| s.id != id),
            Command::Close => unreachable!("handled by the serve loop"),
        }
    }

    fn start(&mut self, until_ms: Option<f64>) -> std::result::Result<SessionInfo, ApiError> {
        if !matches!(self.status, Status::Idle | Status::Paused) {
            return Err(conflict(self.status, "run"));
        }
        let until_step = match until_ms {
            None => None,
            Some(ms) if !(ms.is_finite() && ms > 0.0) => {
                return Err(ApiError::bad_request(format!("until_ms must be positive, got {ms}")))
            }
            Some(ms) => {
                let step = ((ms / self.network.dt_ms()).round() as u64).min(self.network.total_steps());
                if step <= self.network.current_step() {
                    return Err(ApiError::bad_request(format!(
                        "until_ms {ms} is not beyond the current time {}",
                        self.network.current_step() as f64 * self.network.dt_ms()
                    )));
                }
                Some(step)
            }
        };
        self.until_step = until_step;
        self.set_status(Status::Running);
        Ok(self.info())
    }

    /// Applies every entry or none. Changes take effect from the next step.
    fn patch(&mut self, params: &ParamPatch) -> std::result::Result<SessionInfo, ApiError> {
        if self.status.is_terminal() {
            return Err(conflict(self.status, "patch"));
        }
        if params.is_empty() {
            return Err(ApiError::bad_request("empty parameter patch"));
        }
        let mut candidate = self.network.clone();
        let mut diagnostics = Vec::new();
        for (path, &value) in params {
            match candidate.set_param(path, value) {
                Ok(()) => {}
                Err(SnnError::Validation(diags)) => diagnostics.extend(diags.into_iter().map(|mut d| {
                    // parameter checks know only the field name
                    d.path = path.clone();
                    d
                })),
                Err(e) => diagnostics.push(Diagnostic::error("invalid_parameter", path.clone(), e.to_string())),
            }
        }
        if diagnostics.iter().any(Diagnostic::is_error) {
            return Err(ApiError::invalid("parameter patch rejected", diagnostics));
        }
        self.network = candidate;
        Ok(self.info())
    }

    fn advance(&mut self) {
        if let Err(e) = self.network.step() {
            self.error = Some(e.to_string());
            self.set_status(Status::Failed);
            return;
        }
        self.recorder.capture(&self.network);
        if self.network.is_finished() {
            self.set_status(Status::Done);
        } else if Some(self.network.current_step()) == self.until_step {
            self.until_step = None;
            self.set_status(Status::Paused);
        } else {
            self.emit_frames(false);
        }
    }

    fn set_status(&mut self, status: Status) {
        self.status = status;
        self.emit_frames(status.is_terminal());
        self.broadcast(ServerMessage::Status {
            status,
            step: self.network.current_step(),
        });
    }

    /// Sends every subscriber its due frames; `flush` also sends a final
    /// short frame for steps not yet delivered.
    fn emit_frames(&mut self, flush: bool) {
        let executed = self.network.current_step();
        let mut frames = Vec::new();
        for (i, s) in self.subscribers.iter_mut().enumerate() {
            while s.next_from + s.decimation <= executed {
                frames.push((i, s.next_from, s.next_from + s.decimation));
                s.next_from += s.decimation;
            }
            if flush && s.next_from < executed {
                frames.push((i, s.next_from, executed));
                s.next_from = executed;
            }
        }
        let mut dead = Vec::new();
        for (i, from, to) in frames {
            let frame = self.frame(from, to);
            if self.subscribers[i].sink.send(ServerMessage::Frame(frame)).is_err() {
                dead.push(self.subscribers[i].id);
            }
        }
        self.subscribers.retain(|s| !dead.contains(&s.id));
    }

    /// Frame for steps `[from, to)`.
    fn frame(&self, from: u64, to: u64) -> Frame {
        let rec = self.recorder.recording();
        let last = to - 1;
        Frame {
            from_step: from,
            step: last,
            t_ms: last as f64 * rec.meta.dt_ms,
            spikes: rec
                .rasters
                .iter()
                .map(|r| PopulationSpikes {
                    population: r.population.clone(),
                    events: r.events_between(from, to).to_vec(),
                })
                .collect(),
            traces: rec
                .traces
                .iter()
                .map(|t| TraceSample {
                    population: t.population.clone(),
                    variable: t.variable,
                    values: t.samples[last as usize].clone(),
                })
                .collect(),
        }
    }

    fn broadcast(&mut self, message: ServerMessage) {
        self.subscribers.retain(|s| s.sink.send(message.clone()).is_ok());
    }
}
