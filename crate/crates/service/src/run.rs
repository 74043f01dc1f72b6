//! A live run: one worker thread, a shared event log and a parameter mailbox.

use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use otf_core::api::{Action, CreateRunRequest, EventsPage, ParamAck, RunInfo, MAX_EVENT_BATCH};
use otf_core::config::{AlgoConfig, Algorithm};
use otf_core::harness::{RunRecord, SCHEMA_VERSION};
use otf_core::live::{Event, Param, RunState, Runner, Source, Summary};
use otf_core::ObjectiveId;

use crate::error::{ApiError, ApiResult};

struct Inner {
    state: RunState,
    events: Vec<Event>,
    mailbox: Vec<(Param, f64)>,
    /// Iteration before which the mailbox is drained next.
    next_boundary: u64,
    summary: Option<Summary>,
}

pub struct LiveRun {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub objective: ObjectiveId,
    pub seed: u64,
    pub tick_ms: u64,
    pub config: AlgoConfig,
    pub request: CreateRunRequest,
    inner: Mutex<Inner>,
    changed: Condvar,
}

impl std::fmt::Debug for LiveRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiveRun").field("run_id", &self.run_id).finish()
    }
}

impl LiveRun {
    /// Validates the request, registers the run in the created state and
    /// spawns its worker, which idles until started.
    pub fn spawn(run_id: String, request: CreateRunRequest, default_tick_ms: u64) -> ApiResult<Arc<Self>> {
        let objective = request.objective();
        let config = request.config.resolve(request.algorithm, objective, request.seed)?;
        let runner = Runner::new(request.algorithm, objective, &config, request.seed)?;
        let run = Arc::new(LiveRun {
            run_id,
            algorithm: request.algorithm,
            objective,
            seed: request.seed,
            tick_ms: request.tick_ms.unwrap_or(default_tick_ms),
            config,
            request,
            inner: Mutex::new(Inner {
                state: RunState::Created,
                events: Vec::new(),
                mailbox: Vec::new(),
                next_boundary: 0,
                summary: None,
            }),
            changed: Condvar::new(),
        });
        let worker = Arc::clone(&run);
        thread::Builder::new()
            .name(format!("run-{}", run.run_id))
            .spawn(move || worker.work(runner))
            .map_err(|e| ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        Ok(run)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn state(&self) -> RunState {
        self.lock().state
    }

    pub fn info(&self) -> RunInfo {
        let g = self.lock();
        RunInfo {
            run_id: self.run_id.clone(),
            state: g.state,
            algorithm: self.algorithm,
            objective: self.objective,
            seed: self.seed,
            tick_ms: self.tick_ms,
            config: self.config.clone(),
            request: self.request.clone(),
            event_count: g.events.len() as u64,
            next_boundary: g.next_boundary,
            summary: g.summary.clone(),
        }
    }

    pub fn transition(&self, action: Action) -> ApiResult<RunState> {
        let mut g = self.lock();
        let next = match (g.state, action) {
            (RunState::Created, Action::Start) => RunState::Running,
            (RunState::Running, Action::Pause) => RunState::Paused,
            (RunState::Paused, Action::Resume) => RunState::Running,
            (RunState::Running | RunState::Paused, Action::Stop) => RunState::Stopped,
            (from, action) => {
                return Err(ApiError::conflict(format!(
                    "cannot {} a run that is {}",
                    action_name(action),
                    state_name(from)
                )))
            }
        };
        g.state = next;
        drop(g);
        self.changed.notify_all();
        Ok(next)
    }

    pub fn adjust(&self, parameter: &str, value: f64) -> ApiResult<ParamAck> {
        let p: Param = parameter.parse().map_err(ApiError::from)?;
        if !p.applies_to(self.algorithm) {
            return Err(
                ApiError::bad_request(format!("`{p}` is not adjustable for {}", self.algorithm))
                    .with_field("parameter"),
            );
        }
        p.validate_value(value)
            .map_err(|_| ApiError::bad_request(format!("{value} is out of range for `{p}`")).with_field("value"))?;
        let mut g = self.lock();
        match g.state {
            RunState::Running | RunState::Paused => {}
            s => return Err(ApiError::conflict(format!("a {} run is not adjustable", state_name(s)))),
        }
        g.mailbox.push((p, value));
        Ok(ParamAck {
            applied_at_iteration: g.next_boundary,
            requested_at_cursor: g.events.len() as u64,
        })
    }

    pub fn events(&self, cursor: u64) -> EventsPage {
        let g = self.lock();
        let len = g.events.len() as u64;
        if cursor >= len {
            return EventsPage {
                events: Vec::new(),
                next_cursor: cursor,
            };
        }
        let start = cursor as usize;
        let end = (start + MAX_EVENT_BATCH).min(g.events.len());
        EventsPage {
            events: g.events[start..end].to_vec(),
            next_cursor: end as u64,
        }
    }

    pub fn record(&self) -> RunRecord {
        let g = self.lock();
        RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id: self.run_id.clone(),
            algorithm: self.algorithm,
            objective: self.objective,
            master_seed: self.seed,
            config: self.config.clone(),
            events: g.events.clone(),
            summary: g.summary.clone().unwrap_or_default(),
        }
    }

    /// Blocks until the run reaches a terminal state or `timeout` passes.
    pub fn wait_terminal(&self, timeout: Duration) -> RunState {
        let g = self.lock();
        let (g, _) = self
            .changed
            .wait_timeout_while(g, timeout, |i| !i.state.is_terminal())
            .unwrap_or_else(|p| p.into_inner());
        g.state
    }

    fn work(self: Arc<Self>, mut runner: Runner) {
        let started = Instant::now();
        let mut logged_pause = false;
        loop {
            let mut g = self.lock();
            // Iteration boundary: honor pause/stop, then drain the mailbox once.
            loop {
                match g.state {
                    RunState::Running => {
                        if logged_pause {
                            g.events.push(Event::state(runner.next_iteration(), RunState::Running));
                            logged_pause = false;
                        }
                        break;
                    }
                    RunState::Paused => {
                        if !logged_pause {
                            g.events.push(Event::state(runner.next_iteration(), RunState::Paused));
                            logged_pause = true;
                        }
                        g = self.changed.wait(g).unwrap_or_else(|p| p.into_inner());
                    }
                    RunState::Created => {
                        g = self.changed.wait(g).unwrap_or_else(|p| p.into_inner());
                    }
                    RunState::Stopped | RunState::Finished => {
                        self.seal(&mut g, &runner, started, RunState::Stopped);
                        return;
                    }
                }
            }
            let pending = std::mem::take(&mut g.mailbox);
            if !pending.is_empty() {
                match runner.apply_overrides(&pending, Source::Human) {
                    Ok(evs) => g.events.extend(evs),
                    Err(e) => tracing::warn!(run = %self.run_id, error = %e, "override rejected"),
                }
            }
            g.next_boundary = runner.next_iteration() + 1;
            drop(g);

            let stepped = runner.step();
            let mut g = self.lock();
            match stepped {
                Ok(Some(ev)) => g.events.push(ev),
                Ok(None) => {}
                Err(e) => {
                    tracing::error!(run = %self.run_id, error = %e, "run failed");
                    self.seal(&mut g, &runner, started, RunState::Stopped);
                    return;
                }
            }
            if runner.is_finished() {
                let end = if g.state == RunState::Stopped {
                    RunState::Stopped
                } else {
                    RunState::Finished
                };
                self.seal(&mut g, &runner, started, end);
                return;
            }
            g.next_boundary = runner.next_iteration();
            if self.tick_ms > 0 {
                let deadline = Instant::now() + Duration::from_millis(self.tick_ms);
                while g.state == RunState::Running {
                    let now = Instant::now();
                    if now >= deadline {
                        break;
                    }
                    g = self
                        .changed
                        .wait_timeout(g, deadline - now)
                        .unwrap_or_else(|p| p.into_inner())
                        .0;
                }
            }
        }
    }

    fn seal(&self, g: &mut MutexGuard<'_, Inner>, runner: &Runner, started: Instant, state: RunState) {
        g.state = state;
        g.mailbox.clear();
        g.next_boundary = runner.next_iteration();
        g.events.push(Event::state(runner.next_iteration(), state));
        let mut summary = runner.summary();
        summary.wall_time_ms = started.elapsed().as_millis() as u64;
        g.summary = Some(summary);
        self.changed.notify_all();
    }
}

fn action_name(a: Action) -> &'static str {
    match a {
        Action::Start => "start",
        Action::Pause => "pause",
        Action::Resume => "resume",
        Action::Stop => "stop",
    }
}

fn state_name(s: RunState) -> &'static str {
    match s {
        RunState::Created => "created",
        RunState::Running => "running",
        RunState::Paused => "paused",
        RunState::Finished => "finished",
        RunState::Stopped => "stopped",
    }
}
