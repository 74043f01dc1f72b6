use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use otf_client::{Client, ClientError};
use otf_core::api::{Action, CreateRunRequest};
use otf_core::config::Algorithm;
use otf_core::controller::{self, ControllerState, TuneOptions};
use otf_core::harness::batch::{records_csv, run_batch};
use otf_core::harness::export::{fmt_real, histogram_csv, read_record, tune_csv, write_atomic, write_json, CsvTable};
use otf_core::harness::svg::{write_svg, PlotData, PlotKind, SvgOptions};
use otf_core::harness::{run_experiment, RunRecord};
use otf_core::live::TracePayload;
use otf_core::mcmc::density_histogram;
use otf_core::Error;
use otf_service::{ServeConfig, Server};

use crate::args::*;
use crate::CliError;

const HEATMAP_BINS: usize = 30;

/// Maps a core error onto the exit-code contract: configuration problems
/// are usage errors naming the flag, everything else is a runtime error.
fn core_err(e: Error) -> CliError {
    match &e {
        Error::Config { field, reason } => CliError::Usage(format!("{}: {reason}", flag_for(field))),
        Error::Pairing { .. } => CliError::Usage(format!("--objective: {e}")),
        Error::Dimension { .. } => CliError::Usage(format!("--init: {e}")),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => run(a),
        Command::Tune(a) => tune(a),
        Command::Batch(a) => batch(a),
        Command::Report(a) => report(a),
        Command::Plot(a) => plot(a),
        Command::Serve(a) => serve(a),
    }
}

fn run(a: RunArgs) -> Result<(), CliError> {
    let algorithm = a.target.algorithm();
    let objective = a.target.objective();
    let params = a.flags.to_params(algorithm);
    let config = params.resolve(algorithm, objective, a.target.seed).map_err(core_err)?;
    let record = match &a.server {
        None => run_experiment(algorithm, objective, &config, a.target.seed).map_err(core_err)?,
        Some(url) => {
            let request = CreateRunRequest {
                algorithm,
                objective: Some(objective),
                config: params,
                seed: a.target.seed,
                tick_ms: Some(a.tick_ms),
            };
            runtime_block(remote_run(url, request))??
        }
    };
    write_json(&a.out, &record).map_err(runtime)
}

fn runtime_block<F: std::future::Future>(f: F) -> Result<F::Output, CliError> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    Ok(rt.block_on(f))
}

async fn remote_run(url: &str, request: CreateRunRequest) -> Result<RunRecord, CliError> {
    let client = Client::new(url);
    let info = client.create_run(&request).await.map_err(client_err)?;
    client.control(&info.run_id, Action::Start).await.map_err(client_err)?;
    client
        .follow(&info.run_id, Duration::from_millis(50), Duration::from_secs(24 * 3600))
        .await
        .map_err(client_err)?;
    client.record(&info.run_id).await.map_err(client_err)
}

fn client_err(e: ClientError) -> CliError {
    match (e.status(), e.field()) {
        (Some(s), Some(field)) if s.as_u16() == 400 => CliError::Usage(format!("{}: {e}", flag_for(field))),
        _ => runtime(e),
    }
}

/// Puts the analog flags into the controller's starting state; every other
/// flag is held fixed across repetitions.
fn initial_state(algorithm: Algorithm, f: &AlgoFlags) -> ControllerState {
    let mut s = controller::default_state(algorithm);
    let (step, budget) = match algorithm {
        Algorithm::Gd => (f.alpha, f.iters),
        Algorithm::Nm => (f.atol, f.maxiter),
        Algorithm::Mh | Algorithm::Sa => (f.std, f.n),
        Algorithm::Ea => (f.std, f.gens),
    };
    if let Some(v) = step {
        s.current_alpha = v;
    }
    if let Some(v) = budget {
        s.current_iterations = v;
    }
    s
}

fn tune(a: TuneArgs) -> Result<(), CliError> {
    let algorithm = a.target.algorithm();
    let objective = a.target.objective();
    let base = a.flags.to_params(algorithm);
    base.resolve(algorithm, objective, a.target.seed).map_err(core_err)?;
    let mut opts = TuneOptions::new(algorithm, a.reps);
    opts.initial = initial_state(algorithm, &a.flags);
    if let Some(t) = a.target_loss {
        if !t.is_finite() || t < 0.0 {
            return Err(CliError::Usage("--target-loss: must be a non-negative number".into()));
        }
        opts.initial.target_loss = t;
    }
    if let Some(cap) = a.iteration_cap {
        opts.initial.iteration_cap = cap;
    }
    opts.base = base;
    let table = controller::tune(algorithm, objective, &opts, a.target.seed).map_err(|e| match &e {
        // The controller names its fields after the gradient-descent analogs.
        Error::Config { field, reason } if field == "alpha" || field == "iterations" || field == "iteration_cap" => {
            let (step, budget) = controller::parameter_names(algorithm);
            let name = match field.as_str() {
                "alpha" => flag_for(step).to_string(),
                "iterations" => flag_for(budget).to_string(),
                _ => "--iteration-cap".to_string(),
            };
            CliError::Usage(format!("{name}: {reason}"))
        }
        _ => core_err(e),
    })?;
    tune_csv(&table).write(&a.out).map_err(runtime)?;
    if let Some(log) = &a.log {
        write_atomic(log, table.jsonl_string().as_bytes()).map_err(runtime)?;
    }
    Ok(())
}

fn batch(a: BatchArgs) -> Result<(), CliError> {
    let algorithm = a.target.algorithm();
    let objective = a.target.objective();
    let params = a.flags.to_params(algorithm);
    let result = run_batch(algorithm, objective, &params, a.reps, a.target.seed).map_err(core_err)?;
    result.table().map_err(runtime)?.write(&a.out).map_err(runtime)?;
    if let Some(path) = &a.summary {
        write_json(path, &result.summary).map_err(runtime)?;
    }
    Ok(())
}

fn load(path: &Path) -> Result<RunRecord, CliError> {
    read_record(path).map_err(runtime)
}

/// Running acceptance rate of a sampler trace, or the algorithm's own
/// per-iteration metric otherwise.
fn loss_series(record: &RunRecord) -> Vec<(f64, f64)> {
    let mut accepted = 0u64;
    let mut seen = 0u64;
    record
        .trace_events()
        .filter_map(|e| {
            let t = e.trace()?;
            let y = match t {
                TracePayload::Chain(c) => {
                    seen += 1;
                    accepted += u64::from(c.accepted);
                    accepted as f64 / seen as f64
                }
                other => other.metric(),
            };
            Some((e.iteration as f64, y))
        })
        .collect()
}

fn fitness_series(record: &RunRecord) -> Result<Vec<(f64, f64)>, CliError> {
    if record.algorithm != Algorithm::Ea {
        return Err(CliError::Usage(format!(
            "--kind: fitness plots need an ea record, got {}",
            record.algorithm
        )));
    }
    Ok(record
        .trace_events()
        .filter_map(|e| match e.trace() {
            Some(TracePayload::Ea(t)) => Some((e.iteration as f64, t.best_fitness)),
            _ => None,
        })
        .collect())
}

fn sampler_histogram(record: &RunRecord) -> Result<otf_core::mcmc::Histogram, CliError> {
    if !matches!(record.algorithm, Algorithm::Mh | Algorithm::Sa) {
        return Err(CliError::Usage(format!(
            "--kind: heatmaps need an mh or sa record, got {}",
            record.algorithm
        )));
    }
    let (accepted, _) = record.chain_points().map_err(runtime)?;
    density_histogram(&accepted, &record.objective.domain(), HEATMAP_BINS).map_err(runtime)
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let record = load(&a.input)?;
    match a.format {
        Format::Json => write_json(&a.out, &record).map_err(runtime),
        Format::Csv => {
            let table = match a.table {
                Table::Summary => records_csv(std::slice::from_ref(&record)).map_err(runtime)?,
                Table::Trace => {
                    let mut t = CsvTable::new(&["iteration", "value"]);
                    for (i, v) in record.metric_series() {
                        t.push(vec![i.to_string(), fmt_real(v)]).map_err(runtime)?;
                    }
                    t
                }
                Table::Histogram => histogram_csv(&sampler_histogram(&record)?),
            };
            table.write(&a.out).map_err(runtime)
        }
    }
}

fn plot(a: PlotArgs) -> Result<(), CliError> {
    let record = load(&a.input)?;
    let (kind, data) = match a.kind {
        PlotKindArg::Loss => (PlotKind::LossCurve, PlotData::Series(loss_series(&record))),
        PlotKindArg::Temperature => {
            let temps = record
                .temperatures()
                .map_err(|e| CliError::Usage(format!("--kind: {e}")))?;
            let series = temps.into_iter().map(|(i, t)| (i as f64, t)).collect();
            (PlotKind::TemperatureCurve, PlotData::Series(series))
        }
        PlotKindArg::Fitness => (PlotKind::FitnessCurve, PlotData::Series(fitness_series(&record)?)),
        PlotKindArg::Heatmap => {
            let h = sampler_histogram(&record)?;
            let d = record.objective.domain();
            let data = PlotData::Grid {
                nx: h.bins,
                ny: h.bins,
                values: h.counts.iter().map(|&c| c as f64).collect(),
                x_range: (d.lower()[0], d.upper()[0]),
                y_range: (d.lower()[1], d.upper()[1]),
            };
            (PlotKind::HeatGrid, data)
        }
    };
    let opts = SvgOptions {
        title: Some(a.title.unwrap_or_else(|| format!("{} on {}", record.algorithm, record.objective))),
        ..SvgOptions::default()
    };
    write_svg(kind, &data, &opts, &a.out).map_err(runtime)
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    if let Some(dir) = &a.assets {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("--assets: {} is not a directory", dir.display())));
        }
    }
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cfg = ServeConfig {
        addr: SocketAddr::new(a.host, a.port),
        tick_ms: a.tick_ms,
        assets: a.assets,
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let server = Server::bind(&cfg).await.map_err(runtime)?;
        eprintln!("listening on http://{}", server.local_addr().map_err(runtime)?);
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}
