use super::config::RunConfig;
use super::snapshot::Snapshot;
use crate::diagnostics::{DiagnosticsReport, Monitor};
use crate::dynamics::{apply_closure, cfl_dt, checked_advance, health_check, FlowState, Model};
use crate::error::{FscnError, HealthError};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    /// Keep the state at every output time in the outcome.
    pub keep_states: bool,
    /// Smallest eps the default grid stretch must resolve; the run's own
    /// eps when `None`.
    pub eps_min: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: Model,
    pub reports: Vec<DiagnosticsReport>,
    /// States at the output times, when requested.
    pub states: Vec<FlowState>,
    /// Last good state.
    pub last: FlowState,
    pub steps: u64,
    pub abort: Option<HealthError>,
}

impl RunOutcome {
    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// Number of report rows with any health flag down.
    pub fn monitor_trips(&self) -> usize {
        self.reports
            .iter()
            .filter(|r| {
                let h = &r.health;
                !(h.density_ok && h.jacobian_ok && h.surface_ok && h.taylor_ok.unwrap_or(true))
            })
            .count()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    preset: &'a str,
    steps: u64,
    t_final: f64,
    slope: f64,
    aborted: bool,
    abort_reason: Option<String>,
    initial_energy: Option<f64>,
    max_energy_imbalance: f64,
    theta_max: f64,
    monitor_trips: usize,
    last_report: Option<&'a DiagnosticsReport>,
}

/// 17 significant digits, exact round trip.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, reports: &[DiagnosticsReport]) -> Result<(), FscnError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FscnError::Format(e.to_string()))?;
    let io = |e: csv::Error| FscnError::Format(e.to_string());
    w.write_record(DiagnosticsReport::columns()).map_err(io)?;
    for r in reports {
        w.write_record(r.row().into_iter().map(fmt_f64)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &RunConfig, output_dir: Option<&Path>) -> Result<RunOutcome, FscnError> {
    run_with(
        cfg,
        &RunOptions {
            output_dir: output_dir.map(Path::to_path_buf),
            ..Default::default()
        },
    )
}

/// Integrates to `t_end` (or `max_steps`), reporting at multiples of the
/// output interval. A health violation ends the run early with `abort` set
/// and the last good state written to `abort.fscn`; only configuration and
/// i/o problems are returned as errors.
pub fn run_with(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, FscnError> {
    for w in cfg.validate()? {
        log::warn!("{w}");
    }
    let (model, mut s) = cfg.build(opts.eps_min.unwrap_or(cfg.physics.eps))?;
    if let Some(dir) = &opts.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    }
    let mut out = RunOutcome {
        model: model.clone(),
        reports: Vec::new(),
        states: Vec::new(),
        last: s.clone(),
        steps: 0,
        abort: None,
    };
    let m = &model;
    let mut monitor = Monitor::new(cfg.diagnostics.theta());

    // geometry first: a folded chart makes the closure meaningless
    let start = health_check(m, &s)
        .and_then(|_| apply_closure(m, &mut s))
        .and_then(|_| health_check(m, &s));
    if let Err(e) = start {
        return finish_abort(out, cfg, opts, e);
    }
    out.last = s.clone();
    let mut snap_index = 0usize;
    let mut emit = |out: &mut RunOutcome, monitor: &mut Monitor, s: &FlowState| -> Result<(), FscnError> {
        let rep = monitor.report(m, s)?;
        log::info!(
            "t = {:.6}  E = {:.12e}  imbalance = {:.3e}  theta = {:.6e}",
            rep.t,
            rep.energy.total(),
            rep.energy_imbalance,
            rep.theta
        );
        out.reports.push(rep);
        if opts.keep_states {
            out.states.push(s.clone());
        }
        if cfg.diagnostics.snapshots {
            if let Some(dir) = &opts.output_dir {
                Snapshot::from_state(m, s).save(&dir.join(format!("snap_{snap_index:04}.fscn")))?;
            }
        }
        snap_index += 1;
        Ok(())
    };
    if let Err(e) = emit(&mut out, &mut monitor, &s) {
        return health_or(out, cfg, opts, e);
    }

    let st = &cfg.stepper;
    let interval = cfg.diagnostics.output_interval;
    let t_end = st.t_end;
    let tol = 1e-12 * t_end.max(1.0);
    // a restart resumes at the first output time after its own
    let mut k = (s.t / interval + 1e-9).floor() as u64 + 1;
    while s.t < t_end - tol {
        if st.max_steps.is_some_and(|n| out.steps >= n) {
            break;
        }
        let next_out = (k as f64 * interval).min(t_end);
        let mut dt = cfl_dt(m, &s, st.cfl);
        if let Some(cap) = st.dt_max {
            dt = dt.min(cap);
        }
        let remaining = next_out - s.t;
        let hit = remaining <= dt;
        if hit {
            dt = remaining;
        } else if remaining < 2.0 * dt {
            // two equal steps rather than a sliver
            dt = 0.5 * remaining;
        }
        s = match checked_advance(m, &s, dt, st.cfl) {
            Ok(n) => n,
            Err(e) => {
                out.last = s;
                return health_or(out, cfg, opts, e);
            }
        };
        out.steps += 1;
        if hit {
            s.t = next_out;
            k += 1;
            if let Err(e) = emit(&mut out, &mut monitor, &s) {
                out.last = s;
                return health_or(out, cfg, opts, e);
            }
        } else if let Err(e) = monitor.observe_energy(m, &s) {
            out.last = s;
            return health_or(out, cfg, opts, e);
        }
        out.last = s.clone();
    }
    // a step limit can stop between output times; report the final state
    if out.reports.last().is_some_and(|r| r.t != s.t) {
        if let Err(e) = emit(&mut out, &mut monitor, &s) {
            return health_or(out, cfg, opts, e);
        }
    }
    write_outputs(&out, cfg, opts, &monitor)?;
    Ok(out)
}

fn health_or(out: RunOutcome, cfg: &RunConfig, opts: &RunOptions, e: FscnError) -> Result<RunOutcome, FscnError> {
    match e {
        FscnError::Health(h) => finish_abort(out, cfg, opts, h),
        other => Err(other),
    }
}

fn finish_abort(mut out: RunOutcome, cfg: &RunConfig, opts: &RunOptions, e: HealthError) -> Result<RunOutcome, FscnError> {
    log::error!("health abort at t = {}: {e}", out.last.t);
    if let Some(dir) = &opts.output_dir {
        Snapshot::from_state(&out.model, &out.last).save(&dir.join("abort.fscn"))?;
        write_csv(&dir.join("timeseries.csv"), &out.reports)?;
    }
    out.abort = Some(e);
    if let Some(dir) = &opts.output_dir {
        write_summary(&dir.join("report.json"), &out, cfg.initial.name(), None)?;
    }
    Ok(out)
}

fn write_summary(path: &Path, out: &RunOutcome, preset: &str, e0: Option<f64>) -> Result<(), FscnError> {
    let summary = Summary {
        preset,
        steps: out.steps,
        t_final: out.last.t,
        slope: out.model.a,
        aborted: out.aborted(),
        abort_reason: out.abort.as_ref().map(|e| e.to_string()),
        initial_energy: e0,
        max_energy_imbalance: out.reports.iter().map(|r| r.energy_imbalance.abs()).fold(0.0, f64::max),
        theta_max: out.reports.iter().map(|r| r.theta).fold(0.0, f64::max),
        monitor_trips: out.monitor_trips(),
        last_report: out.reports.last(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| FscnError::Format(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_outputs(out: &RunOutcome, cfg: &RunConfig, opts: &RunOptions, monitor: &Monitor) -> Result<(), FscnError> {
    let Some(dir) = &opts.output_dir else {
        return Ok(());
    };
    write_csv(&dir.join("timeseries.csv"), &out.reports)?;
    Snapshot::from_state(&out.model, &out.last).save(&dir.join("final.fscn"))?;
    write_summary(&dir.join("report.json"), out, cfg.initial.name(), monitor.initial_energy())
}
