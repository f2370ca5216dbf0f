//! Manufactured-solution refinement studies.

use super::config::RunConfig;
use super::run::fmt_f64;
use crate::dynamics::mms::Manufactured;
use crate::dynamics::presets::Preset;
use crate::dynamics::{advance, apply_closure, cfl_dt, BottomBc, FlowState, Model};
use crate::error::{ConfigError, FscnError};
use crate::field::Ops;
use crate::grid::GridParams;
use serde::Serialize;
use std::path::Path;

/// Minimum acceptable observed order.
pub const MIN_ORDER: f64 = 1.5;
/// Errors below this count as exact.
pub const ERROR_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelError {
    pub n_z: usize,
    pub dz_max: f64,
    pub dt: f64,
    pub steps: u64,
    pub rho: f64,
    pub v: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub solution: String,
    pub eps: f64,
    pub t_end: f64,
    pub levels: Vec<LevelError>,
    /// Least-squares orders in dz; `None` when the errors are at the floor.
    pub order_rho: Option<f64>,
    pub order_v: Option<f64>,
    pub order_h: Option<f64>,
    /// Orders between the two finest levels.
    pub last_order_rho: Option<f64>,
    pub last_order_v: Option<f64>,
    pub last_order_h: Option<f64>,
}

impl ConvergenceTable {
    pub fn min_order(&self) -> Option<f64> {
        [self.order_rho, self.order_v, self.order_h]
            .into_iter()
            .flatten()
            .reduce(f64::min)
    }

    pub fn passed(&self) -> bool {
        self.min_order().is_none_or(|o| o >= MIN_ORDER)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n_z,dz_max,dt,steps,err_rho,err_v,err_h\n");
        for l in &self.levels {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                l.n_z,
                fmt_f64(l.dz_max),
                fmt_f64(l.dt),
                l.steps,
                fmt_f64(l.rho),
                fmt_f64(l.v),
                fmt_f64(l.h)
            );
        }
        s
    }
}

fn fit(dz: &[f64], e: &[f64]) -> Option<f64> {
    if e.iter().all(|&x| x < ERROR_FLOOR) {
        return None;
    }
    let lx: Vec<f64> = dz.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.max(ERROR_FLOOR).ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn pair(e0: f64, e1: f64, r: f64) -> Option<f64> {
    (e0 >= ERROR_FLOOR && e1 >= ERROR_FLOOR).then(|| (e0 / e1).ln() / r.ln())
}

/// L2 errors of (rho, v, h) against the exact state.
fn errors(ops: &Ops, s: &FlowState, ex: &FlowState) -> (f64, f64, f64) {
    let rho = ops.l2_sq(&(&s.rho - &ex.rho)).sqrt();
    let v = s.v.iter().zip(&ex.v).map(|(a, b)| ops.l2_sq(&(a - b))).sum::<f64>().sqrt();
    let h = ops.surface_l2_sq(&(&s.h - &ex.h)).sqrt();
    (rho, v, h)
}

/// Runs the manufactured solution on `levels` nested vertical grids,
/// n_z = (n_z0 - 1) 2^k + 1 with dt halved alongside, and fits orders.
/// The bottom is anchored to the manufactured velocity.
pub fn mms_verify(cfg: &RunConfig, solution: &str, levels: usize) -> Result<ConvergenceTable, FscnError> {
    if levels < 2 {
        return Err(ConfigError::single(format!("levels: at least 2 required, got {levels}")).into());
    }
    let mut base = cfg.clone();
    base.initial = Preset::Mms {
        solution: solution.to_string(),
    };
    base.physics.bottom_bc = BottomBc::Anchored;
    for w in base.validate()? {
        log::warn!("{w}");
    }
    let g0: GridParams = base.resolved_grid(base.physics.eps);
    base.grid = g0.clone();

    let (m0, mut s0) = base.build(base.physics.eps)?;
    apply_closure(&m0, &mut s0)?;
    let mut dt0 = cfl_dt(&m0, &s0, base.stepper.cfl);
    if let Some(cap) = base.stepper.dt_max {
        dt0 = dt0.min(cap);
    }
    let t_end = base.stepper.t_end;
    let n0 = (t_end / dt0).ceil().max(1.0) as u64;

    let mut rows = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut c = base.clone();
        c.grid.n_z = (g0.n_z - 1) * (1 << k) + 1;
        let (m, mut s) = c.build(c.physics.eps)?;
        apply_closure(&m, &mut s)?;
        let steps = n0 << k;
        let dt = t_end / steps as f64;
        s = integrate(&m, s, dt, steps)?;
        let mm = Manufactured::new(solution, &m.ops, &m.phys, m.a).expect("validated solution id");
        let ex = mm.exact(t_end, &m.ops);
        let (rho, v, h) = errors(&m.ops, &s, &ex);
        log::info!("n_z = {:4}  dt = {dt:.3e}  err rho {rho:.3e}  v {v:.3e}  h {h:.3e}", c.grid.n_z);
        rows.push(LevelError {
            n_z: c.grid.n_z,
            dz_max: m.ops.grid.dz_max(),
            dt,
            steps,
            rho,
            v,
            h,
        });
    }
    let dz: Vec<f64> = rows.iter().map(|r| r.dz_max).collect();
    let col = |f: fn(&LevelError) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (er, ev, eh) = (col(|r| r.rho), col(|r| r.v), col(|r| r.h));
    let n = rows.len();
    let ratio = dz[n - 2] / dz[n - 1];
    Ok(ConvergenceTable {
        solution: solution.to_string(),
        eps: base.physics.eps,
        t_end,
        order_rho: fit(&dz, &er),
        order_v: fit(&dz, &ev),
        order_h: fit(&dz, &eh),
        last_order_rho: pair(er[n - 2], er[n - 1], ratio),
        last_order_v: pair(ev[n - 2], ev[n - 1], ratio),
        last_order_h: pair(eh[n - 2], eh[n - 1], ratio),
        levels: rows,
    })
}

fn integrate(m: &Model, mut s: FlowState, dt: f64, steps: u64) -> Result<FlowState, FscnError> {
    let t0 = s.t;
    for n in 0..steps {
        s = advance(m, &s, dt)?;
        s.t = t0 + (n + 1) as f64 * dt;
    }
    Ok(s)
}

/// Writes `convergence.csv` and `convergence.json`.
pub fn write_table(dir: &Path, t: &ConvergenceTable) -> Result<(), FscnError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("convergence.csv"), t.to_csv())?;
    let text = serde_json::to_string_pretty(t).map_err(|e| FscnError::Format(e.to_string()))?;
    std::fs::write(dir.join("convergence.json"), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_second_order() {
        let dz = [0.1, 0.05, 0.025];
        let e: Vec<f64> = dz.iter().map(|d| 3.0 * d * d).collect();
        assert!((fit(&dz, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit(&dz, &[0.0; 3]).is_none());
        assert!((pair(4.0, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
    }
}
