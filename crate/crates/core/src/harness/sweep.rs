use super::config::RunConfig;
use super::run::{run_with, RunOptions, RunOutcome};
use crate::dynamics::FlowState;
use crate::error::{ConfigError, FscnError};
use crate::field::{sup, sup1, Ops};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Eps,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    CauchySupNorm,
    ThetaBoundedness,
    LayerScaling,
}

fn all_comparisons() -> Vec<Comparison> {
    vec![Comparison::CauchySupNorm, Comparison::ThetaBoundedness, Comparison::LayerScaling]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub base: RunConfig,
    pub axis: SweepAxis,
    /// Strictly decreasing, positive.
    pub values: Vec<f64>,
    #[serde(default = "all_comparisons")]
    pub comparisons: Vec<Comparison>,
    /// Also run the member with the axis parameter set to zero.
    #[serde(default)]
    pub include_limit: bool,
}

impl SweepPlan {
    pub fn from_toml(text: &str) -> Result<SweepPlan, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::single(format!("plan: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<SweepPlan, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::single(format!("plan: {e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        if self.values.is_empty() {
            issues.push("values: at least one value required".to_string());
        }
        if self.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            issues.push(format!("values: must be positive and finite, got {:?}", self.values));
        }
        if self.values.windows(2).any(|w| w[1] >= w[0]) {
            issues.push(format!("values: must be strictly decreasing, got {:?}", self.values));
        }
        for v in self.member_values() {
            if let Err(e) = self.member(v).validate() {
                issues.extend(e.issues.into_iter().map(|s| format!("base.{s}")));
                break;
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    /// Axis values in run order, the limit value last.
    pub fn member_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        if self.include_limit {
            v.push(0.0);
        }
        v
    }

    pub fn member(&self, value: f64) -> RunConfig {
        let mut c = self.base.clone();
        match self.axis {
            SweepAxis::Eps => c.physics.eps = value,
            SweepAxis::Sigma => c.physics.sigma = value,
        }
        c
    }

    /// eps the shared grid has to resolve.
    fn eps_min(&self) -> f64 {
        match self.axis {
            SweepAxis::Eps => self.values.iter().copied().fold(f64::INFINITY, f64::min),
            SweepAxis::Sigma => self.base.physics.eps,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberSummary {
    pub value: f64,
    pub aborted: bool,
    pub abort_reason: Option<String>,
    pub steps: u64,
    pub t_final: f64,
    pub theta_final: f64,
    /// Sup over output times.
    pub dzz_v: f64,
    pub eps_dzz_v: f64,
    pub delta_p_norm: f64,
    /// At the last output time.
    pub layer_width: f64,
}

/// Sup over the shared output times of the differences between two members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CauchyRow {
    pub a: f64,
    pub b: f64,
    pub v_sup: f64,
    pub rho_sup: f64,
    /// |h_a - h_b|_{W^{1,inf}}.
    pub h_w1inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaComparison {
    pub max: f64,
    pub min: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerScaling {
    /// Log-log slopes against the axis value.
    pub eps_dzz_slope: f64,
    pub dzz_slope: f64,
    pub width_slope: f64,
    pub delta_p_slope: f64,
    /// max/min across the positive members.
    pub eps_dzz_ratio: f64,
    pub delta_p_ratio: f64,
    /// dzz_v at the smallest value over dzz_v at the largest.
    pub dzz_growth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub output_times: Vec<f64>,
    pub members: Vec<MemberSummary>,
    /// Consecutive positive members.
    pub cauchy: Vec<CauchyRow>,
    /// Each positive member against the limit member.
    pub limit: Vec<CauchyRow>,
    pub theta: Option<ThetaComparison>,
    pub layer: Option<LayerScaling>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: SweepReport,
    pub members: Vec<(f64, RunOutcome)>,
}

fn summarize(value: f64, o: &RunOutcome) -> MemberSummary {
    let r = &o.reports;
    let smax = |f: fn(&crate::diagnostics::DiagnosticsReport) -> f64| r.iter().map(f).fold(0.0, f64::max);
    MemberSummary {
        value,
        aborted: o.aborted(),
        abort_reason: o.abort.as_ref().map(|e| e.to_string()),
        steps: o.steps,
        t_final: o.last.t,
        theta_final: r.last().map_or(f64::NAN, |x| x.theta),
        dzz_v: smax(|x| x.layer.dzz_v),
        eps_dzz_v: smax(|x| x.layer.eps_dzz_v),
        delta_p_norm: smax(|x| x.layer.delta_p_norm),
        layer_width: r.last().map_or(f64::NAN, |x| x.layer.layer_width),
    }
}

/// |a - b| in sup norm: velocity (all components), density, surface in W^{1,inf}.
pub fn state_distance(ops: &Ops, a: &FlowState, b: &FlowState) -> (f64, f64, f64) {
    let v = a.v.iter().zip(&b.v).map(|(x, y)| sup(&(x - y))).fold(0.0, f64::max);
    let rho = sup(&(&a.rho - &b.rho));
    let dh = &a.h - &b.h;
    let h = sup1(&dh) + (0..ops.grid.d_h).map(|k| sup1(&ops.dy_surface(&dh, k))).sum::<f64>();
    (v, rho, h)
}

fn cauchy(ops: &Ops, a: (f64, &RunOutcome), b: (f64, &RunOutcome)) -> CauchyRow {
    let mut row = CauchyRow {
        a: a.0,
        b: b.0,
        v_sup: 0.0,
        rho_sup: 0.0,
        h_w1inf: 0.0,
    };
    for (sa, sb) in a.1.states.iter().zip(&b.1.states) {
        debug_assert_eq!(sa.t, sb.t);
        let (v, r, h) = state_distance(ops, sa, sb);
        row.v_sup = row.v_sup.max(v);
        row.rho_sup = row.rho_sup.max(r);
        row.h_w1inf = row.h_w1inf.max(h);
    }
    row
}

/// Least-squares slope of log y against log x; `None` unless every value
/// is positive and there are at least three points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 3 || x.len() != y.len() || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn ratio(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn member_dir(root: &Path, idx: usize, axis: SweepAxis, value: f64) -> PathBuf {
    let a = match axis {
        SweepAxis::Eps => "eps",
        SweepAxis::Sigma => "sigma",
    };
    root.join(format!("member_{idx:02}_{a}_{value:.3e}"))
}

/// Runs every member (concurrently), then compares the survivors on their
/// shared output times.
pub fn sweep(plan: &SweepPlan, output_dir: Option<&Path>) -> Result<SweepOutcome, FscnError> {
    plan.validate()?;
    let values = plan.member_values();
    let eps_min = plan.eps_min();
    let runs: Vec<Result<RunOutcome, FscnError>> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let opts = RunOptions {
                output_dir: output_dir.map(|d| member_dir(d, i, plan.axis, v)),
                keep_states: true,
                eps_min: Some(eps_min),
            };
            run_with(&plan.member(v), &opts)
        })
        .collect();
    let mut members = Vec::with_capacity(runs.len());
    for (v, r) in values.iter().zip(runs) {
        members.push((*v, r?));
    }
    let report = compare(plan, &members);
    if let Some(dir) = output_dir {
        let text = serde_json::to_string_pretty(&report).map_err(|e| FscnError::Format(e.to_string()))?;
        std::fs::write(dir.join("sweep.json"), text + "\n")?;
    }
    Ok(SweepOutcome { report, members })
}

pub fn compare(plan: &SweepPlan, members: &[(f64, RunOutcome)]) -> SweepReport {
    let summaries: Vec<MemberSummary> = members.iter().map(|(v, o)| summarize(*v, o)).collect();
    let alive: Vec<(f64, &RunOutcome)> = members.iter().filter(|m| !m.1.aborted()).map(|m| (m.0, &m.1)).collect();
    let positive: Vec<(f64, &RunOutcome)> = alive.iter().copied().filter(|m| m.0 > 0.0).collect();
    let limit = alive.iter().copied().find(|m| m.0 == 0.0);
    let output_times = members
        .first()
        .map(|m| m.1.reports.iter().map(|r| r.t).collect())
        .unwrap_or_default();
    let mut report = SweepReport {
        axis: plan.axis,
        values: plan.member_values(),
        output_times,
        members: summaries,
        cauchy: Vec::new(),
        limit: Vec::new(),
        theta: None,
        layer: None,
    };
    if members.len() < 2 {
        return report;
    }
    let Some(ops) = members.first().map(|m| &m.1.model.ops) else {
        return report;
    };
    if plan.comparisons.contains(&Comparison::CauchySupNorm) {
        report.cauchy = positive.windows(2).map(|w| cauchy(ops, w[0], w[1])).collect();
        if let Some(l) = limit {
            report.limit = positive.iter().map(|&m| cauchy(ops, m, l)).collect();
        }
    }
    let pos_summ: Vec<&MemberSummary> = report
        .members
        .iter()
        .filter(|s| s.value > 0.0 && !s.aborted)
        .collect();
    if plan.comparisons.contains(&Comparison::ThetaBoundedness) && pos_summ.len() >= 2 {
        let th: Vec<f64> = pos_summ.iter().map(|s| s.theta_final).collect();
        report.theta = Some(ThetaComparison {
            max: th.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: th.iter().copied().fold(f64::INFINITY, f64::min),
            ratio: ratio(&th),
        });
    }
    if plan.comparisons.contains(&Comparison::LayerScaling) && pos_summ.len() >= 3 {
        let x: Vec<f64> = pos_summ.iter().map(|s| s.value).collect();
        let col = |f: fn(&MemberSummary) -> f64| pos_summ.iter().map(|s| f(s)).collect::<Vec<f64>>();
        let (edzz, dzz, width, dp) = (
            col(|s| s.eps_dzz_v),
            col(|s| s.dzz_v),
            col(|s| s.layer_width),
            col(|s| s.delta_p_norm),
        );
        let nan = f64::NAN;
        report.layer = Some(LayerScaling {
            eps_dzz_slope: loglog_slope(&x, &edzz).unwrap_or(nan),
            dzz_slope: loglog_slope(&x, &dzz).unwrap_or(nan),
            width_slope: loglog_slope(&x, &width).unwrap_or(nan),
            delta_p_slope: loglog_slope(&x, &dp).unwrap_or(nan),
            eps_dzz_ratio: ratio(&edzz),
            delta_p_ratio: ratio(&dp),
            dzz_growth: dzz[dzz.len() - 1] / dzz[0],
        });
    }
    report
}
