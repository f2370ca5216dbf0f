//! Time evolution of (rho, v, h) in the flattened chart: tendencies,
//! boundary closures, the IMEX stepper and the CFL bound.

mod banded;
mod closure;
pub mod mms;
pub mod presets;
mod rhs;
mod stepper;

pub use banded::BandLu;
pub use closure::{apply_closure, stress_residual, ClosureInfo};
pub use rhs::{ale_speed, kinematic_dt, rhs, rhs_split, time_stacks, Split, TimeStacks};
pub use stepper::{advance, cfl_dt, checked_advance, health_check};

use crate::error::{ConfigError, HealthError};
use crate::field::Ops;
use crate::geometry::ChartMetric;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BottomBc {
    /// v_3 = 0, plus d_z v_y = 0 when eps > 0.
    Slip,
    /// v = v_ref (all components when eps > 0, v_3 only when eps = 0).
    Anchored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysParams {
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
    pub eps: f64,
    pub sigma: f64,
    pub p_e: f64,
    /// Chart slope; `None` picks 1 + 2 max|d_z eta| from the initial surface.
    pub slope: Option<f64>,
    pub bottom_bc: BottomBc,
    /// Lower bound for J.
    pub c0_health: f64,
    /// Density must stay in [1/(4 C0), 4 C0].
    #[serde(rename = "C0_health")]
    pub big_c0_health: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            gamma: 1.4,
            mu: 1.0,
            lambda: 0.0,
            eps: 1e-2,
            sigma: 0.1,
            p_e: 1.0,
            slope: None,
            bottom_bc: BottomBc::Slip,
            c0_health: 0.1,
            big_c0_health: 10.0,
        }
    }
}

impl PhysParams {
    /// Checks every restriction; returns warnings (negative lambda) on success.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut issues = Vec::new();
        let finite = [
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("eps", self.eps),
            ("sigma", self.sigma),
            ("p_e", self.p_e),
            ("c0_health", self.c0_health),
            ("C0_health", self.big_c0_health),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                issues.push(format!("physics.{name}: must be finite, got {x}"));
            }
        }
        if self.gamma <= 1.0 {
            issues.push(format!("physics.gamma: must be > 1, got {}", self.gamma));
        }
        if self.mu <= 0.0 {
            issues.push(format!("physics.mu: must be > 0, got {}", self.mu));
        }
        if 2.0 * self.mu + 3.0 * self.lambda <= 0.0 {
            issues.push(format!(
                "physics.lambda: need 2 mu + 3 lambda > 0, got {}",
                2.0 * self.mu + 3.0 * self.lambda
            ));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            issues.push(format!("physics.eps: must lie in [0, 1], got {}", self.eps));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            issues.push(format!("physics.sigma: must lie in [0, 1], got {}", self.sigma));
        }
        if self.p_e <= 0.0 {
            issues.push(format!("physics.p_e: must be > 0, got {}", self.p_e));
        }
        if let Some(a) = self.slope {
            if !(a > 0.0 && a.is_finite()) {
                issues.push(format!("physics.slope: must be > 0, got {a}"));
            }
        }
        if self.c0_health <= 0.0 {
            issues.push(format!("physics.c0_health: must be > 0, got {}", self.c0_health));
        }
        if self.big_c0_health <= 0.25 {
            issues.push(format!("physics.C0_health: must be > 1/4, got {}", self.big_c0_health));
        }
        if !issues.is_empty() {
            return Err(ConfigError { issues });
        }
        let mut warnings = Vec::new();
        if self.lambda < 0.0 {
            warnings.push(format!("physics.lambda = {} is negative (allowed: 2 mu + 3 lambda > 0)", self.lambda));
        }
        Ok(warnings)
    }

    pub fn density_band(&self) -> (f64, f64) {
        (0.25 / self.big_c0_health, 4.0 * self.big_c0_health)
    }

    pub fn pressure(&self, rho: &Array2<f64>) -> Array2<f64> {
        let g = self.gamma;
        rho.mapv(|r| r.powf(g))
    }

    pub fn sound_speed(&self, rho: &Array2<f64>) -> Array2<f64> {
        let g = self.gamma;
        rho.mapv(|r| (g * r.powf(g - 1.0)).sqrt())
    }

    /// Pressure with a positivity check.
    pub fn checked_pressure(&self, rho: &Array2<f64>) -> Result<Array2<f64>, HealthError> {
        if let Some(((j, i), &r)) = rho.indexed_iter().find(|(_, r)| !(**r > 0.0)) {
            return Err(HealthError::NonpositiveDensity { value: r, i, j });
        }
        Ok(self.pressure(rho))
    }
}

/// (rho, v, h) at time t. Fields are `(n_z, n_h)`; `v` has `d_h + 1` components.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub rho: Array2<f64>,
    pub v: Vec<Array2<f64>>,
    pub h: Array1<f64>,
}

/// Time derivatives of the prognostic fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub rho: Array2<f64>,
    pub v: Vec<Array2<f64>>,
    pub h: Array1<f64>,
}

impl FlowState {
    pub fn rest(ops: &Ops, rho: f64) -> FlowState {
        FlowState {
            t: 0.0,
            rho: ops.constant(rho),
            v: (0..=ops.grid.d_h).map(|_| ops.zeros()).collect(),
            h: Array1::zeros(ops.nh()),
        }
    }

    /// `self + sum c_k T_k` at time `t`.
    pub fn combine(&self, t: f64, terms: &[(f64, &Tendency)]) -> FlowState {
        let mut out = self.clone();
        out.t = t;
        for (c, k) in terms {
            if *c == 0.0 {
                continue;
            }
            out.rho.scaled_add(*c, &k.rho);
            for (o, kv) in out.v.iter_mut().zip(&k.v) {
                o.scaled_add(*c, kv);
            }
            out.h.scaled_add(*c, &k.h);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(self.v.iter().flatten()).chain(self.h.iter()).all(|x| x.is_finite())
    }

    pub fn dealias(&mut self, ops: &Ops) {
        ops.spec.dealias_field(&mut self.rho);
        for vc in &mut self.v {
            ops.spec.dealias_field(vc);
        }
        ops.spec.dealias(self.h.as_slice_mut().unwrap());
    }
}

/// Manufactured-solution forcing hooks. All values are in chart
/// coordinates at time `t`.
pub trait Forcing: Send + Sync {
    /// Mass and momentum sources at every node.
    fn volume(&self, t: f64, ops: &Ops) -> (Array2<f64>, Vec<Array2<f64>>);
    /// Source in the kinematic condition.
    fn kinematic(&self, t: f64, ops: &Ops) -> Array1<f64>;
    /// Stress residual g in (stress) N = (p - p_e + sigma H) N + g.
    fn stress(&self, t: f64, ops: &Ops) -> Vec<Array1<f64>>;
    /// Euler closure offset: p(0) = p_e - sigma H + g_p.
    fn surface_pressure(&self, t: f64, ops: &Ops) -> Array1<f64>;
    /// Bottom velocity for the anchored condition.
    fn bottom_velocity(&self, t: f64, ops: &Ops) -> Vec<Array1<f64>>;
}

/// Everything needed to evolve a state: grid operators, physics and the
/// resolved chart slope.
#[derive(Clone)]
pub struct Model {
    pub ops: Ops,
    pub phys: PhysParams,
    pub a: f64,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("grid", &self.ops.grid)
            .field("phys", &self.phys)
            .field("a", &self.a)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl Model {
    /// Resolves the chart slope from `h0` when the physics leaves it open.
    /// The model carries `ops.stable()`: the 4th-order one-sided vertical
    /// stencils admit growing boundary modes in the inviscid system.
    pub fn new(ops: Ops, phys: PhysParams, h0: &Array1<f64>) -> Model {
        let a = phys.slope.unwrap_or_else(|| crate::geometry::auto_slope(&ops, h0));
        Model {
            ops: ops.stable(),
            phys,
            a,
            forcing: None,
        }
    }

    pub fn with_forcing(mut self, f: Arc<dyn Forcing>) -> Model {
        self.forcing = Some(f);
        self
    }

    pub fn viscous(&self) -> bool {
        self.phys.eps > 0.0
    }

    pub fn d_h(&self) -> usize {
        self.ops.grid.d_h
    }

    /// Chart built from `[h, d_t h]`.
    pub fn chart(&self, h: &Array1<f64>, h_t: &Array1<f64>) -> ChartMetric {
        crate::geometry::assemble_chart(&self.ops, &[h.clone(), h_t.clone()], self.a)
    }
}
