use crate::diagnostics::{ThetaSpec, M_LIMIT};
use crate::dynamics::mms::Manufactured;
use crate::dynamics::presets::{self, Preset};
use crate::dynamics::{FlowState, Model, PhysParams};
use crate::error::{ConfigError, FscnError};
use crate::field::Ops;
use crate::geometry::auto_slope;
use crate::grid::{stretch_for_spacing, GridParams, GridSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub cfl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    pub t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            cfl: 0.4,
            dt_max: None,
            t_end: 1.0,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    pub m_cap: usize,
    pub a0_max: usize,
    /// Time between report rows.
    pub output_interval: f64,
    /// Also write a snapshot at every report time.
    pub snapshots: bool,
}

impl Default for DiagConfig {
    fn default() -> Self {
        DiagConfig {
            m_cap: 3,
            a0_max: 1,
            output_interval: 0.1,
            snapshots: false,
        }
    }
}

impl DiagConfig {
    pub fn theta(&self) -> ThetaSpec {
        ThetaSpec {
            m_cap: self.m_cap,
            a0_max: self.a0_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub physics: PhysParams,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub initial: Preset,
    #[serde(default)]
    pub diagnostics: DiagConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::single(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fails only for a seed outside the TOML integer range.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::single(format!("config: {e}")))
    }

    /// Checks every section; returns warnings on success.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut issues = Vec::new();
        let mut warnings = Vec::new();
        if let Err(e) = GridSpec::build(&self.grid) {
            issues.extend(e.issues);
        }
        match self.physics.validate() {
            Ok(w) => warnings.extend(w),
            Err(e) => issues.extend(e.issues),
        }
        let st = &self.stepper;
        if !(st.cfl > 0.0 && st.cfl <= 1.0) {
            issues.push(format!("stepper.cfl: must lie in (0, 1], got {}", st.cfl));
        }
        if !(st.t_end > 0.0 && st.t_end.is_finite()) {
            issues.push(format!("stepper.t_end: must be positive, got {}", st.t_end));
        }
        if let Some(dt) = st.dt_max {
            if !(dt > 0.0) {
                issues.push(format!("stepper.dt_max: must be positive, got {dt}"));
            }
        }
        issues.extend(self.initial.validate());
        if i64::try_from(self.seed).is_err() {
            issues.push(format!("seed: must be below 2^63, got {}", self.seed));
        }
        let dg = &self.diagnostics;
        if dg.m_cap == 0 || dg.m_cap > M_LIMIT {
            issues.push(format!("diagnostics.m_cap: must lie in 1..={M_LIMIT}, got {}", dg.m_cap));
        }
        if dg.a0_max > 2 {
            issues.push(format!("diagnostics.a0_max: must be <= 2, got {}", dg.a0_max));
        }
        if !(dg.output_interval > 0.0 && dg.output_interval.is_finite()) {
            issues.push(format!(
                "diagnostics.output_interval: must be positive, got {}",
                dg.output_interval
            ));
        }
        if issues.is_empty() {
            Ok(warnings)
        } else {
            Err(ConfigError { issues })
        }
    }

    /// Grid parameters with the stretch filled in: spacing next to z = 0
    /// of 0.25 sqrt(eps_min), or uniform when eps_min = 0.
    pub fn resolved_grid(&self, eps_min: f64) -> GridParams {
        let mut g = self.grid.clone();
        if g.stretch.is_none() {
            let s = if eps_min > 0.0 {
                stretch_for_spacing(g.n_z, g.z_max, 0.25 * eps_min.sqrt())
            } else {
                1.0
            };
            g.stretch = Some(s);
        }
        g
    }

    /// Model and initial state (before the boundary closure).
    pub fn build(&self, eps_min: f64) -> Result<(Model, FlowState), FscnError> {
        let ops = Ops::new(GridSpec::build(&self.resolved_grid(eps_min))?);
        let ph = &self.physics;
        let slope = |h: &ndarray::Array1<f64>| ph.slope.unwrap_or_else(|| auto_slope(&ops, h));
        let out = match &self.initial {
            Preset::Equilibrium => {
                let s = presets::equilibrium(&ops, ph);
                (Model::new(ops.clone(), ph.clone(), &s.h), s)
            }
            Preset::Capillary { amplitude, mode } => {
                let probe = presets::steep(&ops, ph, *amplitude, *mode);
                let a = slope(&probe.h);
                let s = presets::capillary(&ops, ph, a, *amplitude, *mode);
                (Model::new(ops.clone(), ph.clone(), &s.h), s)
            }
            Preset::Shear { amplitude, width } => {
                let s = presets::shear(&ops, ph, *amplitude, *width);
                (Model::new(ops.clone(), ph.clone(), &s.h), s)
            }
            Preset::Random {
                amplitude,
                surface_amplitude,
                kmax,
            } => {
                let s = presets::random(&ops, ph, self.seed, *amplitude, *surface_amplitude, *kmax);
                (Model::new(ops.clone(), ph.clone(), &s.h), s)
            }
            Preset::Steep { amplitude, mode } => {
                let s = presets::steep(&ops, ph, *amplitude, *mode);
                (Model::new(ops.clone(), ph.clone(), &s.h), s)
            }
            Preset::Mms { solution } => {
                let unknown = || ConfigError::single(format!("initial.solution: unknown manufactured solution {solution:?}"));
                let probe = Manufactured::new(solution, &ops, ph, 1.0).ok_or_else(unknown)?;
                let a = slope(&probe.exact(0.0, &ops).h);
                let mm = Arc::new(Manufactured::new(solution, &ops, ph, a).ok_or_else(unknown)?);
                let s = mm.exact(0.0, &ops);
                let mut m = Model::new(ops.clone(), ph.clone(), &s.h);
                m.a = a;
                (m.with_forcing(mm), s)
            }
            Preset::Snapshot { path } => {
                let snap = super::snapshot::Snapshot::load(Path::new(path))?;
                let s = snap.to_state(&ops)?;
                let mut m = Model::new(ops.clone(), ph.clone(), &s.h);
                if ph.slope.is_none() {
                    m.a = snap.slope;
                }
                (m, s)
            }
        };
        Ok(out)
    }
}
