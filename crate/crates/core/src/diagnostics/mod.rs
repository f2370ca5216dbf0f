//! Monitored quantities: energy ledger, the capped Theta functional, good
//! unknowns, Taylor sign, structural identities and boundary-layer probes.

mod conormal;
mod energy;
mod layer;
mod structure;

pub use conormal::{
    good_unknown_norms, good_unknowns, taylor_sign, theta_terms, ThetaAccumulator, ThetaAddends, ThetaIntegrands,
    ThetaSpec, M_LIMIT,
};
pub use energy::{energy_ledger, EnergyLedger, EnergyTracker};
pub use layer::{layer_probe, layer_width, LayerProbe, LAYER_FRACTION};
pub use structure::{identity_residuals, structural_residuals, Residual, StructuralResiduals};

use crate::calculus::Alpha;
use crate::dynamics::{time_stacks, FlowState, Model};
use crate::error::FscnError;
use crate::field::Ops;
use crate::geometry::check_diffeomorphism;
use ndarray::Array1;
use serde::Serialize;

/// Pass/fail of the a priori bands, evaluated per snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HealthFlags {
    pub density_ok: bool,
    pub min_jacobian: f64,
    pub jacobian_ok: bool,
    /// |h|_{H^{3,inf}} + |grad_y h|_{H^{[m/2]+1}}.
    pub surface_bound: f64,
    pub surface_ok: bool,
    /// Taylor sign >= c0/2; only monitored when sigma = 0.
    pub taylor_ok: Option<bool>,
}

/// Everything reported at one output time.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub t: f64,
    pub energy: EnergyLedger,
    pub energy_imbalance: f64,
    pub theta: f64,
    pub addends: ThetaAddends,
    pub integrands: ThetaIntegrands,
    pub good_unknowns: Vec<(Alpha, f64, f64)>,
    pub taylor_min: f64,
    pub health: HealthFlags,
    pub layer: LayerProbe,
    pub structural: StructuralResiduals,
}

impl DiagnosticsReport {
    /// Scalar CSV columns, fixed order.
    pub fn columns() -> Vec<String> {
        let mut c: Vec<String> = [
            "t",
            "kinetic",
            "internal",
            "external",
            "capillary",
            "energy",
            "dissipation_rate",
            "cumulative_dissipation",
            "bottom_flux",
            "cumulative_bottom_flux",
            "energy_imbalance",
            "theta",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        c.extend(ThetaAddends::NAMES.iter().map(|s| s.to_string()));
        c.extend(ThetaIntegrands::NAMES.iter().map(|s| s.to_string()));
        c.extend(
            [
                "taylor_min",
                "min_jacobian",
                "surface_bound",
                "dzz_v",
                "eps_dzz_v",
                "delta_p_norm",
                "layer_width",
                "res_normal_div_sup",
                "res_normal_div_l2",
                "res_vorticity_sup",
                "res_vorticity_l2",
                "sn_trace",
                "sn_scale",
                "zeta_trace",
                "good_v_max",
                "good_q_max",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        c
    }

    pub fn row(&self) -> Vec<f64> {
        let e = &self.energy;
        let mut r = vec![
            self.t,
            e.kinetic,
            e.internal,
            e.external,
            e.capillary,
            e.total(),
            e.dissipation_rate,
            e.cumulative_dissipation,
            e.bottom_flux,
            e.cumulative_bottom_flux,
            self.energy_imbalance,
            self.theta,
        ];
        r.extend(self.addends.values());
        r.extend(self.integrands.values());
        let st = &self.structural;
        let gv = self.good_unknowns.iter().map(|g| g.1).fold(0.0, f64::max);
        let gq = self.good_unknowns.iter().map(|g| g.2).fold(0.0, f64::max);
        r.extend([
            self.taylor_min,
            self.health.min_jacobian,
            self.health.surface_bound,
            self.layer.dzz_v,
            self.layer.eps_dzz_v,
            self.layer.delta_p_norm,
            self.layer.layer_width,
            st.normal_divergence.sup,
            st.normal_divergence.l2,
            st.vorticity.sup,
            st.vorticity.l2,
            st.sn_trace,
            st.sn_scale,
            st.zeta_trace,
            gv,
            gq,
        ]);
        r
    }
}

/// |h|_{H^{k,inf}} = sum over horizontal multi-indices |beta| <= k of sup |d^beta h|.
fn surface_sup_norm(ops: &Ops, h: &Array1<f64>, k: usize) -> f64 {
    let two = ops.grid.d_h == 2;
    let x = h.as_slice().unwrap();
    let mut total = 0.0;
    for b1 in 0..=k {
        for b2 in 0..=(if two { k - b1 } else { 0 }) {
            let f = ops
                .spec
                .multiply(x, |i| ops.spec.ik(0, i).powu(b1 as u32) * ops.spec.ik(1, i).powu(b2 as u32));
            total += f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        }
    }
    total
}

fn surface_l2_norm(ops: &Ops, h: &Array1<f64>, k: usize) -> f64 {
    let mut total = 0.0;
    let c = ops.spec.forward(h.as_slice().unwrap());
    let scale = ops.grid.cell_area() / ops.nh() as f64;
    for (i, ci) in c.iter().enumerate() {
        let x: f64 = (0..ops.grid.d_h).map(|dir| ops.spec.ik(dir, i).norm_sqr()).sum();
        total += (0..=k).map(|n| x.powi(n as i32)).sum::<f64>() * ci.norm_sqr();
    }
    (total * scale).sqrt()
}

/// Running diagnostics along one trajectory.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub spec: ThetaSpec,
    energy: EnergyTracker,
    theta: ThetaAccumulator,
}

impl Monitor {
    pub fn new(spec: ThetaSpec) -> Self {
        Monitor {
            spec,
            energy: EnergyTracker::new(),
            theta: ThetaAccumulator::new(),
        }
    }

    /// Energy bookkeeping only; cheap enough for every step.
    pub fn observe_energy(&mut self, m: &Model, s: &FlowState) -> Result<EnergyLedger, FscnError> {
        Ok(self.energy.record(s.t, energy_ledger(m, s)?))
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.energy.initial_energy()
    }

    /// Full report; also folds the state into the energy and Theta integrals.
    pub fn report(&mut self, m: &Model, s: &FlowState) -> Result<DiagnosticsReport, FscnError> {
        self.spec.check()?;
        let ops = &m.ops;
        let ph = &m.phys;
        let energy = self.energy.record(s.t, energy_ledger(m, s)?);
        let st = time_stacks(m, s, self.spec.a0_max.min(self.spec.m_cap))?;
        let (addends, integrands) = theta_terms(ops, &st, ph, &self.spec)?;
        let theta = self.theta.record(s.t, &addends, &integrands);
        let good = good_unknown_norms(ops, &st, self.spec.m_cap, self.spec.a0_max)?;
        let p = st.p.value();
        let taylor_min = taylor_sign(ops, p, &st.metric);

        let (lo, hi) = ph.density_band();
        let dc = check_diffeomorphism(&st.metric, ph.c0_health);
        let surface_bound = surface_sup_norm(ops, &s.h, 3)
            + (0..m.d_h())
                .map(|k| surface_l2_norm(ops, &ops.dy_surface(&s.h, k), self.spec.m_cap / 2 + 1).powi(2))
                .sum::<f64>()
                .sqrt();
        let health = HealthFlags {
            density_ok: s.rho.iter().all(|&r| r >= lo && r <= hi),
            min_jacobian: dc.min_j,
            jacobian_ok: dc.pass,
            surface_bound,
            surface_ok: surface_bound <= 1.0 / ph.c0_health,
            taylor_ok: (ph.sigma == 0.0).then_some(taylor_min >= 0.5 * ph.c0_health),
        };
        Ok(DiagnosticsReport {
            t: s.t,
            energy,
            energy_imbalance: self.energy.imbalance(&energy),
            theta,
            addends,
            integrands,
            good_unknowns: good,
            taylor_min,
            health,
            layer: layer_probe(ops, &s.v, p, &st.metric, ph.eps),
            structural: structural_residuals(m, s),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridParams, GridSpec};

    #[test]
    fn surface_sup_norm_counts_multi_indices() {
        let o = Ops::new(
            GridSpec::build(&GridParams {
                d_h: 2,
                n_y: 16,
                n_z: 9,
                ..Default::default()
            })
            .unwrap(),
        );
        let h = o.sample_surface(|y| y[0].cos() * y[1].cos());
        // indices: 1 + 2 + 3 + 4 derivatives, each with sup 1
        assert!((surface_sup_norm(&o, &h, 3) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn columns_match_row() {
        let r = DiagnosticsReport {
            t: 0.0,
            energy: EnergyLedger::default(),
            energy_imbalance: 0.0,
            theta: 1.0,
            addends: ThetaAddends::default(),
            integrands: ThetaIntegrands::default(),
            good_unknowns: vec![],
            taylor_min: 0.0,
            health: HealthFlags {
                density_ok: true,
                min_jacobian: 1.0,
                jacobian_ok: true,
                surface_bound: 0.0,
                surface_ok: true,
                taylor_ok: None,
            },
            layer: LayerProbe::default(),
            structural: StructuralResiduals::default(),
        };
        assert_eq!(DiagnosticsReport::columns().len(), r.row().len());
    }
}
