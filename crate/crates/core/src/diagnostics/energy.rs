use crate::calculus::{div_phi, grad_vec_phi};
use crate::dynamics::{kinematic_dt, FlowState, Model};
use crate::error::HealthError;
use crate::geometry::area_and_volume;
use ndarray::Array1;
use serde::Serialize;

/// Physical energy budget of one state. Rates are instantaneous; the
/// cumulative fields are filled in by [`EnergyTracker`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyLedger {
    pub kinetic: f64,
    pub internal: f64,
    /// p_e |Omega_t|.
    pub external: f64,
    /// sigma |Sigma_t|.
    pub capillary: f64,
    pub dissipation_rate: f64,
    pub cumulative_dissipation: f64,
    /// Power delivered through the truncated bottom z = -Z_max.
    pub bottom_flux: f64,
    pub cumulative_bottom_flux: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.kinetic + self.internal + self.external + self.capillary
    }
}

/// Energy terms in the physical measure dV_t = J dy dz.
pub fn energy_ledger(m: &Model, s: &FlowState) -> Result<EnergyLedger, HealthError> {
    let ops = &m.ops;
    let ph = &m.phys;
    let d = m.d_h();
    let h_t = kinematic_dt(m, s);
    let metric = m.chart(&s.h, &h_t);
    let jac = metric.jac0();
    let p = ph.checked_pressure(&s.rho)?;

    let mut v2 = ops.zeros();
    for vc in &s.v {
        v2 += &vc.mapv(|x| x * x);
    }
    let kinetic = 0.5 * ops.integrate_weighted(&(&s.rho * &v2), jac);
    let internal = ops.integrate_weighted(&p, jac) / (ph.gamma - 1.0);
    let (area, volume) = area_and_volume(ops, &s.h, &metric);

    let (mut dissipation_rate, mut bottom_flux) = (0.0, 0.0);
    let g = grad_vec_phi(ops, &s.v, &metric);
    let div = div_phi(ops, &s.v, &metric);
    if ph.eps > 0.0 {
        let mut s2 = ops.zeros();
        for a in 0..=d {
            for b in 0..=d {
                s2 += &((&g[a][b] + &g[b][a]) * 0.5).mapv(|x| x * x);
            }
        }
        let q = s2 * (2.0 * ph.mu) + div.mapv(|x| ph.lambda * x * x);
        dissipation_rate = ph.eps * ops.integrate_weighted(&q, jac);
    }

    // bottom b(t, y) = phi(t, y, -Z_max), N_b = (-grad b, 1)
    let row = |f: &ndarray::Array2<f64>| ops.bottom(f).to_owned();
    let nb: Vec<Array1<f64>> = (0..=d)
        .map(|c| if c < d { -row(metric.dphi_y[c].value()) } else { Array1::ones(ops.nh()) })
        .collect();
    let b_t = metric.dphi_t.as_ref().map(|st| row(st.value())).unwrap_or_else(|| Array1::zeros(ops.nh()));
    let vb: Vec<Array1<f64>> = s.v.iter().map(row).collect();
    let mut vn = Array1::zeros(ops.nh());
    for c in 0..=d {
        vn += &(&vb[c] * &nb[c]);
    }
    let pb = row(&p);
    let e = &row(&s.rho) * &row(&v2) * 0.5 + &pb / (ph.gamma - 1.0);
    let mut flux = &e * &(&vn - &b_t) + &pb * &vn - &b_t * ph.p_e;
    if ph.eps > 0.0 {
        let divb = row(&div);
        for a in 0..=d {
            let mut tv = &divb * &vb[a] * ph.lambda;
            for b in 0..=d {
                tv += &(&(&row(&g[a][b]) + &row(&g[b][a])) * &vb[b] * ph.mu);
            }
            flux -= &(tv * &nb[a] * ph.eps);
        }
    }
    bottom_flux += ops.integrate_surface(&flux);

    Ok(EnergyLedger {
        kinetic,
        internal,
        external: ph.p_e * volume,
        capillary: ph.sigma * area,
        dissipation_rate,
        cumulative_dissipation: 0.0,
        bottom_flux,
        cumulative_bottom_flux: 0.0,
    })
}

/// Trapezoid accumulation of dissipation and bottom work along a run.
#[derive(Debug, Clone, Default)]
pub struct EnergyTracker {
    e0: Option<f64>,
    last: Option<(f64, f64, f64)>,
    dissipation: f64,
    flux: f64,
}

impl EnergyTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in the ledger at time `t` and returns it with the running
    /// integrals filled in.
    pub fn record(&mut self, t: f64, mut e: EnergyLedger) -> EnergyLedger {
        if let Some((t0, d0, f0)) = self.last {
            let dt = t - t0;
            self.dissipation += 0.5 * dt * (d0 + e.dissipation_rate);
            self.flux += 0.5 * dt * (f0 + e.bottom_flux);
        } else {
            self.e0 = Some(e.total());
        }
        self.last = Some((t, e.dissipation_rate, e.bottom_flux));
        e.cumulative_dissipation = self.dissipation;
        e.cumulative_bottom_flux = self.flux;
        e
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.e0
    }

    /// E(t) - E(0) + int dissipation - int bottom flux.
    pub fn imbalance(&self, e: &EnergyLedger) -> f64 {
        e.total() - self.e0.unwrap_or(e.total()) + e.cumulative_dissipation - e.cumulative_bottom_flux
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{presets, BottomBc, PhysParams};
    use crate::field::Ops;
    use crate::grid::{GridParams, GridSpec};

    fn model(ph: PhysParams, n_z: usize, z_max: f64) -> Model {
        let ops = Ops::new(
            GridSpec::build(&GridParams {
                n_y: 16,
                n_z,
                z_max,
                stretch: Some(1.0),
                ..Default::default()
            })
            .unwrap(),
        );
        let h0 = Array1::zeros(ops.nh());
        Model::new(ops, ph, &h0)
    }

    #[test]
    fn rest_state_has_only_potential_terms() {
        let ph = PhysParams {
            slope: Some(1.0),
            ..Default::default()
        };
        let m = model(ph.clone(), 32, 3.0);
        let s = presets::equilibrium(&m.ops, &ph);
        let e = energy_ledger(&m, &s).unwrap();
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.dissipation_rate, 0.0);
        let l = m.ops.grid.length;
        assert!((e.external - ph.p_e * l * 3.0).abs() < 1e-12);
        assert!((e.internal - ph.p_e * l * 3.0 / (ph.gamma - 1.0)).abs() < 1e-12);
        assert!((e.capillary - ph.sigma * l).abs() < 1e-12);
        assert_eq!(e.bottom_flux, 0.0);
    }

    #[test]
    fn flat_shear_dissipation_matches_quadrature() {
        let ph = PhysParams {
            slope: Some(1.0),
            eps: 1.0,
            mu: 1.0,
            lambda: 0.0,
            bottom_bc: BottomBc::Anchored,
            ..Default::default()
        };
        let mut m = model(ph.clone(), 257, 1.0);
        // the formula against the 4th-order vertical derivative
        m.ops = Ops::new(m.ops.grid.with_n_z(257).unwrap());
        let mut s = presets::equilibrium(&m.ops, &ph);
        s.v[0] = m.ops.sample(|_, z| z.sin());
        let e = energy_ledger(&m, &s).unwrap();
        // 2 |S|^2 = cos^2 z
        let oracle = m.ops.integrate(&m.ops.sample(|_, z| z.cos().powi(2)));
        assert!((e.dissipation_rate - oracle).abs() < 1e-9, "{} vs {oracle}", e.dissipation_rate);
    }

    #[test]
    fn tracker_trapezoid() {
        let mut tr = EnergyTracker::new();
        let mk = |rate: f64| EnergyLedger {
            internal: 1.0,
            dissipation_rate: rate,
            ..Default::default()
        };
        tr.record(0.0, mk(1.0));
        let e = tr.record(2.0, mk(3.0));
        assert_eq!(e.cumulative_dissipation, 4.0);
        assert_eq!(tr.imbalance(&e), 4.0);
    }
}
