use crate::calculus::{conormal_apply, conormal_norm_sq, conormal_sup_sq, laplace_phi_stack, multi_indices, order, Alpha};
use crate::dynamics::{PhysParams, TimeStacks};
use crate::error::ContractError;
use crate::field::{sup, Ops, Stack};
use crate::geometry::ChartMetric;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Highest conormal order accepted for the Theta functional.
pub const M_LIMIT: usize = 6;

/// Order cap for the Theta functional and the time-derivative cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSpec {
    pub m_cap: usize,
    pub a0_max: usize,
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec { m_cap: 3, a0_max: 1 }
    }
}

impl ThetaSpec {
    pub fn check(&self) -> Result<(), ContractError> {
        if self.m_cap == 0 || self.m_cap > M_LIMIT {
            return Err(ContractError(format!("m_cap must lie in 1..={M_LIMIT}, got {}", self.m_cap)));
        }
        if self.a0_max > 2 {
            return Err(ContractError(format!("a0_max must be <= 2, got {}", self.a0_max)));
        }
        Ok(())
    }

    /// Time-stack depth the addends need.
    pub fn depth(&self) -> usize {
        self.a0_max.min(self.m_cap) + 1
    }
}

/// Instantaneous addends of the Theta functional (all squared norms).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ThetaAddends {
    /// ||(p, v)||^2_{H^m}
    pub pv: f64,
    /// ||grad(p, v)||^2_{H^{m-2}}
    pub grad_pv: f64,
    /// ||Delta^phi p||^2_{H^1}
    pub lap_p: f64,
    /// |h|^2_{H^m}
    pub h: f64,
    /// sigma |grad_y h|^2_{H^m}
    pub sigma_grad_h: f64,
    /// ||grad(p, v)||^2_{H^{1,inf}}
    pub grad_pv_sup: f64,
    /// eps ||grad(p, v)||^2_{H^{m-1}}
    pub eps_grad_pv: f64,
    /// eps ||Delta^phi p||^2_{H^2}
    pub eps_lap_p: f64,
    /// eps ||grad^2 v||^2_inf
    pub eps_hess_v_sup: f64,
    /// eps |Z^m h|^2_{1/2}
    pub eps_h_half: f64,
}

impl ThetaAddends {
    pub const NAMES: [&'static str; 10] = [
        "pv",
        "grad_pv",
        "lap_p",
        "h",
        "sigma_grad_h",
        "grad_pv_sup",
        "eps_grad_pv",
        "eps_lap_p",
        "eps_hess_v_sup",
        "eps_h_half",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.pv,
            self.grad_pv,
            self.lap_p,
            self.h,
            self.sigma_grad_h,
            self.grad_pv_sup,
            self.eps_grad_pv,
            self.eps_lap_p,
            self.eps_hess_v_sup,
            self.eps_h_half,
        ]
    }

    pub fn sum(&self) -> f64 {
        self.values().iter().sum()
    }
}

/// Integrands of the time-integral part of Theta.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ThetaIntegrands {
    /// ||grad p||^2_{H^{m-1}}
    pub grad_p: f64,
    /// ||Delta^phi p||^2_{H^2}
    pub lap_p: f64,
    /// ||grad v||^4_{H^{m-1}}
    pub grad_v_quartic: f64,
    /// eps (||grad v||^2_{H^m} + ||grad^2 v||^2_{H^{m-2}})
    pub eps_viscous: f64,
    /// eps^2 ||grad^2 v||^2_{H^{m-1}}
    pub eps2_hess_v: f64,
}

impl ThetaIntegrands {
    pub const NAMES: [&'static str; 5] = ["int_grad_p", "int_lap_p", "int_grad_v4", "int_eps_visc", "int_eps2_hess_v"];

    pub fn values(&self) -> [f64; 5] {
        [self.grad_p, self.lap_p, self.grad_v_quartic, self.eps_viscous, self.eps2_hess_v]
    }
}

/// Plain gradient (d_1, d_2, d_z) of a stack, levelwise.
fn grad(ops: &Ops, f: &Stack) -> Vec<Stack> {
    let d = ops.grid.d_h;
    let mut out: Vec<Stack> = (0..d).map(|k| f.map_linear(|g| ops.dy(g, k))).collect();
    out.push(f.map_linear(|g| ops.dz(g)));
    out
}

/// All second plain derivatives, each unordered pair once.
fn hessian(ops: &Ops, f: &Stack) -> Vec<Stack> {
    let d = ops.grid.d_h;
    let mut out = Vec::new();
    for a in 0..=d {
        for b in a..=d {
            let s = match (a < d, b < d) {
                (true, true) => f.map_linear(|g| ops.dy(&ops.dy(g, a), b)),
                (true, false) => f.map_linear(|g| ops.dy(&ops.dz(g), a)),
                _ => f.map_linear(|g| ops.dzz(g)),
            };
            out.push(s);
        }
    }
    out
}

/// sum_f ||f||^2_{H^k}; zero for negative k.
fn norm_sq(ops: &Ops, fields: &[Stack], k: isize, a0_max: usize) -> Result<f64, ContractError> {
    if k < 0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for f in fields {
        s += conormal_norm_sq(ops, f, k as usize, a0_max, None)?;
    }
    Ok(s)
}

/// sum_{beta_1 + beta_2 <= k} xi_1^{2 beta_1} xi_2^{2 beta_2} at mode i.
fn mode_weight(ops: &Ops, i: usize, k: usize) -> f64 {
    let x1 = ops.spec.ik(0, i).norm_sqr();
    let x2 = if ops.grid.d_h == 2 { ops.spec.ik(1, i).norm_sqr() } else { 0.0 };
    let mut w = 0.0;
    for b1 in 0..=k {
        let b2max = if ops.grid.d_h == 2 { k - b1 } else { 0 };
        for b2 in 0..=b2max {
            w += x1.powi(b1 as i32) * x2.powi(b2 as i32);
        }
    }
    w
}

/// Surface conormal norm sum_{|alpha| <= k, alpha_0 <= a0_max} of
/// (1 + |xi|^2)^s |hat(Z^alpha h)|^2, normalized as an integral.
fn surface_norm_sq(ops: &Ops, h: &[Array1<f64>], k: usize, a0_max: usize, s: f64) -> f64 {
    let scale = ops.grid.cell_area() / ops.nh() as f64;
    let mut total = 0.0;
    for (a0, level) in h.iter().enumerate().take(a0_max.min(k) + 1) {
        let c = ops.spec.forward(level.as_slice().unwrap());
        for (i, ci) in c.iter().enumerate() {
            let w = if s == 0.0 { 1.0 } else { (1.0 + ops.spec.ksq[i]).powf(s) };
            total += w * mode_weight(ops, i, k - a0) * ci.norm_sqr();
        }
    }
    total * scale
}

/// Instantaneous addends and time-integral integrands at cap `spec.m_cap`.
pub fn theta_terms(
    ops: &Ops,
    st: &TimeStacks,
    ph: &PhysParams,
    spec: &ThetaSpec,
) -> Result<(ThetaAddends, ThetaIntegrands), ContractError> {
    spec.check()?;
    let m = spec.m_cap as isize;
    let a0 = spec.a0_max.min(spec.m_cap);
    if st.h.len() <= a0 {
        return Err(ContractError(format!("Theta with alpha_0 <= {a0} needs time stacks of depth {}", a0 + 1)));
    }
    let eps = ph.eps;
    let mut pv = vec![st.p.clone()];
    pv.extend(st.v.iter().cloned());
    let grad_p = grad(ops, &st.p);
    let grad_v: Vec<Stack> = st.v.iter().flat_map(|vc| grad(ops, vc)).collect();
    let grad_pv: Vec<Stack> = grad_p.iter().chain(&grad_v).cloned().collect();
    let hess_v: Vec<Stack> = st.v.iter().flat_map(|vc| hessian(ops, vc)).collect();
    let lap_p = [laplace_phi_stack(ops, &st.p, &st.metric)];

    let mut grad_pv_sup = 0.0;
    for f in &grad_pv {
        grad_pv_sup += conormal_sup_sq(ops, f, 1, a0)?;
    }
    let hess_sup = hess_v.iter().map(|f| sup(f.value())).fold(0.0, f64::max);
    let d = ops.grid.d_h;
    let mut sigma_grad_h = 0.0;
    if ph.sigma > 0.0 {
        for k in 0..d {
            let gh: Vec<Array1<f64>> = st.h.iter().map(|l| ops.dy_surface(l, k)).collect();
            sigma_grad_h += surface_norm_sq(ops, &gh, spec.m_cap, a0, 0.0);
        }
        sigma_grad_h *= ph.sigma;
    }
    let addends = ThetaAddends {
        pv: norm_sq(ops, &pv, m, a0)?,
        grad_pv: norm_sq(ops, &grad_pv, m - 2, a0)?,
        lap_p: norm_sq(ops, &lap_p, 1, a0)?,
        h: surface_norm_sq(ops, &st.h, spec.m_cap, a0, 0.0),
        sigma_grad_h,
        grad_pv_sup,
        eps_grad_pv: if eps > 0.0 { eps * norm_sq(ops, &grad_pv, m - 1, a0)? } else { 0.0 },
        eps_lap_p: if eps > 0.0 { eps * norm_sq(ops, &lap_p, 2, a0)? } else { 0.0 },
        eps_hess_v_sup: eps * hess_sup * hess_sup,
        eps_h_half: if eps > 0.0 { eps * surface_norm_sq(ops, &st.h, spec.m_cap, a0, 0.5) } else { 0.0 },
    };
    let gv = norm_sq(ops, &grad_v, m - 1, a0)?;
    let integrands = ThetaIntegrands {
        grad_p: norm_sq(ops, &grad_p, m - 1, a0)?,
        lap_p: norm_sq(ops, &lap_p, 2, a0)?,
        grad_v_quartic: gv * gv,
        eps_viscous: if eps > 0.0 {
            eps * (norm_sq(ops, &grad_v, m, a0)? + norm_sq(ops, &hess_v, m - 2, a0)?)
        } else {
            0.0
        },
        eps2_hess_v: if eps > 0.0 { eps * eps * norm_sq(ops, &hess_v, m - 1, a0)? } else { 0.0 },
    };
    Ok((addends, integrands))
}

/// Running Theta(T) = sup_t (1 + sum of addends) + trapezoid integrals.
#[derive(Debug, Clone, Default)]
pub struct ThetaAccumulator {
    sup: f64,
    integrals: [f64; 5],
    last: Option<(f64, [f64; 5])>,
}

impl ThetaAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, t: f64, a: &ThetaAddends, i: &ThetaIntegrands) -> f64 {
        self.sup = self.sup.max(1.0 + a.sum());
        let now = i.values();
        if let Some((t0, prev)) = self.last {
            for k in 0..5 {
                self.integrals[k] += 0.5 * (t - t0) * (prev[k] + now[k]);
            }
        }
        self.last = Some((t, now));
        self.value()
    }

    pub fn integrals(&self) -> [f64; 5] {
        self.integrals
    }

    pub fn value(&self) -> f64 {
        self.sup.max(1.0) + self.integrals.iter().sum::<f64>()
    }
}

/// Alinhac good unknowns V^alpha = Z^alpha v - d_z^phi v Z^alpha eta and
/// Q^alpha = Z^alpha p - d_z^phi p Z^alpha eta.
pub fn good_unknowns(ops: &Ops, st: &TimeStacks, alpha: &Alpha) -> Result<(Vec<Array2<f64>>, Array2<f64>), ContractError> {
    if order(alpha) == 0 {
        return Err(ContractError("good unknowns need |alpha| >= 1".into()));
    }
    let z_eta = conormal_apply(ops, &st.metric.eta, alpha)?.levels.swap_remove(0);
    let jac = st.metric.jac0();
    let good = |f: &Stack| -> Result<Array2<f64>, ContractError> {
        let mut out = conormal_apply(ops, f, alpha)?.levels.swap_remove(0);
        out -= &(ops.dz(f.value()) / jac * &z_eta);
        Ok(out)
    };
    let v = st.v.iter().map(good).collect::<Result<Vec<_>, _>>()?;
    let q = good(&st.p)?;
    Ok((v, q))
}

/// (alpha, ||V^alpha||, ||Q^alpha||) for 1 <= |alpha| <= m.
pub fn good_unknown_norms(ops: &Ops, st: &TimeStacks, m: usize, a0_max: usize) -> Result<Vec<(Alpha, f64, f64)>, ContractError> {
    let mut out = Vec::new();
    for alpha in multi_indices(m, a0_max.min(st.h.len() - 1), ops.grid.d_h) {
        if order(&alpha) == 0 {
            continue;
        }
        let (v, q) = good_unknowns(ops, st, &alpha)?;
        let vn: f64 = v.iter().map(|f| ops.l2_sq(f)).sum::<f64>().sqrt();
        out.push((alpha, vn, ops.l2_sq(&q).sqrt()));
    }
    Ok(out)
}

/// min_y of -d_z^phi p at z = 0 from the one-sided stencil. The stencil is
/// applied to differences from the top value, so a vertically constant
/// pressure gives exactly 0.
pub fn taylor_sign(ops: &Ops, p: &Array2<f64>, metric: &ChartMetric) -> f64 {
    let nz = ops.nz();
    let st = &ops.grid.d1[nz - 1];
    let top = p.row(nz - 1);
    let jt = metric.jac0().row(nz - 1);
    let mut best = f64::INFINITY;
    for i in 0..ops.nh() {
        let mut dz = 0.0;
        for (k, &w) in st.w.iter().enumerate() {
            dz += w * (p[[st.start + k, i]] - top[i]);
        }
        best = best.min(-dz / jt[i]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::assemble_chart;
    use crate::grid::{GridParams, GridSpec};

    fn ops(d_h: usize) -> Ops {
        Ops::new(
            GridSpec::build(&GridParams {
                d_h,
                n_y: 16,
                n_z: 33,
                z_max: 2.0,
                stretch: Some(1.5),
                ..Default::default()
            })
            .unwrap(),
        )
    }

    fn stacks(o: &Ops, p: Array2<f64>, v: Vec<Array2<f64>>, h: Array1<f64>, depth: usize) -> TimeStacks {
        let hs: Vec<Array1<f64>> = (0..depth).map(|k| if k == 0 { h.clone() } else { Array1::zeros(o.nh()) }).collect();
        TimeStacks {
            rho: Stack::constant(p.clone(), depth),
            p: Stack::constant(p, depth),
            v: v.into_iter().map(|f| Stack::constant(f, depth)).collect(),
            metric: assemble_chart(o, &hs, 1.0),
            h: hs,
        }
    }

    #[test]
    fn zero_state_gives_one() {
        let o = ops(1);
        let st = stacks(&o, o.zeros(), vec![o.zeros(), o.zeros()], Array1::zeros(o.nh()), 2);
        let ph = PhysParams::default();
        let (a, i) = theta_terms(&o, &st, &ph, &ThetaSpec::default()).unwrap();
        let mut acc = ThetaAccumulator::new();
        assert_eq!(acc.record(0.0, &a, &i), 1.0);
    }

    #[test]
    fn constant_pressure_closed_form() {
        let o = ops(2);
        let pe = 1.3;
        let st = stacks(&o, o.constant(pe), vec![o.zeros(); 3], Array1::zeros(o.nh()), 2);
        let ph = PhysParams::default();
        let (a, i) = theta_terms(&o, &st, &ph, &ThetaSpec { m_cap: 2, a0_max: 1 }).unwrap();
        let vol = o.grid.length.powi(2) * o.grid.z_max;
        assert!((a.pv - pe * pe * vol).abs() < 1e-10 * vol, "{}", a.pv);
        let rest: f64 = a.values()[1..].iter().sum::<f64>() + i.values().iter().sum::<f64>();
        assert!(rest < 1e-20, "{rest}");
    }

    #[test]
    fn cap_above_limit_is_rejected() {
        let o = ops(1);
        let st = stacks(&o, o.zeros(), vec![o.zeros(), o.zeros()], Array1::zeros(o.nh()), 2);
        let r = theta_terms(&o, &st, &PhysParams::default(), &ThetaSpec { m_cap: 7, a0_max: 1 });
        assert!(r.is_err());
    }

    #[test]
    fn flat_chart_good_unknowns_are_plain_derivatives() {
        let o = ops(1);
        let v = vec![o.sample(|y, z| y[0].sin() * z.exp()), o.sample(|y, z| (2.0 * y[0]).cos() * z)];
        let p = o.sample(|y, z| 1.0 + 0.1 * y[0].cos() * (z * 0.5).exp());
        let st = stacks(&o, p, v, Array1::zeros(o.nh()), 1);
        for alpha in multi_indices(2, 0, 1) {
            if order(&alpha) == 0 {
                continue;
            }
            let (gv, _) = good_unknowns(&o, &st, &alpha).unwrap();
            for (c, g) in gv.iter().enumerate() {
                let plain = conormal_apply(&o, &st.v[c], &alpha).unwrap();
                assert_eq!(g, plain.value());
            }
        }
    }

    #[test]
    fn good_unknown_matches_direct_formula() {
        let o = ops(1);
        let h = o.sample_surface(|y| 0.1 * y[0].cos() + 0.05 * (2.0 * y[0]).sin());
        let v = vec![o.sample(|y, z| y[0].sin() * z.exp()), o.sample(|y, z| (2.0 * y[0]).cos() * z)];
        let p = o.sample(|y, z| 1.0 + 0.1 * y[0].cos() * (z * 0.5).exp());
        let st = stacks(&o, p, v.clone(), h, 1);
        for alpha in [[0, 1, 0, 0], [0, 0, 0, 1]] {
            let (gv, _) = good_unknowns(&o, &st, &alpha).unwrap();
            let z_eta = crate::calculus::conormal_apply0(&o, st.metric.eta.value(), &alpha);
            for c in 0..2 {
                let direct = crate::calculus::conormal_apply0(&o, &v[c], &alpha) - &(o.dz(&v[c]) / st.metric.jac0() * &z_eta);
                let err = (&gv[c] - &direct).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!(err <= 1e-10, "{err}");
            }
        }
    }

    #[test]
    fn good_unknown_correction_is_linear_in_amplitude() {
        let o = ops(1);
        let v = vec![o.sample(|y, z| y[0].sin() * z.exp()), o.sample(|y, z| (2.0 * y[0]).cos() * z)];
        let p = o.constant(1.0);
        let corr = |amp: f64| {
            let h = o.sample_surface(|y| amp * y[0].cos());
            let st = stacks(&o, p.clone(), v.clone(), h, 1);
            let alpha = [0, 1, 0, 0];
            let (gv, _) = good_unknowns(&o, &st, &alpha).unwrap();
            (0..2)
                .map(|c| o.l2_sq(&(conormal_apply(&o, &st.v[c], &alpha).unwrap().value() - &gv[c])))
                .sum::<f64>()
                .sqrt()
        };
        let r = corr(2e-4) / corr(1e-4);
        assert!((r - 2.0).abs() < 0.1, "{r}");
    }

    #[test]
    fn taylor_sign_cases() {
        let o = ops(1);
        let h = Array1::zeros(o.nh());
        let metric = assemble_chart(&o, &[h], 1.0);
        let lin = o.sample(|_, z| 1.0 - z);
        assert!((taylor_sign(&o, &lin, &metric) - 1.0).abs() < 1e-12);
        assert_eq!(taylor_sign(&o, &o.constant(1.7), &metric), 0.0);
    }
}
