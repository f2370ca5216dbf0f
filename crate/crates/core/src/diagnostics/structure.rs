//! Normal-derivative identities, S_n and zeta_n traces. Vectors are embedded
//! in three components (y_1, y_2, z); the y_2 slot is zero when d_h = 1,
//! which reduces the vorticity to its single out-of-plane component.

use crate::calculus::{dphi0, dphi0_conservative};
use crate::dynamics::{kinematic_dt, FlowState, Model};
use crate::field::{sup, Ops};
use crate::geometry::ChartMetric;
use ndarray::Array2;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residual {
    pub sup: f64,
    pub l2: f64,
}

impl Residual {
    fn of(ops: &Ops, r: &[Array2<f64>]) -> Residual {
        Residual {
            sup: r.iter().map(sup).fold(0.0, f64::max),
            l2: r.iter().map(|f| ops.l2_sq(f)).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StructuralResiduals {
    /// d_z v . n = J/|N| (div^phi v - d_1 v_1 - d_2 v_2).
    pub normal_divergence: Residual,
    /// 2 S_n = omega_n + 2 Pi (d_1 v . N, d_2 v . N, 0).
    pub vorticity: Residual,
    /// sup |Pi (S^phi v N)| at z = 0.
    pub sn_trace: f64,
    /// sup |S^phi v N| at z = 0, the scale for `sn_trace`.
    pub sn_scale: f64,
    /// sup |zeta_n| at z = 0.
    pub zeta_trace: f64,
}

type Vec3 = [Array2<f64>; 3];

fn embed(ops: &Ops, v: &[Array2<f64>]) -> Vec3 {
    if ops.grid.d_h == 2 {
        [v[0].clone(), v[1].clone(), v[2].clone()]
    } else {
        [v[0].clone(), ops.zeros(), v[1].clone()]
    }
}

/// Transformed gradient (d^phi_1, d^phi_2, d^phi_3) of a scalar.
fn grad(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric, conservative: bool) -> Vec3 {
    let d = ops.grid.d_h;
    let one = |i: usize| {
        if i == 2 && d == 1 {
            ops.zeros()
        } else if conservative {
            dphi0_conservative(ops, f, metric, i)
        } else {
            dphi0(ops, f, metric, i)
        }
    };
    [one(1), one(2), one(3)]
}

/// `g[a][b] = d^phi_b v_a`.
fn jacobian(ops: &Ops, v: &Vec3, metric: &ChartMetric, conservative: bool) -> [Vec3; 3] {
    [
        grad(ops, &v[0], metric, conservative),
        grad(ops, &v[1], metric, conservative),
        grad(ops, &v[2], metric, conservative),
    ]
}

fn dot(a: &Vec3, b: &Vec3) -> Array2<f64> {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

fn project(metric: &ChartMetric, x: &Vec3) -> Vec3 {
    let n = &metric.unit_normal;
    let xn = dot(x, n);
    [&x[0] - &(&xn * &n[0]), &x[1] - &(&xn * &n[1]), &x[2] - &(&xn * &n[2])]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

/// S^phi v N from a velocity Jacobian.
fn strain_normal(g: &[Vec3; 3], nn: &Vec3) -> Vec3 {
    let row = |a: usize| {
        let mut out = Array2::zeros(nn[0].raw_dim());
        for b in 0..3 {
            out += &((&g[a][b] + &g[b][a]) * 0.5 * &nn[b]);
        }
        out
    };
    [row(0), row(1), row(2)]
}

fn curl(g: &[Vec3; 3]) -> Vec3 {
    [&g[2][1] - &g[1][2], &g[0][2] - &g[2][0], &g[1][0] - &g[0][1]]
}

fn plain_dy(ops: &Ops, f: &Array2<f64>, k: usize) -> Array2<f64> {
    ops.dy(f, k)
}

/// Residuals of the two identities, each side on a different discrete
/// route: conservative transformed derivatives on one side, chain-rule
/// derivatives on the other.
pub fn identity_residuals(ops: &Ops, v: &[Array2<f64>], metric: &ChartMetric) -> (Residual, Residual) {
    let v3 = embed(ops, v);
    let nn = metric.normal.clone();
    let n = &metric.unit_normal;
    let jac = metric.jac0();

    let dzv: Vec3 = [ops.dz(&v3[0]), ops.dz(&v3[1]), ops.dz(&v3[2])];
    let lhs = dot(&dzv, n);
    let gc = jacobian(ops, &v3, metric, true);
    let mut rest = &gc[0][0] + &gc[1][1] + &gc[2][2];
    rest -= &plain_dy(ops, &v3[0], 0);
    rest -= &plain_dy(ops, &v3[1], 1);
    let rhs = rest * jac / &metric.normal_len;
    let r1 = Residual::of(ops, &[lhs - rhs]);

    let sn2 = project(metric, &strain_normal(&gc, &nn)).map(|x| x * 2.0);
    let g = jacobian(ops, &v3, metric, false);
    let omega_n = cross(&curl(&g), &nn);
    let dv_n = |k: usize| {
        let dk: Vec3 = [plain_dy(ops, &v3[0], k), plain_dy(ops, &v3[1], k), plain_dy(ops, &v3[2], k)];
        dot(&dk, &nn)
    };
    let t = project(metric, &[dv_n(0), dv_n(1), ops.zeros()]);
    let r2: Vec<Array2<f64>> = (0..3).map(|a| &sn2[a] - &omega_n[a] - &(&t[a] * 2.0)).collect();
    (r1, Residual::of(ops, &r2))
}

/// Identity residuals plus the S_n and zeta_n traces at z = 0 (chain-rule
/// route, matching the boundary closure).
pub fn structural_residuals(m: &Model, s: &FlowState) -> StructuralResiduals {
    let ops = &m.ops;
    let h_t = kinematic_dt(m, s);
    let metric = m.chart(&s.h, &h_t);
    let (normal_divergence, vorticity) = identity_residuals(ops, &s.v, &metric);

    let v3 = embed(ops, &s.v);
    let nn = metric.normal.clone();
    let g = jacobian(ops, &v3, &metric, false);
    let sn_full = strain_normal(&g, &nn);
    let sn = project(&metric, &sn_full);
    let top_sup = |x: &Vec3| {
        x.iter()
            .map(|f| ops.top(f).iter().fold(0.0f64, |a, b| a.max(b.abs())))
            .fold(0.0, f64::max)
    };

    // zeta_n = omega_n + 2 Pi {(grad_y d_t eta, 0) - (grad^phi N)^t v}
    let omega_n = cross(&curl(&g), &nn);
    let eta_t = metric.dphi_t.as_ref().map(|st| st.value().clone()).unwrap_or_else(|| ops.zeros());
    let gn = jacobian(ops, &nn, &metric, false);
    let mut w: Vec3 = [plain_dy(ops, &eta_t, 0), plain_dy(ops, &eta_t, 1), ops.zeros()];
    for (a, wa) in w.iter_mut().enumerate() {
        for b in 0..3 {
            *wa -= &(&gn[b][a] * &v3[b]);
        }
    }
    let pw = project(&metric, &w);
    let zeta: Vec3 = [&omega_n[0] + &(&pw[0] * 2.0), &omega_n[1] + &(&pw[1] * 2.0), &omega_n[2] + &(&pw[2] * 2.0)];

    StructuralResiduals {
        normal_divergence,
        vorticity,
        sn_trace: top_sup(&sn),
        sn_scale: top_sup(&sn_full),
        zeta_trace: top_sup(&zeta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::assemble_chart;
    use crate::grid::{GridParams, GridSpec};
    use ndarray::Array1;

    fn ops(d_h: usize, n_z: usize) -> Ops {
        Ops::new(
            GridSpec::build(&GridParams {
                d_h,
                n_y: 16,
                n_z,
                z_max: 1.0,
                stretch: Some(1.0),
                ..Default::default()
            })
            .unwrap(),
        )
    }

    #[test]
    fn flat_rest_is_exact() {
        for d in [1, 2] {
            let o = ops(d, 17);
            let metric = assemble_chart(&o, &[Array1::zeros(o.nh())], 1.0);
            let v = vec![o.zeros(); d + 1];
            let (a, b) = identity_residuals(&o, &v, &metric);
            assert_eq!(a.sup, 0.0);
            assert_eq!(b.sup, 0.0);
        }
    }

    #[test]
    fn curved_chart_residuals_converge() {
        let fields = |o: &Ops| {
            let h = o.sample_surface(|y| 0.05 * y[0].cos() + 0.03 * (2.0 * y[0]).sin());
            let v = vec![
                o.sample(|y, z| 0.1 * (y[0] + z).sin()),
                o.sample(|y, z| 0.1 * (2.0 * y[0]).cos() * (0.5 * z).exp()),
            ];
            (assemble_chart(o, &[h], 1.2), v)
        };
        let mut prev: Option<(f64, f64)> = None;
        for n_z in [33, 65] {
            let o = ops(1, n_z);
            let (metric, v) = fields(&o);
            let (a, b) = identity_residuals(&o, &v, &metric);
            if let Some((pa, pb)) = prev {
                assert!(pa / a.sup >= 4.0, "{pa} -> {}", a.sup);
                assert!(pb / b.sup >= 4.0, "{pb} -> {}", b.sup);
            }
            prev = Some((a.sup, b.sup));
        }
    }
}
