//! Transformed derivatives d_i^phi, viscous operators, conormal fields and
//! norms, and the two-route commutator evaluation.
//!
//! Directions are numbered 0 = t, 1, 2 = horizontal, 3 = z. Vector fields
//! carry `d_h + 1` components; component `c` points in direction
//! [`comp_dir`]`(d_h, c)`.

use crate::error::ContractError;
use crate::field::{Ops, Stack};
use crate::geometry::ChartMetric;
use ndarray::Array2;

/// Conormal multi-index (alpha_0, alpha_1, alpha_2, alpha_3).
pub type Alpha = [usize; 4];

pub fn order(a: &Alpha) -> usize {
    a.iter().sum()
}

pub fn comp_dir(d_h: usize, c: usize) -> usize {
    if c < d_h {
        c + 1
    } else {
        3
    }
}

/// All multi-indices with |alpha| <= m, alpha_0 <= a0_max, alpha_2 = 0 when d_h = 1.
pub fn multi_indices(m: usize, a0_max: usize, d_h: usize) -> Vec<Alpha> {
    let mut out = Vec::new();
    for a0 in 0..=m.min(a0_max) {
        for a1 in 0..=(m - a0) {
            let a2max = if d_h == 2 { m - a0 - a1 } else { 0 };
            for a2 in 0..=a2max {
                for a3 in 0..=(m - a0 - a1 - a2) {
                    out.push([a0, a1, a2, a3]);
                }
            }
        }
    }
    out
}

fn need(cond: bool, msg: &str) -> Result<(), ContractError> {
    if cond {
        Ok(())
    } else {
        Err(ContractError(msg.to_string()))
    }
}

/// d_i phi as a stack; direction 3 gives the constant -1.
fn dphi_coef(ops: &Ops, metric: &ChartMetric, i: usize) -> Result<Stack, ContractError> {
    match i {
        0 => metric
            .dphi_t
            .clone()
            .ok_or_else(|| ContractError("d_t^phi needs the d_t h stack in the chart".into())),
        1 | 2 => Ok(metric.dphi_y[i - 1].clone()),
        3 => Ok(Stack::constant(ops.constant(-1.0), metric.depth())),
        _ => Err(ContractError(format!("direction {i} out of range"))),
    }
}

/// Plain partial derivative d_i (t via the stack, y spectrally, d_3 = 0).
fn plain(ops: &Ops, f: &Stack, i: usize) -> Result<Stack, ContractError> {
    match i {
        0 => f
            .shift(1)
            .ok_or_else(|| ContractError("d_t needs a supplied time-derivative stack".into())),
        1 | 2 => Ok(f.map_linear(|g| ops.dy(g, i - 1))),
        3 => Ok(f.map_linear(|g| g * 0.0)),
        _ => Err(ContractError(format!("direction {i} out of range"))),
    }
}

/// d_i^phi f = d_i f - (d_i phi / J) d_z f; d_3^phi f = d_z f / J.
pub fn dphi(ops: &Ops, f: &Stack, metric: &ChartMetric, i: usize) -> Result<Stack, ContractError> {
    let dzf = f.map_linear(|g| ops.dz(g));
    let rj = metric.jac.recip();
    if i == 3 {
        return Ok(dzf.mul(&rj));
    }
    let df = plain(ops, f, i)?;
    let coef = dphi_coef(ops, metric, i)?.mul(&rj);
    Ok(df.sub(&coef.mul(&dzf)))
}

/// Spatial d_i^phi on a single field (i in 1..=3).
pub fn dphi0(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric, i: usize) -> Array2<f64> {
    assert!((1..=3).contains(&i));
    let dzf = ops.dz(f);
    let j = metric.jac0();
    if i == 3 {
        return dzf / j;
    }
    let mut out = ops.dy(f, i - 1);
    let a = metric.dphi_y[i - 1].value() / j;
    out -= &(&a * &dzf);
    out
}

/// Conservative (Piola) route: d_i^phi f = (1/J)[d_i(J f) - d_z(d_i phi f)].
pub fn dphi0_conservative(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric, i: usize) -> Array2<f64> {
    assert!((1..=3).contains(&i));
    let j = metric.jac0();
    if i == 3 {
        return ops.dz(f) / j;
    }
    let mut out = ops.dy(&(j * f), i - 1);
    out -= &ops.dz(&(metric.dphi_y[i - 1].value() * f));
    out / j
}

/// div^phi v = sum_c d^phi_{dir(c)} v_c.
pub fn div_phi(ops: &Ops, v: &[Array2<f64>], metric: &ChartMetric) -> Array2<f64> {
    let d = ops.grid.d_h;
    assert_eq!(v.len(), d + 1, "component count must be d_h + 1");
    let mut out = ops.zeros();
    for (c, vc) in v.iter().enumerate() {
        out += &dphi0(ops, vc, metric, comp_dir(d, c));
    }
    out
}

pub fn grad_phi(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric) -> Vec<Array2<f64>> {
    let d = ops.grid.d_h;
    (0..=d).map(|c| dphi0(ops, f, metric, comp_dir(d, c))).collect()
}

/// `g[c][k] = d^phi_{dir(k)} v_c`.
pub fn grad_vec_phi(ops: &Ops, v: &[Array2<f64>], metric: &ChartMetric) -> Vec<Vec<Array2<f64>>> {
    v.iter().map(|vc| grad_phi(ops, vc, metric)).collect()
}

/// S^phi v = (grad + grad^t)/2.
pub fn sym_grad_phi(ops: &Ops, v: &[Array2<f64>], metric: &ChartMetric) -> Vec<Vec<Array2<f64>>> {
    let g = grad_vec_phi(ops, v, metric);
    let n = v.len();
    (0..n)
        .map(|a| (0..n).map(|b| (&g[a][b] + &g[b][a]) * 0.5).collect())
        .collect()
}

/// Delta^phi in divergence form (1/J) div(E grad f) on a stack.
pub fn laplace_phi_stack(ops: &Ops, f: &Stack, metric: &ChartMetric) -> Stack {
    let d = ops.grid.d_h;
    let jac = &metric.jac;
    let dzf = f.map_linear(|g| ops.dz(g));
    // |grad_y phi|^2
    let mut gy2 = metric.dphi_y[0].mul(&metric.dphi_y[0]);
    if d == 2 {
        gy2 = gy2.add(&metric.dphi_y[1].mul(&metric.dphi_y[1]));
    }
    let rj = jac.recip();
    let mut f3 = gy2.add_scalar(1.0).mul(&rj).mul(&dzf);
    let mut div = None::<Stack>;
    for k in 0..d {
        let dkf = f.map_linear(|g| ops.dy(g, k));
        let fk = jac.mul(&dkf).sub(&metric.dphi_y[k].mul(&dzf));
        f3 = f3.sub(&metric.dphi_y[k].mul(&dkf));
        let t = fk.map_linear(|g| ops.dy(g, k));
        div = Some(match div {
            None => t,
            Some(s) => s.add(&t),
        });
    }
    let t3 = f3.map_linear(|g| ops.dz(g));
    let total = match div {
        None => t3,
        Some(s) => s.add(&t3),
    };
    total.mul(&rj)
}

pub fn laplace_phi(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric) -> Array2<f64> {
    laplace_phi_stack(ops, &Stack::from(f.clone()), metric).levels.swap_remove(0)
}

/// Composed route sum_i d_i^phi d_i^phi f.
pub fn laplace_phi_composed(ops: &Ops, f: &Array2<f64>, metric: &ChartMetric) -> Array2<f64> {
    let d = ops.grid.d_h;
    let mut out = ops.zeros();
    for c in 0..=d {
        let i = comp_dir(d, c);
        out += &dphi0(ops, &dphi0(ops, f, metric, i), metric, i);
    }
    out
}

/// Z^alpha on a stack: Z_0 by shifting, Z_1, Z_2 spectrally, Z_3 by stencil.
pub fn conormal_apply(ops: &Ops, f: &Stack, alpha: &Alpha) -> Result<Stack, ContractError> {
    need(alpha[2] == 0 || ops.grid.d_h == 2, "Z_2 needs d_h = 2")?;
    let mut s = f
        .shift(alpha[0])
        .ok_or_else(|| ContractError(format!("Z_0^{} needs a time stack of depth {}", alpha[0], alpha[0] + 1)))?;
    for _ in 0..alpha[1] {
        s = s.map_linear(|g| ops.dy(g, 0));
    }
    for _ in 0..alpha[2] {
        s = s.map_linear(|g| ops.dy(g, 1));
    }
    for _ in 0..alpha[3] {
        s = s.map_linear(|g| ops.z3(g));
    }
    Ok(s)
}

/// Spatial Z^alpha (alpha_0 = 0) of a single field.
pub fn conormal_apply0(ops: &Ops, f: &Array2<f64>, alpha: &Alpha) -> Array2<f64> {
    let mut a = *alpha;
    a[0] = 0;
    conormal_apply(ops, &Stack::from(f.clone()), &a)
        .expect("spatial conormal derivative")
        .levels
        .swap_remove(0)
}

/// All Z^alpha f (value level) for |alpha| <= m, alpha_0 <= a0_max, built
/// along a tree so each field costs one derivative.
pub fn conormal_family(
    ops: &Ops,
    f: &Stack,
    m: usize,
    a0_max: usize,
) -> Result<Vec<(Alpha, Array2<f64>)>, ContractError> {
    let a0_max = a0_max.min(m);
    need(
        f.depth() > a0_max,
        &format!("conormal norm with alpha_0 <= {a0_max} needs a time stack of depth {}", a0_max + 1),
    )?;
    let d = ops.grid.d_h;
    let mut out: Vec<(Alpha, Array2<f64>)> = Vec::new();
    for a0 in 0..=a0_max {
        let base = f.levels[a0].clone();
        let mut layer: Vec<(Alpha, Array2<f64>)> = vec![([a0, 0, 0, 0], base)];
        for _ in a0..m {
            let mut next = Vec::new();
            for (al, g) in &layer {
                // extend only in directions >= the last used one to avoid duplicates
                let last = (1..4).rev().find(|&k| al[k] > 0).unwrap_or(1);
                for k in last..4 {
                    if k == 2 && d == 1 {
                        continue;
                    }
                    let mut nal = *al;
                    nal[k] += 1;
                    let ng = match k {
                        1 => ops.dy(g, 0),
                        2 => ops.dy(g, 1),
                        _ => ops.z3(g),
                    };
                    next.push((nal, ng));
                }
            }
            out.append(&mut layer);
            layer = next;
        }
        out.append(&mut layer);
    }
    Ok(out)
}

/// ||f||^2 = sum_{|alpha| <= m} ||Z^alpha f||^2 (plain or J-weighted measure).
pub fn conormal_norm_sq(
    ops: &Ops,
    f: &Stack,
    m: usize,
    a0_max: usize,
    weight: Option<&Array2<f64>>,
) -> Result<f64, ContractError> {
    let fam = conormal_family(ops, f, m, a0_max)?;
    Ok(fam
        .iter()
        .map(|(_, g)| match weight {
            Some(j) => ops.l2_sq_weighted(g, j),
            None => ops.l2_sq(g),
        })
        .sum())
}

pub fn conormal_norm(
    ops: &Ops,
    f: &Stack,
    m: usize,
    a0_max: usize,
    weight: Option<&Array2<f64>>,
) -> Result<f64, ContractError> {
    conormal_norm_sq(ops, f, m, a0_max, weight).map(f64::sqrt)
}

/// Sup-norm version: sum_{|alpha| <= m} ||Z^alpha f||_inf^2.
pub fn conormal_sup_sq(ops: &Ops, f: &Stack, m: usize, a0_max: usize) -> Result<f64, ContractError> {
    let fam = conormal_family(ops, f, m, a0_max)?;
    Ok(fam.iter().map(|(_, g)| crate::field::sup(g).powi(2)).sum())
}

/// Defining route: Z^a(d_i^phi f) - d_i^phi(Z^a f) + d_z^phi f d_i^phi(Z^a eta).
pub fn commutator_residual(
    ops: &Ops,
    f: &Stack,
    alpha: &Alpha,
    i: usize,
    metric: &ChartMetric,
) -> Result<Array2<f64>, ContractError> {
    need(order(alpha) >= 1, "commutator needs |alpha| >= 1")?;
    let lhs = conormal_apply(ops, &dphi(ops, f, metric, i)?, alpha)?;
    let zf = conormal_apply(ops, f, alpha)?;
    let t1 = dphi(ops, &zf, metric, i)?;
    let zeta = conormal_apply(ops, &metric.eta, alpha)?;
    let t2 = dphi(ops, f, metric, 3)?.mul(&dphi(ops, &zeta, metric, i)?);
    Ok(&(lhs.value() - t1.value()) + t2.value())
}

/// Symmetric commutator [Z^a, f, g] = sum over beta + gamma = alpha with
/// beta, gamma != 0 of binomial weights times Z^beta f Z^gamma g.
fn sym_commutator(ops: &Ops, f: &Stack, g: &Stack, alpha: &Alpha) -> Result<Stack, ContractError> {
    let mut acc: Option<Stack> = None;
    for b0 in 0..=alpha[0] {
        for b1 in 0..=alpha[1] {
            for b2 in 0..=alpha[2] {
                for b3 in 0..=alpha[3] {
                    let beta = [b0, b1, b2, b3];
                    let gamma = [alpha[0] - b0, alpha[1] - b1, alpha[2] - b2, alpha[3] - b3];
                    if order(&beta) == 0 || order(&gamma) == 0 {
                        continue;
                    }
                    let c: f64 = (0..4).map(|k| binom(alpha[k], beta[k])).product();
                    let t = conormal_apply(ops, f, &beta)?
                        .mul(&conormal_apply(ops, g, &gamma)?)
                        .scale(c);
                    acc = Some(match acc {
                        None => t,
                        Some(a) => a.add(&t),
                    });
                }
            }
        }
    }
    Ok(acc.unwrap_or_else(|| Stack::constant(ops.zeros(), 1)))
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |b, i| b * (n - i) as f64 / (i + 1) as f64)
}

/// [Z^a, d_z] g.
fn z_dz_commutator(ops: &Ops, g: &Stack, alpha: &Alpha) -> Result<Stack, ContractError> {
    let a = conormal_apply(ops, &g.map_linear(|x| ops.dz(x)), alpha)?;
    let b = conormal_apply(ops, g, alpha)?.map_linear(|x| ops.dz(x));
    Ok(a.sub(&b))
}

/// Expanded route C_{i,1} + C_{i,2} + C_{i,3}.
pub fn commutator_expanded(
    ops: &Ops,
    f: &Stack,
    alpha: &Alpha,
    i: usize,
    metric: &ChartMetric,
) -> Result<Array2<f64>, ContractError> {
    need(order(alpha) >= 1, "commutator needs |alpha| >= 1")?;
    let dphi_i = dphi_coef(ops, metric, i)?;
    let jac = &metric.jac;
    let rj = jac.recip();
    let dzf = f.map_linear(|g| ops.dz(g));
    let a_i = dphi_i.mul(&rj);
    let c1 = sym_commutator(ops, &a_i, &dzf, alpha)?.neg();
    let dz_eta = jac.add_scalar(-metric.a);
    let z_rj = conormal_apply(ops, &rj, alpha)?;
    let z_dzeta = conormal_apply(ops, &dz_eta, alpha)?;
    let bracket = z_rj.add(&z_dzeta.mul(&rj).mul(&rj));
    let c2 = sym_commutator(ops, &dphi_i, &rj, alpha)?
        .mul(&dzf)
        .neg()
        .sub(&dphi_i.mul(&bracket).mul(&dzf));
    let c3 = a_i
        .mul(&z_dz_commutator(ops, f, alpha)?)
        .neg()
        .add(&dphi_i.mul(&rj).mul(&rj).mul(&dzf).mul(&z_dz_commutator(ops, &metric.eta, alpha)?));
    Ok(&(c1.value() + c2.value()) + c3.value())
}
