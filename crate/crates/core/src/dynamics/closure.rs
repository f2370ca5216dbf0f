use super::{BottomBc, FlowState, Model};
use crate::error::HealthError;
use crate::field::sup1;
use crate::geometry::mean_curvature;
use ndarray::Array1;
use num_complex::Complex64;

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-12;
/// Residual accepted when the iteration stagnates above `TOL`.
const ACCEPT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureInfo {
    pub iterations: usize,
    /// Max stress residual after the closure (0 in Euler mode).
    pub residual: f64,
    /// Stress scale the residual is measured against.
    pub scale: f64,
}

/// Surface data that stays fixed while the top velocity is solved for.
struct Surface {
    /// N = (-grad h, 1).
    n: Vec<Array1<f64>>,
    /// a_c = d_c phi / J at z = 0 (a_3 = -1/A).
    a: Vec<Array1<f64>>,
    /// P N + g, the right-hand side of the stress balance.
    target: Vec<Array1<f64>>,
    /// Size of the individual pressure and capillary terms, which cancel
    /// near equilibrium.
    level: f64,
}

fn surface(m: &Model, s: &FlowState) -> Surface {
    let ops = &m.ops;
    let d = m.d_h();
    let ph = &m.phys;
    let mut n: Vec<Array1<f64>> = (0..d).map(|k| -ops.dy_surface(&s.h, k)).collect();
    n.push(Array1::ones(ops.nh()));
    let a: Vec<Array1<f64>> = n.iter().map(|nc| nc * (-1.0 / m.a)).collect();
    let hc = mean_curvature(ops, &s.h);
    let pr = ops.top(&s.rho).mapv(|r| r.powf(ph.gamma));
    let level = sup1(&pr).max(ph.p_e.abs()) + ph.sigma * sup1(&hc);
    let pterm = &(pr - ph.p_e) + &(hc * ph.sigma);
    let mut target: Vec<Array1<f64>> = n.iter().map(|nc| nc * &pterm).collect();
    if let Some(f) = &m.forcing {
        for (t, g) in target.iter_mut().zip(f.stress(s.t, ops)) {
            *t += &g;
        }
    }
    Surface { n, a, target, level }
}

/// Viscous traction eps (mu (G + G^t) N + lambda tr(G) N) at z = 0 for
/// surface values `u` and vertical derivatives `q`.
fn traction(m: &Model, sf: &Surface, u: &[Array1<f64>], q: &[Array1<f64>]) -> Vec<Array1<f64>> {
    let ops = &m.ops;
    let d = m.d_h();
    let (mu, lam, eps) = (m.phys.mu, m.phys.lambda, m.phys.eps);
    // g[c][k] = d^phi_k v_c at z = 0
    let g: Vec<Vec<Array1<f64>>> = (0..=d)
        .map(|c| {
            (0..=d)
                .map(|k| {
                    let mut x = -(&sf.a[k] * &q[c]);
                    if k < d {
                        x += &ops.dy_surface(&u[c], k);
                    }
                    x
                })
                .collect()
        })
        .collect();
    let mut div = Array1::zeros(ops.nh());
    for c in 0..=d {
        div += &g[c][c];
    }
    (0..=d)
        .map(|c| {
            let mut t = &div * &sf.n[c] * lam;
            for k in 0..=d {
                t += &((&g[c][k] + &g[k][c]) * &sf.n[k] * mu);
            }
            t * eps
        })
        .collect()
}

fn residual(m: &Model, sf: &Surface, u: &[Array1<f64>], q: &[Array1<f64>]) -> (Vec<Array1<f64>>, f64) {
    let t = traction(m, sf, u, q);
    let r: Vec<Array1<f64>> = t.iter().zip(&sf.target).map(|(a, b)| a - b).collect();
    let ph = &m.phys;
    let nmax = sf.n.iter().map(sup1).fold(0.0, f64::max);
    let qs: f64 = q.iter().map(sup1).fold(0.0, f64::max);
    let us: f64 = u
        .iter()
        .flat_map(|uc| (0..m.d_h()).map(move |k| sup1(&m.ops.dy_surface(uc, k))))
        .fold(0.0, f64::max);
    let scale = ph.eps * (2.0 * ph.mu + ph.lambda.abs()) * (qs / m.a + us) * nmax
        + (sf.target.iter().map(sup1).fold(0.0, f64::max)).max(sf.level * nmax)
        + 1e-300;
    (r, scale)
}

/// Stress-balance residual of the current top values, and its scale.
pub fn stress_residual(m: &Model, s: &FlowState) -> (Vec<Array1<f64>>, f64) {
    let sf = surface(m, s);
    let u: Vec<Array1<f64>> = s.v.iter().map(|vc| m.ops.top(vc).to_owned()).collect();
    let q: Vec<Array1<f64>> = s.v.iter().map(|vc| m.ops.dz_top(vc)).collect();
    residual(m, &sf, &u, &q)
}

/// Small dense complex solve with partial pivoting.
fn solve_small(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].norm().total_cmp(&a[y][k].norm())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                let t = a[k][c];
                a[r][c] -= f * t;
            }
            let t = b[k];
            b[r] -= f * t;
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s -= a[i][c] * b[c];
        }
        b[i] = s / a[i][i];
    }
    b
}

fn close_viscous_top(m: &Model, s: &mut FlowState) -> Result<ClosureInfo, HealthError> {
    let ops = &m.ops;
    let d = m.d_h();
    let nz = ops.nz();
    let (mu, lam, eps) = (m.phys.mu, m.phys.lambda, m.phys.eps);
    let st = &ops.grid.d1[nz - 1];
    let last = st.w.len() - 1;
    debug_assert_eq!(st.start + last, nz - 1);
    let w0 = st.w[last];
    // q_c = w0 u_c + off_c
    let off: Vec<Array1<f64>> = s
        .v
        .iter()
        .map(|vc| {
            let mut o = Array1::zeros(ops.nh());
            for k in 0..last {
                o.scaled_add(st.w[k], &vc.row(st.start + k));
            }
            o
        })
        .collect();
    let sf = surface(m, s);
    let mut u: Vec<Array1<f64>> = s.v.iter().map(|vc| ops.top(vc).to_owned()).collect();
    let flat = w0 / m.a;
    let mut info = ClosureInfo {
        iterations: 0,
        residual: f64::INFINITY,
        scale: 1.0,
    };
    for it in 0..=MAX_ITER {
        let q: Vec<Array1<f64>> = u.iter().zip(&off).map(|(uc, oc)| uc * w0 + oc).collect();
        let (r, scale) = residual(m, &sf, &u, &q);
        let rn = r.iter().map(sup1).fold(0.0, f64::max);
        info = ClosureInfo {
            iterations: it,
            residual: rn,
            scale,
        };
        if !rn.is_finite() {
            return Err(HealthError::Closure { residual: rn });
        }
        if rn <= TOL * scale || it == MAX_ITER {
            break;
        }
        // flat-chart preconditioner, one (d+1)x(d+1) solve per Fourier mode
        let rh: Vec<Vec<Complex64>> = r.iter().map(|rc| ops.spec.forward(rc.as_slice().unwrap())).collect();
        let mut du: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); ops.nh()]; d + 1];
        for i in 0..ops.nh() {
            let mut b = vec![vec![Complex64::new(0.0, 0.0); d + 1]; d + 1];
            for c in 0..d {
                let ik = ops.spec.ik(c, i);
                b[c][c] = Complex64::new(eps * mu * flat, 0.0);
                b[c][d] = ik * (eps * mu);
                b[d][c] = ik * (eps * lam);
            }
            b[d][d] = Complex64::new(eps * (2.0 * mu + lam) * flat, 0.0);
            let x = solve_small(b, (0..=d).map(|c| rh[c][i]).collect());
            for c in 0..=d {
                du[c][i] = x[c];
            }
        }
        for (uc, dc) in u.iter_mut().zip(du) {
            let corr = ops.spec.inverse(dc);
            for (a, b) in uc.iter_mut().zip(corr) {
                *a -= b;
            }
        }
    }
    if info.residual > TOL * info.scale && info.residual > ACCEPT * info.scale {
        return Err(HealthError::Closure {
            residual: info.residual / info.scale,
        });
    }
    for (vc, uc) in s.v.iter_mut().zip(&u) {
        vc.row_mut(nz - 1).assign(uc);
    }
    Ok(info)
}

fn close_euler_top(m: &Model, s: &mut FlowState) -> Result<(), HealthError> {
    let ops = &m.ops;
    let ph = &m.phys;
    let hc = mean_curvature(ops, &s.h);
    let mut ps = hc.mapv(|x| ph.p_e - ph.sigma * x);
    if let Some(f) = &m.forcing {
        ps += &f.surface_pressure(s.t, ops);
    }
    if let Some((i, &x)) = ps.indexed_iter().find(|(_, x)| !(**x > 0.0)) {
        return Err(HealthError::Physical { value: x, i });
    }
    let top = ops.nz() - 1;
    s.rho.row_mut(top).assign(&ps.mapv(|x| x.powf(1.0 / ph.gamma)));
    Ok(())
}

fn close_bottom(m: &Model, s: &mut FlowState) {
    let ops = &m.ops;
    let d = m.d_h();
    let nh = ops.nh();
    let reference = match &m.forcing {
        Some(f) => f.bottom_velocity(s.t, ops),
        None => vec![Array1::zeros(nh); d + 1],
    };
    s.v[d].row_mut(0).assign(&reference[d]);
    if !m.viscous() {
        return;
    }
    match m.phys.bottom_bc {
        BottomBc::Anchored => {
            for c in 0..d {
                s.v[c].row_mut(0).assign(&reference[c]);
            }
        }
        BottomBc::Slip => {
            // d_z v_c = 0 with the one-sided stencil at the bottom node
            let st = &ops.grid.d1[0];
            debug_assert_eq!(st.start, 0);
            for c in 0..d {
                let mut acc = Array1::zeros(nh);
                for k in 1..st.w.len() {
                    acc.scaled_add(st.w[k], &s.v[c].row(k));
                }
                s.v[c].row_mut(0).assign(&(acc * (-1.0 / st.w[0])));
            }
        }
    }
}

/// Overwrites the algebraic boundary values: bottom condition, then the
/// stress balance (eps > 0) or the pressure condition (eps = 0) at z = 0.
pub fn apply_closure(m: &Model, s: &mut FlowState) -> Result<ClosureInfo, HealthError> {
    close_bottom(m, s);
    if m.viscous() {
        close_viscous_top(m, s)
    } else {
        close_euler_top(m, s)?;
        Ok(ClosureInfo {
            iterations: 0,
            residual: 0.0,
            scale: 1.0,
        })
    }
}
