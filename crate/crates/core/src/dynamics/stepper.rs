use super::closure::apply_closure;
use super::rhs::{ale_speed, kinematic_dt, rhs_split};
use super::{BandLu, BottomBc, FlowState, Model, Tendency};
use crate::error::{ContractError, FscnError, HealthError};
use crate::geometry::{assemble_chart, check_diffeomorphism};
use ndarray::{Array1, Array2};

// IMEX-SSP3(3,3,2): SSP-RK3 explicit part, L-stable SDIRK implicit part.
const ALPHA: f64 = 0.25;
const AE: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.25, 0.25, 0.0]];
const AI: [[f64; 3]; 3] = [
    [ALPHA, 0.0, 0.0],
    [1.0 - 2.0 * ALPHA, ALPHA, 0.0],
    [0.5 - ALPHA, 0.0, ALPHA],
];
const CE: [f64; 3] = [0.0, 1.0, 0.5];
const B: [f64; 3] = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];

/// Finite fields, density inside the health band, J >= c0.
pub fn health_check(m: &Model, s: &FlowState) -> Result<(), HealthError> {
    if !s.is_finite() {
        return Err(HealthError::NonFinite { what: "state".into() });
    }
    let (lo, hi) = m.phys.density_band();
    for ((j, i), &r) in s.rho.indexed_iter() {
        if r <= 0.0 {
            return Err(HealthError::NonpositiveDensity { value: r, i, j });
        }
        if r < lo || r > hi {
            return Err(HealthError::DensityBand { value: r, lo, hi, i, j });
        }
    }
    let metric = assemble_chart(&m.ops, std::slice::from_ref(&s.h), m.a);
    let dc = check_diffeomorphism(&metric, m.phys.c0_health);
    if !dc.pass {
        return Err(HealthError::Diffeomorphism {
            min_j: dc.min_j,
            c0: m.phys.c0_health,
            i: dc.at.0,
            j: dc.at.1,
        });
    }
    Ok(())
}

/// Real-axis stability bound of the explicit SSP-RK3 part.
const RK3_REAL: f64 = 2.5;

/// Largest stable step: acoustic bound on the metric-scaled cells, capped
/// by the capillary, horizontal-viscous and surface-relaxation limits.
pub fn cfl_dt(m: &Model, s: &FlowState, cfl: f64) -> f64 {
    let ops = &m.ops;
    let g = &ops.grid;
    let ph = &m.phys;
    let h_t = kinematic_dt(m, s);
    let metric = m.chart(&s.h, &h_t);
    let jac = metric.jac0();
    let vz = ale_speed(ops, &s.v, &metric);
    let c = ph.sound_speed(&s.rho);
    let dy = g.dy();
    let mut best = f64::INFINITY;
    for j in 0..g.n_z {
        let dzj = g.dz_local(j);
        for i in 0..g.n_h() {
            let vmag = s.v.iter().map(|vc| vc[[j, i]].powi(2)).sum::<f64>().sqrt();
            let speed = vmag.max(jac[[j, i]] * vz[[j, i]].abs()) + c[[j, i]];
            let spacing = dy.min(dzj * jac[[j, i]]);
            best = best.min(spacing / speed);
        }
    }
    let mut dt = cfl * best;
    let rho_min = s.rho.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if ph.sigma > 0.0 {
        dt = dt.min(0.5 * dy.powf(1.5) / (ph.sigma / rho_min).sqrt());
    }
    if ph.eps > 0.0 {
        let ksum: f64 = (0..g.d_h).map(|k| ops.spec.k_retained_max(k).powi(2)).sum();
        if ksum > 0.0 {
            dt = dt.min(cfl * rho_min / (ph.eps * (2.0 * ph.mu + ph.lambda.abs()) * ksum));
        }
        // the stress balance ties d_z v_3(0) to (p - p_e + sigma H)/eps, so the
        // surface density relaxes at rate gamma p / (eps (2 mu + lambda))
        let p_top = ops.top(&s.rho).fold(0.0f64, |a, &r| a.max(r.powf(ph.gamma)));
        let rate = ph.gamma * p_top / (ph.eps * (2.0 * ph.mu + ph.lambda));
        dt = dt.min(cfl * RK3_REAL / rate);
    }
    dt
}

/// Solves (I - gdt F_I) v = v* column by column; rows 0 and N_z - 1 carry
/// the boundary conditions.
fn implicit_solve(m: &Model, y: &mut FlowState, gdt: f64) {
    let ops = &m.ops;
    let g = &ops.grid;
    let d = m.d_h();
    let nz = g.n_z;
    let ph = &m.phys;
    let metric = assemble_chart(ops, std::slice::from_ref(&y.h), m.a);
    let jac = metric.jac0();
    let a: Vec<Array2<f64>> = (0..=d)
        .map(|c| {
            if c < d {
                metric.dphi_y[c].value() / jac
            } else {
                jac.mapv(|j| -1.0 / j)
            }
        })
        .collect();
    let mut asq = Array2::<f64>::zeros(jac.raw_dim());
    for ac in &a {
        asq += &ac.mapv(|x| x * x);
    }
    for c in 0..=d {
        let q = ops.dz_top(&y.v[c]);
        let dirichlet_bottom = c == d || ph.bottom_bc == BottomBc::Anchored;
        let kappa = (&asq * ph.mu + &a[c].mapv(|x| x * x * (ph.mu + ph.lambda))) * (gdt * ph.eps) / &y.rho;
        let vc = &mut y.v[c];
        for i in 0..g.n_h() {
            let lu = BandLu::factor(nz, 4, 4, |r, col| {
                if r == 0 {
                    if dirichlet_bottom {
                        return if col == 0 { 1.0 } else { 0.0 };
                    }
                    let st = &g.d1[0];
                    return st.w.get(col.wrapping_sub(st.start)).copied().unwrap_or(0.0);
                }
                if r == nz - 1 {
                    let st = &g.d1[nz - 1];
                    return st.w.get(col.wrapping_sub(st.start)).copied().unwrap_or(0.0);
                }
                let st = &g.d2[r];
                let w = st.w.get(col.wrapping_sub(st.start)).copied().unwrap_or(0.0);
                let diag = if col == r { 1.0 } else { 0.0 };
                diag - kappa[[r, i]] * w
            });
            let mut b: Vec<f64> = (0..nz).map(|r| vc[[r, i]]).collect();
            b[nz - 1] = q[i];
            if !dirichlet_bottom {
                b[0] = 0.0;
            }
            lu.solve(&mut b);
            for (r, x) in b.into_iter().enumerate() {
                vc[[r, i]] = x;
            }
        }
    }
}

fn as_tendency(m: &Model, v: Vec<Array2<f64>>) -> Tendency {
    Tendency {
        rho: m.ops.zeros(),
        v,
        h: Array1::zeros(m.ops.nh()),
    }
}

/// `advance` behind the step-size contract `dt <= cfl_dt(m, s, cfl)`.
pub fn checked_advance(m: &Model, s: &FlowState, dt: f64, cfl: f64) -> Result<FlowState, FscnError> {
    let bound = cfl_dt(m, s, cfl);
    if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(ContractError(format!("time step {dt:e} outside (0, {bound:e}]")).into());
    }
    Ok(advance(m, s, dt)?)
}

/// One IMEX step of size `dt` from a closed state.
pub fn advance(m: &Model, s0: &FlowState, dt: f64) -> Result<FlowState, HealthError> {
    let ops = &m.ops;
    let t0 = s0.t;
    let mut fe: Vec<Tendency> = Vec::with_capacity(3);
    let mut fi: Vec<Tendency> = Vec::with_capacity(3);
    for st in 0..3 {
        let mut terms: Vec<(f64, &Tendency)> = Vec::new();
        for j in 0..st {
            terms.push((dt * AE[st][j], &fe[j]));
            terms.push((dt * AI[st][j], &fi[j]));
        }
        let mut y = s0.combine(t0 + CE[st] * dt, &terms);
        y.dealias(ops);
        apply_closure(m, &mut y)?;
        if m.viscous() {
            implicit_solve(m, &mut y, dt * AI[st][st]);
            y.dealias(ops);
            apply_closure(m, &mut y)?;
        }
        health_check(m, &y)?;
        let sp = rhs_split(m, &y)?;
        fe.push(sp.explicit);
        fi.push(as_tendency(m, sp.implicit));
    }
    let mut terms: Vec<(f64, &Tendency)> = Vec::new();
    for j in 0..3 {
        terms.push((dt * B[j], &fe[j]));
        terms.push((dt * B[j], &fi[j]));
    }
    let mut y = s0.combine(t0 + dt, &terms);
    y.dealias(ops);
    apply_closure(m, &mut y)?;
    health_check(m, &y)?;
    Ok(y)
}
