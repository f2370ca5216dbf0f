use fscn::calculus::div_phi;
use fscn::dynamics::presets::{capillary, equilibrium};
use fscn::dynamics::*;
use fscn::error::FscnError;
use fscn::field::{sup, sup1, Ops};
use fscn::grid::{GridParams, GridSpec};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

fn ops(d_h: usize, n_y: usize, n_z: usize, z_max: f64, stretch: f64) -> Ops {
    Ops::new(
        GridSpec::build(&GridParams {
            d_h,
            n_y,
            n_z,
            z_max,
            stretch: Some(stretch),
            ..Default::default()
        })
        .unwrap(),
    )
}

fn phys(eps: f64, sigma: f64) -> PhysParams {
    PhysParams {
        eps,
        sigma,
        ..Default::default()
    }
}

fn state_diff(a: &FlowState, b: &FlowState) -> f64 {
    let v = a.v.iter().zip(&b.v).map(|(x, y)| sup(&(x - y))).fold(0.0, f64::max);
    sup(&(&a.rho - &b.rho)).max(v).max(sup1(&(&a.h - &b.h)))
}

#[test]
fn rest_state_tendencies_vanish() {
    for d in [1, 2] {
        for eps in [0.0, 1e-2] {
            let o = ops(d, 8, 17, 2.0, 2.0);
            let ph = phys(eps, 0.3);
            let s = equilibrium(&o, &ph);
            let m = Model::new(o, ph, &s.h);
            let t = rhs(&m, &s).unwrap();
            let worst = t.v.iter().map(sup).fold(sup(&t.rho), f64::max).max(sup1(&t.h));
            assert!(worst <= 1e-13, "d_h {d} eps {eps}: {worst}");
        }
    }
}

#[test]
fn equilibrium_is_stationary() {
    for eps in [0.0, 1e-2] {
        let o = ops(1, 16, 33, 3.0, 2.0);
        let ph = phys(eps, 0.1);
        let mut s = equilibrium(&o, &ph);
        let m = Model::new(o, ph, &s.h);
        apply_closure(&m, &mut s).unwrap();
        for _ in 0..20 {
            let dt = cfl_dt(&m, &s, 0.4);
            let n = advance(&m, &s, dt).unwrap();
            let d = state_diff(&n, &s);
            assert!(d <= 1e-12, "eps {eps}: step changed the state by {d}");
            s = n;
        }
    }
}

#[test]
fn flat_shear_closure_zeroes_the_surface_slope() {
    let o = ops(1, 8, 33, 2.0, 1.0);
    let ph = phys(1e-2, 0.0);
    let mut s = equilibrium(&o, &ph);
    // U(z) = sin(2 z) + 0.3 has U'(0) = 2 before the closure
    s.v[0] = o.sample(|_, z| (2.0 * z).sin() + 0.3);
    let m = Model::new(o, ph, &s.h);
    apply_closure(&m, &mut s).unwrap();
    let slope = m.ops.dz_top(&s.v[0]);
    assert!(sup1(&slope) <= 1e-10, "{}", sup1(&slope));
}

fn curved_state(o: &Ops, ph: &PhysParams) -> FlowState {
    let mut s = equilibrium(o, ph);
    s.h = o.sample_surface(|y| 0.05 * y[0].cos() + 0.02 * (2.0 * y[0]).sin());
    s.v[0] = o.sample(|y, z| 0.05 * (y[0] + 0.5).sin() * (z).exp());
    let d = o.grid.d_h;
    s.v[d] = o.sample(|y, z| 0.03 * (2.0 * y[0]).cos() * (0.7 * z).exp());
    s.rho = o.sample(|y, z| 1.0 + 0.01 * y[0].sin() * (z).exp());
    s
}

#[test]
fn viscous_closure_residual_is_small() {
    let o = ops(1, 16, 33, 2.0, 2.0);
    let ph = phys(1e-2, 0.1);
    let mut s = curved_state(&o, &ph);
    let m = Model::new(o, ph, &s.h);
    apply_closure(&m, &mut s).unwrap();
    let (r, scale) = stress_residual(&m, &s);
    let worst = r.iter().map(sup1).fold(0.0, f64::max);
    assert!(worst <= 1e-8 * scale, "{worst} vs scale {scale}");
}

#[test]
fn ale_speed_examples() {
    let o = ops(1, 8, 9, 1.0, 1.0);
    let ph = phys(0.0, 0.0);
    let flat = Array1::zeros(o.nh());
    let m = Model::new(o.clone(), ph, &flat);
    let metric = m.chart(&flat, &flat);
    let zero = ale_speed(&o, &[o.zeros(), o.zeros()], &metric);
    assert_eq!(sup(&zero), 0.0);
    let up = ale_speed(&o, &[o.zeros(), o.constant(1.0)], &metric);
    assert!(up.iter().all(|&x| (x - 1.0).abs() < 1e-15));
}

#[test]
fn ale_speed_vanishes_at_the_surface() {
    for eps in [0.0, 1e-2] {
        let o = ops(1, 16, 33, 2.0, 2.0);
        let ph = phys(eps, 0.1);
        let mut s = curved_state(&o, &ph);
        let m = Model::new(o, ph, &s.h);
        apply_closure(&m, &mut s).unwrap();
        let s = advance(&m, &s, 0.5 * cfl_dt(&m, &s, 0.4)).unwrap();
        let metric = m.chart(&s.h, &kinematic_dt(&m, &s));
        let vz = ale_speed(&m.ops, &s.v, &metric);
        let top = sup1(&m.ops.top(&vz).to_owned());
        assert!(top <= 1e-10, "eps {eps}: {top}");
    }
}

#[test]
fn kinematic_tendency_matches_surface_velocity() {
    let o = ops(2, 8, 17, 2.0, 2.0);
    let ph = phys(1e-2, 0.1);
    let mut s = equilibrium(&o, &ph);
    s.h = o.sample_surface(|y| 0.03 * y[0].cos() * y[1].sin());
    s.v[0] = o.sample(|y, z| 0.1 * y[1].cos() * z.exp());
    s.v[1] = o.sample(|y, z| 0.1 * y[0].sin() * z.exp());
    s.v[2] = o.sample(|y, z| 0.05 * (y[0] + y[1]).cos() * z.exp());
    let m = Model::new(o.clone(), ph, &s.h);
    let t = rhs(&m, &s).unwrap();
    let mut expect = o.top(&s.v[2]).to_owned();
    for k in 0..2 {
        let dh = Array1::from(o.spec.deriv(s.h.as_slice().unwrap(), k));
        expect -= &(&o.top(&s.v[k]) * &dh);
    }
    let scale = s.v.iter().map(sup).fold(0.0, f64::max);
    assert!(sup1(&(&t.h - &expect)) <= 1e-8 * scale);
}

#[test]
fn cfl_rest_formula_and_horizontal_scaling() {
    let o = ops(1, 64, 9, 3.0, 1.0);
    let ph = phys(0.0, 0.0);
    let s = equilibrium(&o, &ph);
    let m = Model::new(o.clone(), ph.clone(), &s.h);
    let g = &o.grid;
    let expect = 0.4 * g.dy().min(g.dz_min() * m.a) / ph.gamma.sqrt();
    let got = cfl_dt(&m, &s, 0.4);
    assert!((got - expect).abs() <= 1e-14 * expect, "{got} vs {expect}");

    let o2 = ops(1, 128, 9, 3.0, 1.0);
    let s2 = equilibrium(&o2, &ph);
    let m2 = Model::new(o2, ph, &s2.h);
    let ratio = got / cfl_dt(&m2, &s2, 0.4);
    assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
}

#[test]
fn cfl_matches_exhaustive_scan() {
    let o = ops(1, 16, 17, 2.0, 2.0);
    let ph = phys(0.0, 0.0);
    let s = curved_state(&o, &ph);
    let m = Model::new(o.clone(), ph.clone(), &s.h);
    let metric = m.chart(&s.h, &kinematic_dt(&m, &s));
    let jac = metric.jac0();
    let vz = ale_speed(&o, &s.v, &metric);
    let g = &o.grid;
    let mut best = f64::INFINITY;
    for j in 0..g.n_z {
        // local spacing: distance to the nearest neighbour in z
        let below = if j > 0 { g.z[j] - g.z[j - 1] } else { f64::INFINITY };
        let above = if j + 1 < g.n_z { g.z[j + 1] - g.z[j] } else { f64::INFINITY };
        let dz = below.min(above);
        for i in 0..g.n_h() {
            let v = (s.v[0][[j, i]].powi(2) + s.v[1][[j, i]].powi(2)).sqrt();
            let c = (ph.gamma * s.rho[[j, i]].powf(ph.gamma - 1.0)).sqrt();
            let speed = v.max(jac[[j, i]] * vz[[j, i]].abs()) + c;
            best = best.min(g.dy().min(dz * jac[[j, i]]) / speed);
        }
    }
    let got = cfl_dt(&m, &s, 0.4);
    assert!((got - 0.4 * best).abs() <= 1e-12 * got, "{got} vs {}", 0.4 * best);
}

#[test]
fn oversized_step_is_a_contract_error() {
    let o = ops(1, 8, 9, 1.0, 1.0);
    let ph = phys(0.0, 0.0);
    let s = equilibrium(&o, &ph);
    let m = Model::new(o, ph, &s.h);
    let dt = cfl_dt(&m, &s, 0.4);
    assert!(checked_advance(&m, &s, dt, 0.4).is_ok());
    assert!(matches!(checked_advance(&m, &s, 2.0 * dt, 0.4), Err(FscnError::Contract(_))));
}

#[test]
fn pressure_derivative_matches_finite_difference() {
    let ph = PhysParams::default();
    let rho = Array2::from_shape_fn((3, 4), |(j, i)| 0.8 + 0.05 * (j * 4 + i) as f64);
    let h = 1e-6;
    let fd = (ph.pressure(&rho.mapv(|r| r + h)) - ph.pressure(&rho.mapv(|r| r - h))) / (2.0 * h);
    let c = ph.sound_speed(&rho);
    for (a, b) in fd.iter().zip(c.iter()) {
        assert!((a - b * b).abs() <= 1e-8, "{a} vs {}", b * b);
    }
}

fn run_for(m: &Model, mut s: FlowState, t_end: f64, cfl: f64, mut each: impl FnMut(&FlowState)) -> FlowState {
    apply_closure(m, &mut s).unwrap();
    each(&s);
    while s.t < t_end - 1e-12 {
        let dt = cfl_dt(m, &s, cfl).min(t_end - s.t);
        s = advance(m, &s, dt).unwrap();
        each(&s);
    }
    s
}

fn mass(m: &Model, s: &FlowState) -> f64 {
    let metric = m.chart(&s.h, &Array1::zeros(m.ops.nh()));
    m.ops.integrate_weighted(&s.rho, metric.jac0())
}

#[test]
fn mass_is_conserved() {
    let o = ops(1, 32, 49, 3.0, 2.0);
    let ph = phys(1e-2, 0.1);
    let a = 1.0 + 2.0 * 0.05;
    let s0 = capillary(&o, &ph, a, 0.05, 1);
    let m = Model::new(o, ph, &s0.h);
    let m0 = mass(&m, &s0);
    let t_end = 0.5;
    let s = run_for(&m, s0, t_end, 0.4, |_| {});
    let drift = (mass(&m, &s) - m0).abs() / m0;
    assert!(drift <= 1e-6 * t_end, "{drift}");
}

#[test]
fn density_minimum_respects_divergence_bound() {
    let o = ops(1, 32, 49, 3.0, 2.0);
    let ph = phys(1e-2, 0.1);
    let s0 = capillary(&o, &ph, 1.1, 0.1, 1);
    let m = Model::new(o, ph, &s0.h);
    let rho0 = s0.rho.iter().copied().fold(f64::INFINITY, f64::min);
    let mut integral = 0.0;
    let mut last: Option<(f64, f64)> = None;
    let mut worst = f64::INFINITY;
    run_for(&m, s0, 1.0, 0.4, |s| {
        let metric = m.chart(&s.h, &kinematic_dt(&m, s));
        let div = sup(&div_phi(&m.ops, &s.v, &metric));
        if let Some((t, d)) = last {
            integral += 0.5 * (s.t - t) * (d + div);
        }
        last = Some((s.t, div));
        let rmin = s.rho.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.min(rmin / (rho0 * (-integral).exp() * (1.0 - 1e-2)));
    });
    assert!(worst >= 1.0, "{worst}");
}

fn shift(o: &Ops, f: &[f64], by: f64) -> Vec<f64> {
    o.spec.multiply(f, |i| (o.spec.ik(0, i) * Complex64::new(-by, 0.0)).exp())
}

#[test]
fn galilean_shift() {
    let o = ops(1, 32, 33, 2.0, 2.0);
    let ph = phys(1e-2, 0.1);
    let base = capillary(&o, &ph, 1.1, 0.05, 1);
    let m = Model::new(o.clone(), ph, &base.h);
    let u = 0.2;
    let mut a = base.clone();
    let mut b = base.clone();
    b.v[0] += u;
    apply_closure(&m, &mut a).unwrap();
    apply_closure(&m, &mut b).unwrap();
    let dt = 0.5 * cfl_dt(&m, &b, 0.4);
    for _ in 0..10 {
        a = advance(&m, &a, dt).unwrap();
        b = advance(&m, &b, dt).unwrap();
    }
    let by = u * a.t;
    let h_a = shift(&o, a.h.as_slice().unwrap(), by);
    let h_err = h_a.iter().zip(b.h.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut rho_err = 0.0f64;
    for j in 0..o.nz() {
        let row: Vec<f64> = a.rho.row(j).to_vec();
        let shifted = shift(&o, &row, by);
        for (x, y) in shifted.iter().zip(b.rho.row(j).iter()) {
            rho_err = rho_err.max((x - y).abs());
        }
    }
    assert!(h_err <= 1e-8 && rho_err <= 1e-8, "h {h_err:e} rho {rho_err:e}");
}

#[test]
fn linear_acoustic_tendencies() {
    let o = ops(1, 32, 65, 3.0, 1.0);
    let ph = phys(0.0, 0.0);
    let amp = 1e-5;
    let kz = std::f64::consts::PI / 6.0;
    let mut s = equilibrium(&o, &ph);
    s.rho = o.sample(|y, z| 1.0 + amp * y[0].cos() * (kz * z).sin());
    s.v[0] = o.sample(|y, z| amp * y[0].sin() * (kz * z).cos());
    let m = Model::new(o.clone(), ph.clone(), &s.h);
    let t = rhs(&m, &s).unwrap();
    // rho_t = -div v, v_t = -gamma grad rho at rho* = 1
    let c2 = ph.gamma;
    let rho_t = o.sample(|y, z| -amp * y[0].cos() * (kz * z).cos());
    let v1_t = o.sample(|y, z| c2 * amp * y[0].sin() * (kz * z).sin());
    let v3_t = o.sample(|y, z| -c2 * amp * kz * y[0].cos() * (kz * z).cos());
    let inner = |f: &Array2<f64>| f.slice(ndarray::s![3..o.nz() - 3, ..]).to_owned();
    let scale = amp * c2;
    for (got, want) in [(&t.rho, &rho_t), (&t.v[0], &v1_t), (&t.v[1], &v3_t)] {
        let err = sup(&(inner(got) - inner(want)));
        assert!(err <= 1e-4 * scale, "{err:e}");
    }
}

fn zero_crossings(ts: &[(f64, f64)]) -> Vec<f64> {
    ts.windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum() && w[0].1 != 0.0)
        .map(|w| w[0].0 + (w[1].0 - w[0].0) * w[0].1 / (w[0].1 - w[1].1))
        .collect()
}

#[test]
fn acoustic_standing_wave_phase_speed() {
    // pressure release at z = 0, no penetration at z = -3: sin(kz z) with kz = pi/6
    let o = ops(1, 64, 97, 3.0, 1.0);
    let ph = phys(0.0, 0.0);
    let kz = std::f64::consts::PI / 6.0;
    let amp = 1e-6;
    let mut s = equilibrium(&o, &ph);
    s.rho = o.sample(|y, z| 1.0 + amp * y[0].cos() * (kz * z).sin());
    let m = Model::new(o.clone(), ph.clone(), &s.h);
    assert_eq!(m.a, 1.0);
    let j = o.nz() / 2;
    let omega = ph.gamma.sqrt() * (1.0 + kz * kz).sqrt();
    let mut series = Vec::new();
    run_for(&m, s, 2.2 * std::f64::consts::PI / omega, 0.4, |s| {
        series.push((s.t, s.rho[[j, 0]] - 1.0));
    });
    let zc = zero_crossings(&series);
    assert!(zc.len() >= 2, "{zc:?}");
    let measured = std::f64::consts::PI / (zc[1] - zc[0]);
    assert!((measured / omega - 1.0).abs() <= 0.01, "{measured} vs {omega}");
}

#[test]
fn capillary_wave_frequency() {
    let o = ops(1, 32, 49, 3.0, 2.0);
    let ph = phys(0.0, 0.1);
    let amp = 1e-3;
    let a = 1.0 + 2.0 * amp;
    let s = capillary(&o, &ph, a, amp, 1);
    let m = Model::new(o.clone(), ph.clone(), &s.h);
    let depth = a * o.grid.z_max;
    let omega = (ph.sigma * depth.tanh()).sqrt();
    let mut series = Vec::new();
    run_for(&m, s, 1.2 * std::f64::consts::PI / omega, 0.4, |s| series.push((s.t, s.h[0])));
    let zc = zero_crossings(&series);
    assert!(!zc.is_empty());
    let measured = 0.5 * std::f64::consts::PI / zc[0];
    assert!((measured / omega - 1.0).abs() <= 0.1, "{measured} vs {omega}");
}
