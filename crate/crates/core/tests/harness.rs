use fscn::dynamics::presets::Preset;
use fscn::harness::*;
use std::path::Path;
use std::process::Command;

fn small(preset: Preset) -> RunConfig {
    let mut c = RunConfig::default();
    c.grid.n_y = 16;
    c.grid.n_z = 25;
    c.physics.eps = 1e-2;
    c.physics.sigma = 0.1;
    c.stepper.t_end = 0.1;
    c.diagnostics.output_interval = 0.05;
    c.diagnostics.m_cap = 2;
    c.initial = preset;
    c
}

fn capillary() -> Preset {
    Preset::Capillary {
        amplitude: 0.05,
        mode: 1,
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(capillary());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&cfg, Some(&a)).unwrap();
    run(&cfg, Some(&b)).unwrap();
    for f in ["timeseries.csv", "final.fscn", "report.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_round_trip_and_unknown_keys() {
    let mut cfg = small(Preset::Random {
        amplitude: 1e-3,
        surface_amplitude: 1e-3,
        kmax: 3,
    });
    cfg.seed = 7;
    cfg.stepper.dt_max = Some(1e-3);
    cfg.grid.stretch = Some(2.5);
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);

    let e = RunConfig::from_toml("[grid]\nn_z = 33\nnz = 4\n").unwrap_err();
    assert!(e.to_string().contains("nz"), "{e}");
    let e = RunConfig::from_toml("[physics]\nepsilon = 0.1\n").unwrap_err();
    assert!(e.to_string().contains("epsilon"), "{e}");
}

#[test]
fn equilibrium_energy_is_constant() {
    let mut cfg = small(Preset::Equilibrium);
    cfg.stepper.t_end = 10.0;
    cfg.stepper.max_steps = Some(100);
    // shorter than any step: every step is an output time
    cfg.diagnostics.output_interval = 1e-4;
    cfg.stepper.dt_max = Some(2e-4);
    let out = run(&cfg, None).unwrap();
    assert_eq!(out.steps, 100);
    assert_eq!(out.reports.len(), 101);
    let e0 = out.reports[0].energy.total();
    assert_eq!(out.reports[0].energy.kinetic, 0.0);
    assert_eq!(out.reports[0].energy.dissipation_rate, 0.0);
    for r in &out.reports {
        // round-off velocities only
        assert!(r.energy.kinetic <= 1e-24 * e0, "{}", r.energy.kinetic);
        assert!(r.energy.dissipation_rate <= 1e-20 * e0, "{}", r.energy.dissipation_rate);
        assert!((r.energy.total() - e0).abs() <= 1e-12 * e0, "{} vs {e0}", r.energy.total());
    }
}

#[test]
fn output_times_are_hit_exactly() {
    let mut cfg = small(capillary());
    cfg.stepper.t_end = 0.13;
    cfg.diagnostics.output_interval = 0.04;
    let out = run(&cfg, None).unwrap();
    let t: Vec<f64> = out.reports.iter().map(|r| r.t).collect();
    assert_eq!(t, vec![0.0, 0.04, 0.08, 0.12, 0.13]);
}

#[test]
fn final_snapshot_restarts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(capillary());
    let out = run(&cfg, Some(dir.path())).unwrap();
    let snap = Snapshot::load(&dir.path().join("final.fscn")).unwrap();
    let s = snap.to_state(&out.model.ops).unwrap();
    assert_eq!(s.rho, out.last.rho);
    assert_eq!(s.v, out.last.v);
    assert_eq!(s.h, out.last.h);
    assert_eq!(s.t, out.last.t);
    assert_eq!(snap.slope, out.model.a);

    let mut restart = cfg.clone();
    restart.stepper.t_end = 0.2;
    restart.initial = Preset::Snapshot {
        path: dir.path().join("final.fscn").display().to_string(),
    };
    restart.grid.stretch = Some(snap.stretch);
    let again = run(&restart, None).unwrap();
    assert_eq!(again.model.a, out.model.a);
    assert!(!again.aborted());
    let t: Vec<f64> = again.reports.iter().map(|r| r.t).collect();
    assert_eq!(t, vec![0.1, 3.0 * 0.05, 0.2]);
}

#[test]
fn snapshot_with_other_shape_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(capillary());
    run(&cfg, Some(dir.path())).unwrap();
    let mut other = cfg.clone();
    other.grid.n_z = 33;
    other.initial = Preset::Snapshot {
        path: dir.path().join("final.fscn").display().to_string(),
    };
    assert!(run(&other, None).is_err());
}

#[test]
fn steep_surface_aborts_with_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Preset::Steep { amplitude: 0.5, mode: 4 });
    cfg.physics.slope = Some(1.0);
    let out = run(&cfg, Some(dir.path())).unwrap();
    let e = out.abort.expect("abort");
    assert!(e.to_string().contains("diffeomorphism"), "{e}");
    let snap = Snapshot::load(&dir.path().join("abort.fscn")).unwrap();
    assert_eq!(snap.n_z, cfg.grid.n_z);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn single_member_sweep_has_no_comparisons() {
    let plan = SweepPlan {
        base: small(capillary()),
        axis: SweepAxis::Eps,
        values: vec![1e-2],
        comparisons: vec![Comparison::CauchySupNorm, Comparison::ThetaBoundedness, Comparison::LayerScaling],
        include_limit: false,
    };
    let o = sweep(&plan, None).unwrap();
    assert_eq!(o.report.members.len(), 1);
    assert!(o.report.cauchy.is_empty());
    assert!(o.report.limit.is_empty());
    assert!(o.report.theta.is_none());
    assert!(o.report.layer.is_none());
}

#[test]
fn sweep_plan_validation() {
    let mut plan = SweepPlan {
        base: small(capillary()),
        axis: SweepAxis::Sigma,
        values: vec![1e-2, 1e-1],
        comparisons: vec![],
        include_limit: true,
    };
    assert!(plan.validate().is_err());
    plan.values = vec![1e-1, 1e-2];
    plan.validate().unwrap();
    assert_eq!(plan.member_values(), vec![1e-1, 1e-2, 0.0]);
    assert_eq!(plan.member(0.0).physics.sigma, 0.0);
    let back = SweepPlan::from_toml(&plan.to_toml().unwrap()).unwrap();
    assert_eq!(back, plan);
}

#[test]
fn eps_halving_sweep_contracts() {
    let mut base = small(capillary());
    base.grid.n_z = 48;
    base.stepper.t_end = 0.2;
    let plan = SweepPlan {
        base,
        axis: SweepAxis::Eps,
        values: vec![1e-2, 5e-3, 2.5e-3],
        comparisons: vec![Comparison::CauchySupNorm],
        include_limit: false,
    };
    let dir = tempfile::tempdir().unwrap();
    let o = sweep(&plan, Some(dir.path())).unwrap();
    let c = &o.report.cauchy;
    assert_eq!(c.len(), 2);
    assert!(c[1].v_sup < c[0].v_sup, "{c:?}");
    assert!(c[1].rho_sup < c[0].rho_sup, "{c:?}");
    assert!(c[1].h_w1inf < c[0].h_w1inf, "{c:?}");
    assert!(dir.path().join("sweep.json").exists());
    // every member shares the output times
    let t0: Vec<f64> = o.members[0].1.reports.iter().map(|r| r.t).collect();
    for (_, m) in &o.members {
        assert_eq!(m.reports.iter().map(|r| r.t).collect::<Vec<_>>(), t0);
    }
}

#[test]
fn manufactured_equilibrium_is_exact() {
    let mut cfg = small(Preset::Equilibrium);
    cfg.grid.n_z = 17;
    cfg.grid.z_max = 1.0;
    let t = mms_verify(&cfg, "equilibrium", 2).unwrap();
    for l in &t.levels {
        assert!(l.rho < ERROR_FLOOR && l.v < ERROR_FLOOR && l.h < ERROR_FLOOR, "{l:?}");
    }
    assert!(t.min_order().is_none());
    assert!(t.passed());
    assert!(mms_verify(&cfg, "nonexistent", 2).is_err());
}

fn fscn(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_fscn"))
        .args(args)
        .arg("--quiet")
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let bad = p.join("bad.toml");
    std::fs::write(&bad, "[grid]\nn_z = 3\nbogus = 1\n").unwrap();
    assert_eq!(fscn(&["run", bad.to_str().unwrap()], &p.join("o1")), 2);

    let mut steep = small(Preset::Steep { amplitude: 0.5, mode: 4 });
    steep.physics.slope = Some(1.0);
    let sp = p.join("steep.toml");
    std::fs::write(&sp, steep.to_toml().unwrap()).unwrap();
    assert_eq!(fscn(&["run", sp.to_str().unwrap()], &p.join("o2")), 3);
    let snap = p.join("o2").join("abort.fscn");
    assert_eq!(fscn(&["inspect", snap.to_str().unwrap()], &p.join("o3")), 0);

    let ok = p.join("ok.toml");
    std::fs::write(&ok, small(capillary()).to_toml().unwrap()).unwrap();
    assert_eq!(fscn(&["run", ok.to_str().unwrap()], &p.join("o4")), 0);
    assert!(p.join("o4").join("timeseries.csv").exists());

    assert_eq!(fscn(&["inspect", bad.to_str().unwrap()], &p.join("o5")), 1);
}
