//! Analytic initial conditions.

use super::{FlowState, PhysParams};
use crate::field::Ops;
use crate::geometry::mean_curvature;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

fn one() -> usize {
    1
}

/// Initial-condition descriptor; the `preset` key selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Preset {
    /// rho^gamma = p_e, v = 0, h = 0.
    #[default]
    Equilibrium,
    /// h = a cos(k y_1), v = 0, p = p_e - sigma H(y) cosh(|k| A (z + Z_max)) / cosh(|k| A Z_max).
    Capillary {
        amplitude: f64,
        #[serde(default = "one")]
        mode: usize,
    },
    /// Flat surface, v_1 = U (1 - exp(z/w))^2.
    Shear {
        amplitude: f64,
        width: f64,
    },
    /// Seeded band-limited perturbation of the rest state.
    Random {
        amplitude: f64,
        surface_amplitude: f64,
        #[serde(default = "default_kmax")]
        kmax: usize,
    },
    /// Large-amplitude surface, for exercising the diffeomorphism monitor.
    Steep {
        amplitude: f64,
        #[serde(default = "default_steep_mode")]
        mode: usize,
    },
    /// Manufactured solution at t = 0 (see `dynamics::mms`).
    Mms { solution: String },
    /// Fields read from a snapshot file.
    Snapshot { path: String },
}

fn default_kmax() -> usize {
    4
}

fn default_steep_mode() -> usize {
    4
}


impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Equilibrium => "equilibrium",
            Preset::Capillary { .. } => "capillary",
            Preset::Shear { .. } => "shear",
            Preset::Random { .. } => "random",
            Preset::Steep { .. } => "steep",
            Preset::Mms { .. } => "mms",
            Preset::Snapshot { .. } => "snapshot",
        }
    }

    /// Parameter checks that need no grid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut pos = |name: &str, x: f64| {
            if !(x.is_finite() && x >= 0.0) {
                out.push(format!("initial.{name}: must be finite and >= 0, got {x}"));
            }
        };
        match self {
            Preset::Capillary { amplitude, .. } | Preset::Steep { amplitude, .. } => pos("amplitude", amplitude.abs()),
            Preset::Shear { amplitude, width } => {
                pos("amplitude", amplitude.abs());
                if !(*width > 0.0) {
                    out.push(format!("initial.width: must be > 0, got {width}"));
                }
            }
            Preset::Random {
                amplitude,
                surface_amplitude,
                ..
            } => {
                pos("amplitude", *amplitude);
                pos("surface_amplitude", *surface_amplitude);
            }
            Preset::Mms { solution }
                if !super::mms::SOLUTIONS.contains(&solution.as_str()) => {
                    out.push(format!(
                        "initial.solution: unknown manufactured solution {solution:?} (known: {})",
                        super::mms::SOLUTIONS.join(", ")
                    ));
                }
            _ => {}
        }
        out
    }
}

pub fn rest_density(ph: &PhysParams) -> f64 {
    ph.p_e.powf(1.0 / ph.gamma)
}

pub fn equilibrium(ops: &Ops, ph: &PhysParams) -> FlowState {
    FlowState::rest(ops, rest_density(ph))
}

fn cos_surface(ops: &Ops, amplitude: f64, mode: usize) -> (Array1<f64>, f64) {
    let k = TAU * mode as f64 / ops.grid.length;
    (ops.sample_surface(|y| amplitude * (k * y[0]).cos()), k)
}

/// Standing capillary wave released from rest; the surface pressure
/// balances the curvature term at t = 0 and d_z p = 0 at the bottom.
pub fn capillary(ops: &Ops, ph: &PhysParams, a: f64, amplitude: f64, mode: usize) -> FlowState {
    let (h, k) = cos_surface(ops, amplitude, mode);
    let hc = mean_curvature(ops, &h);
    let mut s = FlowState::rest(ops, 1.0);
    let z = &ops.grid.z;
    let zm = ops.grid.z_max;
    s.rho = Array2::from_shape_fn((ops.nz(), ops.nh()), |(j, i)| {
        let p = ph.p_e - ph.sigma * hc[i] * (k * a * (z[j] + zm)).cosh() / (k * a * zm).cosh();
        p.powf(1.0 / ph.gamma)
    });
    s.h = h;
    s
}

/// Flat-surface shear v_1 = U (1 - exp(z/w))^2; d_z v_1 vanishes at z = 0,
/// so the stress balance holds at t = 0, and is exponentially small at the
/// bottom.
pub fn shear(ops: &Ops, ph: &PhysParams, amplitude: f64, width: f64) -> FlowState {
    let mut s = equilibrium(ops, ph);
    s.v[0] = ops.sample(|_, z| amplitude * shear_profile(z, width));
    s
}

fn shear_profile(z: f64, w: f64) -> f64 {
    (1.0 - (z / w).exp()).powi(2)
}

pub fn steep(ops: &Ops, ph: &PhysParams, amplitude: f64, mode: usize) -> FlowState {
    let (h, _) = cos_surface(ops, amplitude, mode);
    let mut s = equilibrium(ops, ph);
    s.h = h;
    s
}

/// Band-limited random perturbation; modes |k| <= kmax, decaying with depth.
pub fn random(ops: &Ops, ph: &PhysParams, seed: u64, amplitude: f64, surface_amplitude: f64, kmax: usize) -> FlowState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = ops.grid.d_h;
    let base = 2.0 * std::f64::consts::PI / ops.grid.length;
    let mut modes = Vec::new();
    for k1 in 0..=kmax as i64 {
        let k2r = if d == 2 { -(kmax as i64)..=kmax as i64 } else { 0..=0 };
        for k2 in k2r {
            if k1 == 0 && k2 < 0 {
                continue;
            }
            modes.push([k1 as f64 * base, k2 as f64 * base]);
        }
    }
    let field = |amp: f64, rng: &mut ChaCha8Rng| -> Vec<(f64, f64, [f64; 2], f64)> {
        modes
            .iter()
            .map(|k| {
                let kn = (k[0] * k[0] + k[1] * k[1]).sqrt();
                let w = amp / (1.0 + kn * kn);
                (w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0), *k, kn.max(1.0))
            })
            .collect()
    };
    let eval = |c: &[(f64, f64, [f64; 2], f64)], y: [f64; 2], z: f64| -> f64 {
        c.iter()
            .map(|(a, b, k, kn)| {
                let ph = k[0] * y[0] + k[1] * y[1];
                (a * ph.cos() + b * ph.sin()) * (kn * z).exp()
            })
            .sum()
    };
    let hc = field(surface_amplitude, &mut rng);
    let rc = field(amplitude, &mut rng);
    let vcs: Vec<_> = (0..=d).map(|_| field(amplitude, &mut rng)).collect();
    let rho0 = rest_density(ph);
    let mut s = FlowState::rest(ops, rho0);
    s.h = ops.sample_surface(|y| eval(&hc, y, 0.0));
    s.rho = ops.sample(|y, z| rho0 * (1.0 + eval(&rc, y, z)));
    for (c, vc) in vcs.iter().enumerate() {
        s.v[c] = ops.sample(|y, z| eval(vc, y, z));
    }
    s.dealias(ops);
    s
}
