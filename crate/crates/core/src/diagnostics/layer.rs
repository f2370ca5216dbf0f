use crate::calculus::conormal_norm;
use crate::calculus::laplace_phi;
use crate::field::{sup, Ops, Stack};
use crate::geometry::ChartMetric;
use ndarray::Array2;
use serde::Serialize;

/// Fraction of the surface value at which the layer is said to end.
pub const LAYER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LayerProbe {
    /// ||d_z^2 v||_inf.
    pub dzz_v: f64,
    /// eps ||d_z^2 v||_inf.
    pub eps_dzz_v: f64,
    /// ||Delta^phi p||_{H^1} (spatial conormal).
    pub delta_p_norm: f64,
    pub layer_width: f64,
}

/// Depth below z = 0 where max_y |d_z v_y| first drops to
/// `LAYER_FRACTION` of its surface value, linearly interpolated; `Z_max`
/// when there is no surface gradient or it never decays.
pub fn layer_width(ops: &Ops, v: &[Array2<f64>]) -> f64 {
    let g = &ops.grid;
    let d = g.d_h;
    let mut prof = vec![0.0f64; g.n_z];
    for vc in &v[..d] {
        let dz = ops.dz(vc);
        for (j, row) in dz.outer_iter().enumerate() {
            prof[j] = prof[j].max(row.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        }
    }
    let top = prof[g.n_z - 1];
    if !(top > 0.0) {
        return g.z_max;
    }
    let thr = LAYER_FRACTION * top;
    for j in (0..g.n_z - 1).rev() {
        if prof[j] <= thr {
            let (z0, z1) = (g.z[j], g.z[j + 1]);
            let (f0, f1) = (prof[j], prof[j + 1]);
            let z = z1 + (thr - f1) * (z0 - z1) / (f0 - f1);
            return (-z).clamp(0.0, g.z_max);
        }
    }
    g.z_max
}

pub fn layer_probe(ops: &Ops, v: &[Array2<f64>], p: &Array2<f64>, metric: &ChartMetric, eps: f64) -> LayerProbe {
    let dzz_v = v.iter().map(|vc| sup(&ops.dzz(vc))).fold(0.0, f64::max);
    let lap = Stack::from(laplace_phi(ops, p, metric));
    LayerProbe {
        dzz_v,
        eps_dzz_v: eps * dzz_v,
        delta_p_norm: conormal_norm(ops, &lap, 1, 0, None).expect("spatial norm"),
        layer_width: layer_width(ops, v),
    }
}
