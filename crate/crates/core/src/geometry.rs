//! Surface extension eta, the chart phi = A z + eta, and the metric and
//! curvature quantities derived from the free surface h.

use crate::field::{Ops, Stack};
use ndarray::{Array1, Array2, Axis, Zip};
use num_complex::Complex64;

/// Real surface samples with their Fourier coefficients.
#[derive(Debug, Clone)]
pub struct SurfaceHeight {
    pub values: Array1<f64>,
    pub spectral: Vec<Complex64>,
}

impl SurfaceHeight {
    pub fn new(ops: &Ops, values: Array1<f64>) -> Self {
        let spectral = ops.spec.forward(values.as_slice().unwrap());
        SurfaceHeight { values, spectral }
    }

    /// Largest violation of conjugate symmetry, relative to max |h_hat|.
    pub fn conjugate_asymmetry(&self, ops: &Ops) -> f64 {
        let n = ops.grid.n_y;
        let nh = self.spectral.len();
        let scale = self.spectral.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst: f64 = 0.0;
        for i in 0..nh {
            let i1 = i % n;
            let i2 = i / n;
            let j = ((n - i2) % n) * n * (ops.grid.d_h - 1) + (n - i1) % n;
            worst = worst.max((self.spectral[i] - self.spectral[j].conj()).norm());
        }
        worst / scale
    }
}

/// Multiplier exp(-z^2 (1 + |xi|^2)) applied to `h` at every z-level,
/// optionally composed with a z-derivative of the multiplier and a
/// horizontal derivative.
fn extend_symbol(ops: &Ops, h: &Array1<f64>, dz_order: usize, ydir: Option<usize>) -> Array2<f64> {
    let g = &ops.grid;
    let sp = &ops.spec;
    let hh = sp.forward(h.as_slice().unwrap());
    let mut out = ops.zeros();
    for (j, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let z = g.z[j];
        let mut c = hh.clone();
        for (i, ci) in c.iter_mut().enumerate() {
            let a = 1.0 + sp.ksq[i];
            let e = (-z * z * a).exp();
            let m = match dz_order {
                0 => e,
                1 => -2.0 * z * a * e,
                2 => (4.0 * z * z * a * a - 2.0 * a) * e,
                _ => unreachable!("dz_order <= 2"),
            };
            *ci *= m;
            if let Some(d) = ydir {
                *ci *= sp.ik(d, i);
            }
        }
        sp.inverse_into(c, row.as_slice_mut().unwrap());
    }
    out
}

/// eta(y, z) with eta_hat = exp(-z^2 (1+|xi|^2)) h_hat.
pub fn extend_height(ops: &Ops, h: &Array1<f64>) -> Array2<f64> {
    let mut eta = extend_symbol(ops, h, 0, None);
    // kappa(0) = 1: the trace is h itself, not its round-tripped copy.
    let top = ops.grid.n_z - 1;
    eta.row_mut(top).assign(h);
    eta
}

/// Analytic d_z eta through the multiplier.
pub fn extend_height_dz(ops: &Ops, h: &Array1<f64>) -> Array2<f64> {
    extend_symbol(ops, h, 1, None)
}

pub fn extend_height_dzz(ops: &Ops, h: &Array1<f64>) -> Array2<f64> {
    extend_symbol(ops, h, 2, None)
}

/// Chart slope giving d_z phi >= 1 at the initial time.
pub fn auto_slope(ops: &Ops, h: &Array1<f64>) -> f64 {
    let dz = extend_height_dz(ops, h);
    1.0 + 2.0 * dz.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct ChartMetric {
    pub a: f64,
    /// Surface height and its time derivatives.
    pub h: Vec<Array1<f64>>,
    pub eta: Stack,
    pub phi: Array2<f64>,
    /// d_1 phi, d_2 phi (zero in direction 2 when d_h = 1).
    pub dphi_y: [Stack; 2],
    /// J = d_z phi.
    pub jac: Stack,
    /// d_t phi = d_t eta when the h stack has depth >= 2.
    pub dphi_t: Option<Stack>,
    /// Extended normal (-d_1 eta, -d_2 eta, 1).
    pub normal: [Array2<f64>; 3],
    /// n = N/|N|.
    pub unit_normal: [Array2<f64>; 3],
    /// |N|.
    pub normal_len: Array2<f64>,
}

impl ChartMetric {
    pub fn jac0(&self) -> &Array2<f64> {
        self.jac.value()
    }

    /// Depth of the time stacks.
    pub fn depth(&self) -> usize {
        self.h.len()
    }

    /// Entry (a, b) of Pi = I - n n^T.
    pub fn projector(&self, a: usize, b: usize) -> Array2<f64> {
        let mut p = -(&self.unit_normal[a] * &self.unit_normal[b]);
        if a == b {
            p += 1.0;
        }
        p
    }

    /// `d_i phi` stack for i in {0: t, 1, 2}; `None` for t without stack.
    pub fn dphi(&self, i: usize) -> Option<&Stack> {
        match i {
            0 => self.dphi_t.as_ref(),
            1 => Some(&self.dphi_y[0]),
            2 => Some(&self.dphi_y[1]),
            _ => None,
        }
    }
}

/// Builds the chart from `h_stack = [h, d_t h, d_t^2 h, ...]`.
pub fn assemble_chart(ops: &Ops, h_stack: &[Array1<f64>], a: f64) -> ChartMetric {
    assert!(a > 0.0, "chart slope must be positive");
    assert!(!h_stack.is_empty());
    let g = &ops.grid;
    let eta = Stack::new(h_stack.iter().map(|h| extend_height(ops, h)).collect());
    let mut phi = eta.value().clone();
    for (j, mut row) in phi.axis_iter_mut(Axis(0)).enumerate() {
        row += a * g.z[j];
    }
    let dy = |dir: usize| -> Stack {
        if dir < g.d_h {
            Stack::new(h_stack.iter().map(|h| extend_symbol(ops, h, 0, Some(dir))).collect())
        } else {
            Stack::constant(ops.zeros(), h_stack.len())
        }
    };
    let dphi_y = [dy(0), dy(1)];
    let jac = Stack::new(h_stack.iter().map(|h| extend_height_dz(ops, h)).collect()).add_scalar(a);
    let dphi_t = eta.shift(1);
    let normal = [
        -dphi_y[0].value(),
        -dphi_y[1].value(),
        ops.constant(1.0),
    ];
    let mut normal_len = ops.constant(1.0);
    Zip::from(&mut normal_len)
        .and(&normal[0])
        .and(&normal[1])
        .for_each(|l, &a1, &a2| *l = (1.0 + a1 * a1 + a2 * a2).sqrt());
    let unit_normal = [
        &normal[0] / &normal_len,
        &normal[1] / &normal_len,
        &normal[2] / &normal_len,
    ];
    ChartMetric {
        a,
        h: h_stack.to_vec(),
        eta,
        phi,
        dphi_y,
        jac,
        dphi_t,
        normal,
        unit_normal,
        normal_len,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffeoCheck {
    pub min_j: f64,
    pub pass: bool,
    /// Location (y index, z index) of the minimum.
    pub at: (usize, usize),
}

pub fn check_diffeomorphism(metric: &ChartMetric, c0: f64) -> DiffeoCheck {
    let mut min_j = f64::INFINITY;
    let mut at = (0, 0);
    for ((j, i), &v) in metric.jac0().indexed_iter() {
        if v < min_j || v.is_nan() {
            min_j = v;
            at = (i, j);
        }
    }
    DiffeoCheck { min_j, pass: min_j >= c0, at }
}

/// Double mean curvature div_y(grad_y h / sqrt(1 + |grad_y h|^2)).
pub fn mean_curvature(ops: &Ops, h: &Array1<f64>) -> Array1<f64> {
    let d = ops.grid.d_h;
    let grads: Vec<Array1<f64>> = (0..d).map(|k| ops.dy_surface(h, k)).collect();
    let mut q = Array1::ones(h.len());
    for gk in &grads {
        q += &gk.mapv(|x| x * x);
    }
    q.mapv_inplace(f64::sqrt);
    let mut hc = Array1::zeros(h.len());
    for (k, gk) in grads.iter().enumerate() {
        hc += &ops.dy_surface(&(gk / &q), k);
    }
    hc
}

#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub curvature: Array1<f64>,
    pub area: f64,
    pub volume: f64,
    pub grad_h: Vec<Array1<f64>>,
}

/// Area = int sqrt(1+|grad h|^2) dy; volume = int int J dy dz.
pub fn area_and_volume(ops: &Ops, h: &Array1<f64>, metric: &ChartMetric) -> (f64, f64) {
    let mut q = Array1::ones(h.len());
    for k in 0..ops.grid.d_h {
        q += &ops.dy_surface(h, k).mapv(|x| x * x);
    }
    let area = ops.integrate_surface(&q.mapv(f64::sqrt));
    let volume = ops.integrate(metric.jac0());
    (area, volume)
}

pub fn surface_geometry(ops: &Ops, h: &Array1<f64>, metric: &ChartMetric) -> SurfaceGeometry {
    let (area, volume) = area_and_volume(ops, h, metric);
    SurfaceGeometry {
        curvature: mean_curvature(ops, h),
        area,
        volume,
        grad_h: (0..ops.grid.d_h).map(|k| ops.dy_surface(h, k)).collect(),
    }
}

/// |h|_s^2 = sum (1+|xi|^2)^s |h_hat|^2, normalized as an integral.
pub fn surface_sobolev_sq(ops: &Ops, h: &Array1<f64>, s: f64) -> f64 {
    let c = ops.spec.forward(h.as_slice().unwrap());
    let nh = ops.nh() as f64;
    let scale = ops.grid.cell_area() / nh;
    c.iter()
        .enumerate()
        .map(|(i, ci)| (1.0 + ops.spec.ksq[i]).powf(s) * ci.norm_sqr())
        .sum::<f64>()
        * scale
}

/// ||eta||_{H^k}^2 = sum_{a+b<=k} int |xi|^{2a} |d_z^b eta_hat|^2, evaluated
/// with the analytic multiplier and graded trapezoid quadrature.
pub fn extension_sobolev_sq(ops: &Ops, h: &Array1<f64>, k: usize) -> f64 {
    assert!(k <= 2);
    let c = ops.spec.forward(h.as_slice().unwrap());
    let g = &ops.grid;
    let scale = g.cell_area() / ops.nh() as f64;
    let mut total = 0.0;
    for (i, ci) in c.iter().enumerate() {
        let ks = ops.spec.ksq[i];
        let a = 1.0 + ks;
        let h2 = ci.norm_sqr();
        for j in 0..g.n_z {
            let z = g.z[j];
            let e = (-z * z * a).exp();
            let m = [e, -2.0 * z * a * e, (4.0 * z * z * a * a - 2.0 * a) * e];
            let mut s = 0.0;
            for b in 0..=k {
                for aa in 0..=(k - b) {
                    s += ks.powi(aa as i32) * m[b] * m[b];
                }
            }
            total += g.wz[j] * s * h2;
        }
    }
    total * scale
}
