//! Horizontal Fourier transforms on one z-level (`n_y^d_h` samples,
//! index `i = i2 * n_y + i1`).

use crate::grid::GridSpec;
use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Spectral {
    pub d_h: usize,
    pub n_y: usize,
    pub n_h: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Wavenumber in direction 1 and 2 per flattened index.
    pub k: [Vec<f64>; 2],
    /// |xi|^2 per flattened index.
    pub ksq: Vec<f64>,
    /// Index carries the Nyquist mode in direction 1 / 2.
    nyq: [Vec<bool>; 2],
    /// 2/3-rule mask.
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral(d_h={}, n_y={})", self.d_h, self.n_y)
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let n_y = grid.n_y;
        let n_h = grid.n_h();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_y);
        let inv = planner.plan_fft_inverse(n_y);
        let cut = n_y / 3;
        let mut k = [vec![0.0; n_h], vec![0.0; n_h]];
        let mut nyq = [vec![false; n_h], vec![false; n_h]];
        let mut keep = vec![true; n_h];
        for i in 0..n_h {
            let i1 = i % n_y;
            let i2 = i / n_y;
            k[0][i] = grid.xi[i1];
            nyq[0][i] = i1 == n_y / 2;
            let int1 = if i1 <= n_y / 2 { i1 } else { n_y - i1 };
            let mut ok = int1 <= cut;
            if grid.d_h == 2 {
                k[1][i] = grid.xi[i2];
                nyq[1][i] = i2 == n_y / 2;
                let int2 = if i2 <= n_y / 2 { i2 } else { n_y - i2 };
                ok &= int2 <= cut;
            }
            keep[i] = ok;
        }
        let ksq = (0..n_h).map(|i| k[0][i] * k[0][i] + k[1][i] * k[1][i]).collect();
        Spectral { d_h: grid.d_h, n_y, n_h, fwd, inv, k, ksq, nyq, keep }
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n_y;
        for row in buf.chunks_mut(n) {
            plan.process(row);
        }
        if self.d_h == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for i1 in 0..n {
                for i2 in 0..n {
                    col[i2] = buf[i2 * n + i1];
                }
                plan.process(&mut col);
                for i2 in 0..n {
                    buf[i2 * n + i1] = col[i2];
                }
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform including the 1/n_h normalization; real part.
    pub fn inverse(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut c, &self.inv);
        let s = 1.0 / self.n_h as f64;
        c.iter().map(|v| v.re * s).collect()
    }

    pub fn inverse_into(&self, mut c: Vec<Complex64>, out: &mut [f64]) {
        self.transform(&mut c, &self.inv);
        let s = 1.0 / self.n_h as f64;
        for (o, v) in out.iter_mut().zip(&c) {
            *o = v.re * s;
        }
    }

    /// Multiplier symbol of `d/dy_dir` at index i (Nyquist dropped).
    #[inline]
    pub fn ik(&self, dir: usize, i: usize) -> Complex64 {
        if self.nyq[dir][i] {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.k[dir][i])
        }
    }

    pub fn deriv_into(&self, x: &[f64], dir: usize, out: &mut [f64]) {
        if dir >= self.d_h {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let mut c = self.forward(x);
        for (i, ci) in c.iter_mut().enumerate() {
            *ci *= self.ik(dir, i);
        }
        self.inverse_into(c, out);
    }

    pub fn deriv(&self, x: &[f64], dir: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.deriv_into(x, dir, &mut out);
        out
    }

    /// Applies the symbol `m(i)` to `x`.
    pub fn multiply(&self, x: &[f64], m: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut c = self.forward(x);
        for (i, ci) in c.iter_mut().enumerate() {
            *ci *= m(i);
        }
        self.inverse(c)
    }

    pub fn dealias(&self, x: &mut [f64]) {
        let mut c = self.forward(x);
        for (i, ci) in c.iter_mut().enumerate() {
            if !self.keep[i] {
                *ci = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse_into(c, x);
    }

    pub fn keeps(&self, i: usize) -> bool {
        self.keep[i]
    }

    /// Largest retained |xi| per direction under the 2/3 rule.
    pub fn k_retained_max(&self, dir: usize) -> f64 {
        (0..self.n_h)
            .filter(|&i| self.keep[i])
            .map(|i| self.k[dir][i].abs())
            .fold(0.0, f64::max)
    }

    /// Horizontal derivative of every z-level of a volume field `(n_z, n_h)`.
    pub fn deriv_field(&self, f: &Array2<f64>, dir: usize) -> Array2<f64> {
        let mut out = Array2::zeros(f.raw_dim());
        if dir >= self.d_h {
            return out;
        }
        Zip::from(out.axis_iter_mut(Axis(0)))
            .and(f.axis_iter(Axis(0)))
            .for_each(|mut o, r| {
                let r = r.to_vec();
                self.deriv_into(&r, dir, o.as_slice_mut().unwrap());
            });
        out
    }

    pub fn dealias_field(&self, f: &mut Array2<f64>) {
        for mut row in f.axis_iter_mut(Axis(0)) {
            self.dealias(row.as_slice_mut().unwrap());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;
    use std::f64::consts::PI;

    fn spec(d_h: usize, n_y: usize) -> (GridSpec, Spectral) {
        let g = GridSpec::build(&GridParams {
            d_h,
            length: 2.0 * PI,
            n_y,
            n_z: 8,
            z_max: 1.0,
            stretch: Some(1.0),
        })
        .unwrap();
        let s = Spectral::new(&g);
        (g, s)
    }

    #[test]
    fn round_trip() {
        let (g, s) = spec(2, 16);
        let x: Vec<f64> = (0..g.n_h()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let y = s.inverse(s.forward(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_mode_2d() {
        let (g, s) = spec(2, 16);
        let x: Vec<f64> = (0..g.n_h())
            .map(|i| {
                let y = g.y_of(i);
                (2.0 * y[0] - 3.0 * y[1]).sin()
            })
            .collect();
        let d1 = s.deriv(&x, 0);
        let d2 = s.deriv(&x, 1);
        for i in 0..g.n_h() {
            let y = g.y_of(i);
            let c = (2.0 * y[0] - 3.0 * y[1]).cos();
            assert!((d1[i] - 2.0 * c).abs() < 1e-12);
            assert!((d2[i] + 3.0 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_drops_high_modes() {
        let (g, s) = spec(1, 32);
        let mut x: Vec<f64> = (0..32)
            .map(|i| {
                let y = g.y_of(i)[0];
                (3.0 * y).cos() + (12.0 * y).sin()
            })
            .collect();
        s.dealias(&mut x);
        for i in 0..32 {
            let y = g.y_of(i)[0];
            assert!((x[i] - (3.0 * y).cos()).abs() < 1e-13);
        }
        assert_eq!(s.k_retained_max(0), 10.0);
    }
}
