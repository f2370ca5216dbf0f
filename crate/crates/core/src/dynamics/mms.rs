//! Manufactured solutions with exact sources, via second-order
//! forward-mode differentiation in (t, y_1, y_2, x_3).

use super::{FlowState, Forcing, PhysParams};
use crate::field::Ops;
use crate::geometry::extend_height;
use ndarray::{Array1, Array2};
use std::ops::{Add, Div, Mul, Neg, Sub};

pub const SOLUTIONS: [&str; 2] = ["moving", "equilibrium"];

/// Value, gradient and Hessian in four variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 4],
    pub h: [[f64; 4]; 4],
}

impl Jet {
    pub fn cst(v: f64) -> Jet {
        Jet {
            v,
            g: [0.0; 4],
            h: [[0.0; 4]; 4],
        }
    }

    pub fn var(v: f64, k: usize) -> Jet {
        let mut j = Jet::cst(v);
        j.g[k] = 1.0;
        j
    }

    /// F(self) given F, F', F'' at the value.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::cst(f0);
        for a in 0..4 {
            out.g[a] = f1 * self.g[a];
            for b in 0..4 {
                out.h[a][b] = f1 * self.h[a][b] + f2 * self.g[a] * self.g[b];
            }
        }
        out
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn powf(self, p: f64) -> Jet {
        let x = self.v;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn sqrt(self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(self) -> Jet {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn scale(self, c: f64) -> Jet {
        let mut o = self;
        o.v *= c;
        for a in 0..4 {
            o.g[a] *= c;
            for b in 0..4 {
                o.h[a][b] *= c;
            }
        }
        o
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut r = self;
        r.v += o.v;
        for a in 0..4 {
            r.g[a] += o.g[a];
            for b in 0..4 {
                r.h[a][b] += o.h[a][b];
            }
        }
        r
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        let mut r = self;
        r.v += c;
        r
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::cst(self.v * o.v);
        for a in 0..4 {
            r.g[a] = self.v * o.g[a] + o.v * self.g[a];
            for b in 0..4 {
                r.h[a][b] = self.v * o.h[a][b] + o.v * self.h[a][b] + self.g[a] * o.g[b] + o.g[a] * self.g[b];
            }
        }
        r
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

/// Eulerian manufactured fields. Derivative index: 0 = t, 1 = y_1,
/// 2 = y_2, 3 = x_3.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub id: String,
    pub d_h: usize,
    /// Reference depth A Z_max; v_3 vanishes at x_3 = -depth.
    pub depth: f64,
    pub phys: PhysParams,
    pub a: f64,
}

struct Point {
    rho: Jet,
    v: Vec<Jet>,
}

impl Manufactured {
    pub fn new(id: &str, ops: &Ops, phys: &PhysParams, a: f64) -> Option<Manufactured> {
        if !SOLUTIONS.contains(&id) {
            return None;
        }
        Some(Manufactured {
            id: id.to_string(),
            d_h: ops.grid.d_h,
            depth: a * ops.grid.z_max,
            phys: phys.clone(),
            a,
        })
    }

    fn moving(&self) -> bool {
        self.id == "moving"
    }

    fn h_jet(&self, t: f64, y: [f64; 2]) -> Jet {
        let (t, y1, y2) = (Jet::var(t, 0), Jet::var(y[0], 1), Jet::var(y[1], 2));
        if !self.moving() {
            return Jet::cst(0.0);
        }
        let mut h = (y1 - t).sin() * 0.05;
        if self.d_h == 2 {
            h = h + (y2 + t * 0.5).cos() * 0.03;
        }
        h
    }

    fn point(&self, t: f64, y: [f64; 2], x: f64) -> Point {
        let d = self.d_h;
        if !self.moving() {
            let rho = Jet::cst(self.phys.p_e.powf(1.0 / self.phys.gamma));
            return Point {
                rho,
                v: vec![Jet::cst(0.0); d + 1],
            };
        }
        let (t, y1, y2, x) = (Jet::var(t, 0), Jet::var(y[0], 1), Jet::var(y[1], 2), Jet::var(x, 3));
        let ex = x.exp();
        let mut rho = (y1 - t).cos() * ex * 0.1 + 1.0;
        let v1 = (y1 + t * 0.5).sin() * x.cos() * 0.2;
        let v3 = (y1 - t).cos() * (x * (1.0 / self.depth) + 1.0) * (x * 0.5).exp() * 0.15;
        let mut v = vec![v1];
        if d == 2 {
            rho = rho + y2.sin() * ex * 0.05;
            v.push((y2 - t).cos() * ex * 0.1);
        }
        v.push(v3);
        Point { rho, v }
    }

    fn grad_dir(d: usize, c: usize) -> usize {
        if c < d {
            c + 1
        } else {
            3
        }
    }

    fn volume_at(&self, t: f64, y: [f64; 2], x: f64) -> (f64, Vec<f64>) {
        let d = self.d_h;
        let ph = &self.phys;
        let pt = self.point(t, y, x);
        let p = pt.rho.powf(ph.gamma);
        let rho = pt.rho;
        let dir = |c: usize| Self::grad_dir(d, c);
        let mut div = 0.0;
        for c in 0..=d {
            div += pt.v[c].g[dir(c)];
        }
        let mut s_rho = rho.g[0] + rho.v * div;
        for c in 0..=d {
            s_rho += pt.v[c].v * rho.g[dir(c)];
        }
        let mut s_v = Vec::with_capacity(d + 1);
        for c in 0..=d {
            let vc = &pt.v[c];
            let mut s = vc.g[0] + p.g[dir(c)] / rho.v;
            for j in 0..=d {
                s += pt.v[j].v * vc.g[dir(j)];
            }
            if ph.eps > 0.0 {
                let lap: f64 = (0..=d).map(|i| vc.h[dir(i)][dir(i)]).sum();
                let grad_div: f64 = (0..=d).map(|j| pt.v[j].h[dir(c)][dir(j)]).sum();
                s -= ph.eps / rho.v * (ph.mu * lap + (ph.mu + ph.lambda) * grad_div);
            }
            s_v.push(s);
        }
        (s_rho, s_v)
    }

    /// Double mean curvature of the manufactured surface.
    fn curvature(&self, t: f64, y: [f64; 2]) -> f64 {
        let h = self.h_jet(t, y);
        let d = self.d_h;
        let q: f64 = 1.0 + (1..=d).map(|k| h.g[k] * h.g[k]).sum::<f64>();
        let lap: f64 = (1..=d).map(|k| h.h[k][k]).sum();
        let mut hh = 0.0;
        for a in 1..=d {
            for b in 1..=d {
                hh += h.g[a] * h.g[b] * h.h[a][b];
            }
        }
        (lap * q - hh) / q.powf(1.5)
    }

    /// Manufactured chart phi_m = A z + eta(h_m) on the grid.
    fn chart(&self, t: f64, ops: &Ops) -> Array2<f64> {
        let hm = ops.sample_surface(|y| self.h_jet(t, y).v);
        let mut phi = extend_height(ops, &hm);
        for (j, mut row) in phi.rows_mut().into_iter().enumerate() {
            row += self.a * ops.grid.z[j];
        }
        phi
    }

    /// Exact state sampled at the chart points of `phi_m`.
    pub fn exact(&self, t: f64, ops: &Ops) -> FlowState {
        let d = self.d_h;
        let phi = self.chart(t, ops);
        let mut s = FlowState::rest(ops, 1.0);
        s.t = t;
        for ((j, i), x) in phi.indexed_iter() {
            let pt = self.point(t, ops.grid.y_of(i), *x);
            s.rho[[j, i]] = pt.rho.v;
            for c in 0..=d {
                s.v[c][[j, i]] = pt.v[c].v;
            }
        }
        s.h = ops.sample_surface(|y| self.h_jet(t, y).v);
        s
    }
}

impl Forcing for Manufactured {
    fn volume(&self, t: f64, ops: &Ops) -> (Array2<f64>, Vec<Array2<f64>>) {
        let d = self.d_h;
        let phi = self.chart(t, ops);
        let mut sr = ops.zeros();
        let mut sv: Vec<Array2<f64>> = (0..=d).map(|_| ops.zeros()).collect();
        for ((j, i), x) in phi.indexed_iter() {
            let (a, b) = self.volume_at(t, ops.grid.y_of(i), *x);
            sr[[j, i]] = a;
            for c in 0..=d {
                sv[c][[j, i]] = b[c];
            }
        }
        (sr, sv)
    }

    fn kinematic(&self, t: f64, ops: &Ops) -> Array1<f64> {
        let d = self.d_h;
        ops.sample_surface(|y| {
            let h = self.h_jet(t, y);
            let pt = self.point(t, y, h.v);
            let mut s = h.g[0] - pt.v[d].v;
            for k in 0..d {
                s += pt.v[k].v * h.g[k + 1];
            }
            s
        })
    }

    fn stress(&self, t: f64, ops: &Ops) -> Vec<Array1<f64>> {
        let d = self.d_h;
        let ph = &self.phys;
        let mut out: Vec<Array1<f64>> = (0..=d).map(|_| Array1::zeros(ops.nh())).collect();
        for i in 0..ops.nh() {
            let y = ops.grid.y_of(i);
            let h = self.h_jet(t, y);
            let pt = self.point(t, y, h.v);
            let mut n: Vec<f64> = (0..d).map(|k| -h.g[k + 1]).collect();
            n.push(1.0);
            let dir = |c: usize| Self::grad_dir(d, c);
            let g = |c: usize, k: usize| pt.v[c].g[dir(k)];
            let div: f64 = (0..=d).map(|c| g(c, c)).sum();
            let pterm = pt.rho.v.powf(ph.gamma) - ph.p_e + ph.sigma * self.curvature(t, y);
            for c in 0..=d {
                let mut tr = ph.lambda * div * n[c];
                for k in 0..=d {
                    tr += ph.mu * (g(c, k) + g(k, c)) * n[k];
                }
                out[c][i] = ph.eps * tr - pterm * n[c];
            }
        }
        out
    }

    fn surface_pressure(&self, t: f64, ops: &Ops) -> Array1<f64> {
        let ph = &self.phys;
        ops.sample_surface(|y| {
            let h = self.h_jet(t, y);
            let pt = self.point(t, y, h.v);
            pt.rho.v.powf(ph.gamma) - ph.p_e + ph.sigma * self.curvature(t, y)
        })
    }

    fn bottom_velocity(&self, t: f64, ops: &Ops) -> Vec<Array1<f64>> {
        let d = self.d_h;
        let phi = self.chart(t, ops);
        (0..=d)
            .map(|c| Array1::from_shape_fn(ops.nh(), |i| self.point(t, ops.grid.y_of(i), phi[[0, i]]).v[c].v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_products_and_chain_rule() {
        // f = sin(x y) e^{x}, at (x, y) = (0.3, 0.7) in slots 1 and 3
        let (x, y) = (Jet::var(0.3, 1), Jet::var(0.7, 3));
        let f = (x * y).sin() * x.exp();
        let (xv, yv) = (0.3f64, 0.7f64);
        let fx = (yv * (xv * yv).cos() + (xv * yv).sin()) * xv.exp();
        let fxy = ((xv * yv).cos() - xv * yv * (xv * yv).sin() + xv * (xv * yv).cos()) * xv.exp();
        assert!((f.g[1] - fx).abs() < 1e-14);
        assert!((f.h[1][3] - fxy).abs() < 1e-14);
        assert!((f.h[3][1] - fxy).abs() < 1e-14);
        let q = (x / y).powf(1.5);
        let qv = (xv / yv).powf(1.5);
        assert!((q.g[3] - (-1.5 * qv / yv)).abs() < 1e-13);
    }
}
