//! Volume fields `(n_z, n_h)`, vertical/horizontal derivative operators,
//! quadrature, and time-derivative stacks.

use crate::grid::{GridSpec, Stencil};
use crate::spectral::Spectral;
use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};

/// Grid plus transforms; the handle every operator takes.
#[derive(Debug, Clone)]
pub struct Ops {
    pub grid: GridSpec,
    pub spec: Spectral,
}

fn apply_stencils(st: &[Stencil], f: &Array2<f64>) -> Array2<f64> {
    let (nz, nh) = f.dim();
    let fs = f.as_slice().expect("standard layout");
    let mut out = Array2::zeros((nz, nh));
    {
        let os = out.as_slice_mut().unwrap();
        for (j, s) in st.iter().enumerate() {
            let orow = &mut os[j * nh..(j + 1) * nh];
            for (k, &w) in s.w.iter().enumerate() {
                let r = (s.start + k) * nh;
                let frow = &fs[r..r + nh];
                for (o, x) in orow.iter_mut().zip(frow) {
                    *o += w * x;
                }
            }
        }
    }
    out
}

impl Ops {
    pub fn new(grid: GridSpec) -> Self {
        let spec = Spectral::new(&grid);
        Ops { grid, spec }
    }

    /// Same operators with the summation-by-parts vertical first derivative
    /// in place of the 4th-order one; what time integration uses.
    pub fn stable(&self) -> Ops {
        let mut o = self.clone();
        o.grid.d1 = self.grid.sbp_first_derivative().0;
        o
    }

    pub fn nz(&self) -> usize {
        self.grid.n_z
    }

    pub fn nh(&self) -> usize {
        self.grid.n_h()
    }

    pub fn zeros(&self) -> Array2<f64> {
        Array2::zeros((self.grid.n_z, self.grid.n_h()))
    }

    pub fn constant(&self, c: f64) -> Array2<f64> {
        Array2::from_elem((self.grid.n_z, self.grid.n_h()), c)
    }

    /// Field from a function of (y, z).
    pub fn sample(&self, f: impl Fn([f64; 2], f64) -> f64) -> Array2<f64> {
        let g = &self.grid;
        Array2::from_shape_fn((g.n_z, g.n_h()), |(j, i)| f(g.y_of(i), g.z[j]))
    }

    pub fn sample_surface(&self, f: impl Fn([f64; 2]) -> f64) -> Array1<f64> {
        let g = &self.grid;
        Array1::from_shape_fn(g.n_h(), |i| f(g.y_of(i)))
    }

    /// 4th-order vertical derivative.
    pub fn dz(&self, f: &Array2<f64>) -> Array2<f64> {
        apply_stencils(&self.grid.d1, &f.as_standard_layout().to_owned())
    }

    /// 4th-order vertical second derivative (dedicated stencil).
    pub fn dzz(&self, f: &Array2<f64>) -> Array2<f64> {
        apply_stencils(&self.grid.d2, &f.as_standard_layout().to_owned())
    }

    /// Horizontal spectral derivative; zero for `dir >= d_h`.
    pub fn dy(&self, f: &Array2<f64>, dir: usize) -> Array2<f64> {
        self.spec.deriv_field(f, dir)
    }

    pub fn dy_surface(&self, f: &Array1<f64>, dir: usize) -> Array1<f64> {
        Array1::from(self.spec.deriv(f.as_slice().unwrap(), dir))
    }

    /// Z_3 = z/(1-z) d_z.
    pub fn z3(&self, f: &Array2<f64>) -> Array2<f64> {
        let mut d = self.dz(f);
        let w = &self.grid.zweight;
        for (j, mut row) in d.axis_iter_mut(Axis(0)).enumerate() {
            row *= w[j];
        }
        d
    }

    /// Plain integral over the truncated strip (trapezoid in z, mean in y).
    pub fn integrate(&self, f: &Array2<f64>) -> f64 {
        let ca = self.grid.cell_area();
        f.axis_iter(Axis(0))
            .zip(self.grid.wz.iter())
            .map(|(row, w)| w * row.sum())
            .sum::<f64>()
            * ca
    }

    /// Integral of `f` in the weighted measure J dy dz.
    pub fn integrate_weighted(&self, f: &Array2<f64>, jac: &Array2<f64>) -> f64 {
        self.integrate(&(f * jac))
    }

    pub fn integrate_surface(&self, f: &Array1<f64>) -> f64 {
        f.sum() * self.grid.cell_area()
    }

    pub fn l2_sq(&self, f: &Array2<f64>) -> f64 {
        self.integrate(&f.mapv(|x| x * x))
    }

    pub fn l2_sq_weighted(&self, f: &Array2<f64>, jac: &Array2<f64>) -> f64 {
        let mut s = f.mapv(|x| x * x);
        s *= jac;
        self.integrate(&s)
    }

    pub fn surface_l2_sq(&self, f: &Array1<f64>) -> f64 {
        self.integrate_surface(&f.mapv(|x| x * x))
    }

    /// Trace at z = 0.
    pub fn top<'a>(&self, f: &'a Array2<f64>) -> ArrayView1<'a, f64> {
        f.row(self.grid.n_z - 1)
    }

    pub fn bottom<'a>(&self, f: &'a Array2<f64>) -> ArrayView1<'a, f64> {
        f.row(0)
    }

    /// Value of `d_z f` at z = 0 from the one-sided stencil only.
    pub fn dz_top(&self, f: &Array2<f64>) -> Array1<f64> {
        self.dz_row(f, self.grid.n_z - 1)
    }

    pub fn dz_bottom(&self, f: &Array2<f64>) -> Array1<f64> {
        self.dz_row(f, 0)
    }

    fn dz_row(&self, f: &Array2<f64>, j: usize) -> Array1<f64> {
        let s = &self.grid.d1[j];
        let mut out = Array1::zeros(self.nh());
        for (k, &w) in s.w.iter().enumerate() {
            out.scaled_add(w, &f.row(s.start + k));
        }
        out
    }
}

pub fn sup(f: &Array2<f64>) -> f64 {
    f.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

pub fn sup1(f: &Array1<f64>) -> f64 {
    f.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

pub fn all_finite(f: &Array2<f64>) -> bool {
    f.iter().all(|x| x.is_finite())
}

/// Broadcasts a surface field over all z-levels.
pub fn broadcast(nz: usize, s: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((nz, s.len()));
    for mut row in out.axis_iter_mut(Axis(0)) {
        row.assign(s);
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// A field together with its time derivatives: `levels[k] = d_t^k f`.
/// Products obey the Leibniz rule, so `Z_0` acts exactly by shifting.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub levels: Vec<Array2<f64>>,
}

impl From<Array2<f64>> for Stack {
    fn from(f: Array2<f64>) -> Self {
        Stack { levels: vec![f] }
    }
}

impl Stack {
    pub fn new(levels: Vec<Array2<f64>>) -> Self {
        assert!(!levels.is_empty());
        Stack { levels }
    }

    /// Time-independent value with `depth` levels.
    pub fn constant(f: Array2<f64>, depth: usize) -> Self {
        let z = Array2::zeros(f.raw_dim());
        let mut levels = vec![f];
        levels.resize(depth.max(1), z);
        Stack { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn value(&self) -> &Array2<f64> {
        &self.levels[0]
    }

    pub fn truncate(&self, depth: usize) -> Stack {
        Stack { levels: self.levels[..depth.min(self.depth())].to_vec() }
    }

    /// d_t^k, dropping the first k levels.
    pub fn shift(&self, k: usize) -> Option<Stack> {
        (k < self.depth()).then(|| Stack { levels: self.levels[k..].to_vec() })
    }

    pub fn map_linear(&self, op: impl Fn(&Array2<f64>) -> Array2<f64>) -> Stack {
        Stack { levels: self.levels.iter().map(op).collect() }
    }

    pub fn add(&self, o: &Stack) -> Stack {
        let d = self.depth().min(o.depth());
        Stack { levels: (0..d).map(|k| &self.levels[k] + &o.levels[k]).collect() }
    }

    pub fn sub(&self, o: &Stack) -> Stack {
        let d = self.depth().min(o.depth());
        Stack { levels: (0..d).map(|k| &self.levels[k] - &o.levels[k]).collect() }
    }

    pub fn scale(&self, c: f64) -> Stack {
        self.map_linear(|f| f * c)
    }

    pub fn neg(&self) -> Stack {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Stack {
        let mut out = self.clone();
        out.levels[0] += c;
        out
    }

    pub fn mul(&self, o: &Stack) -> Stack {
        let d = self.depth().min(o.depth());
        let levels = (0..d)
            .map(|n| {
                let mut acc = Array2::zeros(self.levels[0].raw_dim());
                for k in 0..=n {
                    let c = binom(n, k);
                    Zip::from(&mut acc)
                        .and(&self.levels[k])
                        .and(&o.levels[n - k])
                        .for_each(|a, &x, &y| *a += c * x * y);
                }
                acc
            })
            .collect();
        Stack { levels }
    }

    /// Multiplies every level by a time-independent field.
    pub fn mul_static(&self, g: &Array2<f64>) -> Stack {
        self.map_linear(|f| f * g)
    }

    pub fn recip(&self) -> Stack {
        let d = self.depth();
        let f0 = &self.levels[0];
        let mut g: Vec<Array2<f64>> = vec![f0.mapv(|x| 1.0 / x)];
        for n in 1..d {
            let mut acc = Array2::zeros(f0.raw_dim());
            for j in 1..=n {
                let c = binom(n, j);
                Zip::from(&mut acc)
                    .and(&self.levels[j])
                    .and(&g[n - j])
                    .for_each(|a, &x, &y| *a += c * x * y);
            }
            Zip::from(&mut acc).and(&g[0]).for_each(|a, &r| *a *= -r);
            g.push(acc);
        }
        Stack { levels: g }
    }

    /// Composition `F(f)` given `F, F', F''` (depth <= 3).
    pub fn compose(
        &self,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        ddf: impl Fn(f64) -> f64,
    ) -> Stack {
        let d = self.depth().min(3);
        let u = &self.levels;
        let mut levels = vec![u[0].mapv(&f)];
        if d > 1 {
            let mut l1 = u[0].mapv(&df);
            l1 *= &u[1];
            levels.push(l1);
        }
        if d > 2 {
            let mut l2 = Array2::zeros(u[0].raw_dim());
            Zip::from(&mut l2)
                .and(&u[0])
                .and(&u[1])
                .and(&u[2])
                .for_each(|o, &a, &b, &c| *o = ddf(a) * b * b + df(a) * c);
            levels.push(l2);
        }
        Stack { levels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;
    use std::f64::consts::PI;

    fn ops(n_z: usize, z_max: f64, stretch: f64) -> Ops {
        Ops::new(
            GridSpec::build(&GridParams {
                d_h: 1,
                length: 2.0 * PI,
                n_y: 16,
                n_z,
                z_max,
                stretch: Some(stretch),
            })
            .unwrap(),
        )
    }

    #[test]
    fn integral_of_constant() {
        let o = ops(9, 1.0, 1.0);
        assert!((o.integrate(&o.constant(1.0)) - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn z3_vanishes_on_top_and_matches_closed_form() {
        let o = ops(40, 2.0, 2.0);
        let f = o.sample(|_, z| z);
        let g = o.z3(&f);
        assert_eq!(o.top(&g).iter().fold(0.0f64, |m, x| m.max(x.abs())), 0.0);
        for j in 0..40 {
            let z = o.grid.z[j];
            assert!((g[[j, 3]] - z / (1.0 - z)).abs() < 1e-10);
        }
    }

    #[test]
    fn leibniz_and_recip() {
        // f = 2 + t y, g = 1 + t^2 at t = 0 with levels up to 2nd derivative
        let o = ops(8, 1.0, 1.0);
        let y = o.sample(|y, _| y[0]);
        let f = Stack::new(vec![o.constant(2.0), y.clone(), o.zeros()]);
        let g = Stack::new(vec![o.constant(1.0), o.zeros(), o.constant(2.0)]);
        let fg = f.mul(&g);
        // (fg)'' = f''g + 2f'g' + fg'' = 4
        assert!(fg.levels[2].iter().all(|&x| (x - 4.0).abs() < 1e-14));
        let r = f.recip();
        // (1/f)' = -f'/f^2 = -y/4 ; (1/f)'' = 2 f'^2/f^3 = y^2/4
        for ((a, b), yy) in r.levels[1].iter().zip(r.levels[2].iter()).zip(y.iter()) {
            assert!((a + yy / 4.0).abs() < 1e-14);
            assert!((b - yy * yy / 4.0).abs() < 1e-14);
        }
    }
}
