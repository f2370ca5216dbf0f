use super::{FlowState, Model, Tendency};
use crate::error::HealthError;
use crate::field::{all_finite, Ops, Stack};
use crate::geometry::ChartMetric;
use ndarray::{Array1, Array2, Zip};

/// Tendencies split into the explicit part and the implicit vertical
/// viscous block (velocity only).
#[derive(Debug, Clone)]
pub struct Split {
    pub explicit: Tendency,
    pub implicit: Vec<Array2<f64>>,
}

impl Split {
    pub fn total(&self) -> Tendency {
        let mut t = self.explicit.clone();
        for (a, b) in t.v.iter_mut().zip(&self.implicit) {
            *a += b;
        }
        t
    }
}

/// d_t h = -v_y(0) . grad h + v_3(0) (+ manufactured source).
pub fn kinematic_dt(m: &Model, s: &FlowState) -> Array1<f64> {
    let ops = &m.ops;
    let d = m.d_h();
    let mut ht = ops.top(&s.v[d]).to_owned();
    for k in 0..d {
        ht -= &(&ops.top(&s.v[k]) * &ops.dy_surface(&s.h, k));
    }
    if let Some(f) = &m.forcing {
        ht += &f.kinematic(s.t, ops);
    }
    ht
}

/// V_z = (v . N - d_t eta) / J.
pub fn ale_speed(ops: &Ops, v: &[Array2<f64>], metric: &ChartMetric) -> Array2<f64> {
    let d = ops.grid.d_h;
    let mut vn = v[d].clone();
    for k in 0..d {
        vn -= &(&v[k] * metric.dphi_y[k].value());
    }
    if let Some(dt) = &metric.dphi_t {
        vn -= dt.value();
    }
    vn / metric.jac0()
}

struct Derivs {
    dz: Array2<f64>,
    dzz: Option<Array2<f64>>,
    dy: Vec<Array2<f64>>,
    dyz: Vec<Array2<f64>>,
    dyy: Vec<Vec<Array2<f64>>>,
}

impl Derivs {
    fn new(ops: &Ops, f: &Array2<f64>, second: bool) -> Derivs {
        let d = ops.grid.d_h;
        let dz = ops.dz(f);
        let dy: Vec<_> = (0..d).map(|k| ops.dy(f, k)).collect();
        let (dzz, dyz, dyy) = if second {
            (
                Some(ops.dzz(f)),
                (0..d).map(|k| ops.dy(&dz, k)).collect(),
                (0..d).map(|k| (0..d).map(|l| ops.dy(&dy[k], l)).collect()).collect(),
            )
        } else {
            (None, Vec::new(), Vec::new())
        };
        Derivs {
            dz,
            dzz,
            dy,
            dyz,
            dyy,
        }
    }
}

/// Coefficients a_c = d_c phi / J (a_3 = -1/J) and their derivatives, so
/// that d_c^phi g = d_c g - a_c d_z g with d_3 = 0.
struct Coefs {
    a: Vec<Array2<f64>>,
    a_y: Vec<Vec<Array2<f64>>>,
    a_z: Vec<Array2<f64>>,
}

impl Coefs {
    fn new(ops: &Ops, metric: &ChartMetric, second: bool) -> Coefs {
        let d = ops.grid.d_h;
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
        let (a_y, a_z) = if second {
            (
                a.iter().map(|ac| (0..d).map(|l| ops.dy(ac, l)).collect()).collect(),
                a.iter().map(|ac| ops.dz(ac)).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Coefs { a, a_y, a_z }
    }

    /// d_i^phi d_j^phi g, optionally without the a_i a_j d_zz g part.
    fn second(&self, d: usize, g: &Derivs, i: usize, j: usize, with_zz: bool) -> Array2<f64> {
        let mut out = &self.a[i] * &self.a_z[j];
        out *= &g.dz;
        if i < d && j < d {
            out += &g.dyy[i][j];
        }
        if i < d {
            out -= &(&self.a[j] * &g.dyz[i]);
            out -= &(&self.a_y[j][i] * &g.dz);
        }
        if j < d {
            out -= &(&self.a[i] * &g.dyz[j]);
        }
        if with_zz {
            let zz = g.dzz.as_ref().expect("second derivatives");
            Zip::from(&mut out)
                .and(&self.a[i])
                .and(&self.a[j])
                .and(zz)
                .for_each(|o, &ai, &aj, &z| *o += ai * aj * z);
        }
        out
    }

    fn first(&self, d: usize, g: &Derivs, c: usize) -> Array2<f64> {
        let mut out = -(&self.a[c] * &g.dz);
        if c < d {
            out += &g.dy[c];
        }
        out
    }
}

fn transport(v: &[Array2<f64>], vz: &Array2<f64>, g: &Derivs) -> Array2<f64> {
    let mut out = vz * &g.dz;
    for (k, dyk) in g.dy.iter().enumerate() {
        out += &(&v[k] * dyk);
    }
    out
}

/// Semi-discrete tendencies at every node, split for the IMEX stepper.
pub fn rhs_split(m: &Model, s: &FlowState) -> Result<Split, HealthError> {
    let ops = &m.ops;
    let d = m.d_h();
    let ph = &m.phys;
    let visc = m.viscous();
    let h_t = kinematic_dt(m, s);
    let metric = m.chart(&s.h, &h_t);
    let p = ph.checked_pressure(&s.rho)?;
    let vz = ale_speed(ops, &s.v, &metric);
    let co = Coefs::new(ops, &metric, visc);

    let dr = Derivs::new(ops, &s.rho, false);
    let dp = Derivs::new(ops, &p, false);
    let dv: Vec<Derivs> = s.v.iter().map(|vc| Derivs::new(ops, vc, visc)).collect();

    let mut div = ops.zeros();
    for (c, g) in dv.iter().enumerate() {
        div += &co.first(d, g, c);
    }
    let mut rho_t = -transport(&s.v, &vz, &dr);
    rho_t -= &(&s.rho * &div);

    let mut v_t = Vec::with_capacity(d + 1);
    let mut v_i = Vec::with_capacity(d + 1);
    let (mu, lam) = (ph.mu, ph.lambda);
    for c in 0..=d {
        let mut f = -transport(&s.v, &vz, &dv[c]);
        f -= &(co.first(d, &dp, c) / &s.rho);
        if visc {
            let mut vis = ops.zeros();
            for i in 0..=d {
                vis.scaled_add(mu, &co.second(d, &dv[c], i, i, false));
            }
            for (j, g) in dv.iter().enumerate() {
                vis.scaled_add(mu + lam, &co.second(d, g, c, j, j != c));
            }
            let mut kappa = ops.zeros();
            for i in 0..=d {
                kappa.scaled_add(mu, &co.a[i].mapv(|x| x * x));
            }
            kappa.scaled_add(mu + lam, &co.a[c].mapv(|x| x * x));
            let mut imp = kappa * dv[c].dzz.as_ref().unwrap();
            imp *= ph.eps;
            imp /= &s.rho;
            vis *= ph.eps;
            vis /= &s.rho;
            f += &vis;
            v_i.push(imp);
        } else {
            v_i.push(ops.zeros());
        }
        v_t.push(f);
    }
    if let Some(fo) = &m.forcing {
        let (sr, sv) = fo.volume(s.t, ops);
        rho_t += &sr;
        for (a, b) in v_t.iter_mut().zip(&sv) {
            *a += b;
        }
    }
    if !all_finite(&rho_t) || v_t.iter().chain(&v_i).any(|f| !all_finite(f)) || !h_t.iter().all(|x| x.is_finite()) {
        return Err(HealthError::NonFinite {
            what: "tendencies".into(),
        });
    }
    Ok(Split {
        explicit: Tendency {
            rho: rho_t,
            v: v_t,
            h: h_t,
        },
        implicit: v_i,
    })
}

pub fn rhs(m: &Model, s: &FlowState) -> Result<Tendency, HealthError> {
    rhs_split(m, s).map(|sp| sp.total())
}

/// Time-derivative stacks `[f, d_t f(, d_t^2 f)]` of rho, v, p and h, plus
/// the chart built from the h stack.
#[derive(Debug, Clone)]
pub struct TimeStacks {
    pub rho: Stack,
    pub v: Vec<Stack>,
    pub p: Stack,
    pub h: Vec<Array1<f64>>,
    pub metric: ChartMetric,
}

fn scale_of(s: &FlowState) -> f64 {
    let a = s.rho.iter().chain(s.v.iter().flatten()).chain(s.h.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    a.max(1e-300)
}

fn tendency_scale(t: &Tendency) -> f64 {
    let a = t.rho.iter().chain(t.v.iter().flatten()).chain(t.h.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    a.max(1e-300)
}

/// d_t from the semi-discrete right-hand side; d_t^2 (when `a0_max = 2`)
/// from a central directional difference of the right-hand side along
/// the first derivative.
pub fn time_stacks(m: &Model, s: &FlowState, a0_max: usize) -> Result<TimeStacks, HealthError> {
    let g = m.phys.gamma;
    let f1 = rhs(m, s)?;
    let mut rho = vec![s.rho.clone(), f1.rho.clone()];
    let mut v: Vec<Vec<Array2<f64>>> = s.v.iter().zip(&f1.v).map(|(a, b)| vec![a.clone(), b.clone()]).collect();
    let mut h = vec![s.h.clone(), f1.h.clone()];
    if a0_max >= 2 {
        let delta = 1e-4 * scale_of(s) / tendency_scale(&f1);
        let plus = rhs(m, &s.combine(s.t + delta, &[(delta, &f1)]))?;
        let minus = rhs(m, &s.combine(s.t - delta, &[(-delta, &f1)]))?;
        let k = 0.5 / delta;
        rho.push((&plus.rho - &minus.rho) * k);
        for (c, vc) in v.iter_mut().enumerate() {
            vc.push((&plus.v[c] - &minus.v[c]) * k);
        }
        h.push((&plus.h - &minus.h) * k);
    }
    let rho = Stack::new(rho);
    // p = rho^gamma composed through the jet
    let p = rho.compose(
        |r| r.powf(g),
        |r| g * r.powf(g - 1.0),
        |r| g * (g - 1.0) * r.powf(g - 2.0),
    );
    let metric = crate::geometry::assemble_chart(&m.ops, &h, m.a);
    Ok(TimeStacks {
        rho,
        v: v.into_iter().map(Stack::new).collect(),
        p,
        h,
        metric,
    })
}
