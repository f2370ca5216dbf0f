//! Banded LU with partial pivoting (row interchanges), compact storage.

/// Factorization of an `n x n` matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    /// Row-compacted upper factor, `width` entries per row.
    u: Vec<f64>,
    /// Multipliers, `kl` per row.
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// `get(i, j)` supplies entries with `|i - j|` inside the band.
    pub fn factor(n: usize, kl: usize, ku: usize, get: impl Fn(usize, usize) -> f64) -> BandLu {
        let width = kl + ku + 1;
        let mut u = vec![0.0; n * width];
        // Row i stores columns starting at max(i - kl, 0), left-aligned.
        for i in 0..n {
            let c0 = i.saturating_sub(kl);
            let c1 = (i + ku + 1).min(n);
            for (k, c) in (c0..c1).enumerate() {
                u[i * width + k] = get(i, c);
            }
        }
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        for k in 0..n {
            let end = (k + kl + 1).min(n);
            let mut p = k;
            let mut big = u[k * width].abs();
            for r in k + 1..end {
                if u[r * width].abs() > big {
                    big = u[r * width].abs();
                    p = r;
                }
            }
            piv[k] = p;
            if big == 0.0 {
                u[k * width] = 1e-300;
            }
            if p != k {
                for c in 0..width {
                    u.swap(k * width + c, p * width + c);
                }
            }
            for r in k + 1..end {
                let f = u[r * width] / u[k * width];
                l[k * kl + (r - k - 1)] = f;
                for c in 1..width {
                    u[r * width + c - 1] = u[r * width + c] - f * u[k * width + c];
                }
                u[r * width + width - 1] = 0.0;
            }
        }
        BandLu {
            n,
            kl,
            width,
            u,
            l,
            piv,
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let end = (k + kl + 1).min(n);
            for r in k + 1..end {
                b[r] -= self.l[k * kl + (r - k - 1)] * b[k];
            }
        }
        let mut span = 1;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in 1..span {
                s -= self.u[i * w + k] * b[i + k];
            }
            b[i] = s / self.u[i * w];
            if span < w {
                span += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in k + 1..n {
                let f = a[r][k] / a[k][k];
                for c in k..n {
                    a[r][c] -= f * a[k][c];
                }
                b[r] -= f * b[k];
            }
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|c| a[i][c] * b[c]).sum();
            b[i] = (b[i] - s) / a[i][i];
        }
        b
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(12, 4, 4), (9, 2, 3), (20, 4, 1), (6, 0, 2)] {
            let mut a = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if j + kl >= i && j <= i + ku {
                        a[i][j] = rng.gen_range(-1.0..1.0);
                    }
                }
                // mild diagonal shift keeps it nonsingular, small enough to force pivoting
                a[i][i] += 0.1;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lu = BandLu::factor(n, kl, ku, |i, j| a[i][j]);
            let mut x = b.clone();
            lu.solve(&mut x);
            let y = dense_solve(a.clone(), b.clone());
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-9 * (1.0 + q.abs()), "{n} {kl} {ku}: {p} vs {q}");
            }
        }
    }
}
