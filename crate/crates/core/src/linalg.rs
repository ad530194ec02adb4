//! Small dense helpers and a banded Cholesky factorization.

use serde::{Deserialize, Serialize};

pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];

pub const ZERO2: Mat2 = [[0.0; 2]; 2];
pub const ID2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn det2(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn mul2v(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn transpose2(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn inv2(a: &Mat2) -> Option<Mat2> {
    let d = det2(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]])
}

pub fn solve2(a: &Mat2, b: [f64; 2]) -> Option<[f64; 2]> {
    inv2(a).map(|ai| mul2v(&ai, b))
}

pub fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm2(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn sym_eigenvalues2(a: &Mat2) -> (f64, f64) {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = 0.5 * (a[0][0] - a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    let r = d.hypot(off);
    (m - r, m + r)
}

/// Complex number as a plain pair, used for Floquet multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a general real 2×2 matrix, ordered by decreasing modulus.
pub fn eigenvalues2(a: &Mat2) -> [Complex; 2] {
    let tr = a[0][0] + a[1][1];
    let det = det2(a);
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // stable root pair
        let big = 0.5 * tr + s.copysign(tr);
        let small = if big != 0.0 { det / big } else { 0.5 * tr - s.copysign(tr) };
        let (l1, l2) = if big.abs() >= small.abs() {
            (big, small)
        } else {
            (small, big)
        };
        [Complex { re: l1, im: 0.0 }, Complex { re: l2, im: 0.0 }]
    } else {
        let s = (-disc).sqrt();
        [Complex { re: 0.5 * tr, im: s }, Complex { re: 0.5 * tr, im: -s }]
    }
}

/// Unit eigenvector of a real 2×2 matrix for a real eigenvalue.
pub fn eigenvector2(a: &Mat2, lambda: f64) -> [f64; 2] {
    let b = [[a[0][0] - lambda, a[0][1]], [a[1][0], a[1][1] - lambda]];
    // null vector from the larger row
    let r0 = norm2(b[0]);
    let r1 = norm2(b[1]);
    let row = if r0 >= r1 { b[0] } else { b[1] };
    let v = if row[0] == 0.0 && row[1] == 0.0 {
        [1.0, 0.0]
    } else {
        [-row[1], row[0]]
    };
    let n = norm2(v);
    [v[0] / n, v[1] / n]
}

pub fn mat4_identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn mat4_vec(a: &Mat4, v: [f64; 4]) -> [f64; 4] {
    let mut r = [0.0; 4];
    for i in 0..4 {
        r[i] = (0..4).map(|k| a[i][k] * v[k]).sum();
    }
    r
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn mat4_det(a: &Mat4) -> f64 {
    let mut m = *a;
    let mut det = 1.0;
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap_or(c);
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..4 {
            let f = m[r][c] / m[c][c];
            for k in c..4 {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

pub fn dot4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm4(a: [f64; 4]) -> f64 {
    dot4(a, a).sqrt()
}

/// Symmetric positive-definite banded matrix in lower band storage:
/// `band[i * (bw + 1) + k]` holds `A[i][i - k]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Adds `value` to `A[i][j]` (and implicitly `A[j][i]`); `|i - j|` must fit the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        assert!(k <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        self.band[r * (self.bw + 1) + k] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        if k > self.bw {
            0.0
        } else {
            self.band[r * (self.bw + 1) + k]
        }
    }

    pub fn add_diagonal(&mut self, mu: f64) {
        for i in 0..self.n {
            self.band[i * (self.bw + 1)] += mu;
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.band[i * (self.bw + 1)].abs()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let w = self.bw + 1;
        for i in 0..self.n {
            y[i] += self.band[i * w] * x[i];
            for k in 1..=self.bw.min(i) {
                let a = self.band[i * w + k];
                y[i] += a * x[i - k];
                y[i - k] += a * x[i];
            }
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`; `None` if not positive definite.
    pub fn cholesky(mut self) -> Option<BandedCholesky> {
        let w = self.bw + 1;
        let n = self.n;
        for i in 0..n {
            let kmax = self.bw.min(i);
            // off-diagonal entries of row i, from the leftmost column inward
            for k in (1..=kmax).rev() {
                let j = i - k;
                let mut s = self.band[i * w + k];
                let lo = self.bw.min(j).min(kmax - k);
                for m in 1..=lo {
                    s -= self.band[i * w + k + m] * self.band[j * w + m];
                }
                self.band[i * w + k] = s / self.band[j * w];
            }
            let mut d = self.band[i * w];
            for k in 1..=kmax {
                let l = self.band[i * w + k];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            self.band[i * w] = d.sqrt();
        }
        Some(BandedCholesky { inner: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    inner: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.inner.n;
        let bw = self.inner.bw;
        let w = bw + 1;
        let l = &self.inner.band;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 1..=bw.min(i) {
                s -= l[i * w + k] * y[i - k];
            }
            y[i] = s / l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in 1..=bw.min(n - 1 - i) {
                s -= l[(i + k) * w + k] * y[i + k];
            }
            y[i] = s / l[i * w];
        }
        y
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        let w = self.inner.bw + 1;
        (0..self.inner.n).map(|i| 2.0 * self.inner.band[i * w].ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn banded_cholesky_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, bw) in &[(1usize, 0usize), (7, 1), (20, 3), (33, 5)] {
            let mut a = BandedSpd::zeros(n, bw);
            for i in 0..n {
                for k in 1..=bw.min(i) {
                    a.add(i, i - k, rng.random_range(-1.0..1.0));
                }
                a.add(i, i, 2.0 * bw as f64 + 1.0 + rng.random::<f64>());
            }
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = a.mul_vec(&x);
            let chol = a.clone().cholesky().unwrap();
            let y = chol.solve(&b);
            for i in 0..n {
                assert_abs_diff_eq!(x[i], y[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn indefinite_rejected() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn eigen2() {
        let a = [[2.0, 1.0], [1.0, 2.0]];
        assert_eq!(sym_eigenvalues2(&a), (1.0, 3.0));
        let e = eigenvalues2(&[[4.0, 0.0], [0.0, 0.25]]);
        assert_abs_diff_eq!(e[0].re, 4.0);
        assert_abs_diff_eq!(e[1].re, 0.25);
        let r = eigenvalues2(&[[0.0, -1.0], [1.0, 0.0]]);
        assert_abs_diff_eq!(r[0].abs(), 1.0);
        assert!(r[0].im != 0.0);
        let v = eigenvector2(&[[2.0, 1.0], [0.0, 0.5]], 2.0);
        assert_abs_diff_eq!(v[1], 0.0);
        assert_abs_diff_eq!(mat4_det(&mat4_identity()), 1.0);
    }
}
