//! Small linear-algebra kernels: a banded LU with partial pivoting for the
//! collocation Newton systems, and complex frame helpers for the Evans
//! integrator.

use nalgebra::{Matrix2, Matrix4, Matrix4x2};
use num_complex::Complex64;

pub type CMat4 = Matrix4<Complex64>;
pub type CFrame = Matrix4x2<Complex64>;
pub type CMat2 = Matrix2<Complex64>;

/// Square banded matrix in LAPACK general-band layout, with room for the
/// fill-in produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    pub column: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && i <= j + self.kl, "({i},{j}) outside band");
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    /// Entry `(i, j)`; panics in debug builds when outside the stored band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.get(i, j) * xj;
            }
        }
        y
    }

    /// Factor in place (LAPACK `gbtf2` without blocking).
    pub fn factor(mut self) -> Result<BandLu, SingularMatrix> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.get(j, j).abs();
            for i in 1..=km {
                let v = self.get(j + i, j).abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(SingularMatrix { column: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.get(j, j);
                for i in 1..=km {
                    let k = self.idx(j + i, j);
                    self.ab[k] *= inv;
                }
                for c in (j + 1)..=ju {
                    let pivot_row = self.get(j, c);
                    if pivot_row == 0.0 {
                        continue;
                    }
                    for i in 1..=km {
                        let l = self.get(j + i, j);
                        let k = self.idx(j + i, c);
                        self.ab[k] -= l * pivot_row;
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let bj = b[j];
            for i in 1..=km {
                b[j + i] -= m.get(j + i, j) * bj;
            }
        }
        let bw = m.kl + m.ku;
        for j in (0..n).rev() {
            b[j] /= m.get(j, j);
            let bj = b[j];
            for i in j.saturating_sub(bw)..j {
                b[i] -= m.get(i, j) * bj;
            }
        }
    }
}

/// Thin QR of a 4x2 complex frame by modified Gram-Schmidt with one
/// reorthogonalization pass. Returns `(Q, T)` with `frame = Q T` and `T`
/// upper triangular, or `None` when the columns are numerically dependent.
pub fn qr_frame(frame: &CFrame) -> Option<(CFrame, CMat2)> {
    let mut q = *frame;
    let mut t = CMat2::zeros();
    let scale = frame.norm().max(f64::MIN_POSITIVE);

    let n0 = q.column(0).norm();
    if n0 <= 1e-14 * scale {
        return None;
    }
    let c0 = q.column(0) / Complex64::new(n0, 0.0);
    q.set_column(0, &c0);
    t[(0, 0)] = Complex64::new(n0, 0.0);

    let mut v = q.column(1).into_owned();
    for _ in 0..2 {
        let proj = c0.dotc(&v);
        v -= c0 * proj;
        t[(0, 1)] += proj;
    }
    let n1 = v.norm();
    if n1 <= 1e-13 * scale {
        return None;
    }
    q.set_column(1, &(v / Complex64::new(n1, 0.0)));
    t[(1, 1)] = Complex64::new(n1, 0.0);
    Some((q, t))
}

/// Largest entry of `|F^* F - I|` for a frame.
pub fn orthonormality_defect(frame: &CFrame) -> f64 {
    let g = frame.adjoint() * frame;
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `[left | right]` as a 4x4 matrix.
pub fn join_frames(left: &CFrame, right: &CFrame) -> CMat4 {
    let mut m = CMat4::zeros();
    m.fixed_view_mut::<4, 2>(0, 0).copy_from(left);
    m.fixed_view_mut::<4, 2>(0, 2).copy_from(right);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from(m: &BandMatrix, n: usize) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i + m.ku + m.kl >= j && i <= j + m.kl && j <= i + m.ku {
                    *v = m.get(i, j);
                }
            }
        }
        d
    }

    #[test]
    fn banded_solve_matches_dense_product() {
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut m = BandMatrix::zeros(n, kl, ku);
        let mut seed = 1u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so pivoting is exercised
                m.set(i, j, rnd() + if i == j { 0.01 } else { 0.0 });
            }
        }
        let dense = dense_from(&m, n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = dense.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        assert_eq!(m.matvec(&x).len(), n);
        let lu = m.factor().unwrap();
        let mut sol = b.clone();
        lu.solve_in_place(&mut sol);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-9, "{s} vs {e}");
        }
    }

    #[test]
    fn singular_band_reported() {
        let m = BandMatrix::zeros(3, 1, 1);
        assert_eq!(m.factor().unwrap_err(), SingularMatrix { column: 0 });
    }

    #[test]
    fn frame_qr_reconstructs() {
        let f = CFrame::from_fn(|i, j| Complex64::new((i + 2 * j) as f64 + 0.5, (i as f64 - j as f64) * 0.3));
        let (q, t) = qr_frame(&f).unwrap();
        assert!(orthonormality_defect(&q) < 1e-14);
        assert!((q * t - f).norm() < 1e-12);
        assert_eq!(t[(1, 0)], Complex64::new(0.0, 0.0));
    }
}
