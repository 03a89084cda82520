//! Small dense complex matrices acting on field fibers (dimension 1, 2 or 4).

use num_complex::Complex64;

pub type C64 = Complex64;

/// Row-major `dim x dim` complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberMatrix {
    pub dim: usize,
    pub a: Vec<C64>,
}

impl FiberMatrix {
    pub fn zeros(dim: usize) -> Self {
        FiberMatrix {
            dim,
            a: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let mut a = Vec::with_capacity(dim * dim);
        for r in rows {
            assert_eq!(r.len(), dim);
            a.extend_from_slice(r);
        }
        FiberMatrix { dim, a }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.dim + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.a[i * self.dim + j]
    }

    pub fn scale(&self, s: C64) -> Self {
        FiberMatrix {
            dim: self.dim,
            a: self.a.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        FiberMatrix {
            dim: self.dim,
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(x, y)| x + y)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.a[i * d + k];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.a[i * d + j] += aik * other.a[k * d + j];
                }
            }
        }
        out
    }

    /// Apply to a fiber vector stored in a slice.
    #[inline]
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += self.a[i * d + j] * v[j];
            }
            out[i] = acc;
        }
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.a[i * d + j].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Solve `self * x = b` by Gaussian elimination with partial pivoting.
    /// Fibers are at most 4-dimensional, so this is effectively closed-form.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let d = self.dim;
        let mut m = self.a.clone();
        let mut rhs = b.to_vec();
        for col in 0..d {
            let mut piv = col;
            let mut best = m[col * d + col].norm();
            for r in (col + 1)..d {
                let v = m[r * d + col].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            assert!(best > 0.0, "singular fiber matrix");
            if piv != col {
                for j in 0..d {
                    m.swap(col * d + j, piv * d + j);
                }
                rhs.swap(col, piv);
            }
            let diag = m[col * d + col];
            for r in (col + 1)..d {
                let f = m[r * d + col] / diag;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..d {
                    let v = m[col * d + j];
                    m[r * d + j] -= f * v;
                }
                let v = rhs[col];
                rhs[r] -= f * v;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); d];
        for i in (0..d).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..d {
                acc -= m[i * d + j] * x[j];
            }
            x[i] = acc / m[i * d + i];
        }
        x
    }
}
