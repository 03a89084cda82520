//! Fiber-valued grid functions with support tracking.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::spacetime::{SpacetimeLattice, SupportClass, SupportMask};

pub type C64 = Complex64;

/// Values outside the support mask must sit below this fraction of the
/// section's max magnitude.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarKind {
    Real,
    Complex,
}

#[derive(Debug, Error)]
pub enum SectionError {
    #[error("fiber dimensions differ: {0} vs {1}")]
    FiberMismatch(usize, usize),
    #[error("sections live on different lattices")]
    LatticeMismatch,
    #[error("csv: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A fiber-valued grid function together with its support mask.
///
/// Storage is row-major over `(t, x)` with `fiber_dim` contiguous complex
/// components per cell. Real-kind sections simply keep zero imaginary parts.
#[derive(Clone, Debug)]
pub struct Section {
    pub lattice: Arc<SpacetimeLattice>,
    pub fiber_dim: usize,
    pub scalar_kind: ScalarKind,
    pub values: Vec<C64>,
    pub support: SupportMask,
}

impl Section {
    pub fn zeros(lattice: Arc<SpacetimeLattice>, fiber_dim: usize, kind: ScalarKind) -> Self {
        let n = lattice.cells() * fiber_dim;
        let support = SupportMask::empty(lattice.n_t, lattice.n_x);
        Section {
            lattice,
            fiber_dim,
            scalar_kind: kind,
            values: vec![C64::new(0.0, 0.0); n],
            support,
        }
    }

    pub fn from_fn<F>(
        lattice: Arc<SpacetimeLattice>,
        fiber_dim: usize,
        kind: ScalarKind,
        mut f: F,
    ) -> Self
    where
        F: FnMut(usize, usize, usize) -> C64,
    {
        let mut s = Self::zeros(lattice, fiber_dim, kind);
        for t in 0..s.lattice.n_t {
            for x in 0..s.lattice.n_x {
                for c in 0..fiber_dim {
                    let v = f(t, x, c);
                    let i = s.vidx(t, x, c);
                    s.values[i] = v;
                }
            }
        }
        s.recompute_support();
        s
    }

    #[inline]
    pub fn vidx(&self, t: usize, x: usize, c: usize) -> usize {
        (t * self.lattice.n_x + x) * self.fiber_dim + c
    }

    #[inline]
    pub fn at(&self, t: usize, x: usize, c: usize) -> C64 {
        self.values[self.vidx(t, x, c)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, x: usize, c: usize, v: C64) {
        let i = self.vidx(t, x, c);
        self.values[i] = v;
    }

    pub fn fiber_at(&self, t: usize, x: usize) -> &[C64] {
        let i = (t * self.lattice.n_x + x) * self.fiber_dim;
        &self.values[i..i + self.fiber_dim]
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max fiber magnitude over a closed row band.
    pub fn norm_inf_rows(&self, lo: usize, hi: usize) -> f64 {
        let mut m = 0.0f64;
        for t in lo..=hi.min(self.lattice.n_t - 1) {
            for x in 0..self.lattice.n_x {
                for c in 0..self.fiber_dim {
                    m = m.max(self.at(t, x, c).norm());
                }
            }
        }
        m
    }

    /// Max fiber magnitude over one time slice.
    pub fn slice_norm_inf(&self, t: usize) -> f64 {
        let mut m = 0.0f64;
        for x in 0..self.lattice.n_x {
            for c in 0..self.fiber_dim {
                m = m.max(self.at(t, x, c).norm());
            }
        }
        m
    }

    /// Rebuild the support mask from the values: a cell belongs to the
    /// support when some component magnitude exceeds `SUPPORT_TOL * max`.
    pub fn recompute_support(&mut self) {
        let max = self.norm_inf();
        let thr = SUPPORT_TOL * max;
        let mut mask = SupportMask::empty(self.lattice.n_t, self.lattice.n_x);
        if max > 0.0 {
            for t in 0..self.lattice.n_t {
                for x in 0..self.lattice.n_x {
                    let on = (0..self.fiber_dim).any(|c| self.at(t, x, c).norm() > thr);
                    if on {
                        mask.set(t, x, true);
                    }
                }
            }
        }
        mask.classify(crate::greenops::STENCIL_MARGIN);
        self.support = mask;
    }

    /// Set all values outside `mask` to exact zero and adopt it as support.
    pub fn truncate_to(&mut self, mask: &SupportMask) {
        for t in 0..self.lattice.n_t {
            for x in 0..self.lattice.n_x {
                if !mask.get(t, x) {
                    for c in 0..self.fiber_dim {
                        let i = self.vidx(t, x, c);
                        self.values[i] = C64::new(0.0, 0.0);
                    }
                }
            }
        }
        let mut m = mask.clone();
        m.classify(crate::greenops::STENCIL_MARGIN);
        self.support = m;
    }

    /// Support-invariant audit: every value outside the mask is below
    /// tolerance.
    pub fn support_invariant_holds(&self) -> bool {
        let thr = SUPPORT_TOL * self.norm_inf();
        for t in 0..self.lattice.n_t {
            for x in 0..self.lattice.n_x {
                if !self.support.get(t, x) {
                    for c in 0..self.fiber_dim {
                        if self.at(t, x, c).norm() > thr {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn linear_comb(&self, a: C64, other: &Section, b: C64) -> Result<Section, SectionError> {
        if self.fiber_dim != other.fiber_dim {
            return Err(SectionError::FiberMismatch(self.fiber_dim, other.fiber_dim));
        }
        if !Arc::ptr_eq(&self.lattice, &other.lattice) {
            return Err(SectionError::LatticeMismatch);
        }
        let mut out = self.clone();
        for (o, (u, v)) in out
            .values
            .iter_mut()
            .zip(self.values.iter().zip(&other.values))
        {
            *o = a * u + b * v;
        }
        out.recompute_support();
        Ok(out)
    }

    pub fn scaled(&self, a: C64) -> Section {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= a;
        }
        out
    }

    pub fn conjugated(&self) -> Section {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v = v.conj();
        }
        out
    }

    pub fn class_hint(&self) -> SupportClass {
        self.support.class_hint
    }

    /// CSV export: header `t_index,x_index,component_index,re,im`, one row
    /// per supported cell component, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<(), SectionError> {
        writeln!(w, "t_index,x_index,component_index,re,im")?;
        for t in 0..self.lattice.n_t {
            for x in 0..self.lattice.n_x {
                if !self.support.get(t, x) {
                    continue;
                }
                for c in 0..self.fiber_dim {
                    let v = self.at(t, x, c);
                    writeln!(w, "{},{},{},{:.16e},{:.16e}", t, x, c, v.re, v.im)?;
                }
            }
        }
        Ok(())
    }

    /// CSV import onto an existing lattice.
    pub fn read_csv<R: BufRead>(
        lattice: Arc<SpacetimeLattice>,
        fiber_dim: usize,
        kind: ScalarKind,
        r: R,
    ) -> Result<Section, SectionError> {
        let mut s = Self::zeros(lattice, fiber_dim, kind);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || lineno == 0 && trimmed.starts_with("t_index") {
                continue;
            }
            let parts: Vec<&str> = trimmed.split(',').collect();
            if parts.len() != 5 {
                return Err(SectionError::Parse {
                    line: lineno + 1,
                    msg: format!("expected 5 fields, got {}", parts.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64, SectionError> {
                s.trim().parse::<f64>().map_err(|e| SectionError::Parse {
                    line: lineno + 1,
                    msg: format!("{what}: {e}"),
                })
            };
            let t = parse(parts[0], "t_index")? as usize;
            let x = parse(parts[1], "x_index")? as usize;
            let c = parse(parts[2], "component_index")? as usize;
            if t >= s.lattice.n_t || x >= s.lattice.n_x || c >= fiber_dim {
                return Err(SectionError::Parse {
                    line: lineno + 1,
                    msg: "index out of range".into(),
                });
            }
            let re = parse(parts[3], "re")?;
            let im = parse(parts[4], "im")?;
            s.set(t, x, c, C64::new(re, im));
        }
        s.recompute_support();
        Ok(s)
    }
}
