//! Discrete product spacetimes: a time line crossed with a spatial circle,
//! carrying lapse and spatial-metric samples in the split form
//! `ds^2 = beta dt^2 - h_t`. Spatial sections are compact (a circle), so
//! every lattice built here is globally hyperbolic by construction and each
//! constant-time row is a Cauchy slice.

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpacetimeError {
    #[error("grid sizes must be at least 8 (got n_t={n_t}, n_x={n_x})")]
    GridTooSmall { n_t: usize, n_x: usize },
    #[error("steps must be positive (delta_t={delta_t}, delta_x={delta_x})")]
    NonPositiveStep { delta_t: f64, delta_x: f64 },
    #[error("{what} sample at (t={t}, x={x}) is {value}; must be positive and finite")]
    BadSample {
        what: &'static str,
        t: usize,
        x: usize,
        value: f64,
    },
    #[error("slice index {t_index} out of range (n_t={n_t})")]
    SliceOutOfRange { t_index: usize, n_t: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyTag {
    Minkowski,
    Ultrastatic,
    Frw,
    DeSitter,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Future,
    Past,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    /// Causal shadow: closed, includes the seed.
    Causal,
    /// Chronological shadow: open, excludes the seed where degenerate.
    Chronological,
}

/// Grid geometry shared by all families.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub n_t: usize,
    pub n_x: usize,
    pub delta_t: f64,
    pub delta_x: f64,
    /// Coordinate time of the first slice.
    pub t0: f64,
}

impl GridSpec {
    pub fn new(n_t: usize, n_x: usize, delta_t: f64, delta_x: f64) -> Self {
        GridSpec {
            n_t,
            n_x,
            delta_t,
            delta_x,
            t0: 0.0,
        }
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }
}

/// Geometry data of one family, sampled on demand by the builder.
pub enum SpacetimeSpec {
    Minkowski,
    /// `beta = 1`, spatial metric `h(x)` time independent.
    Ultrastatic { h_profile: Box<dyn Fn(f64) -> f64> },
    /// `beta = 1`, `h = a(t)^2`.
    Frw { scale: Box<dyn Fn(f64) -> f64> },
    /// `a(t) = R cosh(t / R)`.
    DeSitter { radius: f64 },
    /// Arbitrary positive lapse and spatial metric samples.
    Custom {
        lapse: Box<dyn Fn(f64, f64) -> f64>,
        spatial: Box<dyn Fn(f64, f64) -> f64>,
    },
}

/// Discrete globally hyperbolic background.
///
/// Grids are stored row-major with index `t * n_x + x`; the spatial index is
/// periodic. `scalar_curvature` holds the curvature of the two-dimensional
/// lattice metric (`2 a''/a` for the scale-factor families).
#[derive(Clone, Debug)]
pub struct SpacetimeLattice {
    pub n_t: usize,
    pub n_x: usize,
    pub delta_t: f64,
    pub delta_x: f64,
    pub t0: f64,
    pub lapse: Vec<f64>,
    pub spatial_metric: Vec<f64>,
    pub scalar_curvature: Vec<f64>,
    pub family_tag: FamilyTag,
    /// Family parameter where one exists (the de Sitter radius).
    pub family_param: Option<f64>,
    /// Scale factor samples on slices `-2..=n_t+1` for the homogeneous
    /// families (index shifted by two), used by centered differences.
    pub scale_samples: Option<Vec<f64>>,
}

impl SpacetimeLattice {
    #[inline]
    pub fn idx(&self, t: usize, x: usize) -> usize {
        t * self.n_x + x
    }

    #[inline]
    pub fn wrap_x(&self, x: isize) -> usize {
        x.rem_euclid(self.n_x as isize) as usize
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n_t * self.n_x
    }

    pub fn time_of(&self, t: usize) -> f64 {
        self.t0 + t as f64 * self.delta_t
    }

    /// Local coordinate light speed `sqrt(beta / h)` at a grid point.
    #[inline]
    pub fn light_speed(&self, t: usize, x: usize) -> f64 {
        (self.lapse[self.idx(t, x)] / self.spatial_metric[self.idx(t, x)]).sqrt()
    }

    /// Largest stable time step for the explicit solvers:
    /// `min over grid of sqrt(h / beta) * delta_x`.
    pub fn cfl_limit(&self) -> f64 {
        let mut lim = f64::INFINITY;
        for t in 0..self.n_t {
            for x in 0..self.n_x {
                let i = self.idx(t, x);
                let v = (self.spatial_metric[i] / self.lapse[i]).sqrt() * self.delta_x;
                lim = lim.min(v);
            }
        }
        lim
    }

    pub fn cfl_ok(&self) -> bool {
        self.delta_t <= self.cfl_limit() * (1.0 + 1e-12)
    }

    /// Scale factor at slice `t` for the homogeneous families (`sqrt(h)`).
    /// Ghost slices `-2..=n_t+1` are available for stencils.
    pub fn scale_at(&self, t: isize) -> f64 {
        match &self.scale_samples {
            Some(a) => a[(t + 2) as usize],
            None => self.spatial_metric[self.idx(t.clamp(0, self.n_t as isize - 1) as usize, 0)]
                .sqrt(),
        }
    }
}

fn check_positive(
    what: &'static str,
    t: usize,
    x: usize,
    value: f64,
) -> Result<f64, SpacetimeError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(SpacetimeError::BadSample { what, t, x, value });
    }
    Ok(value)
}

/// Build a lattice background from a family spec.
///
/// Curvature is sampled from the closed form where the family provides one
/// (flat and de Sitter cases) and by centered second differences of the
/// sampled geometry otherwise.
pub fn build_spacetime(
    spec: &SpacetimeSpec,
    grid: &GridSpec,
) -> Result<Arc<SpacetimeLattice>, SpacetimeError> {
    if grid.n_t < 8 || grid.n_x < 8 {
        return Err(SpacetimeError::GridTooSmall {
            n_t: grid.n_t,
            n_x: grid.n_x,
        });
    }
    if !(grid.delta_t > 0.0 && grid.delta_x > 0.0) {
        return Err(SpacetimeError::NonPositiveStep {
            delta_t: grid.delta_t,
            delta_x: grid.delta_x,
        });
    }
    let (n_t, n_x) = (grid.n_t, grid.n_x);
    let n = n_t * n_x;
    let mut lapse = vec![1.0; n];
    let mut h = vec![1.0; n];
    let mut r = vec![0.0; n];
    let mut scale_samples = None;
    let mut family_param = None;

    let tag = match spec {
        SpacetimeSpec::Minkowski => FamilyTag::Minkowski,
        SpacetimeSpec::Ultrastatic { h_profile } => {
            for x in 0..n_x {
                let hx = check_positive("spatial metric", 0, x, h_profile(x as f64 * grid.delta_x))?;
                for t in 0..n_t {
                    h[t * n_x + x] = hx;
                }
            }
            // A static product metric in one spatial dimension is flat:
            // the spatial coordinate can be re-parametrized to unit metric.
            FamilyTag::Ultrastatic
        }
        SpacetimeSpec::Frw { scale } => {
            let a_ext = sample_scale(scale, grid)?;
            fill_scale_factor(&a_ext, grid, &mut h, &mut r, None);
            scale_samples = Some(a_ext);
            FamilyTag::Frw
        }
        SpacetimeSpec::DeSitter { radius } => {
            let rad = *radius;
            if !(rad.is_finite() && rad > 0.0) {
                return Err(SpacetimeError::BadSample {
                    what: "de Sitter radius",
                    t: 0,
                    x: 0,
                    value: rad,
                });
            }
            let scale = move |t: f64| rad * (t / rad).cosh();
            let a_ext = sample_scale(&scale, grid)?;
            fill_scale_factor(&a_ext, grid, &mut h, &mut r, Some(2.0 / (rad * rad)));
            scale_samples = Some(a_ext);
            family_param = Some(rad);
            FamilyTag::DeSitter
        }
        SpacetimeSpec::Custom {
            lapse: beta_f,
            spatial: h_f,
        } => {
            for t in 0..n_t {
                let tc = grid.t0 + t as f64 * grid.delta_t;
                for x in 0..n_x {
                    let xc = x as f64 * grid.delta_x;
                    lapse[t * n_x + x] = check_positive("lapse", t, x, beta_f(tc, xc))?;
                    h[t * n_x + x] = check_positive("spatial metric", t, x, h_f(tc, xc))?;
                }
            }
            custom_curvature(beta_f, h_f, grid, &mut r);
            FamilyTag::Custom
        }
    };

    Ok(Arc::new(SpacetimeLattice {
        n_t,
        n_x,
        delta_t: grid.delta_t,
        delta_x: grid.delta_x,
        t0: grid.t0,
        lapse,
        spatial_metric: h,
        scalar_curvature: r,
        family_tag: tag,
        family_param,
        scale_samples,
    }))
}

fn sample_scale(
    scale: &dyn Fn(f64) -> f64,
    grid: &GridSpec,
) -> Result<Vec<f64>, SpacetimeError> {
    let mut a = Vec::with_capacity(grid.n_t + 4);
    for i in -2..=(grid.n_t as isize + 1) {
        let t = grid.t0 + i as f64 * grid.delta_t;
        let v = scale(t);
        if !(v.is_finite() && v > 0.0) {
            return Err(SpacetimeError::BadSample {
                what: "scale factor",
                t: i.max(0) as usize,
                x: 0,
                value: v,
            });
        }
        a.push(v);
    }
    Ok(a)
}

fn fill_scale_factor(
    a_ext: &[f64],
    grid: &GridSpec,
    h: &mut [f64],
    r: &mut [f64],
    analytic_r: Option<f64>,
) {
    let dt = grid.delta_t;
    for t in 0..grid.n_t {
        let a = a_ext[t + 2];
        let rv = match analytic_r {
            Some(v) => v,
            None => {
                let addot = (a_ext[t + 3] - 2.0 * a + a_ext[t + 1]) / (dt * dt);
                2.0 * addot / a
            }
        };
        for x in 0..grid.n_x {
            h[t * grid.n_x + x] = a * a;
            r[t * grid.n_x + x] = rv;
        }
    }
}

/// Curvature of `ds^2 = beta dt^2 - h dx^2` by centered differences of the
/// sampled geometry. Sign convention is anchored to the scale-factor
/// families: `R = 2 a''/a` for `beta = 1`, `h = a(t)^2`.
fn custom_curvature(
    beta_f: &dyn Fn(f64, f64) -> f64,
    h_f: &dyn Fn(f64, f64) -> f64,
    grid: &GridSpec,
    r: &mut [f64],
) {
    let (dt, dx) = (grid.delta_t, grid.delta_x);
    let lx = grid.n_x as f64 * dx;
    let beta = |ti: isize, xi: isize| {
        let t = grid.t0 + ti as f64 * dt;
        let x = (xi as f64 * dx).rem_euclid(lx);
        beta_f(t, x)
    };
    let hh = |ti: isize, xi: isize| {
        let t = grid.t0 + ti as f64 * dt;
        let x = (xi as f64 * dx).rem_euclid(lx);
        h_f(t, x)
    };
    // Christoffel symbols of the diagonal metric; lower index order (dir, arg).
    let gamma_t_xx = |ti: isize, xi: isize| {
        (hh(ti + 1, xi) - hh(ti - 1, xi)) / (2.0 * dt) / (2.0 * beta(ti, xi))
    };
    let gamma_t_tx = |ti: isize, xi: isize| {
        (beta(ti, xi + 1) - beta(ti, xi - 1)) / (2.0 * dx) / (2.0 * beta(ti, xi))
    };
    for t in 0..grid.n_t {
        let ti = t as isize;
        for x in 0..grid.n_x {
            let xi = x as isize;
            let b = beta(ti, xi);
            let hv = hh(ti, xi);
            let b_t = (beta(ti + 1, xi) - beta(ti - 1, xi)) / (2.0 * dt);
            let b_x = (beta(ti, xi + 1) - beta(ti, xi - 1)) / (2.0 * dx);
            let h_t = (hh(ti + 1, xi) - hh(ti - 1, xi)) / (2.0 * dt);
            let h_x = (hh(ti, xi + 1) - hh(ti, xi - 1)) / (2.0 * dx);
            let g_t_tt = b_t / (2.0 * b);
            let g_t_tx = b_x / (2.0 * b);
            let g_t_xx = h_t / (2.0 * b);
            let g_x_tx = h_t / (2.0 * hv);
            let g_x_xx = h_x / (2.0 * hv);
            let d_t_gtxx = (gamma_t_xx(ti + 1, xi) - gamma_t_xx(ti - 1, xi)) / (2.0 * dt);
            let d_x_gttx = (gamma_t_tx(ti, xi + 1) - gamma_t_tx(ti, xi - 1)) / (2.0 * dx);
            let riem_t_xtx = d_t_gtxx - d_x_gttx + g_t_tt * g_t_xx + g_t_tx * g_x_xx
                - g_t_tx * g_t_tx
                - g_t_xx * g_x_tx;
            r[t * grid.n_x + x] = 2.0 * riem_t_xtx / hv;
        }
    }
}

// ---------------------------------------------------------------------------
// Support masks
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportClass {
    Compact,
    PastCompact,
    FutureCompact,
    TimelikeCompact,
    SpacelikeCompact,
    Full,
}

/// Per-slice exact cone extents kept alongside a rasterized cone so that
/// taking the cone of a cone continues from sub-cell positions instead of
/// re-seeding from rounded cells.
#[derive(Clone, Debug)]
pub struct ConeArcs {
    pub direction: Direction,
    pub kind: ConeKind,
    pub n_x: usize,
    /// Arcs per slice in cell units: `(lo, hi)` with `lo` normalized into
    /// `[0, n_x)` and `hi - lo <= n_x`. `hi - lo == n_x` marks a full slice.
    pub slices: Vec<Vec<(f64, f64)>>,
}

/// Bitmask over lattice points with a support-class hint.
#[derive(Clone, Debug)]
pub struct SupportMask {
    n_t: usize,
    n_x: usize,
    words: Vec<u64>,
    pub class_hint: SupportClass,
    pub(crate) cone: Option<Arc<ConeArcs>>,
}

impl SupportMask {
    pub fn empty(n_t: usize, n_x: usize) -> Self {
        SupportMask {
            n_t,
            n_x,
            words: vec![0; (n_t * n_x + 63) / 64],
            class_hint: SupportClass::Compact,
            cone: None,
        }
    }

    pub fn full(n_t: usize, n_x: usize) -> Self {
        let mut m = Self::empty(n_t, n_x);
        for t in 0..n_t {
            for x in 0..n_x {
                m.set(t, x, true);
            }
        }
        m.class_hint = SupportClass::Full;
        m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_t, self.n_x)
    }

    #[inline]
    fn bit(&self, t: usize, x: usize) -> usize {
        t * self.n_x + x
    }

    #[inline]
    pub fn get(&self, t: usize, x: usize) -> bool {
        let b = self.bit(t, x);
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, t: usize, x: usize, value: bool) {
        let b = self.bit(t, x);
        if value {
            self.words[b / 64] |= 1 << (b % 64);
        } else {
            self.words[b / 64] &= !(1 << (b % 64));
        }
        self.cone = None;
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims());
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
        out.cone = None;
        out
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.dims(), other.dims());
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
        out.cone = None;
        out
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.dims(), other.dims());
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Cells of `self` outside `other`.
    pub fn cells_outside(&self, other: &Self) -> usize {
        assert_eq!(self.dims(), other.dims());
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    pub fn same_cells(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.words == other.words
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_x = self.n_x;
        (0..self.n_t)
            .flat_map(move |t| (0..n_x).map(move |x| (t, x)))
            .filter(move |&(t, x)| self.get(t, x))
    }

    pub fn t_extent(&self) -> Option<(usize, usize)> {
        let mut lo = None;
        let mut hi = None;
        for t in 0..self.n_t {
            if (0..self.n_x).any(|x| self.get(t, x)) {
                if lo.is_none() {
                    lo = Some(t);
                }
                hi = Some(t);
            }
        }
        Some((lo?, hi?))
    }

    /// Assign the class hint from the lattice-operational definitions:
    /// bounded away from a time boundary by at least `margin` slices.
    pub fn classify(&mut self, margin: usize) {
        let hint = match self.t_extent() {
            None => SupportClass::Compact,
            Some((lo, hi)) => {
                let pc = lo >= margin;
                let fc = hi + margin <= self.n_t - 1;
                match (pc, fc) {
                    // On a spatially compact lattice timelike compact and
                    // compact coincide.
                    (true, true) => SupportClass::Compact,
                    (true, false) => SupportClass::PastCompact,
                    (false, true) => SupportClass::FutureCompact,
                    (false, false) => {
                        if self.count() == self.n_t * self.n_x {
                            SupportClass::Full
                        } else {
                            SupportClass::SpacelikeCompact
                        }
                    }
                }
            }
        };
        self.class_hint = hint;
    }

    /// Binary PGM (P5) export: 255 inside the mask, 0 outside. Rows run over
    /// the time index starting at the earliest slice.
    pub fn write_pgm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.n_x, self.n_t)?;
        let mut row = vec![0u8; self.n_x];
        for t in 0..self.n_t {
            for (x, px) in row.iter_mut().enumerate() {
                *px = if self.get(t, x) { 255 } else { 0 };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn cone_arcs(&self) -> Option<&ConeArcs> {
        self.cone.as_deref()
    }

    /// Morphological dilation by forward offsets: the union of the mask
    /// with copies shifted by `0..=t_plus` slices and `0..=x_plus` cells
    /// (periodic). Converts staggered half-cell carriers to node masks.
    pub fn dilated(&self, t_plus: usize, x_plus: usize) -> SupportMask {
        let mut out = SupportMask::empty(self.n_t, self.n_x);
        for (t, x) in self.iter_cells() {
            for dt in 0..=t_plus {
                let tt = t + dt;
                if tt >= self.n_t {
                    continue;
                }
                for dx in 0..=x_plus {
                    let xx = (x + dx) % self.n_x;
                    out.set(tt, xx, true);
                }
            }
        }
        out.class_hint = self.class_hint;
        out
    }
}

// ---------------------------------------------------------------------------
// Causal cones
// ---------------------------------------------------------------------------

const RASTER_TOL: f64 = 1e-9;
const MERGE_TOL: f64 = 1e-12;

fn merge_arcs(arcs: &mut Vec<(f64, f64)>, n_x: f64) {
    // Cap runaway arcs first.
    for a in arcs.iter_mut() {
        if a.1 - a.0 >= n_x {
            a.1 = a.0 + n_x;
        }
    }
    loop {
        arcs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged = false;
        'outer: for i in 0..arcs.len() {
            for j in (i + 1)..arcs.len() {
                for shift in [-n_x, 0.0, n_x] {
                    let (alo, ahi) = arcs[i];
                    let (blo, bhi) = (arcs[j].0 + shift, arcs[j].1 + shift);
                    if blo <= ahi + MERGE_TOL && alo <= bhi + MERGE_TOL {
                        let lo = alo.min(blo);
                        let hi = ahi.max(bhi);
                        arcs[i] = normalize_arc(lo, hi.min(lo + n_x), n_x);
                        arcs.remove(j);
                        merged = true;
                        break 'outer;
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }
}

fn normalize_arc(lo: f64, hi: f64, n_x: f64) -> (f64, f64) {
    let width = (hi - lo).min(n_x);
    let lo_n = lo.rem_euclid(n_x);
    (lo_n, lo_n + width)
}

/// Maximal runs of set cells in a slice, as degenerate-width arcs spanning
/// the run's cell centers (a mask without cone provenance is a set of seed
/// points; its cone is the union of the point cones).
fn slice_runs(mask: &SupportMask, t: usize) -> Vec<(f64, f64)> {
    let n_x = mask.n_x;
    let mut runs = Vec::new();
    if (0..n_x).all(|x| mask.get(t, x)) {
        runs.push((0.0, n_x as f64));
        return runs;
    }
    // Find a clear cell to anchor the circular scan.
    let start = (0..n_x).find(|&x| !mask.get(t, x)).unwrap();
    let mut x = start;
    for _ in 0..n_x {
        x = (x + 1) % n_x;
        if mask.get(t, x) {
            let lo = x;
            let mut len = 1;
            while mask.get(t, (lo + len) % n_x) {
                len += 1;
            }
            runs.push((lo as f64, (lo + len - 1) as f64));
            x = (lo + len - 1) % n_x;
            if runs.iter().map(|r| r.1 - r.0 + 1.0).sum::<f64>() >= n_x as f64 {
                break;
            }
        }
    }
    runs.into_iter()
        .map(|(lo, hi)| normalize_arc(lo, hi, n_x as f64))
        .collect()
}

fn rasterize(
    arcs: &[(f64, f64)],
    kind: ConeKind,
    mask: &mut SupportMask,
    t: usize,
) {
    let n_x = mask.n_x as isize;
    for &(lo, hi) in arcs {
        if hi - lo >= mask.n_x as f64 {
            for x in 0..mask.n_x {
                mask.set(t, x, true);
            }
            continue;
        }
        let (jmin, jmax) = match kind {
            ConeKind::Causal => (
                (lo + RASTER_TOL).floor() as isize,
                (hi - RASTER_TOL).ceil() as isize,
            ),
            ConeKind::Chronological => (
                (lo + RASTER_TOL).floor() as isize + 1,
                (hi - RASTER_TOL).ceil() as isize - 1,
            ),
        };
        if jmax < jmin {
            continue;
        }
        if (jmax - jmin) as usize >= mask.n_x {
            for x in 0..mask.n_x {
                mask.set(t, x, true);
            }
            continue;
        }
        for j in jmin..=jmax {
            let x = j.rem_euclid(n_x) as usize;
            mask.set(t, x, true);
        }
    }
}

/// Conservative speed sample for one front step: scan the cells a front at
/// position `pos` can sweep during the step, on both adjacent slices, and
/// take the max (causal cones, rounding the shadow outward) or min
/// (chronological cones, rounding inward).
fn step_speed(
    lat: &SpacetimeLattice,
    t_from: usize,
    t_to: usize,
    pos: f64,
    going_right: bool,
    kind: ConeKind,
) -> f64 {
    let ratio = lat.delta_t / lat.delta_x;
    let sample = |cell: isize| -> f64 {
        let x = lat.wrap_x(cell);
        match kind {
            ConeKind::Causal => lat.light_speed(t_from, x).max(lat.light_speed(t_to, x)),
            ConeKind::Chronological => lat.light_speed(t_from, x).min(lat.light_speed(t_to, x)),
        }
    };
    let mut speed = sample(pos.round() as isize);
    // One widening pass: re-sample over the full swept window.
    for _ in 0..2 {
        let reach = speed * ratio;
        let (a, b) = if going_right {
            (pos, pos + reach)
        } else {
            (pos - reach, pos)
        };
        let mut agg = match kind {
            ConeKind::Causal => 0.0f64,
            ConeKind::Chronological => f64::INFINITY,
        };
        let mut cell = a.floor() as isize;
        while (cell as f64) <= b.ceil() {
            let s = sample(cell);
            agg = match kind {
                ConeKind::Causal => agg.max(s),
                ConeKind::Chronological => agg.min(s),
            };
            cell += 1;
        }
        if (agg - speed).abs() <= f64::EPSILON * speed.abs() {
            speed = agg;
            break;
        }
        speed = agg;
    }
    speed
}

/// Discrete causal (`J`) or chronological (`I`) shadow of a seed mask.
///
/// The front positions are tracked as exact sub-cell arcs that grow by the
/// local light speed each step; rasterization rounds outward for `J` and
/// strictly inward for `I`. The arcs are kept on the result so that cones of
/// cones continue from the exact fronts.
pub fn causal_cone(
    lat: &SpacetimeLattice,
    seed: &SupportMask,
    direction: Direction,
    kind: ConeKind,
) -> SupportMask {
    causal_cone_checked(lat, seed, direction, kind).0
}

/// As [`causal_cone`]; the flag reports whether any front wrapped all the
/// way around the spatial circle inside the simulated window (a scenario
/// sizing warning).
pub fn causal_cone_checked(
    lat: &SpacetimeLattice,
    seed: &SupportMask,
    direction: Direction,
    kind: ConeKind,
) -> (SupportMask, bool) {
    assert_eq!(seed.dims(), (lat.n_t, lat.n_x));
    let n_x = lat.n_x as f64;
    let mut out = SupportMask::empty(lat.n_t, lat.n_x);
    let mut wrapped = false;

    // Seeds per slice: exact arcs when compatible cone provenance exists,
    // cell-center runs otherwise.
    let provenance = seed.cone.as_ref().filter(|c| {
        c.direction == direction && c.kind == kind && c.n_x == lat.n_x
    });

    let order: Vec<usize> = match direction {
        Direction::Future => (0..lat.n_t).collect(),
        Direction::Past => (0..lat.n_t).rev().collect(),
    };

    let mut cur: Vec<(f64, f64)> = Vec::new();
    let mut prov_slices: Vec<Vec<(f64, f64)>> = vec![Vec::new(); lat.n_t];

    for (step, &t) in order.iter().enumerate() {
        let seeds_here = match provenance {
            Some(c) => c.slices[t].clone(),
            None => slice_runs(seed, t),
        };
        cur.extend(seeds_here);
        merge_arcs(&mut cur, n_x);
        if cur.iter().any(|a| a.1 - a.0 >= n_x) {
            wrapped = true;
        }
        rasterize(&cur, kind, &mut out, t);
        prov_slices[t] = cur.clone();

        if step + 1 < order.len() {
            let t_next = order[step + 1];
            let ratio = lat.delta_t / lat.delta_x;
            for a in cur.iter_mut() {
                if a.1 - a.0 >= n_x {
                    continue;
                }
                let sl = step_speed(lat, t, t_next, a.0, false, kind);
                let sr = step_speed(lat, t, t_next, a.1, true, kind);
                a.0 -= sl * ratio;
                a.1 += sr * ratio;
            }
            merge_arcs(&mut cur, n_x);
        }
    }

    out.classify(crate::greenops::STENCIL_MARGIN);
    out.cone = Some(Arc::new(ConeArcs {
        direction,
        kind,
        n_x: lat.n_x,
        slices: prov_slices,
    }));
    (out, wrapped)
}

// ---------------------------------------------------------------------------
// Volume weights and Cauchy slices
// ---------------------------------------------------------------------------

/// Cell volume weights `sqrt(beta h) * delta_t * delta_x`.
pub fn volume_weights(lat: &SpacetimeLattice) -> Vec<f64> {
    let mut w = Vec::with_capacity(lat.cells());
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let i = lat.idx(t, x);
            w.push((lat.lapse[i] * lat.spatial_metric[i]).sqrt() * lat.delta_t * lat.delta_x);
        }
    }
    w
}

/// One constant-time Cauchy slice with its unit-normal scale and induced
/// volume weights.
#[derive(Clone, Debug)]
pub struct CauchySlice {
    pub t_index: usize,
    /// `beta^{-1/2}` along the slice: the coefficient turning a coordinate
    /// time derivative into the future unit normal derivative.
    pub normal_scale: Vec<f64>,
    /// `sqrt(h) * delta_x` along the slice.
    pub induced_volume: Vec<f64>,
}

pub fn cauchy_slice(
    lat: &SpacetimeLattice,
    t_index: usize,
) -> Result<CauchySlice, SpacetimeError> {
    if t_index >= lat.n_t {
        return Err(SpacetimeError::SliceOutOfRange {
            t_index,
            n_t: lat.n_t,
        });
    }
    let mut normal_scale = Vec::with_capacity(lat.n_x);
    let mut induced_volume = Vec::with_capacity(lat.n_x);
    for x in 0..lat.n_x {
        let i = lat.idx(t_index, x);
        normal_scale.push(lat.lapse[i].powf(-0.5));
        induced_volume.push(lat.spatial_metric[i].sqrt() * lat.delta_x);
    }
    Ok(CauchySlice {
        t_index,
        normal_scale,
        induced_volume,
    })
}

/// Point-seed helper used all over the tests and suites.
pub fn point_mask(lat: &SpacetimeLattice, t: usize, x: usize) -> SupportMask {
    let mut m = SupportMask::empty(lat.n_t, lat.n_x);
    m.set(t, x, true);
    m
}
