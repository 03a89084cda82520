//! Green-hyperbolic machinery: pairings, the explicit Cauchy solver for
//! normally hyperbolic systems, retarded/advanced Green operators, the
//! advanced-minus-retarded propagator, and identity/duality checkers.
//!
//! Green operators are realized as exact discrete inverses of the discrete
//! operator: the marching scheme solves each row equation for the newest
//! slice, so `L E^± f = f` holds to solver precision by construction and
//! `E^± L f = f` follows from marching uniqueness. Continuum fidelity is
//! certified separately by convergence tests.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::fiber::FiberMatrix;
use crate::section::{ScalarKind, Section, SectionError};
use crate::spacetime::{volume_weights, CauchySlice, SpacetimeLattice};

pub type C64 = Complex64;

/// Sections qualify as past/future compact when their support stays this
/// many slices away from the corresponding time boundary.
pub const STENCIL_MARGIN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingKind {
    BilinearReal,
    SesquilinearComplex,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenKind {
    Retarded,
    Advanced,
}

impl GreenKind {
    pub fn flipped(self) -> Self {
        match self {
            GreenKind::Retarded => GreenKind::Advanced,
            GreenKind::Advanced => GreenKind::Retarded,
        }
    }
}

#[derive(Debug, Error)]
pub enum GreenError {
    #[error("operator has no stepping form")]
    MissingSteppingForm,
    #[error("CFL violated: delta_t={delta_t} exceeds limit {limit}")]
    CflViolation { delta_t: f64, limit: f64 },
    #[error("source support touches the lattice time boundary (need {margin} clear slices)")]
    BoundaryContact { margin: usize },
    #[error("support class violation: {0}")]
    SupportClass(String),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error("incompatible fiber dimension: operator expects {expected}, got {got}")]
    Fiber { expected: usize, got: usize },
}

// ---------------------------------------------------------------------------
// Pairings
// ---------------------------------------------------------------------------

/// Volume-weighted fiber pairing of two sections. The sesquilinear variant
/// conjugates the first argument; the dual variant is the plain fiber
/// contraction (trivial bundles identify a bundle with its dual).
pub fn pair(a: &Section, b: &Section, kind: PairingKind) -> Result<C64, SectionError> {
    if a.fiber_dim != b.fiber_dim {
        return Err(SectionError::FiberMismatch(a.fiber_dim, b.fiber_dim));
    }
    if !Arc::ptr_eq(&a.lattice, &b.lattice) {
        return Err(SectionError::LatticeMismatch);
    }
    let lat = &a.lattice;
    let overlap = a.support.intersect(&b.support);
    let mut acc = C64::new(0.0, 0.0);
    for (t, x) in overlap.iter_cells() {
        let i = lat.idx(t, x);
        let w = (lat.lapse[i] * lat.spatial_metric[i]).sqrt() * lat.delta_t * lat.delta_x;
        let fa = a.fiber_at(t, x);
        let fb = b.fiber_at(t, x);
        let mut dot = C64::new(0.0, 0.0);
        for c in 0..a.fiber_dim {
            dot += match kind {
                PairingKind::SesquilinearComplex => fa[c].conj() * fb[c],
                _ => fa[c] * fb[c],
            };
        }
        acc += dot * w;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Coefficient data for steppable operators
// ---------------------------------------------------------------------------

/// Storage for a grid of fiber matrices that is often slice-uniform.
#[derive(Clone, Debug)]
pub enum CoefField {
    Zero,
    Uniform(FiberMatrix),
    PerSlice(Vec<FiberMatrix>),
    PerCell(Vec<FiberMatrix>),
}

impl CoefField {
    pub fn get(&self, lat: &SpacetimeLattice, t: usize, x: usize) -> Option<&FiberMatrix> {
        match self {
            CoefField::Zero => None,
            CoefField::Uniform(m) => Some(m),
            CoefField::PerSlice(v) => Some(&v[t]),
            CoefField::PerCell(v) => Some(&v[lat.idx(t, x)]),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CoefField::Zero)
    }
}

/// Coefficient data of a normally hyperbolic operator
/// `L = box_g id + B^mu d_mu + C`, where `box_g` is the metric
/// d'Alembertian (discretized in symmetric flux form with volume weights)
/// and `B`, `C` are the extra fiber terms on top of it.
#[derive(Clone, Debug)]
pub struct NormallyHyperbolicForm {
    pub lattice: Arc<SpacetimeLattice>,
    pub fiber_dim: usize,
    pub first_order_t: CoefField,
    pub first_order_x: CoefField,
    pub zeroth_order: CoefField,
}

impl NormallyHyperbolicForm {
    pub fn scalar_like(lattice: Arc<SpacetimeLattice>, potential: Vec<f64>) -> Self {
        let n_x = lattice.n_x;
        let per_cell: Vec<FiberMatrix> = potential
            .iter()
            .map(|&v| FiberMatrix::identity(1).scale(C64::new(v, 0.0)))
            .collect();
        // Collapse to per-slice storage when the potential is x-uniform.
        let uniform_x = (0..lattice.n_t).all(|t| {
            (1..n_x).all(|x| potential[t * n_x + x] == potential[t * n_x])
        });
        let zeroth = if uniform_x {
            CoefField::PerSlice(
                (0..lattice.n_t)
                    .map(|t| per_cell[t * n_x].clone())
                    .collect(),
            )
        } else {
            CoefField::PerCell(per_cell)
        };
        NormallyHyperbolicForm {
            lattice,
            fiber_dim: 1,
            first_order_t: CoefField::Zero,
            first_order_x: CoefField::Zero,
            zeroth_order: zeroth,
        }
    }

    /// `sqrt(h/beta)` at a point: the flux coefficient of the time leg.
    #[inline]
    fn flux_t_coef(&self, t: usize, x: usize) -> f64 {
        let lat = &self.lattice;
        let i = lat.idx(t, x);
        (lat.spatial_metric[i] / lat.lapse[i]).sqrt()
    }

    /// `-sqrt(beta/h)` at a point: the flux coefficient of the space leg.
    #[inline]
    fn flux_x_coef(&self, t: usize, x: usize) -> f64 {
        let lat = &self.lattice;
        let i = lat.idx(t, x);
        -(lat.lapse[i] / lat.spatial_metric[i]).sqrt()
    }

    #[inline]
    fn weight(&self, t: usize, x: usize) -> f64 {
        let lat = &self.lattice;
        let i = lat.idx(t, x);
        (lat.lapse[i] * lat.spatial_metric[i]).sqrt()
    }

    /// Everything the row equation at `(t, x)` knows except the time-flux
    /// coupling to the neighbouring slices: spatial flux, extra first-order
    /// space term and zeroth term, evaluated on slice `t`.
    fn spatial_part(&self, u: &Section, t: usize, x: usize, out: &mut [C64]) {
        let lat = &self.lattice;
        let d = self.fiber_dim;
        let dx2 = lat.delta_x * lat.delta_x;
        let w = self.weight(t, x);
        let xm = lat.wrap_x(x as isize - 1);
        let xp = lat.wrap_x(x as isize + 1);
        let am = 0.5 * (self.flux_x_coef(t, x) + self.flux_x_coef(t, xm));
        let ap = 0.5 * (self.flux_x_coef(t, x) + self.flux_x_coef(t, xp));
        let uc = u.fiber_at(t, x);
        let ul = u.fiber_at(t, xm);
        let ur = u.fiber_at(t, xp);
        for c in 0..d {
            out[c] = (ap * (ur[c] - uc[c]) - am * (uc[c] - ul[c])) / (w * dx2);
        }
        if let Some(bx) = self.first_order_x.get(lat, t, x) {
            let inv2dx = 1.0 / (2.0 * lat.delta_x);
            for i in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += bx.at(i, j) * (ur[j] - ul[j]);
                }
                out[i] += acc * inv2dx;
            }
        }
        if let Some(cm) = self.zeroth_order.get(lat, t, x) {
            for i in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..d {
                    acc += cm.at(i, j) * uc[j];
                }
                out[i] += acc;
            }
        }
    }

    /// Apply the discrete operator. Boundary rows (no time neighbours) are
    /// set to zero; residual norms are evaluated on interior rows.
    pub fn apply(&self, u: &Section) -> Section {
        let lat = self.lattice.clone();
        let d = self.fiber_dim;
        let dt2 = lat.delta_t * lat.delta_t;
        let mut out = Section::zeros(lat.clone(), d, u.scalar_kind);
        let mut spatial = vec![C64::new(0.0, 0.0); d];
        for t in 1..lat.n_t - 1 {
            for x in 0..lat.n_x {
                let w = self.weight(t, x);
                let ap = 0.5 * (self.flux_t_coef(t, x) + self.flux_t_coef(t + 1, x));
                let am = 0.5 * (self.flux_t_coef(t, x) + self.flux_t_coef(t - 1, x));
                let uc = u.fiber_at(t, x);
                let up = u.fiber_at(t + 1, x);
                let um = u.fiber_at(t - 1, x);
                self.spatial_part(u, t, x, &mut spatial);
                for c in 0..d {
                    let flux_t = (ap * (up[c] - uc[c]) - am * (uc[c] - um[c])) / (w * dt2);
                    let i = out.vidx(t, x, c);
                    out.values[i] = flux_t + spatial[c];
                }
                if let Some(bt) = self.first_order_t.get(&lat, t, x) {
                    let inv2dt = 1.0 / (2.0 * lat.delta_t);
                    for i in 0..d {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..d {
                            acc += bt.at(i, j) * (up[j] - um[j]);
                        }
                        let vi = out.vidx(t, x, i);
                        out.values[vi] += acc * inv2dt;
                    }
                }
            }
        }
        out.recompute_support();
        out
    }

    fn require_cfl(&self) -> Result<(), GreenError> {
        if !self.lattice.cfl_ok() {
            return Err(GreenError::CflViolation {
                delta_t: self.lattice.delta_t,
                limit: self.lattice.cfl_limit(),
            });
        }
        Ok(())
    }

    /// Advance the row equation at slice `t`, writing the unknown
    /// neighbouring slice (`t+1` forward, `t-1` backward) into `u`.
    fn advance_row(&self, u: &mut Section, source: Option<&Section>, t: usize, forward: bool) {
        let lat = self.lattice.clone();
        let d = self.fiber_dim;
        let dt = lat.delta_t;
        let dt2 = dt * dt;
        let t_new = if forward { t + 1 } else { t - 1 };
        let t_old = if forward { t - 1 } else { t + 1 };
        let mut spatial = vec![C64::new(0.0, 0.0); d];
        let mut rhs = vec![C64::new(0.0, 0.0); d];
        for x in 0..lat.n_x {
            let w = self.weight(t, x);
            let a_new = 0.5 * (self.flux_t_coef(t, x) + self.flux_t_coef(t_new, x));
            let a_old = 0.5 * (self.flux_t_coef(t, x) + self.flux_t_coef(t_old, x));
            self.spatial_part(u, t, x, &mut spatial);
            let uc = u.fiber_at(t, x).to_vec();
            let uo = u.fiber_at(t_old, x).to_vec();
            for c in 0..d {
                let mut r = -spatial[c];
                if let Some(src) = source {
                    r += src.at(t, x, c);
                }
                // Known part of the time flux.
                r -= (-a_new * uc[c] - a_old * (uc[c] - uo[c])) / (w * dt2);
                rhs[c] = r;
            }
            let bt = self.first_order_t.get(&lat, t, x);
            if let Some(bt) = bt {
                // Known part of the extra first-order time term.
                let sign = if forward { 1.0 } else { -1.0 };
                for i in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..d {
                        acc += bt.at(i, j) * uo[j];
                    }
                    rhs[i] += acc * C64::new(sign / (2.0 * dt), 0.0);
                }
            }
            let diag = a_new / (w * dt2);
            match bt {
                None => {
                    for c in 0..d {
                        let i = u.vidx(t_new, x, c);
                        u.values[i] = rhs[c] / diag;
                    }
                }
                Some(bt) => {
                    let sign = if forward { 1.0 } else { -1.0 };
                    let mut m = bt.scale(C64::new(sign / (2.0 * dt), 0.0));
                    for i in 0..d {
                        *m.at_mut(i, i) += C64::new(diag, 0.0);
                    }
                    let sol = m.solve(&rhs);
                    for c in 0..d {
                        let i = u.vidx(t_new, x, c);
                        u.values[i] = sol[c];
                    }
                }
            }
        }
    }

    /// Populate the starting pair of slices from Cauchy data at `s`: value
    /// `u0` and unit-normal derivative `u1` (centered), using the row
    /// equation at `s` itself so the scheme stays second order.
    fn seed_cauchy(
        &self,
        u: &mut Section,
        source: Option<&Section>,
        s: usize,
        u0: &[C64],
        u1: &[C64],
        forward: bool,
    ) {
        let lat = self.lattice.clone();
        let d = self.fiber_dim;
        let dt = lat.delta_t;
        let dt2 = dt * dt;
        for x in 0..lat.n_x {
            for c in 0..d {
                let i = u.vidx(s, x, c);
                u.values[i] = u0[x * d + c];
            }
        }
        let mut spatial = vec![C64::new(0.0, 0.0); d];
        for x in 0..lat.n_x {
            let w = self.weight(s, x);
            let tp = if forward { s + 1 } else { s - 1 };
            let tm = if forward { s.wrapping_sub(1) } else { s + 1 };
            let a_new = 0.5 * (self.flux_t_coef(s, x) + self.flux_t_coef(tp, x));
            // The mirrored flux coefficient; at the lattice edge fall back to
            // the slice value (the ghost slice never enters the result).
            let a_old = if tm < lat.n_t {
                0.5 * (self.flux_t_coef(s, x) + self.flux_t_coef(tm, x))
            } else {
                self.flux_t_coef(s, x)
            };
            let beta_sqrt = lat.lapse[lat.idx(s, x)].sqrt();
            self.spatial_part(u, s, x, &mut spatial);
            for c in 0..d {
                let nd = beta_sqrt * u1[x * d + c];
                let mut r = -spatial[c] - match self.first_order_t.get(&lat, s, x) {
                    Some(bt) => {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..d {
                            acc += bt.at(c, j) * (beta_sqrt * u1[x * d + j]);
                        }
                        acc
                    }
                    None => C64::new(0.0, 0.0),
                };
                if let Some(src) = source {
                    r += src.at(s, x, c);
                }
                let scale = w * dt2 / (a_new + a_old);
                let drift = 2.0 * dt * a_old / (a_new + a_old);
                let sign = if forward { 1.0 } else { -1.0 };
                let u0c = u0[x * d + c];
                let i = u.vidx(if forward { s + 1 } else { s - 1 }, x, c);
                u.values[i] = u0c + nd * C64::new(sign * drift, 0.0) + r * scale;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Steppers and operator handles
// ---------------------------------------------------------------------------

/// A time-marching kernel able to invert its discrete operator from
/// zero-data starts. Implemented by the collocated second-order form here
/// and by the staggered/first-order kernels in the field modules.
pub trait GreenStepper: Send + Sync {
    fn lattice(&self) -> &Arc<SpacetimeLattice>;
    /// Exact discrete inversion with zero data on a slice adjacent to the
    /// source support (before it for retarded, after it for advanced).
    fn green_march(&self, source: &Section, which: GreenKind) -> Result<Section, GreenError>;
}

/// Start/stop bookkeeping shared by every zero-data march.
pub fn green_march_bounds(
    source: &Section,
    which: GreenKind,
    n_t: usize,
) -> Result<(usize, bool), GreenError> {
    let (t_min, t_max) = source
        .support
        .t_extent()
        .ok_or_else(|| GreenError::SupportClass("empty source".into()))?;
    match which {
        GreenKind::Retarded => {
            if t_min < STENCIL_MARGIN {
                return Err(GreenError::BoundaryContact {
                    margin: STENCIL_MARGIN,
                });
            }
            Ok((t_min - 1, true))
        }
        GreenKind::Advanced => {
            if t_max + STENCIL_MARGIN > n_t - 1 {
                return Err(GreenError::BoundaryContact {
                    margin: STENCIL_MARGIN,
                });
            }
            Ok((t_max + 1, false))
        }
    }
}

impl GreenStepper for NormallyHyperbolicForm {
    fn lattice(&self) -> &Arc<SpacetimeLattice> {
        &self.lattice
    }

    fn green_march(&self, source: &Section, which: GreenKind) -> Result<Section, GreenError> {
        self.require_cfl()?;
        if source.fiber_dim != self.fiber_dim {
            return Err(GreenError::Fiber {
                expected: self.fiber_dim,
                got: source.fiber_dim,
            });
        }
        let lat = self.lattice.clone();
        let (start, forward) = green_march_bounds(source, which, lat.n_t)?;
        let mut u = Section::zeros(lat.clone(), self.fiber_dim, source.scalar_kind);
        let zero = vec![C64::new(0.0, 0.0); lat.n_x * self.fiber_dim];
        self.seed_cauchy(&mut u, Some(source), start, &zero, &zero, forward);
        if forward {
            for t in (start + 1)..(lat.n_t - 1) {
                self.advance_row(&mut u, Some(source), t, true);
            }
        } else {
            for t in (1..start).rev() {
                self.advance_row(&mut u, Some(source), t, false);
            }
        }
        u.recompute_support();
        Ok(u)
    }
}

/// Factorized Green structure for operators that are Green hyperbolic but
/// not normally hyperbolic: the companion kernel inverts a normally
/// hyperbolic relative and the left factor maps its Green operators to the
/// operator's own.
pub struct Factorization {
    pub left_factor: Arc<dyn Fn(&Section) -> Section + Send + Sync>,
    pub companion: Arc<dyn GreenStepper>,
    /// Coefficient data of the companion where available (used by probes).
    pub companion_form: Option<Arc<NormallyHyperbolicForm>>,
}

/// A differential operator with enough structure to build Green operators.
pub struct OperatorHandle {
    pub name: String,
    pub lattice: Arc<SpacetimeLattice>,
    pub fiber_dim: usize,
    pub scalar_kind: ScalarKind,
    pub pairing_kind: PairingKind,
    pub formally_self_adjoint: bool,
    /// Differential order (for symbol probing).
    pub order: usize,
    pub apply_fn: Arc<dyn Fn(&Section) -> Section + Send + Sync>,
    /// The pairing this operator is (anti)symmetric under.
    pub pair_fn: Arc<dyn Fn(&Section, &Section) -> C64 + Send + Sync>,
    pub stepping_form: Option<Arc<NormallyHyperbolicForm>>,
    pub factorization: Option<Factorization>,
}

impl OperatorHandle {
    pub fn apply(&self, s: &Section) -> Section {
        (self.apply_fn)(s)
    }

    pub fn pair(&self, a: &Section, b: &Section) -> C64 {
        (self.pair_fn)(a, b)
    }

    pub fn for_form(name: &str, form: Arc<NormallyHyperbolicForm>, kind: ScalarKind) -> Self {
        let lattice = form.lattice.clone();
        let fiber_dim = form.fiber_dim;
        let apply_form = form.clone();
        let pairing_kind = match kind {
            ScalarKind::Real => PairingKind::BilinearReal,
            ScalarKind::Complex => PairingKind::SesquilinearComplex,
        };
        OperatorHandle {
            name: name.into(),
            lattice,
            fiber_dim,
            scalar_kind: kind,
            pairing_kind,
            formally_self_adjoint: form.first_order_t.is_zero() && form.first_order_x.is_zero(),
            order: 2,
            apply_fn: Arc::new(move |s| apply_form.apply(s)),
            pair_fn: Arc::new(move |a, b| pair(a, b, pairing_kind).unwrap()),
            stepping_form: Some(form),
            factorization: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Green operators
// ---------------------------------------------------------------------------

/// Retarded or advanced Green operator applied to a source.
pub fn green_apply(
    op: &OperatorHandle,
    f: &Section,
    which: GreenKind,
) -> Result<Section, GreenError> {
    if f.fiber_dim != op.fiber_dim {
        return Err(GreenError::Fiber {
            expected: op.fiber_dim,
            got: f.fiber_dim,
        });
    }
    if let Some(form) = &op.stepping_form {
        return form.green_march(f, which);
    }
    if let Some(fac) = &op.factorization {
        let companion = fac.companion.green_march(f, which)?;
        let mut out = (fac.left_factor)(&companion);
        out.recompute_support();
        return Ok(out);
    }
    Err(GreenError::MissingSteppingForm)
}

/// Advanced-minus-retarded propagator on timelike compact (= compact
/// interior) sources. The two legs are independent and run concurrently.
pub fn causal_propagator(op: &OperatorHandle, f: &Section) -> Result<Section, GreenError> {
    let (adv, ret) = std::thread::scope(|scope| {
        let a = scope.spawn(|| green_apply(op, f, GreenKind::Advanced));
        let r = green_apply(op, f, GreenKind::Retarded);
        (a.join().expect("advanced leg panicked"), r)
    });
    let adv = adv?;
    let ret = ret?;
    Ok(adv
        .linear_comb(C64::new(1.0, 0.0), &ret, C64::new(-1.0, 0.0))
        .expect("same lattice"))
}

/// Cauchy problem for steppable operators: data on a slice, optional
/// source, marching in one time direction. The complementary side of the
/// lattice is left zero.
pub fn solve_cauchy(
    op: &OperatorHandle,
    slice: &CauchySlice,
    u0: &[C64],
    u1: &[C64],
    source: Option<&Section>,
    forward: bool,
) -> Result<Section, GreenError> {
    let form = op
        .stepping_form
        .as_ref()
        .ok_or(GreenError::MissingSteppingForm)?;
    form.require_cfl()?;
    let lat = form.lattice.clone();
    let d = form.fiber_dim;
    assert_eq!(u0.len(), lat.n_x * d);
    assert_eq!(u1.len(), lat.n_x * d);
    let s = slice.t_index;
    if s == 0 && !forward || s + 1 >= lat.n_t && forward || s >= lat.n_t {
        return Err(GreenError::BoundaryContact {
            margin: STENCIL_MARGIN,
        });
    }
    let mut u = Section::zeros(lat.clone(), d, op.scalar_kind);
    u.scalar_kind = op.scalar_kind;
    self_seed_and_march(form, &mut u, source, s, u0, u1, forward);
    u.recompute_support();
    Ok(u)
}

fn self_seed_and_march(
    form: &NormallyHyperbolicForm,
    u: &mut Section,
    source: Option<&Section>,
    s: usize,
    u0: &[C64],
    u1: &[C64],
    forward: bool,
) {
    let lat = form.lattice.clone();
    form.seed_cauchy(u, source, s, u0, u1, forward);
    if forward {
        for t in (s + 1)..(lat.n_t - 1) {
            form.advance_row(u, source, t, true);
        }
    } else {
        for t in (1..s).rev() {
            form.advance_row(u, source, t, false);
        }
    }
}

// ---------------------------------------------------------------------------
// Partition of unity and the inhomogeneous splitter
// ---------------------------------------------------------------------------

/// Time partition `{chi_plus, chi_minus}` with `chi_plus` rising from 0 to 1
/// over the transition band through a cubic smoothstep, and
/// `chi_minus = 1 - chi_plus` exactly on every slice.
#[derive(Clone, Debug)]
pub struct Partition {
    pub chi_plus: Vec<f64>,
    pub chi_minus: Vec<f64>,
    pub band: (usize, usize),
}

pub fn partition_of_unity(n_t: usize, band_lo: usize, band_hi: usize) -> Partition {
    assert!(band_lo < band_hi && band_hi < n_t);
    let mut chi_plus = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let v = if t <= band_lo {
            0.0
        } else if t >= band_hi {
            1.0
        } else {
            let u = (t - band_lo) as f64 / (band_hi - band_lo) as f64;
            u * u * (3.0 - 2.0 * u)
        };
        chi_plus.push(v);
    }
    let chi_minus = chi_plus.iter().map(|v| 1.0 - v).collect();
    Partition {
        chi_plus,
        chi_minus,
        band: (band_lo, band_hi),
    }
}

pub fn default_band(n_t: usize) -> (usize, usize) {
    (n_t / 3, (2 * n_t) / 3)
}

/// Multiply a section by a per-slice profile.
pub fn scale_by_time_profile(s: &Section, profile: &[f64]) -> Section {
    let mut out = s.clone();
    for t in 0..s.lattice.n_t {
        let c = profile[t];
        for x in 0..s.lattice.n_x {
            for comp in 0..s.fiber_dim {
                let i = out.vidx(t, x, comp);
                out.values[i] = s.values[i] * c;
            }
        }
    }
    out.recompute_support();
    out
}

/// Solve `L h = f` for arbitrary interior `f` by splitting the source with
/// the time partition and feeding each half to the matching Green operator.
pub fn split_solve(
    op: &OperatorHandle,
    f: &Section,
    band: Option<(usize, usize)>,
) -> Result<Section, GreenError> {
    let lat = op.lattice.clone();
    let (lo, hi) = band.unwrap_or_else(|| default_band(lat.n_t));
    if lo < STENCIL_MARGIN || hi + STENCIL_MARGIN > lat.n_t - 1 {
        return Err(GreenError::BoundaryContact {
            margin: STENCIL_MARGIN,
        });
    }
    if let Some((t_min, t_max)) = f.support.t_extent() {
        if t_min < STENCIL_MARGIN || t_max + STENCIL_MARGIN > lat.n_t - 1 {
            return Err(GreenError::BoundaryContact {
                margin: STENCIL_MARGIN,
            });
        }
    } else {
        return Ok(Section::zeros(lat, op.fiber_dim, op.scalar_kind));
    }
    let part = partition_of_unity(lat.n_t, lo, hi);
    let f_plus = scale_by_time_profile(f, &part.chi_plus);
    let f_minus = scale_by_time_profile(f, &part.chi_minus);
    let mut h = Section::zeros(lat.clone(), op.fiber_dim, op.scalar_kind);
    if !f_plus.support.is_empty() {
        let hp = green_apply(op, &f_plus, GreenKind::Retarded)?;
        h = h
            .linear_comb(C64::new(1.0, 0.0), &hp, C64::new(1.0, 0.0))
            .expect("same lattice");
    }
    if !f_minus.support.is_empty() {
        let hm = green_apply(op, &f_minus, GreenKind::Advanced)?;
        h = h
            .linear_comb(C64::new(1.0, 0.0), &hm, C64::new(1.0, 0.0))
            .expect("same lattice");
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Symbol probe
// ---------------------------------------------------------------------------

/// Estimate the principal symbol of the operator at a point using scaled
/// plane waves `exp(i lambda zeta . x)` and Richardson extrapolation in
/// `1/lambda`. For normally hyperbolic forms the estimate approaches
/// `g(zeta, zeta) id`.
pub fn symbol_probe(
    op: &OperatorHandle,
    point: (usize, usize),
    zeta: (f64, f64),
    scales: &[f64],
) -> FiberMatrix {
    assert!(scales.len() >= 2);
    let lat = op.lattice.clone();
    let d = op.fiber_dim;
    let (t0, x0) = point;
    let phase = |t: usize, x: usize| -> f64 {
        let dt_coord = (t as f64 - t0 as f64) * lat.delta_t;
        let dx_coord = (x as f64 - x0 as f64) * lat.delta_x;
        zeta.0 * dt_coord + zeta.1 * dx_coord
    };
    let mut samples: Vec<FiberMatrix> = Vec::with_capacity(scales.len());
    for &lambda in scales {
        let mut m = FiberMatrix::zeros(d);
        for col in 0..d {
            let wave = Section::from_fn(lat.clone(), d, ScalarKind::Complex, |t, x, c| {
                if c == col {
                    C64::from_polar(1.0, lambda * phase(t, x))
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let lw = op.apply(&wave);
            let back = C64::from_polar(1.0, -lambda * phase(t0, x0));
            // Scaled plane waves produce one factor `i lambda` per
            // derivative order; dividing them out leaves the plain
            // coefficient contraction.
            let scale = C64::new(0.0, lambda).powi(op.order as i32);
            for row in 0..d {
                *m.at_mut(row, col) = lw.at(t0, x0, row) * back / scale;
            }
        }
        samples.push(m);
    }
    // Lagrange extrapolation to 1/lambda = 0.
    let us: Vec<f64> = scales.iter().map(|l| 1.0 / l).collect();
    let mut out = FiberMatrix::zeros(d);
    for (i, &ui) in us.iter().enumerate() {
        let mut w = 1.0;
        for (j, &uj) in us.iter().enumerate() {
            if i != j {
                w *= (0.0 - uj) / (ui - uj);
            }
        }
        out = out.add(&samples[i].scale(C64::new(w, 0.0)));
    }
    out
}

// ---------------------------------------------------------------------------
// Adjoint and duality residuals
// ---------------------------------------------------------------------------

/// `| (L* g, f) - (g, L f) |` under the operator's pairing.
pub fn adjoint_residual(
    op: &OperatorHandle,
    partner: &OperatorHandle,
    f: &Section,
    g: &Section,
) -> f64 {
    let lhs = op.pair(&partner.apply(g), f);
    let rhs = op.pair(g, &op.apply(f));
    (lhs - rhs).norm()
}

/// `| (E*∓ g, f) - (g, E± f) |` under the operator's pairing.
pub fn green_duality_residual(
    op: &OperatorHandle,
    partner: &OperatorHandle,
    f: &Section,
    g: &Section,
    which: GreenKind,
) -> Result<f64, GreenError> {
    let eg = green_apply(partner, g, which.flipped())?;
    let ef = green_apply(op, f, which)?;
    let lhs = op.pair(&eg, f);
    let rhs = op.pair(g, &ef);
    Ok((lhs - rhs).norm())
}

/// Relative sup-norm of `op(u) - rhs` over interior rows.
pub fn residual_inf(op: &OperatorHandle, u: &Section, rhs: &Section) -> f64 {
    let lu = op.apply(u);
    let lat = &op.lattice;
    let mut worst = 0.0f64;
    for t in 1..lat.n_t - 1 {
        for x in 0..lat.n_x {
            for c in 0..op.fiber_dim {
                worst = worst.max((lu.at(t, x, c) - rhs.at(t, x, c)).norm());
            }
        }
    }
    worst
}

/// Convenience view of the volume weights (re-exported for suites).
pub fn weights(lat: &SpacetimeLattice) -> Vec<f64> {
    volume_weights(lat)
}
