//! Staggered exterior calculus on the product lattice.
//!
//! Placement: 0-forms at nodes, the two legs of a 1-form on time and space
//! edges, 2-forms on cells. The Hodge star is diagonal: it reinterprets a
//! component in place on the dual grid and scales it by a metric factor, so
//! star followed by its inverse cancels pointwise and the coboundary of a
//! coboundary vanishes structurally.
//!
//! The operators are generic over the coefficient ring: `f64` for
//! production and exact rationals for the structural identity checks.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

/// Coefficient ring of the calculus.
pub trait DecScalar:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
}

impl DecScalar for f64 {}
impl DecScalar for num_rational::BigRational {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridSide {
    Primal,
    Dual,
}

/// Geometry of the staggered complex: steps and Hodge factors sampled at
/// every placement. Grids are `n_t * n_x`, row-major; rows that have no
/// geometric carrier (the last time-edge/cell row) are present but unused.
#[derive(Clone, Debug)]
pub struct DecComplex<S> {
    pub n_t: usize,
    pub n_x: usize,
    pub delta_t: S,
    pub delta_x: S,
    /// `sqrt(beta h)` at nodes.
    pub node_vol: Vec<S>,
    /// `sqrt(beta h)` at cell centers.
    pub cell_vol: Vec<S>,
    /// `sqrt(h / beta)` at time edges `(t+1/2, x)`.
    pub te_ratio: Vec<S>,
    /// `sqrt(beta / h)` at space edges `(t, x+1/2)`.
    pub xe_ratio: Vec<S>,
}

impl<S: DecScalar> DecComplex<S> {
    #[inline]
    pub fn idx(&self, t: usize, x: usize) -> usize {
        t * self.n_x + x
    }

    #[inline]
    pub fn xp(&self, x: usize) -> usize {
        (x + 1) % self.n_x
    }

    #[inline]
    pub fn xm(&self, x: usize) -> usize {
        (x + self.n_x - 1) % self.n_x
    }
}

/// Component grids of a form of fixed degree on one side of the complex.
///
/// Degree 1 carries two component grids `[t_leg, x_leg]`; degrees 0 and 2
/// carry one. On the primal side the t-leg lives on time edges and the
/// x-leg on space edges; the dual side swaps the carriers.
#[derive(Clone, Debug)]
pub struct FormField<S> {
    pub degree: u8,
    pub side: GridSide,
    pub n_t: usize,
    pub n_x: usize,
    pub comps: Vec<Vec<S>>,
}

impl<S: DecScalar> FormField<S> {
    pub fn zeros(degree: u8, side: GridSide, n_t: usize, n_x: usize) -> Self {
        let n_comps = if degree == 1 { 2 } else { 1 };
        FormField {
            degree,
            side,
            n_t,
            n_x,
            comps: vec![vec![S::zero(); n_t * n_x]; n_comps],
        }
    }

    #[inline]
    pub fn idx(&self, t: usize, x: usize) -> usize {
        t * self.n_x + x
    }
}

impl FormField<f64> {
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|g| g.iter())
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecError {
    #[error("degree overflow: d on a form of degree {0}")]
    DegreeOverflow(u8),
    #[error("degree underflow: codifferential on a form of degree {0}")]
    DegreeUnderflow(u8),
    #[error("operation needs a {expected:?} form, got {got:?}")]
    WrongSide { expected: GridSide, got: GridSide },
}

/// Discrete exterior derivative (coboundary) on either side of the complex.
pub fn exterior_d<S: DecScalar>(
    c: &DecComplex<S>,
    f: &FormField<S>,
) -> Result<FormField<S>, DecError> {
    if f.degree >= 2 {
        return Err(DecError::DegreeOverflow(f.degree));
    }
    let (n_t, n_x) = (c.n_t, c.n_x);
    let mut out = FormField::zeros(f.degree + 1, f.side, n_t, n_x);
    match (f.side, f.degree) {
        (GridSide::Primal, 0) => {
            let u = &f.comps[0];
            for t in 0..n_t {
                for x in 0..n_x {
                    let i = c.idx(t, x);
                    if t + 1 < n_t {
                        out.comps[0][i] =
                            (u[c.idx(t + 1, x)].clone() - u[i].clone()) / c.delta_t.clone();
                    }
                    out.comps[1][i] =
                        (u[c.idx(t, c.xp(x))].clone() - u[i].clone()) / c.delta_x.clone();
                }
            }
        }
        (GridSide::Primal, 1) => {
            let at = &f.comps[0];
            let ax = &f.comps[1];
            for t in 0..n_t.saturating_sub(1) {
                for x in 0..n_x {
                    let i = c.idx(t, x);
                    let dax = (ax[c.idx(t + 1, x)].clone() - ax[i].clone()) / c.delta_t.clone();
                    let dat = (at[c.idx(t, c.xp(x))].clone() - at[i].clone()) / c.delta_x.clone();
                    out.comps[0][i] = dax - dat;
                }
            }
        }
        (GridSide::Dual, 0) => {
            // Dual nodes sit at cells; the dual t-leg sits on space edges,
            // the dual x-leg on time edges.
            let u = &f.comps[0];
            for t in 0..n_t {
                for x in 0..n_x {
                    let i = c.idx(t, x);
                    if t >= 1 {
                        out.comps[0][i] =
                            (u[i].clone() - u[c.idx(t - 1, x)].clone()) / c.delta_t.clone();
                    }
                    if t + 1 < n_t {
                        out.comps[1][i] =
                            (u[i].clone() - u[c.idx(t, c.xm(x))].clone()) / c.delta_x.clone();
                    }
                }
            }
        }
        (GridSide::Dual, 1) => {
            // Dual 2-forms sit at nodes.
            let wt = &f.comps[0];
            let wx = &f.comps[1];
            for t in 1..n_t {
                for x in 0..n_x {
                    let i = c.idx(t, x);
                    let dwx = (wx[i].clone() - wx[c.idx(t - 1, x)].clone()) / c.delta_t.clone();
                    let dwt = (wt[i].clone() - wt[c.idx(t, c.xm(x))].clone()) / c.delta_x.clone();
                    out.comps[0][i] = dwx - dwt;
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// Diagonal Hodge star. Primal k-forms land on dual (2-k)-forms at the same
/// carrier and vice versa; the signs realize the composition `* *` equal to
/// -1, +1, -1 on degrees 0, 1, 2 of this Lorentzian surface (orientation
/// fixed by positive `dt ^ dx`).
pub fn hodge_star<S: DecScalar>(c: &DecComplex<S>, f: &FormField<S>) -> FormField<S> {
    let (n_t, n_x) = (c.n_t, c.n_x);
    let n = n_t * n_x;
    match (f.side, f.degree) {
        (GridSide::Primal, 0) => {
            let mut out = FormField::zeros(2, GridSide::Dual, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = c.node_vol[i].clone() * f.comps[0][i].clone();
            }
            out
        }
        (GridSide::Primal, 1) => {
            let mut out = FormField::zeros(1, GridSide::Dual, n_t, n_x);
            for i in 0..n {
                // Dual t-leg (space edges) from the x-leg; dual x-leg
                // (time edges) from the t-leg.
                out.comps[0][i] = c.xe_ratio[i].clone() * f.comps[1][i].clone();
                out.comps[1][i] = c.te_ratio[i].clone() * f.comps[0][i].clone();
            }
            out
        }
        (GridSide::Primal, 2) => {
            let mut out = FormField::zeros(0, GridSide::Dual, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = -(f.comps[0][i].clone() / c.cell_vol[i].clone());
            }
            out
        }
        (GridSide::Dual, 0) => {
            let mut out = FormField::zeros(2, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = c.cell_vol[i].clone() * f.comps[0][i].clone();
            }
            out
        }
        (GridSide::Dual, 1) => {
            let mut out = FormField::zeros(1, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = f.comps[1][i].clone() / c.te_ratio[i].clone();
                out.comps[1][i] = f.comps[0][i].clone() / c.xe_ratio[i].clone();
            }
            out
        }
        (GridSide::Dual, 2) => {
            let mut out = FormField::zeros(0, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = -(f.comps[0][i].clone() / c.node_vol[i].clone());
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Exact pointwise inverse of the star, defined on dual forms.
pub fn hodge_star_inv<S: DecScalar>(c: &DecComplex<S>, f: &FormField<S>) -> FormField<S> {
    assert_eq!(f.side, GridSide::Dual, "star inverse acts on dual forms");
    let (n_t, n_x) = (c.n_t, c.n_x);
    let n = n_t * n_x;
    match f.degree {
        2 => {
            let mut out = FormField::zeros(0, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = f.comps[0][i].clone() / c.node_vol[i].clone();
            }
            out
        }
        1 => {
            let mut out = FormField::zeros(1, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = f.comps[1][i].clone() / c.te_ratio[i].clone();
                out.comps[1][i] = f.comps[0][i].clone() / c.xe_ratio[i].clone();
            }
            out
        }
        0 => {
            let mut out = FormField::zeros(2, GridSide::Primal, n_t, n_x);
            for i in 0..n {
                out.comps[0][i] = -(c.cell_vol[i].clone() * f.comps[0][i].clone());
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Codifferential `(-1)^k star^{-1} d star` on primal forms.
pub fn codifferential<S: DecScalar>(
    c: &DecComplex<S>,
    f: &FormField<S>,
) -> Result<FormField<S>, DecError> {
    if f.degree == 0 {
        return Err(DecError::DegreeUnderflow(0));
    }
    if f.side != GridSide::Primal {
        return Err(DecError::WrongSide {
            expected: GridSide::Primal,
            got: f.side,
        });
    }
    let starred = hodge_star(c, f);
    let d_starred = exterior_d(c, &starred)?;
    let mut out = hodge_star_inv(c, &d_starred);
    if f.degree % 2 == 1 {
        for g in out.comps.iter_mut() {
            for v in g.iter_mut() {
                *v = -v.clone();
            }
        }
    }
    Ok(out)
}

/// Metric pairing of two primal k-forms: the integral of `a ^ *b`.
pub fn form_pairing<S: DecScalar>(c: &DecComplex<S>, a: &FormField<S>, b: &FormField<S>) -> S {
    assert_eq!(a.degree, b.degree);
    assert_eq!(a.side, GridSide::Primal);
    assert_eq!(b.side, GridSide::Primal);
    let area = c.delta_t.clone() * c.delta_x.clone();
    let n = c.n_t * c.n_x;
    let mut acc = S::zero();
    match a.degree {
        0 => {
            for i in 0..n {
                acc = acc
                    + a.comps[0][i].clone()
                        * b.comps[0][i].clone()
                        * c.node_vol[i].clone()
                        * area.clone();
            }
        }
        1 => {
            for i in 0..n {
                acc = acc
                    + a.comps[0][i].clone()
                        * b.comps[0][i].clone()
                        * c.te_ratio[i].clone()
                        * area.clone();
                acc = acc
                    - a.comps[1][i].clone()
                        * b.comps[1][i].clone()
                        * c.xe_ratio[i].clone()
                        * area.clone();
            }
        }
        2 => {
            for i in 0..n {
                acc = acc
                    - a.comps[0][i].clone() * b.comps[0][i].clone() / c.cell_vol[i].clone()
                        * area.clone();
            }
        }
        _ => unreachable!(),
    }
    acc
}

/// Integral of the wedge of a primal 1-form with a dual 1-form (the shape
/// produced by `a ^ *b`): the staggered placement collocates the products
/// without interpolation.
pub fn wedge_integral_11<S: DecScalar>(c: &DecComplex<S>, a: &FormField<S>, w: &FormField<S>) -> S {
    assert_eq!((a.side, a.degree), (GridSide::Primal, 1));
    assert_eq!((w.side, w.degree), (GridSide::Dual, 1));
    let area = c.delta_t.clone() * c.delta_x.clone();
    let n = c.n_t * c.n_x;
    let mut acc = S::zero();
    for i in 0..n {
        acc = acc + a.comps[0][i].clone() * w.comps[1][i].clone() * area.clone();
        acc = acc - a.comps[1][i].clone() * w.comps[0][i].clone() * area.clone();
    }
    acc
}

/// Integral of a 2-form coefficient grid against the coordinate area.
pub fn integrate_two_form<S: DecScalar>(c: &DecComplex<S>, f: &FormField<S>) -> S {
    assert_eq!(f.degree, 2);
    let area = c.delta_t.clone() * c.delta_x.clone();
    let mut acc = S::zero();
    for v in &f.comps[0] {
        acc = acc + v.clone() * area.clone();
    }
    acc
}

/// Build the f64 complex of a lattice background, averaging the node
/// samples of the metric onto edges and cells.
pub fn lattice_complex(lat: &crate::spacetime::SpacetimeLattice) -> DecComplex<f64> {
    let (n_t, n_x) = (lat.n_t, lat.n_x);
    let mut node_vol = vec![0.0; n_t * n_x];
    let mut cell_vol = vec![0.0; n_t * n_x];
    let mut te_ratio = vec![0.0; n_t * n_x];
    let mut xe_ratio = vec![0.0; n_t * n_x];
    for t in 0..n_t {
        for x in 0..n_x {
            let i = lat.idx(t, x);
            let xp = lat.wrap_x(x as isize + 1);
            let tp = (t + 1).min(n_t - 1);
            let b = lat.lapse[i];
            let h = lat.spatial_metric[i];
            node_vol[i] = (b * h).sqrt();
            let b_te = 0.5 * (b + lat.lapse[lat.idx(tp, x)]);
            let h_te = 0.5 * (h + lat.spatial_metric[lat.idx(tp, x)]);
            te_ratio[i] = (h_te / b_te).sqrt();
            let b_xe = 0.5 * (b + lat.lapse[lat.idx(t, xp)]);
            let h_xe = 0.5 * (h + lat.spatial_metric[lat.idx(t, xp)]);
            xe_ratio[i] = (b_xe / h_xe).sqrt();
            let b_c = 0.25
                * (b + lat.lapse[lat.idx(tp, x)]
                    + lat.lapse[lat.idx(t, xp)]
                    + lat.lapse[lat.idx(tp, xp)]);
            let h_c = 0.25
                * (h + lat.spatial_metric[lat.idx(tp, x)]
                    + lat.spatial_metric[lat.idx(t, xp)]
                    + lat.spatial_metric[lat.idx(tp, xp)]);
            cell_vol[i] = (b_c * h_c).sqrt();
        }
    }
    DecComplex {
        n_t,
        n_x,
        delta_t: lat.delta_t,
        delta_x: lat.delta_x,
        node_vol,
        cell_vol,
        te_ratio,
        xe_ratio,
    }
}
