//! The massive one-form field on the staggered complex: dynamics
//! `P A = -delta d A + m^2 A`, the companion operator
//! `Q = -m^{-2} d delta + id`, Green operators `E^± = Q F^±` with `F^±`
//! stepping the normally hyperbolic `R = P Q = -delta d - d delta + m^2`,
//! the propagator-induced symplectic form and its slice counterpart.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::dec::{
    codifferential, exterior_d, form_pairing, lattice_complex, DecComplex, FormField, GridSide,
};
use crate::greenops::{
    causal_propagator, green_apply, green_march_bounds, partition_of_unity,
    scale_by_time_profile, Factorization, GreenError, GreenKind, GreenStepper, OperatorHandle,
    PairingKind, STENCIL_MARGIN,
};
use crate::section::{ScalarKind, Section, SectionError};
use crate::spacetime::{CauchySlice, SpacetimeLattice, SupportMask};

pub const OBSERVABLE_EQ_TOL: f64 = 1e-8;
pub const ON_SHELL_TOL: f64 = 1e-6;

/// Rows on which composite one-form operators are fully formed (the
/// exterior/codifferential composites lose one row per layer).
pub const RESIDUAL_MARGIN: usize = 2;

#[derive(Debug, Error)]
pub enum ProcaError {
    #[error("the mass square must be nonzero")]
    MassZero,
    #[error("observables belong to different models")]
    ModelMismatch,
    #[error("one-form is off shell: relative residual {residual}")]
    OffShell { residual: f64 },
    #[error("time band too narrow: need {need} slices, got {got}")]
    BandTooNarrow { need: usize, got: usize },
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Section(#[from] SectionError),
}

/// Sections with fiber 2 carry a staggered one-form: component 0 holds the
/// time leg at `(t+1/2, x)`, component 1 the space leg at `(t, x+1/2)`.
pub fn section_to_form(s: &Section) -> FormField<f64> {
    assert_eq!(s.fiber_dim, 2);
    let (n_t, n_x) = (s.lattice.n_t, s.lattice.n_x);
    let mut f = FormField::zeros(1, GridSide::Primal, n_t, n_x);
    for t in 0..n_t {
        for x in 0..n_x {
            let i = t * n_x + x;
            f.comps[0][i] = s.at(t, x, 0).re;
            f.comps[1][i] = s.at(t, x, 1).re;
        }
    }
    f
}

pub fn form_to_section(lat: &Arc<SpacetimeLattice>, f: &FormField<f64>) -> Section {
    assert_eq!((f.side, f.degree), (GridSide::Primal, 1));
    Section::from_fn(lat.clone(), 2, ScalarKind::Real, |t, x, c| {
        C64::new(f.comps[c][t * lat.n_x + x], 0.0)
    })
}

/// The massive one-form model.
pub struct ProcaModel {
    pub lattice: Arc<SpacetimeLattice>,
    pub mass_sq: f64,
    pub dec: Arc<DecComplex<f64>>,
    pub operator: Arc<OperatorHandle>,
}

impl ProcaModel {
    pub fn new(lattice: Arc<SpacetimeLattice>, mass_sq: f64) -> Result<Self, ProcaError> {
        if mass_sq == 0.0 || !mass_sq.is_finite() {
            return Err(ProcaError::MassZero);
        }
        let dec = Arc::new(lattice_complex(&lattice));
        let stepper = Arc::new(ProcaStepper {
            lattice: lattice.clone(),
            dec: dec.clone(),
            mass_sq,
        });
        let apply_dec = dec.clone();
        let apply_lat = lattice.clone();
        let pair_dec = dec.clone();
        let q_dec = dec.clone();
        let q_lat = lattice.clone();
        let operator = Arc::new(OperatorHandle {
            name: "proca".into(),
            lattice: lattice.clone(),
            fiber_dim: 2,
            scalar_kind: ScalarKind::Real,
            pairing_kind: PairingKind::BilinearReal,
            formally_self_adjoint: true,
            order: 2,
            apply_fn: Arc::new(move |s| apply_p(&apply_lat, &apply_dec, mass_sq, s)),
            pair_fn: Arc::new(move |a, b| {
                C64::new(
                    form_pairing(&pair_dec, &section_to_form(a), &section_to_form(b)),
                    0.0,
                )
            }),
            stepping_form: None,
            factorization: Some(Factorization {
                left_factor: Arc::new(move |s| apply_q(&q_lat, &q_dec, mass_sq, s)),
                companion: stepper,
                companion_form: None,
            }),
        });
        Ok(ProcaModel {
            lattice,
            mass_sq,
            dec,
            operator,
        })
    }

    pub fn apply(&self, a: &Section) -> Section {
        self.operator.apply(a)
    }

    pub fn apply_q(&self, a: &Section) -> Section {
        apply_q(&self.lattice, &self.dec, self.mass_sq, a)
    }

    pub fn apply_r(&self, a: &Section) -> Section {
        apply_r(&self.lattice, &self.dec, self.mass_sq, a)
    }

    pub fn green(&self, f: &Section, which: GreenKind) -> Result<Section, GreenError> {
        green_apply(&self.operator, f, which)
    }

    pub fn propagator(&self, f: &Section) -> Result<Section, GreenError> {
        causal_propagator(&self.operator, f)
    }

    pub fn pair(&self, a: &Section, b: &Section) -> f64 {
        self.operator.pair(a, b).re
    }

    /// Relative residual of `P A = 0` on trustworthy interior rows.
    pub fn on_shell_residual(&self, a: &Section) -> f64 {
        let pa = self.apply(a);
        let lat = &self.lattice;
        let lo = RESIDUAL_MARGIN;
        let hi = lat.n_t - 1 - RESIDUAL_MARGIN;
        let mut worst = 0.0f64;
        for t in lo..=hi {
            for x in 0..lat.n_x {
                for c in 0..2 {
                    worst = worst.max(pa.at(t, x, c).norm());
                }
            }
        }
        let n = a.norm_inf();
        if n == 0.0 {
            0.0
        } else {
            worst / n
        }
    }

    pub fn observable(&self, representative: Section) -> ProcaObservable {
        ProcaObservable { representative }
    }
}

/// `P A = -delta(dA) + m^2 A`.
pub fn apply_p(
    lat: &Arc<SpacetimeLattice>,
    dec: &DecComplex<f64>,
    mass_sq: f64,
    a: &Section,
) -> Section {
    let form = section_to_form(a);
    let da = exterior_d(dec, &form).expect("degree 1");
    let dda = codifferential(dec, &da).expect("degree 2");
    let mut out = form_to_section(lat, &form);
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let i = t * lat.n_x + x;
            for c in 0..2 {
                let v = -dda.comps[c][i] + mass_sq * form.comps[c][i];
                out.set(t, x, c, C64::new(v, 0.0));
            }
        }
    }
    out.recompute_support();
    out
}

/// `Q A = -m^{-2} d(delta A) + A`.
pub fn apply_q(
    lat: &Arc<SpacetimeLattice>,
    dec: &DecComplex<f64>,
    mass_sq: f64,
    a: &Section,
) -> Section {
    let form = section_to_form(a);
    let delta_a = codifferential(dec, &form).expect("degree 1");
    let d_delta_a = exterior_d(dec, &delta_a).expect("degree 0");
    let mut out = form_to_section(lat, &form);
    let inv_m2 = 1.0 / mass_sq;
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let i = t * lat.n_x + x;
            for c in 0..2 {
                let v = -inv_m2 * d_delta_a.comps[c][i] + form.comps[c][i];
                out.set(t, x, c, C64::new(v, 0.0));
            }
        }
    }
    out.recompute_support();
    out
}

/// `R A = -delta(dA) - d(delta A) + m^2 A`, the normally hyperbolic
/// composition `P Q` (the cross terms cancel through the structural
/// `d d = 0`).
pub fn apply_r(
    lat: &Arc<SpacetimeLattice>,
    dec: &DecComplex<f64>,
    mass_sq: f64,
    a: &Section,
) -> Section {
    let form = section_to_form(a);
    let da = exterior_d(dec, &form).expect("degree 1");
    let dda = codifferential(dec, &da).expect("degree 2");
    let delta_a = codifferential(dec, &form).expect("degree 1");
    let d_delta_a = exterior_d(dec, &delta_a).expect("degree 0");
    let mut out = form_to_section(lat, &form);
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let i = t * lat.n_x + x;
            for c in 0..2 {
                let v = -dda.comps[c][i] - d_delta_a.comps[c][i] + mass_sq * form.comps[c][i];
                out.set(t, x, c, C64::new(v, 0.0));
            }
        }
    }
    out.recompute_support();
    out
}

// ---------------------------------------------------------------------------
// The staggered marcher for R
// ---------------------------------------------------------------------------

/// Exact time-marching inversion of the staggered `R`. One marching step
/// fills the space leg of the next slice from the space-leg row equation,
/// then the time leg from the time-leg row equation; each row equation has
/// a single newest unknown with a positive scalar coefficient.
pub struct ProcaStepper {
    pub lattice: Arc<SpacetimeLattice>,
    pub dec: Arc<DecComplex<f64>>,
    pub mass_sq: f64,
}

struct RowEval<'a> {
    dec: &'a DecComplex<f64>,
    at: &'a [f64],
    ax: &'a [f64],
    mass_sq: f64,
}

impl<'a> RowEval<'a> {
    #[inline]
    fn i(&self, t: usize, x: usize) -> usize {
        t * self.dec.n_x + x
    }

    /// Curvature 2-form coefficient at cell `(t+1/2, x+1/2)`.
    #[inline]
    fn f_cell(&self, t: usize, x: usize) -> f64 {
        let xp = self.dec.xp(x);
        (self.ax[self.i(t + 1, x)] - self.ax[self.i(t, x)]) / self.dec.delta_t
            - (self.at[self.i(t, xp)] - self.at[self.i(t, x)]) / self.dec.delta_x
    }

    /// Starred curvature at the cell (dual 0-form value).
    #[inline]
    fn g_cell(&self, t: usize, x: usize) -> f64 {
        -self.f_cell(t, x) / self.dec.cell_vol[self.i(t, x)]
    }

    /// Codifferential of the one-form at node `(t, x)`.
    #[inline]
    fn div_node(&self, t: usize, x: usize) -> f64 {
        let xm = self.dec.xm(x);
        let i = self.i(t, x);
        let wt = (self.dec.te_ratio[i] * self.at[i]
            - self.dec.te_ratio[self.i(t - 1, x)] * self.at[self.i(t - 1, x)])
            / self.dec.delta_t;
        let wx = (self.dec.xe_ratio[i] * self.ax[i]
            - self.dec.xe_ratio[self.i(t, xm)] * self.ax[self.i(t, xm)])
            / self.dec.delta_x;
        -(wt - wx) / self.dec.node_vol[i]
    }

    /// Time-leg of `R` at `(t+1/2, x)`.
    fn r_t(&self, t: usize, x: usize) -> f64 {
        let xm = self.dec.xm(x);
        let i = self.i(t, x);
        let delta_da =
            (self.g_cell(t, x) - self.g_cell(t, xm)) / (self.dec.delta_x * self.dec.te_ratio[i]);
        let d_div = (self.div_node(t + 1, x) - self.div_node(t, x)) / self.dec.delta_t;
        -delta_da - d_div + self.mass_sq * self.at[i]
    }

    /// Space-leg of `R` at `(t, x+1/2)`.
    fn r_x(&self, t: usize, x: usize) -> f64 {
        let xp = self.dec.xp(x);
        let i = self.i(t, x);
        let delta_da =
            (self.g_cell(t, x) - self.g_cell(t - 1, x)) / (self.dec.delta_t * self.dec.xe_ratio[i]);
        let d_div = (self.div_node(t, xp) - self.div_node(t, x)) / self.dec.delta_x;
        -delta_da - d_div + self.mass_sq * self.ax[i]
    }
}

impl GreenStepper for ProcaStepper {
    fn lattice(&self) -> &Arc<SpacetimeLattice> {
        &self.lattice
    }

    fn green_march(&self, source: &Section, which: GreenKind) -> Result<Section, GreenError> {
        if source.fiber_dim != 2 {
            return Err(GreenError::Fiber {
                expected: 2,
                got: source.fiber_dim,
            });
        }
        if !self.lattice.cfl_ok() {
            return Err(GreenError::CflViolation {
                delta_t: self.lattice.delta_t,
                limit: self.lattice.cfl_limit(),
            });
        }
        let lat = &self.lattice;
        let dec = self.dec.as_ref();
        let (n_t, n_x) = (lat.n_t, lat.n_x);
        let (start, forward) = green_march_bounds(source, which, n_t)?;
        let mut at = vec![0.0f64; n_t * n_x];
        let mut ax = vec![0.0f64; n_t * n_x];
        let dt2 = dec.delta_t * dec.delta_t;
        let j = |c: usize, t: usize, x: usize| source.at(t, x, c).re;

        if forward {
            for t in start..=(n_t - 2) {
                // Space leg of the next slice.
                for x in 0..n_x {
                    let rem = RowEval {
                        dec,
                        at: &at,
                        ax: &ax,
                        mass_sq: self.mass_sq,
                    }
                    .r_x(t, x);
                    let i = t * n_x + x;
                    let coef = 1.0 / (dt2 * dec.xe_ratio[i] * dec.cell_vol[i]);
                    ax[(t + 1) * n_x + x] = (j(1, t, x) - rem) / coef;
                }
                // Time leg of the next slice.
                for x in 0..n_x {
                    let rem = RowEval {
                        dec,
                        at: &at,
                        ax: &ax,
                        mass_sq: self.mass_sq,
                    }
                    .r_t(t, x);
                    let ip = (t + 1) * n_x + x;
                    let coef = dec.te_ratio[ip] / (dt2 * dec.node_vol[ip]);
                    at[ip] = (j(0, t, x) - rem) / coef;
                }
            }
        } else {
            for t in (1..=start).rev() {
                // Time leg of the previous slice.
                for x in 0..n_x {
                    let rem = RowEval {
                        dec,
                        at: &at,
                        ax: &ax,
                        mass_sq: self.mass_sq,
                    }
                    .r_t(t, x);
                    let i = t * n_x + x;
                    let im = (t - 1) * n_x + x;
                    let coef = dec.te_ratio[im] / (dt2 * dec.node_vol[i]);
                    at[im] = (j(0, t, x) - rem) / coef;
                }
                // Space leg of the previous slice.
                for x in 0..n_x {
                    let rem = RowEval {
                        dec,
                        at: &at,
                        ax: &ax,
                        mass_sq: self.mass_sq,
                    }
                    .r_x(t, x);
                    let i = t * n_x + x;
                    let im = (t - 1) * n_x + x;
                    let coef = 1.0 / (dt2 * dec.xe_ratio[i] * dec.cell_vol[im]);
                    ax[im] = (j(1, t, x) - rem) / coef;
                }
            }
        }

        let mut out = Section::from_fn(lat.clone(), 2, ScalarKind::Real, |t, x, c| {
            let v = if c == 0 {
                at[t * n_x + x]
            } else {
                ax[t * n_x + x]
            };
            C64::new(v, 0.0)
        });
        out.recompute_support();
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Observables, symplectic form, slice form, time-slice projector
// ---------------------------------------------------------------------------

#[derive(Clone)]
pub struct ProcaObservable {
    pub representative: Section,
}

pub fn observable_equal(
    model: &ProcaModel,
    a: &ProcaObservable,
    b: &ProcaObservable,
) -> Result<bool, ProcaError> {
    let diff = a.representative.linear_comb(
        C64::new(1.0, 0.0),
        &b.representative,
        C64::new(-1.0, 0.0),
    )?;
    if diff.support.is_empty() {
        return Ok(true);
    }
    let scale = a.representative.norm_inf() + b.representative.norm_inf();
    let e = model.propagator(&diff)?;
    // Boundary rows of the factorized propagator lack complete stencils;
    // the quotient decision reads the trustworthy interior.
    let lat = &model.lattice;
    let norm = e.norm_inf_rows(RESIDUAL_MARGIN + 1, lat.n_t - RESIDUAL_MARGIN - 2);
    Ok(norm <= OBSERVABLE_EQ_TOL * scale.max(f64::MIN_POSITIVE))
}

/// `tau([alpha], [beta]) = (alpha, E beta)` under the one-form pairing.
pub fn proca_tau(
    model: &ProcaModel,
    a: &ProcaObservable,
    b: &ProcaObservable,
) -> Result<f64, ProcaError> {
    let eb = model.propagator(&b.representative)?;
    Ok(model.pair(&a.representative, &eb))
}

/// Slice form `int_Sigma [g(A, i_n dB) - g(B, i_n dA)] dS` with the
/// staggered components averaged onto the slice nodes.
pub fn proca_sigma_slice(
    model: &ProcaModel,
    a: &Section,
    b: &Section,
    slice: &CauchySlice,
) -> Result<f64, ProcaError> {
    for field in [a, b] {
        let r = model.on_shell_residual(field);
        if r > ON_SHELL_TOL {
            return Err(ProcaError::OffShell { residual: r });
        }
    }
    let lat = &model.lattice;
    let dec = model.dec.as_ref();
    let t = slice.t_index;
    assert!(t >= 1 && t + 1 < lat.n_t, "slice too close to time boundary");
    let fa = exterior_d(dec, &section_to_form(a)).expect("degree 1");
    let fb = exterior_d(dec, &section_to_form(b)).expect("degree 1");
    let sa = section_to_form(a);
    let sb = section_to_form(b);
    let mut acc = 0.0;
    for x in 0..lat.n_x {
        let xm = lat.wrap_x(x as isize - 1);
        let li = lat.idx(t, x);
        let beta = lat.lapse[li];
        let h = lat.spatial_metric[li];
        // Node-collocated space legs and curvature coefficients.
        let ax_a = 0.5 * (sa.comps[1][li] + sa.comps[1][lat.idx(t, xm)]);
        let ax_b = 0.5 * (sb.comps[1][li] + sb.comps[1][lat.idx(t, xm)]);
        let favg = |f: &FormField<f64>| {
            0.25 * (f.comps[0][lat.idx(t, x)]
                + f.comps[0][lat.idx(t, xm)]
                + f.comps[0][lat.idx(t - 1, x)]
                + f.comps[0][lat.idx(t - 1, xm)])
        };
        let f_a = favg(&fa);
        let f_b = favg(&fb);
        // g(A, i_n dB) = -(1/h) A_x beta^{-1/2} F_B on the slice.
        let g_ab = -(1.0 / h) * ax_a * beta.powf(-0.5) * f_b;
        let g_ba = -(1.0 / h) * ax_b * beta.powf(-0.5) * f_a;
        acc += (g_ab - g_ba) * slice.induced_volume[x];
    }
    Ok(acc)
}

/// Time-band projector `alpha' = P(chi_minus E alpha)`: supported in the
/// band and equivalent to `alpha` in the observable quotient.
pub fn time_slice_project(
    model: &ProcaModel,
    obs: &ProcaObservable,
    band: (usize, usize),
) -> Result<ProcaObservable, ProcaError> {
    let lat = model.lattice.clone();
    let (lo, hi) = band;
    let need = 6 + 2 * STENCIL_MARGIN;
    if hi <= lo || hi - lo < need {
        return Err(ProcaError::BandTooNarrow {
            need,
            got: hi.saturating_sub(lo),
        });
    }
    let part = partition_of_unity(lat.n_t, lo + STENCIL_MARGIN, hi - STENCIL_MARGIN);
    let ef = model.propagator(&obs.representative)?;
    let chi_ef = scale_by_time_profile(&ef, &part.chi_minus);
    let mut projected = model.apply(&chi_ef);
    let mut band_mask = SupportMask::empty(lat.n_t, lat.n_x);
    for t in lo..=hi {
        for x in 0..lat.n_x {
            band_mask.set(t, x, true);
        }
    }
    projected.truncate_to(&band_mask);
    projected.recompute_support();
    Ok(ProcaObservable {
        representative: projected,
    })
}
