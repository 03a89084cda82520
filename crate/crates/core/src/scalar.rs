//! The real scalar field: wave operator with mass and curvature coupling,
//! observables as compact sections modulo the operator's image, the
//! propagator-induced symplectic form and its Cauchy-slice counterpart, and
//! the time-slice projector.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::greenops::{
    self, causal_propagator, green_apply, pair, partition_of_unity, scale_by_time_profile,
    GreenError, GreenKind, NormallyHyperbolicForm, OperatorHandle, PairingKind, STENCIL_MARGIN,
};
use crate::section::{ScalarKind, Section, SectionError};
use crate::spacetime::{CauchySlice, SpacetimeLattice, SupportMask};

/// Deciding threshold of the observable quotient: two representatives are
/// identified when the propagator of their difference is below this
/// relative size. One order above the Green-identity residual so roundoff
/// never produces false negatives.
pub const OBSERVABLE_EQ_TOL: f64 = 1e-8;

/// On-shell admission threshold for slice-form arguments.
pub const ON_SHELL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScalarError {
    #[error("observables belong to different models")]
    ModelMismatch,
    #[error("section is off shell: relative residual {residual}")]
    OffShell { residual: f64 },
    #[error("time band too narrow: need {need} slices, got {got}")]
    BandTooNarrow { need: usize, got: usize },
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Section(#[from] SectionError),
}

/// Real scalar field model: `P = box + m^2 + xi R`.
pub struct ScalarModel {
    pub lattice: Arc<SpacetimeLattice>,
    pub mass_sq: f64,
    pub coupling: f64,
    pub operator: Arc<OperatorHandle>,
}

impl ScalarModel {
    pub fn new(lattice: Arc<SpacetimeLattice>, mass_sq: f64, coupling: f64) -> Self {
        let potential: Vec<f64> = lattice
            .scalar_curvature
            .iter()
            .map(|&r| mass_sq + coupling * r)
            .collect();
        let form = Arc::new(NormallyHyperbolicForm::scalar_like(lattice.clone(), potential));
        let operator = Arc::new(OperatorHandle::for_form("scalar", form, ScalarKind::Real));
        ScalarModel {
            lattice,
            mass_sq,
            coupling,
            operator,
        }
    }

    pub fn apply(&self, s: &Section) -> Section {
        self.operator.apply(s)
    }

    pub fn propagator(&self, f: &Section) -> Result<Section, GreenError> {
        causal_propagator(&self.operator, f)
    }

    pub fn green(&self, f: &Section, which: GreenKind) -> Result<Section, GreenError> {
        green_apply(&self.operator, f, which)
    }

    pub fn observable(&self, representative: Section) -> Observable {
        Observable { representative }
    }

    /// Relative size of `P phi` against `phi` on interior rows.
    pub fn on_shell_residual(&self, phi: &Section) -> f64 {
        let zero = Section::zeros(self.lattice.clone(), 1, ScalarKind::Real);
        let r = greenops::residual_inf(&self.operator, phi, &zero);
        let n = phi.norm_inf();
        if n == 0.0 {
            0.0
        } else {
            r / n
        }
    }
}

/// A classical observable: a compactly supported test section regarded as
/// an equivalence class modulo the image of the dynamical operator.
#[derive(Clone)]
pub struct Observable {
    pub representative: Section,
}

impl Observable {
    pub fn section(&self) -> &Section {
        &self.representative
    }
}

/// Evaluate the observable on a field configuration.
pub fn evaluate(model: &ScalarModel, obs: &Observable, phi: &Section) -> f64 {
    let _ = model;
    pair(&obs.representative, phi, PairingKind::BilinearReal)
        .expect("compatible sections")
        .re
}

/// Decide equality in the quotient: the propagator annihilates exactly the
/// image of the operator on compact sections, so two representatives are
/// equivalent iff the propagator of their difference vanishes.
pub fn observable_equal(
    model: &ScalarModel,
    a: &Observable,
    b: &Observable,
) -> Result<bool, ScalarError> {
    let diff = a.representative.linear_comb(
        C64::new(1.0, 0.0),
        &b.representative,
        C64::new(-1.0, 0.0),
    )?;
    let scale = a.representative.norm_inf() + b.representative.norm_inf();
    if diff.support.is_empty() {
        return Ok(true);
    }
    let e = model.propagator(&diff)?;
    Ok(e.norm_inf() <= OBSERVABLE_EQ_TOL * scale.max(f64::MIN_POSITIVE))
}

/// The propagator-induced symplectic form `tau([f], [h]) = (f, E h)`.
pub fn symplectic_tau(
    model: &ScalarModel,
    a: &Observable,
    b: &Observable,
) -> Result<f64, ScalarError> {
    let eb = model.propagator(&b.representative)?;
    Ok(pair(&a.representative, &eb, PairingKind::BilinearReal)?.re)
}

/// The slice form `(phi, psi) -> int_Sigma (phi d_n psi - psi d_n phi) dS`
/// with centered time differences for the unit-normal derivative.
pub fn sigma_on_slice(
    model: &ScalarModel,
    phi: &Section,
    psi: &Section,
    slice: &CauchySlice,
) -> Result<f64, ScalarError> {
    for field in [phi, psi] {
        let r = model.on_shell_residual(field);
        if r > ON_SHELL_TOL {
            return Err(ScalarError::OffShell { residual: r });
        }
    }
    let lat = &model.lattice;
    let t = slice.t_index;
    assert!(t >= 1 && t + 1 < lat.n_t, "slice too close to time boundary");
    let inv2dt = 1.0 / (2.0 * lat.delta_t);
    let mut acc = 0.0;
    for x in 0..lat.n_x {
        let dphi = (phi.at(t + 1, x, 0).re - phi.at(t - 1, x, 0).re) * inv2dt;
        let dpsi = (psi.at(t + 1, x, 0).re - psi.at(t - 1, x, 0).re) * inv2dt;
        let grad_n_phi = slice.normal_scale[x] * dphi;
        let grad_n_psi = slice.normal_scale[x] * dpsi;
        acc += (phi.at(t, x, 0).re * grad_n_psi - psi.at(t, x, 0).re * grad_n_phi)
            * slice.induced_volume[x];
    }
    Ok(acc)
}

/// Project an observable into a time band around a Cauchy slice:
/// `f' = P(chi_minus E f)` is supported in the band and equivalent to `f`.
///
/// Values outside the widened band are pure marching roundoff and are
/// truncated to exact zeros; the returned class equality is certified by
/// the propagator residual, which the caller can re-check with
/// [`observable_equal`].
pub fn time_slice_project(
    model: &ScalarModel,
    obs: &Observable,
    band: (usize, usize),
) -> Result<Observable, ScalarError> {
    let lat = model.lattice.clone();
    let (lo, hi) = band;
    let need = 6 + 2 * STENCIL_MARGIN;
    if hi <= lo || hi - lo < need {
        return Err(ScalarError::BandTooNarrow {
            need,
            got: hi.saturating_sub(lo),
        });
    }
    // Transition strictly inside the band so the projector output, which
    // widens by one stencil cell, stays inside it.
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
    // Reduce the mask to the actual nonzero cells inside the band.
    projected.recompute_support();
    Ok(Observable {
        representative: projected,
    })
}
