//! Seeded samplers for compact test sections: localized bumps with random
//! centers, widths and fiber weights. Used by the check suites and tests.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::greenops::STENCIL_MARGIN;
use crate::rng::Xoshiro256;
use crate::section::{ScalarKind, Section};
use crate::spacetime::SpacetimeLattice;

/// A truncated Gaussian bump: smooth to machine precision at the cutoff
/// radius, exactly zero outside it.
pub struct BumpSpec {
    pub t_center: f64,
    pub x_center: f64,
    pub t_width: f64,
    pub x_width: f64,
    pub cutoff: f64,
    pub fiber_weights: Vec<C64>,
}

impl BumpSpec {
    pub fn eval(&self, lat: &SpacetimeLattice, t: usize, x: usize) -> f64 {
        let dt = t as f64 - self.t_center;
        // Nearest periodic image.
        let mut dx = x as f64 - self.x_center;
        let n_x = lat.n_x as f64;
        if dx > n_x / 2.0 {
            dx -= n_x;
        } else if dx < -n_x / 2.0 {
            dx += n_x;
        }
        let r2 = (dt / self.t_width).powi(2) + (dx / self.x_width).powi(2);
        if r2 >= self.cutoff * self.cutoff {
            0.0
        } else {
            (-r2).exp()
        }
    }
}

pub fn bump_section(lat: &Arc<SpacetimeLattice>, kind: ScalarKind, spec: &BumpSpec) -> Section {
    let fiber_dim = spec.fiber_weights.len();
    Section::from_fn(lat.clone(), fiber_dim, kind, |t, x, c| {
        spec.fiber_weights[c] * spec.eval(lat, t, x)
    })
}

/// Random compact interior bump: the support keeps `extra_margin` slices
/// beyond the stencil margin clear on both time boundaries.
pub fn random_bump(
    lat: &Arc<SpacetimeLattice>,
    kind: ScalarKind,
    fiber_dim: usize,
    rng: &mut Xoshiro256,
    extra_margin: usize,
) -> Section {
    random_bump_in_band(
        lat,
        kind,
        fiber_dim,
        rng,
        STENCIL_MARGIN + extra_margin,
        lat.n_t - 1 - STENCIL_MARGIN - extra_margin,
    )
}

/// Random bump whose support lies inside the closed slice band `[lo, hi]`.
pub fn random_bump_in_band(
    lat: &Arc<SpacetimeLattice>,
    kind: ScalarKind,
    fiber_dim: usize,
    rng: &mut Xoshiro256,
    lo: usize,
    hi: usize,
) -> Section {
    assert!(hi > lo + 12, "band too narrow for a bump");
    let span = (hi - lo) as f64;
    let cutoff = 5.0;
    // Keep the truncation radius inside a quarter of the band so random
    // centers always fit.
    let t_width = rng.range(span / 50.0, span / 25.0).max(1.2);
    let x_width = rng
        .range(lat.n_x as f64 * 0.02, lat.n_x as f64 * 0.05)
        .max(1.2);
    let t_lo = lo as f64 + t_width * cutoff + 1.0;
    let t_hi = hi as f64 - t_width * cutoff - 1.0;
    assert!(t_hi > t_lo, "band too narrow for the sampled width");
    let t_center = rng.range(t_lo, t_hi);
    let x_center = rng.range(0.0, lat.n_x as f64);
    let mut fiber_weights = Vec::with_capacity(fiber_dim);
    for _ in 0..fiber_dim {
        let re = rng.range(-1.0, 1.0);
        let im = match kind {
            ScalarKind::Real => 0.0,
            ScalarKind::Complex => rng.range(-1.0, 1.0),
        };
        fiber_weights.push(C64::new(re, im));
    }
    let spec = BumpSpec {
        t_center,
        x_center,
        t_width,
        x_width,
        cutoff,
        fiber_weights,
    };
    bump_section(lat, kind, &spec)
}

/// A fixed probe family: translated bumps of one radius tiling the lattice
/// interior, used for sampled non-degeneracy checks.
pub fn probe_basis(
    lat: &Arc<SpacetimeLattice>,
    kind: ScalarKind,
    fiber_dim: usize,
    per_axis: usize,
) -> Vec<Section> {
    let mut probes = Vec::new();
    let lo = (STENCIL_MARGIN + 2) as f64;
    let hi = (lat.n_t - 3 - STENCIL_MARGIN) as f64;
    let cutoff = 5.0;
    // Tails must stay clear of the time boundaries for every tile center.
    let t_width = (hi - lo) / (2.0 * per_axis as f64) / cutoff;
    let x_width = lat.n_x as f64 * 0.03;
    for it in 0..per_axis {
        let t_center = lo + (hi - lo) * (it as f64 + 0.5) / per_axis as f64;
        for ix in 0..per_axis {
            let x_center = lat.n_x as f64 * (ix as f64 + 0.5) / per_axis as f64;
            for c in 0..fiber_dim {
                let mut fiber_weights = vec![C64::new(0.0, 0.0); fiber_dim];
                fiber_weights[c] = C64::new(1.0, 0.0);
                let spec = BumpSpec {
                    t_center,
                    x_center,
                    t_width: t_width.max(1.2),
                    x_width: x_width.max(1.2),
                    cutoff,
                    fiber_weights,
                };
                probes.push(bump_section(lat, kind, &spec));
            }
        }
    }
    probes
}

/// Smooth random field over the whole lattice from a handful of low
/// Fourier modes (for convergence studies; evaluate at any resolution).
pub struct SmoothField {
    pub modes: Vec<(f64, f64, f64, f64)>, // (amp, k_t, k_x, phase)
}

impl SmoothField {
    pub fn sample(rng: &mut Xoshiro256, n_modes: usize, t_span: f64, x_span: f64) -> Self {
        let mut modes = Vec::with_capacity(n_modes);
        for _ in 0..n_modes {
            let amp = rng.range(-1.0, 1.0);
            let k_t = (rng.below(3) as f64) * std::f64::consts::TAU / t_span;
            let k_x = (1.0 + rng.below(3) as f64) * std::f64::consts::TAU / x_span;
            let phase = rng.range(0.0, std::f64::consts::TAU);
            modes.push((amp, k_t, k_x, phase));
        }
        SmoothField { modes }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(a, kt, kx, p)| a * (kt * t + kx * x + p).cos())
            .sum()
    }
}
