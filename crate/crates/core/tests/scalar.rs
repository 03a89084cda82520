//! Scalar-field observable checks: evaluation functionals, quotient
//! equality, the propagator symplectic form, the slice form, causality and
//! the time-slice projector.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use ghft_core::convergence::observed_order;
use ghft_core::greenops::{pair, PairingKind};
use ghft_core::rng::Xoshiro256;
use ghft_core::sampling::{probe_basis, random_bump, random_bump_in_band};
use ghft_core::scalar::{
    evaluate, observable_equal, sigma_on_slice, symplectic_tau, time_slice_project, ScalarModel,
};
use ghft_core::section::{ScalarKind, Section};
use ghft_core::spacetime::{
    build_spacetime, causal_cone, cauchy_slice, ConeKind, Direction, GridSpec, SpacetimeSpec,
};
use ghft_core::SpacetimeLattice;

fn minkowski_physical(n_t: usize, n_x: usize) -> Arc<SpacetimeLattice> {
    let dx = 2.0 * std::f64::consts::PI / n_x as f64;
    build_spacetime(
        &SpacetimeSpec::Minkowski,
        &GridSpec::new(n_t, n_x, dx, dx),
    )
    .unwrap()
}

fn frw_physical(n_t: usize, n_x: usize) -> Arc<SpacetimeLattice> {
    let dx = 2.0 * std::f64::consts::PI / n_x as f64;
    build_spacetime(
        &SpacetimeSpec::Frw {
            scale: Box::new(|t| 1.25 + 0.15 * (0.8 * t).sin()),
        },
        &GridSpec::new(n_t, n_x, 0.9 * dx, dx),
    )
    .unwrap()
}

#[test]
fn evaluation_functional_examples() {
    let lat = minkowski_physical(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(41);
    // Disjoint supports evaluate to zero.
    let f = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 40);
    let phi = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 56, 92);
    if f.support.intersect(&phi.support).is_empty() {
        let obs = model.observable(f.clone());
        assert_eq!(evaluate(&model, &obs, &phi), 0.0);
    }
    // Operator images evaluate to zero on shell.
    let h = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let pf = model.apply(&h);
    let source = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
    let on_shell = model.propagator(&source).unwrap();
    let obs_pf = model.observable(pf.clone());
    let v = evaluate(&model, &obs_pf, &on_shell);
    let scale = pf.norm_inf() * on_shell.norm_inf();
    assert!(v.abs() <= 1e-8 * scale, "got {v}, scale {scale}");
    // Against the plain quadrature.
    let direct = pair(&pf, &on_shell, PairingKind::BilinearReal).unwrap().re;
    assert!((v - direct).abs() <= 1e-14 * scale.max(1.0));
}

#[test]
fn quotient_equality_examples() {
    let lat = minkowski_physical(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(42);
    let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let obs_f = model.observable(f.clone());
    // Reflexivity.
    assert!(observable_equal(&model, &obs_f, &obs_f).unwrap());
    // The image of the operator is the zero class.
    let w = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let pw = model.apply(&w);
    let zero = model.observable(Section::zeros(lat.clone(), 1, ScalarKind::Real));
    let obs_pw = model.observable(pw);
    assert!(observable_equal(&model, &obs_pw, &zero).unwrap());
    // A generic bump shifts the class (oracle: its propagator is visibly
    // nonzero).
    let bump = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let e_bump = model.propagator(&bump).unwrap();
    assert!(e_bump.norm_inf() > 1e-6 * bump.norm_inf());
    let shifted = model.observable(
        f.linear_comb(C64::new(1.0, 0.0), &bump, C64::new(1.0, 0.0))
            .unwrap(),
    );
    assert!(!observable_equal(&model, &obs_f, &shifted).unwrap());
}

#[test]
fn tau_is_antisymmetric_and_representative_independent() {
    let lat = frw_physical(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.1);
    let mut rng = Xoshiro256::seed_from_u64(43);
    for _ in 0..6 {
        let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
        let h = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
        let of = model.observable(f.clone());
        let oh = model.observable(h.clone());
        let t_fh = symplectic_tau(&model, &of, &oh).unwrap();
        let t_hf = symplectic_tau(&model, &oh, &of).unwrap();
        let scale = f.norm_inf() * h.norm_inf();
        assert!((t_fh + t_hf).abs() <= 1e-12 * scale.max(1.0));
        let t_ff = symplectic_tau(&model, &of, &of).unwrap();
        assert!(t_ff.abs() <= 1e-12 * scale.max(1.0));
        // Shifting a representative by an operator image is invisible.
        let w = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
        let pw = model.apply(&w);
        let f_shift = model.observable(
            f.linear_comb(C64::new(1.0, 0.0), &pw, C64::new(1.0, 0.0))
                .unwrap(),
        );
        let t_shift = symplectic_tau(&model, &f_shift, &oh).unwrap();
        assert!(
            (t_shift - t_fh).abs() <= 1e-9 * t_fh.abs().max(scale),
            "shifted {t_shift} vs {t_fh}"
        );
    }
}

#[test]
fn tau_is_bilinear() {
    let lat = minkowski_physical(80, 96);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(44);
    let f1 = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let f2 = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let h = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let (alpha, beta) = (1.7, -0.4);
    let comb = model.observable(
        f1.linear_comb(C64::new(alpha, 0.0), &f2, C64::new(beta, 0.0))
            .unwrap(),
    );
    let oh = model.observable(h);
    let lhs = symplectic_tau(&model, &comb, &oh).unwrap();
    let t1 = symplectic_tau(&model, &model.observable(f1.clone()), &oh).unwrap();
    let t2 = symplectic_tau(&model, &model.observable(f2.clone()), &oh).unwrap();
    let scale = lhs.abs().max(t1.abs()).max(t2.abs()).max(1e-30);
    assert!((lhs - (alpha * t1 + beta * t2)).abs() <= 1e-11 * scale);
}

#[test]
fn causally_disjoint_observables_have_zero_tau() {
    // Unit Courant number: the discrete shadow is sharp, so disjointness
    // in the conservative cones makes the pairing exactly zero.
    let lat = minkowski_physical(96, 192);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(45);
    let mut tested = 0;
    while tested < 10 {
        let f = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 30, 62);
        let h = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 30, 62);
        let jh = causal_cone(&lat, &h.support, Direction::Future, ConeKind::Causal).union(
            &causal_cone(&lat, &h.support, Direction::Past, ConeKind::Causal),
        );
        if !f.support.intersect(&jh).is_empty() {
            continue;
        }
        tested += 1;
        let t = symplectic_tau(&model, &model.observable(f.clone()), &model.observable(h.clone()))
            .unwrap();
        let scale = f.norm_inf() * h.norm_inf();
        assert!(t.abs() <= 1e-12 * scale.max(1.0), "tau {t}");
    }
}

#[test]
fn sampled_non_degeneracy_over_the_probe_basis() {
    let lat = minkowski_physical(80, 96);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let probes = probe_basis(&lat, ScalarKind::Real, 1, 4);
    let mut rng = Xoshiro256::seed_from_u64(46);
    for _ in 0..10 {
        let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
        let ef = model.propagator(&f).unwrap();
        if ef.norm_inf() <= 1e-6 * f.norm_inf() {
            continue;
        }
        let of = model.observable(f.clone());
        let found = probes.iter().any(|p| {
            let op = model.observable(p.clone());
            let t = symplectic_tau(&model, &of, &op).unwrap();
            t.abs() > 1e-6 * f.norm_inf() * p.norm_inf()
        });
        assert!(found, "no probe detected the class");
    }
}

#[test]
fn slice_form_agrees_with_tau_at_second_order() {
    let mut errs = Vec::new();
    let mut finest_rel = f64::NAN;
    for &(n_t, n_x) in &[(64usize, 96usize), (128, 192), (256, 384)] {
        let lat = frw_physical(n_t, n_x);
        let model = ScalarModel::new(lat.clone(), 1.0, 0.1);
        let mut rng = Xoshiro256::seed_from_u64(47);
        // Fixed physical bumps sampled at each resolution.
        let mk = |t_c: f64, x_c: f64, rng: &mut Xoshiro256| {
            let t_center = t_c * n_t as f64;
            let x_center = x_c * n_x as f64;
            let t_width = 0.03 * n_t as f64;
            let x_width = 0.02 * n_x as f64;
            let amp = rng.range(0.5, 1.0);
            Section::from_fn(lat.clone(), 1, ScalarKind::Real, |t, x, _| {
                let dt = (t as f64 - t_center) / t_width;
                let mut dx = x as f64 - x_center;
                let half = n_x as f64 / 2.0;
                if dx > half {
                    dx -= n_x as f64;
                }
                if dx < -half {
                    dx += n_x as f64;
                }
                let dx = dx / x_width;
                let r2 = dt * dt + dx * dx;
                if r2 >= 25.0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(amp * (-r2).exp(), 0.0)
                }
            })
        };
        let f = mk(0.28, 0.4, &mut rng);
        let h = mk(0.62, 0.55, &mut rng);
        let of = model.observable(f.clone());
        let oh = model.observable(h.clone());
        let tau = symplectic_tau(&model, &of, &oh).unwrap();
        let ef = model.propagator(&f).unwrap();
        let eh = model.propagator(&h).unwrap();
        let slice = cauchy_slice(&lat, n_t / 2).unwrap();
        let sigma = sigma_on_slice(&model, &ef, &eh, &slice).unwrap();
        errs.push((lat.delta_x, (sigma - tau).abs()));
        finest_rel = (sigma - tau).abs() / tau.abs().max(1e-30);
    }
    let order = observed_order(&errs).unwrap();
    assert!(order >= 1.8, "observed order {order}, errors {errs:?}");
    assert!(finest_rel <= 1e-3, "finest relative deviation {finest_rel}");
}

#[test]
fn slice_form_is_antisymmetric_and_slice_independent() {
    let lat = frw_physical(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(48);
    let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let h = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    let ef = model.propagator(&f).unwrap();
    let eh = model.propagator(&h).unwrap();
    let s1 = cauchy_slice(&lat, 30).unwrap();
    let s2 = cauchy_slice(&lat, 70).unwrap();
    let v_self = sigma_on_slice(&model, &ef, &ef, &s1).unwrap();
    assert!(v_self.abs() <= 1e-12 * ef.norm_inf().powi(2).max(1.0));
    let v1 = sigma_on_slice(&model, &ef, &eh, &s1).unwrap();
    let v2 = sigma_on_slice(&model, &ef, &eh, &s2).unwrap();
    // Both approximate the same continuum number at this resolution.
    let scale = v1.abs().max(v2.abs()).max(1e-30);
    assert!(
        (v1 - v2).abs() <= 2e-2 * scale,
        "slices differ: {v1} vs {v2}"
    );
    // Off-shell arguments are rejected.
    let junk = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
    assert!(sigma_on_slice(&model, &junk, &eh, &s1).is_err());
}

#[test]
fn time_slice_projector_lands_in_band_and_preserves_class() {
    let lat = minkowski_physical(120, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(49);
    let band = (40usize, 80usize);
    for _ in 0..4 {
        let f = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 36);
        let of = model.observable(f.clone());
        let projected = time_slice_project(&model, &of, band).unwrap();
        // Mask containment is exact.
        if let Some((lo, hi)) = projected.representative.support.t_extent() {
            assert!(lo >= band.0 && hi <= band.1);
        }
        // The class is preserved.
        assert!(observable_equal(&model, &projected, &of).unwrap());
    }
    // A representative already inside the band keeps its class too.
    let g = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 46, 74);
    let og = model.observable(g);
    let pg = time_slice_project(&model, &og, band).unwrap();
    assert!(observable_equal(&model, &pg, &og).unwrap());
    // Linearity up to observable equality.
    let a = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 36);
    let b = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 36);
    let comb = a
        .linear_comb(C64::new(2.0, 0.0), &b, C64::new(-1.5, 0.0))
        .unwrap();
    let p_comb = time_slice_project(&model, &model.observable(comb), band).unwrap();
    let pa = time_slice_project(&model, &model.observable(a), band).unwrap();
    let pb = time_slice_project(&model, &model.observable(b), band).unwrap();
    let lin = pa
        .representative
        .linear_comb(C64::new(2.0, 0.0), &pb.representative, C64::new(-1.5, 0.0))
        .unwrap();
    assert!(observable_equal(&model, &p_comb, &model.observable(lin)).unwrap());
    // Too-narrow bands are rejected.
    assert!(time_slice_project(&model, &pg, (50, 52)).is_err());
}

#[test]
fn projector_gram_preservation() {
    let lat = minkowski_physical(120, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(50);
    let band = (40usize, 80usize);
    for _ in 0..4 {
        let f = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 36);
        let h = random_bump_in_band(&lat, ScalarKind::Real, 1, &mut rng, 4, 36);
        let of = model.observable(f.clone());
        let oh = model.observable(h.clone());
        let t_orig = symplectic_tau(&model, &of, &oh).unwrap();
        let pf = time_slice_project(&model, &of, band).unwrap();
        let ph = time_slice_project(&model, &oh, band).unwrap();
        let t_proj = symplectic_tau(&model, &pf, &ph).unwrap();
        let scale = f.norm_inf() * h.norm_inf();
        assert!(
            (t_proj - t_orig).abs() <= 1e-8 * t_orig.abs().max(scale),
            "{t_proj} vs {t_orig}"
        );
    }
}
