//! Green-operator machinery checks: the flat-space retarded kernel oracle,
//! exact discrete Green identities, support containment, the exact
//! sequence, the inhomogeneous splitter, symbol probes, adjoints and
//! duality, and manufactured-solution convergence.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use ghft_core::convergence::observed_order;
use ghft_core::greenops::{
    adjoint_residual, causal_propagator, green_apply, green_duality_residual, pair,
    partition_of_unity, solve_cauchy, split_solve, symbol_probe, GreenKind, OperatorHandle,
    PairingKind,
};
use ghft_core::rng::Xoshiro256;
use ghft_core::sampling::{bump_section, random_bump, BumpSpec};
use ghft_core::scalar::ScalarModel;
use ghft_core::section::{ScalarKind, Section};
use ghft_core::spacetime::{
    build_spacetime, causal_cone, cauchy_slice, ConeKind, Direction, GridSpec, SpacetimeSpec,
};

fn minkowski(n_t: usize, n_x: usize, step: f64) -> Arc<ghft_core::SpacetimeLattice> {
    build_spacetime(
        &SpacetimeSpec::Minkowski,
        &GridSpec::new(n_t, n_x, step, step),
    )
    .unwrap()
}

fn frw_lattice(n_t: usize, n_x: usize) -> Arc<ghft_core::SpacetimeLattice> {
    // Scale factor above 1 keeps the unit-step CFL bound satisfied.
    let l_x = 2.0 * std::f64::consts::PI;
    let dx = l_x / n_x as f64;
    let dt = 0.9 * dx;
    build_spacetime(
        &SpacetimeSpec::Frw {
            scale: Box::new(|t| 1.3 + 0.2 * (0.7 * t).sin()),
        },
        &GridSpec::new(n_t, n_x, dt, dx),
    )
    .unwrap()
}

/// Massless flat-space model at unit Courant number.
fn massless_model(n_t: usize, n_x: usize) -> ScalarModel {
    ScalarModel::new(minkowski(n_t, n_x, 1.0), 0.0, 0.0)
}

/// Flat lattice over a physical-size domain (massive marching keeps its
/// marginal modes tame only when `m dt` is small).
fn minkowski_physical(n_t: usize, n_x: usize) -> Arc<ghft_core::SpacetimeLattice> {
    let dx = 2.0 * std::f64::consts::PI / n_x as f64;
    minkowski(n_t, n_x, dx)
}

fn residual_sup(op: &OperatorHandle, u: &Section, rhs: &Section, margin: usize) -> f64 {
    let lu = op.apply(u);
    let lat = &op.lattice;
    let mut worst = 0.0f64;
    for t in margin..lat.n_t - margin {
        for x in 0..lat.n_x {
            for c in 0..op.fiber_dim {
                worst = worst.max((lu.at(t, x, c) - rhs.at(t, x, c)).norm());
            }
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Flat-space retarded kernel against the d'Alembert oracle
// ---------------------------------------------------------------------------

/// Exact unit-Courant response to a discrete delta: the half-step
/// d'Alembert kernel `1/2 theta(t - |x|)` doubled onto the parity
/// sublattice that the scheme populates.
fn dalembert_cell_oracle(s: isize, y: isize) -> f64 {
    if s <= 0 || y.abs() >= s {
        return 0.0;
    }
    if (s + y) % 2 != 0 {
        1.0
    } else {
        0.0
    }
}

#[test]
fn retarded_kernel_matches_dalembert_pattern() {
    let model = massless_model(64, 128);
    let lat = model.lattice.clone();
    let (t0, x0) = (4usize, 64usize);
    let mut f = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    // Discrete delta: unit mass over one cell.
    f.set(t0, x0, 0, C64::new(1.0 / (lat.delta_t * lat.delta_x), 0.0));
    f.recompute_support();
    let e_ret = green_apply(&model.operator, &f, GreenKind::Retarded).unwrap();
    let mut worst = 0.0f64;
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let s = t as isize - t0 as isize;
            let y = x as isize - x0 as isize;
            let got = e_ret.at(t, x, 0).re;
            worst = worst.max((got - dalembert_cell_oracle(s, y)).abs());
        }
    }
    assert!(worst < 1e-12, "kernel deviation {worst}");
    // The local two-cell average inside the cone is the continuum 1/2.
    for t in 10..40 {
        let s = t - t0;
        for off in 0..(s - 1) {
            let avg = 0.5 * (e_ret.at(t, x0 + off, 0).re + e_ret.at(t, x0 + off + 1, 0).re);
            assert!((avg - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn advanced_kernel_is_time_reflected_retarded() {
    let model = massless_model(48, 96);
    let lat = model.lattice.clone();
    let mid: isize = 24;
    let mut f = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    f.set(mid as usize, 48, 0, C64::new(1.0, 0.0));
    f.recompute_support();
    let ret = green_apply(&model.operator, &f, GreenKind::Retarded).unwrap();
    let adv = green_apply(&model.operator, &f, GreenKind::Advanced).unwrap();
    for t in 0..lat.n_t {
        let tr = 2 * mid - t as isize;
        if tr < 0 || tr >= lat.n_t as isize {
            continue;
        }
        for x in 0..lat.n_x {
            let d = (ret.at(t, x, 0) - adv.at(tr as usize, x, 0)).norm();
            assert!(d < 1e-12, "mismatch at ({t},{x}): {d}");
        }
    }
}

#[test]
fn propagator_has_antisymmetric_cone_pattern() {
    let model = massless_model(64, 128);
    let lat = model.lattice.clone();
    let (t0, x0) = (32usize, 64usize);
    let mut f = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    f.set(t0, x0, 0, C64::new(1.0 / (lat.delta_t * lat.delta_x), 0.0));
    f.recompute_support();
    let e = causal_propagator(&model.operator, &f).unwrap();
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let s = t as isize - t0 as isize;
            let y = x as isize - x0 as isize;
            let expect = dalembert_cell_oracle(-s, y) - dalembert_cell_oracle(s, y);
            assert!((e.at(t, x, 0).re - expect).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------------------------
// Green identities and support containment
// ---------------------------------------------------------------------------

#[test]
fn green_identities_hold_to_solver_precision() {
    let mut rng = Xoshiro256::seed_from_u64(2024);
    for curved in [false, true] {
        let lat = if curved {
            frw_lattice(96, 128)
        } else {
            minkowski_physical(96, 128)
        };
        let model = ScalarModel::new(lat.clone(), 1.0, 0.1);
        for _ in 0..8 {
            let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
            let scale = f.norm_inf();
            for which in [GreenKind::Retarded, GreenKind::Advanced] {
                let ef = green_apply(&model.operator, &f, which).unwrap();
                let r1 = residual_sup(&model.operator, &ef, &f, 1);
                assert!(r1 <= 1e-9 * scale, "L E f - f: {r1} (curved={curved})");
                let lf = model.apply(&f);
                let elf = green_apply(&model.operator, &lf, which).unwrap();
                let mut worst = 0.0f64;
                for t in 0..lat.n_t {
                    for x in 0..lat.n_x {
                        worst = worst.max((elf.at(t, x, 0) - f.at(t, x, 0)).norm());
                    }
                }
                assert!(worst <= 1e-9 * scale, "E L f - f: {worst} (curved={curved})");
            }
        }
    }
}

#[test]
fn support_stays_inside_conservative_cones() {
    // At unit Courant number the marching stencil cone and the causal
    // shadow coincide, so containment is exact with zero violating cells.
    let model = massless_model(96, 160);
    let lat = model.lattice.clone();
    let mut rng = Xoshiro256::seed_from_u64(7);
    for _ in 0..6 {
        let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
        for (which, dir) in [
            (GreenKind::Retarded, Direction::Future),
            (GreenKind::Advanced, Direction::Past),
        ] {
            let ef = green_apply(&model.operator, &f, which).unwrap();
            let cone = causal_cone(&lat, &f.support, dir, ConeKind::Causal);
            assert_eq!(ef.support.cells_outside(&cone), 0);
        }
    }
}

#[test]
fn rejects_sources_touching_the_boundary() {
    let model = massless_model(32, 32);
    let lat = model.lattice.clone();
    let mut f = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    f.set(0, 10, 0, C64::new(1.0, 0.0));
    f.recompute_support();
    assert!(green_apply(&model.operator, &f, GreenKind::Retarded).is_err());
    let mut g = Section::zeros(lat, 1, ScalarKind::Real);
    g.set(31, 10, 0, C64::new(1.0, 0.0));
    g.recompute_support();
    assert!(green_apply(&model.operator, &g, GreenKind::Advanced).is_err());
}

// ---------------------------------------------------------------------------
// Exact sequence and the splitter
// ---------------------------------------------------------------------------

#[test]
fn propagator_kernel_is_the_operator_image() {
    let lat = frw_lattice(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(99);
    for _ in 0..5 {
        let h = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 3);
        let f = model.apply(&h); // f = L h, so E f = 0.
        let ef = causal_propagator(&model.operator, &f).unwrap();
        assert!(ef.norm_inf() <= 1e-10 * f.norm_inf().max(1.0));
        // The reconstruction h' = E^- f satisfies L h' = f (and equals h).
        let h_rec = green_apply(&model.operator, &f, GreenKind::Advanced).unwrap();
        let r = residual_sup(&model.operator, &h_rec, &f, 1);
        assert!(r <= 1e-9 * f.norm_inf());
        let mut dev = 0.0f64;
        for t in 0..lat.n_t {
            for x in 0..lat.n_x {
                dev = dev.max((h_rec.at(t, x, 0) - h.at(t, x, 0)).norm());
            }
        }
        assert!(dev <= 1e-9 * h.norm_inf());
    }
}

#[test]
fn propagator_output_solves_the_homogeneous_equation() {
    let lat = frw_lattice(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(5);
    let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
    let ef = causal_propagator(&model.operator, &f).unwrap();
    let zero = Section::zeros(lat, 1, ScalarKind::Real);
    let r = residual_sup(&model.operator, &ef, &zero, 1);
    assert!(r <= 1e-10 * f.norm_inf());
}

#[test]
fn split_solve_inverts_arbitrary_interior_sources() {
    let lat = minkowski_physical(96, 128);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(31);
    // Zero source gives the zero solution.
    let zero = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    let h0 = split_solve(&model.operator, &zero, None).unwrap();
    assert_eq!(h0.norm_inf(), 0.0);
    for _ in 0..5 {
        let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
        let h = split_solve(&model.operator, &f, None).unwrap();
        let r = residual_sup(&model.operator, &h, &f, 1);
        assert!(r <= 1e-10 * f.norm_inf(), "residual {r}");
    }
}

#[test]
fn partition_sums_to_one_exactly() {
    let part = partition_of_unity(97, 30, 66);
    for t in 0..97 {
        assert_eq!(part.chi_plus[t] + part.chi_minus[t], 1.0);
    }
    assert_eq!(part.chi_plus[30], 0.0);
    assert_eq!(part.chi_plus[66], 1.0);
}

// ---------------------------------------------------------------------------
// Pairing examples
// ---------------------------------------------------------------------------

#[test]
fn pairing_examples() {
    let lat = minkowski(32, 32, 1.0);
    // Disjoint supports pair to zero.
    let mut a = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    a.set(4, 4, 0, C64::new(2.0, 0.0));
    a.recompute_support();
    let mut b = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    b.set(20, 20, 0, C64::new(3.0, 0.0));
    b.recompute_support();
    assert_eq!(
        pair(&a, &b, PairingKind::BilinearReal).unwrap(),
        C64::new(0.0, 0.0)
    );
    // Indicator of a k-cell region pairs with itself to k dt dx.
    let mut ind = Section::zeros(lat.clone(), 1, ScalarKind::Real);
    for x in 5..12 {
        ind.set(9, x, 0, C64::new(1.0, 0.0));
    }
    ind.recompute_support();
    let v = pair(&ind, &ind, PairingKind::BilinearReal).unwrap();
    assert!((v.re - 7.0).abs() < 1e-14);
    // Sesquilinear conjugates the first argument.
    let mut c1 = Section::zeros(lat.clone(), 1, ScalarKind::Complex);
    c1.set(4, 4, 0, C64::new(0.0, 2.0));
    c1.recompute_support();
    let mut c2 = Section::zeros(lat, 1, ScalarKind::Complex);
    c2.set(4, 4, 0, C64::new(0.0, 3.0));
    c2.recompute_support();
    let s = pair(&c1, &c2, PairingKind::SesquilinearComplex).unwrap();
    assert!((s - C64::new(6.0, 0.0)).norm() < 1e-14);
}

#[test]
fn smooth_bump_pairing_matches_refined_quadrature() {
    // Oracle: the same continuum integrand summed on a refined grid.
    let integrand = |t: f64, x: f64| {
        let b1 = (-((t - 10.0).powi(2) / 18.0 + (x - 14.0).powi(2) / 8.0)).exp();
        let b2 = (-((t - 12.0).powi(2) / 10.0 + (x - 15.0).powi(2) / 12.0)).exp();
        b1 * b2
    };
    let quad = |n: usize| {
        let step = 32.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += integrand(i as f64 * step, j as f64 * step) * step * step;
            }
        }
        acc
    };
    let lat = minkowski(32, 32, 1.0);
    let sa = Section::from_fn(lat.clone(), 1, ScalarKind::Real, |t, x, _| {
        C64::new(
            (-((t as f64 - 10.0).powi(2) / 18.0 + (x as f64 - 14.0).powi(2) / 8.0)).exp(),
            0.0,
        )
    });
    let sb = Section::from_fn(lat, 1, ScalarKind::Real, |t, x, _| {
        C64::new(
            (-((t as f64 - 12.0).powi(2) / 10.0 + (x as f64 - 15.0).powi(2) / 12.0)).exp(),
            0.0,
        )
    });
    let lattice_value = pair(&sa, &sb, PairingKind::BilinearReal).unwrap().re;
    let refined = quad(128);
    assert!(
        (lattice_value - refined).abs() <= 1e-3 * refined.abs(),
        "lattice {lattice_value} vs refined {refined}"
    );
}

// ---------------------------------------------------------------------------
// Cauchy solver
// ---------------------------------------------------------------------------

#[test]
fn zero_data_zero_source_stays_zero() {
    let model = massless_model(32, 32);
    let slice = cauchy_slice(&model.lattice, 3).unwrap();
    let zeros = vec![C64::new(0.0, 0.0); 32];
    let u = solve_cauchy(&model.operator, &slice, &zeros, &zeros, None, true).unwrap();
    assert_eq!(u.norm_inf(), 0.0);
}

#[test]
fn standing_wave_matches_separation_of_variables() {
    // Oracle: u(t, x) = cos(k t) cos(k x) solves the massless equation with
    // data u0 = cos(k x), u1 = 0.
    let errs: Vec<(f64, f64)> = [(32usize, 64usize), (64, 128), (128, 256)]
        .iter()
        .map(|&(n_t, n_x)| {
            let l_x = 2.0 * std::f64::consts::PI;
            let dx = l_x / n_x as f64;
            let dt = 0.5 * dx;
            let lat = build_spacetime(
                &SpacetimeSpec::Minkowski,
                &GridSpec::new(n_t, n_x, dt, dx),
            )
            .unwrap();
            let model = ScalarModel::new(lat.clone(), 0.0, 0.0);
            let k = 2.0 * std::f64::consts::PI / l_x;
            let u0: Vec<C64> = (0..n_x)
                .map(|x| C64::new((k * x as f64 * dx).cos(), 0.0))
                .collect();
            let u1 = vec![C64::new(0.0, 0.0); n_x];
            let slice = cauchy_slice(&lat, 0).unwrap();
            let u = solve_cauchy(&model.operator, &slice, &u0, &u1, None, true).unwrap();
            let mut err = 0.0f64;
            for t in 0..n_t {
                for x in 0..n_x {
                    let exact = (k * t as f64 * dt).cos() * (k * x as f64 * dx).cos();
                    err = err.max((u.at(t, x, 0).re - exact).abs());
                }
            }
            (dx, err)
        })
        .collect();
    let order = observed_order(&errs).unwrap();
    assert!(order >= 1.8, "observed order {order}, errors {errs:?}");
}

#[test]
fn cauchy_support_is_contained_in_the_shadow() {
    let model = massless_model(48, 96);
    let lat = model.lattice.clone();
    let spec = BumpSpec {
        t_center: 8.0,
        x_center: 40.0,
        t_width: 1.0,
        x_width: 3.0,
        cutoff: 4.0,
        fiber_weights: vec![C64::new(1.0, 0.0)],
    };
    let bump = bump_section(&lat, ScalarKind::Real, &spec);
    let s = 8;
    let u0: Vec<C64> = (0..lat.n_x).map(|x| bump.at(s, x, 0)).collect();
    let u1 = vec![C64::new(0.0, 0.0); lat.n_x];
    let slice = cauchy_slice(&lat, s).unwrap();
    let u = solve_cauchy(&model.operator, &slice, &u0, &u1, None, true).unwrap();
    // Data mask: the slice cells where u0 is nonzero.
    let mut data_mask = ghft_core::spacetime::SupportMask::empty(lat.n_t, lat.n_x);
    for x in 0..lat.n_x {
        if u0[x].norm() > 0.0 {
            data_mask.set(s, x, true);
        }
    }
    let cone = causal_cone(&lat, &data_mask, Direction::Future, ConeKind::Causal);
    assert_eq!(u.support.cells_outside(&cone), 0);
}

#[test]
fn cauchy_solver_is_linear() {
    let model = massless_model(48, 64);
    let lat = model.lattice.clone();
    let slice = cauchy_slice(&lat, 2).unwrap();
    let mk = |seed: u64| -> Vec<C64> {
        let mut rng = Xoshiro256::seed_from_u64(seed);
        (0..lat.n_x)
            .map(|_| C64::new(rng.range(-1.0, 1.0), 0.0))
            .collect()
    };
    let u0a = mk(1);
    let u0b = mk(2);
    let u1 = vec![C64::new(0.0, 0.0); lat.n_x];
    let (alpha, beta) = (0.7, -1.3);
    let comb: Vec<C64> = u0a
        .iter()
        .zip(&u0b)
        .map(|(a, b)| alpha * a + beta * b)
        .collect();
    let ua = solve_cauchy(&model.operator, &slice, &u0a, &u1, None, true).unwrap();
    let ub = solve_cauchy(&model.operator, &slice, &u0b, &u1, None, true).unwrap();
    let uc = solve_cauchy(&model.operator, &slice, &comb, &u1, None, true).unwrap();
    let mut worst = 0.0f64;
    for t in 0..lat.n_t {
        for x in 0..lat.n_x {
            let lin = alpha * ua.at(t, x, 0) + beta * ub.at(t, x, 0);
            worst = worst.max((uc.at(t, x, 0) - lin).norm());
        }
    }
    assert!(worst <= 1e-12 * uc.norm_inf().max(1.0));
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    // Curved background with a forced smooth solution: residual-sourced
    // Cauchy evolution must reproduce it at second order.
    let exact = |t: f64, x: f64| (0.9 * t).sin() * (2.0 * x).cos() + 0.3 * (x - 0.4 * t).sin();
    let errs: Vec<(f64, f64)> = [(48usize, 64usize), (96, 128), (192, 256)]
        .iter()
        .map(|&(n_t, n_x)| {
            let l_x = 2.0 * std::f64::consts::PI;
            let dx = l_x / n_x as f64;
            let dt = 0.4 * dx;
            let lat = build_spacetime(
                &SpacetimeSpec::Frw {
                    scale: Box::new(|t| 1.2 + 0.1 * (0.5 * t).sin()),
                },
                &GridSpec::new(n_t, n_x, dt, dx),
            )
            .unwrap();
            let model = ScalarModel::new(lat.clone(), 1.0, 0.2);
            // Manufactured source J = L u_exact via the discrete operator of
            // a refined evaluation is biased; use the discrete L of the
            // exact samples (consistency error is the measured quantity).
            let u_exact = Section::from_fn(lat.clone(), 1, ScalarKind::Real, |t, x, _| {
                C64::new(exact(t as f64 * dt, x as f64 * dx), 0.0)
            });
            // Continuum source built symbolically for this geometry is
            // unwieldy; instead march with the discrete source L u_exact
            // and compare against u_exact away from the data slice. The
            // marching then reproduces u_exact to roundoff; the measured
            // error is the Cauchy-start consistency plus row accumulations,
            // which must shrink at the scheme order. To keep an honest
            // truncation signal, perturb the start data to the exact
            // continuum values (not the discrete-compatible ones).
            let j = model.apply(&u_exact);
            let s = 1usize;
            let u0: Vec<C64> = (0..n_x).map(|x| u_exact.at(s, x, 0)).collect();
            let u1: Vec<C64> = (0..n_x)
                .map(|x| {
                    let t = s as f64 * dt;
                    let xx = x as f64 * dx;
                    // Exact time derivative of the manufactured solution.
                    let du = 0.9 * (0.9 * t).cos() * (2.0 * xx).cos()
                        - 0.12 * (xx - 0.4 * t).cos();
                    C64::new(du, 0.0)
                })
                .collect();
            let slice = cauchy_slice(&lat, s).unwrap();
            let u = solve_cauchy(&model.operator, &slice, &u0, &u1, Some(&j), true).unwrap();
            let mut err = 0.0f64;
            for t in s..n_t {
                for x in 0..n_x {
                    err = err.max((u.at(t, x, 0) - u_exact.at(t, x, 0)).norm());
                }
            }
            (dx, err)
        })
        .collect();
    let order = observed_order(&errs).unwrap();
    assert!(
        (order - 2.0).abs() <= 0.2,
        "observed order {order}, errors {errs:?}"
    );
}

// ---------------------------------------------------------------------------
// Symbol probe
// ---------------------------------------------------------------------------

#[test]
fn symbol_probe_recovers_the_metric_contraction() {
    let n = 256;
    let dx = 1.0 / n as f64;
    let lat = build_spacetime(
        &SpacetimeSpec::Minkowski,
        &GridSpec::new(n, n, dx, dx),
    )
    .unwrap();
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let probe = |zeta: (f64, f64)| {
        symbol_probe(&model.operator, (n / 2, n / 2), zeta, &[8.0, 16.0, 32.0])
    };
    // Timelike unit covector: g(zeta, zeta) = 1.
    let m = probe((1.0, 0.0));
    assert!((m.at(0, 0).re - 1.0).abs() < 1e-2, "got {}", m.at(0, 0).re);
    // Null covector: 0.
    let m0 = probe((1.0, 1.0));
    assert!(m0.at(0, 0).norm() < 1e-2);
    // Constant scale factor 2: g^{xx} = -1/4.
    let lat2 = build_spacetime(
        &SpacetimeSpec::Frw {
            scale: Box::new(|_| 2.0),
        },
        &GridSpec::new(n, n, dx, dx),
    )
    .unwrap();
    let model2 = ScalarModel::new(lat2, 1.0, 0.0);
    let m2 = symbol_probe(&model2.operator, (n / 2, n / 2), (0.0, 1.0), &[8.0, 16.0, 32.0]);
    assert!(
        (m2.at(0, 0).re + 0.25).abs() < 5e-2,
        "got {}",
        m2.at(0, 0).re
    );
}

// ---------------------------------------------------------------------------
// Adjoint and duality residuals
// ---------------------------------------------------------------------------

#[test]
fn flux_form_operator_is_exactly_symmetric() {
    let lat = frw_lattice(64, 96);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.3);
    let mut rng = Xoshiro256::seed_from_u64(17);
    let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
    let g = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
    let r = adjoint_residual(&model.operator, &model.operator, &f, &g);
    let scale = f.norm_inf() * g.norm_inf();
    assert!(r <= 1e-10 * scale, "adjoint residual {r}");
    // Equal arguments are symmetric by inspection.
    let rr = adjoint_residual(&model.operator, &model.operator, &f, &f);
    assert!(rr <= 1e-10 * scale);
}

#[test]
fn green_duality_holds_on_random_bumps() {
    let lat = frw_lattice(80, 96);
    let model = ScalarModel::new(lat.clone(), 1.0, 0.0);
    let mut rng = Xoshiro256::seed_from_u64(23);
    for _ in 0..4 {
        let f = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
        let g = random_bump(&lat, ScalarKind::Real, 1, &mut rng, 2);
        let scale = f.norm_inf() * g.norm_inf();
        for which in [GreenKind::Retarded, GreenKind::Advanced] {
            let r =
                green_duality_residual(&model.operator, &model.operator, &f, &g, which).unwrap();
            assert!(r <= 1e-9 * scale, "duality residual {r}");
        }
    }
}
