//! Acceptance gate: one test per criterion, each printing a pass line.
//! Every numeric target is checked against an oracle independent of the
//! code path under test (bisection closures, closed-form exponents,
//! Richardson ratios), at tolerances stated inline.

use nalgebra::DVector;
use reflectlab::gas::{pi_fn, pi_inv, sound_speed, GasConstants, ThermoState, Vec2};
use reflectlab::linsolve::{assemble_linearized, fit_field_corner_exponent, kernel_compute};
use reflectlab::mesh::TriangleMesh;
use reflectlab::pencil::{
    corner_spectrum, pencil_spectrum, reflection_corner_beta0, reflection_corner_problem,
};
use reflectlab::perturb::{newton_solve, nonlinear_residual, ReflectionProblem};
use reflectlab::polar::{
    convexity_scan, critical_angle, deflection_solve, sonic_angle, PolarCurve,
};
use reflectlab::reflection::{params_from_core, transition_curves, trivial_rr_from_core};
use reflectlab::shock::{downstream_from_normal_velocity, ObliqueShock, ShockType};

/// Deterministic splitmix64 stream mapped to [0, 1).
struct Rng(u64);

impl Rng {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

fn base_reflection() -> reflectlab::reflection::TrivialRR {
    let consts = GasConstants::nondim(1.4).unwrap();
    trivial_rr_from_core(1.5, -0.4, 120f64.to_radians(), &consts).unwrap()
}

#[test]
fn criterion_1_shock_closure_matches_bisection_oracle() {
    let mut rng = Rng(101);
    for _ in 0..200 {
        let gamma = rng.in_range(1.1, 5.0 / 3.0);
        let mn = rng.in_range(1.0001, 5.0);
        let consts = GasConstants::nondim(gamma).unwrap();
        let rho_u = 1.0;
        let c_u = sound_speed(rho_u, &consts).unwrap();
        let vn_u = mn * c_u;
        let jump = downstream_from_normal_velocity(rho_u, vn_u, &consts).unwrap();
        assert!(!jump.vanishing, "gamma {gamma} M {mn}: vanishing jump");
        // independent oracle: plain bisection on the mass+Bernoulli closure
        let bern = pi_fn(rho_u, &consts).unwrap() + 0.5 * vn_u * vn_u;
        let flux = rho_u * vn_u;
        let f = |rho: f64| pi_fn(rho, &consts).unwrap() + 0.5 * (flux / rho).powi(2) - bern;
        let (mut lo, mut hi) = (rho_u * (1.0 + 1e-9), pi_inv(bern, &consts).unwrap());
        assert!(f(lo) < 0.0 && f(hi) > 0.0, "oracle not bracketed");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let rho_oracle = 0.5 * (lo + hi);
        let vn_oracle = flux / rho_oracle;
        assert!(
            (jump.rho_d - rho_oracle).abs() < 1e-10 * rho_oracle,
            "gamma {gamma} M {mn}: rho {} vs oracle {rho_oracle}",
            jump.rho_d
        );
        assert!((jump.vn_d - vn_oracle).abs() < 1e-10 * vn_oracle.abs());
        // admissibility ordering
        assert!(jump.vn_d <= vn_u && jump.rho_d >= rho_u);
    }
    println!("criterion 1 (shock closure vs bisection oracle, 200 draws): PASS");
}

#[test]
fn criterion_2_polar_convexity_and_classification() {
    let mut rng = Rng(202);
    for gamma in [1.2, 1.4, 5.0 / 3.0] {
        let consts = GasConstants::nondim(gamma).unwrap();
        for mu in [1.2, 2.0, 5.0] {
            let curve = PolarCurve::sample(mu, 1000, &consts).unwrap();
            let min_cert = convexity_scan(&curve, &consts).unwrap();
            assert!(min_cert > 0.0, "gamma {gamma} mu {mu}: min certificate {min_cert}");
            let (tau_star, _) = critical_angle(mu, &consts).unwrap();
            let (tau_s, _) = sonic_angle(mu, &consts).unwrap();
            assert!(
                0.0 < tau_s && tau_s < tau_star && tau_star < 90f64.to_radians(),
                "gamma {gamma} mu {mu}: tau_s {tau_s}, tau_star {tau_star}"
            );
            for _ in 0..1000 / 9 + 1 {
                let tau = rng.in_range(0.002, 0.998) * tau_star;
                let roots = deflection_solve(mu, tau, &consts).unwrap();
                assert_eq!(roots.weak.shock_type, ShockType::Weak, "tau {tau}");
                assert_eq!(roots.strong.shock_type, ShockType::Strong, "tau {tau}");
            }
        }
    }
    println!("criterion 2 (polar convexity, angle ordering, branch types): PASS");
}

#[test]
fn criterion_3_linearization_consistency() {
    let trr = base_reflection();
    let mesh = TriangleMesh::for_reflection(&trr, 10).unwrap();
    let sys = assemble_linearized(&trr, &mesh).unwrap();
    let prob = ReflectionProblem::from_trivial(&trr);
    let nn = mesh.node_count();
    let base_v = DVector::from_element(nn, trr.psi0);
    let mut rng = Rng(303);
    let eps = 1e-6;
    for dir in 0..20 {
        let w = DVector::from_fn(nn, |_, _| rng.in_range(-1.0, 1.0));
        let rp = nonlinear_residual(&prob, &mesh, &(&base_v + &w * eps)).unwrap();
        let rm = nonlinear_residual(&prob, &mesh, &(&base_v - &w * eps)).unwrap();
        let fd = (rp.residual - rm.residual) / (2.0 * eps);
        let lin = &sys.matrix * &w;
        let err = (fd - &lin).amax();
        let scale = lin.amax();
        assert!(err < 1e-5 * scale, "direction {dir}: error {err} vs scale {scale}");
    }
    println!("criterion 3 (nonlinear residual linearization, 20 directions, rel 1e-5): PASS");
}

#[test]
fn criterion_4_pencil_closed_forms() {
    use std::f64::consts::{FRAC_PI_2, PI};
    // wall-wall corner: Neumann edges with opening pi - theta
    for theta_deg in [100.0, 120.0, 135.0, 150.0] {
        let theta = (theta_deg as f64).to_radians();
        let s = pencil_spectrum(theta, PI, FRAC_PI_2, FRAC_PI_2, 2).unwrap();
        let expected = 1.0 / (1.0 - theta_deg / 180.0);
        assert!(
            (s.beta1 - expected).abs() < 1e-12 * expected,
            "theta {theta_deg}: beta1 {} vs {expected}",
            s.beta1
        );
    }
    // wall-shock corner of the reference reflection: right angle, beta1 = 2
    let trr = base_reflection();
    let l = trr.xi_a / trr.omega.c;
    let p = reflectlab::pencil::CornerProblem {
        interior: nalgebra::Matrix2::new(1.0 - l * l, 0.0, 0.0, 1.0),
        edge1_dir: Vec2::new(1.0, 0.0),
        edge2_dir: Vec2::new(0.0, 1.0),
        bc1: Vec2::new(0.0, 1.0),
        bc2: Vec2::new(1.0, 0.0),
    };
    let s = corner_spectrum(&p, 3).unwrap();
    assert!((s.beta1 - 2.0).abs() < 1e-12, "foot corner beta1 {}", s.beta1);
    // Neumann-Neumann right angle: beta_l = 2 l, beta = 0 twice
    let s = pencil_spectrum(0.0, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, 4).unwrap();
    assert_eq!(s.betas[0].1, 2, "beta0 multiplicity");
    for (l, (b, m)) in s.betas.iter().enumerate() {
        assert!((b - 2.0 * l as f64).abs() < 1e-12, "beta_{l} = {b}");
        if l > 0 {
            assert_eq!(*m, 1);
        }
    }
    println!("criterion 4 (corner-pencil closed forms to 1e-12): PASS");
}

#[test]
fn criterion_5_type_exponent_law() {
    let consts = GasConstants::nondim(1.4).unwrap();
    let mu = 2.0;
    let (tau_star, _) = critical_angle(mu, &consts).unwrap();
    let up = ThermoState::new(1.0, Vec2::new(mu, 0.0), &consts).unwrap();
    let beta0_of = |beta: f64| -> f64 {
        let n = Vec2::new(beta.cos(), beta.sin());
        let shock = ObliqueShock::from_upstream_normal(up, Vec2::zeros(), n, &consts).unwrap();
        let problem = reflection_corner_problem(
            shock.z_down(),
            shock.downstream.c,
            shock.g_gradient_v(),
            shock.tangent,
        )
        .unwrap();
        corner_spectrum(&problem, 2).unwrap().beta0
    };
    // sweep offsets are taken in degrees
    for dtau_deg in [0.5, 0.1, 0.01] {
        let tau = tau_star - (dtau_deg as f64).to_radians();
        let roots = deflection_solve(mu, tau, &consts).unwrap();
        let bw = beta0_of(roots.weak.beta);
        let bs = beta0_of(roots.strong.beta);
        assert!(bw > 1.0, "weak branch at offset {dtau_deg} deg: beta0 {bw}");
        assert!(bs > 0.0 && bs < 1.0, "strong branch at offset {dtau_deg} deg: beta0 {bs}");
    }
    let tau = tau_star - 1e-4f64.to_radians();
    let roots = deflection_solve(mu, tau, &consts).unwrap();
    for beta in [roots.weak.beta, roots.strong.beta] {
        let b0 = beta0_of(beta);
        assert!((b0 - 1.0).abs() < 1e-2, "beta0 {b0} at tau* - 1e-4 deg");
    }
    println!("criterion 5 (type-exponent windows, beta0 -> 1 at the critical angle): PASS");
}

#[test]
fn criterion_6_kernel_certificate_and_maximum_principle() {
    let trr = base_reflection();
    for n in [24usize, 48] {
        let mesh = TriangleMesh::for_reflection(&trr, n).unwrap();
        let sys = assemble_linearized(&trr, &mesh).unwrap();
        // kernel_compute re-checks the maximum principle and the value at
        // the reflection corner internally
        let field = kernel_compute(&sys, &mesh).unwrap();
        let gap = field.kernel_gap.unwrap();
        assert!(gap > 1e2, "n = {n}: kernel gap {gap}");
    }
    println!("criterion 6 (kernel certificate gap > 1e2 at h and h/2, max principle): PASS");
}

#[test]
fn criterion_7_corner_decay_matches_pencil_exponent() {
    let consts = GasConstants::nondim(1.4).unwrap();
    let trr = trivial_rr_from_core(2.0, -0.4, 120f64.to_radians(), &consts).unwrap();
    let (beta0, _) = reflection_corner_beta0(&trr).unwrap();
    let mut errs = Vec::new();
    for n in [24usize, 32, 48, 64] {
        let mesh = TriangleMesh::for_reflection(&trr, n).unwrap();
        let sys = assemble_linearized(&trr, &mesh).unwrap();
        let field = kernel_compute(&sys, &mesh).unwrap();
        let fit = fit_field_corner_exponent(&mesh, &field, mesh.corner_b, (0.01, 0.25), 2).unwrap();
        errs.push((fit.exponent - beta0).abs() / beta0);
    }
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "refinement not monotone: {errs:?}");
    }
    assert!(
        *errs.last().unwrap() < 0.10,
        "finest-mesh exponent off by {:.3} relative (beta0 {beta0}): {errs:?}",
        errs.last().unwrap()
    );
    println!(
        "criterion 7 (kernel corner exponent vs beta0 {beta0:.4}, rel errors {errs:?}): PASS"
    );
}

#[test]
fn criterion_8_perturbed_solutions_linear_response() {
    let trr = base_reflection();
    let base_params = params_from_core(&trr);
    let n = 16;
    let tol = 1e-8;
    let solve = |dm1: f64, dalpha: f64, dtheta: f64| {
        let mut p = base_params;
        p.m1 += dm1;
        p.alpha += dalpha;
        p.theta += dtheta;
        let out = newton_solve(&p, &trr, n, tol, 30).unwrap();
        assert!(out.weak_type && out.transonic);
        assert!(*out.residual_history.last().unwrap() < tol);
        // near-quadratic tail of the damped Newton iteration, measured on
        // the history normalized by its first entry
        let h = &out.residual_history;
        if h.len() >= 3 {
            let (a, b) = (h[h.len() - 2] / h[0], h[h.len() - 1] / h[0]);
            assert!(b / (a * a) < 1e3, "convergence ratio {} too large", b / (a * a));
        }
        out
    };
    for dtheta_deg in [0.1f64, 0.25, 0.5] {
        let full = solve(0.0, 0.0, dtheta_deg.to_radians());
        let half = solve(0.0, 0.0, (0.5 * dtheta_deg).to_radians());
        let (df, dh) = (full.foot_displacement(&trr), half.foot_displacement(&trr));
        assert!(df.abs() > 1e-6, "dtheta {dtheta_deg}: displacement {df}");
        assert!(
            (2.0 * dh / df - 1.0).abs() < 0.10,
            "dtheta {dtheta_deg}: half-displacement {dh} vs full {df}"
        );
    }
    // perturbations of the inflow Mach number and the incident angle
    let full = solve(0.02, 0.0, 0.0);
    let half = solve(0.01, 0.0, 0.0);
    assert!((2.0 * half.foot_displacement(&trr) / full.foot_displacement(&trr) - 1.0).abs() < 0.10);
    let full = solve(0.0, 0.25f64.to_radians(), 0.0);
    let half = solve(0.0, 0.125f64.to_radians(), 0.0);
    assert!((2.0 * half.foot_displacement(&trr) / full.foot_displacement(&trr) - 1.0).abs() < 0.10);
    println!("criterion 8 (perturbed reflections: convergence, flags, linear response): PASS");
}

#[test]
fn criterion_9_transition_curves_ordered_and_continuous() {
    let grid = |points: usize| -> Vec<f64> {
        (0..points)
            .map(|k| 1.6 + (4.0 - 1.6) * k as f64 / (points as f64 - 1.0))
            .collect()
    };
    let coarse = transition_curves(1.4, 0.0, &grid(20)).unwrap();
    let fine = transition_curves(1.4, 0.0, &grid(39)).unwrap();
    let max_jump = |pts: &[reflectlab::reflection::TransitionPoint]| -> (f64, f64) {
        let mut jd = 0.0f64;
        let mut js = 0.0f64;
        for w in pts.windows(2) {
            jd = jd.max((w[1].theta_d.unwrap() - w[0].theta_d.unwrap()).abs());
            js = js.max((w[1].theta_s.unwrap() - w[0].theta_s.unwrap()).abs());
        }
        (jd, js)
    };
    for p in coarse.iter().chain(fine.iter()) {
        let (d, s) = (p.theta_d.unwrap(), p.theta_s.unwrap());
        assert!(s > d, "M1 {}: theta_s {s} not above theta_d {d}", p.m1);
    }
    // halving the spacing halves the point-to-point jumps (continuity)
    let (cd, cs) = max_jump(&coarse);
    let (fd, fs) = max_jump(&fine);
    assert!(fd < 0.75 * cd && fs < 0.75 * cs, "jumps {fd},{fs} vs {cd},{cs}");
    println!("criterion 9 (transition curves ordered, continuous under halving): PASS");
}
