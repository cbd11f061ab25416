//! Regular reflection at a wall corner: local two-shock construction at the
//! reflection point, the global trivial reflection with a straight vertical
//! reflected shock, parameter maps, and detachment/sonic transition curves.
//!
//! Geometry convention: the corner sits at the origin, wall A is the ray at
//! polar angle 180 degrees, wall B the ray at polar angle `theta` in
//! (90, 180) degrees. The reflected shock S is the vertical segment
//! `xi = xi_a < 0` between the two walls; the quiescent region Omega between
//! S and the corner has zero velocity and constant density `rho3`.

use crate::error::{Error, Result};
use crate::gas::{self, GasConstants, Vec2};
use crate::polar::{self, PolarSample};
use crate::shock::{cross2, rot90ccw, ConstantState, ObliqueShock, ShockType};
use crate::solve::{bisect, first_sign_change};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Angle parameters of a regular reflection, measured by an observer moving
/// with the reflection point: sector-1 Mach number, clockwise angle `alpha`
/// from the opposite wall to the incident shock, wall angle `theta`
/// (radians).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReflectionParams {
    pub gamma: f64,
    pub m1: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl ReflectionParams {
    pub fn new(gamma: f64, m1: f64, alpha: f64, theta: f64) -> Result<Self> {
        if m1 <= 1.0 {
            return Err(Error::Domain(format!("M1 must exceed 1, got {m1}")));
        }
        if !(alpha > 0.0 && alpha <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 90] degrees, got {} deg",
                alpha.to_degrees()
            )));
        }
        if !(theta > std::f64::consts::FRAC_PI_2 && theta < std::f64::consts::PI) {
            return Err(Error::Domain(format!(
                "theta must lie in (90, 180) degrees, got {} deg",
                theta.to_degrees()
            )));
        }
        Ok(Self {
            gamma,
            m1,
            alpha,
            theta,
        })
    }
}

/// One reflected-shock candidate of the local construction.
#[derive(Debug, Clone, Copy)]
pub struct LocalCandidate {
    pub sample: PolarSample,
    pub transonic: bool,
}

/// Weak and strong reflected-shock candidates turning the sector-2 flow by
/// `tau`.
pub fn local_rr(m2: f64, tau: f64, consts: &GasConstants) -> Result<(LocalCandidate, LocalCandidate)> {
    let roots = polar::deflection_solve(m2, tau, consts)?;
    let wrap = |s: PolarSample| LocalCandidate {
        sample: s,
        transonic: s.m_d < 1.0,
    };
    Ok((wrap(roots.weak), wrap(roots.strong)))
}

/// Incident shock attached at the reflection point.
#[derive(Debug, Clone)]
pub struct IncidentShock {
    pub shock: ObliqueShock,
    /// Unit direction of the shock line, oriented away from the wall
    /// (positive y-component).
    pub direction: Vec2,
}

/// Global trivial regular reflection.
#[derive(Debug, Clone)]
pub struct TrivialRR {
    pub consts: GasConstants,
    pub theta: f64,
    pub xi_a: f64,
    pub xi_b: Vec2,
    pub psi0: f64,
    pub sector1: ConstantState,
    pub sector2: ConstantState,
    /// Quiescent state in Omega (velocity zero, density rho3).
    pub omega: ConstantState,
    /// Reflected shock data evaluated at the reflection point.
    pub reflected: ObliqueShock,
    pub incident: IncidentShock,
}

impl TrivialRR {
    pub fn rho3(&self) -> f64 {
        self.omega.rho
    }

    /// Unit direction of wall B.
    pub fn wall_b_dir(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Reflected shock at height `eta` on the segment S.
    pub fn reflected_at(&self, eta: f64) -> Result<ObliqueShock> {
        ObliqueShock::from_upstream_normal(
            self.sector2.state(),
            Vec2::new(self.xi_a, eta),
            Vec2::new(1.0, 0.0),
            &self.consts,
        )
    }

    /// Pseudo-Mach number of Omega at `xi`.
    pub fn omega_pseudo_mach(&self, xi: Vec2) -> f64 {
        xi.norm() / self.omega.c
    }

    /// Sector-2 Mach number seen from the reflection point.
    pub fn m2(&self) -> f64 {
        (self.sector2.velocity - self.xi_b).norm() / self.sector2.c
    }
}

/// Mass-flux residual of the vertical reflected shock as a function of the
/// sector-2 horizontal velocity `v`, with density slaved to Bernoulli.
fn reflected_residual(v: f64, rho3: f64, xi_a: f64, consts: &GasConstants) -> Result<f64> {
    let arg = gas::pi_fn(rho3, consts)? + 0.5 * xi_a * xi_a - 0.5 * (v - xi_a) * (v - xi_a);
    let rho2 = gas::pi_inv(arg, consts)?;
    Ok(rho2 * (v - xi_a) + rho3 * xi_a)
}

/// Builds the global trivial reflection from the quiescent-core data.
pub fn trivial_rr_from_core(
    rho3: f64,
    xi_a: f64,
    theta: f64,
    consts: &GasConstants,
) -> Result<TrivialRR> {
    if rho3 <= 0.0 {
        return Err(Error::NonpositiveDensity(rho3));
    }
    if xi_a >= 0.0 {
        return Err(Error::Domain(format!("xi_a must be negative, got {xi_a}")));
    }
    if !(theta > std::f64::consts::FRAC_PI_2 && theta < std::f64::consts::PI) {
        return Err(Error::Domain(format!(
            "theta must lie in (90, 180) degrees, got {} deg",
            theta.to_degrees()
        )));
    }
    let c3 = gas::sound_speed(rho3, consts)?;
    let psi0 = -gas::pi_fn(rho3, consts)?;

    // ellipticity of Omega: the farthest point is the reflection point
    let xi_b = Vec2::new(xi_a, xi_a * theta.tan());
    if xi_b.norm() >= c3 {
        return Err(Error::Ellipticity(format!(
            "reflection point radius {} is not below the core sound speed {}",
            xi_b.norm(),
            c3
        )));
    }
    if xi_a.abs() >= c3 {
        return Err(Error::Ellipticity(format!(
            "reflected-shock foot radius {} is not below the core sound speed {c3}",
            xi_a.abs()
        )));
    }

    // sector-2 velocity: first nontrivial root of the mass-flux residual
    // (v = 0 is the trivial root)
    let v_max = xi_a + (2.0 * gas::pi_fn(rho3, consts)? + xi_a * xi_a).sqrt();
    let f = |v: f64| reflected_residual(v, rho3, xi_a, consts).unwrap_or(f64::NAN);
    let start = 1e-6 * v_max;
    let (lo, hi) = first_sign_change(f, start, v_max * (1.0 - 1e-9), 4000).ok_or_else(|| {
        Error::Construction(
            "no nontrivial sector-2 root of the reflected-shock closure".into(),
        )
    })?;
    let v_i = bisect(f, lo, hi, 1e-15)?;
    let sector2 = ConstantState::consistent(
        gas::pi_inv(
            gas::pi_fn(rho3, consts)? + 0.5 * xi_a * xi_a - 0.5 * (v_i - xi_a) * (v_i - xi_a),
            consts,
        )?,
        Vec2::new(v_i, 0.0),
        consts,
    )?;
    let omega = ConstantState::consistent(rho3, Vec2::zeros(), consts)?;

    // reflected shock at the reflection point; downstream must reproduce Omega
    let reflected = ObliqueShock::from_upstream_normal(
        sector2.state(),
        xi_b,
        Vec2::new(1.0, 0.0),
        consts,
    )?;
    if (reflected.downstream.rho - rho3).abs() > 1e-9 * rho3 {
        return Err(Error::Construction(format!(
            "reflected-shock closure inconsistent: downstream density {} vs core {}",
            reflected.downstream.rho, rho3
        )));
    }
    let m2 = (sector2.velocity - xi_b).norm() / sector2.c;
    if m2 <= 1.0 {
        return Err(Error::RegimeExit(format!(
            "sector-2 pseudo-Mach {m2} at the reflection point is not supersonic"
        )));
    }

    let incident = attach_incident(&sector2, xi_b, theta, consts)?;
    let sector1 = ConstantState::consistent(
        incident.shock.upstream.rho,
        incident.shock.upstream.velocity,
        consts,
    )?;

    Ok(TrivialRR {
        consts: *consts,
        theta,
        xi_a,
        xi_b,
        psi0,
        sector1,
        sector2,
        omega,
        reflected,
        incident,
    })
}

/// Solves for the incident shock through the reflection point whose upstream
/// velocity satisfies the slip condition on wall B.
fn attach_incident(
    sector2: &ConstantState,
    xi_b: Vec2,
    theta: f64,
    consts: &GasConstants,
) -> Result<IncidentShock> {
    let b_hat = Vec2::new(theta.cos(), theta.sin());
    let z2 = sector2.velocity - xi_b;
    let m2 = z2.norm() / sector2.c;
    let phi0 = z2.y.atan2(z2.x);
    // the downstream pseudo-normal velocity z2.n must lie in (0, c2):
    // phi - phi0 in +-(arccos(1/M2), pi/2)
    let lo_off = (1.0 / m2).acos();
    let hi_off = std::f64::consts::FRAC_PI_2;
    let resid = |phi: f64| -> f64 {
        match incident_candidate(phi, sector2, xi_b, consts) {
            Ok((v1, _, _)) => cross2(v1, b_hat),
            Err(_) => f64::NAN,
        }
    };
    let mut best: Option<IncidentShock> = None;
    for side in [1.0f64, -1.0] {
        let a = phi0 + side * (lo_off + 1e-8 * (hi_off - lo_off));
        let b = phi0 + side * (hi_off - 1e-8 * (hi_off - lo_off));
        let Some((lo, hi)) = first_sign_change(resid, a, b, 2000) else {
            continue;
        };
        let phi = bisect(resid, lo, hi, 1e-15)?;
        let (_, _, shock) = incident_candidate(phi, sector2, xi_b, consts)?;
        let mut dir = shock.tangent;
        if dir.y < 0.0 {
            dir = -dir;
        }
        // require an incident shock leaning over the corner: alpha in (0, 90]
        let alpha = dir.y.atan2(-dir.x);
        if !(alpha > 0.0 && alpha <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            continue;
        }
        let cand = IncidentShock {
            shock,
            direction: dir,
        };
        let keep = match &best {
            None => true,
            // prefer the weak-type incident shock when both sides admit one
            Some(b) => {
                cand.shock.classify() == ShockType::Weak
                    && b.shock.classify() != ShockType::Weak
            }
        };
        if keep {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| {
        Error::Construction("no incident shock satisfies the wall-B slip condition".into())
    })
}

/// For a trial incident-shock normal angle, reconstructs the upstream state
/// from the known sector-2 downstream state.
fn incident_candidate(
    phi: f64,
    sector2: &ConstantState,
    xi_b: Vec2,
    consts: &GasConstants,
) -> Result<(Vec2, f64, ObliqueShock)> {
    let n = Vec2::new(phi.cos(), phi.sin());
    let t = rot90ccw(n);
    let z2 = sector2.velocity - xi_b;
    let zn_d = z2.dot(&n);
    // the reverse solve returns the expansive (upstream) side in the jump's
    // fields
    let up = crate::shock::upstream_from_normal_velocity(sector2.rho, zn_d, consts)?;
    let z1 = up.vn_d * n + z2.dot(&t) * t;
    let v1 = z1 + xi_b;
    let state1 = crate::gas::ThermoState::new(up.rho_d, v1, consts)?;
    // forward consistency: re-running the jump from upstream must land on
    // the sector-2 state
    let shock = ObliqueShock::from_upstream_normal(state1, xi_b, n, consts)?;
    if (shock.downstream.rho - sector2.rho).abs() > 1e-9 * sector2.rho
        || (shock.downstream.velocity - sector2.velocity).norm() > 1e-9
    {
        return Err(Error::Construction(
            "incident-shock reverse solve failed forward consistency".into(),
        ));
    }
    Ok((v1, up.rho_d, shock))
}

/// Forward parameter map, measured in the reflection-point frame.
pub fn params_from_core(trr: &TrivialRR) -> ReflectionParams {
    let z1 = trr.sector1.velocity - trr.xi_b;
    let m1 = z1.norm() / trr.sector1.c;
    let d = trr.incident.direction;
    let alpha = d.y.atan2(-d.x);
    ReflectionParams {
        gamma: trr.consts.gamma,
        m1,
        alpha,
        theta: trr.theta,
    }
}

/// Inverse parameter map at fixed `theta`: damped Newton on
/// `(rho3, xi_a) -> (M1, alpha)` with finite-difference Jacobian and a
/// pseudo-inverse step (the core data carry a scale gauge the parameters do
/// not see, so the Jacobian is rank-deficient along that direction).
pub fn core_from_params(
    params: &ReflectionParams,
    consts: &GasConstants,
    guess: (f64, f64),
) -> Result<TrivialRR> {
    let theta = params.theta;
    let eval = |rho3: f64, xi_a: f64| -> Result<Vec2> {
        let trr = trivial_rr_from_core(rho3, xi_a, theta, consts)?;
        let p = params_from_core(&trr);
        Ok(Vec2::new(p.m1 - params.m1, p.alpha - params.alpha))
    };
    let (mut rho3, mut xi_a) = guess;
    let mut r = eval(rho3, xi_a)?;
    let mut history = Vec::new();
    for it in 0..100 {
        history.push(r.norm());
        if r.norm() < 1e-12 {
            break;
        }
        let h_r = 1e-6 * rho3;
        let h_x = 1e-6 * xi_a.abs();
        let rp = eval(rho3 + h_r, xi_a)?;
        let rx = eval(rho3, xi_a + h_x)?;
        let j = nalgebra::Matrix2::new(
            (rp.x - r.x) / h_r,
            (rx.x - r.x) / h_x,
            (rp.y - r.y) / h_r,
            (rx.y - r.y) / h_x,
        );
        let svd = j.svd(true, true);
        // the scale gauge leaves one singular value at finite-difference
        // noise level; truncate it so the step stays in the row space
        let step = svd
            .solve(&(-r), 1e-6 * svd.singular_values[0].max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Solver(e.to_string()))?;
        let cap = 0.5 * (rho3 * rho3 + xi_a * xi_a).sqrt();
        let step = if step.norm() > cap {
            step * (cap / step.norm())
        } else {
            step
        };
        // damped update: halve until the residual decreases and stays valid
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand_rho = rho3 + lambda * step.x;
            let cand_xi = xi_a + lambda * step.y;
            if cand_rho > 0.0 && cand_xi < 0.0 {
                if let Ok(rn) = eval(cand_rho, cand_xi) {
                    if rn.norm() < r.norm() {
                        rho3 = cand_rho;
                        xi_a = cand_xi;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: it + 1,
                residual: r.norm(),
                history,
            });
        }
    }
    if r.norm() >= 1e-9 {
        return Err(Error::NonConvergence {
            iterations: 100,
            residual: r.norm(),
            history,
        });
    }
    trivial_rr_from_core(rho3, xi_a, theta, consts)
}

/// Local reflection in the reflection-point frame, scale-free: sector-1 at
/// unit density and sound speed flowing along wall B toward the corner.
#[derive(Debug, Clone, Copy)]
pub struct FrameRR {
    pub z2: Vec2,
    pub rho2: f64,
    pub c2: f64,
    pub m2: f64,
    /// Deflection the reflected shock must produce to realign the flow with
    /// wall B.
    pub tau: f64,
    pub incident_type: ShockType,
}

/// Builds the incident jump in the reflection-point frame for parameters
/// `(gamma fixed by consts, m1, alpha, theta)`.
pub fn frame_rr(m1: f64, alpha: f64, theta: f64, consts: &GasConstants) -> Result<FrameRR> {
    let b_hat = Vec2::new(theta.cos(), theta.sin());
    let z1 = -m1 * b_hat;
    let d = Vec2::new(-alpha.cos(), alpha.sin());
    let mut n = rot90ccw(d);
    if z1.dot(&n) < 0.0 {
        n = -n;
    }
    if z1.dot(&n) <= 1.0 {
        return Err(Error::RegimeExit(format!(
            "incident normal velocity {} does not exceed the sound speed",
            z1.dot(&n)
        )));
    }
    let state1 = crate::gas::ThermoState::new(consts.rho0, z1, consts)?;
    let shock = ObliqueShock::from_upstream_normal(state1, Vec2::zeros(), n, consts)?;
    let z2 = shock.downstream.velocity;
    let m2 = z2.norm() / shock.downstream.c;
    let tau = cross2(-b_hat, z2).atan2((-b_hat).dot(&z2)).abs();
    Ok(FrameRR {
        z2,
        rho2: shock.downstream.rho,
        c2: shock.downstream.c,
        m2,
        tau,
        incident_type: shock.classify(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitionPoint {
    pub m1: f64,
    pub theta_d: Option<f64>,
    pub theta_s: Option<f64>,
    pub status: TransitionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionStatus {
    Ok,
    OutOfRegime,
}

/// Detachment and sonic wall angles over a grid of sector-1 Mach numbers.
pub fn transition_curves(
    gamma: f64,
    alpha: f64,
    m1_grid: &[f64],
) -> Result<Vec<TransitionPoint>> {
    let consts = GasConstants::nondim(gamma)?;
    let pts: Vec<TransitionPoint> = m1_grid
        .par_iter()
        .map(|&m1| transition_point(m1, alpha, &consts))
        .collect();
    Ok(pts)
}

fn transition_point(m1: f64, alpha: f64, consts: &GasConstants) -> TransitionPoint {
    // margin the defining deficits: positive where RR exists / is supersonic
    let d_def = |theta: f64| -> f64 {
        match frame_rr(m1, alpha, theta, consts) {
            Ok(fr) if fr.m2 > 1.0 => match polar::critical_angle(fr.m2, consts) {
                Ok((tau_star, _)) => tau_star - fr.tau,
                Err(_) => f64::NAN,
            },
            _ => f64::NAN,
        }
    };
    let s_def = |theta: f64| -> f64 {
        match frame_rr(m1, alpha, theta, consts) {
            Ok(fr) if fr.m2 > 1.0 => match polar::sonic_angle(fr.m2, consts) {
                Ok((tau_s, _)) => tau_s - fr.tau,
                Err(_) => f64::NAN,
            },
            _ => f64::NAN,
        }
    };
    let theta_d = bracketed_root(d_def);
    let theta_s = bracketed_root(s_def);
    let status = if theta_d.is_some() && theta_s.is_some() {
        TransitionStatus::Ok
    } else {
        TransitionStatus::OutOfRegime
    };
    TransitionPoint {
        m1,
        theta_d,
        theta_s,
        status,
    }
}

/// Scans (90, 180) degrees for a sign change of `f` (skipping invalid
/// stretches) and bisects to 1e-8 degrees.
fn bracketed_root<F: Fn(f64) -> f64>(f: F) -> Option<f64> {
    let lo = std::f64::consts::FRAC_PI_2 * (1.0 + 1e-9);
    let hi = std::f64::consts::PI * (1.0 - 1e-9);
    let n = 720;
    // scan downward from the flat-wall side so the root adjacent to the
    // regular-reflection regime is found first
    let mut prev: Option<(f64, f64)> = None;
    for k in (0..=n).rev() {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let fx = f(x);
        if !fx.is_finite() {
            prev = None;
            continue;
        }
        if let Some((px, pf)) = prev {
            if pf * fx < 0.0 {
                return bisect(&f, px, x, 1e-8f64.to_radians()).ok();
            }
        }
        prev = Some((x, fx));
    }
    None
}

/// CSV dump: `M1,theta_d_deg,theta_s_deg,status`.
pub fn write_transition_csv(pts: &[TransitionPoint], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "M1,theta_d_deg,theta_s_deg,status")?;
    for p in pts {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{:.10}", x.to_degrees()),
            None => "nan".into(),
        };
        let status = match p.status {
            TransitionStatus::Ok => "ok",
            TransitionStatus::OutOfRegime => "out-of-regime",
        };
        writeln!(
            w,
            "{:.10},{},{},{}",
            p.m1,
            fmt(p.theta_d),
            fmt(p.theta_s),
            status
        )?;
    }
    Ok(())
}
