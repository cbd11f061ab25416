//! Shock-polar sweeps for a fixed upstream state: downstream velocity as a
//! function of the normal angle, the critical and sonic deflection angles,
//! deflection solves with weak/strong roots, and a strict-convexity
//! certificate.

use crate::error::{Error, Result};
use crate::gas::{GasConstants, ThermoState, Vec2};
use crate::shock::{cross2, ObliqueShock, ShockType};
use crate::solve::{bisect, golden_max};
use serde::Serialize;
use std::io::Write;

/// One point of the shock polar.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolarSample {
    pub beta: f64,
    pub v_d: Vec2,
    pub rho_d: f64,
    pub c_d: f64,
    pub tau: f64,
    pub m_d: f64,
    pub shock_type: ShockType,
}

/// Sampled shock polar for upstream `v_u = (M_u c_u, 0)` at unit density.
#[derive(Debug, Clone)]
pub struct PolarCurve {
    pub upstream: ThermoState,
    pub samples: Vec<PolarSample>,
    pub beta_max: f64,
}

fn upstream_state(mu: f64, consts: &GasConstants) -> Result<ThermoState> {
    if mu <= 1.0 {
        return Err(Error::Domain(format!(
            "upstream Mach number must exceed 1, got {mu}"
        )));
    }
    let c_u = crate::gas::sound_speed(consts.rho0, consts)?;
    ThermoState::new(consts.rho0, Vec2::new(mu * c_u, 0.0), consts)
}

pub fn beta_max(mu: f64) -> f64 {
    (1.0 / mu).acos()
}

/// Resolves the polar point at normal angle `beta`; the downstream state is
/// obtained from the normal jump in the rotated frame and rotated back.
pub fn polar_point(mu: f64, beta: f64, consts: &GasConstants) -> Result<PolarSample> {
    let up = upstream_state(mu, consts)?;
    let bmax = beta_max(mu);
    if beta.abs() > bmax {
        return Err(Error::Inadmissible(format!(
            "|beta| = {} exceeds arccos(1/M_u) = {}",
            beta.abs(),
            bmax
        )));
    }
    let n = Vec2::new(beta.cos(), beta.sin());
    let shock = ObliqueShock::from_upstream_normal(up, Vec2::zeros(), n, consts)?;
    Ok(sample_from_shock(&shock, &up))
}

fn sample_from_shock(shock: &ObliqueShock, up: &ThermoState) -> PolarSample {
    let v_d = shock.downstream.velocity;
    // deflection signed so that beta > 0 gives tau > 0
    let tau = cross2(v_d, up.velocity).atan2(up.velocity.dot(&v_d));
    PolarSample {
        beta: shock.normal.y.atan2(shock.normal.x),
        v_d,
        rho_d: shock.downstream.rho,
        c_d: shock.downstream.c,
        tau,
        m_d: v_d.norm() / shock.downstream.c,
        shock_type: shock.classify(),
    }
}

impl PolarCurve {
    /// Samples the polar at `n` Chebyshev-clustered interior angles.
    pub fn sample(mu: f64, n: usize, consts: &GasConstants) -> Result<Self> {
        let upstream = upstream_state(mu, consts)?;
        let bmax = beta_max(mu);
        let mut samples = Vec::with_capacity(n);
        for k in 1..=n {
            let beta = bmax * (std::f64::consts::PI * k as f64 / (n as f64 + 1.0)).cos();
            samples.push(polar_point(mu, beta, consts)?);
        }
        Ok(Self {
            upstream,
            samples,
            beta_max: bmax,
        })
    }

    /// CSV dump: `beta_rad,tau_rad,vdx,vdy,rhoD,MD,type`.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "beta_rad,tau_rad,vdx,vdy,rhoD,MD,type")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.beta,
                s.tau,
                s.v_d.x,
                s.v_d.y,
                s.rho_d,
                s.m_d,
                s.shock_type.tag()
            )?;
        }
        Ok(())
    }
}

fn tau_of_beta(mu: f64, consts: &GasConstants) -> impl Fn(f64) -> f64 + '_ {
    move |beta| polar_point(mu, beta, consts).map(|s| s.tau).unwrap_or(0.0)
}

/// Maximal deflection `tau_*` and the angle `beta_*` attaining it (upper half).
pub fn critical_angle(mu: f64, consts: &GasConstants) -> Result<(f64, f64)> {
    upstream_state(mu, consts)?;
    let bmax = beta_max(mu);
    let tau = tau_of_beta(mu, consts);
    let (beta_star, tau_star) = golden_max(tau, 0.0, bmax * (1.0 - 1e-12), 1e-13);
    Ok((tau_star, beta_star))
}

/// Sonic deflection `tau_s`: the weak-branch angle at which the downstream
/// Mach number crosses one.
pub fn sonic_angle(mu: f64, consts: &GasConstants) -> Result<(f64, f64)> {
    upstream_state(mu, consts)?;
    let bmax = beta_max(mu);
    let md = |beta: f64| {
        polar_point(mu, beta, consts)
            .map(|s| s.m_d - 1.0)
            .unwrap_or(f64::NAN)
    };
    let beta_s = bisect(md, 1e-12, bmax * (1.0 - 1e-12), 1e-14)?;
    let tau_s = polar_point(mu, beta_s, consts)?.tau;
    Ok((tau_s, beta_s))
}

/// Both roots of the deflection equation `tau(beta) = tau`.
#[derive(Debug, Clone)]
pub struct DeflectionRoots {
    pub weak: PolarSample,
    pub strong: PolarSample,
}

/// Solves `tau(beta) = tau` for the weak and strong roots. Errors when
/// `|tau|` exceeds the critical deflection.
pub fn deflection_solve(mu: f64, tau: f64, consts: &GasConstants) -> Result<DeflectionRoots> {
    let (tau_star, beta_star) = critical_angle(mu, consts)?;
    let sgn = if tau < 0.0 { -1.0 } else { 1.0 };
    let ta = tau.abs();
    if ta > tau_star * (1.0 + 1e-12) + 1e-14 {
        return Err(Error::Inadmissible(format!(
            "deflection {ta} exceeds critical angle {tau_star}: local RR impossible"
        )));
    }
    let bmax = beta_max(mu);
    if ta >= tau_star {
        let s = polar_point(mu, sgn * beta_star, consts)?;
        return Ok(DeflectionRoots {
            weak: s,
            strong: s,
        });
    }
    let f = |beta: f64| {
        polar_point(mu, beta, consts)
            .map(|s| s.tau - ta)
            .unwrap_or(f64::NAN)
    };
    let beta_weak = bisect(f, beta_star, bmax, 1e-15)?;
    let beta_strong = bisect(f, 0.0, beta_star, 1e-15)?;
    Ok(DeflectionRoots {
        weak: polar_point(mu, sgn * beta_weak, consts)?,
        strong: polar_point(mu, sgn * beta_strong, consts)?,
    })
}

/// Convexity quantities at one polar angle: `q = n - A t` with
/// `A = v^t (1/v^n_u + M^n_d/c_d) / (1 - (M^n_d)^2)`.
fn polar_q(mu: f64, beta: f64, consts: &GasConstants) -> Result<(Vec2, f64)> {
    let up = upstream_state(mu, consts)?;
    let n = Vec2::new(beta.cos(), beta.sin());
    let shock = ObliqueShock::from_upstream_normal(up, Vec2::zeros(), n, consts)?;
    let mnd = shock.zn_d / shock.downstream.c;
    let a = shock.zt * (1.0 / shock.zn_u + mnd / shock.downstream.c) / (1.0 - mnd * mnd);
    Ok((shock.normal - a * shock.tangent, a))
}

/// Convexity certificate `q x d_beta q` at one angle (central differences).
pub fn convexity_certificate(mu: f64, beta: f64, consts: &GasConstants) -> Result<f64> {
    // with dn/dbeta = t and dt/dbeta = -n the cross product collapses to
    // q x d_beta q = 1 + A^2 - d_beta A
    let (q, a) = polar_q(mu, beta, consts)?;
    debug_assert!(
        (q - (Vec2::new(beta.cos(), beta.sin()) - a * rot90ccw_dir(beta))).norm()
            < 1e-12 * (1.0 + a.abs())
    );
    Ok(1.0 + a * a - a_slope(mu, beta, consts)?)
}

fn rot90ccw_dir(beta: f64) -> Vec2 {
    Vec2::new(-beta.sin(), beta.cos())
}

/// `d_beta A` at one angle, exposed for the monotonicity check.
pub fn a_slope(mu: f64, beta: f64, consts: &GasConstants) -> Result<f64> {
    let bmax = beta_max(mu);
    let h = (1e-6 * bmax).min(0.1 * (bmax - beta.abs()).max(f64::MIN_POSITIVE));
    let (_, ap) = polar_q(mu, beta + h, consts)?;
    let (_, am) = polar_q(mu, beta - h, consts)?;
    Ok((ap - am) / (2.0 * h))
}

/// Minimum of the convexity certificate over the curve's sample angles
/// (endpoints trimmed away from the vanishing-shock limit).
pub fn convexity_scan(curve: &PolarCurve, consts: &GasConstants) -> Result<f64> {
    let mu = curve.upstream.mach();
    let cut = curve.beta_max * (1.0 - 1e-4);
    let mut min = f64::INFINITY;
    for s in &curve.samples {
        if s.beta.abs() >= cut {
            continue;
        }
        let c = convexity_certificate(mu, s.beta, consts)?;
        if c < min {
            min = c;
        }
    }
    Ok(min)
}
