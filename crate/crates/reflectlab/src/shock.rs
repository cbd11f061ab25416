//! Oblique-shock closure for self-similar potential flow: mass flux plus
//! Bernoulli jump, admissibility, the shock-condition residual `g` and the
//! polar-normal vector `g_v`, with weak/strong type classification.

use crate::error::{Error, Result};
use crate::gas::{pi_fn, pi_inv, sound_speed, GasConstants, ThermoState, Vec2};
use crate::solve::bisect;
use serde::{Deserialize, Serialize};

/// Relative tolerance below which `g_v . z_d` counts as critical-type.
pub const CRITICAL_TOL: f64 = 1e-10;

/// Rotate a vector 90 degrees counterclockwise.
pub fn rot90ccw(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// 2d cross product `a x b`.
pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A constant flow state together with its velocity potential,
/// `psi(xi) = psi0 + v . xi`. Self-consistency with the pseudo-potential
/// density relation requires `psi0 = -pi(rho) - |v|^2 / 2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstantState {
    pub rho: f64,
    pub c: f64,
    pub velocity: Vec2,
    pub psi0: f64,
}

impl ConstantState {
    /// Builds the unique self-consistent constant state with the given
    /// density and velocity.
    pub fn consistent(rho: f64, velocity: Vec2, consts: &GasConstants) -> Result<Self> {
        Ok(Self {
            rho,
            c: sound_speed(rho, consts)?,
            velocity,
            psi0: -pi_fn(rho, consts)? - 0.5 * velocity.norm_squared(),
        })
    }

    pub fn psi(&self, xi: Vec2) -> f64 {
        self.psi0 + self.velocity.dot(&xi)
    }

    /// Pseudo-velocity `z = v - xi` at a point.
    pub fn pseudo_velocity(&self, xi: Vec2) -> Vec2 {
        self.velocity - xi
    }

    /// Pseudo-Mach number `L = |v - xi| / c` at a point.
    pub fn pseudo_mach(&self, xi: Vec2) -> f64 {
        self.pseudo_velocity(xi).norm() / self.c
    }

    /// The thermodynamic state, dropping the potential offset.
    pub fn state(&self) -> ThermoState {
        ThermoState {
            rho: self.rho,
            c: self.c,
            velocity: self.velocity,
        }
    }
}

/// Result of the scalar normal-jump solve.
#[derive(Debug, Clone, Copy)]
pub struct NormalJump {
    pub rho_d: f64,
    pub vn_d: f64,
    /// True when the upstream normal speed is sonic or subsonic and the
    /// trivial (vanishing) solution is returned.
    pub vanishing: bool,
}

/// Solves the mass + Bernoulli jump for the compressive root: given upstream
/// density and normal speed, returns downstream density and normal speed with
/// `rho_d > rho_u`. The tangential speed is unchanged by the jump.
pub fn downstream_from_normal_velocity(
    rho_u: f64,
    vn_u: f64,
    consts: &GasConstants,
) -> Result<NormalJump> {
    let c_u = sound_speed(rho_u, consts)?;
    if vn_u <= c_u {
        return Ok(NormalJump {
            rho_d: rho_u,
            vn_d: vn_u,
            vanishing: true,
        });
    }
    let bernoulli = pi_fn(rho_u, consts)? + 0.5 * vn_u * vn_u;
    // stagnation bound: pi(rho) alone exhausts the Bernoulli constant
    let rho_max = pi_inv(bernoulli, consts)?;
    let flux = rho_u * vn_u;
    let f = |rho: f64| {
        pi_fn(rho, consts).unwrap() + 0.5 * (flux / rho).powi(2) - bernoulli
    };
    // f < 0 just above rho_u (supersonic upstream), f > 0 at the stagnation
    // bound; the offset scales with shock strength so the residual at `lo`
    // stays above roundoff even for near-vanishing shocks (the compressive
    // root sits near 4 eps / (gamma + 1) relative to rho_u)
    let eps = vn_u / c_u - 1.0;
    let lo = rho_u * (1.0 + 0.1 * eps.min(1.0)).max(rho_u * (1.0 + 1e-13));
    if f(lo) >= 0.0 {
        // jump too weak to resolve; treat as vanishing
        return Ok(NormalJump {
            rho_d: rho_u,
            vn_d: vn_u,
            vanishing: true,
        });
    }
    let mut rho_d = bisect(f, lo, rho_max, 1e-14 * rho_max)?;
    // Newton polish
    for _ in 0..50 {
        let c2 = sound_speed(rho_d, consts)?.powi(2);
        let fd = c2 / rho_d - flux * flux / rho_d.powi(3);
        if fd == 0.0 {
            break;
        }
        let step = f(rho_d) / fd;
        let next = rho_d - step;
        if next <= rho_u || next > rho_max {
            break;
        }
        rho_d = next;
        if step.abs() < 1e-16 * rho_d {
            break;
        }
    }
    if !(rho_d > rho_u) {
        return Err(Error::NoCompressiveRoot(format!(
            "rho_u = {rho_u}, vn_u = {vn_u}"
        )));
    }
    Ok(NormalJump {
        rho_d,
        vn_d: flux / rho_d,
        vanishing: false,
    })
}

/// Reverse jump: given the downstream density and (subsonic) normal speed,
/// recovers the expansive upstream root with `rho_u < rho_d`.
pub fn upstream_from_normal_velocity(
    rho_d: f64,
    vn_d: f64,
    consts: &GasConstants,
) -> Result<NormalJump> {
    let c_d = sound_speed(rho_d, consts)?;
    if vn_d <= 0.0 {
        return Err(Error::Inadmissible(format!(
            "downstream normal speed must be positive, got {vn_d}"
        )));
    }
    if vn_d >= c_d {
        return Err(Error::Inadmissible(
            "downstream normal speed not subsonic; no expansive upstream root".into(),
        ));
    }
    let bernoulli = pi_fn(rho_d, consts)? + 0.5 * vn_d * vn_d;
    let flux = rho_d * vn_d;
    let f = |rho: f64| pi_fn(rho, consts).unwrap() + 0.5 * (flux / rho).powi(2) - bernoulli;
    // f(rho_d) = 0, decreasing just below rho_d, -> +inf as rho -> 0
    let hi = rho_d * (1.0 - 1e-13);
    if f(hi) >= 0.0 {
        return Err(Error::NoCompressiveRoot("degenerate reverse jump".into()));
    }
    let mut lo = rho_d;
    loop {
        lo *= 0.5;
        if f(lo) > 0.0 {
            break;
        }
        if lo < 1e-300 {
            return Err(Error::NoCompressiveRoot("no expansive root found".into()));
        }
    }
    let rho_u = bisect(f, lo, hi, 1e-15 * rho_d)?;
    Ok(NormalJump {
        rho_d: rho_u,
        vn_d: flux / rho_u,
        vanishing: false,
    })
}

/// Shock normal from the velocity jump, `n = (v_u - v_d)/|v_u - v_d|`.
pub fn normal_from_jump(v_u: Vec2, v_d: Vec2) -> Result<Vec2> {
    let jump = v_u - v_d;
    let norm = jump.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateShock);
    }
    Ok(jump / norm)
}

/// Weak/strong/critical classification per the sign of `g_v . z_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShockType {
    Weak,
    Strong,
    Critical,
}

impl ShockType {
    pub fn tag(&self) -> char {
        match self {
            ShockType::Weak => 'W',
            ShockType::Strong => 'S',
            ShockType::Critical => 'C',
        }
    }
}

/// A resolved oblique shock at a point in self-similar coordinates. The
/// normal is oriented so the upstream normal pseudo-velocity is positive;
/// the tangent is 90 degrees counterclockwise from the normal.
#[derive(Debug, Clone, Copy)]
pub struct ObliqueShock {
    pub upstream: ThermoState,
    pub downstream: ThermoState,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub zn_u: f64,
    pub zn_d: f64,
    pub zt: f64,
    pub location: Vec2,
}

impl ObliqueShock {
    /// Resolves the shock with the given upstream state, location and normal
    /// direction (sign of the normal is fixed so `z^n_u > 0`).
    pub fn from_upstream_normal(
        upstream: ThermoState,
        location: Vec2,
        normal: Vec2,
        consts: &GasConstants,
    ) -> Result<Self> {
        let z_u = upstream.velocity - location;
        let mut n = normal / normal.norm();
        if z_u.dot(&n) < 0.0 {
            n = -n;
        }
        let t = rot90ccw(n);
        let zn_u = z_u.dot(&n);
        let zt = z_u.dot(&t);
        let jump = downstream_from_normal_velocity(upstream.rho, zn_u, consts)?;
        let v_d = location + jump.vn_d * n + zt * t;
        let downstream = ThermoState::new(jump.rho_d, v_d, consts)?;
        Ok(Self {
            upstream,
            downstream,
            normal: n,
            tangent: t,
            zn_u,
            zn_d: jump.vn_d,
            zt,
            location,
        })
    }

    /// Downstream pseudo-velocity `z_d` at the shock location.
    pub fn z_down(&self) -> Vec2 {
        self.zn_d * self.normal + self.zt * self.tangent
    }

    /// Upstream pseudo-velocity at the shock location.
    pub fn z_up(&self) -> Vec2 {
        self.zn_u * self.normal + self.zt * self.tangent
    }

    /// Downstream pseudo-Mach number.
    pub fn downstream_pseudo_mach(&self) -> f64 {
        self.z_down().norm() / self.downstream.c
    }

    /// True when the downstream side is subsonic (pseudo-Mach below one).
    pub fn is_transonic(&self) -> bool {
        self.downstream_pseudo_mach() < 1.0
    }

    pub fn g_gradient_v(&self) -> Vec2 {
        g_vec_v(
            self.downstream.rho,
            self.downstream.c,
            self.zn_u,
            self.zn_d,
            self.zt,
            self.normal,
            self.tangent,
        )
    }

    pub fn classify(&self) -> ShockType {
        let gv = self.g_gradient_v();
        let zd = self.z_down();
        let s = gv.dot(&zd);
        if s.abs() < CRITICAL_TOL * gv.norm() * zd.norm() {
            ShockType::Critical
        } else if s < 0.0 {
            ShockType::Weak
        } else {
            ShockType::Strong
        }
    }
}

/// Normal of the shock polar,
/// `g_v = rho [ (1 - (z^n_d/c)^2) n - z^t (1/z^n_u + z^n_d/c^2) t ]`,
/// with `rho`, `c` evaluated downstream.
pub fn g_vec_v(
    rho_d: f64,
    c_d: f64,
    zn_u: f64,
    zn_d: f64,
    zt: f64,
    n: Vec2,
    t: Vec2,
) -> Vec2 {
    assert!(zn_u != 0.0, "g_v undefined for a non-shock configuration");
    let c2 = c_d * c_d;
    rho_d * ((1.0 - (zn_d / c_d).powi(2)) * n - zt * (1.0 / zn_u + zn_d / c2) * t)
}

/// Shock-condition residual of the downstream data `(grad psi, psi)` at `xi`
/// against a constant upstream state:
/// `g = (rho grad(chi) - rho_I grad(chi_I)) . (grad psi_I - grad psi)/|...|`.
pub fn g_residual(
    grad_psi: Vec2,
    psi: f64,
    xi: Vec2,
    upstream: &ConstantState,
    consts: &GasConstants,
) -> Result<f64> {
    let jump = upstream.velocity - grad_psi;
    let jn = jump.norm();
    if jn < 1e-14 * (1.0 + upstream.velocity.norm()) {
        return Err(Error::DegenerateShock);
    }
    let chi = psi - 0.5 * xi.norm_squared();
    let grad_chi = grad_psi - xi;
    let arg = -chi - 0.5 * grad_chi.norm_squared();
    if arg <= 0.0 {
        return Err(Error::Vacuum(arg));
    }
    let rho = pi_inv(arg, consts)?;
    let grad_chi_up = upstream.velocity - xi;
    Ok((rho * grad_chi - upstream.rho * grad_chi_up).dot(&(jump / jn)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g14() -> GasConstants {
        GasConstants::nondim(1.4).unwrap()
    }

    #[test]
    fn sonic_upstream_is_vanishing() {
        let c = g14();
        let j = downstream_from_normal_velocity(1.0, 1.0, &c).unwrap();
        assert!(j.vanishing);
        assert_eq!(j.rho_d, 1.0);
        assert_eq!(j.vn_d, 1.0);
    }

    #[test]
    fn mach2_normal_shock_matches_oracle() {
        let c = g14();
        let j = downstream_from_normal_velocity(1.0, 2.0, &c).unwrap();
        // residual of the mass+Bernoulli system
        let b = pi_fn(1.0, &c).unwrap() + 2.0;
        let res = pi_fn(j.rho_d, &c).unwrap() + 0.5 * j.vn_d * j.vn_d - b;
        assert!(res.abs() < 1e-12, "residual {res:e}");
        assert_relative_eq!(j.rho_d * j.vn_d, 2.0, max_relative = 1e-12);
        assert!(j.vn_d <= 2.0 && j.rho_d >= 1.0);
    }

    #[test]
    fn reverse_jump_round_trip() {
        let c = g14();
        let j = downstream_from_normal_velocity(1.0, 2.0, &c).unwrap();
        let back = upstream_from_normal_velocity(j.rho_d, j.vn_d, &c).unwrap();
        assert_relative_eq!(back.rho_d, 1.0, max_relative = 1e-10);
        assert_relative_eq!(back.vn_d, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn normal_from_jump_cases() {
        let n = normal_from_jump(Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(n.x, 1.0);
        assert_relative_eq!(n.y, 0.0);
        let n = normal_from_jump(Vec2::new(1.0, 1.0), Vec2::zeros()).unwrap();
        assert_relative_eq!(n.x, 2f64.sqrt() / 2.0);
        assert_relative_eq!(n.y, 2f64.sqrt() / 2.0);
        assert!(normal_from_jump(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)).is_err());
    }

    proptest! {
        #[test]
        fn normal_from_jump_rotation_equivariant(omega in -3.0f64..3.0) {
            let vu = Vec2::new(2.0, 0.3);
            let vd = Vec2::new(1.1, 0.3);
            let rot = nalgebra::Rotation2::new(omega);
            let n = normal_from_jump(vu, vd).unwrap();
            let nr = normal_from_jump(rot * vu, rot * vd).unwrap();
            let expect = rot * n;
            prop_assert!((nr - expect).norm() < 1e-12);
        }
    }

    fn steady_shock(mu: f64, beta: f64, consts: &GasConstants) -> ObliqueShock {
        let up = ThermoState::new(1.0, Vec2::new(mu, 0.0), consts).unwrap();
        let n = Vec2::new(beta.cos(), beta.sin());
        ObliqueShock::from_upstream_normal(up, Vec2::zeros(), n, consts).unwrap()
    }

    #[test]
    fn constructed_shock_invariants() {
        let c = g14();
        let s = steady_shock(2.0, 0.4, &c);
        assert_relative_eq!(s.normal.norm(), 1.0, max_relative = 1e-14);
        assert!((s.tangent - rot90ccw(s.normal)).norm() < 1e-14);
        // tangential continuity and mass flux
        let zu = s.z_up();
        let zd = s.z_down();
        assert!((zu.dot(&s.tangent) - zd.dot(&s.tangent)).abs() < 1e-12);
        assert_relative_eq!(
            s.upstream.rho * s.zn_u,
            s.downstream.rho * s.zn_d,
            max_relative = 1e-10
        );
        assert!(s.zn_u >= s.zn_d);
    }

    #[test]
    fn g_residual_self_consistency() {
        let c = g14();
        let s = steady_shock(2.0, 0.4, &c);
        let up = ConstantState::consistent(1.0, s.upstream.velocity, &c).unwrap();
        // downstream potential value at the shock point equals upstream's
        let psi = up.psi(s.location);
        let r = g_residual(s.downstream.velocity, psi, s.location, &up, &c).unwrap();
        assert!(r.abs() < 1e-10, "residual {r:e}");
        // zero jump triggers the degenerate-shock guard
        assert!(g_residual(up.velocity, psi, s.location, &up, &c).is_err());
    }

    #[test]
    fn g_residual_monotone_in_downstream_density() {
        // perturbing the downstream toward higher density must move g in the
        // direction of the finite-difference slope
        let c = g14();
        let s = steady_shock(2.0, 0.3, &c);
        let up = ConstantState::consistent(1.0, s.upstream.velocity, &c).unwrap();
        let psi0 = up.psi(s.location);
        // emulate a density change by scaling the downstream normal velocity
        // (mass flux fixed): vn -> vn * (1 - eps)
        let eval = |eps: f64| {
            let vd = s.location + (1.0 - eps) * s.zn_d * s.normal + s.zt * s.tangent;
            g_residual(vd, psi0, s.location, &up, &c).unwrap()
        };
        let fd = (eval(1e-6) - eval(-1e-6)) / 2e-6;
        let g1 = eval(0.01);
        assert_eq!(g1.signum(), (fd * 0.01).signum());
    }

    #[test]
    fn g_gradient_matches_finite_difference() {
        let c = g14();
        let s = steady_shock(2.0, 0.35, &c);
        let up = ConstantState::consistent(1.0, s.upstream.velocity, &c).unwrap();
        let psi0 = up.psi(s.location);
        let h = 1e-6;
        let mut fd = Vec2::zeros();
        for k in 0..2 {
            let mut dv = Vec2::zeros();
            dv[k] = h;
            let p = g_residual(s.downstream.velocity + dv, psi0, s.location, &up, &c).unwrap();
            let m = g_residual(s.downstream.velocity - dv, psi0, s.location, &up, &c).unwrap();
            fd[k] = (p - m) / (2.0 * h);
        }
        let gv = s.g_gradient_v();
        assert!(
            (fd - gv).norm() <= 1e-6 * gv.norm(),
            "fd {fd:?} vs gv {gv:?}"
        );
    }

    #[test]
    fn pseudo_normal_gv_parallel_to_n() {
        let c = g14();
        let s = steady_shock(2.0, 0.0, &c);
        assert_eq!(s.zt, 0.0);
        let gv = s.g_gradient_v();
        assert!(gv.y.abs() < 1e-14);
        // transonic downstream: coefficient of n positive
        assert!(s.zn_d < s.downstream.c);
        assert!(gv.x > 0.0);
    }

    #[test]
    fn galilean_invariance() {
        let c = g14();
        let s = steady_shock(2.0, 0.45, &c);
        let w = Vec2::new(0.7, -0.4);
        let up2 = ThermoState::new(1.0, s.upstream.velocity - w, &c).unwrap();
        let s2 =
            ObliqueShock::from_upstream_normal(up2, s.location - w, s.normal, &c).unwrap();
        assert!((s.z_down() - s2.z_down()).norm() < 1e-12);
        assert!((s.g_gradient_v() - s2.g_gradient_v()).norm() < 1e-12);
        assert_eq!(s.classify(), s2.classify());
    }

    #[test]
    fn supersonic_downstream_is_weak_type() {
        let c = g14();
        // a grazing shock keeps the downstream supersonic
        let s = steady_shock(3.0, 1.2, &c);
        assert!(s.downstream_pseudo_mach() >= 1.0);
        assert_eq!(s.classify(), ShockType::Weak);
    }
}
