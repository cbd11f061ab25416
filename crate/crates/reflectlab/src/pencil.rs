//! Operator-pencil spectra of frozen-coefficient corner problems: normalize
//! the top-order interior operator to the Laplacian, read off the edge and
//! boundary-operator angles, and enumerate the pencil eigenvalues
//! `beta_l = beta_0 + pi l / (phi_2 - phi_1)` with
//! `beta_0 = -(gamma_2 - gamma_1)/(phi_2 - phi_1)`.

use crate::error::{Error, Result};
use crate::gas::Vec2;
use crate::reflection::TrivialRR;
use crate::shock::{cross2, rot90ccw, ShockType};
use nalgebra::Matrix2;
use serde::Serialize;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Frozen-coefficient corner problem: top-order interior matrix and two
/// oblique-derivative boundary operators on edges leaving the corner.
#[derive(Debug, Clone, Copy)]
pub struct CornerProblem {
    /// Symmetric positive-definite top-order coefficient matrix.
    pub interior: Matrix2<f64>,
    /// Unit direction of edge 1, leaving the corner.
    pub edge1_dir: Vec2,
    /// Unit direction of edge 2, leaving the corner.
    pub edge2_dir: Vec2,
    /// Coefficient vector of the boundary operator `g . grad` on edge 1.
    pub bc1: Vec2,
    /// Coefficient vector of the boundary operator on edge 2.
    pub bc2: Vec2,
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerSpectrum {
    pub phi1: f64,
    pub phi2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// `(beta, multiplicity)` sorted ascending.
    pub betas: Vec<(f64, usize)>,
    /// Least nonnegative beta.
    pub beta0: f64,
    /// Next lowest nonnegative beta.
    pub beta1: f64,
}

fn spd_inverse_sqrt(a: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 * a.norm() {
        return Err(Error::Ellipticity("interior matrix not symmetric".into()));
    }
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Ellipticity(format!(
            "interior matrix not positive definite (eigenvalues {:?})",
            eig.eigenvalues.as_slice()
        )));
    }
    let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Linear map `T` with `T a T^t = I`, so the top-order operator becomes the
/// Laplacian under `y = T x`. The rotation freedom is fixed by mapping edge 2
/// back onto its own direction. Edge directions transform as `e -> T e`
/// (renormalized); boundary-coefficient vectors as `g -> T g`, which keeps
/// the action of `g . grad` on functions unchanged.
pub fn laplacian_normalize(p: &CornerProblem) -> Result<(Matrix2<f64>, CornerProblem)> {
    let s = spd_inverse_sqrt(&p.interior)?;
    let image = s * p.edge2_dir;
    let ang = cross2(image, p.edge2_dir).atan2(image.dot(&p.edge2_dir));
    let rot = Matrix2::new(ang.cos(), -ang.sin(), ang.sin(), ang.cos());
    let t = rot * s;
    let map_dir = |e: Vec2| (t * e).normalize();
    Ok((
        t,
        CornerProblem {
            interior: Matrix2::identity(),
            edge1_dir: map_dir(p.edge1_dir),
            edge2_dir: map_dir(p.edge2_dir),
            bc1: t * p.bc1,
            bc2: t * p.bc2,
        },
    ))
}

/// Counterclockwise angle from `e` to `g`, reduced mod pi (the boundary
/// operator is scale- and sign-invariant).
fn bc_angle(e: Vec2, g: Vec2) -> f64 {
    let mut gamma = cross2(e, g).atan2(e.dot(&g));
    while gamma < 0.0 {
        gamma += std::f64::consts::PI;
    }
    while gamma >= std::f64::consts::PI {
        gamma -= std::f64::consts::PI;
    }
    gamma
}

/// Enumerates the first `count` nonnegative pencil eigenvalues.
pub fn pencil_spectrum(
    phi1: f64,
    phi2: f64,
    gamma1: f64,
    gamma2: f64,
    count: usize,
) -> Result<CornerSpectrum> {
    if phi2 <= phi1 {
        return Err(Error::Domain(format!(
            "edge angles must satisfy phi2 > phi1, got {phi1}, {phi2}"
        )));
    }
    // normalizations: phi1 in [0, 2pi), phi2 in [phi1, phi1 + 2pi),
    // gamma1 in [0, pi), gamma2 in (gamma1 - pi, gamma1]
    let width = phi2 - phi1;
    let phi1 = phi1.rem_euclid(TWO_PI);
    let phi2 = phi1 + width.rem_euclid(TWO_PI);
    let mut gamma1 = gamma1.rem_euclid(std::f64::consts::PI);
    if gamma1 >= std::f64::consts::PI {
        gamma1 = 0.0;
    }
    let mut gamma2 = gamma2;
    while gamma2 > gamma1 {
        gamma2 -= std::f64::consts::PI;
    }
    while gamma2 <= gamma1 - std::f64::consts::PI {
        gamma2 += std::f64::consts::PI;
    }
    let dphi = phi2 - phi1;
    let beta0 = -(gamma2 - gamma1) / dphi;
    let step = std::f64::consts::PI / dphi;
    let betas: Vec<(f64, usize)> = (0..count)
        .map(|l| {
            let b = beta0 + step * l as f64;
            (b, if b.abs() < 1e-14 { 2 } else { 1 })
        })
        .collect();
    let beta1 = beta0 + step;
    Ok(CornerSpectrum {
        phi1,
        phi2,
        gamma1,
        gamma2,
        betas,
        beta0,
        beta1,
    })
}

/// Normalizes a corner problem and computes its spectrum.
pub fn corner_spectrum(p: &CornerProblem, count: usize) -> Result<CornerSpectrum> {
    let (_, q) = laplacian_normalize(p)?;
    let phi1 = q.edge1_dir.y.atan2(q.edge1_dir.x).rem_euclid(TWO_PI);
    let mut phi2 = q.edge2_dir.y.atan2(q.edge2_dir.x).rem_euclid(TWO_PI);
    if phi2 <= phi1 {
        phi2 += TWO_PI;
    }
    let gamma1 = bc_angle(q.edge1_dir, q.bc1);
    let gamma2 = bc_angle(q.edge2_dir, q.bc2);
    pencil_spectrum(phi1, phi2, gamma1, gamma2, count)
}

/// Frozen corner problem at a transonic reflection point: interior
/// `I - c^{-2} z z^t` with `z` the downstream pseudo-velocity, shock edge
/// `Gamma_1` carrying the oblique vector `g_v`, wall edge `Gamma_2` along the
/// downstream pseudo-flow carrying its Neumann normal.
pub fn reflection_corner_problem(
    z_d: Vec2,
    c_d: f64,
    g_v: Vec2,
    shock_tangent: Vec2,
) -> Result<CornerProblem> {
    if z_d.norm() >= c_d {
        return Err(Error::Ellipticity(format!(
            "downstream pseudo-speed {} not below sound speed {c_d}",
            z_d.norm()
        )));
    }
    let interior = Matrix2::identity() - z_d * z_d.transpose() / (c_d * c_d);
    let edge2 = z_d.normalize();
    // orient the shock edge so the wedge (counterclockwise from edge 1 to
    // edge 2) has opening below pi
    let mut edge1 = shock_tangent.normalize();
    let ang = cross2(edge1, edge2).atan2(edge1.dot(&edge2));
    if ang <= 0.0 {
        edge1 = -edge1;
    }
    Ok(CornerProblem {
        interior,
        edge1_dir: edge1,
        edge2_dir: edge2,
        bc1: g_v,
        bc2: rot90ccw(edge2),
    })
}

/// `beta_0` at the reflection corner of a trivial reflection, with a
/// consistency check of the shock-type/exponent windows.
pub fn reflection_corner_beta0(trr: &TrivialRR) -> Result<(f64, ShockType)> {
    let shock = &trr.reflected;
    let problem = reflection_corner_problem(
        shock.z_down(),
        shock.downstream.c,
        shock.g_gradient_v(),
        shock.tangent,
    )?;
    let spec = corner_spectrum(&problem, 4)?;
    let ty = shock.classify();
    let consistent = match ty {
        ShockType::Weak => spec.beta0 > 1.0 - 1e-8,
        ShockType::Critical => (spec.beta0 - 1.0).abs() < 1e-6,
        ShockType::Strong => spec.beta0 > 0.0 && spec.beta0 < 1.0 + 1e-8,
    };
    if !consistent {
        return Err(Error::Diagnostic(format!(
            "shock type {ty:?} inconsistent with corner exponent beta0 = {}",
            spec.beta0
        )));
    }
    Ok((spec.beta0, ty))
}

/// JSON dump of a spectrum (angles in radians).
pub fn spectrum_json(spec: &CornerSpectrum) -> serde_json::Value {
    serde_json::json!({
        "phi1": spec.phi1,
        "phi2": spec.phi2,
        "gamma1": spec.gamma1,
        "gamma2": spec.gamma2,
        "betas": spec.betas.iter().map(|(b, m)| serde_json::json!({"beta": b, "mult": m})).collect::<Vec<_>>(),
    })
}
