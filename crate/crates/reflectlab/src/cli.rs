//! Command-line front end: parameter parsing, experiment orchestration, and
//! CSV/JSON emission.  Angles are taken in degrees on the command line and
//! written in radians (or explicitly suffixed columns) in files; every file
//! starts with a header recording version, gas exponent, and tolerances, so
//! identical configurations reproduce byte-identical artifacts.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gas::GasConstants;
use crate::linsolve::{
    assemble_linearized, default_corner_window, fit_field_corner_exponent, kernel_compute,
    write_field_csv,
};
use crate::mesh::TriangleMesh;
use crate::pencil::{pencil_spectrum, reflection_corner_beta0, spectrum_json};
use crate::perturb::newton_solve;
use crate::polar::{critical_angle, sonic_angle, PolarCurve};
use crate::reflection::{params_from_core, transition_curves, trivial_rr_from_core, write_transition_csv};
use crate::shock::ShockType;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "reflectlab", version, about = "Shock polars, regular reflections, and their perturbations in self-similar potential flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file for the artifact (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaseArgs {
    /// Polytropic exponent.
    #[arg(long, default_value_t = 1.4)]
    gamma: f64,
    /// Core density behind the reflected shock.
    #[arg(long, default_value_t = 1.5)]
    rho3: f64,
    /// Abscissa of the reflected-shock foot (negative).
    #[arg(long = "xi-a", default_value_t = -0.4, allow_hyphen_values = true)]
    xi_a: f64,
    /// Wall angle in degrees, in (90, 180).
    #[arg(long = "theta-deg", default_value_t = 120.0)]
    theta_deg: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a shock polar and report the critical and sonic deflections.
    Polar {
        /// Upstream Mach number (> 1).
        #[arg(long = "Mu")]
        mu: f64,
        #[arg(long, default_value_t = 1.4)]
        gamma: f64,
        /// Number of polar samples.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Detachment and sonic wall-angle curves over a Mach-number grid.
    Transition {
        #[arg(long, default_value_t = 1.4)]
        gamma: f64,
        /// Incident-shock angle in degrees.
        #[arg(long = "alpha-deg", default_value_t = 0.0)]
        alpha_deg: f64,
        #[arg(long = "m1-min", default_value_t = 1.6)]
        m1_min: f64,
        #[arg(long = "m1-max", default_value_t = 4.0)]
        m1_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Build and validate a trivial regular reflection.
    Trivial {
        #[command(flatten)]
        base: BaseArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Corner operator-pencil spectrum for two oblique-derivative edges.
    Pencil {
        /// First edge angle in degrees.
        #[arg(long = "phi1-deg")]
        phi1_deg: f64,
        /// Second edge angle in degrees.
        #[arg(long = "phi2-deg")]
        phi2_deg: f64,
        /// Oblique angle of the first boundary operator in degrees (90 = Neumann).
        #[arg(long = "gamma1-deg", default_value_t = 90.0)]
        gamma1_deg: f64,
        /// Oblique angle of the second boundary operator in degrees.
        #[arg(long = "gamma2-deg", default_value_t = 90.0)]
        gamma2_deg: f64,
        /// Shorthand for Neumann conditions on both edges.
        #[arg(long)]
        neumann: bool,
        /// Number of exponents to report.
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Linearized kernel field, certificate gap, and corner exponent fit.
    Linsolve {
        #[command(flatten)]
        base: BaseArgs,
        /// Approximate chart spacing; the mesh uses about 1/h divisions per side.
        #[arg(long = "mesh-h", default_value_t = 1.0 / 32.0)]
        mesh_h: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Newton continuation to a perturbed reflection; emits a JSON run report.
    Perturb {
        #[command(flatten)]
        base: BaseArgs,
        /// Wall-angle perturbation in degrees.
        #[arg(long = "dtheta-deg", default_value_t = 0.0, allow_hyphen_values = true)]
        dtheta_deg: f64,
        /// Inflow pseudo-Mach perturbation.
        #[arg(long = "dm1", default_value_t = 0.0, allow_hyphen_values = true)]
        dm1: f64,
        /// Incident-shock angle perturbation in degrees.
        #[arg(long = "dalpha-deg", default_value_t = 0.0, allow_hyphen_values = true)]
        dalpha_deg: f64,
        #[arg(long = "mesh-h", default_value_t = 1.0 / 16.0)]
        mesh_h: f64,
        /// Convergence tolerance on the scaled residual.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long = "max-iter", default_value_t = 30)]
        max_iter: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn emit(output: &OutputArgs, contents: &str) -> Result<()> {
    match &output.out {
        Some(path) => {
            let mut f = File::create(path)?;
            f.write_all(contents.as_bytes())?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn header(gamma: f64, tol: f64) -> String {
    format!("# reflectlab {VERSION} gamma={gamma} tol={tol:e}\n")
}

fn divisions(mesh_h: f64) -> Result<usize> {
    if !(mesh_h.is_finite() && mesh_h > 0.0) {
        return Err(Error::Domain(format!("mesh spacing must be positive, got {mesh_h}")));
    }
    Ok(((1.0 / mesh_h).round() as usize).clamp(8, 128))
}

fn type_letter(t: ShockType) -> char {
    match t {
        ShockType::Weak => 'W',
        ShockType::Strong => 'S',
        ShockType::Critical => 'C',
    }
}

fn run_command(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Polar { mu, gamma, samples, output } => {
            let consts = GasConstants::nondim(*gamma)?;
            let curve = PolarCurve::sample(*mu, *samples, &consts)?;
            let (tau_star, _) = critical_angle(*mu, &consts)?;
            let (tau_s, _) = sonic_angle(*mu, &consts)?;
            let mut s = header(*gamma, 0.0);
            s.push_str("beta_rad,tau_rad,vdx,vdy,rhoD,MD,type\n");
            for p in &curve.samples {
                s.push_str(&format!(
                    "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                    p.beta, p.tau, p.v_d.x, p.v_d.y, p.rho_d, p.m_d,
                    type_letter(p.shock_type)
                ));
            }
            emit(output, &s)?;
            println!(
                "polar: Mu={mu} gamma={gamma} tau_star_deg={:.6} tau_s_deg={:.6}",
                tau_star.to_degrees(),
                tau_s.to_degrees()
            );
        }
        Command::Transition { gamma, alpha_deg, m1_min, m1_max, points, output } => {
            if *points < 2 {
                return Err(Error::Domain("need at least 2 grid points".into()));
            }
            let grid: Vec<f64> = (0..*points)
                .map(|k| m1_min + (m1_max - m1_min) * k as f64 / (*points as f64 - 1.0))
                .collect();
            let pts = transition_curves(*gamma, alpha_deg.to_radians(), &grid)?;
            let mut buf = Vec::new();
            buf.extend_from_slice(header(*gamma, 0.0).as_bytes());
            write_transition_csv(&pts, &mut buf)?;
            emit(output, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            let ok = pts.iter().filter(|p| p.theta_d.is_some() && p.theta_s.is_some()).count();
            println!("transition: gamma={gamma} alpha_deg={alpha_deg} points={points} in_regime={ok}");
        }
        Command::Trivial { base, output } => {
            let consts = GasConstants::nondim(base.gamma)?;
            let trr = trivial_rr_from_core(base.rho3, base.xi_a, base.theta_deg.to_radians(), &consts)?;
            let params = params_from_core(&trr);
            let (beta0, ty) = reflection_corner_beta0(&trr)?;
            let report = serde_json::json!({
                "version": VERSION,
                "gamma": base.gamma,
                "rho3": base.rho3,
                "xi_a": base.xi_a,
                "theta": trr.theta,
                "xi_b": [trr.xi_b.x, trr.xi_b.y],
                "psi0": trr.psi0,
                "m1": params.m1,
                "alpha": params.alpha,
                "rho1": trr.sector1.rho,
                "rho2": trr.sector2.rho,
                "reflected_type": format!("{:?}", trr.reflected.classify()),
                "transonic": trr.reflected.is_transonic(),
                "beta0": beta0,
            });
            emit(output, &format!("{:#}\n", report))?;
            println!(
                "trivial: M1={:.6} alpha_deg={:.6} type={:?} transonic={} beta0={:.6}",
                params.m1,
                params.alpha.to_degrees(),
                ty,
                trr.reflected.is_transonic(),
                beta0
            );
        }
        Command::Pencil { phi1_deg, phi2_deg, gamma1_deg, gamma2_deg, neumann, count, output } => {
            let (g1, g2) = if *neumann { (90.0, 90.0) } else { (*gamma1_deg, *gamma2_deg) };
            let spec = pencil_spectrum(
                phi1_deg.to_radians(),
                phi2_deg.to_radians(),
                g1.to_radians(),
                g2.to_radians(),
                *count,
            )?;
            let mut report = spectrum_json(&spec);
            report["version"] = serde_json::json!(VERSION);
            emit(output, &format!("{:#}\n", report))?;
            println!("pencil: beta0={:.12} beta1={:.12}", spec.beta0, spec.beta1);
        }
        Command::Linsolve { base, mesh_h, output } => {
            let consts = GasConstants::nondim(base.gamma)?;
            let trr = trivial_rr_from_core(base.rho3, base.xi_a, base.theta_deg.to_radians(), &consts)?;
            let n = divisions(*mesh_h)?;
            let mesh = TriangleMesh::for_reflection(&trr, n)?;
            let sys = assemble_linearized(&trr, &mesh)?;
            let field = kernel_compute(&sys, &mesh)?;
            let fit = fit_field_corner_exponent(&mesh, &field, mesh.corner_b, default_corner_window(&mesh), 2)?;
            let (beta0, _) = reflection_corner_beta0(&trr)?;
            let mut buf = Vec::new();
            buf.extend_from_slice(header(base.gamma, 0.0).as_bytes());
            write_field_csv(&mesh, &field, &mut buf)?;
            emit(output, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            println!(
                "linsolve: n={n} kernel_gap={:.3e} exponent={:.4} beta0={:.4}",
                field.kernel_gap.unwrap_or(f64::NAN),
                fit.exponent,
                beta0
            );
        }
        Command::Perturb { base, dtheta_deg, dm1, dalpha_deg, mesh_h, tol, max_iter, output } => {
            let consts = GasConstants::nondim(base.gamma)?;
            let trr = trivial_rr_from_core(base.rho3, base.xi_a, base.theta_deg.to_radians(), &consts)?;
            let mut params = params_from_core(&trr);
            params.m1 += dm1;
            params.alpha += dalpha_deg.to_radians();
            params.theta += dtheta_deg.to_radians();
            let n = divisions(*mesh_h)?;
            let out = newton_solve(&params, &trr, n, *tol, *max_iter)?;
            let (beta0, _) = reflection_corner_beta0(&trr)?;
            let report = serde_json::json!({
                "version": VERSION,
                "gamma": base.gamma,
                "tol": tol,
                "params": {"m1": params.m1, "alpha": params.alpha, "theta": params.theta},
                "iterations": out.iterations,
                "residual_history": out.residual_history,
                "shock_curve": out.shock_curve.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
                "beta0": beta0,
                "type_flags": {"weak_type": out.weak_type, "transonic": out.transonic},
                "foot_displacement": out.foot_displacement(&trr),
                "ellipticity_margin": out.ellipticity_margin,
                "residual_norms": out.residual_norms,
            });
            emit(output, &format!("{:#}\n", report))?;
            println!(
                "perturb: iterations={} displacement={:.6e} weak={} transonic={} margin={:.4}",
                out.iterations,
                out.foot_displacement(&trr),
                out.weak_type,
                out.transonic,
                out.ellipticity_margin
            );
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonpositiveDensity(_)
        | Error::Vacuum(_)
        | Error::Domain(_)
        | Error::Inadmissible(_)
        | Error::RegimeExit(_) => 1,
        _ => 2,
    }
}

/// Parses the argument vector and runs the selected experiment.
/// Exit status: 0 success, 1 domain error, 2 solver failure, 64 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    if let Ok(threads) = std::env::var("REFLECTLAB_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    match run_command(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
