// scratch: validate the corner exponent estimator
use reflectlab::linsolve::{assemble_linearized, fit_field_corner_exponent, kernel_compute};
use reflectlab::mesh::TriangleMesh;
use reflectlab::pencil::reflection_corner_beta0;
use reflectlab::reflection::trivial_rr_from_core;
use reflectlab::GasConstants;

fn main() {
    let consts = GasConstants::nondim(1.4).unwrap();
    for rho3 in [2.0, 1.5] {
        let trr = trivial_rr_from_core(rho3, -0.4, 120f64.to_radians(), &consts).unwrap();
        let (beta0, _) = reflection_corner_beta0(&trr).unwrap();
        println!("rho3={rho3} beta0={beta0:.4}");
        for n in [24usize, 32, 48, 64] {
            let mesh = TriangleMesh::for_reflection(&trr, n).unwrap();
            let sys = assemble_linearized(&trr, &mesh).unwrap();
            let field = kernel_compute(&sys, &mesh).unwrap();
            print!("  n={n}:");
            for (rlo, rhi) in [(0.005, 0.21), (0.0075, 0.21), (0.01, 0.25), (0.015, 0.25), (0.01, 0.17)] {
                match fit_field_corner_exponent(&mesh, &field, mesh.corner_b, (rlo, rhi), 2) {
                    Ok(f) => print!(
                        " [{rlo:.4}/{rhi:.2}: {:.3} e{:.2}]",
                        f.exponent,
                        (f.exponent - beta0).abs() / beta0
                    ),
                    Err(e) => print!(" [{rlo:.4}/{rhi:.2}: {e}]"),
                }
            }
            println!();
        }
    }
}
