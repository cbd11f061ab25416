// scratch: dtheta=0.5deg stall vs mesh size
use reflectlab::perturb::newton_solve;
use reflectlab::reflection::{params_from_core, trivial_rr_from_core};
use reflectlab::GasConstants;

fn main() {
    let consts = GasConstants::nondim(1.4).unwrap();
    let trr = trivial_rr_from_core(1.5, -0.4, 120f64.to_radians(), &consts).unwrap();
    let base_p = params_from_core(&trr);
    for n in [8usize, 10, 12, 16, 20] {
        let mut p = base_p;
        p.theta += 0.5f64.to_radians();
        match newton_solve(&p, &trr, n, 1e-8, 30) {
            Ok(out) => println!(
                "n={n}: it={} foot={:+.5e} hist={:?}",
                out.iterations,
                out.foot_displacement(&trr),
                out.residual_history.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
            ),
            Err(reflectlab::Error::NonConvergence { iterations, residual, history }) => println!(
                "n={n}: STALL it={iterations} res={residual:.3e} hist={:?}",
                history.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
            ),
            Err(e) => println!("n={n}: ERR {e}"),
        }
    }
}
