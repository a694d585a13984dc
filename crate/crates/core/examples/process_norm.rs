//! The sup-norm `‖X(t)‖ + |D_L^α E X| + |D_R^α E X|` of a Wiener process.

use stochfrac::ensemble::{generate, ProcessKind, ProcessSpec};
use stochfrac::variational::c1h_norm;
use stochfrac::Grid;

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 201)?;
    let spec = ProcessSpec::new(ProcessKind::Wiener { x0: 0.5, sigma: 1.0 }, 10_000);
    let e = generate(&spec, &grid, 1)?;
    for alpha in [0.25, 0.5, 0.75] {
        let r = c1h_norm(&e, alpha)?;
        println!(
            "α = {alpha}: total {:.4} at t = {:.3} (rms {:.4}, left {:.4}, right {:.4})",
            r.total,
            grid.node(r.argmax),
            r.sup_h_norm,
            r.sup_left_deriv,
            r.sup_right_deriv
        );
    }
    println!("rms at t = 1: {:.4} (exact {:.4})", e.rms().value(200), 1.25f64.sqrt());
    Ok(())
}
