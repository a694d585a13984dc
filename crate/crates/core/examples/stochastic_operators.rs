//! The six stochastic operators on a Wiener ensemble, with propagated
//! standard errors and the boundedness check of the left integral.

use stochfrac::ensemble::{generate, ProcessKind, ProcessSpec};
use stochfrac::fracnum::{Backend, FracOrder};
use stochfrac::stochfrac::{apply_many, prop1_bound, StochOpKind};
use stochfrac::Grid;

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 501)?;
    let spec = ProcessSpec::new(ProcessKind::Wiener { x0: 1.0, sigma: 1.0 }, 10_000);
    let e = generate(&spec, &grid, 7)?;
    let order = FracOrder::new(0.5)?;

    let mid = 250;
    for (kind, r) in StochOpKind::ALL.iter().zip(apply_many(&e, &StochOpKind::ALL, order, Backend::GrunwaldLetnikov)) {
        let r = r?;
        println!(
            "{kind}  value at t = 0.5: {:>9.5} ± {:.5}  ({})",
            r.value.value(mid),
            r.standard_error.value(mid),
            r.backend
        );
    }

    for alpha in [0.5, 1.0, 1.5] {
        let c = prop1_bound(&e, FracOrder::new(alpha)?)?;
        println!(
            "α = {alpha}: sup|I^α E X| = {:.5} ≤ k·‖E X‖₁ = {:.5} ({})",
            c.sup_abs,
            c.bound,
            if c.holds() { "holds" } else { "violated" }
        );
    }
    Ok(())
}
