//! Fractional derivatives and integrals of `t` on `[0, 1]` against the
//! power rule `D^α t = t^{1−α}/Γ(2−α)`.

use stochfrac::fracnum::{caputo_deriv, rl_deriv, rl_integral, Backend, FracOrder, Side};
use stochfrac::special::gamma;
use stochfrac::{Grid, GriddedFn};

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 1001)?;
    let f = GriddedFn::from_fn(grid, |t| t)?;
    let alpha = FracOrder::new(0.5)?;
    let i = 500;
    let t = grid.node(i);

    let exact = t.powf(0.5) / gamma(1.5);
    for backend in [Backend::GrunwaldLetnikov, Backend::L1Quadrature, Backend::TruncatedSeries(1)] {
        let d = rl_deriv(&f, alpha, Side::Left, backend)?;
        println!("RL derivative, {backend:<12} {:.8} (exact {exact:.8})", d.value(i));
    }
    let c = caputo_deriv(&f, alpha, Side::Left)?;
    println!("Caputo derivative          {:.8} (exact {exact:.8})", c.value(i));

    let int = rl_integral(&f, alpha, Side::Left);
    println!("RL integral                {:.8} (exact {:.8})", int.value(i), t.powf(1.5) / gamma(2.5));

    // Right operators see `1 − t` as the distance to the anchor.
    let (j, s) = (250, grid.node(250));
    let r = rl_deriv(&f, alpha, Side::Right, Backend::GrunwaldLetnikov)?;
    let exact_r = 1.0 / ((1.0 - s).powf(0.5) * gamma(0.5)) - (1.0 - s).powf(0.5) / gamma(1.5);
    println!("right RL derivative, t = {s} {:.8} (exact {exact_r:.8})", r.value(j));
    Ok(())
}
