//! Truncated series derivative (N = 0, 1, 2) against Grünwald-Letnikov.

use stochfrac::fracnum::{rl_deriv, series_deriv, Backend, FracOrder, Side};
use stochfrac::{Grid, GriddedFn};

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 1001)?;
    let alpha = 0.5;
    let band = grid.interior_mask(0.1, true, true);
    for (name, f) in [
        ("1", GriddedFn::constant(grid, 1.0)?),
        ("t", GriddedFn::from_fn(grid, |t| t)?),
        ("t^2", GriddedFn::from_fn(grid, |t| t * t)?),
        ("sin 2t", GriddedFn::from_fn(grid, |t| (2.0 * t).sin())?),
    ] {
        let gl = rl_deriv(&f, FracOrder::new(alpha)?, Side::Left, Backend::GrunwaldLetnikov)?;
        let gaps: Vec<String> = (0..=2)
            .map(|n| {
                let s = series_deriv(&f, alpha, Side::Left, n).unwrap();
                let gap = band
                    .iter()
                    .map(|&i| (s.values.value(i) - gl.value(i)).abs())
                    .fold(0.0, f64::max);
                format!("N={n}: {gap:.2e}")
            })
            .collect();
        println!("{name:<7} {}", gaps.join("  "));
    }
    Ok(())
}
