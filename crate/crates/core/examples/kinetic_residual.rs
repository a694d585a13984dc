//! Euler-Lagrange residual of the kinetic-potential Lagrangian
//! `¼m(D_L² + D_R²) − V`, assembled by the library and by hand, then
//! reduced by descent.

use stochfrac::fracnum::{Backend, FracOperator, FracOrder, OperatorKind, Side};
use stochfrac::variational::{el_residual, residual_norm, solve_descent, DescentOptions, Lagrangian, Potential, VariationalProblem};
use stochfrac::Grid;

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 101)?;
    let (mass, k, alpha) = (1.0, 1.0, 0.5);
    let l = Lagrangian::kinetic_potential(mass, Potential::Harmonic { k });
    let p = VariationalProblem::new(l, grid, alpha, 1.0, 0.0)?;
    let m = p.linear_interpolant();

    let r = el_residual(&p, &m)?;
    let op = |side| FracOperator::new(grid, OperatorKind::RlDeriv, side, FracOrder::new(alpha)?, Backend::GrunwaldLetnikov);
    let (left, right) = (op(Side::Left)?, op(Side::Right)?);
    let lr = left.apply_values(&right.apply_values(m.values()));
    let rl = right.apply_values(&left.apply_values(m.values()));
    let by_hand: Vec<f64> = (0..grid.n_nodes())
        .map(|i| 0.5 * mass * (lr[i] + rl[i]) - k * m.value(i))
        .collect();
    let gap = (1..grid.n_nodes() - 1)
        .map(|i| (r.value(i) - by_hand[i]).abs())
        .fold(0.0, f64::max);
    println!("library vs hand assembly: {gap:.2e}");

    let opts = DescentOptions {
        max_steps: 2000,
        ..DescentOptions::default()
    };
    let e = solve_descent(&p, &m, opts)?;
    println!(
        "residual norm {:.4e} -> {:.4e} after {} steps, J {:.6} -> {:.6}",
        residual_norm(&r),
        e.el_residual_norm,
        e.iterations,
        e.history.first().copied().unwrap_or(e.j_value),
        e.j_value
    );
    Ok(())
}
