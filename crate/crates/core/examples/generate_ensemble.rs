//! Simulate Ornstein-Uhlenbeck paths, save them, and compare the sample
//! mean with the exact one.

use stochfrac::ensemble::{generate, mean_path, Ensemble, ProcessKind, ProcessSpec};
use stochfrac::Grid;

fn main() -> stochfrac::Result<()> {
    let grid = Grid::new(0.0, 1.0, 201)?;
    let kind = ProcessKind::OrnsteinUhlenbeck {
        theta: 1.0,
        mu: 0.0,
        sigma: 0.2,
        x0: 1.0,
    };
    let e = generate(&ProcessSpec::new(kind, 5000), &grid, 42)?;

    let path = std::env::temp_dir().join("ou_paths.csv");
    e.save_csv(&path)?;
    let back = Ensemble::load_csv(&path)?;
    assert!(back.paths().eq(e.paths()), "CSV round trip is bit-exact");

    let m = mean_path(&e);
    for i in [0, 50, 100, 200] {
        let t = grid.node(i);
        println!(
            "t = {t:.2}  mean {:.4} ± {:.4}  exact {:.4}",
            m.mean.value(i),
            m.stderr.value(i),
            (-t).exp()
        );
    }
    println!("saved {} paths to {}", e.n_paths(), path.display());
    Ok(())
}
