//! Finite ensembles of sample paths and their expectation estimates.

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_same_grid, read_table, write_columns, Grid, GriddedFn};

/// Deterministic drift used by [`ProcessKind::DeterministicPlusNoise`].
/// Shapes are measured from the left end of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drift {
    Constant(f64),
    /// `(t − a)^β`
    Power(f64),
    /// `intercept + slope·(t − a)`
    Linear { slope: f64, intercept: f64 },
    /// `sin(ω·t)`
    Sin(f64),
    /// `exp(k·(t − a))`
    Exp(f64),
}

impl Drift {
    pub fn eval(&self, t: f64, a: f64) -> f64 {
        let s = t - a;
        match *self {
            Drift::Constant(c) => c,
            Drift::Power(beta) => {
                if beta == 0.0 {
                    1.0
                } else {
                    s.max(0.0).powf(beta)
                }
            }
            Drift::Linear { slope, intercept } => intercept + slope * s,
            Drift::Sin(w) => (w * t).sin(),
            Drift::Exp(k) => (k * s).exp(),
        }
    }
}

impl FromStr for Drift {
    type Err = Error;

    /// Accepts `zero`, `one`, `t`, `t2`, `sqrt`, `one_minus_t`, `sin`,
    /// `const:C`, `pow:BETA`, `linear:SLOPE:INTERCEPT`, `sin:W`, `exp:K`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("unknown drift `{s}`"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let d = match (head, args.as_slice()) {
            ("zero", []) => Drift::Constant(0.0),
            ("one", []) => Drift::Constant(1.0),
            ("t", []) => Drift::Power(1.0),
            ("t2", []) => Drift::Power(2.0),
            ("sqrt", []) => Drift::Power(0.5),
            ("one_minus_t", []) => Drift::Linear {
                slope: -1.0,
                intercept: 1.0,
            },
            ("sin", []) => Drift::Sin(1.0),
            ("const", [c]) => Drift::Constant(num(c)?),
            ("pow", [b]) => Drift::Power(num(b)?),
            ("linear", [m, c]) => Drift::Linear {
                slope: num(m)?,
                intercept: num(c)?,
            },
            ("sin", [w]) => Drift::Sin(num(w)?),
            ("exp", [k]) => Drift::Exp(num(k)?),
            _ => return Err(bad()),
        };
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessKind {
    /// `x0 + σ·W_t`, sampled from exact Gaussian increments.
    Wiener { x0: f64, sigma: f64 },
    /// `dX = −θ(X − μ)dt + σ dW`
    OrnsteinUhlenbeck { theta: f64, mu: f64, sigma: f64, x0: f64 },
    /// `dX = μX dt + σX dW`
    GeometricBrownian { mu: f64, sigma: f64, x0: f64 },
    /// `drift(t) + σ·(W_t − W_a)`
    DeterministicPlusNoise { drift: Drift, sigma: f64 },
}

impl ProcessKind {
    fn sigma(&self) -> f64 {
        match *self {
            ProcessKind::Wiener { sigma, .. }
            | ProcessKind::OrnsteinUhlenbeck { sigma, .. }
            | ProcessKind::GeometricBrownian { sigma, .. }
            | ProcessKind::DeterministicPlusNoise { sigma, .. } => sigma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Wiener { .. } => "wiener",
            ProcessKind::OrnsteinUhlenbeck { .. } => "ou",
            ProcessKind::GeometricBrownian { .. } => "gbm",
            ProcessKind::DeterministicPlusNoise { .. } => "deterministic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub n_paths: usize,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, n_paths: usize) -> Self {
        ProcessSpec { kind, n_paths }
    }

    /// Single noiseless path equal to `drift`.
    pub fn deterministic(drift: Drift) -> Self {
        ProcessSpec::new(ProcessKind::DeterministicPlusNoise { drift, sigma: 0.0 }, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::param("number of paths must be at least 1"));
        }
        let sigma = self.kind.sigma();
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma must be a finite non-negative number, got {sigma}")));
        }
        let finite = match self.kind {
            ProcessKind::Wiener { x0, .. } => x0.is_finite(),
            ProcessKind::OrnsteinUhlenbeck { theta, mu, x0, .. } => {
                if !(theta >= 0.0) {
                    return Err(Error::param(format!("theta must be non-negative, got {theta}")));
                }
                theta.is_finite() && mu.is_finite() && x0.is_finite()
            }
            ProcessKind::GeometricBrownian { mu, x0, .. } => mu.is_finite() && x0.is_finite(),
            ProcessKind::DeterministicPlusNoise { .. } => true,
        };
        if !finite {
            return Err(Error::param("process parameters must be finite"));
        }
        Ok(())
    }
}

/// `M` sample paths on a common grid, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    grid: Grid,
    n_paths: usize,
    data: Vec<f64>,
    seed: u64,
}

/// Pointwise sample mean with its standard error `√(s²/M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub mean: GriddedFn,
    pub stderr: GriddedFn,
}

/// Euler–Maruyama on the grid itself (exact increments for Brownian parts).
/// Path `p` draws from ChaCha8 stream `p` under the master seed, so the
/// result does not depend on how paths are scheduled across threads.
pub fn generate(spec: &ProcessSpec, grid: &Grid, seed: u64) -> Result<Ensemble> {
    spec.validate()?;
    let n = grid.n_nodes();
    let h = grid.h();
    let sqrt_h = h.sqrt();
    let a = grid.a();
    let kind = spec.kind;
    let mut data = vec![0.0; spec.n_paths * n];
    data.par_chunks_mut(n).enumerate().for_each(|(p, path)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let mut dw = || -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            sqrt_h * z
        };
        match kind {
            ProcessKind::Wiener { x0, sigma } => {
                path[0] = x0;
                for i in 1..n {
                    path[i] = path[i - 1] + sigma * dw();
                }
            }
            ProcessKind::OrnsteinUhlenbeck { theta, mu, sigma, x0 } => {
                path[0] = x0;
                for i in 1..n {
                    let x = path[i - 1];
                    path[i] = x - theta * (x - mu) * h + sigma * dw();
                }
            }
            ProcessKind::GeometricBrownian { mu, sigma, x0 } => {
                path[0] = x0;
                for i in 1..n {
                    let x = path[i - 1];
                    path[i] = x + mu * x * h + sigma * x * dw();
                }
            }
            ProcessKind::DeterministicPlusNoise { drift, sigma } => {
                let mut w = 0.0;
                path[0] = drift.eval(grid.node(0), a);
                for i in 1..n {
                    w += dw();
                    path[i] = drift.eval(grid.node(i), a) + sigma * w;
                }
            }
        }
    });
    let ens = Ensemble {
        grid: *grid,
        n_paths: spec.n_paths,
        data,
        seed,
    };
    ens.check_finite()?;
    Ok(ens)
}

impl Ensemble {
    pub fn from_paths(grid: Grid, paths: Vec<Vec<f64>>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::param("an ensemble needs at least one path"));
        }
        let n = grid.n_nodes();
        let mut data = Vec::with_capacity(paths.len() * n);
        for (p, path) in paths.iter().enumerate() {
            if path.len() != n {
                return Err(Error::GridMismatch(format!(
                    "path {p} has {} values for {n} nodes",
                    path.len()
                )));
            }
            data.extend_from_slice(path);
        }
        let ens = Ensemble {
            grid,
            n_paths: paths.len(),
            data,
            seed: 0,
        };
        ens.check_finite()?;
        Ok(ens)
    }

    /// One-path ensemble equal to `f`.
    pub fn deterministic(f: &GriddedFn) -> Self {
        Ensemble {
            grid: *f.grid(),
            n_paths: 1,
            data: f.values().to_vec(),
            seed: 0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let n = self.grid.n_nodes();
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::param(format!(
                "non-finite value in path {} at node {}",
                k / n,
                k % n
            ))),
            None => Ok(()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let n = self.grid.n_nodes();
        &self.data[p * n..(p + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.grid.n_nodes())
    }

    /// Pathwise `c·self + d·other`; both ensembles need the same grid and size.
    pub fn lincomb(&self, c: f64, other: &Ensemble, d: f64) -> Result<Ensemble> {
        check_same_grid(&self.grid, &other.grid)?;
        if self.n_paths != other.n_paths {
            return Err(Error::param(format!(
                "path counts differ: {} vs {}",
                self.n_paths, other.n_paths
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| c * x + d * y)
            .collect();
        let ens = Ensemble {
            grid: self.grid,
            n_paths: self.n_paths,
            data,
            seed: 0,
        };
        ens.check_finite()?;
        Ok(ens)
    }

    /// Concatenation of the paths of both ensembles.
    pub fn merge(&self, other: &Ensemble) -> Result<Ensemble> {
        check_same_grid(&self.grid, &other.grid)?;
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Ensemble {
            grid: self.grid,
            n_paths: self.n_paths + other.n_paths,
            data,
            seed: 0,
        })
    }

    /// Paths `range` as a new ensemble.
    pub fn subset(&self, range: std::ops::Range<usize>) -> Result<Ensemble> {
        if range.is_empty() || range.end > self.n_paths {
            return Err(Error::param(format!(
                "path range {range:?} invalid for {} paths",
                self.n_paths
            )));
        }
        let n = self.grid.n_nodes();
        Ok(Ensemble {
            grid: self.grid,
            n_paths: range.len(),
            data: self.data[range.start * n..range.end * n].to_vec(),
            seed: self.seed,
        })
    }

    /// Splits into `k` contiguous batches of near-equal size (fewer if `M < k`).
    pub fn batches(&self, k: usize) -> Vec<Ensemble> {
        let k = k.clamp(1, self.n_paths);
        let base = self.n_paths / k;
        let extra = self.n_paths % k;
        let mut start = 0;
        (0..k)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let e = self.subset(start..start + len).expect("non-empty batch");
                start += len;
                e
            })
            .collect()
    }

    /// Values at every node, resampled onto another grid over the same interval.
    pub fn resample(&self, target: &Grid) -> Result<Ensemble> {
        let paths = self
            .paths()
            .map(|p| {
                GriddedFn::from_parts(self.grid, p.to_vec())
                    .resample(target)
                    .map(GriddedFn::into_values)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut e = Ensemble::from_paths(*target, paths)?;
        e.seed = self.seed;
        Ok(e)
    }

    /// Root-mean-square `√(E X_t²)` per node, the estimate of `‖X(t)‖_H`.
    pub fn rms(&self) -> GriddedFn {
        let n = self.grid.n_nodes();
        let mut acc = vec![0.0; n];
        for p in self.paths() {
            for (s, x) in acc.iter_mut().zip(p) {
                *s += x * x;
            }
        }
        let m = self.n_paths as f64;
        GriddedFn::from_parts(self.grid, acc.into_iter().map(|s| (s / m).sqrt()).collect())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let names: Vec<String> = (0..self.n_paths).map(|p| format!("path_{p}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let cols: Vec<&[f64]> = self.paths().collect();
        write_columns(path.as_ref(), &self.grid, &names, &cols)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Ensemble> {
        let path = path.as_ref();
        let table = read_table(path)?;
        for (j, h) in table.headers.iter().enumerate().skip(1) {
            if *h != format!("path_{}", j - 1) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: 1,
                    msg: format!("expected column `path_{}`, found `{h}`", j - 1),
                });
            }
        }
        Ensemble::from_paths(table.grid, table.columns)
    }
}

/// Pointwise sample mean and its standard error.
///
/// The mean is accumulated relative to the first path, so identical paths
/// reproduce themselves exactly and have zero standard error.
pub fn mean_path(e: &Ensemble) -> MeanEstimate {
    let n = e.grid.n_nodes();
    let m = e.n_paths as f64;
    let mean = shifted_mean(&e.data, n);
    let stderr = if e.n_paths < 2 {
        vec![0.0; n]
    } else {
        let mut ss = vec![0.0; n];
        for p in e.paths() {
            for i in 0..n {
                let d = p[i] - mean[i];
                ss[i] += d * d;
            }
        }
        ss.into_iter().map(|s| (s / (m - 1.0) / m).sqrt()).collect()
    };
    MeanEstimate {
        mean: GriddedFn::from_parts(e.grid, mean),
        stderr: GriddedFn::from_parts(e.grid, stderr),
    }
}

/// Sample means of the contiguous batches of [`Ensemble::batches`],
/// computed in place.
pub fn batch_means(e: &Ensemble, k: usize) -> Vec<GriddedFn> {
    let n = e.grid.n_nodes();
    let k = k.clamp(1, e.n_paths);
    let base = e.n_paths / k;
    let extra = e.n_paths % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let chunk = &e.data[start * n..(start + len) * n];
            start += len;
            GriddedFn::from_parts(e.grid, shifted_mean(chunk, n))
        })
        .collect()
}

fn shifted_mean(data: &[f64], n: usize) -> Vec<f64> {
    let m = (data.len() / n) as f64;
    let base = &data[..n];
    let mut shift = vec![0.0; n];
    for p in data.chunks_exact(n).skip(1) {
        for i in 0..n {
            shift[i] += p[i] - base[i];
        }
    }
    (0..n).map(|i| base[i] + shift[i] / m).collect()
}
