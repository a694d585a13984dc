//! Uniform grids and real functions sampled on them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest allowed deviation of a CSV time column from the uniform grid it implies.
pub const CSV_NODE_TOLERANCE: f64 = 1e-9;

/// Uniform discretisation of `[a, b]` with `n_nodes` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    n_nodes: usize,
    h: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n_nodes: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("endpoints must be finite, got [{a}, {b}]")));
        }
        if a >= b {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if n_nodes < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n_nodes}")));
        }
        let h = (b - a) / (n_nodes - 1) as f64;
        Ok(Grid { a, b, n_nodes, h })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    /// `a + i·h`; the last node is `b` exactly.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes);
        if i + 1 == self.n_nodes {
            self.b
        } else {
            self.a + i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.node(i))
    }

    /// Grid with `(n_nodes + 1) / 2` nodes on the same interval. For odd
    /// `n_nodes` its nodes are every other node of `self`.
    pub fn coarsened(&self) -> Result<Grid> {
        Grid::new(self.a, self.b, self.n_nodes.div_ceil(2))
    }

    /// Indices of nodes at distance at least `frac·(b − a)` from each masked end.
    pub fn interior_mask(&self, frac: f64, mask_left: bool, mask_right: bool) -> Vec<usize> {
        let lo = self.a + frac * self.len();
        let hi = self.b - frac * self.len();
        // tolerance keeps nodes sitting exactly on the band edge
        let slack = 1e-9 * self.h;
        (0..self.n_nodes)
            .filter(|&i| {
                let t = self.node(i);
                (!mask_left || t >= lo - slack) && (!mask_right || t <= hi + slack)
            })
            .collect()
    }
}

/// Real values on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFn {
    grid: Grid,
    values: Vec<f64>,
}

impl GriddedFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite value {} at node {i} (t = {})",
                values[i],
                grid.node(i)
            )));
        }
        Ok(GriddedFn { grid, values })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        GriddedFn { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        GriddedFn::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        GriddedFn::new(grid, vec![c; grid.n_nodes()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GriddedFn::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `c·self + d·other`.
    pub fn lincomb(&self, c: f64, other: &GriddedFn, d: f64) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| c * x + d * y)
            .collect();
        GriddedFn::new(self.grid, values)
    }

    /// `t ↦ f(a + b − t)`.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        GriddedFn::from_parts(self.grid, values)
    }

    /// Piecewise-linear interpolation onto another grid over the same interval.
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.a() != self.grid.a || target.b() != self.grid.b {
            return Err(Error::GridMismatch(format!(
                "cannot resample [{}, {}] onto [{}, {}]",
                self.grid.a,
                self.grid.b,
                target.a(),
                target.b()
            )));
        }
        let n = self.grid.n_nodes;
        let values = target
            .nodes()
            .map(|t| {
                let s = (t - self.grid.a) / self.grid.h;
                let k = (s.floor().max(0.0) as usize).min(n - 2);
                let w = s - k as f64;
                if w.abs() < 1e-12 {
                    self.values[k]
                } else if (1.0 - w).abs() < 1e-12 {
                    self.values[k + 1]
                } else {
                    (1.0 - w) * self.values[k] + w * self.values[k + 1]
                }
            })
            .collect();
        GriddedFn::new(*target, values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let table = read_table(path.as_ref())?;
        if table.headers != ["t", "value"] {
            return Err(Error::Parse {
                path: path.as_ref().to_path_buf(),
                row: 1,
                msg: format!("expected header `t,value`, found `{}`", table.headers.join(",")),
            });
        }
        let values = table.columns.into_iter().next().unwrap_or_default();
        GriddedFn::new(table.grid, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_columns(path.as_ref(), &self.grid, &["value"], &[&self.values])
    }
}

pub(crate) fn check_same_grid(x: &Grid, y: &Grid) -> Result<()> {
    if x != y {
        return Err(Error::GridMismatch(format!(
            "[{}, {}] with {} nodes vs [{}, {}] with {} nodes",
            x.a, x.b, x.n_nodes, y.a, y.b, y.n_nodes
        )));
    }
    Ok(())
}

/// Composite trapezoid rule over the whole grid.
pub fn trapezoid(f: &GriddedFn) -> f64 {
    trapezoid_values(f.grid.h, &f.values)
}

pub(crate) fn trapezoid_values(h: f64, v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..n - 1].iter().sum();
    h * (0.5 * (v[0] + v[n - 1]) + inner)
}

/// Trapezoid weights `h·(1/2, 1, …, 1, 1/2)`.
pub fn trapezoid_weights(grid: &Grid) -> Vec<f64> {
    let n = grid.n_nodes();
    let mut w = vec![grid.h(); n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

/// Central differences inside, second-order one-sided stencils at the ends.
pub fn finite_diff(f: &GriddedFn, order: usize) -> Result<GriddedFn> {
    let values = finite_diff_values(f.grid.h, &f.values, order)?;
    Ok(GriddedFn::from_parts(f.grid, values))
}

pub(crate) fn finite_diff_values(h: f64, v: &[f64], order: usize) -> Result<Vec<f64>> {
    let rows = FdStencil::new(order, v.len())?;
    let scale = rows.scale(h);
    Ok((0..v.len())
        .map(|i| {
            let (start, coef) = rows.row(i);
            let acc = coef
                .iter()
                .enumerate()
                .fold(0.0, |acc, (j, c)| acc + c * v[start + j]);
            acc * scale
        })
        .collect())
}

/// Finite-difference stencil rows, unscaled (multiply by `h^{-order}`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct FdStencil {
    order: usize,
    n: usize,
}

const D1_CENTRAL: [f64; 3] = [-0.5, 0.0, 0.5];
const D1_FORWARD: [f64; 3] = [-1.5, 2.0, -0.5];
const D1_BACKWARD: [f64; 3] = [0.5, -2.0, 1.5];
const D2_CENTRAL: [f64; 3] = [1.0, -2.0, 1.0];
const D2_FORWARD: [f64; 4] = [2.0, -5.0, 4.0, -1.0];
const D2_BACKWARD: [f64; 4] = [-1.0, 4.0, -5.0, 2.0];

impl FdStencil {
    pub(crate) fn new(order: usize, n: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::param(format!("finite difference order must be 1 or 2, got {order}")));
        }
        if n < order + 2 {
            return Err(Error::InvalidGrid(format!(
                "finite difference of order {order} needs at least {} nodes, got {n}",
                order + 2
            )));
        }
        Ok(FdStencil { order, n })
    }

    pub(crate) fn scale(&self, h: f64) -> f64 {
        if self.order == 1 {
            1.0 / h
        } else {
            1.0 / (h * h)
        }
    }

    /// Start column and coefficients of row `i`.
    pub(crate) fn row(&self, i: usize) -> (usize, &'static [f64]) {
        let last = self.n - 1;
        match (self.order, i) {
            (1, 0) => (0, &D1_FORWARD),
            (1, i) if i == last => (last - 2, &D1_BACKWARD),
            (1, i) => (i - 1, &D1_CENTRAL),
            (_, 0) => (0, &D2_FORWARD),
            (_, i) if i == last => (last - 3, &D2_BACKWARD),
            (_, i) => (i - 1, &D2_CENTRAL),
        }
    }
}

pub(crate) struct Table {
    pub headers: Vec<String>,
    pub grid: Grid,
    pub columns: Vec<Vec<f64>>,
}

/// Reads a CSV whose first column is a uniform time axis `t`.
pub(crate) fn read_table(path: &Path) -> Result<Table> {
    let parse_err = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.len() < 2 || headers[0] != "t" {
        return Err(parse_err(1, format!("malformed header `{}`", headers.join(","))));
    }
    let width = headers.len();
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); width - 1];
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != width {
            return Err(parse_err(row, format!("expected {width} fields, found {}", record.len())));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row, format!("cannot parse `{field}` in column `{}`", headers[j])))?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("non-finite entry `{field}` in column `{}`", headers[j])));
            }
            if j == 0 {
                times.push(v);
            } else {
                columns[j - 1].push(v);
            }
        }
    }
    if times.len() < 2 {
        return Err(parse_err(times.len() + 1, "need at least two rows".into()));
    }
    let grid = Grid::new(times[0], times[times.len() - 1], times.len())
        .map_err(|e| parse_err(2, e.to_string()))?;
    for (i, &t) in times.iter().enumerate() {
        if (t - grid.node(i)).abs() > CSV_NODE_TOLERANCE {
            return Err(parse_err(
                i + 2,
                format!("t = {t} deviates from uniform node {} by more than {CSV_NODE_TOLERANCE:e}", grid.node(i)),
            ));
        }
    }
    Ok(Table {
        headers,
        grid,
        columns,
    })
}

/// Writes `t` followed by the given columns. Values use the shortest
/// round-trip decimal form, so reading back is bit-exact.
pub(crate) fn write_columns(path: &Path, grid: &Grid, names: &[&str], cols: &[&[f64]]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut line = String::from("t");
    for name in names {
        line.push(',');
        line.push_str(name);
    }
    writeln!(out, "{line}").map_err(io_err)?;
    for i in 0..grid.n_nodes() {
        line.clear();
        line.push_str(&grid.node(i).to_string());
        for col in cols {
            line.push(',');
            line.push_str(&col[i].to_string());
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = unit(11);
        assert!((g.h() - 0.1).abs() < 1e-15);
        assert!((g.node(5) - 0.5).abs() < 1e-15);

        let g = Grid::new(0.01, 0.99, 99).unwrap();
        assert!((g.h() - 0.01).abs() < 1e-15);
        assert_eq!(g.node(98), 0.99);

        let g = unit(2);
        assert_eq!(g.nodes().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(g.h(), 1.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        assert!(Grid::new(2.0, 1.0, 10).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
        assert!(Grid::new(f64::NAN, 1.0, 10).is_err());
        assert!(Grid::new(0.0, f64::INFINITY, 10).is_err());
    }

    #[test]
    fn last_node_is_b() {
        for n in [2, 3, 7, 99, 1001, 4097] {
            let g = Grid::new(0.01, 0.99, n).unwrap();
            let naive = g.a() + (n - 1) as f64 * g.h();
            assert!((naive - g.b()).abs() <= 4.0 * f64::EPSILON);
            assert_eq!(g.node(n - 1), g.b());
        }
    }

    #[test]
    fn trapezoid_examples() {
        let one = GriddedFn::constant(unit(17), 1.0).unwrap();
        assert_eq!(trapezoid(&one), 1.0);
        for n in [2, 3, 10, 101] {
            let lin = GriddedFn::from_fn(unit(n), |t| t).unwrap();
            assert!((trapezoid(&lin) - 0.5).abs() < 1e-15);
        }
        let sq = GriddedFn::from_fn(unit(1001), |t| t * t).unwrap();
        assert!((trapezoid(&sq) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_second_order() {
        let exact = 1.0 - 1.0f64.cos();
        let err = |n| (trapezoid(&GriddedFn::from_fn(unit(n), f64::sin).unwrap()) - exact).abs();
        let ratio = err(101) / err(201);
        assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
    }

    #[test]
    fn finite_diff_examples() {
        let g = unit(11);
        let d = finite_diff(&GriddedFn::from_fn(g, |t| 3.0 * t).unwrap(), 1).unwrap();
        assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-12));

        let g = unit(101);
        let d = finite_diff(&GriddedFn::from_fn(g, |t| t * t).unwrap(), 2).unwrap();
        assert!(d.values().iter().all(|v| (v - 2.0).abs() < 1e-8));

        let g = unit(1001);
        let d = finite_diff(&GriddedFn::from_fn(g, f64::sin).unwrap(), 1).unwrap();
        let err = g
            .nodes()
            .zip(d.values())
            .fold(0.0f64, |m, (t, v)| m.max((v - t.cos()).abs()));
        assert!(err < 1e-5, "sup error {err}");

        let c = finite_diff(&GriddedFn::constant(g, 2.5).unwrap(), 1).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_diff_rejects_bad_order() {
        let f = GriddedFn::constant(unit(11), 1.0).unwrap();
        assert!(finite_diff(&f, 0).is_err());
        assert!(finite_diff(&f, 3).is_err());
        let tiny = GriddedFn::constant(unit(3), 1.0).unwrap();
        assert!(finite_diff(&tiny, 2).is_err());
    }

    #[test]
    fn resample_subsamples_exactly() {
        let g = unit(21);
        let f = GriddedFn::from_fn(g, |t| (3.0 * t).sin()).unwrap();
        let coarse = f.resample(&g.coarsened().unwrap()).unwrap();
        for (i, v) in coarse.values().iter().enumerate() {
            assert_eq!(*v, f.value(2 * i));
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = GriddedFn::from_fn(Grid::new(0.01, 0.99, 99).unwrap(), |t| t.exp() / 3.0).unwrap();
        f.write_csv(&path).unwrap();
        let back = GriddedFn::read_csv(&path).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().n_nodes(), 99);
    }

    proptest::proptest! {
        #[test]
        fn trapezoid_is_linear(
            xs in proptest::collection::vec(-10.0f64..10.0, 2..60),
            c in -5.0f64..5.0,
            d in -5.0f64..5.0,
        ) {
            let g = unit(xs.len());
            let f = GriddedFn::new(g, xs.clone()).unwrap();
            let r = GriddedFn::new(g, xs.iter().rev().map(|x| x.sin()).collect()).unwrap();
            let lhs = trapezoid(&f.lincomb(c, &r, d).unwrap());
            let rhs = c * trapezoid(&f) + d * trapezoid(&r);
            let mags: f64 = f.values().iter().zip(r.values()).map(|(x, y)| c.abs() * x.abs() + d.abs() * y.abs()).sum();
            let scale = g.h() * mags;
            proptest::prop_assert!((lhs - rhs).abs() <= 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE));
        }
    }
}
