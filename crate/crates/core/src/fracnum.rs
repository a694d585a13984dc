//! Deterministic fractional integrals and derivatives on uniform grids.
//!
//! All left-anchored operators are lower-triangular stencils of the form
//!
//! ```text
//! out[j] = scale · (first[j]·f[0] + Σ_{k=1..j} diag[j−k]·f[k])
//! ```
//!
//! possibly composed with finite differences. Right-anchored operators are
//! obtained by reflecting `t ↦ a + b − t`, which maps `ₜD_b^α` onto `ₐD_t^α`
//! exactly (including the `(−1)^n` factor of the right Caputo derivative),
//! so left/right mirror symmetry holds bit-for-bit.
//!
//! Schemes:
//!
//! - Riemann–Liouville integral: product trapezoid rule (piecewise-linear
//!   interpolation of `f`, kernel integrated exactly). Exact on linear `f`.
//! - Riemann–Liouville derivative: Grünwald–Letnikov weights
//!   `(−1)^k·binom(α, k)` scaled by `h^{−α}`, or the `n`-th finite difference
//!   of the integral of order `n − α`, or the truncated series of
//!   [`series_deriv`].
//! - Caputo derivative: the classical L1 scheme for `α ∈ (0, 1)`; for
//!   `α ∈ (1, 2)` the integral of order `2 − α` of the second finite
//!   difference.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{FdStencil, Grid, GriddedFn};
use crate::special::gamma;

/// Fractional order `α > 0` with `n = ⌊α⌋ + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    alpha: f64,
    n: usize,
}

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::param(format!("alpha must be positive, got {alpha}")));
        }
        Ok(FracOrder {
            alpha,
            n: alpha.floor() as usize + 1,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Derivative orders are restricted to `(0, 1) ∪ (1, 2)`.
    pub fn check_derivative(&self) -> Result<()> {
        let a = self.alpha;
        if a == 1.0 {
            return Err(Error::param("alpha = 1 is an ordinary derivative; use finite_diff"));
        }
        if a >= 2.0 {
            return Err(Error::param(format!(
                "derivative orders must lie in (0,1) or (1,2), got {a}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn mirror(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(Error::param(format!("unknown side `{s}`, expected left or right"))),
        }
    }
}

/// Discretisation used for Riemann–Liouville derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    GrunwaldLetnikov,
    L1Quadrature,
    /// Truncated series with terms `k = 0..=N`; only for `α ∈ (0, 1)`.
    TruncatedSeries(usize),
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::GrunwaldLetnikov => write!(f, "gl"),
            Backend::L1Quadrature => write!(f, "l1"),
            Backend::TruncatedSeries(n) => write!(f, "series(N={n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    RlDeriv,
    RlIntegral,
    CaputoDeriv,
}

/// Which family of fractional derivative a computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    RiemannLiouville,
    Caputo,
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rl" | "riemann_liouville" | "riemann-liouville" => Ok(Flavor::RiemannLiouville),
            "caputo" => Ok(Flavor::Caputo),
            _ => Err(Error::param(format!("unknown flavor `{s}`, expected rl or caputo"))),
        }
    }
}

/// Lower-triangular stencil, Toeplitz apart from its first column.
#[derive(Debug, Clone)]
struct Stencil {
    scale: f64,
    first: Vec<f64>,
    diag: Vec<f64>,
}

impl Stencil {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .map(|j| {
                let mut acc = self.first[j] * f[0];
                for k in 1..=j {
                    acc += self.diag[j - k] * f[k];
                }
                self.scale * acc
            })
            .collect()
    }

    fn apply_abs(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .map(|j| {
                let mut acc = self.first[j].abs() * f[0];
                for k in 1..=j {
                    acc += self.diag[j - k].abs() * f[k];
                }
                self.scale.abs() * acc
            })
            .collect()
    }

    fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, 0)] = self.scale * self.first[j];
            for k in 1..=j {
                m[(j, k)] = self.scale * self.diag[j - k];
            }
        }
        m
    }
}

/// `(−1)^k·binom(α, k)` for `k = 0..n`.
pub fn gl_weights(alpha: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut g = 1.0;
    for k in 0..n {
        if k > 0 {
            g *= (k as f64 - 1.0 - alpha) / k as f64;
        }
        w.push(g);
    }
    w
}

fn gl_stencil(alpha: f64, n: usize, h: f64) -> Stencil {
    let w = gl_weights(alpha, n);
    Stencil {
        scale: h.powf(-alpha),
        first: w.clone(),
        diag: w,
    }
}

/// Product trapezoid weights for `ₐI_t^μ`.
fn integral_stencil(mu: f64, n: usize, h: f64) -> Stencil {
    let p = mu + 1.0;
    let pw = |m: f64| m.powf(p);
    let mut diag = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n);
    for m in 0..n {
        let mf = m as f64;
        diag.push(if m == 0 {
            1.0
        } else {
            pw(mf + 1.0) - 2.0 * pw(mf) + pw(mf - 1.0)
        });
        first.push(if m == 0 {
            0.0
        } else {
            pw(mf - 1.0) - (mf - 1.0 - mu) * mf.powf(mu)
        });
    }
    Stencil {
        scale: h.powf(mu) / gamma(mu + 2.0),
        first,
        diag,
    }
}

/// L1 coefficients `b_m = (m+1)^{1−α} − m^{1−α}`.
fn l1_coefficients(alpha: f64, n: usize) -> Vec<f64> {
    let q = 1.0 - alpha;
    (0..n)
        .map(|m| {
            let mf = m as f64;
            (mf + 1.0).powf(q) - mf.powf(q)
        })
        .collect()
}

#[derive(Debug, Clone)]
enum LeftOp {
    Stencil(Stencil),
    /// Classical L1 Caputo scheme, evaluated on first differences of `f`.
    CaputoL1 { b: Vec<f64>, stencil: Stencil },
    FiniteDiff { stencil: FdStencil, h: f64 },
    /// `outer ∘ inner`.
    Compose(Box<LeftOp>, Box<LeftOp>),
    /// `Σ_k c_k(t)·f^{(k)}(t)`; row 0 copies row 1.
    Series { coef: Vec<Vec<f64>>, h: f64 },
}

impl LeftOp {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        match self {
            LeftOp::Stencil(s) => s.apply(f),
            LeftOp::CaputoL1 { b, stencil } => {
                let diffs: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
                (0..f.len())
                    .map(|j| {
                        let mut acc = 0.0;
                        for k in 0..j {
                            acc += b[j - 1 - k] * diffs[k];
                        }
                        stencil.scale * acc
                    })
                    .collect()
            }
            LeftOp::FiniteDiff { stencil, h } => {
                let scale = stencil.scale(*h);
                (0..f.len())
                    .map(|i| {
                        let (start, c) = stencil.row(i);
                        c.iter()
                            .enumerate()
                            .fold(0.0, |acc, (j, cj)| acc + cj * f[start + j])
                            * scale
                    })
                    .collect()
            }
            LeftOp::Compose(outer, inner) => outer.apply(&inner.apply(f)),
            LeftOp::Series { coef, h } => {
                let derivs = series_derivatives(f, coef.len() - 1, *h);
                let mut out: Vec<f64> = (0..f.len())
                    .map(|j| (0..coef.len()).fold(0.0, |acc, k| acc + coef[k][j] * derivs[k][j]))
                    .collect();
                if out.len() > 1 {
                    out[0] = out[1];
                }
                out
            }
        }
    }

    /// `Σ_k |A_jk|·f_k`, the triangle-inequality bound for nonnegative `f`.
    fn apply_abs(&self, f: &[f64]) -> Vec<f64> {
        match self {
            LeftOp::Stencil(s) | LeftOp::CaputoL1 { stencil: s, .. } => s.apply_abs(f),
            LeftOp::FiniteDiff { stencil, h } => {
                let scale = stencil.scale(*h).abs();
                (0..f.len())
                    .map(|i| {
                        let (start, c) = stencil.row(i);
                        c.iter()
                            .enumerate()
                            .fold(0.0, |acc, (j, cj)| acc + cj.abs() * f[start + j])
                            * scale
                    })
                    .collect()
            }
            LeftOp::Compose(outer, inner) => outer.apply_abs(&inner.apply_abs(f)),
            LeftOp::Series { coef, h } => {
                let mut out = vec![0.0; f.len()];
                for (k, ck) in coef.iter().enumerate() {
                    let dk = if k == 0 {
                        f.to_vec()
                    } else {
                        LeftOp::FiniteDiff {
                            stencil: FdStencil::new(k, f.len()).expect("validated at construction"),
                            h: *h,
                        }
                        .apply_abs(f)
                    };
                    for j in 0..f.len() {
                        out[j] += ck[j].abs() * dk[j];
                    }
                }
                if out.len() > 1 {
                    out[0] = out[1];
                }
                out
            }
        }
    }

    fn matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            LeftOp::Stencil(s) | LeftOp::CaputoL1 { stencil: s, .. } => s.matrix(n),
            LeftOp::FiniteDiff { stencil, h } => {
                let scale = stencil.scale(*h);
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    let (start, c) = stencil.row(i);
                    for (j, cj) in c.iter().enumerate() {
                        m[(i, start + j)] += scale * cj;
                    }
                }
                m
            }
            LeftOp::Compose(outer, inner) => outer.matrix(n) * inner.matrix(n),
            LeftOp::Series { coef, h } => {
                let mut m = DMatrix::zeros(n, n);
                for (k, ck) in coef.iter().enumerate() {
                    let dk = if k == 0 {
                        DMatrix::identity(n, n)
                    } else {
                        LeftOp::FiniteDiff {
                            stencil: FdStencil::new(k, n).expect("validated at construction"),
                            h: *h,
                        }
                        .matrix(n)
                    };
                    for j in 0..n {
                        for c in 0..n {
                            m[(j, c)] += ck[j] * dk[(j, c)];
                        }
                    }
                }
                if n > 1 {
                    let row1 = m.row(1).clone_owned();
                    m.set_row(0, &row1);
                }
                m
            }
        }
    }
}

fn series_derivatives(f: &[f64], max_k: usize, h: f64) -> Vec<Vec<f64>> {
    (0..=max_k)
        .map(|k| {
            if k == 0 {
                f.to_vec()
            } else {
                crate::grid::finite_diff_values(h, f, k).expect("validated at construction")
            }
        })
        .collect()
}

/// Coefficients `(−1)^{k−1}·α·(t−a)^{k−α} / (k!·(k−α)·Γ(1−α))` of the
/// left truncated series, per node. The anchor node carries a placeholder
/// that is overwritten by the first interior row.
fn series_coefficients(alpha: f64, terms: usize, grid: &Grid) -> Vec<Vec<f64>> {
    let g = gamma(1.0 - alpha);
    let mut fact = 1.0;
    (0..=terms)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            let kf = k as f64;
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            let c = sign * alpha / (fact * (kf - alpha) * g);
            (0..grid.n_nodes())
                .map(|j| {
                    if j == 0 {
                        0.0
                    } else {
                        c * (grid.node(j) - grid.a()).powf(kf - alpha)
                    }
                })
                .collect()
        })
        .collect()
}

/// A discretised fractional operator bound to a grid.
#[derive(Debug, Clone)]
pub struct FracOperator {
    grid: Grid,
    kind: OperatorKind,
    side: Side,
    order: FracOrder,
    backend: Backend,
    left: LeftOp,
}

impl FracOperator {
    /// Builds the operator. `backend` only affects [`OperatorKind::RlDeriv`];
    /// Caputo derivatives always use the L1 scheme and integrals the
    /// product trapezoid rule.
    pub fn new(grid: Grid, kind: OperatorKind, side: Side, order: FracOrder, backend: Backend) -> Result<Self> {
        let n = grid.n_nodes();
        let h = grid.h();
        let alpha = order.alpha();
        let (left, backend) = match kind {
            OperatorKind::RlIntegral => (LeftOp::Stencil(integral_stencil(alpha, n, h)), backend),
            OperatorKind::RlDeriv => {
                order.check_derivative()?;
                match backend {
                    Backend::GrunwaldLetnikov => (LeftOp::Stencil(gl_stencil(alpha, n, h)), backend),
                    Backend::L1Quadrature => {
                        let m = order.n();
                        let fd = FdStencil::new(m, n)?;
                        let inner = integral_stencil(m as f64 - alpha, n, h);
                        (
                            LeftOp::Compose(
                                Box::new(LeftOp::FiniteDiff { stencil: fd, h }),
                                Box::new(LeftOp::Stencil(inner)),
                            ),
                            backend,
                        )
                    }
                    Backend::TruncatedSeries(terms) => {
                        check_series(alpha, terms)?;
                        if terms > 0 {
                            FdStencil::new(terms, n)?;
                        }
                        let coef = series_coefficients(alpha, terms, &grid);
                        (LeftOp::Series { coef, h }, backend)
                    }
                }
            }
            OperatorKind::CaputoDeriv => {
                order.check_derivative()?;
                if let Backend::TruncatedSeries(_) = backend {
                    return Err(Error::param("the truncated series backend applies to Riemann-Liouville derivatives only"));
                }
                let op = if order.n() == 1 {
                    let b = l1_coefficients(alpha, n);
                    let mut diag = Vec::with_capacity(n);
                    let mut first = Vec::with_capacity(n);
                    for m in 0..n {
                        diag.push(if m == 0 { b[0] } else { b[m] - b[m - 1] });
                        first.push(if m == 0 { 0.0 } else { -b[m - 1] });
                    }
                    let stencil = Stencil {
                        scale: h.powf(-alpha) / gamma(2.0 - alpha),
                        first,
                        diag,
                    };
                    LeftOp::CaputoL1 { b, stencil }
                } else {
                    let fd = FdStencil::new(2, n)?;
                    LeftOp::Compose(
                        Box::new(LeftOp::Stencil(integral_stencil(2.0 - alpha, n, h))),
                        Box::new(LeftOp::FiniteDiff { stencil: fd, h }),
                    )
                };
                (op, Backend::L1Quadrature)
            }
        };
        Ok(FracOperator {
            grid,
            kind,
            side,
            order,
            backend,
            left,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn order(&self) -> FracOrder {
        self.order
    }

    /// Backend actually used.
    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn apply_values(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.grid.n_nodes(), "operator applied to foreign grid");
        match self.side {
            Side::Left => self.left.apply(f),
            Side::Right => {
                let rev: Vec<f64> = f.iter().rev().copied().collect();
                let mut out = self.left.apply(&rev);
                out.reverse();
                out
            }
        }
    }

    /// Applies `|A|` (entrywise absolute value of the operator matrix).
    pub fn apply_abs_values(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.grid.n_nodes(), "operator applied to foreign grid");
        match self.side {
            Side::Left => self.left.apply_abs(f),
            Side::Right => {
                let rev: Vec<f64> = f.iter().rev().copied().collect();
                let mut out = self.left.apply_abs(&rev);
                out.reverse();
                out
            }
        }
    }

    pub fn apply(&self, f: &GriddedFn) -> Result<GriddedFn> {
        crate::grid::check_same_grid(&self.grid, f.grid())?;
        finite_result(self.grid, self.apply_values(f.values()))
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.n_nodes();
        let m = self.left.matrix(n);
        match self.side {
            Side::Left => m,
            Side::Right => DMatrix::from_fn(n, n, |i, k| m[(n - 1 - i, n - 1 - k)]),
        }
    }
}

fn finite_result(grid: Grid, values: Vec<f64>) -> Result<GriddedFn> {
    GriddedFn::new(grid, values)
}

fn check_series(alpha: f64, terms: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("series approximation needs alpha in (0,1), got {alpha}")));
    }
    if terms > 2 {
        return Err(Error::param(format!(
            "series approximation supports N <= 2 (finite differences up to second order), got N = {terms}"
        )));
    }
    Ok(())
}

/// Riemann–Liouville integral `ₐI_t^α f` (left) or `ₜI_b^α f` (right).
pub fn rl_integral(f: &GriddedFn, order: FracOrder, side: Side) -> GriddedFn {
    let op = FracOperator::new(*f.grid(), OperatorKind::RlIntegral, side, order, Backend::GrunwaldLetnikov)
        .expect("integrals accept every positive order");
    GriddedFn::from_parts(*f.grid(), op.apply_values(f.values()))
}

/// Riemann–Liouville derivative `ₐD_t^α f` (left) or `ₜD_b^α f` (right).
pub fn rl_deriv(f: &GriddedFn, order: FracOrder, side: Side, backend: Backend) -> Result<GriddedFn> {
    FracOperator::new(*f.grid(), OperatorKind::RlDeriv, side, order, backend)?.apply(f)
}

/// Caputo derivative `ₐᶜD_t^α f` (left) or `ₜᶜD_b^α f` (right).
pub fn caputo_deriv(f: &GriddedFn, order: FracOrder, side: Side) -> Result<GriddedFn> {
    FracOperator::new(*f.grid(), OperatorKind::CaputoDeriv, side, order, Backend::L1Quadrature)?.apply(f)
}

/// Output of [`series_deriv`].
#[derive(Debug, Clone)]
pub struct SeriesDeriv {
    pub values: GriddedFn,
    /// Anchor node where `(t−a)^{−α}` (or `(b−t)^{−α}`) is singular; its
    /// value is a copy of the neighbouring interior node.
    pub singular_node: usize,
}

/// Truncated series for the Riemann–Liouville derivative, `α ∈ (0, 1)`:
///
/// ```text
/// left:  Σ_{k=0..N} (−1)^{k−1}·α·f^{(k)}(t)·(t−a)^{k−α} / (k!·(k−α)·Γ(1−α))
/// right: Σ_{k=0..N}        −α·f^{(k)}(t)·(b−t)^{k−α} / (k!·(k−α)·Γ(1−α))
/// ```
///
/// with `f^{(k)}` from [`crate::grid::finite_diff`].
pub fn series_deriv(f: &GriddedFn, alpha: f64, side: Side, terms: usize) -> Result<SeriesDeriv> {
    let order = FracOrder::new(alpha)?;
    check_series(alpha, terms)?;
    let values = rl_deriv(f, order, side, Backend::TruncatedSeries(terms))?;
    let singular_node = match side {
        Side::Left => 0,
        Side::Right => f.grid().n_nodes() - 1,
    };
    Ok(SeriesDeriv { values, singular_node })
}

/// Dense matrix form of an operator.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub grid: Grid,
    pub kind: OperatorKind,
    pub side: Side,
    pub order: FracOrder,
    pub entries: DMatrix<f64>,
}

impl OperatorMatrix {
    pub fn apply(&self, f: &GriddedFn) -> Result<GriddedFn> {
        crate::grid::check_same_grid(&self.grid, f.grid())?;
        let v = nalgebra::DVector::from_column_slice(f.values());
        let out = &self.entries * v;
        GriddedFn::new(self.grid, out.as_slice().to_vec())
    }
}

/// Matrix of an operator; derivatives use Grünwald–Letnikov.
pub fn operator_matrix(grid: &Grid, kind: OperatorKind, side: Side, order: FracOrder) -> Result<OperatorMatrix> {
    operator_matrix_with(grid, kind, side, order, Backend::GrunwaldLetnikov)
}

pub fn operator_matrix_with(
    grid: &Grid,
    kind: OperatorKind,
    side: Side,
    order: FracOrder,
    backend: Backend,
) -> Result<OperatorMatrix> {
    let op = FracOperator::new(*grid, kind, side, order, backend)?;
    Ok(OperatorMatrix {
        grid: *grid,
        kind,
        side,
        order,
        entries: op.matrix(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    fn ord(a: f64) -> FracOrder {
        FracOrder::new(a).unwrap()
    }

    fn max_rel_err(f: &GriddedFn, exact: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let g = f.grid();
        (0..g.n_nodes())
            .filter(|&i| g.node(i) >= lo - 1e-12 && g.node(i) <= hi + 1e-12)
            .map(|i| {
                let e = exact(g.node(i));
                ((f.value(i) - e) / e).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn order_validation() {
        assert_eq!(ord(0.5).n(), 1);
        assert_eq!(ord(1.5).n(), 2);
        assert_eq!(ord(1.0).n(), 2);
        let err = FracOrder::new(-1.0).unwrap_err().to_string();
        assert!(err.contains("alpha must be positive"));
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(f64::NAN).is_err());
        let f = GriddedFn::constant(unit(11), 1.0).unwrap();
        for bad in [1.0, 2.0, 2.5] {
            assert!(rl_deriv(&f, ord(bad), Side::Left, Backend::GrunwaldLetnikov).is_err());
            assert!(caputo_deriv(&f, ord(bad), Side::Left).is_err());
        }
        assert!(rl_deriv(&f, ord(1.5), Side::Left, Backend::TruncatedSeries(1)).is_err());
        assert!(series_deriv(&f, 0.5, Side::Left, 3).is_err());
        assert!(series_deriv(&f, 1.2, Side::Left, 1).is_err());
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = GriddedFn::constant(unit(101), 0.0).unwrap();
        for side in [Side::Left, Side::Right] {
            assert_eq!(rl_integral(&z, ord(0.7), side).sup_norm(), 0.0);
            for b in [Backend::GrunwaldLetnikov, Backend::L1Quadrature, Backend::TruncatedSeries(2)] {
                assert_eq!(rl_deriv(&z, ord(0.5), side, b).unwrap().sup_norm(), 0.0);
            }
            assert_eq!(caputo_deriv(&z, ord(0.5), side).unwrap().sup_norm(), 0.0);
            assert_eq!(series_deriv(&z, 0.5, side, 1).unwrap().values.sup_norm(), 0.0);
        }
    }

    #[test]
    fn integral_of_one() {
        let one = GriddedFn::constant(unit(1001), 1.0).unwrap();
        let i1 = rl_integral(&one, ord(1.0), Side::Left);
        let err = one.grid().nodes().zip(i1.values()).map(|(t, v)| (v - t).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3);

        let half = rl_integral(&one, ord(0.5), Side::Left);
        assert_eq!(half.value(0), 0.0);
        let exact = 1.0 / gamma(1.5);
        assert!(((half.value(1000) - exact) / exact).abs() < 1e-2);
        assert!((exact - 1.128_379).abs() < 1e-6);
    }

    #[test]
    fn product_trapezoid_exact_on_linear() {
        let g = unit(201);
        for mu in [0.25, 0.5, 1.0, 1.5] {
            let lin = GriddedFn::from_fn(g, |t| 2.0 - 3.0 * t).unwrap();
            let out = rl_integral(&lin, ord(mu), Side::Left);
            for (i, t) in g.nodes().enumerate() {
                let exact = 2.0 * t.powf(mu) / gamma(mu + 1.0) - 3.0 * t.powf(mu + 1.0) / gamma(mu + 2.0);
                assert!((out.value(i) - exact).abs() < 1e-11, "mu {mu} t {t}");
            }
        }
    }

    #[test]
    fn rl_deriv_power_rule_examples() {
        let g = unit(1001);
        let sqrt = GriddedFn::from_fn(g, f64::sqrt).unwrap();
        let d = rl_deriv(&sqrt, ord(0.5), Side::Left, Backend::GrunwaldLetnikov).unwrap();
        assert!(max_rel_err(&d, |_| gamma(1.5), 0.1, 1.0) <= 2e-2);

        let one = GriddedFn::constant(g, 1.0).unwrap();
        let d = rl_deriv(&one, ord(0.5), Side::Left, Backend::GrunwaldLetnikov).unwrap();
        let exact = |t: f64| t.powf(-0.5) / gamma(0.5);
        assert!(((d.value(1000) - 0.564_190) / 0.564_190).abs() < 2e-2);
        assert!(max_rel_err(&d, exact, 0.1, 1.0) <= 2e-2);
    }

    #[test]
    fn caputo_examples() {
        let g = unit(1001);
        for c in [1.0, -3.5, 5.0] {
            let f = GriddedFn::constant(g, c).unwrap();
            for side in [Side::Left, Side::Right] {
                for a in [0.5, 1.5] {
                    let d = caputo_deriv(&f, ord(a), side).unwrap();
                    assert!(d.sup_norm() < 1e-10, "c {c} alpha {a}");
                }
            }
        }
        let lin = GriddedFn::from_fn(g, |t| t).unwrap();
        let d = caputo_deriv(&lin, ord(0.5), Side::Left).unwrap();
        let k = 1.0 / gamma(1.5);
        assert!((k - 1.128_38).abs() < 1e-5);
        assert!(max_rel_err(&d, |t| k * t.sqrt(), 0.1, 1.0) <= 2e-2);
    }

    #[test]
    fn caputo_second_branch() {
        // α = 1.5 on t²: Γ(3)/Γ(1.5)·t^{0.5}
        let g = unit(1001);
        let sq = GriddedFn::from_fn(g, |t| t * t).unwrap();
        let d = caputo_deriv(&sq, ord(1.5), Side::Left).unwrap();
        let k = 2.0 / gamma(1.5);
        assert!(max_rel_err(&d, |t| k * t.sqrt(), 0.1, 1.0) <= 2e-2);
        let d = rl_deriv(&sq, ord(1.5), Side::Left, Backend::GrunwaldLetnikov).unwrap();
        assert!(max_rel_err(&d, |t| k * t.sqrt(), 0.1, 1.0) <= 2e-2);
    }

    #[test]
    fn caputo_rl_relation() {
        let g = unit(1001);
        let f = GriddedFn::from_fn(g, |t| 2.0 + t.sin()).unwrap();
        for alpha in [0.25, 0.5, 0.75] {
            for backend in [Backend::GrunwaldLetnikov, Backend::L1Quadrature] {
                let rl = rl_deriv(&f, ord(alpha), Side::Left, backend).unwrap();
                let cap = caputo_deriv(&f, ord(alpha), Side::Left).unwrap();
                let diff = rl.lincomb(1.0, &cap, -1.0).unwrap();
                let exact = |t: f64| 2.0 * t.powf(-alpha) / gamma(1.0 - alpha);
                assert!(max_rel_err(&diff, exact, 0.1, 1.0) <= 2e-2, "alpha {alpha} {backend}");
            }
        }
    }

    #[test]
    fn series_closed_forms() {
        let g = unit(201);
        for alpha in [0.25, 0.5, 0.75] {
            let c = 1.7;
            let f = GriddedFn::constant(g, c).unwrap();
            let s = series_deriv(&f, alpha, Side::Left, 0).unwrap();
            assert_eq!(s.singular_node, 0);
            for i in 1..g.n_nodes() {
                let exact = c * g.node(i).powf(-alpha) / gamma(1.0 - alpha);
                assert!(((s.values.value(i) - exact) / exact).abs() < 1e-13);
            }
            assert_eq!(s.values.value(0), s.values.value(1));

            // N = 1 is exact on linear functions, both sides.
            let lin = GriddedFn::from_fn(g, |t| t).unwrap();
            let s = series_deriv(&lin, alpha, Side::Left, 1).unwrap();
            for i in 1..g.n_nodes() {
                let t = g.node(i);
                let exact = t.powf(1.0 - alpha) / gamma(2.0 - alpha);
                assert!(((s.values.value(i) - exact) / exact).abs() < 1e-12);
            }
            let rlin = GriddedFn::from_fn(g, |t| 1.0 - t).unwrap();
            let s = series_deriv(&rlin, alpha, Side::Right, 1).unwrap();
            assert_eq!(s.singular_node, g.n_nodes() - 1);
            for i in 0..g.n_nodes() - 1 {
                let u = 1.0 - g.node(i);
                let exact = u.powf(1.0 - alpha) / gamma(2.0 - alpha);
                assert!(((s.values.value(i) - exact) / exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn series_right_uses_non_alternating_sign() {
        // k = 1 term of the right series carries −α/((1−α)Γ(1−α)) with no (−1)^{k−1}
        let g = unit(101);
        let alpha = 0.5;
        let lin = GriddedFn::from_fn(g, |t| t).unwrap();
        let s = series_deriv(&lin, alpha, Side::Right, 1).unwrap();
        let i = 30;
        let (t, u) = (g.node(i), 1.0 - g.node(i));
        let k0 = t * u.powf(-alpha) / gamma(1.0 - alpha);
        let k1 = -alpha * u.powf(1.0 - alpha) / ((1.0 - alpha) * gamma(1.0 - alpha));
        assert!((s.values.value(i) - (k0 + k1)).abs() < 1e-12);
    }

    #[test]
    fn matrices_match_pointwise() {
        let g = unit(64);
        let f = GriddedFn::from_fn(g, |t| (4.0 * t).sin() + t * t).unwrap();
        let cases = [
            (OperatorKind::RlIntegral, 0.6, Backend::GrunwaldLetnikov),
            (OperatorKind::RlIntegral, 1.4, Backend::GrunwaldLetnikov),
            (OperatorKind::RlDeriv, 0.3, Backend::GrunwaldLetnikov),
            (OperatorKind::RlDeriv, 1.3, Backend::GrunwaldLetnikov),
            (OperatorKind::RlDeriv, 0.3, Backend::L1Quadrature),
            (OperatorKind::RlDeriv, 1.6, Backend::L1Quadrature),
            (OperatorKind::RlDeriv, 0.4, Backend::TruncatedSeries(2)),
            (OperatorKind::CaputoDeriv, 0.4, Backend::L1Quadrature),
            (OperatorKind::CaputoDeriv, 1.4, Backend::L1Quadrature),
        ];
        for (kind, a, backend) in cases {
            for side in [Side::Left, Side::Right] {
                let op = FracOperator::new(g, kind, side, ord(a), backend).unwrap();
                let m = op.matrix();
                let direct = op.apply_values(f.values());
                let absf: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
                let scale = op.apply_abs_values(&absf);
                let via = &m * nalgebra::DVector::from_column_slice(f.values());
                for j in 0..g.n_nodes() {
                    let tol = 8.0 * f64::EPSILON * scale[j].max(1.0) * 4.0;
                    assert!(
                        (via[j] - direct[j]).abs() <= tol,
                        "{kind:?} {a} {backend} {side:?} row {j}: {} vs {}",
                        via[j],
                        direct[j]
                    );
                }
                for j in 0..g.n_nodes() {
                    for k in 0..g.n_nodes() {
                        let strict = match side {
                            Side::Left => k > j,
                            Side::Right => k < j,
                        };
                        if strict && !matches!(backend, Backend::TruncatedSeries(_) | Backend::L1Quadrature)
                            && kind != OperatorKind::CaputoDeriv
                        {
                            assert_eq!(m[(j, k)], 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gl_matrix_structure() {
        let g = unit(40);
        let l = operator_matrix(&g, OperatorKind::RlDeriv, Side::Left, ord(0.6)).unwrap();
        let r = operator_matrix(&g, OperatorKind::RlDeriv, Side::Right, ord(0.6)).unwrap();
        for j in 0..40 {
            for k in 0..40 {
                if k > j {
                    assert_eq!(l.entries[(j, k)], 0.0);
                }
                if j >= 1 && k >= 1 {
                    assert_eq!(l.entries[(j, k)], l.entries[(j - 1, k - 1)]);
                }
                assert_eq!(r.entries[(j, k)], l.entries[(k, j)]);
            }
        }
    }

    #[test]
    fn mirror_symmetry_exact() {
        let g = Grid::new(0.2, 1.7, 77).unwrap();
        let f = GriddedFn::from_fn(g, |t| (2.0 * t).cos() + t).unwrap();
        let fr = f.reflected();
        for (kind, backend) in [
            (OperatorKind::RlIntegral, Backend::GrunwaldLetnikov),
            (OperatorKind::RlDeriv, Backend::GrunwaldLetnikov),
            (OperatorKind::RlDeriv, Backend::L1Quadrature),
            (OperatorKind::RlDeriv, Backend::TruncatedSeries(1)),
            (OperatorKind::CaputoDeriv, Backend::L1Quadrature),
        ] {
            let right = FracOperator::new(g, kind, Side::Right, ord(0.45), backend).unwrap();
            let left = FracOperator::new(g, kind, Side::Left, ord(0.45), backend).unwrap();
            let a = right.apply(&f).unwrap();
            let b = left.apply(&fr).unwrap().reflected();
            assert_eq!(a.values(), b.values(), "{kind:?}");
        }
    }

    #[test]
    fn integral_semigroup_matrices() {
        let g = unit(1001);
        let a = operator_matrix(&g, OperatorKind::RlIntegral, Side::Left, ord(0.3)).unwrap();
        let b = operator_matrix(&g, OperatorKind::RlIntegral, Side::Left, ord(0.5)).unwrap();
        let ab = operator_matrix(&g, OperatorKind::RlIntegral, Side::Left, ord(0.8)).unwrap();
        let prod = &a.entries * &b.entries;
        for f in [
            GriddedFn::constant(g, 1.0).unwrap(),
            GriddedFn::from_fn(g, |t| t).unwrap(),
            GriddedFn::from_fn(g, |t| (3.0 * t).sin()).unwrap(),
        ] {
            let v = nalgebra::DVector::from_column_slice(f.values());
            let diff = &prod * &v - &ab.entries * &v;
            assert!(diff.amax() <= 5e-3, "{}", diff.amax());
        }
    }

    proptest::proptest! {
        #[test]
        fn operators_are_linear(
            seed in proptest::collection::vec(-3.0f64..3.0, 6),
            c in -4.0f64..4.0,
            d in -4.0f64..4.0,
            alpha in 0.05f64..0.95,
        ) {
            let g = unit(57);
            let f = GriddedFn::from_fn(g, |t| seed[0] + seed[1] * t + (seed[2] * t).sin()).unwrap();
            let h = GriddedFn::from_fn(g, |t| seed[3] * t * t + (seed[4] * t).cos() * seed[5]).unwrap();
            let comb = f.lincomb(c, &h, d).unwrap();
            for (kind, backend) in [
                (OperatorKind::RlIntegral, Backend::GrunwaldLetnikov),
                (OperatorKind::RlDeriv, Backend::GrunwaldLetnikov),
                (OperatorKind::RlDeriv, Backend::L1Quadrature),
                (OperatorKind::CaputoDeriv, Backend::L1Quadrature),
            ] {
                for side in [Side::Left, Side::Right] {
                    let op = FracOperator::new(g, kind, side, ord(alpha), backend).unwrap();
                    let lhs = op.apply_values(comb.values());
                    let fo = op.apply_values(f.values());
                    let ho = op.apply_values(h.values());
                    let mag: Vec<f64> = f.values().iter().zip(h.values()).map(|(x, y)| c.abs() * x.abs() + d.abs() * y.abs()).collect();
                    let scale = op.apply_abs_values(&mag).into_iter().fold(0.0, f64::max);
                    for j in 0..g.n_nodes() {
                        let rhs = c * fo[j] + d * ho[j];
                        proptest::prop_assert!((lhs[j] - rhs).abs() <= 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE));
                    }
                }
            }
        }
    }
}
