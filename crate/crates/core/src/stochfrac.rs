//! Stochastic fractional operators: the expectation first, then the
//! classical operator.
//!
//! For an ensemble `e`, `apply(e, D1, α, ·)` is exactly
//! `rl_deriv(mean_path(e).mean, α, Left, ·)`, and likewise for the other
//! five kinds. Nothing here acts on individual paths.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::ensemble::{mean_path, Ensemble};
use crate::error::{Error, Result};
use crate::fracnum::{Backend, FracOperator, FracOrder, OperatorKind, Side};
use crate::grid::{trapezoid, GriddedFn};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StochOpKind {
    /// Left Riemann–Liouville derivative of the mean (D1).
    RlDerivLeft,
    /// Right Riemann–Liouville derivative (D2).
    RlDerivRight,
    /// Left Riemann–Liouville integral (D3).
    RlIntLeft,
    /// Right Riemann–Liouville integral (D4).
    RlIntRight,
    /// Left Caputo derivative (D5).
    CaputoLeft,
    /// Right Caputo derivative (D6).
    CaputoRight,
}

impl StochOpKind {
    pub const ALL: [StochOpKind; 6] = [
        StochOpKind::RlDerivLeft,
        StochOpKind::RlDerivRight,
        StochOpKind::RlIntLeft,
        StochOpKind::RlIntRight,
        StochOpKind::CaputoLeft,
        StochOpKind::CaputoRight,
    ];

    pub fn operator(self) -> (OperatorKind, Side) {
        match self {
            StochOpKind::RlDerivLeft => (OperatorKind::RlDeriv, Side::Left),
            StochOpKind::RlDerivRight => (OperatorKind::RlDeriv, Side::Right),
            StochOpKind::RlIntLeft => (OperatorKind::RlIntegral, Side::Left),
            StochOpKind::RlIntRight => (OperatorKind::RlIntegral, Side::Right),
            StochOpKind::CaputoLeft => (OperatorKind::CaputoDeriv, Side::Left),
            StochOpKind::CaputoRight => (OperatorKind::CaputoDeriv, Side::Right),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StochOpKind::RlDerivLeft => "d1",
            StochOpKind::RlDerivRight => "d2",
            StochOpKind::RlIntLeft => "d3",
            StochOpKind::RlIntRight => "d4",
            StochOpKind::CaputoLeft => "d5",
            StochOpKind::CaputoRight => "d6",
        }
    }
}

impl fmt::Display for StochOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StochOpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StochOpKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param(format!("unknown operator kind `{s}`, expected d1..d6")))
    }
}

#[derive(Debug, Clone)]
pub struct StochOpResult {
    pub value: GriddedFn,
    pub mean_used: GriddedFn,
    /// `|A|·se`, where `A` is the operator matrix and `se` the pointwise
    /// standard error of the mean. By Minkowski's inequality this bounds
    /// the standard deviation of `A·mean` whatever the correlation between
    /// nodes, so it is usually loose.
    pub standard_error: GriddedFn,
    pub backend: Backend,
}

pub fn operator_for(e: &Ensemble, kind: StochOpKind, order: FracOrder, backend: Backend) -> Result<FracOperator> {
    let (op, side) = kind.operator();
    FracOperator::new(*e.grid(), op, side, order, backend)
}

pub fn apply(e: &Ensemble, kind: StochOpKind, order: FracOrder, backend: Backend) -> Result<StochOpResult> {
    let op = operator_for(e, kind, order, backend)?;
    let est = mean_path(e);
    let value = op.apply(&est.mean)?;
    let standard_error = GriddedFn::new(*e.grid(), op.apply_abs_values(est.stderr.values()))?;
    Ok(StochOpResult {
        value,
        mean_used: est.mean,
        standard_error,
        backend: op.backend(),
    })
}

/// Evaluates several kinds concurrently over the same ensemble; results
/// come back in the order of `kinds`.
pub fn apply_many(
    e: &Ensemble,
    kinds: &[StochOpKind],
    order: FracOrder,
    backend: Backend,
) -> Vec<Result<StochOpResult>> {
    kinds.par_iter().map(|&k| apply(e, k, order, backend)).collect()
}

/// Both sides of `|ₐˢI_t^α X| ≤ k·‖E X‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundednessCheck {
    pub bound: f64,
    pub sup_abs: f64,
    pub k: f64,
    pub l1_norm: f64,
}

impl BoundednessCheck {
    /// Allows a few ulps for the equality case `α = 1`, `f ≡ 1`.
    pub fn holds(&self) -> bool {
        self.sup_abs <= self.bound * (1.0 + 8.0 * f64::EPSILON)
    }
}

/// Kernel constant of the boundedness estimate. For `α ≥ 1` it is
/// `(b−a)^{α−1}/Γ(α)`, the sup of the kernel. For `α < 1` the kernel is
/// unbounded, and on a grid of spacing `h` the constant
/// `max((b−a)^{α−1}, h^{α−1})/Γ(α)` is used instead.
pub fn boundedness_constant(len: f64, h: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        len.powf(alpha - 1.0) / gamma(alpha)
    } else {
        len.powf(alpha - 1.0).max(h.powf(alpha - 1.0)) / gamma(alpha)
    }
}

pub fn prop1_bound(e: &Ensemble, order: FracOrder) -> Result<BoundednessCheck> {
    let res = apply(e, StochOpKind::RlIntLeft, order, Backend::GrunwaldLetnikov)?;
    let l1_norm = trapezoid(&res.mean_used.map(f64::abs)?);
    let g = e.grid();
    let k = boundedness_constant(g.len(), g.h(), order.alpha());
    Ok(BoundednessCheck {
        bound: k * l1_norm,
        sup_abs: res.value.sup_norm(),
        k,
        l1_norm,
    })
}
