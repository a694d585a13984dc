//! Fractional calculus of variations at the level of the mean function.
//!
//! The functional `J[X] = E ∫ L(t, X, ₐD_t^α X, ₜD_b^α X) dt` depends on the
//! process only through `m(t) = E X(t)`, and the boundary conditions fix
//! `m(a)` and `m(b)`. Every solver here therefore optimises over `m`; any
//! process with the optimal mean is optimal.
//!
//! Discretisation: the derivatives are the dense operator matrices `A_L`,
//! `A_R` (Grünwald–Letnikov for the Riemann–Liouville flavour, L1 for
//! Caputo) and the integral is the trapezoid rule with weights `W`, so
//!
//! ```text
//! J_h(m) = Σ_i W_i · L(t_i, m_i, (A_L m)_i, (A_R m)_i)
//! ∇J_h   = W·∂₂L + A_Lᵀ W·∂₃L + A_Rᵀ W·∂₄L
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::config::{Config, Section};
use crate::ensemble::{mean_path, Ensemble};
use crate::error::{Error, Result};
use crate::fracnum::{Backend, Flavor, FracOperator, FracOrder, OperatorKind, Side};
use crate::grid::{trapezoid_values, trapezoid_weights, Grid, GriddedFn};

/// Largest allowed `|m(a) − X_a|`, `|m(b) − X_b|` for a candidate mean.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;
/// Fraction of the interval masked at each end in residual norms.
pub const RESIDUAL_BAND: f64 = 0.05;
/// Relative step of the central differences used for custom Lagrangians.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Zero,
    /// `V(x) = ½·k·x²`
    Harmonic { k: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Harmonic { k } => 0.5 * k * x * x,
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Harmonic { k } => k * x,
        }
    }
}

impl FromStr for Potential {
    type Err = Error;

    /// `zero`, `harmonic` (k = 1) or `harmonic:K`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "zero" => Ok(Potential::Zero),
            None if s == "harmonic" => Ok(Potential::Harmonic { k: 1.0 }),
            Some(("harmonic", k)) => k
                .trim()
                .parse()
                .map(|k| Potential::Harmonic { k })
                .map_err(|_| Error::param(format!("bad harmonic constant in `{s}`"))),
            _ => Err(Error::param(format!("unknown potential `{s}`, expected zero or harmonic:K"))),
        }
    }
}

/// `L(t, x, d_left, d_right)`.
pub type LagrangianFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum LagrangianKind {
    /// `c·d_left·d_right`
    QuadraticBilinear { c: f64 },
    /// `¼·m·(d_left² + d_right²) − V(x)`
    KineticPotential { mass: f64, potential: Potential },
    /// Arbitrary `C¹` integrand; partials by central differences.
    Custom { name: String, f: LagrangianFn },
}

impl fmt::Debug for LagrangianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LagrangianKind::QuadraticBilinear { c } => write!(f, "QuadraticBilinear {{ c: {c} }}"),
            LagrangianKind::KineticPotential { mass, potential } => {
                write!(f, "KineticPotential {{ mass: {mass}, potential: {potential:?} }}")
            }
            LagrangianKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lagrangian {
    pub kind: LagrangianKind,
    pub flavor: Flavor,
}

impl Lagrangian {
    pub fn quadratic_bilinear(c: f64) -> Self {
        Lagrangian {
            kind: LagrangianKind::QuadraticBilinear { c },
            flavor: Flavor::RiemannLiouville,
        }
    }

    pub fn kinetic_potential(mass: f64, potential: Potential) -> Self {
        Lagrangian {
            kind: LagrangianKind::KineticPotential { mass, potential },
            flavor: Flavor::RiemannLiouville,
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Lagrangian {
            kind: LagrangianKind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            flavor: Flavor::RiemannLiouville,
        }
    }

    /// Built-in custom integrands: `zero`, `x_squared` (`x²`), `bilinear`
    /// (`d_left·d_right`) and `kinetic` (`¼(d_left² + d_right²)`).
    pub fn named_custom(name: &str) -> Option<Self> {
        let l = match name {
            "zero" => Lagrangian::custom(name, |_, _, _, _| 0.0),
            "x_squared" => Lagrangian::custom(name, |_, x, _, _| x * x),
            "bilinear" => Lagrangian::custom(name, |_, _, dl, dr| dl * dr),
            "kinetic" => Lagrangian::custom(name, |_, _, dl, dr| 0.25 * (dl * dl + dr * dr)),
            _ => return None,
        };
        Some(l)
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    /// The same integrand as an opaque custom Lagrangian, for cross-checks.
    pub fn as_custom(&self) -> Self {
        let this = self.clone();
        Lagrangian::custom("as_custom", move |t, x, dl, dr| this.value(t, x, dl, dr)).with_flavor(self.flavor)
    }

    pub fn value(&self, t: f64, x: f64, dl: f64, dr: f64) -> f64 {
        match &self.kind {
            LagrangianKind::QuadraticBilinear { c } => c * dl * dr,
            LagrangianKind::KineticPotential { mass, potential } => 0.25 * mass * (dl * dl + dr * dr) - potential.value(x),
            LagrangianKind::Custom { f, .. } => f(t, x, dl, dr),
        }
    }

    /// `(∂L/∂x, ∂L/∂d_left, ∂L/∂d_right)`.
    pub fn partials(&self, t: f64, x: f64, dl: f64, dr: f64) -> (f64, f64, f64) {
        match &self.kind {
            LagrangianKind::QuadraticBilinear { c } => (0.0, c * dr, c * dl),
            LagrangianKind::KineticPotential { mass, potential } => (-potential.grad(x), 0.5 * mass * dl, 0.5 * mass * dr),
            LagrangianKind::Custom { f, .. } => {
                let central = |v: f64, g: &dyn Fn(f64) -> f64| {
                    let s = FD_STEP * v.abs().max(1.0);
                    (g(v + s) - g(v - s)) / (2.0 * s)
                };
                (
                    central(x, &|v| f(t, v, dl, dr)),
                    central(dl, &|v| f(t, x, v, dr)),
                    central(dr, &|v| f(t, x, dl, v)),
                )
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub lagrangian: Lagrangian,
    pub grid: Grid,
    pub alpha: FracOrder,
    pub xa: f64,
    pub xb: f64,
}

/// Parameters of the quadratic example solved by `reproduce-example2`.
pub const EXAMPLE2_ALPHA: f64 = 0.25;
pub const EXAMPLE2_A: f64 = 0.01;
pub const EXAMPLE2_B: f64 = 0.99;
pub const EXAMPLE2_BOUNDARY: f64 = 1.0;
pub const EXAMPLE2_NODES: usize = 99;

impl VariationalProblem {
    pub fn new(lagrangian: Lagrangian, grid: Grid, alpha: f64, xa: f64, xb: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !xa.is_finite() || !xb.is_finite() {
            return Err(Error::param("boundary values must be finite"));
        }
        if grid.n_nodes() < 4 {
            return Err(Error::InvalidGrid(format!(
                "a variational problem needs at least 4 nodes, got {}",
                grid.n_nodes()
            )));
        }
        Ok(VariationalProblem {
            lagrangian,
            grid,
            alpha: FracOrder::new(alpha)?,
            xa,
            xb,
        })
    }

    /// `J = ∫ ₐD_t^α X · ₜD_b^α X dt → min` with `E X(a) = E X(b) = 1`,
    /// `α = 1/4` on `[0.01, 0.99]`.
    pub fn example2(n_nodes: usize) -> Result<Self> {
        VariationalProblem::new(
            Lagrangian::quadratic_bilinear(1.0),
            Grid::new(EXAMPLE2_A, EXAMPLE2_B, n_nodes)?,
            EXAMPLE2_ALPHA,
            EXAMPLE2_BOUNDARY,
            EXAMPLE2_BOUNDARY,
        )
    }

    /// Same problem on another grid.
    pub fn on_grid(&self, grid: Grid) -> Result<Self> {
        VariationalProblem::new(self.lagrangian.clone(), grid, self.alpha.alpha(), self.xa, self.xb)
    }

    /// Straight line through the boundary values.
    pub fn linear_interpolant(&self) -> GriddedFn {
        let (a, len) = (self.grid.a(), self.grid.len());
        let v = (0..self.grid.n_nodes())
            .map(|i| {
                let s = (self.grid.node(i) - a) / len;
                self.xa + (self.xb - self.xa) * s
            })
            .collect();
        GriddedFn::from_parts(self.grid, v)
    }

    fn operator(&self, side: Side) -> FracOperator {
        let kind = match self.lagrangian.flavor {
            Flavor::RiemannLiouville => OperatorKind::RlDeriv,
            Flavor::Caputo => OperatorKind::CaputoDeriv,
        };
        FracOperator::new(self.grid, kind, side, self.alpha, Backend::GrunwaldLetnikov)
            .expect("alpha in (0, 1) is a valid derivative order")
    }

    fn check_mean(&self, mean: &GriddedFn) -> Result<()> {
        crate::grid::check_same_grid(&self.grid, mean.grid())?;
        let n = self.grid.n_nodes();
        let (ma, mb) = (mean.value(0), mean.value(n - 1));
        if (ma - self.xa).abs() > BOUNDARY_TOLERANCE || (mb - self.xb).abs() > BOUNDARY_TOLERANCE {
            return Err(Error::BoundaryMismatch(format!(
                "mean has end values ({ma}, {mb}), problem requires ({}, {})",
                self.xa, self.xb
            )));
        }
        Ok(())
    }
}

/// Dense discretisation of a problem.
struct Discrete {
    t: Vec<f64>,
    w: Vec<f64>,
    al: DMatrix<f64>,
    ar: DMatrix<f64>,
}

impl Discrete {
    fn new(p: &VariationalProblem) -> Self {
        Discrete {
            t: p.grid.nodes().collect(),
            w: trapezoid_weights(&p.grid),
            al: p.operator(Side::Left).matrix(),
            ar: p.operator(Side::Right).matrix(),
        }
    }

    fn derivs(&self, m: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (&self.al * m, &self.ar * m)
    }

    fn value(&self, l: &Lagrangian, m: &DVector<f64>) -> f64 {
        let (dl, dr) = self.derivs(m);
        (0..m.len())
            .map(|i| self.w[i] * l.value(self.t[i], m[i], dl[i], dr[i]))
            .sum()
    }

    /// Full gradient and the scale `Σ |terms|` it is a cancellation of.
    fn gradient(&self, l: &Lagrangian, m: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = m.len();
        let (dl, dr) = self.derivs(m);
        let mut px = DVector::zeros(n);
        let mut pl = DVector::zeros(n);
        let mut pr = DVector::zeros(n);
        for i in 0..n {
            let (a, b, c) = l.partials(self.t[i], m[i], dl[i], dr[i]);
            px[i] = self.w[i] * a;
            pl[i] = self.w[i] * b;
            pr[i] = self.w[i] * c;
        }
        let g = &px + self.al.tr_mul(&pl) + self.ar.tr_mul(&pr);
        let scale = px.abs() + self.al.abs().tr_mul(&pl.abs()) + self.ar.abs().tr_mul(&pr.abs());
        (g, scale)
    }
}

fn interior_sup(v: &DVector<f64>) -> f64 {
    let n = v.len();
    v.rows(1, n - 2).amax()
}

/// `J` of a candidate mean: trapezoid rule of `L` with the problem's
/// derivative operators. At this level the outer expectation is the
/// identity, since every argument of `L` is already a mean-level object.
pub fn evaluate_j(p: &VariationalProblem, mean: &GriddedFn) -> Result<f64> {
    p.check_mean(mean)?;
    let dl = p.operator(Side::Left).apply_values(mean.values());
    let dr = p.operator(Side::Right).apply_values(mean.values());
    let vals: Vec<f64> = (0..p.grid.n_nodes())
        .map(|i| p.lagrangian.value(p.grid.node(i), mean.value(i), dl[i], dr[i]))
        .collect();
    Ok(trapezoid_values(p.grid.h(), &vals))
}

/// Pointwise `∂₂L + ₜD_b^α[∂₃L] + ₐD_t^α[∂₄L]`, zero at both endpoints.
pub fn el_residual(p: &VariationalProblem, mean: &GriddedFn) -> Result<GriddedFn> {
    crate::grid::check_same_grid(&p.grid, mean.grid())?;
    let n = p.grid.n_nodes();
    let (left, right) = (p.operator(Side::Left), p.operator(Side::Right));
    let dl = left.apply_values(mean.values());
    let dr = right.apply_values(mean.values());
    let mut px = vec![0.0; n];
    let mut pl = vec![0.0; n];
    let mut pr = vec![0.0; n];
    for i in 0..n {
        (px[i], pl[i], pr[i]) = p.lagrangian.partials(p.grid.node(i), mean.value(i), dl[i], dr[i]);
    }
    let a = right.apply_values(&pl);
    let b = left.apply_values(&pr);
    let mut r: Vec<f64> = (0..n).map(|i| px[i] + a[i] + b[i]).collect();
    r[0] = 0.0;
    r[n - 1] = 0.0;
    GriddedFn::new(p.grid, r)
}

/// Sup-norm of a residual away from the 5% bands at both ends.
pub fn residual_norm(r: &GriddedFn) -> f64 {
    r.grid()
        .interior_mask(RESIDUAL_BAND, true, true)
        .into_iter()
        .fold(0.0f64, |m, i| m.max(r.value(i).abs()))
}

/// `ₐD_t^{2α} m + ₜD_b^{2α} m` with endpoints zeroed: the quadratic
/// example's Euler–Lagrange equation after merging `ₜD_b^α ∘ ₜD_b^α` and
/// `ₐD_t^α ∘ ₐD_t^α`. Grünwald–Letnikov weights compose exactly on one
/// side, so for `L = d_left·d_right` this agrees with [`el_residual`] up to
/// roundoff; in the continuum the merge needs vanishing initial values.
pub fn composed_order_residual(p: &VariationalProblem, mean: &GriddedFn) -> Result<GriddedFn> {
    crate::grid::check_same_grid(&p.grid, mean.grid())?;
    let two = FracOrder::new(2.0 * p.alpha.alpha())?;
    let op = |side| FracOperator::new(p.grid, OperatorKind::RlDeriv, side, two, Backend::GrunwaldLetnikov);
    let l = op(Side::Left)?.apply_values(mean.values());
    let r = op(Side::Right)?.apply_values(mean.values());
    let n = p.grid.n_nodes();
    let mut v: Vec<f64> = l.iter().zip(&r).map(|(x, y)| x + y).collect();
    v[0] = 0.0;
    v[n - 1] = 0.0;
    GriddedFn::new(p.grid, v)
}

#[derive(Debug, Clone)]
pub struct Extremal {
    pub mean: GriddedFn,
    pub j_value: f64,
    pub el_residual: GriddedFn,
    pub el_residual_norm: f64,
    /// Sup over interior nodes of the discrete gradient `∇J_h`.
    pub gradient_norm: f64,
    /// Sup over interior nodes of the absolute terms summed in `∇J_h`.
    pub gradient_scale: f64,
    pub iterations: usize,
    /// `J_h` after each accepted descent step (empty for the direct solver).
    pub history: Vec<f64>,
}

impl Extremal {
    pub fn relative_gradient(&self) -> f64 {
        if self.gradient_scale == 0.0 {
            self.gradient_norm
        } else {
            self.gradient_norm / self.gradient_scale
        }
    }

    /// `sup_t |m(t) − m(a + b − t)|`.
    pub fn asymmetry(&self) -> f64 {
        let v = self.mean.values();
        v.iter().zip(v.iter().rev()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }
}

fn finish(p: &VariationalProblem, d: &Discrete, m: DVector<f64>, iterations: usize, history: Vec<f64>) -> Result<Extremal> {
    let (g, scale) = d.gradient(&p.lagrangian, &m);
    let mean = GriddedFn::new(p.grid, m.as_slice().to_vec())?;
    let el = el_residual(p, &mean)?;
    Ok(Extremal {
        j_value: evaluate_j(p, &mean)?,
        el_residual_norm: residual_norm(&el),
        el_residual: el,
        mean,
        gradient_norm: interior_sup(&g),
        gradient_scale: interior_sup(&scale),
        iterations,
        history,
    })
}

/// Direct solve for `L = c·d_left·d_right`: the discrete functional is the
/// quadratic form `½ mᵀ H m` with `H = c(A_Lᵀ W A_R + A_Rᵀ W A_L)`, and its
/// interior stationarity system `H_II m_I = −H_IB m_B` is solved by LU with
/// partial pivoting.
pub fn solve_quadratic(p: &VariationalProblem) -> Result<Extremal> {
    let c = match p.lagrangian.kind {
        LagrangianKind::QuadraticBilinear { c } => c,
        _ => return Err(Error::param("the direct solver needs a quadratic bilinear Lagrangian")),
    };
    if p.lagrangian.flavor != Flavor::RiemannLiouville {
        return Err(Error::param("the direct solver covers the Riemann-Liouville flavour only"));
    }
    solve_bilinear(p, c, &Discrete::new(p))
}

/// The quadratic solve with derivative matrices from another backend
/// (for instance the truncated series). The returned residuals still use
/// the problem's own operators.
pub fn solve_quadratic_with(p: &VariationalProblem, backend: Backend) -> Result<Extremal> {
    let c = match p.lagrangian.kind {
        LagrangianKind::QuadraticBilinear { c } => c,
        _ => return Err(Error::param("the direct solver needs a quadratic bilinear Lagrangian")),
    };
    let m = |side| FracOperator::new(p.grid, OperatorKind::RlDeriv, side, p.alpha, backend).map(|o| o.matrix());
    let d = Discrete {
        t: p.grid.nodes().collect(),
        w: trapezoid_weights(&p.grid),
        al: m(Side::Left)?,
        ar: m(Side::Right)?,
    };
    let mut e = solve_bilinear(p, c, &d)?;
    let (g, scale) = d.gradient(&p.lagrangian, &DVector::from_column_slice(e.mean.values()));
    e.gradient_norm = interior_sup(&g);
    e.gradient_scale = interior_sup(&scale);
    Ok(e)
}

fn solve_bilinear(p: &VariationalProblem, c: f64, d: &Discrete) -> Result<Extremal> {
    let n = p.grid.n_nodes();
    let mut war = d.ar.clone();
    for (i, mut row) in war.row_iter_mut().enumerate() {
        row *= d.w[i];
    }
    let x = d.al.tr_mul(&war);
    let h = (&x + x.transpose()) * c;

    let ni = n - 2;
    let hii = h.view((1, 1), (ni, ni)).into_owned();
    let rhs = -(h.view((1, 0), (ni, 1)) * p.xa + h.view((1, n - 1), (ni, 1)) * p.xb);
    let lu = hii.lu();
    let u = lu.u();
    let diag = u.diagonal().abs();
    let (lo, hi) = (diag.min(), diag.max());
    let condition = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if !(condition < 1e14) {
        return Err(Error::Singular { condition });
    }
    let sol = lu.solve(&DVector::from_column_slice(rhs.column(0).as_slice())).ok_or(Error::Singular { condition })?;
    let mut m = DVector::zeros(n);
    m[0] = p.xa;
    m[n - 1] = p.xb;
    m.rows_mut(1, ni).copy_from(&sol);
    finish(p, d, m, 0, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_steps: usize,
    /// First trial step; later ones follow the Barzilai–Borwein rule.
    pub rate: f64,
    /// Stop once the interior gradient sup-norm is at most this.
    pub grad_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_steps: 20_000,
            rate: 1.0,
            grad_tol: 1e-10,
        }
    }
}

/// Projected gradient descent on the interior nodes of the discrete
/// functional. Steps are Barzilai–Borwein trials cut back until the Armijo
/// condition holds, so `J_h` never increases; the last accepted iterate is
/// therefore the best one. Stops at `grad_tol`, after `max_steps`, or once
/// a step no longer lowers `J_h` beyond roundoff.
pub fn solve_descent(p: &VariationalProblem, init: &GriddedFn, opts: DescentOptions) -> Result<Extremal> {
    p.check_mean(init)?;
    if !(opts.rate > 0.0) {
        return Err(Error::param(format!("descent rate must be positive, got {}", opts.rate)));
    }
    let d = Discrete::new(p);
    let l = &p.lagrangian;
    let n = p.grid.n_nodes();
    let project = |mut g: DVector<f64>| {
        g[0] = 0.0;
        g[n - 1] = 0.0;
        g
    };
    let mut m = DVector::from_column_slice(init.values());
    let mut j = d.value(l, &m);
    if !j.is_finite() {
        return Err(Error::param("the functional is not finite at the initial mean"));
    }
    let mut g = project(d.gradient(l, &m).0);
    let mut step = opts.rate;
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_steps && g.amax() > opts.grad_tol {
        let gg = g.dot(&g);
        let mut s = step;
        let accepted = loop {
            let trial = &m - &g * s;
            let jt = d.value(l, &trial);
            if jt.is_finite() && jt <= j - 1e-4 * s * gg {
                break Some((trial, jt));
            }
            s *= 0.5;
            if s < 1e-300 {
                break None;
            }
        };
        let Some((m_new, j_new)) = accepted else { break };
        // Decrease lost in roundoff: the gradient is as small as it gets.
        let stalled = j - j_new <= 4.0 * f64::EPSILON * j.abs();
        let g_new = project(d.gradient(l, &m_new).0);
        let dm = &m_new - &m;
        let dg = &g_new - &g;
        let curv = dm.dot(&dg);
        step = if curv > 0.0 { dm.dot(&dm) / curv } else { opts.rate };
        m = m_new;
        g = g_new;
        j = j_new;
        history.push(j);
        iterations += 1;
        if stalled {
            break;
        }
    }
    finish(p, &d, m, iterations, history)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1HNormReport {
    pub sup_h_norm: f64,
    pub sup_left_deriv: f64,
    pub sup_right_deriv: f64,
    pub total: f64,
    /// Node where `RMS + |D_L| + |D_R|` peaks.
    pub argmax: usize,
}

/// `sup_t (‖X(t)‖_H + |ₐˢD_t^α X| + |ₜˢD_b^α X|)` over the interior nodes,
/// with `‖X(t)‖_H` estimated by the ensemble RMS and Grünwald–Letnikov
/// derivatives of the mean. The three components are the terms at the
/// maximising node, so they add up to `total`.
pub fn c1h_norm(e: &Ensemble, alpha: f64) -> Result<C1HNormReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let order = FracOrder::new(alpha)?;
    let grid = *e.grid();
    let n = grid.n_nodes();
    if n < 3 {
        return Err(Error::InvalidGrid("the norm needs an interior node".into()));
    }
    let mean = mean_path(e).mean;
    let rms = e.rms();
    let d = |side| crate::fracnum::rl_deriv(&mean, order, side, Backend::GrunwaldLetnikov);
    let (dl, dr) = (d(Side::Left)?, d(Side::Right)?);
    let mut best = C1HNormReport {
        sup_h_norm: 0.0,
        sup_left_deriv: 0.0,
        sup_right_deriv: 0.0,
        total: 0.0,
        argmax: 1,
    };
    for i in 1..n - 1 {
        let (h, l, r) = (rms.value(i), dl.value(i).abs(), dr.value(i).abs());
        let total = h + l + r;
        if total > best.total {
            best = C1HNormReport {
                sup_h_norm: h,
                sup_left_deriv: l,
                sup_right_deriv: r,
                total,
                argmax: i,
            };
        }
    }
    Ok(best)
}

/// How a configured problem is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Direct,
    Descent(DescentOptions),
}

const PROBLEM_KEYS: [&str; 15] = [
    "lagrangian",
    "c",
    "mass",
    "potential",
    "flavor",
    "alpha",
    "a",
    "b",
    "nodes",
    "xa",
    "xb",
    "method",
    "steps",
    "rate",
    "tol",
];

/// Reads the single `[problem NAME]` section of a configuration:
///
/// ```text
/// [problem demo]
/// lagrangian = bilinear       # or kinetic, or custom:NAME
/// c = 1                       # bilinear coefficient
/// mass = 1                    # kinetic mass
/// potential = harmonic:1      # kinetic potential: zero | harmonic:K
/// flavor = rl                 # rl | caputo
/// alpha = 0.25
/// a = 0.01
/// b = 0.99
/// nodes = 99
/// xa = 1
/// xb = 1
/// method = direct             # direct | descent
/// steps = 20000
/// rate = 1
/// tol = 1e-10
/// ```
pub fn problem_from_config(c: &Config) -> Result<(VariationalProblem, SolveMethod)> {
    c.check_kinds(&["problem"])?;
    let mut sections = c.sections_of("problem");
    let s: &Section = sections.next().ok_or(Error::Config {
        line: 1,
        msg: "no [problem] section".into(),
    })?;
    if let Some(extra) = sections.next() {
        return Err(Error::Config {
            line: extra.line,
            msg: "only one [problem] section is allowed".into(),
        });
    }
    s.check_keys(&PROBLEM_KEYS)?;
    let kind: String = s.parse_or("lagrangian", "bilinear".to_string())?;
    let lagrangian = match kind.as_str() {
        "bilinear" => Lagrangian::quadratic_bilinear(s.parse_or("c", 1.0)?),
        "kinetic" => Lagrangian::kinetic_potential(s.parse_or("mass", 1.0)?, s.parse_or("potential", Potential::Zero)?),
        other => match other.strip_prefix("custom:").and_then(Lagrangian::named_custom) {
            Some(l) => l,
            None => {
                return Err(s.error(
                    "lagrangian",
                    format!("unknown Lagrangian `{other}`, expected bilinear, kinetic or custom:zero|x_squared|bilinear|kinetic"),
                ))
            }
        },
    };
    let lagrangian = lagrangian.with_flavor(s.parse_or("flavor", Flavor::RiemannLiouville)?);
    let grid = Grid::new(
        s.parse_or("a", EXAMPLE2_A)?,
        s.parse_or("b", EXAMPLE2_B)?,
        s.parse_or("nodes", EXAMPLE2_NODES)?,
    )
    .map_err(|e| s.error("nodes", e.to_string()))?;
    let p = VariationalProblem::new(
        lagrangian,
        grid,
        s.parse_or("alpha", EXAMPLE2_ALPHA)?,
        s.parse_or("xa", EXAMPLE2_BOUNDARY)?,
        s.parse_or("xb", EXAMPLE2_BOUNDARY)?,
    )
    .map_err(|e| s.error("alpha", e.to_string()))?;
    let defaults = DescentOptions::default();
    let method = match s.parse_or("method", "direct".to_string())?.as_str() {
        "direct" => SolveMethod::Direct,
        "descent" => SolveMethod::Descent(DescentOptions {
            max_steps: s.parse_or("steps", defaults.max_steps)?,
            rate: s.parse_or("rate", defaults.rate)?,
            grad_tol: s.parse_or("tol", defaults.grad_tol)?,
        }),
        other => return Err(s.error("method", format!("unknown method `{other}`, expected direct or descent"))),
    };
    Ok((p, method))
}

pub fn solve(p: &VariationalProblem, method: SolveMethod) -> Result<Extremal> {
    match method {
        SolveMethod::Direct => solve_quadratic(p),
        SolveMethod::Descent(opts) => solve_descent(p, &p.linear_interpolant(), opts),
    }
}
