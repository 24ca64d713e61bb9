//! Attributed graphs in their optimal-transport view: node features `H`,
//! a symmetric pairwise structure matrix `A` and a node histogram `ω`.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative tolerance used when checking `A` for symmetry.
pub const SYMMETRY_RTOL: f64 = 1e-12;
/// Absolute tolerance on `Σ ω = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A graph `(H, A, ω)` with `n` nodes and `d`-dimensional node features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    h: Array2<f64>,
    a: Array2<f64>,
    omega: Array1<f64>,
}

impl AttributedGraph {
    /// Builds a validated graph.
    ///
    /// `A` is symmetrized as `(A + Aᵀ)/2` when its asymmetry is within
    /// [`SYMMETRY_RTOL`]; larger asymmetry is rejected. A missing `omega`
    /// becomes the uniform histogram.
    pub fn new(h: Array2<f64>, a: Array2<f64>, omega: Option<Array1<f64>>) -> Result<Self> {
        let n = h.nrows();
        let omega = omega.unwrap_or_else(|| uniform(n));
        let g = Self::new_unchecked(h, a, omega);
        let report = validate_graph(&g);
        if !report.is_pass() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        let a = symmetrize(&g.a);
        Ok(Self { a, ..g })
    }

    /// Builds a graph without any checks. Used by diagnostics and by
    /// solvers whose outputs are valid by construction.
    pub fn new_unchecked(h: Array2<f64>, a: Array2<f64>, omega: Array1<f64>) -> Self {
        Self { h, a, omega }
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn d(&self) -> usize {
        self.h.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.h.view()
    }

    pub fn structure(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.omega.view()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (self.h, self.a, self.omega)
    }

    /// Same graph with every structure entry multiplied by `c`.
    pub fn scale_structure(&self, c: f64) -> Self {
        Self::new_unchecked(self.h.clone(), &self.a * c, self.omega.clone())
    }
}

pub fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

pub(crate) fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    out
}

/// A single violated graph invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyGraph,
    ShapeMismatch(String),
    NonFinite(&'static str),
    Asymmetric { row: usize, col: usize },
    NegativeWeight { index: usize, value: f64 },
    WeightSum(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGraph => write!(f, "graph has no nodes or no feature columns"),
            Violation::ShapeMismatch(s) => write!(f, "{s}"),
            Violation::NonFinite(what) => write!(f, "non-finite entry in {what}"),
            Violation::Asymmetric { row, col } => {
                write!(f, "asymmetric structure at A[{row},{col}] vs A[{col},{row}]")
            }
            Violation::NegativeWeight { index, value } => {
                write!(f, "negative weight omega[{index}] = {value}")
            }
            Violation::WeightSum(s) => write!(f, "weights sum {s} ≠ 1"),
        }
    }
}

/// Outcome of [`validate_graph`]: empty means pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every graph invariant and lists the ones that fail.
pub fn validate_graph(g: &AttributedGraph) -> ValidationReport {
    let mut violations = Vec::new();
    let (n, d) = g.h.dim();
    if n == 0 || d == 0 {
        violations.push(Violation::EmptyGraph);
    }
    if g.a.dim() != (n, n) {
        violations.push(Violation::ShapeMismatch(format!(
            "A is {}x{}, expected {n}x{n}",
            g.a.nrows(),
            g.a.ncols()
        )));
    }
    if g.omega.len() != n {
        violations.push(Violation::ShapeMismatch(format!(
            "omega has length {}, expected {n}",
            g.omega.len()
        )));
    }
    if g.h.iter().any(|x| !x.is_finite()) {
        violations.push(Violation::NonFinite("H"));
    }
    if g.a.iter().any(|x| !x.is_finite()) {
        violations.push(Violation::NonFinite("A"));
    }
    if g.omega.iter().any(|x| !x.is_finite()) {
        violations.push(Violation::NonFinite("omega"));
    }
    if g.a.is_square() {
        let m = g.a.nrows();
        'outer: for i in 0..m {
            for j in (i + 1)..m {
                let (x, y) = (g.a[[i, j]], g.a[[j, i]]);
                if (x - y).abs() > SYMMETRY_RTOL * x.abs().max(1.0) {
                    violations.push(Violation::Asymmetric { row: i, col: j });
                    break 'outer;
                }
            }
        }
    }
    for (index, &value) in g.omega.iter().enumerate() {
        if value < 0.0 {
            violations.push(Violation::NegativeWeight { index, value });
        }
    }
    let sum = g.omega.sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        violations.push(Violation::WeightSum(sum));
    }
    ValidationReport { violations }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::PermutationSize {
            expected: n,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::NotAPermutation(format!("{perm:?}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Relabels nodes so that new node `i` is old node `perm[i]`.
pub fn permute_nodes(g: &AttributedGraph, perm: &[usize]) -> Result<AttributedGraph> {
    let n = g.n();
    check_permutation(perm, n)?;
    let h = g.h.select(Axis(0), perm);
    let a = g.a.select(Axis(0), perm).select(Axis(1), perm);
    let omega = g.omega.select(Axis(0), perm);
    Ok(AttributedGraph::new_unchecked(h, a, omega))
}

/// The permutation undoing `perm`.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// `M[i,j] = ‖H1[i] − H2[j]‖^p`.
pub fn feature_distance_matrix(
    h1: ArrayView2<'_, f64>,
    h2: ArrayView2<'_, f64>,
    p: u32,
) -> Result<Array2<f64>> {
    if h1.ncols() != h2.ncols() {
        return Err(Error::Shape(format!(
            "feature dimensions differ: {} vs {}",
            h1.ncols(),
            h2.ncols()
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParams("exponent p must be positive".into()));
    }
    let mut m = Array2::zeros((h1.nrows(), h2.nrows()));
    for (i, x) in h1.outer_iter().enumerate() {
        for (j, y) in h2.outer_iter().enumerate() {
            let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            m[[i, j]] = if p.is_multiple_of(2) {
                sq.powi((p / 2) as i32)
            } else {
                sq.sqrt().powi(p as i32)
            };
        }
    }
    Ok(m)
}

/// Structure loss used by the FGW objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Square,
    Kl,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "square" => Ok(LossKind::Square),
            "kl" => Ok(LossKind::Kl),
            other => Err(Error::InvalidParams(format!("unknown loss '{other}' (expected l2|kl)"))),
        }
    }
}

/// Solver parameters shared by the distance and barycenter routines.
#[derive(Debug, Clone, PartialEq)]
pub struct FgwParams {
    /// Structure/feature trade-off in `[0, 1]`.
    pub alpha: f64,
    pub p: u32,
    pub epsilon: f64,
    pub loss: LossKind,
    pub inner_iters: usize,
    pub sinkhorn_iters: usize,
    pub outer_iters: usize,
    pub tol: f64,
    /// Floor applied to structure entries before taking logs under the KL
    /// loss. `None` turns non-positive entries into an error.
    pub kl_clamp: Option<f64>,
}

impl Default for FgwParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            p: 2,
            epsilon: 0.1,
            loss: LossKind::Square,
            inner_iters: 30,
            sinkhorn_iters: 50,
            outer_iters: 10,
            tol: 1e-6,
            kl_clamp: Some(1e-12),
        }
    }
}

impl FgwParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParams(format!("alpha = {} not in [0, 1]", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if self.p == 0 {
            return Err(Error::InvalidParams("p must be a positive integer".into()));
        }
        if self.inner_iters == 0 || self.sinkhorn_iters == 0 || self.outer_iters == 0 {
            return Err(Error::InvalidParams("iteration caps must be ≥ 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParams(format!("tol = {} must be ≥ 0", self.tol)));
        }
        Ok(())
    }
}

/// A transport plan together with the marginals it should satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub pi: Array2<f64>,
    pub mu1: Array1<f64>,
    pub mu2: Array1<f64>,
}

impl Coupling {
    /// The product measure `μ1 μ2ᵀ`.
    pub fn product(mu1: ArrayView1<'_, f64>, mu2: ArrayView1<'_, f64>) -> Self {
        let pi = outer(mu1, mu2);
        Self {
            pi,
            mu1: mu1.to_owned(),
            mu2: mu2.to_owned(),
        }
    }

    pub fn marginal_error(&self) -> f64 {
        crate::sinkhorn::marginal_error(self.pi.view(), self.mu1.view(), self.mu2.view())
            .unwrap_or(f64::INFINITY)
    }
}

pub(crate) fn outer(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((u.len(), v.len()));
    for (i, &x) in u.iter().enumerate() {
        for (j, &y) in v.iter().enumerate() {
            out[[i, j]] = x * y;
        }
    }
    out
}
