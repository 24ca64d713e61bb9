//! Log-domain Sinkhorn solver for entropic optimal transport.
//!
//! The dual potentials `f`, `g` are updated with max-stabilized log-sum-exp
//! sweeps; the plan is only materialized as
//! `π = exp((f ⊕ g − C)/ε) · (μ1 ⊗ μ2)`.
//!
//! All reductions over an index set go through [`ordered_sum`], which sums
//! the terms in sorted order. Results therefore do not depend on the order
//! in which nodes are listed, only on the values.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::Coupling;

/// Dual potentials of the entropic OT problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
}

impl DualPotentials {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Self {
            f: Array1::zeros(n1),
            g: Array1::zeros(n2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    pub coupling: Coupling,
    pub potentials: DualPotentials,
    /// Number of full `(f, g)` sweeps performed.
    pub iterations: usize,
    pub marginal_err: f64,
    /// `marginal_err < tol` was reached before the sweep cap.
    pub converged: bool,
    /// Marginal error after each sweep.
    pub trace: Vec<f64>,
}

/// Sum with terms in ascending order.
pub(crate) fn ordered_sum(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(f64::total_cmp);
    buf.iter().sum()
}

/// `log Σ exp(x_k)` with max-subtraction; `buf` is clobbered.
pub(crate) fn log_sum_exp(buf: &mut [f64]) -> f64 {
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    for x in buf.iter_mut() {
        *x = (*x - max).exp();
    }
    max + ordered_sum(buf).ln()
}

fn check_marginal(mu: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    for (index, &value) in mu.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveMarginal { index, value });
        }
    }
    Ok(mu.mapv(f64::ln))
}

/// Solves `min ⟨C, π⟩ − ε H(π)` over couplings of `(μ1, μ2)` starting from
/// zero potentials.
pub fn sinkhorn_lse(
    cost: ArrayView2<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    mu2: ArrayView1<'_, f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    sinkhorn_lse_warm(cost, mu1, mu2, epsilon, max_iters, tol, None)
}

/// [`sinkhorn_lse`] starting from the given potentials.
pub fn sinkhorn_lse_warm(
    cost: ArrayView2<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    mu2: ArrayView1<'_, f64>,
    epsilon: f64,
    max_iters: usize,
    tol: f64,
    init: Option<&DualPotentials>,
) -> Result<SinkhornResult> {
    let (n1, n2) = cost.dim();
    if mu1.len() != n1 || mu2.len() != n2 {
        return Err(Error::Shape(format!(
            "cost is {n1}x{n2} but marginals have lengths {} and {}",
            mu1.len(),
            mu2.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParams(format!("epsilon = {epsilon} must be > 0")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix"));
    }
    let log_mu1 = check_marginal(mu1)?;
    let log_mu2 = check_marginal(mu2)?;

    let mut pot = match init {
        Some(p) if p.f.len() == n1 && p.g.len() == n2 => p.clone(),
        _ => DualPotentials::zeros(n1, n2),
    };
    let mut buf1 = vec![0.0; n1];
    let mut buf2 = vec![0.0; n2];
    let mut trace = Vec::new();
    let mut pi = Array2::zeros((n1, n2));
    let mut err = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iters.max(1) {
        iterations += 1;
        for i in 0..n1 {
            for k in 0..n2 {
                buf2[k] = log_mu2[k] + (pot.g[k] - cost[[i, k]]) / epsilon;
            }
            pot.f[i] = -epsilon * log_sum_exp(&mut buf2);
        }
        for j in 0..n2 {
            for k in 0..n1 {
                buf1[k] = log_mu1[k] + (pot.f[k] - cost[[k, j]]) / epsilon;
            }
            pot.g[j] = -epsilon * log_sum_exp(&mut buf1);
        }
        if pot.f.iter().chain(pot.g.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("dual potentials"));
        }
        fill_plan(&mut pi, cost, &pot, mu1, mu2, epsilon);
        err = marginal_error(pi.view(), mu1, mu2)?;
        trace.push(err);
        if err < tol {
            break;
        }
    }

    Ok(SinkhornResult {
        coupling: Coupling {
            pi,
            mu1: mu1.to_owned(),
            mu2: mu2.to_owned(),
        },
        potentials: pot,
        iterations,
        marginal_err: err,
        converged: err < tol,
        trace,
    })
}

fn fill_plan(
    pi: &mut Array2<f64>,
    cost: ArrayView2<'_, f64>,
    pot: &DualPotentials,
    mu1: ArrayView1<'_, f64>,
    mu2: ArrayView1<'_, f64>,
    epsilon: f64,
) {
    for ((i, j), p) in pi.indexed_iter_mut() {
        *p = ((pot.f[i] + pot.g[j] - cost[[i, j]]) / epsilon).exp() * mu1[i] * mu2[j];
    }
}

/// `max(‖π 1 − μ1‖₁, ‖πᵀ 1 − μ2‖₁)`.
pub fn marginal_error(
    pi: ArrayView2<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    mu2: ArrayView1<'_, f64>,
) -> Result<f64> {
    let (n1, n2) = pi.dim();
    if mu1.len() != n1 || mu2.len() != n2 {
        return Err(Error::Shape(format!(
            "plan is {n1}x{n2} but marginals have lengths {} and {}",
            mu1.len(),
            mu2.len()
        )));
    }
    let mut buf: Vec<f64> = Vec::with_capacity(n1.max(n2));
    let mut rows = Vec::with_capacity(n1);
    for i in 0..n1 {
        buf.clear();
        buf.extend(pi.row(i).iter().copied());
        rows.push((ordered_sum(&mut buf) - mu1[i]).abs());
    }
    let mut cols = Vec::with_capacity(n2);
    for j in 0..n2 {
        buf.clear();
        buf.extend(pi.column(j).iter().copied());
        cols.push((ordered_sum(&mut buf) - mu2[j]).abs());
    }
    Ok(ordered_sum(&mut rows).max(ordered_sum(&mut cols)))
}

/// `H(π) = −Σ π (log π − 1)` with `0 log 0 = 0`.
pub fn entropy(pi: ArrayView2<'_, f64>) -> Result<f64> {
    let mut terms = Vec::with_capacity(pi.len());
    for ((row, col), &p) in pi.indexed_iter() {
        if p < 0.0 || p.is_nan() {
            return Err(Error::NegativeEntry { row, col, value: p });
        }
        terms.push(if p == 0.0 { 0.0 } else { -p * (p.ln() - 1.0) });
    }
    Ok(ordered_sum(&mut terms))
}
