//! Fixed-support entropic FGW barycenters by block-coordinate descent.
//!
//! Each outer iteration solves the `K` entropic FGW problems between the
//! current barycenter and the inputs, then applies the closed-form
//! structure and feature updates
//!
//! ```text
//! Ā ← (Σ_s λ_s π_s A_s π_sᵀ) ⊘ ω̄ω̄ᵀ          (square loss)
//! Ā ← exp((Σ_s λ_s π_s log(A_s) π_sᵀ) ⊘ ω̄ω̄ᵀ)  (KL loss)
//! H̄ ← diag(1/ω̄) Σ_s λ_s π_s H_s
//! ```
//!
//! Inputs are processed in a canonical order that depends only on their
//! contents, so the result does not depend on the order of the input list.
//! The canonical first graph (the anchor) seeds `(Ā, H̄)`.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fgw::{entropic_fgw_from, fgw_cost, loss_decomposition};
use crate::graph::{
    feature_distance_matrix, symmetrize, uniform, AttributedGraph, Coupling, FgwParams, LossKind,
    SIMPLEX_TOL,
};

#[derive(Debug, Clone)]
pub struct BarycenterOptions {
    /// Barycenter size; defaults to the common input size.
    pub n_bar: Option<usize>,
    /// Fixed node histogram; defaults to uniform.
    pub omega_bar: Option<Array1<f64>>,
    /// Input weights on the simplex; defaults to `1/K`.
    pub lambdas: Option<Vec<f64>>,
    /// Force `diag(Ā) = 0` after the KL structure update.
    pub zero_kl_diagonal: bool,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self {
            n_bar: None,
            omega_bar: None,
            lambdas: None,
            zero_kl_diagonal: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub graph: AttributedGraph,
    /// `π_s ∈ Π(ω̄, ω_s)`, in input order.
    pub couplings: Vec<Coupling>,
    pub outer_iterations: usize,
    /// `Σ_s λ_s FGW-objective(Ḡ, G_s; π_s)` after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

fn check_bar_weights(omega_bar: ArrayView1<'_, f64>) -> Result<()> {
    for (index, &value) in omega_bar.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveBarycenterWeight { index, value });
        }
    }
    Ok(())
}

fn check_couplings(
    couplings: &[ArrayView2<'_, f64>],
    sizes: impl Iterator<Item = usize>,
    n_bar: usize,
    lambdas: &[f64],
) -> Result<()> {
    if couplings.len() != lambdas.len() {
        return Err(Error::Shape(format!(
            "{} couplings but {} weights",
            couplings.len(),
            lambdas.len()
        )));
    }
    for (s, (pi, n)) in couplings.iter().zip(sizes).enumerate() {
        if pi.dim() != (n_bar, n) {
            return Err(Error::Shape(format!(
                "coupling {s} is {:?}, expected {:?}",
                pi.dim(),
                (n_bar, n)
            )));
        }
    }
    Ok(())
}

/// Closed-form structure update for fixed couplings; result is symmetrized.
pub fn structure_update(
    couplings: &[ArrayView2<'_, f64>],
    structures: &[ArrayView2<'_, f64>],
    omega_bar: ArrayView1<'_, f64>,
    lambdas: &[f64],
    loss: LossKind,
    kl_clamp: Option<f64>,
) -> Result<Array2<f64>> {
    check_bar_weights(omega_bar)?;
    let n_bar = omega_bar.len();
    if structures.len() != couplings.len() {
        return Err(Error::Shape("one structure matrix per coupling required".into()));
    }
    check_couplings(couplings, structures.iter().map(|a| a.nrows()), n_bar, lambdas)?;
    let mut acc = Array2::<f64>::zeros((n_bar, n_bar));
    for ((pi, a), &lambda) in couplings.iter().zip(structures).zip(lambdas) {
        if !a.is_square() {
            return Err(Error::Shape(format!("structure matrix is {:?}", a.dim())));
        }
        let term = match loss {
            LossKind::Square => pi.dot(a).dot(&pi.t()),
            LossKind::Kl => {
                let mut log_a = a.to_owned();
                for ((row, col), x) in log_a.indexed_iter_mut() {
                    let v = match kl_clamp {
                        Some(floor) => x.max(floor),
                        None => *x,
                    };
                    if !(v > 0.0) {
                        return Err(Error::KlNonPositive { row, col, value: v });
                    }
                    *x = v.ln();
                }
                pi.dot(&log_a).dot(&pi.t())
            }
        };
        acc.scaled_add(lambda, &term);
    }
    for ((i, j), x) in acc.indexed_iter_mut() {
        *x /= omega_bar[i] * omega_bar[j];
    }
    if loss == LossKind::Kl {
        acc.mapv_inplace(f64::exp);
    }
    Ok(symmetrize(&acc))
}

/// Closed-form feature update `diag(1/ω̄) Σ_s λ_s π_s H_s`.
pub fn feature_update(
    couplings: &[ArrayView2<'_, f64>],
    features: &[ArrayView2<'_, f64>],
    omega_bar: ArrayView1<'_, f64>,
    lambdas: &[f64],
) -> Result<Array2<f64>> {
    check_bar_weights(omega_bar)?;
    let n_bar = omega_bar.len();
    if features.len() != couplings.len() {
        return Err(Error::Shape("one feature matrix per coupling required".into()));
    }
    check_couplings(couplings, features.iter().map(|h| h.nrows()), n_bar, lambdas)?;
    let d = features.first().map(|h| h.ncols()).unwrap_or(0);
    if features.iter().any(|h| h.ncols() != d) {
        return Err(Error::Shape("feature dimensions differ across inputs".into()));
    }
    let mut acc = Array2::<f64>::zeros((n_bar, d));
    for ((pi, h), &lambda) in couplings.iter().zip(features).zip(lambdas) {
        acc.scaled_add(lambda, &pi.dot(h));
    }
    for (mut row, &w) in acc.axis_iter_mut(Axis(0)).zip(omega_bar.iter()) {
        row /= w;
    }
    Ok(acc)
}

fn cmp_slices<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>) -> Ordering {
    a.zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sorted_values<'a>(it: impl Iterator<Item = &'a f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.copied().collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Total order on graphs: node-order-free summaries first, raw contents
/// as the tie-break.
fn canonical_cmp(a: &AttributedGraph, b: &AttributedGraph) -> Ordering {
    a.n()
        .cmp(&b.n())
        .then(a.d().cmp(&b.d()))
        .then_with(|| {
            cmp_slices(
                sorted_values(a.features().iter()).iter(),
                sorted_values(b.features().iter()).iter(),
            )
        })
        .then_with(|| {
            cmp_slices(
                sorted_values(a.structure().iter()).iter(),
                sorted_values(b.structure().iter()).iter(),
            )
        })
        .then_with(|| {
            cmp_slices(
                sorted_values(a.weights().iter()).iter(),
                sorted_values(b.weights().iter()).iter(),
            )
        })
        .then_with(|| cmp_slices(a.features().iter(), b.features().iter()))
        .then_with(|| cmp_slices(a.structure().iter(), b.structure().iter()))
        .then_with(|| cmp_slices(a.weights().iter(), b.weights().iter()))
}

fn relative_change(new: &Array2<f64>, old: &Array2<f64>) -> f64 {
    let diff = (new - old).mapv(|x| x * x).sum().sqrt();
    let norm = old.mapv(|x| x * x).sum().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

fn resolve_lambdas(lambdas: Option<&Vec<f64>>, k: usize) -> Result<Vec<f64>> {
    match lambdas {
        None => Ok(vec![1.0 / k as f64; k]),
        Some(l) => {
            if l.len() != k {
                return Err(Error::Shape(format!("{} weights for {k} graphs", l.len())));
            }
            if l.iter().any(|&x| !(x >= 0.0)) || (l.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidParams("lambdas must lie on the simplex".into()));
            }
            Ok(l.clone())
        }
    }
}

/// Entropic FGW barycenter of `graphs` on a fixed support of `n_bar` nodes.
pub fn barycenter(
    graphs: &[AttributedGraph],
    opts: &BarycenterOptions,
    params: &FgwParams,
) -> Result<BarycenterResult> {
    params.validate()?;
    let k = graphs.len();
    if k == 0 {
        return Err(Error::Empty("barycenter needs at least one graph"));
    }
    let d = graphs[0].d();
    if graphs.iter().any(|g| g.d() != d) {
        return Err(Error::Shape("feature dimensions differ across inputs".into()));
    }
    let n_bar = match opts.n_bar {
        Some(0) => return Err(Error::InvalidParams("n_bar must be ≥ 1".into())),
        Some(n) => n,
        None => {
            let n = graphs[0].n();
            if graphs.iter().any(|g| g.n() != n) {
                return Err(Error::InvalidParams(
                    "inputs differ in size; n_bar must be given".into(),
                ));
            }
            n
        }
    };
    let omega_bar = opts.omega_bar.clone().unwrap_or_else(|| uniform(n_bar));
    if omega_bar.len() != n_bar {
        return Err(Error::Shape(format!(
            "omega_bar has length {}, expected {n_bar}",
            omega_bar.len()
        )));
    }
    check_bar_weights(omega_bar.view())?;
    if (omega_bar.sum() - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidParams("omega_bar must sum to 1".into()));
    }
    let lambdas_in = resolve_lambdas(opts.lambdas.as_ref(), k)?;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| {
        canonical_cmp(&graphs[x], &graphs[y]).then(lambdas_in[x].total_cmp(&lambdas_in[y]))
    });
    let sorted: Vec<&AttributedGraph> = order.iter().map(|&s| &graphs[s]).collect();
    let lambdas: Vec<f64> = order.iter().map(|&s| lambdas_in[s]).collect();

    let anchor = sorted[0];
    let map: Vec<usize> = (0..n_bar).map(|i| i * anchor.n() / n_bar).collect();
    let mut a_bar = anchor.structure().select(Axis(0), &map).select(Axis(1), &map);
    for i in 0..n_bar {
        a_bar[[i, i]] = 0.0;
    }
    let mut h_bar = anchor.features().select(Axis(0), &map);

    let mut plans: Vec<Option<Array2<f64>>> = vec![None; k];
    let mut trace = Vec::with_capacity(params.outer_iters);
    let mut converged = false;
    let mut outer = 0;

    while outer < params.outer_iters {
        outer += 1;
        let bary = AttributedGraph::new_unchecked(h_bar.clone(), a_bar.clone(), omega_bar.clone());
        let solved: Vec<Array2<f64>> = sorted
            .par_iter()
            .zip(plans.par_iter())
            .map(|(g, init)| entropic_fgw_from(&bary, g, params, init.as_ref()).map(|r| r.coupling.pi))
            .collect::<Result<_>>()?;

        let views: Vec<ArrayView2<'_, f64>> = solved.iter().map(|p| p.view()).collect();
        let structures: Vec<ArrayView2<'_, f64>> = sorted.iter().map(|g| g.structure()).collect();
        let features: Vec<ArrayView2<'_, f64>> = sorted.iter().map(|g| g.features()).collect();
        let mut a_next = structure_update(
            &views,
            &structures,
            omega_bar.view(),
            &lambdas,
            params.loss,
            params.kl_clamp,
        )?;
        if params.loss == LossKind::Kl && opts.zero_kl_diagonal {
            for i in 0..n_bar {
                a_next[[i, i]] = 0.0;
            }
        }
        let h_next = feature_update(&views, &features, omega_bar.view(), &lambdas)?;
        if a_next.iter().chain(h_next.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("barycenter update"));
        }

        let change = relative_change(&a_next, &a_bar).max(relative_change(&h_next, &h_bar));
        a_bar = a_next;
        h_bar = h_next;
        let bary = AttributedGraph::new_unchecked(h_bar.clone(), a_bar.clone(), omega_bar.clone());
        trace.push(weighted_objective(&bary, &sorted, &solved, &lambdas, params)?);
        plans = solved.into_iter().map(Some).collect();
        if change < params.tol {
            converged = true;
            break;
        }
    }

    let mut couplings: Vec<Option<Coupling>> = vec![None; k];
    for (pos, &s) in order.iter().enumerate() {
        let pi = plans[pos].take().expect("solved at least once");
        couplings[s] = Some(Coupling {
            pi,
            mu1: omega_bar.clone(),
            mu2: graphs[s].weights().to_owned(),
        });
    }
    Ok(BarycenterResult {
        graph: AttributedGraph::new_unchecked(h_bar, a_bar, omega_bar),
        couplings: couplings.into_iter().map(|c| c.expect("every input solved")).collect(),
        outer_iterations: outer,
        objective_trace: trace,
        converged,
    })
}

fn weighted_objective(
    bary: &AttributedGraph,
    graphs: &[&AttributedGraph],
    plans: &[Array2<f64>],
    lambdas: &[f64],
    params: &FgwParams,
) -> Result<f64> {
    let mut total = 0.0;
    for ((g, pi), &lambda) in graphs.iter().zip(plans).zip(lambdas) {
        let m = feature_distance_matrix(bary.features(), g.features(), 2)?;
        let dec = loss_decomposition(
            bary.structure(),
            g.structure(),
            bary.weights(),
            g.weights(),
            params.loss,
            params.kl_clamp,
        )?;
        total += lambda * fgw_cost(&dec, m.view(), pi.view(), params.alpha)?;
    }
    Ok(total)
}
