//! Seeded experiments: empirical barycenter convergence rate, runtime
//! scaling in `K`, and a sweep of the FGW ≤ W comparison.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::oracle::{wasserstein_bound_check, BoundCheck};
use crate::barycenter::{barycenter, BarycenterOptions};
use crate::conformer::{conformer_to_graph, perturb_conformer, Conformer, EncoderWeights};
use crate::error::{Error, Result};
use crate::fgw::entropic_fgw;
use crate::graph::{AttributedGraph, FgwParams};

/// Entropic strength used to score barycenters against the reference.
pub const RATE_EPSILON: f64 = 0.01;

const REF_STREAM: u64 = u64::MAX;

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn trial_stream(k: usize, trial: usize) -> u64 {
    ((k as u64) << 32) | trial as u64
}

/// Random heavy-atom cluster with pairwise separations of at least 1.2 Å.
pub fn synthetic_conformer(n: usize, seed: u64) -> Result<Conformer> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = 1.6 * (n as f64).cbrt() + 1.0;
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = [
            rng.random_range(0.0..side),
            rng.random_range(0.0..side),
            rng.random_range(0.0..side),
        ];
        let ok = pts.iter().all(|q| {
            let d2: f64 = (0..3).map(|c| (p[c] - q[c]).powi(2)).sum();
            d2 >= 1.44
        });
        if ok {
            pts.push(p);
        }
    }
    let z = (0..n).map(|_| [6, 7, 8][rng.random_range(0..3)]).collect();
    let r = Array2::from_shape_fn((n, 3), |(i, c)| pts[i][c]);
    Conformer::new(z, r)
}

fn perturbed_graphs(
    base: &Conformer,
    sigma: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
    enc: &EncoderWeights,
) -> Result<Vec<AttributedGraph>> {
    let seeds: Vec<u64> = (0..count).map(|_| rng.next_u64()).collect();
    seeds
        .into_par_iter()
        .map(|s| conformer_to_graph(&perturb_conformer(base, sigma, s)?, enc, enc.config.cutoff))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub k_values: Vec<usize>,
    /// Mean over trials of the entropic FGW cost to the reference barycenter.
    pub mean_sq_fgw: Vec<f64>,
    /// Least-squares slope of `ln(mean_sq_fgw)` against `ln K`; absent when
    /// the costs carry no signal.
    pub slope: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub k_ref: usize,
    pub sigma: f64,
    /// `costs[i][t]` for `k_values[i]` and trial `t`.
    pub costs: Vec<Vec<f64>>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Distance from barycenters of `K` perturbed conformers to a barycenter of
/// `4 · max K` of them, as `K` grows.
pub fn convergence_experiment(
    base: &Conformer,
    sigma: f64,
    k_values: &[usize],
    trials: usize,
    enc: &EncoderWeights,
    params: &FgwParams,
    seed: u64,
) -> Result<RateReport> {
    if k_values.len() < 2 {
        return Err(Error::InvalidParams("at least two K values are required".into()));
    }
    if k_values.windows(2).any(|w| w[0] >= w[1]) || k_values[0] == 0 {
        return Err(Error::InvalidParams("K values must be positive and strictly increasing".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be ≥ 1".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be ≥ 0")));
    }
    params.validate()?;
    let score = FgwParams {
        epsilon: RATE_EPSILON,
        ..params.clone()
    };
    let k_ref = 4 * k_values[k_values.len() - 1];
    let mut ref_rng = stream_rng(seed, REF_STREAM);
    let ref_graphs = perturbed_graphs(base, sigma, k_ref, &mut ref_rng, enc)?;
    let reference = barycenter(&ref_graphs, &BarycenterOptions::default(), params)?.graph;

    let mut costs = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let row: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, trial_stream(k, t));
                let graphs = perturbed_graphs(base, sigma, k, &mut rng, enc)?;
                let bary = barycenter(&graphs, &BarycenterOptions::default(), params)?;
                Ok(entropic_fgw(&reference, &bary.graph, &score)?.cost)
            })
            .collect::<Result<_>>()?;
        costs.push(row);
    }
    let mean_sq_fgw: Vec<f64> = costs.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let slope = if sigma > 0.0 && mean_sq_fgw.iter().all(|&m| m > 0.0 && m.is_finite()) {
        let lx: Vec<f64> = k_values.iter().map(|&k| (k as f64).ln()).collect();
        let ly: Vec<f64> = mean_sq_fgw.iter().map(|m| m.ln()).collect();
        fit_slope(&lx, &ly)
    } else {
        None
    };
    Ok(RateReport {
        k_values: k_values.to_vec(),
        mean_sq_fgw,
        slope,
        trials,
        seed,
        k_ref,
        sigma,
        costs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeReport {
    pub k_values: Vec<usize>,
    pub mean_seconds: Vec<f64>,
    /// `mean_seconds[i + 1] / mean_seconds[i]`.
    pub ratios: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub repeats: usize,
    /// Per-repeat timings, `seconds[i][r]`.
    pub seconds: Vec<Vec<f64>>,
}

/// Random Euclidean point-cloud graph with features in `[−1, 1]`.
pub fn synthetic_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize) -> Result<AttributedGraph> {
    let pts: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..3.0));
    let a = Array2::from_shape_fn((n, n), |(i, j)| {
        (0..3).map(|c| (pts[[i, c]] - pts[[j, c]]).powi(2)).sum::<f64>().sqrt()
    });
    let h = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    AttributedGraph::new(h, a, None)
}

/// Wall time of the barycenter solve as `K` grows. Convergence checks are
/// disabled (`tol = 0`) so every solve runs to its iteration caps, and the
/// solves run on one thread so the work is not spread across cores.
pub fn runtime_scaling(
    k_values: &[usize],
    n: usize,
    d: usize,
    repeats: usize,
    params: &FgwParams,
    seed: u64,
) -> Result<RuntimeReport> {
    if k_values.len() < 3 {
        return Err(Error::InvalidParams("at least three K values are required".into()));
    }
    if k_values.contains(&0) || n == 0 || d == 0 || repeats == 0 {
        return Err(Error::InvalidParams("K, n, d and repeats must be ≥ 1".into()));
    }
    let capped = FgwParams {
        tol: 0.0,
        ..params.clone()
    };
    capped.validate()?;
    let k_max = *k_values.iter().max().expect("non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<AttributedGraph> = (0..k_max)
        .map(|_| synthetic_graph(&mut rng, n, d))
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let seconds: Vec<Vec<f64>> = pool.install(|| {
        k_values
            .iter()
            .map(|&k| {
                (0..repeats)
                    .map(|_| {
                        let start = Instant::now();
                        barycenter(&graphs[..k], &BarycenterOptions::default(), &capped)?;
                        Ok(start.elapsed().as_secs_f64())
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()
    })?;
    let mean_seconds: Vec<f64> = seconds.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let ratios = mean_seconds.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(RuntimeReport {
        k_values: k_values.to_vec(),
        mean_seconds,
        ratios,
        n,
        d,
        repeats,
        seconds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub pairs: Vec<BoundCheck>,
    pub all_hold: bool,
    pub seed: u64,
    pub alpha: f64,
    pub epsilon: f64,
}

/// Index-aligned graph pairs from two perturbations of one random conformer.
pub fn aligned_pair(
    n: usize,
    sigma: f64,
    seed: u64,
    enc: &EncoderWeights,
) -> Result<(AttributedGraph, AttributedGraph)> {
    let base = synthetic_conformer(n, seed)?;
    let mut rng = stream_rng(seed, 1);
    let c1 = perturb_conformer(&base, sigma, rng.next_u64())?;
    let c2 = perturb_conformer(&base, sigma, rng.next_u64())?;
    Ok((
        conformer_to_graph(&c1, enc, enc.config.cutoff)?,
        conformer_to_graph(&c2, enc, enc.config.cutoff)?,
    ))
}

/// [`wasserstein_bound_check`] over `pairs` aligned pairs with `n ≤ 6`.
pub fn bound_sweep(
    pairs: usize,
    seed: u64,
    alpha: f64,
    epsilon: f64,
    sigma: f64,
    enc: &EncoderWeights,
) -> Result<BoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(usize, u64)> = (0..pairs).map(|_| (rng.random_range(2..=6), rng.next_u64())).collect();
    let checks: Vec<BoundCheck> = jobs
        .into_par_iter()
        .map(|(n, s)| {
            let (g1, g2) = aligned_pair(n, sigma, s, enc)?;
            wasserstein_bound_check(&g1, &g2, alpha, 2, epsilon)
        })
        .collect::<Result<_>>()?;
    Ok(BoundReport {
        all_hold: checks.iter().all(|c| c.holds),
        pairs: checks,
        seed,
        alpha,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformer::EncoderConfig;

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [2.0f64, 4.0, 8.0, 16.0].iter().map(|k| k.ln()).collect();
        let y: Vec<f64> = [2.0f64, 4.0, 8.0, 16.0].iter().map(|k| (3.0 / k).ln()).collect();
        assert!((fit_slope(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(fit_slope(&[1.0, 1.0], &[0.0, 1.0]), None);
    }

    #[test]
    fn synthetic_conformer_is_seeded_and_separated() {
        let a = synthetic_conformer(8, 3).unwrap();
        assert_eq!(a, synthetic_conformer(8, 3).unwrap());
        let d = crate::conformer::distance_matrix(a.coordinates());
        for i in 0..8 {
            for j in 0..8 {
                assert!(i == j || d[[i, j]] >= 1.2 - 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_experiment_is_flat() {
        let enc = EncoderWeights::from_seed(0, &EncoderConfig::default());
        let base = synthetic_conformer(5, 1).unwrap();
        let r = convergence_experiment(&base, 0.0, &[2, 4], 2, &enc, &FgwParams::default(), 3).unwrap();
        assert!(r.mean_sq_fgw.iter().all(|&m| m <= 1e-4), "{:?}", r.mean_sq_fgw);
        assert_eq!(r.slope, None);
    }

    #[test]
    fn experiment_is_reproducible() {
        let enc = EncoderWeights::from_seed(0, &EncoderConfig::default());
        let base = synthetic_conformer(4, 2).unwrap();
        let run = || convergence_experiment(&base, 0.1, &[2, 4], 3, &enc, &FgwParams::default(), 9).unwrap();
        assert_eq!(run(), run());
        assert!(convergence_experiment(&base, 0.1, &[4, 2], 3, &enc, &FgwParams::default(), 9).is_err());
    }

    #[test]
    fn runtime_report_shape() {
        let params = FgwParams {
            inner_iters: 2,
            sinkhorn_iters: 5,
            outer_iters: 2,
            ..FgwParams::default()
        };
        let r = runtime_scaling(&[1, 2, 4], 4, 3, 2, &params, 0).unwrap();
        assert_eq!(r.mean_seconds.len(), 3);
        assert_eq!(r.ratios.len(), 2);
        assert!(runtime_scaling(&[1, 2], 4, 3, 2, &params, 0).is_err());
    }
}
