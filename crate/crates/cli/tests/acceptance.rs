//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use conan_core::bench::{
    bound_sweep, convergence_experiment, exact_fgw_two_node, runtime_scaling, synthetic_conformer,
    synthetic_graph, BOUND_SLACK,
};
use conan_core::conformer::{apply_rigid_motion, RigidMotion};
use conan_core::io::graph_to_json;
use conan_core::*;
use std::result::Result;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_structure(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(lo..hi);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let w = Array1::from_shape_fn(n, |_| rng.random_range(0.1..1.0));
    let s = w.sum();
    w / s
}

fn structure_loss(loss: LossKind, a: f64, b: f64) -> f64 {
    match loss {
        LossKind::Square => (a - b) * (a - b),
        LossKind::Kl => {
            let t = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
            t - a + b
        }
    }
}

fn tensor_decomposition_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut count = 0;
    for loss in [LossKind::Square, LossKind::Kl] {
        for _ in 0..120 {
            let (n1, n2) = (rng.random_range(2..=6), rng.random_range(2..=6));
            let a1 = random_structure(&mut rng, n1, 0.1, 3.0);
            let mut a2 = random_structure(&mut rng, n2, 0.1, 3.0);
            if loss == LossKind::Kl {
                a2.diag_mut().fill(0.5);
            }
            let w1 = random_simplex(&mut rng, n1);
            let w2 = random_simplex(&mut rng, n2);
            let pi = Array2::from_shape_fn((n1, n2), |(i, j)| w1[i] * w2[j] * rng.random_range(0.5..1.5));
            let pi = sinkhorn_lse(pi.mapv(|x: f64| -x.ln()).view(), w1.view(), w2.view(), 1.0, 10_000, 1e-14)
                .map_err(|e| e.to_string())?
                .coupling
                .pi;
            let m = Array2::from_shape_fn((n1, n2), |_| rng.random_range(0.0..2.0));
            let alpha = rng.random_range(0.0..=1.0);
            let dec = loss_decomposition(a1.view(), a2.view(), w1.view(), w2.view(), loss, None)
                .map_err(|e| e.to_string())?;
            let fast = apply_cost_tensor(&dec, m.view(), pi.view(), alpha).map_err(|e| e.to_string())?;
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut lp = 0.0;
                    for k in 0..n1 {
                        for l in 0..n2 {
                            lp += structure_loss(loss, a1[[i, k]], a2[[j, l]]) * pi[[k, l]];
                        }
                    }
                    let direct = (1.0 - alpha) * m[[i, j]] + 2.0 * alpha * lp;
                    worst = worst.max((fast[[i, j]] - direct).abs());
                }
            }
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-10 && secs < 10.0,
        format!("{count} instances, max |Δ| = {worst:.2e}, {secs:.2} s"),
    )
}

fn sinkhorn_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut converged, mut worst) = (0, 0.0f64);
    let total = 500;
    for t in 0..total {
        let eps = [0.01, 0.1, 1.0][t % 3];
        let (n1, n2) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let c = Array2::from_shape_fn((n1, n2), |_| rng.random_range(0.0..1.0));
        let mu1 = random_simplex(&mut rng, n1);
        let mu2 = random_simplex(&mut rng, n2);
        let r = sinkhorn_lse(c.view(), mu1.view(), mu2.view(), eps, 20_000, 1e-9).map_err(|e| e.to_string())?;
        if r.converged {
            converged += 1;
            worst = worst.max(r.marginal_err);
        }
    }
    let n = 6;
    let c = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
    let mu1 = random_simplex(&mut rng, n);
    let mu2 = random_simplex(&mut rng, n);
    let r = sinkhorn_lse(c.view(), mu1.view(), mu2.view(), 1e3, 1000, 1e-12).map_err(|e| e.to_string())?;
    let product_gap = r
        .coupling
        .pi
        .indexed_iter()
        .map(|((i, j), &p)| (p - mu1[i] * mu2[j]).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-6 && converged == total && product_gap <= 1e-3,
        format!("{converged}/{total} converged, max marginal_err = {worst:.2e}, ε=1e3 product gap = {product_gap:.2e}"),
    )
}

fn two_node_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = FgwParams {
        epsilon: 1e-3,
        inner_iters: 200,
        sinkhorn_iters: 5000,
        tol: 1e-9,
        ..FgwParams::default()
    };
    let mut worst = 0.0f64;
    let pairs = 100;
    for _ in 0..pairs {
        let mk = |rng: &mut ChaCha8Rng| {
            let h = Array2::from_shape_fn((2, 2), |_| rng.random_range(-1.0..1.0));
            AttributedGraph::new(h, random_structure(rng, 2, 0.2, 2.0), None)
        };
        let g1 = mk(&mut rng).map_err(|e| e.to_string())?;
        let g2 = mk(&mut rng).map_err(|e| e.to_string())?;
        let r = entropic_fgw(&g1, &g2, &params).map_err(|e| e.to_string())?;
        let exact = exact_fgw_two_node(&g1, &g2, params.alpha, 2, 2001).map_err(|e| e.to_string())?;
        worst = worst.max((r.cost - exact).abs());
    }
    check(worst <= 1e-3, format!("{pairs} pairs, max |cost − exact| = {worst:.2e}"))
}

fn conformer_graph(n: usize, seed: u64, enc: &EncoderWeights) -> AttributedGraph {
    let c = synthetic_conformer(n, seed).expect("conformer");
    conformer_to_graph(&c, enc, enc.config.cutoff).expect("graph")
}

fn self_distance() -> Outcome {
    let enc = EncoderWeights::from_seed(404, &EncoderConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_ratio, mut non_monotone) = (0.0f64, Vec::new());
    let graphs = 20;
    for g_idx in 0..graphs {
        let n = rng.random_range(2..=10);
        let g = conformer_graph(n, rng.random(), &enc);
        let m = feature_distance_matrix(g.features(), g.features(), 2).map_err(|e| e.to_string())?;
        let scale = m.mean().unwrap() + g.structure().mapv(|x| x * x).mean().unwrap();
        let mut costs = Vec::new();
        for h in 0..=4 {
            let params = FgwParams {
                epsilon: 0.01 / f64::powi(2.0, h),
                inner_iters: 100,
                sinkhorn_iters: 5000,
                tol: 1e-9,
                ..FgwParams::default()
            };
            costs.push(entropic_fgw(&g, &g, &params).map_err(|e| e.to_string())?.cost);
        }
        worst_ratio = worst_ratio.max(costs[0] / scale);
        // costs at the round-off floor compare as equal
        let floor = 1e-12 * scale;
        if costs.windows(2).any(|w| w[1] > w[0] + floor) {
            non_monotone.push(format!("graph {g_idx} (n={n}): {costs:?}"));
        }
    }
    check(
        worst_ratio <= 1e-2 && non_monotone.is_empty(),
        format!(
            "{graphs} graphs, max cost/scale at ε=0.01 = {worst_ratio:.2e}, non-monotone: {}",
            if non_monotone.is_empty() { "none".to_string() } else { non_monotone.join("; ") }
        ),
    )
}

fn random_molecule(rng: &mut ChaCha8Rng, n: usize, d0: usize) -> Molecule2D {
    let x = Array2::from_shape_fn((n, d0), |_| rng.random_range(0.0..1.0));
    let edges = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    Molecule2D::new(x, edges, None).expect("molecule")
}

fn group_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let triples = 50;
    for _ in 0..triples {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(1..=5);
        let seed: u64 = rng.random();
        let config = EncoderConfig {
            d0: 4,
            ..EncoderConfig::default()
        };
        let enc = EncoderWeights::from_seed(seed, &config);
        let mol = random_molecule(&mut rng, n, 4);
        let base = synthetic_conformer(n, rng.random()).map_err(|e| e.to_string())?;
        let confs: Vec<Conformer> = (0..k)
            .map(|_| perturb_conformer(&base, 0.1, rng.random()))
            .collect::<conan_core::Result<_>>()
            .map_err(|e| e.to_string())?;
        let mut moved: Vec<Conformer> = confs
            .iter()
            .map(|c| {
                let m = if rng.random_bool(0.5) { RigidMotion::random(&mut rng) } else { RigidMotion::random_improper(&mut rng) };
                apply_rigid_motion(c, &m)
            })
            .collect();
        moved.shuffle(&mut rng);
        let params = FgwParams::default();
        let y0 = conan_forward(&mol, &confs, &enc, &params).map_err(|e| e.to_string())?.y_hat;
        let y1 = conan_forward(&mol, &moved, &enc, &params).map_err(|e| e.to_string())?.y_hat;
        worst = worst.max((y1 - y0).abs() / y0.abs().max(f64::MIN_POSITIVE));
    }
    check(worst <= 1e-6, format!("{triples} triples, max relative Δŷ = {worst:.2e}"))
}

fn rel_frobenius(a: ndarray::ArrayView2<'_, f64>, b: ndarray::ArrayView2<'_, f64>) -> f64 {
    let diff = (&a - &b).mapv(|x| x * x).sum().sqrt();
    diff / b.mapv(|x| x * x).sum().sqrt()
}

fn barycenter_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let enc = EncoderWeights::from_seed(606, &EncoderConfig::default());
    let params = FgwParams {
        epsilon: 0.01,
        ..FgwParams::default()
    };
    let (mut worst_a, mut worst_h) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for t in 0..20 {
        let n = rng.random_range(2..=8);
        let g = if t % 2 == 0 {
            synthetic_graph(&mut rng, n, 4).map_err(|e| e.to_string())?
        } else {
            conformer_graph(n, rng.random(), &enc)
        };
        for k in [1, 3] {
            let inputs = vec![g.clone(); k];
            let r = barycenter(&inputs, &BarycenterOptions::default(), &params).map_err(|e| e.to_string())?;
            worst_a = worst_a.max(rel_frobenius(r.graph.structure(), g.structure()));
            worst_h = worst_h.max(rel_frobenius(r.graph.features(), g.features()));
            cases += 1;
        }
    }
    check(
        worst_a <= 0.05 && worst_h <= 0.05,
        format!("{cases} cases, max rel error A = {worst_a:.2e}, H = {worst_h:.2e}"),
    )
}

fn rate_experiment() -> Outcome {
    let start = Instant::now();
    let seed = 7;
    let base = synthetic_conformer(8, seed).map_err(|e| e.to_string())?;
    let enc = EncoderWeights::from_seed(seed, &EncoderConfig::default());
    let r = convergence_experiment(&base, 0.1, &[2, 4, 8, 16, 32], 20, &enc, &FgwParams::default(), seed)
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed();
    let slope = r.slope.ok_or("no slope")?;
    check(
        (-1.5..=-0.6).contains(&slope) && secs < Duration::from_secs(300),
        format!("slope = {slope:.3}, {:.1} s", secs.as_secs_f64()),
    )
}

fn bound_check() -> Outcome {
    let seed = 7;
    let enc = EncoderWeights::from_seed(seed, &EncoderConfig::default());
    let r = bound_sweep(20, seed, 0.5, 0.01, 0.1, &enc).map_err(|e| e.to_string())?;
    let margin = r
        .pairs
        .iter()
        .map(|c| c.w_bound + BOUND_SLACK - c.fgw_cost)
        .fold(f64::INFINITY, f64::min);
    let held = r.pairs.iter().filter(|c| c.holds).count();
    check(r.all_hold, format!("{held}/{} pairs hold, min margin = {margin:.3e}", r.pairs.len()))
}

fn linear_scaling() -> Outcome {
    let r = runtime_scaling(&[1, 2, 4, 8, 16, 32], 16, 16, 5, &FgwParams::default(), 0).map_err(|e| e.to_string())?;
    let ok = r.ratios.iter().all(|q| (1.5..=3.0).contains(q));
    check(ok, format!("ratios {:.2?}", r.ratios))
}

fn conan_bin(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_conan"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()));
    }
    let out = args.iter().position(|a| *a == "--out").map(|i| args[i + 1]);
    match out {
        Some(p) => std::fs::read(dir.join(p)).map_err(|e| e.to_string()),
        None => Ok(o.stdout),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let enc = EncoderWeights::from_seed(1010, &EncoderConfig::default());
    let mut names = Vec::new();
    for i in 0..4 {
        let g = conformer_graph(rng.random_range(3..=6), rng.random(), &enc);
        let name = format!("g{i}.json");
        conan_core::io::write_graph_json(d.join(&name), &g).map_err(|e| e.to_string())?;
        names.push(name);
    }
    let xyz = (0..3)
        .map(|s| perturb_conformer(&synthetic_conformer(5, 3).unwrap(), 0.1, s).unwrap())
        .collect::<Vec<_>>();
    std::fs::write(d.join("c.xyz"), conan_core::conformer::write_xyz(&xyz)).map_err(|e| e.to_string())?;
    std::fs::write(
        d.join("m.json"),
        r#"{"node_features": [[1, 0], [0, 1], [0, 1], [1, 1], [0, 0]], "edges": [[0, 1], [1, 2], [2, 3], [3, 4]]}"#,
    )
    .map_err(|e| e.to_string())?;

    let runs: [&[&str]; 3] = [
        &["conan", "forward", "--graph2d", "m.json", "--conformers", "c.xyz", "--seed", "5", "--out", "f.json"],
        &["bench", "convergence", "--kmax", "8", "--trials", "2", "--seed", "5", "--out", "conv.json"],
        &["bench", "bound", "--pairs", "4", "--seed", "5", "--out", "bound.json"],
    ];
    let mut identical = 0;
    for args in runs {
        let a = conan_bin(args, d)?;
        let b = conan_bin(args, d)?;
        if a != b {
            return Err(format!("{args:?} differs between runs"));
        }
        identical += 1;
    }

    let forward = names.join(",");
    let mut shuffled = names.clone();
    shuffled.reverse();
    shuffled.swap(0, 2);
    let backward = shuffled.join(",");
    let parse = |bytes: Vec<u8>| -> Result<serde_json::Value, String> { serde_json::from_slice(&bytes).map_err(|e| e.to_string()) };
    let v1 = parse(conan_bin(&["fgw", "barycenter", "--graphs", &forward, "--n-bar", "4"], d)?)?;
    let v2 = parse(conan_bin(&["fgw", "barycenter", "--graphs", &backward, "--n-bar", "4"], d)?)?;
    let g1 = conan_core::io::graph_from_json(&v1["graph"]).map_err(|e| e.to_string())?;
    let g2 = conan_core::io::graph_from_json(&v2["graph"]).map_err(|e| e.to_string())?;
    let max_diff = |x: ndarray::ArrayView2<'_, f64>, y: ndarray::ArrayView2<'_, f64>| {
        (&x - &y).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let diff = max_diff(g1.structure(), g2.structure())
        .max(max_diff(g1.features(), g2.features()))
        .max(max_diff(
            g1.weights().insert_axis(Axis(0)),
            g2.weights().insert_axis(Axis(0)),
        ));
    debug_assert_eq!(graph_to_json(&g1)["A"].as_array().map(|a| a.len()), Some(4));
    check(
        diff <= 1e-10,
        format!("{identical} seeded commands byte-identical, barycenter Δ under input reorder = {diff:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("tensor decomposition vs O(n^4) contraction", tensor_decomposition_oracle),
        ("Sinkhorn marginal contract and large-ε limit", sinkhorn_contract),
        ("2-node exact oracle at ε=1e-3", two_node_oracle),
        ("self-distance bound and ε-monotonicity", self_distance),
        ("rigid-motion and conformer-order invariance of ŷ", group_invariance),
        ("barycenter recovery for K=1 and identical inputs", barycenter_recovery),
        ("empirical convergence rate in K", rate_experiment),
        ("FGW ≤ Wasserstein bound on aligned pairs", bound_check),
        ("linear runtime scaling in K", linear_scaling),
        ("CLI determinism and input-order invariance", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
