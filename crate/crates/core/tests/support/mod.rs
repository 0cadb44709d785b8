//! Fixtures and independent oracles shared by the integration tests and the
//! acceptance harness of the `lcp` crate. Each check returns a short summary
//! on success and a description of the first violation otherwise.

#![allow(dead_code)]

use std::sync::Arc;

use lcp_core::baselines::{Regressor, RidgeConfig, RidgeModel};
use lcp_core::capsule::{squash, CapsuleConfig, CapsuleLayer};
use lcp_core::dataset::{ContextVectorTable, Entry, OovPolicy, WordVectorTable};
use lcp_core::features::{FeatureBlock, NgramVectorizer, DEFAULT_MAX_FEATURES};
use lcp_core::graph::{normalize_adjacency, GcnConfig, GcnLayers, GraphConfig, TextGraph};
use lcp_core::linalg::{Matrix, SparseMatrix};
use lcp_core::metrics::{mae, pearson};
use lcp_core::model::{adversarial_loss, assemble_examples, train, Example, FeatureSources, Model, ModelConfig};
use lcp_core::nn::{dropout, BiLstmConfig, BiLstmLayer, Linear, Mode, ParamSet, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

// ---------------------------------------------------------------------------
// Finite differences

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOLERANCE: f64 = 1e-3;
/// Below this magnitude on both sides an entry is compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradStats {
    pub fixtures: usize,
    pub entries: usize,
    pub max_rel: f64,
}

impl GradStats {
    fn merge(&mut self, entries: usize, max_rel: f64) {
        self.fixtures += 1;
        self.entries += entries;
        self.max_rel = self.max_rel.max(max_rel);
    }
}

fn eval_loss<F>(params: &ParamSet, build: &F) -> f64
where
    F: Fn(&mut Tape, &ParamSet) -> lcp_core::Result<Var>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, params).expect("fixture loss");
    tape.value(loss).item().expect("scalar loss")
}

/// Compares tape gradients of every parameter entry (at most `cap` per
/// tensor, spread evenly) against central differences. Returns the number
/// of entries checked and the largest relative error.
pub fn check_param_grads<F>(params: &ParamSet, build: F, cap: usize) -> Result<(usize, f64), String>
where
    F: Fn(&mut Tape, &ParamSet) -> lcp_core::Result<Var>,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, params).map_err(|e| e.to_string())?;
    tape.backward(loss).map_err(|e| e.to_string())?;
    let mut with_grads = params.clone();
    with_grads.zero_grad();
    with_grads.accumulate_grads(&tape);
    with_grads.fill_missing_grads();

    let mut work = params.clone();
    let mut checked = 0;
    let mut worst = 0.0f64;
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    for id in ids {
        let p = with_grads.get(id);
        let analytic = p.grad.clone().expect("filled");
        let len = p.value.len();
        let stride = len.div_ceil(cap).max(1);
        for i in (0..len).step_by(stride) {
            let orig = work.value(id).data()[i];
            work.get_mut(id).value.data_mut()[i] = orig + FD_STEP;
            let up = eval_loss(&work, &build);
            work.get_mut(id).value.data_mut()[i] = orig - FD_STEP;
            let down = eval_loss(&work, &build);
            work.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let rel = relative_error(analytic[i], numeric);
            if !(rel <= FD_TOLERANCE) {
                return Err(format!(
                    "{}[{i}]: analytic {:.9e} vs numeric {:.9e} (rel {rel:.2e})",
                    p.name, analytic[i], numeric
                ));
            }
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Ok((checked, worst))
}

/// Weighted sum `Σ c·y` with fixed random weights, so every output entry
/// gets a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, y: Var, rng: &mut ChaCha8Rng) -> lcp_core::Result<Var> {
    let shape = tape.shape(y).to_vec();
    let n = tape.value(y).len();
    let c = tape.constant(Tensor::new(&shape, uniform_vec(rng, n, -1.0, 1.0))?);
    let p = tape.mul(y, c)?;
    Ok(tape.sum(p))
}

pub const GRAD_FIXTURES: u64 = 100;

pub fn grad_linear(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let (b, i, o) = (r.gen_range(1..5), r.gen_range(1..7), r.gen_range(1..6));
    let mut ps = ParamSet::new();
    let layer = Linear::new(&mut ps, "lin", i, o, &mut r).unwrap();
    let x = ps.add("input", Tensor::new(&[b, i], uniform_vec(&mut r, b * i, -1.0, 1.0)).unwrap()).unwrap();
    let seed_c = r.gen();
    check_param_grads(
        &ps,
        move |t, ps| {
            let xv = t.param(ps, x);
            let y = layer.forward(t, ps, xv)?;
            let y = t.tanh(y);
            weighted_sum(t, y, &mut rng(seed_c))
        },
        64,
    )
}

/// Linear layer followed by dropout: eval mode (identity) for even seeds,
/// a fixed training mask for odd ones.
pub fn grad_dropout(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let (b, i, o) = (r.gen_range(1..4), r.gen_range(1..6), r.gen_range(2..6));
    let mut ps = ParamSet::new();
    let layer = Linear::new(&mut ps, "lin", i, o, &mut r).unwrap();
    let x = ps.add("input", Tensor::new(&[b, i], uniform_vec(&mut r, b * i, -1.0, 1.0)).unwrap()).unwrap();
    let mode = if seed % 2 == 0 { Mode::Eval } else { Mode::Train };
    let (seed_c, seed_mask) = (r.gen(), r.gen());
    check_param_grads(
        &ps,
        move |t, ps| {
            let xv = t.param(ps, x);
            let h = layer.forward(t, ps, xv)?;
            // the same mask on every evaluation
            let h = dropout(t, h, 0.4, mode, &mut rng(seed_mask))?;
            let y = t.sigmoid(h);
            weighted_sum(t, y, &mut rng(seed_c))
        },
        64,
    )
}

fn random_word(r: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let len = r.gen_range(min..=max);
    (0..len).map(|_| r.gen_range(b'a'..=b'z') as char).collect()
}

pub fn grad_bilstm(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let cfg = BiLstmConfig { char_dim: r.gen_range(1..4), hidden: r.gen_range(1..4) };
    let mut ps = ParamSet::new();
    let layer = BiLstmLayer::new(&mut ps, "bilstm", cfg, &mut r).unwrap();
    let word = random_word(&mut r, 1, 6);
    let seed_c = r.gen();
    check_param_grads(
        &ps,
        move |t, ps| {
            let h = layer.encode(t, ps, &word)?;
            weighted_sum(t, h, &mut rng(seed_c))
        },
        400,
    )
}

/// Random symmetric non-negative adjacency with roughly half the off
/// diagonal pairs connected.
pub fn random_adjacency(r: &mut ChaCha8Rng, n: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen_bool(0.5) {
                let w = r.gen_range(0.1..2.0);
                t.push((i, j, w));
                t.push((j, i, w));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t).unwrap()
}

pub fn grad_gcn(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let n = r.gen_range(2..7);
    let f = r.gen_range(1..4);
    let graph = TextGraph::from_adjacency((0..n).map(|i| format!("d{i}")).collect(), vec![], random_adjacency(&mut r, n)).unwrap();
    let cfg = GcnConfig { hidden: r.gen_range(1..5), output: r.gen_range(1..4) };
    let mut ps = ParamSet::new();
    let layers = GcnLayers::new(&mut ps, "gcn", f, cfg, &mut r).unwrap();
    let x = ps.add("features", Tensor::new(&[n, f], uniform_vec(&mut r, n * f, -1.0, 1.0)).unwrap()).unwrap();
    let mut rows: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.6)).collect();
    if rows.is_empty() {
        rows.push(r.gen_range(0..n));
    }
    let seed_c = r.gen();
    check_param_grads(
        &ps,
        move |t, ps| {
            let xv = t.param(ps, x);
            let out = layers.forward_rows(t, ps, &graph, Some(xv), &rows)?;
            weighted_sum(t, out, &mut rng(seed_c))
        },
        200,
    )
}

pub fn grad_capsule(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let cfg = CapsuleConfig {
        n_in: r.gen_range(1..5),
        d_in: r.gen_range(1..4),
        n_out: r.gen_range(1..4),
        d_out: r.gen_range(1..4),
        routings: r.gen_range(1..5),
    };
    let mut ps = ParamSet::new();
    let layer = CapsuleLayer::new(&mut ps, "capsule", cfg, &mut r).unwrap();
    // larger weights than the default init keep the squash away from its
    // flat region near zero
    for v in ps.get_mut(layer.weight()).value.data_mut() {
        *v *= 10.0;
    }
    let u = ps.add("u", Tensor::new(&[cfg.n_in, cfg.d_in], uniform_vec(&mut r, cfg.input_dim(), -1.0, 1.0)).unwrap()).unwrap();
    let seed_c = r.gen();
    check_param_grads(
        &ps,
        move |t, ps| {
            let uv = t.param(ps, u);
            let v = layer.route(t, ps, uv)?;
            weighted_sum(t, v, &mut rng(seed_c))
        },
        200,
    )
}

/// Small all-blocks model on a handful of examples; checks the gradient of
/// the batch MSE through the head and every encoder.
pub fn grad_full_head(seed: u64) -> Result<(usize, f64), String> {
    let mut r = rng(seed);
    let cfg = ModelConfig {
        word_dim: 4,
        context_dim: 6,
        hidden1: r.gen_range(2..7),
        hidden2: r.gen_range(2..5),
        dropout: 0.0,
        seed: r.gen(),
        bilstm: BiLstmConfig { char_dim: 2, hidden: 2 },
        graph: GraphConfig { window: 3, min_word_count: 1 },
        gcn: GcnConfig { hidden: 3, output: 2 },
        capsule: CapsuleConfig { n_in: 3, d_in: 2, n_out: 2, d_out: 2, routings: 3 },
        ..ModelConfig::default()
    };
    let k = 3;
    let b = r.gen_range(1..4);
    let fixture = synthetic(&mut r, b, cfg, k, |_, _| 0.5);
    let mut model = Model::new(cfg, k, Some(fixture.graph.clone())).unwrap();
    let examples = fixture.examples(&cfg);
    // random golds, away from the sigmoid's flat tails
    let examples: Vec<Example> =
        examples.into_iter().map(|e| Example { gold: Some(r.gen_range(0.1..0.9)), ..e }).collect();
    model.fit_standardization(&examples).unwrap();
    let model = Arc::new(model);
    let m = Arc::clone(&model);
    check_param_grads(
        &model.params,
        move |t, ps| {
            let mut local = (*m).clone();
            local.params = ps.clone();
            local.loss(t, &examples)
        },
        40,
    )
}

pub type GradFixture = fn(u64) -> Result<(usize, f64), String>;

pub const GRAD_LAYERS: [(&str, GradFixture); 6] = [
    ("linear", grad_linear),
    ("dropout-eval", grad_dropout),
    ("bilstm", grad_bilstm),
    ("gcn", grad_gcn),
    ("capsule", grad_capsule),
    ("full head", grad_full_head),
];

pub fn gradient_oracle_layer(name: &str, f: GradFixture) -> Result<GradStats, String> {
    let mut stats = GradStats::default();
    for seed in 0..GRAD_FIXTURES {
        let (n, worst) = f(seed).map_err(|e| format!("{name} fixture {seed}: {e}"))?;
        stats.merge(n, worst);
    }
    Ok(stats)
}

pub fn gradient_oracle() -> Check {
    let start = std::time::Instant::now();
    let mut parts = Vec::new();
    for (name, f) in GRAD_LAYERS {
        let s = gradient_oracle_layer(name, f)?;
        parts.push(format!("{name}: {} fixtures/{} entries, max rel {:.1e}", s.fixtures, s.entries, s.max_rel));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Err(format!("took {secs:.1}s (limit 60s)"));
    }
    Ok(format!("{} in {secs:.1}s", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// Routing

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniform couplings `c = 1/n_out`, one pass, squash: the routings=1
/// closed form `squash(Σᵢ c·Ŵᵢⱼuᵢ)`, computed with plain loops.
pub fn uniform_routing_oracle(w: &Tensor, cfg: CapsuleConfig, u: &[f64]) -> Vec<f64> {
    let CapsuleConfig { n_in, d_in, n_out, d_out, .. } = cfg;
    let wd = w.data();
    let c = 1.0 / n_out as f64;
    let mut out = Vec::with_capacity(n_out * d_out);
    for j in 0..n_out {
        let mut s = vec![0.0; d_out];
        for i in 0..n_in {
            for (k, sk) in s.iter_mut().enumerate() {
                let row = (i * n_out * d_out + j * d_out + k) * d_in;
                let u_hat: f64 = (0..d_in).map(|l| wd[row + l] * u[i * d_in + l]).sum();
                *sk += c * u_hat;
            }
        }
        out.extend(squash(&s));
    }
    out
}

pub fn routing_invariants() -> Check {
    let mut iterations = 0;
    for seed in 0..200u64 {
        let mut r = rng(1000 + seed);
        let cfg = if seed < 20 {
            CapsuleConfig::default()
        } else {
            CapsuleConfig {
                n_in: r.gen_range(1..9),
                d_in: r.gen_range(1..6),
                n_out: r.gen_range(1..6),
                d_out: r.gen_range(1..6),
                routings: r.gen_range(1..7),
            }
        };
        let mut ps = ParamSet::new();
        let layer = CapsuleLayer::new(&mut ps, "capsule", cfg, &mut r).unwrap();
        let scale = [0.01, 1.0, 100.0][seed as usize % 3];
        let u = uniform_vec(&mut r, cfg.input_dim(), -scale, scale);
        let mut tape = Tape::new();
        let uv = tape.constant(Tensor::new(&[cfg.n_in, cfg.d_in], u.clone()).unwrap());
        let trace = layer.route_traced(&mut tape, &ps, uv).unwrap();
        if trace.couplings.len() != cfg.routings {
            return Err(format!("fixture {seed}: {} coupling matrices for {} routings", trace.couplings.len(), cfg.routings));
        }
        for (it, c) in trace.couplings.iter().enumerate() {
            for (i, row) in c.data().chunks(cfg.n_out).enumerate() {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(format!("fixture {seed}, iteration {it}, input capsule {i}: couplings sum to {s}"));
                }
            }
            iterations += 1;
        }
        let v = tape.value(trace.output).data();
        for (j, cap) in v.chunks(cfg.d_out).enumerate() {
            if !(norm(cap) < 1.0) {
                return Err(format!("fixture {seed}: output capsule {j} has norm {}", norm(cap)));
            }
        }
        let mut ps1 = ParamSet::new();
        let one = CapsuleLayer::new(&mut ps1, "capsule", CapsuleConfig { routings: 1, ..cfg }, &mut r).unwrap();
        ps1.set_value("capsule.weight", ps.value(layer.weight()).clone()).unwrap();
        let mut tape = Tape::new();
        let uv = tape.constant(Tensor::new(&[cfg.n_in, cfg.d_in], u.clone()).unwrap());
        let got = one.route(&mut tape, &ps1, uv).unwrap();
        let expect = uniform_routing_oracle(ps.value(layer.weight()), cfg, &u);
        if tape.value(got).data() != expect.as_slice() {
            return Err(format!("fixture {seed}: routings=1 differs from the uniform closed form"));
        }
    }
    // squash over directions and magnitudes spanning twelve decades
    let mut r = rng(77);
    for _ in 0..10_000 {
        let d = r.gen_range(1..20);
        let mag = 10f64.powf(r.gen_range(-6.0..6.0));
        let s: Vec<f64> = uniform_vec(&mut r, d, -1.0, 1.0).into_iter().map(|x| x * mag).collect();
        let n = norm(&squash(&s));
        if !(n < 1.0) {
            return Err(format!("squash of a norm-{} vector has norm {n}", norm(&s)));
        }
    }
    Ok(format!("200 routing fixtures, {iterations} iterations; 10000 squash draws"))
}

// ---------------------------------------------------------------------------
// Graph

/// `D^{-1/2}(A + I)D^{-1/2}` on a dense matrix, by plain loops.
pub fn dense_normalized(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut m = a.clone();
    for i in 0..n {
        m.row_mut(i)[i] += 1.0;
    }
    let d: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum::<f64>()).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.row_mut(i)[j] = m.row(i)[j] / d[i].sqrt() / d[j].sqrt();
        }
    }
    out
}

fn gcn_all_rows(layers: &GcnLayers, ps: &ParamSet, graph: &TextGraph, x: &Tensor) -> Vec<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let rows: Vec<usize> = (0..graph.n_nodes()).collect();
    let out = layers.forward_rows(&mut tape, ps, graph, Some(xv), &rows).unwrap();
    tape.value(out).data().to_vec()
}

pub fn graph_oracle() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let mut r = rng(2000 + seed);
        let mut dense = Matrix::zeros(5, 5);
        for i in 0..5 {
            for j in i..5 {
                // include zeros, self loops and wide weight ranges
                let w = if r.gen_bool(0.3) { 0.0 } else { 10f64.powf(r.gen_range(-3.0..3.0)) };
                dense.row_mut(i)[j] = w;
                dense.row_mut(j)[i] = w;
            }
        }
        let got = normalize_adjacency(&SparseMatrix::from_dense(&dense)).map_err(|e| e.to_string())?.to_dense();
        let expect = dense_normalized(&dense);
        for (g, e) in got.data().iter().zip(expect.data()) {
            let diff = (g - e).abs();
            worst = worst.max(diff);
            if diff > 1e-12 {
                return Err(format!("fixture {seed}: {g} vs oracle {e}"));
            }
        }
    }

    let mut r = rng(3000);
    let n = 7;
    let f = 3;
    let adjacency = random_adjacency(&mut r, n);
    let names = |perm: &[usize]| perm.iter().map(|i| format!("n{i}")).collect::<Vec<_>>();
    let identity: Vec<usize> = (0..n).collect();
    let graph = TextGraph::from_adjacency(names(&identity), vec![], adjacency.clone()).unwrap();
    let mut ps = ParamSet::new();
    let layers = GcnLayers::new(&mut ps, "gcn", f, GcnConfig { hidden: 5, output: 4 }, &mut r).unwrap();
    let x = Tensor::new(&[n, f], uniform_vec(&mut r, n * f, -1.0, 1.0)).unwrap();
    let base = gcn_all_rows(&layers, &ps, &graph, &x);
    let mut perm_worst = 0.0f64;
    for p in 0..10 {
        let mut perm = identity.clone();
        perm.shuffle(&mut r);
        // new node i is old node perm[i]
        let t: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, adjacency.get(perm[i], perm[j])))
            .filter(|t| t.2 != 0.0)
            .collect();
        let permuted = TextGraph::from_adjacency(names(&perm), vec![], SparseMatrix::from_triplets(n, n, t).unwrap()).unwrap();
        let xp: Vec<f64> = perm.iter().flat_map(|&i| x.data()[i * f..(i + 1) * f].to_vec()).collect();
        let out = gcn_all_rows(&layers, &ps, &permuted, &Tensor::new(&[n, f], xp).unwrap());
        let o = 4;
        for i in 0..n {
            for k in 0..o {
                let diff = (out[i * o + k] - base[perm[i] * o + k]).abs();
                perm_worst = perm_worst.max(diff);
                if diff > 1e-12 {
                    return Err(format!("permutation {p}: row {i} differs by {diff}"));
                }
            }
        }
    }
    Ok(format!("200 random 5x5 matrices, max diff {worst:.1e}; 10 permutations, max diff {perm_worst:.1e}"))
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
pub fn spectral_radius(m: &Matrix, iters: usize) -> f64 {
    let n = m.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = m.matvec(&v).unwrap();
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|a| a * a).sum::<f64>();
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda.abs()
}

// ---------------------------------------------------------------------------
// Ridge

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| {
        let mut row = a.row(i).to_vec();
        row.push(b[i]);
        row
    }).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, p);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            for j in col..=n {
                m[i][j] -= f * m[col][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

fn normal_system(x: &Matrix, y: &[f64], lambda: f64) -> (Matrix, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mut a = Matrix::zeros(d, d);
    let mut b = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            a.row_mut(i)[j] = (0..n).map(|r| x.row(r)[i] * x.row(r)[j]).sum::<f64>() + if i == j { lambda } else { 0.0 };
        }
        b[i] = (0..n).map(|r| x.row(r)[i] * y[r]).sum();
    }
    (a, b)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(rows, cols, uniform_vec(r, rows * cols, -1.0, 1.0)).unwrap()
}

pub fn ridge_oracle() -> Check {
    let mut worst_residual = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for seed in 0..100u64 {
        let mut r = rng(4000 + seed);
        let x = random_matrix(&mut r, 20, 5);
        let y = uniform_vec(&mut r, 20, 0.0, 1.0);
        let lambda = [0.01, 0.1, 1.0, 10.0][seed as usize % 4];
        let m = RidgeModel::fit(&x, &y, RidgeConfig { lambda, standardize: false }).map_err(|e| e.to_string())?;
        let (a, b) = normal_system(&x, &y, lambda);
        let aw = a.matvec(&m.weights).unwrap();
        let residual = aw.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst_residual = worst_residual.max(residual);
        if residual > 1e-8 {
            return Err(format!("fixture {seed}: normal-equation residual {residual:e}"));
        }
        let oracle = solve_dense(&a, &b);
        let diff = oracle.iter().zip(&m.weights).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst_oracle = worst_oracle.max(diff);
        if diff > 1e-8 {
            return Err(format!("fixture {seed}: weights differ from the elimination oracle by {diff:e}"));
        }
    }

    // λ = 0 on a square invertible design reproduces the targets
    let mut worst_interp = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng(5000 + seed);
        let mut x = random_matrix(&mut r, 6, 6);
        for i in 0..6 {
            x.row_mut(i)[i] += 3.0;
        }
        let y = uniform_vec(&mut r, 6, 0.0, 1.0);
        let m = RidgeModel::fit(&x, &y, RidgeConfig { lambda: 0.0, standardize: false }).map_err(|e| e.to_string())?;
        let p = m.predict_raw(&x).unwrap();
        let diff = p.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_interp = worst_interp.max(diff);
        if diff > 1e-10 {
            return Err(format!("lambda=0 fixture {seed}: interpolation error {diff:e}"));
        }
    }

    // ‖w(λ)‖ is non-increasing along the grid, in both modes
    for seed in 0..50u64 {
        let mut r = rng(6000 + seed);
        let x = random_matrix(&mut r, 30, 6);
        let y = uniform_vec(&mut r, 30, 0.0, 1.0);
        for standardize in [false, true] {
            let mut last = f64::INFINITY;
            for &lambda in &[0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
                let m = RidgeModel::fit(&x, &y, RidgeConfig { lambda, standardize }).map_err(|e| e.to_string())?;
                let nw = norm(&m.standardized_weights());
                if nw > last * (1.0 + 1e-12) {
                    return Err(format!("fixture {seed}: norm grew to {nw} at lambda={lambda} (standardize={standardize})"));
                }
                last = nw;
            }
        }
    }
    Ok(format!(
        "100 fits: max residual {worst_residual:.1e}, max oracle diff {worst_oracle:.1e}; 50 interpolations, max err {worst_interp:.1e}; shrinkage monotone on 50 designs"
    ))
}

// ---------------------------------------------------------------------------
// Metrics

pub fn metrics_oracle() -> Check {
    // Hand computation: pred = [1,2,3,4,5], gold = [2,1,4,3,5].
    // Means 3 and 3; deviations (-2,-1,0,1,2) and (-1,-2,1,0,2).
    // Σ dx·dy = 2+2+0+0+4 = 8; Σ dx² = Σ dy² = 10; r = 0.8.
    // |errors| = 1,1,1,1,0; MAE = 0.8.
    let p = [1.0, 2.0, 3.0, 4.0, 5.0];
    let g = [2.0, 1.0, 4.0, 3.0, 5.0];
    let cases: [(&[f64], &[f64], f64, f64); 3] = [
        (&p, &g, 0.8, 0.8),
        // perfectly anti-correlated: g' = 6 - p; |p - g'| = 4,2,0,2,4
        (&p, &[5.0, 4.0, 3.0, 2.0, 1.0], -1.0, 2.4),
        // deviations (0.1,-0.1,0,0.2,-0.2) and (0.2,0,-0.2,0,0):
        // Σ dx·dy = 0.02, Σ dx² = 0.1, Σ dy² = 0.08, r = 0.02/√0.008;
        // |errors| = 0.1,0.1,0.2,0.2,0.2, MAE = 0.16
        (&[0.5, 0.3, 0.4, 0.6, 0.2], &[0.6, 0.4, 0.2, 0.4, 0.4], 0.02 / 0.008f64.sqrt(), 0.16),
    ];
    for (i, (a, b, r, m)) in cases.iter().enumerate() {
        let got_r = pearson(a, b).map_err(|e| e.to_string())?;
        let got_m = mae(a, b).map_err(|e| e.to_string())?;
        if (got_r - r).abs() > 1e-12 || (got_m - m).abs() > 1e-12 {
            return Err(format!("case {i}: pearson {got_r} (want {r}), mae {got_m} (want {m})"));
        }
    }
    let mut r = rng(7000);
    for draw in 0..1000 {
        let n = r.gen_range(3..40);
        let a = uniform_vec(&mut r, n, -1.0, 1.0);
        let b = uniform_vec(&mut r, n, -1.0, 1.0);
        let base = match pearson(&a, &b) {
            Ok(v) => v,
            Err(e) => return Err(format!("draw {draw}: {e}")),
        };
        let scale = 10f64.powf(r.gen_range(-2.0..2.0));
        let shift = r.gen_range(-100.0..100.0);
        let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let moved: Vec<f64> = a.iter().map(|x| sign * scale * x + shift).collect();
        let got = pearson(&moved, &b).map_err(|e| e.to_string())?;
        if (got - sign * base).abs() > 1e-9 {
            return Err(format!("draw {draw}: r(a·{scale}+{shift}, b) = {got}, expected {}", sign * base));
        }
        let shifted_both: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let both: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let m0 = mae(&a, &b).unwrap();
        let m1 = mae(&both, &shifted_both).unwrap();
        if (m0 - m1).abs() > 1e-9 {
            return Err(format!("draw {draw}: MAE changed under a common shift"));
        }
    }
    Ok("3 hand-computed pairs to 1e-12; 1000 affine draws".into())
}

// ---------------------------------------------------------------------------
// Synthetic datasets

const VOCAB: [&str; 24] = [
    "river", "ancient", "covenant", "protein", "kinase", "parliament", "motion", "tribunal", "shepherd", "enzyme",
    "vote", "mountain", "receptor", "budget", "prophet", "cell", "treaty", "harvest", "membrane", "council", "temple",
    "ligand", "debate", "famine",
];

/// Entries, tables, graph and a hand-crafted block built from random
/// vectors. `gold_of(row, handcrafted)` sets each gold score.
pub struct Synthetic {
    pub entries: Vec<Entry>,
    pub words: WordVectorTable,
    pub contexts: ContextVectorTable,
    pub graph: TextGraph,
    pub handcrafted: FeatureBlock,
}

impl Synthetic {
    pub fn sources(&self) -> FeatureSources<'_> {
        FeatureSources {
            words: &self.words,
            contexts: &self.contexts,
            graph: Some(&self.graph),
            handcrafted: Some(&self.handcrafted),
        }
    }

    pub fn examples(&self, cfg: &ModelConfig) -> Vec<Example> {
        assemble_examples(&self.entries, &self.sources(), cfg).unwrap()
    }
}

pub fn synthetic<G>(r: &mut ChaCha8Rng, n: usize, cfg: ModelConfig, k: usize, gold_of: G) -> Synthetic
where
    G: Fn(usize, &[f64]) -> f64,
{
    let mut words = WordVectorTable::new(cfg.word_dim, OovPolicy::Zeros).unwrap();
    for w in VOCAB {
        words.insert(w, uniform_vec(r, cfg.word_dim, -1.0, 1.0)).unwrap();
    }
    let mut contexts = ContextVectorTable::new(cfg.context_dim).unwrap();
    let mut entries = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let corpora = ["bible", "biomed", "europarl"];
    for i in 0..n {
        let len = r.gen_range(4..9);
        let tokens: Vec<&str> = (0..len).map(|_| *VOCAB.choose(r).unwrap()).collect();
        let target = *tokens.choose(r).unwrap();
        let id = format!("s{i:04}");
        let hc = uniform_vec(r, k, -1.0, 1.0);
        let gold = gold_of(i, &hc).clamp(0.0, 1.0);
        entries.push(Entry::from_raw(&id, corpora[i % 3], &tokens.join(" "), target, Some(gold)).unwrap());
        contexts.insert(&id, uniform_vec(r, cfg.context_dim, -1.0, 1.0)).unwrap();
        rows.push(hc);
    }
    let names: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    let sentences: Vec<&str> = entries.iter().map(|e| e.sentence.as_str()).collect();
    let graph = TextGraph::build(&names, &sentences, cfg.graph).unwrap();
    let cols = (0..k).map(|j| format!("hc{j}")).collect();
    let handcrafted = FeatureBlock::from_rows("synthetic", cols, &rows).unwrap();
    Synthetic { entries, words, contexts, graph, handcrafted }
}

fn example_mae(model: &Model, examples: &[Example]) -> f64 {
    let preds = model.predict(examples).unwrap();
    let golds: Vec<f64> = examples.iter().map(|e| e.gold.unwrap()).collect();
    mae(&preds, &golds).unwrap()
}

pub fn overfit_config() -> ModelConfig {
    ModelConfig { lr: 1e-3, epochs: 200, ..ModelConfig::default() }
}

/// Sixteen entries, every block on, default widths.
pub fn overfit() -> Check {
    let start = std::time::Instant::now();
    let cfg = overfit_config();
    let k = 8;
    let mut r = rng(8000);
    let golds = uniform_vec(&mut r, 16, 0.05, 0.95);
    let data = synthetic(&mut r, 16, cfg, k, |i, _| golds[i]);
    let examples = data.examples(&cfg);
    let mut model = Model::new(cfg, k, Some(data.graph.clone())).map_err(|e| e.to_string())?;
    let history = train(&mut model, &examples, None).map_err(|e| e.to_string())?;
    let err = example_mae(&model, &examples);
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("train MAE {err:.4} after {} epochs in {secs:.1}s", history.epochs.len());
    if err < 0.02 && secs < 120.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Coefficients of the linear gold function of the learning-signal fixture.
pub const SIGNAL_WEIGHTS: [f64; 6] = [0.12, -0.08, 0.05, 0.1, -0.06, 0.03];

/// Word/context blocks plus the late hand-crafted block. The word and
/// context vectors are pure noise here, so the signal must come through
/// the late join.
pub fn signal_config() -> ModelConfig {
    ModelConfig { use_handcrafted: true, lr: 1e-2, epochs: 20, batch_size: 16, dropout: 0.3, ..ModelConfig::permanent_only() }
}

pub struct SignalData {
    pub data: Synthetic,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

/// 200 entries whose gold is `0.5 + w·h + noise`; the first 150 train,
/// the rest are held out.
pub fn signal_fixture(cfg: &ModelConfig) -> SignalData {
    let mut r = rng(9000);
    let noise = uniform_vec(&mut r, 200, -0.02, 0.02);
    let data = synthetic(&mut r, 200, *cfg, SIGNAL_WEIGHTS.len(), |i, h| {
        0.5 + SIGNAL_WEIGHTS.iter().zip(h).map(|(w, x)| w * x).sum::<f64>() + noise[i]
    });
    let mut examples = data.examples(cfg);
    let test = examples.split_off(150);
    SignalData { data, train: examples, test }
}

pub struct SignalOutcome {
    pub mean_mae: f64,
    pub model_mae: f64,
    pub ridge_mae: f64,
    pub epoch_losses: Vec<f64>,
}

pub fn learning_signal_run() -> Result<SignalOutcome, String> {
    let cfg = signal_config();
    let f = signal_fixture(&cfg);
    let gold = |xs: &[Example]| xs.iter().map(|e| e.gold.unwrap()).collect::<Vec<_>>();
    let (ytr, yte) = (gold(&f.train), gold(&f.test));
    let mean = ytr.iter().sum::<f64>() / ytr.len() as f64;
    let mean_mae = mae(&vec![mean; yte.len()], &yte).unwrap();

    let mut model = Model::new(cfg, SIGNAL_WEIGHTS.len(), None).map_err(|e| e.to_string())?;
    let history = train(&mut model, &f.train, None).map_err(|e| e.to_string())?;
    let model_mae = example_mae(&model, &f.test);

    let features = |xs: &[Example]| {
        let rows: Vec<Vec<f64>> = xs.iter().map(|e| e.handcrafted.clone()).collect();
        Matrix::from_rows(&rows).unwrap()
    };
    let ridge = RidgeModel::fit(&features(&f.train), &ytr, RidgeConfig::default()).map_err(|e| e.to_string())?;
    let ridge_mae = mae(&ridge.predict(&features(&f.test)).unwrap(), &yte).unwrap();
    Ok(SignalOutcome { mean_mae, model_mae, ridge_mae, epoch_losses: history.epochs.iter().map(|e| e.train_loss).collect() })
}

pub fn learning_signal() -> Check {
    let o = learning_signal_run()?;
    let model_gain = 1.0 - o.model_mae / o.mean_mae;
    let ridge_gain = 1.0 - o.ridge_mae / o.mean_mae;
    let detail = format!(
        "held-out MAE: mean {:.4}, model {:.4} ({:.0}% better), ridge {:.4} ({:.0}% better)",
        o.mean_mae,
        o.model_mae,
        100.0 * model_gain,
        o.ridge_mae,
        100.0 * ridge_gain
    );
    if model_gain >= 0.30 && ridge_gain >= 0.40 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// TF-IDF

fn random_sentence(r: &mut ChaCha8Rng) -> String {
    let n = r.gen_range(0..12);
    let mut words: Vec<String> = (0..n).map(|_| random_word(r, 1, 10)).collect();
    if r.gen_bool(0.2) {
        words.push("Ünïcødé—text".into());
    }
    words.join(" ")
}

pub fn tfidf_bound() -> Check {
    let mut largest_vocab = 0;
    let mut values = 0usize;
    for seed in 0..40u64 {
        let mut r = rng(10_000 + seed);
        let n = r.gen_range(1..120);
        let fit: Vec<String> = (0..n).map(|_| random_sentence(&mut r)).collect();
        let other: Vec<String> = (0..20).map(|_| random_sentence(&mut r)).collect();
        let range = [(1, 1), (2, 3), (1, 4)][seed as usize % 3];
        let v = NgramVectorizer::fit(range, DEFAULT_MAX_FEATURES, &fit).map_err(|e| e.to_string())?;
        if v.vocabulary().len() > DEFAULT_MAX_FEATURES {
            return Err(format!("fixture {seed}: vocabulary of {}", v.vocabulary().len()));
        }
        largest_vocab = largest_vocab.max(v.vocabulary().len());
        for corpus in [&fit, &other] {
            let block = v.transform(corpus).map_err(|e| e.to_string())?;
            if let Some(x) = block.data().iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(format!("fixture {seed}: value {x} outside [0,1]"));
            }
            values += block.data().len();
        }
    }
    // a corpus rich enough to hit the cap
    let mut r = rng(10_500);
    let big: Vec<String> = (0..400).map(|_| (0..12).map(|_| random_word(&mut r, 4, 10)).collect::<Vec<_>>().join(" ")).collect();
    let v = NgramVectorizer::fit((2, 5), DEFAULT_MAX_FEATURES, &big).map_err(|e| e.to_string())?;
    let capped = v.vocabulary().len();
    if capped != DEFAULT_MAX_FEATURES {
        return Err(format!("large corpus vocabulary is {capped}, expected the cap {DEFAULT_MAX_FEATURES}"));
    }
    let block = v.transform(&big[..50]).map_err(|e| e.to_string())?;
    if let Some(x) = block.data().iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(format!("large corpus value {x} outside [0,1]"));
    }
    Ok(format!("{values} values in [0,1] over 40 corpora (largest vocabulary {largest_vocab}); capped at {capped}"))
}

// ---------------------------------------------------------------------------
// Adversarial

pub fn delta_norms() -> Check {
    let mut r = rng(11_000);
    for draw in 0..500 {
        let eps = 10f64.powf(r.gen_range(-3.0..1.0));
        let (b, d, k) = (r.gen_range(1..4), r.gen_range(1..8), r.gen_range(0..4));
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[b, d], uniform_vec(&mut r, b * d, -1.0, 1.0)).unwrap());
        let mut inputs = vec![x];
        if k > 0 {
            inputs.push(tape.constant(Tensor::new(&[b, k], uniform_vec(&mut r, b * k, -1.0, 1.0)).unwrap()));
        }
        let wx = tape.constant(Tensor::new(&[d, 1], uniform_vec(&mut r, d, -1.0, 1.0)).unwrap());
        let wl = tape.constant(Tensor::new(&[k.max(1), 1], uniform_vec(&mut r, k.max(1), -1.0, 1.0)).unwrap());
        let gold = uniform_vec(&mut r, b, 0.0, 1.0);
        let out = adversarial_loss(&mut tape, &inputs, eps, |t, v| {
            let mut z = t.matmul(v[0], wx)?;
            if let Some(&l) = v.get(1) {
                let zl = t.matmul(l, wl)?;
                z = t.add(z, zl)?;
            }
            let p = t.sigmoid(z);
            t.mse(p, &gold)
        })
        .map_err(|e| e.to_string())?;
        let n = out.delta.iter().flat_map(|t| t.data()).map(|v| v * v).sum::<f64>().sqrt();
        if (n - eps).abs() > 1e-12 * eps.max(1.0) {
            return Err(format!("draw {draw}: |delta| = {n}, epsilon = {eps}"));
        }
    }
    Ok("500 draws with |delta| = epsilon".into())
}

/// Training histories and final parameters under `use_adversarial` with
/// ε = 0 and with the pass switched off.
pub fn zero_epsilon_matches_plain() -> Check {
    let base = ModelConfig {
        word_dim: 6,
        context_dim: 8,
        hidden1: 10,
        hidden2: 6,
        lr: 1e-2,
        epochs: 4,
        batch_size: 5,
        bilstm: BiLstmConfig { char_dim: 3, hidden: 3 },
        gcn: GcnConfig { hidden: 6, output: 4 },
        graph: GraphConfig { window: 4, min_word_count: 1 },
        capsule: CapsuleConfig { n_in: 4, d_in: 2, n_out: 3, d_out: 2, routings: 3 },
        ..ModelConfig::default()
    };
    let mut r = rng(12_000);
    let data = synthetic(&mut r, 17, base, 3, |_, h| 0.5 + 0.2 * h[0]);
    let run = |cfg: ModelConfig| {
        let mut m = Model::new(cfg, 3, Some(data.graph.clone())).unwrap();
        let h = train(&mut m, &data.examples(&cfg), None).unwrap();
        (h, m.params.values())
    };
    let (h0, p0) = run(ModelConfig { use_adversarial: true, epsilon: 0.0, ..base });
    let (h1, p1) = run(ModelConfig { use_adversarial: false, ..base });
    let (h2, _) = run(ModelConfig { use_adversarial: true, epsilon: 0.5, ..base });
    if h0 != h1 || p0 != p1 {
        return Err("epsilon=0 trajectory differs from plain training".into());
    }
    if h2 == h1 {
        return Err("epsilon>0 left the trajectory unchanged".into());
    }
    Ok(format!("{} epochs, {} parameter tensors bitwise equal", h0.epochs.len(), p0.len()))
}

pub fn adversarial_contract() -> Check {
    let a = delta_norms()?;
    let b = zero_epsilon_matches_plain()?;
    Ok(format!("{a}; {b}"))
}
