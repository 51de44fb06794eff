#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposimp::neural::{Gradients, Mlp};
use toposimp::{Graph, PersistenceDiagram, ScalarField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi style graph with `n` vertices and edge probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Random field; with `ties` values come from a handful of levels.
pub fn random_field(rng: &mut impl Rng, max_n: usize, ties: bool) -> ScalarField {
    let n = rng.gen_range(1..=max_n);
    let p = [0.02, 0.05, 0.1, 0.3, 0.7][rng.gen_range(0..5)];
    let graph = random_graph(rng, n, p);
    let values = (0..n)
        .map(|_| {
            if ties {
                rng.gen_range(0..5) as f64
            } else {
                rng.gen_range(-10.0..10.0)
            }
        })
        .collect();
    ScalarField::new(graph, values).unwrap()
}

/// Random path-plus-chords field, always connected, with distinct values.
pub fn connected_field(rng: &mut impl Rng, n: usize) -> ScalarField {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..n / 2 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let values = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
    ScalarField::new(Graph::new(n, edges).unwrap(), values).unwrap()
}

/// Diagram as a sorted multiset of (birth, death) pairs.
pub fn pairs(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    d.sorted_pairs()
}

pub fn pairs_close(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> bool {
    let close = |x: f64, y: f64| x == y || (x - y).abs() <= tol;
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| close(p.0, q.0) && close(p.1, q.1))
}

/// Every point of `f` more persistent than `2δ` has a point of `g` within `δ`
/// in the max metric; essential points match essential points.
pub fn stability_holds(f: &PersistenceDiagram, g: &PersistenceDiagram, delta: f64) -> bool {
    let tol = delta + 1e-12;
    f.points.iter().filter(|p| p.persistence() > 2.0 * delta).all(|p| {
        g.points.iter().any(|q| {
            let death_ok = if p.is_infinite() || q.is_infinite() {
                p.death == q.death
            } else {
                (p.death - q.death).abs() <= tol
            };
            (p.birth - q.birth).abs() <= tol && death_ok
        })
    })
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn flatten(g: &Gradients) -> Vec<f64> {
    g.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
}

/// Central differences of `loss` over every model parameter.
pub fn numeric_param_grad(model: &Mlp, h: f64, loss: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut m = model.clone();
    for l in 0..model.layers.len() {
        for idx in 0..model.layers[l].weights.len() {
            let (r, c) = (idx / model.layers[l].weights.ncols(), idx % model.layers[l].weights.ncols());
            let orig = m.layers[l].weights[[r, c]];
            m.layers[l].weights[[r, c]] = orig + h;
            let up = loss(&m);
            m.layers[l].weights[[r, c]] = orig - h;
            let down = loss(&m);
            m.layers[l].weights[[r, c]] = orig;
            out.push((up - down) / (2.0 * h));
        }
        for b in 0..model.layers[l].bias.len() {
            let orig = m.layers[l].bias[b];
            m.layers[l].bias[b] = orig + h;
            let up = loss(&m);
            m.layers[l].bias[b] = orig - h;
            let down = loss(&m);
            m.layers[l].bias[b] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

pub fn numeric_value_grad(values: &[f64], h: f64, loss: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut v = values.to_vec();
    (0..values.len())
        .map(|i| {
            v[i] = values[i] + h;
            let up = loss(&v);
            v[i] = values[i] - h;
            let down = loss(&v);
            v[i] = values[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Distinct values at least `gap` apart, shuffled.
pub fn spread_values(rng: &mut impl Rng, n: usize, gap: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut vals: Vec<f64> = (0..n)
        .map(|_| {
            acc += gap + rng.gen_range(0.0..1.0);
            acc
        })
        .collect();
    vals.shuffle(rng);
    vals
}
