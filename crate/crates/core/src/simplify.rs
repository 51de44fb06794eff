//! Persistence-sensitive simplification of scalar fields on graphs.
//!
//! Every vertex on a branch of persistence at most ε is lowered (or raised,
//! for super-level trees) to the value of its first ancestor that lies on a
//! more persistent branch. The result `g` is ε-close to `f` and its diagram
//! keeps exactly the points of `f` whose persistence exceeds ε.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{Graph, ScalarField};
use crate::merge_tree::{compute_merge_tree, diagram_of, Direction, MergeTree, PersistenceDiagram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplificationTarget {
    pub epsilon: f64,
    pub g_values: Vec<f64>,
    /// Vertices where `g` differs from `f`, ascending.
    pub changed: Vec<usize>,
}

impl SimplificationTarget {
    /// The trivial target `g = f`.
    pub fn identity(values: &[f64], epsilon: f64) -> Self {
        Self {
            epsilon,
            g_values: values.to_vec(),
            changed: Vec::new(),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("epsilon = {epsilon} must be nonnegative")))
    }
}

/// Anchor value of every branch: `None` for branches that are kept, the value
/// their vertices flatten to otherwise. `root_death` replaces the infinite
/// death of undying branches; those are only simplified when it is set.
fn branch_anchors(
    tree: &MergeTree,
    values: &[f64],
    epsilon: f64,
    root_death: Option<f64>,
) -> Vec<Option<f64>> {
    let branches = tree.branches();
    let mut rank = vec![0usize; values.len()];
    for (r, v) in tree.order().enumerate() {
        rank[v] = r;
    }
    let persistence = |i: usize| {
        let b = &branches[i];
        match (b.death_vertex, root_death) {
            (None, Some(d)) => (d - b.birth_value).abs(),
            _ => b.persistence(),
        }
    };

    // The branch a dying branch merges into dies strictly later, so walking
    // branches by descending death time resolves every chain in one pass.
    let mut by_death: Vec<usize> = (0..branches.len()).collect();
    by_death.sort_by_key(|&i| {
        std::cmp::Reverse(branches[i].death_vertex.map_or(usize::MAX, |w| rank[w]))
    });

    let mut anchor = vec![None; branches.len()];
    for i in by_death {
        if persistence(i) > epsilon {
            continue;
        }
        anchor[i] = match branches[i].death_vertex {
            None => root_death,
            Some(w) => {
                let into = tree.branch_of(w);
                match anchor[into] {
                    Some(a) if persistence(into) <= epsilon => Some(a),
                    _ => Some(values[w]),
                }
            }
        };
    }
    anchor
}

fn apply_anchors(tree: &MergeTree, values: &[f64], anchors: &[Option<f64>], epsilon: f64) -> SimplificationTarget {
    let mut g_values = values.to_vec();
    let mut changed = Vec::new();
    for (v, g) in g_values.iter_mut().enumerate() {
        if let Some(a) = anchors[tree.branch_of(v)] {
            if a != *g {
                *g = a;
                changed.push(v);
            }
        }
    }
    SimplificationTarget {
        epsilon,
        g_values,
        changed,
    }
}

/// ε-simplification of `field` with respect to the filtration of `tree`.
pub fn simplify(tree: &MergeTree, field: &ScalarField, epsilon: f64) -> Result<SimplificationTarget> {
    check_epsilon(epsilon)?;
    if tree.vertex_count() != field.len() {
        return Err(invalid("merge tree and field have different vertex counts"));
    }
    let anchors = branch_anchors(tree, field.values(), epsilon, None);
    Ok(apply_anchors(tree, field.values(), &anchors, epsilon))
}

/// Convenience wrapper computing the tree first.
pub fn simplify_field(field: &ScalarField, direction: Direction, epsilon: f64) -> Result<SimplificationTarget> {
    simplify(&compute_merge_tree(field, direction), field, epsilon)
}

/// ε that keeps the `j` most persistent points: the midpoint of the `j`-th
/// and `(j+1)`-th largest persistences. Infinite persistences rank first but
/// never enter the midpoint: if only the `j`-th is infinite the result is half
/// the `(j+1)`-th, and if both are infinite every finite point is dropped.
/// Diagrams with at most `j` points give 0.
pub fn epsilon_top_j(diagram: &PersistenceDiagram, j: usize) -> f64 {
    let p = diagram.sorted_persistences();
    let max_finite = p.iter().copied().find(|x| x.is_finite()).unwrap_or(0.0);
    if j == 0 {
        return max_finite;
    }
    if p.len() < j + 1 {
        return 0.0;
    }
    match (p[j - 1].is_finite(), p[j].is_finite()) {
        (true, _) => (p[j - 1] + p[j]) / 2.0,
        (false, true) => p[j] / 2.0,
        (false, false) => max_finite,
    }
}

/// ε at the midpoint of the widest gap between consecutive finite
/// persistences (first gap on ties); 0 with fewer than two finite points.
pub fn epsilon_largest_gap(diagram: &PersistenceDiagram) -> f64 {
    let p: Vec<f64> = diagram
        .sorted_persistences()
        .into_iter()
        .filter(|x| x.is_finite())
        .collect();
    if p.len() < 2 {
        return 0.0;
    }
    let mut best = 0;
    for i in 1..p.len() - 1 {
        if p[i] - p[i + 1] > p[best] - p[best + 1] {
            best = i;
        }
    }
    (p[best] + p[best + 1]) / 2.0
}

/// Predicted class, runner-up class and margin between them. Ties go to the
/// smaller channel index.
pub fn top_two(logits: impl IntoIterator<Item = f64>) -> (usize, usize, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    let mut second = (usize::MAX, f64::NEG_INFINITY);
    for (i, x) in logits.into_iter().enumerate() {
        if x > best.1 {
            second = best;
            best = (i, x);
        } else if x > second.1 {
            second = (i, x);
        }
    }
    (best.0, second.0, best.1 - second.1)
}

/// Classifier confidence over a graph, with edges between differently
/// classified vertices removed.
#[derive(Debug, Clone)]
pub struct ConfidenceField {
    pub field: ScalarField,
    pub predicted_class: Vec<usize>,
    pub pruned_graph: Graph,
}

impl ConfidenceField {
    /// Super-level merge forest of the confidence on the pruned graph.
    pub fn merge_tree(&self) -> MergeTree {
        let pruned = ScalarField::new(self.pruned_graph.clone(), self.field.values().to_vec())
            .expect("same vertex set");
        compute_merge_tree(&pruned, Direction::Superlevel)
    }

    /// Diagram in which undying branches die at 0 instead of -inf.
    pub fn diagram(&self) -> PersistenceDiagram {
        let mut d = diagram_of(&self.merge_tree());
        for p in d.points.iter_mut() {
            if p.is_infinite() {
                p.death = 0.0;
            }
        }
        d
    }
}

/// Builds the confidence field from per-vertex logits (one row per vertex).
pub fn confidence_field(logits: ArrayView2<'_, f64>, graph: &Graph) -> Result<ConfidenceField> {
    if logits.ncols() < 2 {
        return Err(invalid("confidence needs at least two output channels"));
    }
    if logits.nrows() != graph.vertex_count() {
        return Err(invalid(format!(
            "{} logit rows for {} vertices",
            logits.nrows(),
            graph.vertex_count()
        )));
    }
    let (predicted_class, conf): (Vec<usize>, Vec<f64>) = logits
        .rows()
        .into_iter()
        .map(|row| {
            let (p, _, c) = top_two(row.iter().copied());
            (p, c)
        })
        .unzip();
    let pruned_graph = graph.filter_edges(|u, v| predicted_class[u] == predicted_class[v]);
    Ok(ConfidenceField {
        field: ScalarField::new(graph.clone(), conf)?,
        predicted_class,
        pruned_graph,
    })
}

/// Simplifies the confidence with undying branches dying at 0, so a
/// component whose highest peak is at most ε is flattened to 0 entirely.
pub fn simplify_confidence(cf: &ConfidenceField, epsilon: f64) -> Result<SimplificationTarget> {
    check_epsilon(epsilon)?;
    let values = cf.field.values();
    if let Some(v) = values.iter().position(|&c| c < 0.0) {
        return Err(invalid(format!("negative confidence at vertex {v}")));
    }
    let tree = cf.merge_tree();
    let anchors = branch_anchors(&tree, values, epsilon, Some(0.0));
    Ok(apply_anchors(&tree, values, &anchors, epsilon))
}
