//! Plain gradient descent directly on vertex values, comparing the PSO loss
//! with the diagram loss.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{build_grid_graph, Graph, ScalarField};
use crate::losses::{diagram_loss_grad, pso_loss_grad};
use crate::merge_tree::{compute_merge_tree, diagram_of, persistence_diagram, Direction, Vineyard};
use crate::simplify::simplify;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub bandwidth: f64,
}

/// Two tall and two short well-separated bumps on the unit square. With
/// ε = 0.5 the short ones are noise and the tall ones are kept.
pub fn four_gaussians() -> Vec<GaussianSpec> {
    let bump = |x: f64, y: f64, amplitude: f64| GaussianSpec {
        center: [x, y],
        amplitude,
        bandwidth: 0.08,
    };
    vec![
        bump(0.25, 0.30, 1.0),
        bump(0.70, 0.75, 1.0),
        bump(0.20, 0.75, 0.3),
        bump(0.75, 0.25, 0.3),
    ]
}

fn grid_coordinate(index: usize, count: usize) -> f64 {
    if count > 1 {
        index as f64 / (count - 1) as f64
    } else {
        0.0
    }
}

/// Evaluates a sum of isotropic Gaussians at the vertices of a row-major
/// grid; vertex `(i, j)` sits at `(j / (w - 1), i / (h - 1))`.
pub fn gaussian_mixture_field(
    grid: &Graph,
    width: usize,
    height: usize,
    specs: &[GaussianSpec],
) -> Result<ScalarField> {
    if width * height != grid.vertex_count() {
        return Err(invalid(format!(
            "{width}x{height} grid does not match {} vertices",
            grid.vertex_count()
        )));
    }
    if let Some(s) = specs.iter().find(|s| !(s.bandwidth > 0.0)) {
        return Err(invalid(format!("bandwidth {} must be positive", s.bandwidth)));
    }
    let mut values = Vec::with_capacity(width * height);
    for i in 0..height {
        let y = grid_coordinate(i, height);
        for j in 0..width {
            let x = grid_coordinate(j, width);
            values.push(
                specs
                    .iter()
                    .map(|s| {
                        let d2 = (x - s.center[0]).powi(2) + (y - s.center[1]).powi(2);
                        s.amplitude * (-d2 / (2.0 * s.bandwidth * s.bandwidth)).exp()
                    })
                    .sum(),
            );
        }
    }
    ScalarField::new(grid.clone(), values)
}

pub fn gaussian_grid(width: usize, height: usize, specs: &[GaussianSpec]) -> Result<ScalarField> {
    gaussian_mixture_field(&build_grid_graph(width, height)?, width, height, specs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueLoss {
    /// Squared distance to an ε-simplification computed once up front.
    Pso,
    /// Diagram loss recomputed every step; a positive `anti_squash` adds the
    /// term pushing persistent pairs apart.
    Diagram { anti_squash: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueOptReport {
    pub loss: ValueLoss,
    pub direction: Direction,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub initial_values: Vec<f64>,
    pub final_values: Vec<f64>,
    /// The simplification target (PSO mode only).
    pub target: Option<Vec<f64>>,
    /// Loss before the first step and after every step.
    pub losses: Vec<f64>,
    pub vineyard: Vineyard,
}

pub fn optimize_values(
    field: &ScalarField,
    direction: Direction,
    loss: ValueLoss,
    epsilon: f64,
    steps: usize,
    learning_rate: f64,
) -> Result<ValueOptReport> {
    optimize_values_observed(field, direction, loss, epsilon, steps, learning_rate, |_, _| {})
}

/// Like [`optimize_values`], calling `observe(step, values)` on the initial
/// state and after every step.
pub fn optimize_values_observed(
    field: &ScalarField,
    direction: Direction,
    loss: ValueLoss,
    epsilon: f64,
    steps: usize,
    learning_rate: f64,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<ValueOptReport> {
    if !(epsilon >= 0.0) {
        return Err(invalid(format!("epsilon = {epsilon} must be nonnegative")));
    }
    if !(learning_rate > 0.0) {
        return Err(invalid(format!("learning rate {learning_rate} must be positive")));
    }
    let graph = field.graph().clone();
    let mut values = field.values().to_vec();

    let target = match loss {
        ValueLoss::Pso => {
            let tree = compute_merge_tree(field, direction);
            Some(simplify(&tree, field, epsilon)?)
        }
        ValueLoss::Diagram { .. } => None,
    };

    let mut vineyard = Vineyard::new();
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let current = ScalarField::new(graph.clone(), values.clone())
            .map_err(|_| Error::Numeric(format!("values diverged at step {step}")))?;
        observe(step, &values);
        vineyard.record(step, &persistence_diagram(&current, direction))?;
        let lg = match (&target, loss) {
            (Some(t), _) => pso_loss_grad(&values, t)?,
            (None, ValueLoss::Diagram { anti_squash }) => {
                diagram_loss_grad(&current, direction, epsilon, anti_squash)?
            }
            (None, ValueLoss::Pso) => unreachable!(),
        };
        if !lg.loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {} at step {step}", lg.loss)));
        }
        losses.push(lg.loss);
        if step == steps {
            break;
        }
        for (v, g) in values.iter_mut().zip(&lg.grad) {
            *v -= learning_rate * g;
        }
    }

    Ok(ValueOptReport {
        loss,
        direction,
        epsilon,
        learning_rate,
        steps,
        initial_values: field.values().to_vec(),
        final_values: values,
        target: target.map(|t| t.g_values),
        losses,
        vineyard,
    })
}

/// Persistences of a field's diagram, descending with infinite ones first.
pub fn ranked_persistences(field: &ScalarField, direction: Direction) -> Vec<f64> {
    diagram_of(&compute_merge_tree(field, direction)).sorted_persistences()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bump_peaks_at_center() {
        let spec = [GaussianSpec {
            center: [0.5, 0.5],
            amplitude: 1.0,
            bandwidth: 0.1,
        }];
        let f = gaussian_grid(21, 21, &spec).unwrap();
        let (argmax, max) = f
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(argmax, 10 * 21 + 10);
        assert!((max - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_mixture_is_zero() {
        let f = gaussian_grid(4, 3, &[]).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        let f = gaussian_grid(1, 1, &four_gaussians()).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = build_grid_graph(3, 3).unwrap();
        assert!(gaussian_mixture_field(&g, 2, 3, &[]).is_err());
    }

    #[test]
    fn zero_steps_reports_initial_state() {
        let f = gaussian_grid(10, 10, &four_gaussians()).unwrap();
        let r = optimize_values(&f, Direction::Superlevel, ValueLoss::Pso, 0.5, 0, 0.1).unwrap();
        assert_eq!(r.final_values, f.values());
        assert_eq!(r.vineyard.len(), 1);
        assert_eq!(r.losses.len(), 1);
    }

    #[test]
    fn pso_converges_geometrically() {
        let f = gaussian_grid(30, 30, &four_gaussians()).unwrap();
        let lr = 0.25;
        let r = optimize_values(&f, Direction::Superlevel, ValueLoss::Pso, 0.5, 60, lr).unwrap();
        let target = r.target.as_ref().unwrap();
        let worst = r
            .final_values
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "max deviation {worst}");
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.losses.len(), 61);
    }
}
