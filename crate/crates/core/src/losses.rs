//! Topological losses over vertex values and their gradients.

use crate::error::{invalid, Result};
use crate::field::ScalarField;
use crate::merge_tree::{persistence_diagram, Direction, PersistenceDiagram, Vineyard};
use crate::simplify::SimplificationTarget;

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    /// One entry per vertex.
    pub grad: Vec<f64>,
}

/// Squared distance to a fixed simplification target.
pub fn pso_loss_grad(values: &[f64], target: &SimplificationTarget) -> Result<LossGrad> {
    if values.len() != target.g_values.len() {
        return Err(invalid(format!(
            "{} values against a target of {}",
            values.len(),
            target.g_values.len()
        )));
    }
    let mut loss = 0.0;
    let grad = values
        .iter()
        .zip(&target.g_values)
        .map(|(f, g)| {
            let r = f - g;
            loss += r * r;
            2.0 * r
        })
        .collect();
    Ok(LossGrad { loss, grad })
}

/// `Σ (d - b)^2` over finite pairs with persistence at most `epsilon`, minus
/// `anti_squash` times the same sum over the more persistent finite pairs.
/// The diagram is recomputed from `field` on every call, and gradients land
/// only on the birth and death vertices of the pairs.
pub fn diagram_loss_grad(
    field: &ScalarField,
    direction: Direction,
    epsilon: f64,
    anti_squash: f64,
) -> Result<LossGrad> {
    if anti_squash < 0.0 {
        return Err(invalid("anti-squash weight must be nonnegative"));
    }
    let diagram = persistence_diagram(field, direction);
    let mut loss = 0.0;
    let mut grad = vec![0.0; field.len()];
    for p in diagram.finite_points() {
        let death_vertex = p.death_vertex.expect("finite point has a death vertex");
        let weight = if p.persistence() <= epsilon {
            1.0
        } else if anti_squash > 0.0 {
            -anti_squash
        } else {
            continue;
        };
        let diff = p.death - p.birth;
        loss += weight * diff * diff;
        grad[death_vertex] += weight * 2.0 * diff;
        grad[p.birth_vertex] -= weight * 2.0 * diff;
    }
    Ok(LossGrad { loss, grad })
}

/// Returns `existing` extended by the persistences of `diagram` at `step`.
pub fn record_vineyard(existing: Vineyard, step: usize, diagram: &PersistenceDiagram) -> Result<Vineyard> {
    let mut v = existing;
    v.record(step, diagram)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Graph;
    use crate::merge_tree::DiagramPoint;

    fn path(values: &[f64]) -> ScalarField {
        let n = values.len();
        ScalarField::new(
            Graph::new(n, (1..n).map(|i| (i - 1, i)).collect()).unwrap(),
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn pso_example() {
        let target = SimplificationTarget {
            epsilon: 2.5,
            g_values: vec![2.0, 0.0, 3.0, 3.0, 4.0],
            changed: vec![3],
        };
        let lg = pso_loss_grad(&[2.0, 0.0, 3.0, 1.0, 4.0], &target).unwrap();
        assert_eq!(lg.loss, 4.0);
        assert_eq!(lg.grad, vec![0.0, 0.0, 0.0, -4.0, 0.0]);
        let lg = pso_loss_grad(&target.g_values, &target).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.iter().all(|&g| g == 0.0));
        assert!(pso_loss_grad(&[1.0], &target).is_err());
    }

    #[test]
    fn diagram_example() {
        let f = path(&[2.0, 0.0, 3.0, 1.0, 4.0]);
        let lg = diagram_loss_grad(&f, Direction::Sublevel, 2.5, 0.0).unwrap();
        assert_eq!(lg.loss, 4.0);
        assert_eq!(lg.grad, vec![0.0, 0.0, 4.0, -4.0, 0.0]);
        let lg = diagram_loss_grad(&f, Direction::Sublevel, 1.0, 0.0).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn anti_squash_single_pair() {
        // The minimum at v0 dies into the global basin at v1: pair (0, 5).
        let f = path(&[0.0, 5.0, -10.0]);
        let lambda = 0.3;
        let lg = diagram_loss_grad(&f, Direction::Sublevel, 1.0, lambda).unwrap();
        assert!((lg.loss + 25.0 * lambda).abs() < 1e-12);
        assert_eq!(lg.grad, vec![10.0 * lambda, -10.0 * lambda, 0.0]);
        let plain = diagram_loss_grad(&f, Direction::Sublevel, 1.0, 0.0).unwrap();
        assert_eq!(plain.loss, 0.0);
    }

    #[test]
    fn vineyard_rows() {
        let d = PersistenceDiagram {
            direction: Direction::Sublevel,
            points: vec![
                DiagramPoint {
                    birth: 1.0,
                    death: 3.0,
                    birth_vertex: 3,
                    death_vertex: Some(2),
                },
                DiagramPoint {
                    birth: 0.0,
                    death: f64::INFINITY,
                    birth_vertex: 1,
                    death_vertex: None,
                },
            ],
        };
        let v = record_vineyard(Vineyard::new(), 0, &d).unwrap();
        assert_eq!(v.samples[0].step, 0);
        assert_eq!(v.samples[0].persistences, vec![2.0, f64::INFINITY]);
        let v = record_vineyard(v, 1, &d).unwrap();
        assert_eq!(v.samples[0].persistences, v.samples[1].persistences);
        assert!(record_vineyard(v.clone(), 1, &d).is_err());
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"[{"step":0,"persistences":[2.0,null]},{"step":1,"persistences":[2.0,null]}]"#
        );
    }
}
