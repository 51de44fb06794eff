use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use toposimp::field::PointCloud;
use toposimp::neural::{train, Task, TrainConfig, TrainReport};

/// Values tried for each hyperparameter; the sweep runs their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub threshold: Vec<f64>,
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
}

impl SweepGrid {
    pub fn defaults(task: Task) -> Self {
        let threshold = match task {
            Task::Regression => vec![0.001, 0.01, 0.05, 0.1, 0.5],
            Task::Classification => vec![0.0001, 0.001, 0.01, 0.1],
        };
        Self {
            k: vec![10, 15, 20],
            threshold,
            n: vec![0, 3, 6, 9, 12],
            sigma: vec![0.001, 0.01, 0.1, 0.2],
        }
    }

    /// Every combination; σ is irrelevant without extra samples, so `n = 0`
    /// is paired with the first σ only.
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &k in &self.k {
            for &t in &self.threshold {
                for &n in &self.n {
                    let sigmas = if n == 0 { &self.sigma[..self.sigma.len().min(1)] } else { &self.sigma[..] };
                    for &sigma in sigmas {
                        out.push(TrainConfig {
                            k,
                            threshold: Some(t),
                            n,
                            sigma,
                            topo: true,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

fn metric(r: &TrainReport) -> f64 {
    r.test.rmsd.or(r.test.accuracy).unwrap_or(r.test.loss)
}

/// Runs the baseline without simplification and every grid configuration,
/// writing `sweep.csv` and the report of the configuration with the lowest
/// validation loss.
pub fn run_sweep(
    base: &TrainConfig,
    grid: &SweepGrid,
    data: &PointCloud,
    mut write: impl FnMut(&str, &str) -> Result<()>,
) -> Result<()> {
    let configs = grid.configs(base);
    if configs.is_empty() {
        bail!("sweep grid is empty");
    }
    let metric_name = if base.task == Task::Regression { "test_rmsd" } else { "test_accuracy" };
    let mut csv = format!("mode,k,t,n,sigma,validation_loss,{metric_name},phases,status\n");
    let baseline = train(&TrainConfig { topo: false, ..base.clone() }, data)?;
    csv.push_str(&format!(
        "none,,,,,{},{},0,ok\n",
        baseline.validation.loss,
        metric(&baseline)
    ));
    let mut best: Option<TrainReport> = None;
    for config in configs {
        let row = format!("pso,{},{},{},{}", config.k, config.threshold.unwrap(), config.n, config.sigma);
        match train(&config, data) {
            Ok(r) => {
                csv.push_str(&format!("{row},{},{},{},ok\n", r.validation.loss, metric(&r), r.phases.len()));
                if best.as_ref().is_none_or(|b| r.validation.loss < b.validation.loss) {
                    best = Some(r);
                }
            }
            Err(toposimp::Error::Numeric(msg)) => {
                csv.push_str(&format!("{row},,,,\"numeric failure: {}\"\n", msg.replace('"', "'")));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write("sweep.csv", &csv)?;
    match best {
        Some(b) => {
            write("best_report.json", &serde_json::to_string_pretty(&b)?)?;
            println!(
                "baseline: validation {:.6}, {metric_name} {:.6}",
                baseline.validation.loss,
                metric(&baseline)
            );
            println!(
                "best: k={} t={} n={} sigma={}: validation {:.6}, {metric_name} {:.6}",
                b.config.k,
                b.config.threshold.unwrap(),
                b.config.n,
                b.config.sigma,
                b.validation.loss,
                metric(&b)
            );
            Ok(())
        }
        None => bail!("every sweep configuration failed numerically"),
    }
}
