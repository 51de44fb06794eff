//! Two-phase training: ordinary minibatch epochs with one Adam state, and
//! topological phases that pull the network toward an ε-simplification of
//! itself on the domain graph, with a second Adam state.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::mlp::{cross_entropy_loss_grad, mse_loss_grad, non_finite, Activation, Gradients, Mlp};
use crate::error::{invalid, Error, Result};
use crate::field::{
    augment_cloud, build_knn_graph, split_dataset, Graph, Labels, Pca, PointCloud, ScalarField, Standardizer,
};
use crate::merge_tree::{compute_merge_tree, diagram_of, Direction, PersistenceDiagram, Vineyard};
use crate::simplify::{
    confidence_field, epsilon_largest_gap, epsilon_top_j, simplify, simplify_confidence, top_two,
    SimplificationTarget,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// How ε is chosen when a topological phase fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// ε is the current validation loss (MSE or cross-entropy), unscaled.
    ValidationLoss,
    /// Keep the `j` most persistent points.
    TopJ(usize),
    LargestGap,
    Fixed(f64),
}

impl EpsilonPolicy {
    pub fn resolve(&self, validation_loss: f64, diagram: &PersistenceDiagram) -> f64 {
        match *self {
            EpsilonPolicy::ValidationLoss => validation_loss,
            EpsilonPolicy::TopJ(j) => epsilon_top_j(diagram, j),
            EpsilonPolicy::LargestGap => epsilon_largest_gap(diagram),
            EpsilonPolicy::Fixed(e) => e,
        }
    }
}

/// Which extrema of a regression model are simplified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplifyDirections {
    Both,
    Sublevel,
    Superlevel,
}

impl SimplifyDirections {
    fn list(self) -> &'static [Direction] {
        match self {
            SimplifyDirections::Both => &[Direction::Sublevel, Direction::Superlevel],
            SimplifyDirections::Sublevel => &[Direction::Sublevel],
            SimplifyDirections::Superlevel => &[Direction::Superlevel],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Master switch for topological phases.
    pub topo: bool,
    /// Validation-loss increase over the previous epoch that triggers a
    /// phase; `None` disables the trigger.
    pub threshold: Option<f64>,
    /// Run a phase after every epoch from this one on, regardless of the
    /// trigger.
    pub always_from_epoch: Option<usize>,
    pub topo_steps: usize,
    /// Fixed learning rate for topological phases. `None` scales the base
    /// rate by the gradient-norm ratio.
    pub topo_learning_rate: Option<f64>,
    pub k: usize,
    /// Extra Gaussian samples per training point in the domain graph.
    pub n: usize,
    pub sigma: f64,
    /// Build the k-NN graph on this many principal components.
    pub pca_dims: Option<usize>,
    pub epsilon: EpsilonPolicy,
    pub directions: SimplifyDirections,
    /// Coefficient of the squared-weight penalty; 0 disables it.
    pub weight_decay: f64,
    pub record_vineyard: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Regression,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden_layers: 5,
            hidden_width: 100,
            topo: true,
            threshold: Some(1e-3),
            always_from_epoch: None,
            topo_steps: 10,
            topo_learning_rate: None,
            k: 15,
            n: 0,
            sigma: 1e-3,
            pca_dims: None,
            epsilon: EpsilonPolicy::ValidationLoss,
            directions: SimplifyDirections::Both,
            weight_decay: 0.0,
            record_vineyard: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} = {x} must be positive")))
            }
        };
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_width == 0 || self.k == 0 {
            return Err(invalid("epochs, batch size, hidden width and k must be positive"));
        }
        positive("learning rate", self.learning_rate)?;
        if let Some(lr) = self.topo_learning_rate {
            positive("topological learning rate", lr)?;
        }
        if self.n > 0 {
            positive("sigma", self.sigma)?;
        }
        if !(1..=50).contains(&self.topo_steps) {
            return Err(invalid(format!("topo steps {} outside [1, 50]", self.topo_steps)));
        }
        if self.threshold.is_some_and(|t| t.is_nan()) {
            return Err(invalid("threshold is NaN"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be nonnegative"));
        }
        match self.epsilon {
            EpsilonPolicy::Fixed(e) if !(e >= 0.0) => Err(invalid("fixed epsilon must be nonnegative")),
            EpsilonPolicy::TopJ(0) => Err(invalid("top-j needs j >= 1")),
            _ => Ok(()),
        }
    }

    /// Preset for the noisy three-class demo: simplification after every
    /// epoch from 450 of 500, keeping the three most persistent peaks.
    /// Phases step at the base rate; the gradient-ratio rate is ~1e-6 here.
    pub fn three_blob_preset(seed: u64) -> Self {
        Self {
            task: Task::Classification,
            epochs: 500,
            threshold: None,
            always_from_epoch: Some(450),
            topo_learning_rate: Some(1e-3),
            epsilon: EpsilonPolicy::TopJ(3),
            k: 15,
            n: 0,
            seed,
            ..Self::default()
        }
    }

    /// Red wine quality regression with k = 15, t = 0.001, n = 6, σ = 0.001.
    pub fn wine_preset(seed: u64) -> Self {
        Self {
            task: Task::Regression,
            epochs: 100,
            threshold: Some(1e-3),
            topo_learning_rate: Some(1e-3),
            k: 15,
            n: 6,
            sigma: 1e-3,
            seed,
            ..Self::default()
        }
    }
}

/// Inputs of the domain graph's vertices (training points first, then
/// augmentation samples) and the graph itself.
#[derive(Debug, Clone)]
pub struct Domain {
    pub inputs: Array2<f64>,
    pub graph: Graph,
}

impl Domain {
    pub fn build(train: &PointCloud, config: &TrainConfig, seed: u64) -> Result<Self> {
        let cloud = augment_cloud(train, config.n, config.sigma, seed)?;
        let graph = match config.pca_dims {
            Some(dims) => build_knn_graph(&Pca::fit(&cloud, dims)?.transform(&cloud)?, config.k)?,
            None => build_knn_graph(&cloud, config.k)?,
        };
        Ok(Self {
            inputs: to_matrix(&cloud),
            graph,
        })
    }
}

fn to_matrix(cloud: &PointCloud) -> Array2<f64> {
    Array2::from_shape_vec((cloud.len(), cloud.dim()), cloud.coords().to_vec()).expect("row-major cloud")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub epoch: usize,
    /// One ε per simplified function (two for two-sided regression).
    pub epsilons: Vec<f64>,
    pub changed: usize,
    pub learning_rate: f64,
    pub loss_before: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    /// Mean squared error or mean cross-entropy.
    pub loss: f64,
    pub rmsd: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub split_sizes: [usize; 3],
    pub domain_vertices: usize,
    pub domain_edges: usize,
    pub train_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// Validation metrics of the final model.
    pub validation: TestMetrics,
    pub test: TestMetrics,
    pub phases: Vec<PhaseRecord>,
    pub vineyard: Vineyard,
}

impl TrainReport {
    /// Relative decrease from the validation loss at `epoch` to the lowest
    /// one over the following `window` epochs.
    pub fn validation_drop(&self, epoch: usize, window: usize) -> Option<f64> {
        let base = *self.validation_losses.get(epoch)?;
        let after = self.validation_losses.get(epoch + 1..=(epoch + window).min(self.validation_losses.len() - 1))?;
        let best = after.iter().copied().fold(f64::INFINITY, f64::min);
        Some((base - best) / base)
    }
}

fn targets_of(labels: &Labels) -> (Option<Vec<f64>>, Option<Vec<usize>>) {
    match labels {
        Labels::Regression(y) => (Some(y.clone()), None),
        Labels::Classes(c) => (None, Some(c.clone())),
    }
}

/// Batch targets for either task.
#[derive(Debug, Clone)]
enum Targets {
    Values(Vec<f64>),
    Classes(Vec<usize>),
}

impl Targets {
    fn from_labels(labels: &Labels) -> Self {
        match targets_of(labels) {
            (Some(y), _) => Targets::Values(y),
            (_, Some(c)) => Targets::Classes(c),
            _ => unreachable!(),
        }
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Values(y) => Targets::Values(idx.iter().map(|&i| y[i]).collect()),
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
        }
    }

    fn loss_grad(&self, out: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
        match self {
            Targets::Values(y) => mse_loss_grad(out, y),
            Targets::Classes(c) => cross_entropy_loss_grad(out, c),
        }
    }
}

fn metrics(model: &Mlp, x: &Array2<f64>, targets: &Targets) -> Result<TestMetrics> {
    let out = model.predict(x.view())?;
    let (loss, _) = targets.loss_grad(out.view());
    if !loss.is_finite() {
        return Err(non_finite("evaluation loss"));
    }
    Ok(match targets {
        Targets::Values(_) => TestMetrics {
            loss,
            rmsd: Some(loss.sqrt()),
            accuracy: None,
        },
        Targets::Classes(c) => {
            let hits = out
                .rows()
                .into_iter()
                .zip(c)
                .filter(|(row, &y)| top_two(row.iter().copied()).0 == y)
                .count();
            TestMetrics {
                loss,
                rmsd: None,
                accuracy: Some(hits as f64 / c.len() as f64),
            }
        }
    })
}

/// PSO objective `Σ_t Σ_v (f(v) - g_t(v))^2` for a scalar model over the
/// domain inputs, and its parameter gradient.
pub fn regression_pso_grad(
    model: &Mlp,
    inputs: ArrayView2<'_, f64>,
    targets: &[SimplificationTarget],
) -> Result<(f64, Gradients)> {
    let cache = model.forward(inputs)?;
    let mut grad_out = Array2::zeros(cache.output.dim());
    let mut loss = 0.0;
    for t in targets {
        if t.g_values.len() != inputs.nrows() {
            return Err(invalid("target length does not match domain"));
        }
        for (v, g) in t.g_values.iter().enumerate() {
            let r = cache.output[[v, 0]] - g;
            loss += r * r;
            grad_out[[v, 0]] += 2.0 * r;
        }
    }
    Ok((loss, model.backward(&cache, grad_out.view())?))
}

/// PSO objective on the confidence `top - runner_up` of a classifier. The
/// two channels are re-read from the current logits at every call.
pub fn confidence_pso_grad(
    model: &Mlp,
    inputs: ArrayView2<'_, f64>,
    target: &SimplificationTarget,
) -> Result<(f64, Gradients)> {
    if target.g_values.len() != inputs.nrows() {
        return Err(invalid("target length does not match domain"));
    }
    let cache = model.forward(inputs)?;
    let mut grad_out = Array2::zeros(cache.output.dim());
    let mut loss = 0.0;
    for (v, (row, g)) in cache.output.rows().into_iter().zip(&target.g_values).enumerate() {
        let (p, q, conf) = top_two(row.iter().copied());
        let r = conf - g;
        loss += r * r;
        grad_out[[v, p]] += 2.0 * r;
        grad_out[[v, q]] -= 2.0 * r;
    }
    Ok((loss, model.backward(&cache, grad_out.view())?))
}

/// Diagrams the model induces on the domain: the confidence diagram for
/// classifiers, one diagram per simplified direction for regressors.
pub fn domain_diagrams(model: &Mlp, domain: &Domain, config: &TrainConfig) -> Result<Vec<PersistenceDiagram>> {
    let out = model.predict(domain.inputs.view())?;
    match config.task {
        Task::Classification => Ok(vec![confidence_field(out.view(), &domain.graph)?.diagram()]),
        Task::Regression => {
            let field = ScalarField::new(domain.graph.clone(), out.column(0).to_vec())
                .map_err(|_| non_finite("model output"))?;
            Ok(config
                .directions
                .list()
                .iter()
                .map(|&d| diagram_of(&compute_merge_tree(&field, d)))
                .collect())
        }
    }
}

enum PhaseTargets {
    Regression(Vec<SimplificationTarget>),
    Classification(SimplificationTarget),
}

impl PhaseTargets {
    fn changed(&self) -> usize {
        match self {
            PhaseTargets::Regression(ts) => {
                let mut all: Vec<usize> = ts.iter().flat_map(|t| t.changed.iter().copied()).collect();
                all.sort_unstable();
                all.dedup();
                all.len()
            }
            PhaseTargets::Classification(t) => t.changed.len(),
        }
    }

    fn epsilons(&self) -> Vec<f64> {
        match self {
            PhaseTargets::Regression(ts) => ts.iter().map(|t| t.epsilon).collect(),
            PhaseTargets::Classification(t) => vec![t.epsilon],
        }
    }

    fn loss_grad(&self, model: &Mlp, inputs: ArrayView2<'_, f64>) -> Result<(f64, Gradients)> {
        match self {
            PhaseTargets::Regression(ts) => regression_pso_grad(model, inputs, ts),
            PhaseTargets::Classification(t) => confidence_pso_grad(model, inputs, t),
        }
    }
}

fn phase_targets(model: &Mlp, domain: &Domain, config: &TrainConfig, validation_loss: f64) -> Result<PhaseTargets> {
    let out = model.predict(domain.inputs.view())?;
    match config.task {
        Task::Classification => {
            let cf = confidence_field(out.view(), &domain.graph)?;
            let eps = config.epsilon.resolve(validation_loss, &cf.diagram());
            Ok(PhaseTargets::Classification(simplify_confidence(&cf, eps)?))
        }
        Task::Regression => {
            let field = ScalarField::new(domain.graph.clone(), out.column(0).to_vec())
                .map_err(|_| non_finite("model output"))?;
            let mut targets = Vec::new();
            for &dir in config.directions.list() {
                let tree = compute_merge_tree(&field, dir);
                let eps = config.epsilon.resolve(validation_loss, &diagram_of(&tree));
                targets.push(simplify(&tree, &field, eps)?);
            }
            Ok(PhaseTargets::Regression(targets))
        }
    }
}

/// Learning rate of a topological phase: the base rate scaled by the ratio of
/// the last ordinary gradient norm to the first topological one.
pub fn phase_learning_rate(base: f64, standard_norm: f64, topo_norm: f64) -> f64 {
    let ratio = if topo_norm > 0.0 { standard_norm / topo_norm } else { 1.0 };
    (base * ratio).clamp(1e-6, 1e2)
}

/// Simplifies the model on the domain at the configured ε and takes
/// `config.topo_steps` steps toward the fixed target with `optimizer`.
/// Returns `None` when the target equals the current function.
pub fn topo_phase(
    model: &mut Mlp,
    optimizer: &mut AdamState,
    domain: &Domain,
    config: &TrainConfig,
    validation_loss: f64,
    standard_grad_norm: f64,
    epoch: usize,
) -> Result<Option<PhaseRecord>> {
    let targets = phase_targets(model, domain, config, validation_loss)?;
    let changed = targets.changed();
    if changed == 0 {
        return Ok(None);
    }
    let inputs = domain.inputs.view();
    let mut loss_before = f64::NAN;
    for step in 0..config.topo_steps {
        let (loss, grads) = targets.loss_grad(model, inputs)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(non_finite("topological loss"));
        }
        if step == 0 {
            loss_before = loss;
            optimizer.learning_rate = match config.topo_learning_rate {
                Some(lr) => lr,
                None => phase_learning_rate(config.learning_rate, standard_grad_norm, grads.norm()),
            };
        }
        optimizer.step(model, &grads);
    }
    let (loss_after, _) = targets.loss_grad(model, inputs)?;
    if !model.is_finite() || !loss_after.is_finite() {
        return Err(non_finite("model after topological phase"));
    }
    Ok(Some(PhaseRecord {
        epoch,
        epsilons: targets.epsilons(),
        changed,
        learning_rate: optimizer.learning_rate,
        loss_before,
        loss_after,
    }))
}

/// Everything a run needs after splitting and standardizing the data.
struct Prepared {
    x_train: Array2<f64>,
    x_val: Array2<f64>,
    x_test: Array2<f64>,
    y_train: Targets,
    y_val: Targets,
    y_test: Targets,
    outputs: usize,
    domain: Domain,
    split_sizes: [usize; 3],
}

fn prepare(config: &TrainConfig, data: &PointCloud, rng: &mut ChaCha8Rng) -> Result<Prepared> {
    let labels = data.labels().ok_or_else(|| invalid("training data has no labels"))?;
    let outputs = match (config.task, labels) {
        (Task::Regression, Labels::Regression(_)) => 1,
        (Task::Classification, Labels::Classes(c)) => {
            let m = c.iter().max().map_or(0, |&m| m + 1);
            if m < 2 {
                return Err(invalid("classification needs at least two classes"));
            }
            m
        }
        _ => return Err(invalid("labels do not match the task")),
    };
    let split = split_dataset(data.len(), rng.next_u64())?;
    let train_raw = data.select(&split.train);
    let scaler = Standardizer::fit(&train_raw)?;
    let train = scaler.apply(&train_raw)?;
    let val = scaler.apply(&data.select(&split.validation))?;
    let test = scaler.apply(&data.select(&split.test))?;
    let domain_seed = rng.next_u64();
    let domain = if config.topo {
        Domain::build(&train.clone().without_labels(), config, domain_seed)?
    } else {
        Domain {
            inputs: Array2::zeros((0, data.dim())),
            graph: Graph::empty(0),
        }
    };
    let targets = |c: &PointCloud| Targets::from_labels(c.labels().expect("labels carried through"));
    Ok(Prepared {
        x_train: to_matrix(&train),
        x_val: to_matrix(&val),
        x_test: to_matrix(&test),
        y_train: targets(&train),
        y_val: targets(&val),
        y_test: targets(&test),
        outputs,
        domain,
        split_sizes: [split.train.len(), split.validation.len(), split.test.len()],
    })
}

pub fn train(config: &TrainConfig, data: &PointCloud) -> Result<TrainReport> {
    train_model(config, data).map(|(report, _)| report)
}

/// Runs the full protocol and returns the report with the final model.
pub fn train_model(config: &TrainConfig, data: &PointCloud) -> Result<(TrainReport, Mlp)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prep = prepare(config, data, &mut rng)?;

    let widths = Mlp::widths(data.dim(), config.hidden_layers, config.hidden_width, prep.outputs);
    let mut model = Mlp::new(&widths, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(rng.next_u64()))?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut standard_opt = AdamState::new(&model, adam);
    let mut topo_opt = AdamState::new(&model, adam);

    let n_train = prep.x_train.nrows();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut train_losses = Vec::with_capacity(config.epochs);
    let mut validation_losses = Vec::with_capacity(config.epochs);
    let mut phases = Vec::new();
    let mut vineyard = Vineyard::new();
    let mut last_grad_norm = 0.0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let x = prep.x_train.select(ndarray::Axis(0), batch);
            let y = prep.y_train.select(batch);
            let cache = model.forward(x.view())?;
            let (loss, grad_out) = y.loss_grad(cache.output.view());
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss is {loss} in epoch {epoch}")));
            }
            let mut grads = model.backward(&cache, grad_out.view())?;
            grads.add_weight_decay(&model, config.weight_decay);
            last_grad_norm = grads.norm();
            standard_opt.step(&mut model, &grads);
        }

        let train_loss = metrics(&model, &prep.x_train, &prep.y_train)?.loss;
        let val_loss = metrics(&model, &prep.x_val, &prep.y_val)?.loss;
        let fire = config.topo
            && (config.always_from_epoch.is_some_and(|s| epoch >= s)
                || (epoch > 0
                    && config
                        .threshold
                        .is_some_and(|t| val_loss - validation_losses[epoch - 1] > t)));
        train_losses.push(train_loss);
        validation_losses.push(val_loss);

        if fire {
            if let Some(record) = topo_phase(
                &mut model,
                &mut topo_opt,
                &prep.domain,
                config,
                val_loss,
                last_grad_norm,
                epoch,
            )? {
                phases.push(record);
            }
        }
        if config.topo && config.record_vineyard {
            let persistences = domain_diagrams(&model, &prep.domain, config)?
                .iter()
                .flat_map(PersistenceDiagram::persistences)
                .collect();
            vineyard.record_persistences(epoch, persistences)?;
        }
    }

    let report = TrainReport {
        config: config.clone(),
        split_sizes: prep.split_sizes,
        domain_vertices: prep.domain.inputs.nrows(),
        domain_edges: prep.domain.graph.edge_count(),
        train_losses,
        validation_losses,
        validation: metrics(&model, &prep.x_val, &prep.y_val)?,
        test: metrics(&model, &prep.x_test, &prep.y_test)?,
        phases,
        vineyard,
    };
    Ok((report, model))
}
