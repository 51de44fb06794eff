//! Domain approximation: point clouds, graphs over them, and the scalar fields
//! whose topology the rest of the crate analyzes.


use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::union_find::DisjointSet;

/// Per-point targets attached to a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labels {
    Regression(Vec<f64>),
    Classes(Vec<usize>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Regression(v) => v.len(),
            Labels::Classes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Regression(v) => Labels::Regression(indices.iter().map(|&i| v[i]).collect()),
            Labels::Classes(v) => Labels::Classes(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// `N` points of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Labels>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("points have differing dimensions"));
        }
        Self::from_flat(dim, points.into_iter().flatten().collect())
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("point dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} coordinates do not form a nonempty cloud of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Data("non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            coords,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(invalid(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Sub-cloud of the given rows, labels included.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud {
            dim: self.dim,
            coords,
            labels: self.labels.as_ref().map(|l| l.select(indices)),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PointCloudJson {
    dim: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointCloudJson {
            dim: self.dim,
            points: self.points().map(<[f64]>::to_vec).collect(),
            labels: self.labels.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PointCloudJson::deserialize(d)?;
        let mut cloud = PointCloud::new(raw.points).map_err(serde::de::Error::custom)?;
        if cloud.dim != raw.dim {
            return Err(serde::de::Error::custom("dim does not match points"));
        }
        if let Some(labels) = raw.labels {
            cloud = cloud.with_labels(labels).map_err(serde::de::Error::custom)?;
        }
        Ok(cloud)
    }
}

/// Undirected simple graph. Edges are kept as `(u, v)` with `u < v`, sorted
/// and unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson")]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct GraphJson {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;
    fn try_from(raw: GraphJson) -> Result<Self> {
        Graph::new(raw.vertex_count, raw.edges)
    }
}

impl Graph {
    /// Validates and canonicalizes an edge list. Self-loops, out-of-range
    /// endpoints and repeated edges (in either orientation) are errors.
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut canon = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(invalid(format!("self-loop at vertex {u}")));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(invalid(format!(
                    "edge ({u}, {v}) out of range for {vertex_count} vertices"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self {
            vertex_count,
            edges: canon,
        })
    }

    /// Like [`Graph::new`] but silently merges duplicate edges.
    pub(crate) fn from_edge_set(vertex_count: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            debug_assert!(e.0 != e.1 && e.0.max(e.1) < vertex_count);
            *e = (e.0.min(e.1), e.0.max(e.1));
        }
        edges.sort_unstable();
        edges.dedup();
        Self {
            vertex_count,
            edges,
        }
    }

    pub fn empty(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Subgraph on the same vertices keeping only edges accepted by `keep`.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Graph {
        Graph {
            vertex_count: self.vertex_count,
            edges: self.edges.iter().copied().filter(|&(u, v)| keep(u, v)).collect(),
        }
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    pub fn component_count(&self) -> usize {
        let mut ds = DisjointSet::new(self.vertex_count);
        let mut count = self.vertex_count;
        for &(u, v) in &self.edges {
            if ds.union(u, v).is_some() {
                count -= 1;
            }
        }
        count
    }
}

/// Compressed adjacency lists; each vertex's neighbors are sorted by index.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Adjacency {
    fn new(graph: &Graph) -> Self {
        let n = graph.vertex_count;
        let mut degree = vec![0usize; n + 1];
        for &(u, v) in &graph.edges {
            degree[u + 1] += 1;
            degree[v + 1] += 1;
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut neighbors = vec![0; offsets[n]];
        // Edges are sorted by (u, v), so pushing v onto u keeps u's list
        // sorted; the reverse direction needs an explicit sort.
        for &(u, v) in &graph.edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Self { offsets, neighbors }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// A graph with one finite value per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarFieldJson", into = "ScalarFieldJson")]
pub struct ScalarField {
    graph: Graph,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ScalarFieldJson {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl TryFrom<ScalarFieldJson> for ScalarField {
    type Error = Error;
    fn try_from(raw: ScalarFieldJson) -> Result<Self> {
        ScalarField::new(Graph::new(raw.vertex_count, raw.edges)?, raw.values)
    }
}

impl From<ScalarField> for ScalarFieldJson {
    fn from(f: ScalarField) -> Self {
        ScalarFieldJson {
            vertex_count: f.graph.vertex_count,
            edges: f.graph.edges,
            values: f.values,
        }
    }
}

impl ScalarField {
    pub fn new(graph: Graph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.vertex_count() {
            return Err(invalid(format!(
                "{} values for {} vertices",
                values.len(),
                graph.vertex_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at vertex {i}")));
        }
        Ok(Self { graph, values })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same graph, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ScalarField::new(self.graph.clone(), values)
    }

    pub fn negated(&self) -> Self {
        Self {
            graph: self.graph.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn into_parts(self) -> (Graph, Vec<f64>) {
        (self.graph, self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For every point, its `k` nearest other points ordered by (distance, index).
pub fn nearest_neighbors(points: &PointCloud, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if n == 0 {
        return Err(invalid("empty point cloud"));
    }
    if k == 0 || k >= n {
        return Err(invalid(format!("k = {k} must satisfy 1 <= k < N = {n}")));
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    let mut lists = Vec::with_capacity(n);
    for u in 0..n {
        let pu = points.point(u);
        scratch.clear();
        scratch.extend(
            (0..n)
                .filter(|&v| v != u)
                .map(|v| (squared_distance(pu, points.point(v)), v)),
        );
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, cmp);
            scratch.truncate(k);
        }
        scratch.sort_unstable_by(cmp);
        lists.push(scratch.iter().map(|&(_, v)| v).collect());
    }
    Ok(lists)
}

/// Symmetric k-NN graph: `(u, v)` is an edge when either endpoint is among
/// the `k` nearest neighbors of the other.
pub fn build_knn_graph(points: &PointCloud, k: usize) -> Result<Graph> {
    let lists = nearest_neighbors(points, k)?;
    let edges = lists
        .iter()
        .enumerate()
        .flat_map(|(u, list)| list.iter().map(move |&v| (u, v)))
        .collect();
    Ok(Graph::from_edge_set(points.len(), edges))
}

/// Appends `n` Gaussian samples around every point (originals first, then
/// the samples of point 0, point 1, ...). The result carries no labels unless
/// `n == 0`, in which case the input is returned unchanged.
pub fn augment_cloud(points: &PointCloud, n: usize, sigma: f64, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Ok(points.clone());
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma = {sigma} must be positive")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(points.coords.len() * (n + 1));
    coords.extend_from_slice(&points.coords);
    for p in points.points() {
        for _ in 0..n {
            coords.extend(p.iter().map(|&c| c + normal.sample(&mut rng)));
        }
    }
    PointCloud::from_flat(points.dim, coords)
}

/// Eigen-decomposition of a symmetric `n x n` row-major matrix by cyclic
/// Jacobi rotations. Returns eigenvalues in descending order and the matching
/// unit eigenvectors as rows.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = idx.iter().map(|&i| a[i * n + i]).collect();
    let vectors = idx
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (values, vectors)
}

/// Principal component model fitted on a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal axes, one row per retained component.
    pub components: Vec<Vec<f64>>,
    /// All eigenvalues of the sample covariance, descending.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(points: &PointCloud, dims: usize) -> Result<Self> {
        let d = points.dim();
        if dims == 0 || dims > d {
            return Err(invalid(format!("cannot project {d}-D data onto {dims} components")));
        }
        let n = points.len();
        let mut mean = vec![0.0; d];
        for p in points.points() {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; d * d];
        for p in points.points() {
            for i in 0..d {
                let ci = p[i] - mean[i];
                for j in i..d {
                    cov[i * d + j] += ci * (p[j] - mean[j]);
                }
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] /= denom;
                cov[j * d + i] = cov[i * d + j];
            }
        }
        let (variances, mut vectors) = symmetric_eigen(&cov, d);
        vectors.truncate(dims);
        for axis in vectors.iter_mut() {
            let lead = axis
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map(|(_, &x)| x)
                .unwrap_or(1.0);
            if lead < 0.0 {
                axis.iter_mut().for_each(|x| *x = -*x);
            }
        }
        Ok(Self {
            mean,
            components: vectors,
            variances,
        })
    }

    pub fn transform(&self, points: &PointCloud) -> Result<PointCloud> {
        if points.dim() != self.mean.len() {
            return Err(invalid("dimension mismatch in PCA transform"));
        }
        let mut coords = Vec::with_capacity(points.len() * self.components.len());
        for p in points.points() {
            for axis in &self.components {
                coords.push(
                    axis.iter()
                        .zip(p.iter().zip(&self.mean))
                        .map(|(a, (x, m))| a * (x - m))
                        .sum(),
                );
            }
        }
        let mut out = PointCloud::from_flat(self.components.len(), coords)?;
        out.labels = points.labels.clone();
        Ok(out)
    }

    /// Fraction of total variance captured by each retained component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.variances.iter().map(|v| v.max(0.0)).sum();
        self.variances[..self.components.len()]
            .iter()
            .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
            .collect()
    }
}

pub fn pca_project(points: &PointCloud, dims: usize) -> Result<PointCloud> {
    Pca::fit(points, dims)?.transform(points)
}

/// Row-major `width x height` grid with 4-connectivity.
pub fn build_grid_graph(width: usize, height: usize) -> Result<Graph> {
    if width == 0 || height == 0 {
        return Err(invalid("grid dimensions must be positive"));
    }
    let mut edges = Vec::with_capacity(2 * width * height);
    for i in 0..height {
        for j in 0..width {
            let v = i * width + j;
            if j + 1 < width {
                edges.push((v, v + 1));
            }
            if i + 1 < height {
                edges.push((v, v + width));
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph {
        vertex_count: width * height,
        edges,
    })
}

/// Per-feature affine map to zero mean and unit population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Zero marks a constant feature, which maps to 0.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(points: &PointCloud) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(invalid("standardization needs at least 2 points"));
        }
        let d = points.dim();
        let mut means = vec![0.0; d];
        for p in points.points() {
            for (m, x) in means.iter_mut().zip(p) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut stds = vec![0.0; d];
        for p in points.points() {
            for ((s, x), m) in stds.iter_mut().zip(p).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for (s, m) in stds.iter_mut().zip(&means) {
            *s = (*s / n as f64).sqrt();
            if *s <= 1e-12 * (1.0 + m.abs()) {
                *s = 0.0;
            }
        }
        Ok(Self { means, stds })
    }

    pub fn apply(&self, points: &PointCloud) -> Result<PointCloud> {
        if points.dim() != self.means.len() {
            return Err(invalid("dimension mismatch in standardization"));
        }
        let coords = points
            .points()
            .flat_map(|p| {
                p.iter()
                    .zip(self.means.iter().zip(&self.stds))
                    .map(|(x, (m, s))| if *s == 0.0 { 0.0 } else { (x - m) / s })
            })
            .collect();
        let mut out = PointCloud::from_flat(points.dim(), coords)?;
        out.labels = points.labels.clone();
        Ok(out)
    }
}

pub fn standardize(points: &PointCloud) -> Result<PointCloud> {
    Standardizer::fit(points)?.apply(points)
}

/// Seeded 75/25 train-test split followed by a 75/25 train-validation split
/// of the remainder (56/19/25 overall).
pub fn split_dataset(n: usize, seed: u64) -> Result<DatasetSplit> {
    if n < 4 {
        return Err(invalid(format!("cannot split {n} samples three ways")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_len = ((n as f64) * 0.25).round() as usize;
    let rest = n - test_len;
    let val_len = ((rest as f64) * 0.25).round() as usize;
    let train_len = rest - val_len;
    Ok(DatasetSplit {
        train: perm[..train_len].to_vec(),
        validation: perm[train_len..rest].to_vec(),
        test: perm[rest..].to_vec(),
    })
}

/// Options for reading a delimited numeric table.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Label column; negative values count from the end (-1 is the last).
    pub label_column: Option<isize>,
    pub classification: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            delimiter: b',',
            label_column: Some(-1),
            classification: false,
        }
    }
}

/// Reads a numeric table, one row per point. Class labels must be
/// nonnegative integers; they are remapped to `0..m` in sorted order.
pub fn read_csv<R: std::io::Read>(reader: R, opts: &CsvOptions) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cols = rec.len();
        if *width.get_or_insert(cols) != cols {
            return Err(Error::Data(format!("row {row} has {cols} columns")));
        }
        let label_idx = match opts.label_column {
            None => None,
            Some(c) if c < 0 => cols.checked_sub(c.unsigned_abs()),
            Some(c) => Some(c as usize).filter(|&c| c < cols),
        };
        if opts.label_column.is_some() && label_idx.is_none() {
            return Err(Error::Data(format!("label column out of range for {cols} columns")));
        }
        let mut point = Vec::with_capacity(cols);
        for (j, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::Data(format!("row {row}, column {j}: cannot parse {field:?}")))?;
            if Some(j) == label_idx {
                raw_labels.push(x);
            } else {
                point.push(x);
            }
        }
        features.push(point);
    }
    if features.is_empty() {
        return Err(Error::Data("no rows".into()));
    }
    let cloud = PointCloud::new(features)?;
    if opts.label_column.is_none() {
        return Ok(cloud);
    }
    let labels = if opts.classification {
        let mut distinct: Vec<i64> = Vec::new();
        for &y in &raw_labels {
            if y.fract() != 0.0 || y < 0.0 {
                return Err(Error::Data(format!("class label {y} is not a nonnegative integer")));
            }
            distinct.push(y as i64);
        }
        distinct.sort_unstable();
        distinct.dedup();
        Labels::Classes(
            raw_labels
                .iter()
                .map(|&y| distinct.binary_search(&(y as i64)).unwrap())
                .collect(),
        )
    } else {
        Labels::Regression(raw_labels)
    };
    cloud.with_labels(labels)
}
