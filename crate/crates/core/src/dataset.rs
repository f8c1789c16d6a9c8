//! Labeled datasets, the synthetic clustered generator and small deterministic learners.
//!
//! Training points are addressed by their position inside the train split
//! (`0..n_train`), validation and test points likewise by position inside their split.
//! Those positions are the player ids used by games, attribution matrices and pruning.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::UnknownSplit(other.to_string())),
        }
    }
}

/// Feature/label table with a train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    /// Cluster id per train position.
    cluster_of: Option<Vec<usize>>,
    /// Generating cluster per row, known only for synthetic data and never persisted.
    source_cluster: Option<Vec<usize>>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major features and per-row split/cluster columns.
    ///
    /// `clusters`, when given, must hold a value for exactly the train rows.
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        splits: &[Split],
        clusters: Option<&[Option<usize>]>,
    ) -> Result<Self> {
        let rows = labels.len();
        if dim == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        if features.len() != rows * dim {
            return Err(invalid(format!(
                "expected {} feature values for {rows} rows of dimension {dim}, got {}",
                rows * dim,
                features.len()
            )));
        }
        if splits.len() != rows {
            return Err(invalid("split column length differs from row count"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        let num_classes = labels.iter().max().map_or(0, |&c| c + 1);
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for (row, split) in splits.iter().enumerate() {
            match split {
                Split::Train => train.push(row),
                Split::Val => val.push(row),
                Split::Test => test.push(row),
            }
        }
        let cluster_of = match clusters {
            None => None,
            Some(cl) => {
                if cl.len() != rows {
                    return Err(invalid("cluster column length differs from row count"));
                }
                let mut out = Vec::with_capacity(train.len());
                for (row, c) in cl.iter().enumerate() {
                    match (splits[row], c) {
                        (Split::Train, Some(k)) => out.push(*k),
                        (Split::Train, None) => return Err(invalid(format!("train row {row} has no cluster"))),
                        (_, Some(_)) => return Err(invalid(format!("non-train row {row} has a cluster"))),
                        (_, None) => {}
                    }
                }
                Some(out)
            }
        };
        Ok(Self { dim, features, labels, num_classes, train, val, test, cluster_of, source_cluster: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn n_val(&self) -> usize {
        self.val.len()
    }

    pub fn n_test(&self) -> usize {
        self.test.len()
    }

    /// Row ids belonging to a split.
    pub fn rows(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    /// Features of the `pos`-th point of `split`.
    pub fn point(&self, split: Split, pos: usize) -> &[f64] {
        self.row(self.rows(split)[pos])
    }

    pub fn point_label(&self, split: Split, pos: usize) -> usize {
        self.labels[self.rows(split)[pos]]
    }

    /// Cluster id per train position, if known.
    pub fn cluster_of(&self) -> Option<&[usize]> {
        self.cluster_of.as_deref()
    }

    /// Generating cluster of every point in `split` (synthetic data only).
    pub fn split_clusters(&self, split: Split) -> Option<Vec<usize>> {
        let src = self.source_cluster.as_ref()?;
        Some(self.rows(split).iter().map(|&r| src[r]).collect())
    }

    /// Most frequent train label, ties to the lowest class.
    pub fn majority_class(&self) -> usize {
        let mut counts = vec![0usize; self.num_classes.max(1)];
        for &r in &self.train {
            counts[self.labels[r]] += 1;
        }
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        best
    }

    /// Accuracy of always predicting the majority train class.
    pub fn majority_accuracy(&self, split: Split) -> f64 {
        accuracy(&Model::Constant(self.majority_class()), self, split)
    }

    fn row_clusters(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_rows()];
        if let Some(cl) = &self.cluster_of {
            for (pos, &row) in self.train.iter().enumerate() {
                out[row] = Some(cl[pos]);
            }
        }
        out
    }

    fn row_splits(&self) -> Vec<Split> {
        let mut out = vec![Split::Train; self.num_rows()];
        for &r in &self.val {
            out[r] = Split::Val;
        }
        for &r in &self.test {
            out[r] = Split::Test;
        }
        out
    }

    /// Writes the dataset as CSV with header `x0,…,x{d-1},label,split,cluster`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        header.extend(["label", "split", "cluster"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let splits = self.row_splits();
        let clusters = self.row_clusters();
        for row in 0..self.num_rows() {
            for x in self.row(row) {
                write!(out, "{x},")?;
            }
            let cluster = clusters[row].map(|c| c.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", self.labels[row], splits[row], cluster)?;
        }
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let dim =
            cols.len().checked_sub(3).filter(|&d| d > 0).ok_or_else(|| {
                Error::Parse("header needs at least one feature column plus label,split,cluster".into())
            })?;
        let expected: Vec<String> =
            (0..dim).map(|k| format!("x{k}")).chain(["label", "split", "cluster"].map(String::from)).collect();
        if cols != expected {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let (mut features, mut labels, mut splits, mut clusters) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut any_cluster = false;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != dim + 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    dim + 3,
                    fields.len()
                )));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 2));
            for f in &fields[..dim] {
                features.push(f.parse::<f64>().map_err(|_| bad("feature"))?);
            }
            labels.push(fields[dim].parse::<usize>().map_err(|_| bad("label"))?);
            splits.push(fields[dim + 1].parse::<Split>()?);
            let c = fields[dim + 2];
            if c.is_empty() {
                clusters.push(None);
            } else {
                any_cluster = true;
                clusters.push(Some(c.parse::<usize>().map_err(|_| bad("cluster"))?));
            }
        }
        Self::new(dim, features, labels, &splits, any_cluster.then_some(&clusters[..]))
    }
}

/// Draws a clustered dataset: training cluster `k` has `sizes[k]` points from
/// `N(centers[k], sigma² I)` labelled `labels[k]`; the validation and test splits
/// each get `test_sizes[k]` independent points from the same cluster.
pub fn gen_clustered(
    centers: &[Vec<f64>],
    sizes: &[usize],
    labels: &[usize],
    sigma: f64,
    test_sizes: &[usize],
    seed: u64,
) -> Result<LabeledDataset> {
    let k = centers.len();
    if k == 0 {
        return Err(invalid("at least one cluster is required"));
    }
    if sizes.len() != k || labels.len() != k || test_sizes.len() != k {
        return Err(invalid(format!(
            "centers ({k}), sizes ({}), labels ({}) and test_sizes ({}) must have equal length",
            sizes.len(),
            labels.len(),
            test_sizes.len()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma must be positive"));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(invalid("all centers must share a positive dimension"));
    }
    if sizes.contains(&0) {
        return Err(invalid("every training cluster needs at least one point"));
    }

    let mut features = Vec::new();
    let mut row_labels = Vec::new();
    let mut splits = Vec::new();
    let mut clusters = Vec::new();
    let mut source = Vec::new();
    for (split, purpose, counts) in
        [(Split::Train, "gen-train", sizes), (Split::Val, "gen-val", test_sizes), (Split::Test, "gen-test", test_sizes)]
    {
        for cluster in 0..k {
            let mut rng = rng_for(seed, purpose, cluster as u64);
            for _ in 0..counts[cluster] {
                for &mu in &centers[cluster] {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    features.push(mu + sigma * z);
                }
                row_labels.push(labels[cluster]);
                splits.push(split);
                clusters.push((split == Split::Train).then_some(cluster));
                source.push(cluster);
            }
        }
    }
    let mut data = LabeledDataset::new(dim, features, row_labels, &splits, Some(&clusters))?;
    data.source_cluster = Some(source);
    Ok(data)
}

pub const FIG1_CENTERS: [[f64; 2]; 4] = [[-2.0, 0.5], [2.5, 0.0], [-2.5, -0.5], [2.0, 0.0]];
pub const FIG1_SIZES: [usize; 4] = [3, 2, 2, 1];
/// Clusters 1 and 2 are red (class 0), clusters 3 and 4 blue (class 1).
pub const FIG1_LABELS: [usize; 4] = [0, 0, 1, 1];
pub const FIG1_SIGMA: f64 = 0.02;
pub const FIG1_TEST_SIZES: [usize; 4] = [5, 5, 5, 5];

/// The eight-point, four-cluster synthetic dataset.
pub fn fig1_preset(seed: u64) -> LabeledDataset {
    let centers: Vec<Vec<f64>> = FIG1_CENTERS.iter().map(|c| c.to_vec()).collect();
    gen_clustered(&centers, &FIG1_SIZES, &FIG1_LABELS, FIG1_SIGMA, &FIG1_TEST_SIZES, seed)
        .expect("preset parameters are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    /// 1-nearest-neighbour: every training point is its own prototype.
    NearestNeighbor,
    /// One centroid per class present in the training subset.
    NearestCentroid,
    MultinomialLogistic,
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest-neighbor" | "1nn" => Ok(Self::NearestNeighbor),
            "nearest-centroid" => Ok(Self::NearestCentroid),
            "multinomial-logistic" | "logistic" => Ok(Self::MultinomialLogistic),
            other => Err(invalid(format!("unknown learner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self { kind: LearnerKind::NearestNeighbor, learning_rate: 0.5, iterations: 200, seed: 0 }
    }
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Always predicts one class.
    Constant(usize),
    /// Labelled prototypes; predicts the label of the closest one (first wins ties).
    Prototypes { dim: usize, points: Vec<f64>, labels: Vec<usize> },
    /// Softmax regression; `weights` is `classes x (dim + 1)` with the bias last.
    Linear { dim: usize, classes: usize, weights: Vec<f64> },
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Model::Constant(c) => *c,
            Model::Prototypes { dim, points, labels } => {
                let mut best = (f64::INFINITY, 0);
                for (p, &label) in points.chunks_exact(*dim).zip(labels) {
                    let d = sq_dist(p, x);
                    if d < best.0 {
                        best = (d, label);
                    }
                }
                best.1
            }
            Model::Linear { dim, classes, weights } => {
                let mut best = (f64::NEG_INFINITY, 0);
                for c in 0..*classes {
                    let s = linear_score(&weights[c * (dim + 1)..(c + 1) * (dim + 1)], x);
                    if s > best.0 {
                        best = (s, c);
                    }
                }
                best.1
            }
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn linear_score(w: &[f64], x: &[f64]) -> f64 {
    let (bias, coef) = w.split_last().expect("weights include a bias");
    coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias
}

/// Trains a model on the given train positions.
pub fn train_learner(data: &LabeledDataset, subset: &[usize], spec: &LearnerSpec) -> Result<Model> {
    spec.validate()?;
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = data.n_train();
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(Error::PlayerOutOfRange { player: bad, n });
    }
    let dim = data.dim();
    Ok(match spec.kind {
        LearnerKind::NearestNeighbor => {
            let mut points = Vec::with_capacity(subset.len() * dim);
            let mut labels = Vec::with_capacity(subset.len());
            for &i in subset {
                points.extend_from_slice(data.point(Split::Train, i));
                labels.push(data.point_label(Split::Train, i));
            }
            Model::Prototypes { dim, points, labels }
        }
        LearnerKind::NearestCentroid => {
            let classes = data.num_classes();
            let mut sums = vec![0.0; classes * dim];
            let mut counts = vec![0usize; classes];
            for &i in subset {
                let c = data.point_label(Split::Train, i);
                counts[c] += 1;
                for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(data.point(Split::Train, i)) {
                    *s += x;
                }
            }
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for c in (0..classes).filter(|&c| counts[c] > 0) {
                points.extend(sums[c * dim..(c + 1) * dim].iter().map(|s| s / counts[c] as f64));
                labels.push(c);
            }
            Model::Prototypes { dim, points, labels }
        }
        LearnerKind::MultinomialLogistic => train_logistic(data, subset, spec),
    })
}

fn train_logistic(data: &LabeledDataset, subset: &[usize], spec: &LearnerSpec) -> Model {
    let dim = data.dim();
    let classes = data.num_classes().max(1);
    let stride = dim + 1;
    let mut weights = vec![0.0; classes * stride];
    let mut grad = vec![0.0; classes * stride];
    let mut probs = vec![0.0; classes];
    let scale = 1.0 / subset.len() as f64;
    for _ in 0..spec.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &i in subset {
            let x = data.point(Split::Train, i);
            let y = data.point_label(Split::Train, i);
            for (c, p) in probs.iter_mut().enumerate() {
                *p = linear_score(&weights[c * stride..(c + 1) * stride], x);
            }
            let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - max).exp();
                z += *p;
            }
            for (c, p) in probs.iter().enumerate() {
                let err = p / z - if c == y { 1.0 } else { 0.0 };
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gk, xk) in g.iter_mut().zip(x) {
                    *gk += err * xk;
                }
                g[dim] += err;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= spec.learning_rate * scale * g;
        }
    }
    Model::Linear { dim, classes, weights }
}

/// 0/1 correctness of `model` on every point of `split`, in split order.
pub fn correctness_vector(model: &Model, data: &LabeledDataset, split: Split) -> Vec<u8> {
    data.rows(split).iter().map(|&r| u8::from(model.predict(data.row(r)) == data.label(r))).collect()
}

/// Mean of [`correctness_vector`]; 0 for an empty split.
pub fn accuracy(model: &Model, data: &LabeledDataset, split: Split) -> f64 {
    let v = correctness_vector(model, data, split);
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|&c| f64::from(c)).sum::<f64>() / v.len() as f64
}

/// Trains on `subset` and returns accuracy on `split`; an empty subset scores the
/// majority-class baseline.
pub fn subset_accuracy(data: &LabeledDataset, subset: &[usize], spec: &LearnerSpec, split: Split) -> Result<f64> {
    if subset.is_empty() {
        return Ok(data.majority_accuracy(split));
    }
    Ok(accuracy(&train_learner(data, subset, spec)?, data, split))
}
