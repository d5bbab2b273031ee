//! Dataset ingestion, standardization, splitting, group indexing and the
//! synthetic Gaussian generator used by the experiment pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four (sensitive attribute, label) cells, in a fixed canonical order.
pub const CELLS: [(u8, i8); 4] = [(0, -1), (0, 1), (1, -1), (1, 1)];

/// A classification dataset with a binary sensitive attribute.
///
/// Features are stored row-major. Labels are canonically in {-1, +1} and the
/// sensitive attribute in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    sensitive: Vec<u8>,
    labels: Vec<i8>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, sensitive: Vec<u8>, labels: Vec<i8>) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        let d = features[0].len();
        if d == 0 {
            return Err(Error::DomainError("zero feature columns".into()));
        }
        if sensitive.len() != n || labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sensitive.len().min(labels.len()),
            });
        }
        let mut flat = Vec::with_capacity(n * d);
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::MalformedRow {
                    line: i + 1,
                    reason: format!("expected {d} features, got {}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedRow {
                    line: i + 1,
                    reason: "non-finite feature value".into(),
                });
            }
            flat.extend_from_slice(row);
        }
        for &a in &sensitive {
            if a > 1 {
                return Err(Error::DomainError(format!("sensitive value {a} not in {{0,1}}")));
            }
        }
        for &y in &labels {
            if y != -1 && y != 1 {
                return Err(Error::UnknownLabelValue(y.to_string()));
            }
        }
        Ok(Self { features: flat, sensitive, labels, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn sensitive(&self, i: usize) -> u8 {
        self.sensitive[i]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn sensitives(&self) -> &[u8] {
        &self.sensitive
    }

    /// New dataset containing the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut sensitive = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.row(i));
            sensitive.push(self.sensitive[i]);
            labels.push(self.labels[i]);
        }
        Dataset { features, sensitive, labels, n: rows.len(), d: self.d }
    }
}

/// Per-cell index sets and empirical marginals p̂_ay.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupIndex {
    pub index_sets: BTreeMap<(u8, i8), Vec<usize>>,
    pub marginals: BTreeMap<(u8, i8), f64>,
    pub n: usize,
}

impl GroupIndex {
    pub fn indices(&self, a: u8, y: i8) -> &[usize] {
        self.index_sets.get(&(a, y)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn marginal(&self, a: u8, y: i8) -> f64 {
        *self.marginals.get(&(a, y)).unwrap_or(&0.0)
    }

    /// Indices of positive-label samples (both sensitive groups), sorted.
    pub fn positives(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.indices(0, 1).iter().chain(self.indices(1, 1)).copied().collect();
        out.sort_unstable();
        out
    }

    /// Errors out unless both positive-label protected groups are nonempty.
    pub fn require_positive_groups(&self) -> Result<()> {
        for a in [0u8, 1u8] {
            if self.indices(a, 1).is_empty() {
                return Err(Error::EmptyProtectedGroup { a, y: 1 });
            }
        }
        Ok(())
    }
}

pub fn group_index(data: &Dataset) -> GroupIndex {
    let mut index_sets: BTreeMap<(u8, i8), Vec<usize>> = BTreeMap::new();
    for cell in CELLS {
        index_sets.insert(cell, Vec::new());
    }
    for i in 0..data.n() {
        index_sets
            .get_mut(&(data.sensitive(i), data.label(i)))
            .expect("cell key")
            .push(i);
    }
    let marginals = index_sets
        .iter()
        .map(|(&k, v)| (k, v.len() as f64 / data.n() as f64))
        .collect();
    GroupIndex { index_sets, marginals, n: data.n() }
}

/// Column means and standard deviations captured on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Standardizes each column to mean 0, std 1. Zero-variance columns are
/// shifted to 0 and their std recorded as 1.
pub fn standardize(train: &Dataset) -> (Dataset, ScalerParams) {
    let (n, d) = (train.n(), train.dim());
    assert!(n >= 2, "standardize requires N >= 2");
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (j, v) in train.row(i).iter().enumerate() {
            means[j] += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for i in 0..n {
        for (j, v) in train.row(i).iter().enumerate() {
            stds[j] += (v - means[j]).powi(2);
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let params = ScalerParams { means, stds };
    (apply_scaler(train, &params), params)
}

/// Applies previously fitted scaler parameters.
pub fn apply_scaler(data: &Dataset, params: &ScalerParams) -> Dataset {
    let d = data.dim();
    assert_eq!(params.means.len(), d, "scaler dimension mismatch");
    let features = (0..data.n())
        .flat_map(|i| {
            let row = data.row(i);
            (0..d).map(move |j| (row[j] - params.means[j]) / params.stds[j])
        })
        .collect();
    Dataset {
        features,
        sensitive: data.sensitive.clone(),
        labels: data.labels.clone(),
        n: data.n,
        d,
    }
}

/// Deterministic random split into (train, test). The train size is
/// floor(fraction * N), reduced by one if that would leave the test set empty.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(train_fraction));
    }
    let n = data.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut n_train = (train_fraction * n as f64).floor() as usize;
    if n_train >= n {
        n_train = n - 1;
    }
    if n_train < 2 {
        return Err(Error::FractionOutOfRange(train_fraction));
    }
    let mut train_rows = order[..n_train].to_vec();
    let mut test_rows = order[n_train..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((data.subset(&train_rows), data.subset(&test_rows)))
}

/// Column mapping for CSV ingestion: names of the sensitive and label
/// columns; every other column is a feature, in file order.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub sensitive: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { sensitive: "sensitive".into(), label: "label".into() }
    }
}

/// Loads a UTF-8, comma-separated file with a header row. Labels in {0,1}
/// are mapped to {-1,+1}.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let mut sens_col = None;
    let mut label_col = None;
    let mut feature_cols = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if name == schema.sensitive {
            sens_col = Some(j);
        } else if name == schema.label {
            label_col = Some(j);
        } else {
            feature_cols.push(j);
        }
    }
    let sens_col = sens_col
        .ok_or_else(|| Error::DomainError(format!("missing column `{}`", schema.sensitive)))?;
    let label_col = label_col
        .ok_or_else(|| Error::DomainError(format!("missing column `{}`", schema.label)))?;
    if feature_cols.is_empty() {
        return Err(Error::DomainError("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut sensitive = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for &j in &feature_cols {
            let field = record.get(j).ok_or(Error::MalformedRow {
                line,
                reason: "missing field".into(),
            })?;
            let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("non-numeric feature `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRow { line, reason: "non-finite feature".into() });
            }
            row.push(v);
        }
        let a_field = record.get(sens_col).unwrap_or("").trim();
        let a = match a_field {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("sensitive value `{other}` not in {{0,1}}"),
                })
            }
        };
        let y_field = record.get(label_col).unwrap_or("").trim();
        let y = match y_field {
            "-1" => -1i8,
            "0" => -1i8,
            "1" | "+1" => 1i8,
            other => return Err(Error::UnknownLabelValue(other.to_string())),
        };
        features.push(row);
        sensitive.push(a);
        labels.push(y);
    }
    if features.is_empty() {
        return Err(Error::EmptyFile);
    }
    Dataset::new(features, sensitive, labels)
}

/// Writes a dataset in the canonical CSV layout `f1..fd,sensitive,label`.
pub fn write_csv<P: AsRef<Path>>(data: &Dataset, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("f{j}")).collect();
    header.push("sensitive".into());
    header.push("label".into());
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut record: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        record.push(data.sensitive(i).to_string());
        record.push(data.label(i).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Which 2x2 matrix is used to rotate features before drawing the sensitive
/// attribute. `Printed` is [cos,sin;sin,cos], `Orthogonal` is the proper
/// rotation [cos,-sin;sin,cos].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationKind {
    Printed,
    Orthogonal,
}

struct Gaussian2 {
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    chol: [[f64; 2]; 2], // lower triangular
}

impl Gaussian2 {
    fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        let l11 = cov[0][0].sqrt();
        let l21 = cov[0][1] / l11;
        let l22 = (cov[1][1] - l21 * l21).sqrt();
        Self { mean, cov, chol: [[l11, 0.0], [l21, l22]] }
    }

    fn sample(&self, z: [f64; 2]) -> [f64; 2] {
        [
            self.mean[0] + self.chol[0][0] * z[0],
            self.mean[1] + self.chol[1][0] * z[0] + self.chol[1][1] * z[1],
        ]
    }

    fn pdf(&self, x: [f64; 2]) -> f64 {
        let det = self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0];
        let dx = [x[0] - self.mean[0], x[1] - self.mean[1]];
        // inverse of a 2x2
        let q = (self.cov[1][1] * dx[0] * dx[0] - 2.0 * self.cov[0][1] * dx[0] * dx[1]
            + self.cov[0][0] * dx[1] * dx[1])
            / det;
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    }
}

/// Synthetic 2-feature generator.
///
/// Stream layout per sample, drawn from a ChaCha8 generator seeded with
/// `seed`: one uniform for the label, two standard normals for the feature
/// vector, one uniform for the sensitive attribute. Labels are fair coin
/// flips on {-1,+1}; X|Y=1 ~ N([2;2],[5,1;1,5]), X|Y=-1 ~ N([-2;-2],[10,1;1,3]);
/// P(A=1|x') is the class-1 density share at the rotated point x'.
pub fn gen_synthetic_with(n: usize, seed: u64, rotation: RotationKind) -> Dataset {
    assert!(n >= 4, "gen_synthetic requires n >= 4");
    let pos = Gaussian2::new([2.0, 2.0], [[5.0, 1.0], [1.0, 5.0]]);
    let neg = Gaussian2::new([-2.0, -2.0], [[10.0, 1.0], [1.0, 3.0]]);
    let (c, s) = ((std::f64::consts::PI / 4.0).cos(), (std::f64::consts::PI / 4.0).sin());
    let rot = match rotation {
        RotationKind::Printed => [[c, s], [s, c]],
        RotationKind::Orthogonal => [[c, -s], [s, c]],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n);
    let mut sensitive = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y: i8 = if rng.gen::<f64>() < 0.5 { 1 } else { -1 };
        let z = [standard_normal(&mut rng), standard_normal(&mut rng)];
        let x = if y == 1 { pos.sample(z) } else { neg.sample(z) };
        let xr = [
            rot[0][0] * x[0] + rot[0][1] * x[1],
            rot[1][0] * x[0] + rot[1][1] * x[1],
        ];
        let p1 = pos.pdf(xr);
        let p_a1 = p1 / (p1 + neg.pdf(xr));
        let a: u8 = if rng.gen::<f64>() < p_a1 { 1 } else { 0 };
        features.push(vec![x[0], x[1]]);
        sensitive.push(a);
        labels.push(y);
    }
    Dataset::new(features, sensitive, labels).expect("generated data is valid")
}

pub fn gen_synthetic(n: usize, seed: u64) -> Dataset {
    gen_synthetic_with(n, seed, RotationKind::Printed)
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller keeps the stream layout independent of rand_distr internals.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
