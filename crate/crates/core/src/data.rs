//! Datasets: synthetic AR(1) regression designs and CSV ingestion.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Feature matrix (one row per point) with optional responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Option<DVector<f64>>) -> Result<Self> {
        if let Some(y) = &y {
            if y.len() != x.nrows() {
                return Err(Error::DimensionMismatch { expected: x.nrows(), got: y.len() });
            }
        }
        let feature_names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        Ok(Self { x, y, feature_names })
    }

    pub fn labeled(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(x, Some(y))
    }

    pub fn unlabeled(x: DMatrix<f64>) -> Self {
        Self::new(x, None).expect("no responses to mismatch")
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn responses(&self) -> Result<&DVector<f64>> {
        self.y.as_ref().ok_or(Error::MissingResponses)
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Rows `idx` (in that order) as a new dataset.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let x = self.x.select_rows(idx);
        let y = self.y.as_ref().map(|y| DVector::from_iterator(idx.len(), idx.iter().map(|&i| y[i])));
        Dataset { x, y, feature_names: self.feature_names.clone() }
    }

    /// `self ∪ {(x, y)}` with the new point appended as the last row.
    pub fn augmented(&self, x: &DVector<f64>, y: f64) -> Result<Dataset> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), got: x.len() });
        }
        let n = self.n();
        let ys = self.responses()?;
        let mut xa = self.x.clone().insert_row(n, 0.0);
        xa.row_mut(n).copy_from(&x.transpose());
        let ya = ys.clone().push(y);
        Ok(Dataset { x: xa, y: Some(ya), feature_names: self.feature_names.clone() })
    }
}

/// Parameters of the synthetic regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub rho_ar: f64,
    pub model: MeanModel,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n: 100, m: 100, d: 100, rho_ar: 0.5, model: MeanModel::Linear, noise_sd: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanModel {
    /// `sum_j beta_j x_j`
    Linear,
    /// `sum_j beta_j exp(x_j / 10)`
    Nonlinear,
}

impl MeanModel {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(MeanModel::Linear),
            "nonlinear" => Some(MeanModel::Nonlinear),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeanModel::Linear => "linear",
            MeanModel::Nonlinear => "nonlinear",
        }
    }

    pub fn mean(self, x: &[f64], beta: &DVector<f64>) -> f64 {
        match self {
            MeanModel::Linear => x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum(),
            MeanModel::Nonlinear => x.iter().zip(beta.iter()).map(|(a, b)| b * (a / 10.0).exp()).sum(),
        }
    }
}

/// `Sigma_ij = rho^|i-j|`.
pub fn ar1_covariance(d: usize, rho: f64) -> Result<DMatrix<f64>> {
    if rho.abs() >= 1.0 || rho.is_nan() {
        return Err(Error::InvalidConfig(format!("AR(1) correlation must satisfy |rho| < 1, got {rho}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// `beta_j ∝ (1 - j/d)^5`, rescaled so that `||beta||^2 = d`.
pub fn beta_vector(d: usize) -> Result<DVector<f64>> {
    if d < 2 {
        return Err(Error::DegenerateBeta(d));
    }
    let raw = DVector::from_fn(d, |j, _| (1.0 - (j + 1) as f64 / d as f64).powi(5));
    let scale = (d as f64 / raw.norm_squared()).sqrt();
    Ok(raw * scale)
}

/// Draws `n + m` points with `X ~ N(0, Sigma / d)` and `Y = mu(X) + noise`,
/// returning `(train, test)` where the test set keeps its labels.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    if spec.n == 0 || spec.m == 0 || spec.d == 0 {
        return Err(Error::InvalidConfig("n, m and d must all be at least 1".into()));
    }
    if spec.noise_sd < 0.0 {
        return Err(Error::InvalidConfig("noise_sd must be non-negative".into()));
    }
    let d = spec.d;
    let sigma = ar1_covariance(d, spec.rho_ar)?;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::InvalidConfig("AR(1) covariance is not positive definite".into()))?;
    let l = chol.l() / (d as f64).sqrt();
    let beta = if d >= 2 { beta_vector(d)? } else { DVector::from_element(1, 1.0) };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.n + spec.m;
    let mut x = DMatrix::zeros(total, d);
    let mut y = DVector::zeros(total);
    let mut z = DVector::zeros(d);
    for i in 0..total {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let row = &l * &z;
        x.row_mut(i).copy_from(&row.transpose());
        let noise: f64 = StandardNormal.sample(&mut rng);
        y[i] = spec.model.mean(row.as_slice(), &beta) + spec.noise_sd * noise;
    }
    let all = Dataset::labeled(x, y)?;
    let train_idx: Vec<usize> = (0..spec.n).collect();
    let test_idx: Vec<usize> = (spec.n..total).collect();
    Ok((all.select(&train_idx), all.select(&test_idx)))
}

/// Loads a comma-separated file with a header row. `response_column` names
/// the response; every other column becomes a feature. Empty or
/// non-numeric cells are reported as missing.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let resp = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| Error::Data(format!("response column '{response_column}' not found")))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut missing = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!("row {} has {} fields, expected {}", r + 1, record.len(), headers.len())));
        }
        let parsed: Vec<Option<f64>> =
            record.iter().map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        if parsed.iter().any(Option::is_none) {
            missing.push(r + 1);
            continue;
        }
        rows.push(parsed.into_iter().map(Option::unwrap).collect());
    }
    if !missing.is_empty() {
        return Err(Error::MissingValues { rows: missing });
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    let n = rows.len();
    let d = headers.len() - 1;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != resp).collect();
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][feature_cols[j]]);
    let y = DVector::from_fn(n, |i, _| rows[i][resp]);
    let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Ok(Dataset { x, y: Some(y), feature_names })
}

/// Writes features followed by the response column (named `response_column`).
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, response_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = data.feature_names.clone();
    if data.y.is_some() {
        header.push(response_column.to_string());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        // `{:?}` prints the shortest string that parses back to the same f64.
        let mut rec: Vec<String> = data.x.row(i).iter().map(|v| format!("{v:?}")).collect();
        if let Some(y) = &data.y {
            rec.push(format!("{:?}", y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn zscore_column(values: &mut [f64], name: &str) -> Result<()> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}

/// Standardizes every feature column and the response to mean 0 and
/// population sd 1.
pub fn zscore_normalize(data: &Dataset) -> Result<Dataset> {
    let mut out = zscore_features(data)?;
    if let Some(y) = out.y.as_mut() {
        zscore_column(y.as_mut_slice(), "response")?;
    }
    Ok(out)
}

/// Standardizes the feature columns only (binary responses stay untouched).
pub fn zscore_features(data: &Dataset) -> Result<Dataset> {
    let mut out = data.clone();
    for j in 0..out.d() {
        let mut col: Vec<f64> = out.x.column(j).iter().copied().collect();
        zscore_column(&mut col, &out.feature_names[j])?;
        out.x.column_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

/// Uniformly samples `m` rows without replacement as the test set; the rest
/// (in original order) form the training set.
pub fn holdout_split(data: &Dataset, m: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if m == 0 || m >= n {
        return Err(Error::EmptyFold(format!("holdout of {m} rows from {n} leaves an empty fold")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: Vec<usize> = sample(&mut rng, n, m).into_vec();
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((data.select(&train), data.select(&test)))
}
