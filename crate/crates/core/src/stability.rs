//! Leave-one-out and replace-one stability bounds for RLM, SGD (convex and
//! nonconvex), approximate neural-network bounds and bagging.

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{lipschitz_profile_kernel_huber, lipschitz_profile_linear_huber, row_norms, KernelMap, LipschitzProfile};
use crate::trainers::check_learning_rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Loo,
    Ro,
}

/// `tau_train[i]` bounds the score change at training point `i`, `tau_test`
/// at the test point itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityBounds {
    pub kind: BoundKind,
    pub tau_train: Vec<f64>,
    pub tau_test: f64,
    pub test_index: usize,
    /// Set for approximations that are not proven bounds.
    pub heuristic: bool,
}

impl StabilityBounds {
    fn new(kind: BoundKind, tau_train: Vec<f64>, tau_test: f64, test_index: usize) -> Self {
        Self { kind, tau_train, tau_test, test_index, heuristic: false }
    }

    pub fn zero(kind: BoundKind, n: usize, test_index: usize) -> Self {
        Self::new(kind, vec![0.0; n], 0.0, test_index)
    }

    pub fn is_finite(&self) -> bool {
        self.tau_test.is_finite() && self.tau_train.iter().all(|t| t.is_finite())
    }
}

fn test_slot(profile: &LipschitzProfile, j: usize) -> Result<usize> {
    let k = profile.n_train + j;
    if j >= profile.n_test() {
        return Err(Error::DimensionMismatch { expected: profile.n_test(), got: j });
    }
    Ok(k)
}

/// Scales `scale * nu_i` over training points and the test point into bounds.
fn per_point(profile: &LipschitzProfile, kind: BoundKind, j: usize, scale: f64) -> Result<StabilityBounds> {
    let k = test_slot(profile, j)?;
    let tau_train = profile.nu[..profile.n_train].iter().map(|nu| scale * nu).collect();
    let b = StabilityBounds::new(kind, tau_train, scale * profile.nu[k], j);
    if !b.is_finite() {
        return Err(Error::BoundOverflow(format!("non-finite bound for test point {j}")));
    }
    Ok(b)
}

/// `tau_LOO = 2 gamma nu_i (rho_test + rho_bar) / (lambda (n + 1))` and
/// `tau_RO = 4 gamma nu_i rho_test / (lambda (n + 1))`.
pub fn rlm_bounds(profile: &LipschitzProfile, j: usize) -> Result<(StabilityBounds, StabilityBounds)> {
    if !(profile.lambda_sc > 0.0) {
        return Err(Error::StrongConvexityRequired(profile.lambda_sc));
    }
    if profile.n_train == 0 {
        return Err(Error::EmptySample);
    }
    let rho_t = profile.rho[test_slot(profile, j)?];
    let denom = profile.lambda_sc * (profile.n_train as f64 + 1.0);
    let loo = per_point(profile, BoundKind::Loo, j, 2.0 * profile.gamma * (rho_t + profile.rho_bar()) / denom)?;
    let ro = per_point(profile, BoundKind::Ro, j, 4.0 * profile.gamma * rho_t / denom)?;
    Ok((loo, ro))
}

fn validate_sgd(epochs: usize, eta: f64) -> Result<()> {
    if epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidConfig(format!("learning rate must be positive, got {eta}")));
    }
    Ok(())
}

/// `tau_LOO = R eta gamma nu_i rho_test`, `tau_RO = 2 tau_LOO`; requires
/// `eta <= 2 / max phi` over the training points and the test point.
pub fn sgd_bounds_convex(
    profile: &LipschitzProfile,
    epochs: usize,
    eta: f64,
    j: usize,
) -> Result<(StabilityBounds, StabilityBounds)> {
    validate_sgd(epochs, eta)?;
    let k = test_slot(profile, j)?;
    let max_phi = profile.phi[..profile.n_train].iter().fold(profile.phi[k], |a, &b| a.max(b));
    check_learning_rate(eta, max_phi)?;
    let scale = epochs as f64 * eta * profile.gamma * profile.rho[k];
    Ok((per_point(profile, BoundKind::Loo, j, scale)?, per_point(profile, BoundKind::Ro, j, 2.0 * scale)?))
}

/// `R+ = sum_{r=1}^R kappa^r` with `kappa = prod_i (1 + eta phi_i)`.
pub fn nonconvex_epoch_factor(phi: &[f64], epochs: usize, eta: f64) -> Result<f64> {
    let log_kappa: f64 = phi.iter().map(|p| (eta * p).ln_1p()).sum();
    if log_kappa == 0.0 {
        return Ok(epochs as f64);
    }
    let r = epochs as f64;
    if r * log_kappa + r.ln() > f64::MAX.ln() {
        return Err(Error::BoundOverflow(format!("R+ = sum of kappa^r with log kappa = {log_kappa:.3e}, R = {epochs}")));
    }
    let total: f64 = (1..=epochs).map(|k| (k as f64 * log_kappa).exp()).sum();
    if !total.is_finite() {
        return Err(Error::BoundOverflow("R+ is not finite".into()));
    }
    Ok(total)
}

/// Convex form with `R` replaced by `R+`.
pub fn sgd_bounds_nonconvex(
    profile: &LipschitzProfile,
    epochs: usize,
    eta: f64,
    j: usize,
) -> Result<(StabilityBounds, StabilityBounds)> {
    validate_sgd(epochs, eta)?;
    let k = test_slot(profile, j)?;
    let r_plus = nonconvex_epoch_factor(&profile.phi[..profile.n_train], epochs, eta)?;
    let scale = r_plus * eta * profile.gamma * profile.rho[k];
    Ok((per_point(profile, BoundKind::Loo, j, scale)?, per_point(profile, BoundKind::Ro, j, 2.0 * scale)?))
}

/// `R eta gamma ||x_i|| ||x_test||` from raw features, flagged heuristic.
pub fn sgd_bounds_approx_nn(
    features: &DMatrix<f64>,
    test_feature: &[f64],
    epochs: usize,
    eta: f64,
    gamma: f64,
    j: usize,
) -> (StabilityBounds, StabilityBounds) {
    let test_norm = test_feature.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = epochs as f64 * eta * gamma * test_norm;
    let norms = row_norms(features);
    let make = |kind, s: f64| StabilityBounds {
        heuristic: true,
        ..StabilityBounds::new(kind, norms.iter().map(|v| s * v).collect(), s * test_norm, j)
    };
    (make(BoundKind::Loo, scale), make(BoundKind::Ro, 2.0 * scale))
}

/// Probability `p = 1 - (1 - 1/n)^m` that a point lands in a bag of size `m`.
pub fn bag_inclusion_probability(n: usize, m_bag: usize) -> f64 {
    -(m_bag as f64 * (-1.0 / n as f64).ln_1p()).exp_m1()
}

fn bagging_p_term(n: usize, m_bag: usize) -> Result<f64> {
    if n <= 1 {
        return Err(Error::DegenerateBagging(n));
    }
    if m_bag == 0 {
        return Err(Error::InvalidConfig("bag size must be at least 1".into()));
    }
    let p = bag_inclusion_probability(n, m_bag);
    if p >= 1.0 {
        return Err(Error::DegenerateBagging(n));
    }
    Ok(0.5 * (p / (1.0 - p)).sqrt())
}

fn validate_width(gamma: f64, w: f64) -> Result<()> {
    if !(w >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("gamma and w must be non-negative, got {gamma}, {w}")));
    }
    Ok(())
}

/// `(gamma w / 2) sqrt(p / (1 - p))`, the same for every training point.
pub fn bagging_bound_derandomized(gamma: f64, w: f64, n: usize, m_bag: usize) -> Result<f64> {
    validate_width(gamma, w)?;
    Ok(gamma * w * bagging_p_term(n, m_bag)?)
}

/// `gamma w (sqrt(p / (1 - p)) / 2 + sqrt(2 log(4 / delta) / B))`, valid with
/// probability at least `1 - delta` over the bags.
pub fn bagging_bound_probabilistic(gamma: f64, w: f64, n: usize, m_bag: usize, bags: usize, delta: f64) -> Result<f64> {
    validate_width(gamma, w)?;
    if bags == 0 {
        return Err(Error::InvalidConfig("bags must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mc = (2.0 / bags as f64 * (4.0 / delta).ln()).sqrt();
    Ok(gamma * w * (bagging_p_term(n, m_bag)? + mc))
}

/// Supplies per-test-point stability bounds for a trainer.
pub trait StabilityProvider: Send + Sync {
    fn name(&self) -> &str;

    /// LOO bounds for each row of `test_x`, for a score with Lipschitz constant `gamma`.
    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>>;

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>>;
}

fn split_pairs(pairs: Vec<(StabilityBounds, StabilityBounds)>, kind: BoundKind) -> Vec<StabilityBounds> {
    pairs.into_iter().map(|(l, r)| if kind == BoundKind::Loo { l } else { r }).collect()
}

fn each_test<F>(profile: &LipschitzProfile, kind: BoundKind, f: F) -> Result<Vec<StabilityBounds>>
where
    F: Fn(&LipschitzProfile, usize) -> Result<(StabilityBounds, StabilityBounds)>,
{
    let pairs = (0..profile.n_test()).map(|j| f(profile, j)).collect::<Result<Vec<_>>>()?;
    Ok(split_pairs(pairs, kind))
}

/// All bounds zero: exact for trainers whose fit ignores the data.
pub struct ZeroStability;

impl StabilityProvider for ZeroStability {
    fn name(&self) -> &str {
        "zero"
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, _gamma: f64) -> Result<Vec<StabilityBounds>> {
        Ok((0..test_x.nrows()).map(|j| StabilityBounds::zero(BoundKind::Loo, train.n(), j)).collect())
    }

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, _gamma: f64) -> Result<Vec<StabilityBounds>> {
        Ok((0..test_x.nrows()).map(|j| StabilityBounds::zero(BoundKind::Ro, train.n(), j)).collect())
    }
}

/// Linear Huber RLM with penalty `omega ||theta||^2`.
pub struct RlmStability {
    pub epsilon: f64,
    pub omega_weight: f64,
}

impl RlmStability {
    fn bounds(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64, kind: BoundKind) -> Result<Vec<StabilityBounds>> {
        let profile = lipschitz_profile_linear_huber(&train.x, test_x, self.epsilon, self.omega_weight)?.with_gamma(gamma);
        each_test(&profile, kind, rlm_bounds)
    }
}

impl StabilityProvider for RlmStability {
    fn name(&self) -> &str {
        "rlm"
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Loo)
    }

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Ro)
    }
}

/// Kernel Huber RLM with penalty `omega theta^T K theta`.
pub struct KernelRlmStability {
    pub map: KernelMap,
    pub epsilon: f64,
    pub omega_weight: f64,
}

impl KernelRlmStability {
    fn bounds(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64, kind: BoundKind) -> Result<Vec<StabilityBounds>> {
        let profile =
            lipschitz_profile_kernel_huber(&self.map, &train.x, test_x, self.epsilon, self.omega_weight)?.with_gamma(gamma);
        each_test(&profile, kind, rlm_bounds)
    }
}

impl StabilityProvider for KernelRlmStability {
    fn name(&self) -> &str {
        "kernel-rlm"
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Loo)
    }

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Ro)
    }
}

/// Convex Huber SGD on raw features or on kernel rows when `map` is set.
pub struct SgdStability {
    pub epsilon: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub map: Option<KernelMap>,
}

impl SgdStability {
    fn bounds(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64, kind: BoundKind) -> Result<Vec<StabilityBounds>> {
        let (f, t) = match &self.map {
            Some(map) => (map.transform(&train.x)?, map.transform(test_x)?),
            None => (train.x.clone(), test_x.clone()),
        };
        // omega is irrelevant for SGD bounds
        let profile = lipschitz_profile_linear_huber(&f, &t, self.epsilon, 1.0)?.with_gamma(gamma);
        each_test(&profile, kind, |p, j| sgd_bounds_convex(p, self.epochs, self.learning_rate, j))
    }
}

impl StabilityProvider for SgdStability {
    fn name(&self) -> &str {
        if self.map.is_some() {
            "kernel-sgd"
        } else {
            "sgd"
        }
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Loo)
    }

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Ro)
    }
}

/// Approximate bounds for SGD-trained networks from raw feature norms.
pub struct ApproxNnStability {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl ApproxNnStability {
    fn bounds(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64, kind: BoundKind) -> Result<Vec<StabilityBounds>> {
        if test_x.ncols() != train.d() && test_x.nrows() > 0 {
            return Err(Error::DimensionMismatch { expected: train.d(), got: test_x.ncols() });
        }
        let rows = test_x.transpose();
        let pairs = rows
            .column_iter()
            .enumerate()
            .map(|(j, t)| sgd_bounds_approx_nn(&train.x, t.as_slice(), self.epochs, self.learning_rate, gamma, j))
            .collect();
        Ok(split_pairs(pairs, kind))
    }
}

impl StabilityProvider for ApproxNnStability {
    fn name(&self) -> &str {
        "mlp"
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Loo)
    }

    fn ro(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        self.bounds(train, test_x, gamma, BoundKind::Ro)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaggingBound {
    Derandomized,
    Probabilistic { bags: usize, delta: f64 },
}

/// Bagging LOO bound with `w` the response range of the training data.
/// Replace-one bounds are not available.
pub struct BaggingStability {
    pub bound: BaggingBound,
    pub bag_size: Option<usize>,
}

impl BaggingStability {
    pub fn tau(&self, gamma: f64, w: f64, n: usize) -> Result<f64> {
        let m = self.bag_size.unwrap_or(n);
        match self.bound {
            BaggingBound::Derandomized => bagging_bound_derandomized(gamma, w, n, m),
            BaggingBound::Probabilistic { bags, delta } => bagging_bound_probabilistic(gamma, w, n, m, bags, delta),
        }
    }
}

impl StabilityProvider for BaggingStability {
    fn name(&self) -> &str {
        "bagging"
    }

    fn loo(&self, train: &Dataset, test_x: &DMatrix<f64>, gamma: f64) -> Result<Vec<StabilityBounds>> {
        let y = train.responses()?;
        let w = y.max() - y.min();
        let tau = self.tau(gamma, w, train.n())?;
        Ok((0..test_x.nrows()).map(|j| StabilityBounds::new(BoundKind::Loo, vec![tau; train.n()], tau, j)).collect())
    }

    fn ro(&self, _train: &Dataset, _test_x: &DMatrix<f64>, _gamma: f64) -> Result<Vec<StabilityBounds>> {
        Err(Error::Unsupported("replace-one stability bound for bagging".into()))
    }
}
