//! Empirical and worst-case evaluators: accuracy, equal-opportunity
//! unfairness, its margin-padded and hinge surrogates under a norm ball of
//! feature perturbations, and CVaR. These closed forms are the reference
//! oracles the optimization layer is validated against.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupIndex, group_index};
use crate::error::{Error, Result};

/// Linear classifier x ↦ sign(wᵀx + b) with ties classified as +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Self { w, b }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.w.len(), "dimension mismatch");
        self.w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + self.b
    }
}

/// Norm used on the feature space; perturbation budgets are measured in it
/// and slopes are penalized in its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    /// Dual norm of `w`: L1↔Linf, L2 is self-dual.
    pub fn dual_norm(self, w: &[f64]) -> f64 {
        match self {
            NormKind::L1 => w.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            NormKind::L2 => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::Linf => w.iter().map(|v| v.abs()).sum(),
        }
    }
}

pub fn predict(h: &Hyperplane, x: &[f64]) -> Result<i8> {
    if x.len() != h.w.len() {
        return Err(Error::DimensionMismatch { expected: h.w.len(), got: x.len() });
    }
    Ok(if h.score(x) >= 0.0 { 1 } else { -1 })
}

/// Fraction of samples strictly on the correct side; boundary points count
/// as misclassified regardless of label.
pub fn accuracy(h: &Hyperplane, data: &Dataset) -> f64 {
    let correct = (0..data.n())
        .filter(|&i| data.label(i) as f64 * h.score(data.row(i)) > 0.0)
        .count();
    correct as f64 / data.n() as f64
}

fn tpr(h: &Hyperplane, data: &Dataset, idx: &[usize]) -> f64 {
    let hits = idx.iter().filter(|&&i| h.score(data.row(i)) >= 0.0).count();
    hits as f64 / idx.len() as f64
}

/// Equal-opportunity unfairness: |TPR(a=1) − TPR(a=0)|.
pub fn eo_unfairness(h: &Hyperplane, data: &Dataset) -> Result<f64> {
    let gi = group_index(data);
    gi.require_positive_groups()?;
    Ok((tpr(h, data, gi.indices(1, 1)) - tpr(h, data, gi.indices(0, 1))).abs())
}

/// Worst-case ε-padded misclassification rate over feature perturbations of
/// radius ρ: (1/N)·Σᵢ 1{−ŷᵢ(wᵀx̂ᵢ+b) + ρ‖w‖_* > −ε}.
pub fn worst_case_misclass(
    h: &Hyperplane,
    data: &Dataset,
    rho: f64,
    eps: f64,
    norm: NormKind,
) -> f64 {
    assert!(rho >= 0.0 && eps > 0.0, "requires rho >= 0 and eps > 0");
    let pad = rho * norm.dual_norm(&h.w);
    let bad = (0..data.n())
        .filter(|&i| -(data.label(i) as f64) * h.score(data.row(i)) + pad > -eps)
        .count();
    bad as f64 / data.n() as f64
}

fn eps_unfair_pair(
    h: &Hyperplane,
    data: &Dataset,
    gi: &GroupIndex,
    pad: f64,
    eps: f64,
    a: u8,
    a_other: u8,
) -> f64 {
    let up = gi.indices(a, 1);
    let down = gi.indices(a_other, 1);
    let up_frac = up
        .iter()
        .filter(|&&i| h.score(data.row(i)) + pad > -eps)
        .count() as f64
        / up.len() as f64;
    let down_frac = down
        .iter()
        .filter(|&&i| -h.score(data.row(i)) + pad > 0.0)
        .count() as f64
        / down.len() as f64;
    up_frac + down_frac - 1.0
}

/// Worst-case ε-unfairness over the radius-ρ ball: the larger of the two
/// ordered group gaps, each evaluated with adversarially shifted scores.
pub fn worst_case_eps_unfairness(
    h: &Hyperplane,
    data: &Dataset,
    rho: f64,
    eps: f64,
    norm: NormKind,
) -> Result<f64> {
    assert!(rho >= 0.0 && eps > 0.0, "requires rho >= 0 and eps > 0");
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let pad = rho * norm.dual_norm(&h.w);
    let g01 = eps_unfair_pair(h, data, &gi, pad, eps, 0, 1);
    let g10 = eps_unfair_pair(h, data, &gi, pad, eps, 1, 0);
    Ok(g01.max(g10))
}

/// Worst-case hinge unfairness over the radius-ρ ball; always ≥ 1.
pub fn hinge_unfairness(h: &Hyperplane, data: &Dataset, rho: f64, norm: NormKind) -> Result<f64> {
    assert!(rho >= 0.0, "requires rho >= 0");
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let pad = rho * norm.dual_norm(&h.w);
    let pair = |a: u8, a_other: u8| -> f64 {
        let up = gi.indices(a, 1);
        let down = gi.indices(a_other, 1);
        let s_up: f64 = up
            .iter()
            .map(|&i| (1.0 + h.score(data.row(i)) + pad).max(0.0))
            .sum::<f64>()
            / up.len() as f64;
        let s_down: f64 = down
            .iter()
            .map(|&i| (1.0 - h.score(data.row(i)) + pad).max(0.0))
            .sum::<f64>()
            / down.len() as f64;
        s_up + s_down - 1.0
    };
    Ok(pair(0, 1).max(pair(1, 0)))
}

/// Worst-case average hinge loss over the radius-ρ ball:
/// (1/N)·Σᵢ max{0, 1 − ŷᵢ(wᵀx̂ᵢ+b) + ρ‖w‖_*}.
pub fn worst_case_hinge_loss(h: &Hyperplane, data: &Dataset, rho: f64, norm: NormKind) -> f64 {
    assert!(rho >= 0.0, "requires rho >= 0");
    let pad = rho * norm.dual_norm(&h.w);
    (0..data.n())
        .map(|i| (1.0 - data.label(i) as f64 * h.score(data.row(i)) + pad).max(0.0))
        .sum::<f64>()
        / data.n() as f64
}

/// Empirical conditional value-at-risk at level t: the mean of the worst
/// t-fraction of losses, with fractional sample weight on the boundary.
pub fn cvar(losses: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::LevelOutOfRange(t));
    }
    if losses.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite losses"));
    let m = t * losses.len() as f64;
    let whole = m.floor() as usize;
    let frac = m - whole as f64;
    let mut total: f64 = sorted[..whole].iter().sum();
    if frac > 0.0 && whole < sorted.len() {
        total += frac * sorted[whole];
    }
    Ok(total / m)
}
