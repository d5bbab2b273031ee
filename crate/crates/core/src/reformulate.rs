//! Program builders: each classifier variant is translated into the conic
//! program whose optimum equals the corresponding worst-case training
//! problem exactly. The continuous hinge variants are LPs/SOCPs; the
//! margin-indicator variants use big-M rows over binary variables.

use serde::{Deserialize, Serialize};

use crate::data::{group_index, Dataset, GroupIndex, CELLS};
use crate::error::{Error, Result};
use crate::metrics::NormKind;
use crate::model::{big_m, BoxBounds, ConicProgram, LinExpr, Sense};

/// Which training problem to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Margin-indicator objective with per-pair indicator fairness caps,
    /// feature perturbations only (mixed binary).
    EpsDrfc,
    /// Hinge objective with hinge fairness caps, feature perturbations only
    /// (continuous).
    Hdrfc,
    /// Hinge variant under the general ground metric with a flip budget.
    HdrfcGeneral,
    /// Margin-indicator variant under the general ground metric.
    EpsDrfcGeneral,
    /// Margin-indicator variant with chi-square marginal ambiguity and
    /// per-cell radii (mixed binary SOCP).
    GeneralizedEpsDrfc,
    /// Plain average hinge loss, no robustness, no fairness cap.
    Svm,
    /// CVaR view of the chance constraint; trains the same hyperplane as
    /// `Svm` (the two problems are exactly equivalent), and pairs with the
    /// level bisection in the solve layer.
    CvarApprox,
}

fn default_eps() -> f64 {
    1e-2
}

fn default_norm() -> NormKind {
    NormKind::Linf
}

fn default_w_max() -> f64 {
    100.0
}

fn default_b_max() -> f64 {
    100.0
}

/// Full configuration of a training run. Serialized as flat TOML; unknown
/// keys are rejected. Only the fields a variant uses may be set: optional
/// fields left as `None` are "unset".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Margin used by the indicator variants (strictly positive).
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Unfairness cap of the indicator variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Unfairness cap of the hinge variants (at least 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Perturbation radius.
    #[serde(default)]
    pub rho: f64,
    /// Per-cell radii, ordered as [(a=0,y=-1), (0,+1), (1,-1), (1,+1)].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_ay: Option<[f64; 4]>,
    /// Chi-square marginal radius (generalized variant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p: Option<f64>,
    /// Cost of perturbing the sensitive attribute; `inf` means never.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_a: Option<f64>,
    /// Cost of perturbing the label; `inf` means never.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_y: Option<f64>,
    /// Flip budget: maximum fraction of mass allowed to change cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
    /// Classifier box, required to give the big-M rows a finite valid value.
    #[serde(default = "default_w_max")]
    pub w_max: f64,
    /// See `w_max`.
    #[serde(default = "default_b_max")]
    pub b_max: f64,
    /// Compatibility switch: write the objective big-M rows with right-hand
    /// side `M t - 1` instead of `M t - eps`.
    #[serde(default)]
    pub obj_rhs_one: bool,
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            eps: default_eps(),
            eta: None,
            zeta: None,
            rho: 0.0,
            rho_ay: None,
            delta_p: None,
            kappa_a: None,
            kappa_y: None,
            gamma: None,
            norm: default_norm(),
            w_max: default_w_max(),
            b_max: default_b_max(),
            obj_rhs_one: false,
        }
    }

    pub fn bounds(&self) -> BoxBounds {
        BoxBounds { w_max: self.w_max, b_max: self.b_max }
    }

    /// Checks field presence and ranges against the variant's contract.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadSpec(msg));
        if self.eps <= 0.0 {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.rho < 0.0 {
            return bad(format!("rho must be nonnegative, got {}", self.rho));
        }
        self.bounds().validate()?;

        let needs_eta = matches!(
            self.variant,
            Variant::EpsDrfc | Variant::EpsDrfcGeneral | Variant::GeneralizedEpsDrfc
        );
        let needs_zeta = matches!(self.variant, Variant::Hdrfc | Variant::HdrfcGeneral);
        let needs_gamma_kappa =
            matches!(self.variant, Variant::HdrfcGeneral | Variant::EpsDrfcGeneral);
        let needs_chi2 = self.variant == Variant::GeneralizedEpsDrfc;

        match (needs_eta, self.eta) {
            (true, None) => return bad(format!("{:?} requires eta", self.variant)),
            (false, Some(_)) => return bad(format!("{:?} does not take eta", self.variant)),
            (true, Some(eta)) if eta < 0.0 => {
                return Err(Error::InfeasibleSpec(format!("eta must be nonnegative, got {eta}")))
            }
            _ => {}
        }
        match (needs_zeta, self.zeta) {
            (true, None) => return bad(format!("{:?} requires zeta", self.variant)),
            (false, Some(_)) => return bad(format!("{:?} does not take zeta", self.variant)),
            (true, Some(zeta)) if zeta < 1.0 => {
                return Err(Error::InfeasibleSpec(format!(
                    "zeta must be at least 1 (the hinge unfairness lower bound), got {zeta}"
                )))
            }
            _ => {}
        }
        match (needs_gamma_kappa, self.gamma) {
            (true, None) => return bad(format!("{:?} requires gamma", self.variant)),
            (false, Some(_)) => return bad(format!("{:?} does not take gamma", self.variant)),
            (true, Some(g)) if !(0.0..=1.0).contains(&g) => {
                return Err(Error::GammaOutOfRange(g))
            }
            _ => {}
        }
        for (name, value) in [("kappa_a", self.kappa_a), ("kappa_y", self.kappa_y)] {
            match (needs_gamma_kappa, value) {
                (true, None) => return bad(format!("{:?} requires {name}", self.variant)),
                (false, Some(_)) => {
                    return bad(format!("{:?} does not take {name}", self.variant))
                }
                (true, Some(k)) if k < 0.0 => {
                    return bad(format!("{name} must be nonnegative, got {k}"))
                }
                _ => {}
            }
        }
        match (needs_chi2, self.delta_p) {
            (true, None) => return bad(format!("{:?} requires delta_p", self.variant)),
            (false, Some(_)) => return bad(format!("{:?} does not take delta_p", self.variant)),
            (true, Some(d)) if d < 0.0 => {
                return bad(format!("delta_p must be nonnegative, got {d}"))
            }
            _ => {}
        }
        match (needs_chi2, self.rho_ay) {
            (true, None) => return bad(format!("{:?} requires rho_ay", self.variant)),
            (false, Some(_)) => return bad(format!("{:?} does not take rho_ay", self.variant)),
            (true, Some(r)) if r.iter().any(|&v| v < 0.0) => {
                return bad(format!("rho_ay entries must be nonnegative, got {r:?}"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Builds the program for any variant.
pub fn build(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    spec.validate()?;
    match spec.variant {
        Variant::Svm | Variant::CvarApprox => build_svm(data),
        Variant::Hdrfc => build_hdrfc(data, spec),
        Variant::EpsDrfc => build_eps_drfc(data, spec),
        Variant::HdrfcGeneral => build_hdrfc_general(data, spec),
        Variant::EpsDrfcGeneral => build_eps_drfc_general(data, spec),
        Variant::GeneralizedEpsDrfc => build_generalized_eps_drfc(data, spec),
    }
}

struct Skeleton {
    p: ConicProgram,
    w: Vec<usize>,
    b: usize,
    s_w: usize,
}

/// Declares (w, b), the dual-norm epigraph variable s_w with constraints
/// forcing s_w >= ||w||_*, and the metadata every classifier program shares.
fn skeleton(data: &Dataset, norm: NormKind, boxed: Option<BoxBounds>, variant: &str) -> Skeleton {
    let mut p = ConicProgram::new();
    let d = data.dim();
    let (wlb, wub, blb, bub) = match boxed {
        Some(bx) => (-bx.w_max, bx.w_max, -bx.b_max, bx.b_max),
        None => (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY),
    };
    let w: Vec<usize> = (0..d).map(|j| p.add_var(format!("w_{j}"), wlb, wub)).collect();
    let b = p.add_var("b", blb, bub);
    let s_w = p.add_nonneg("s_w");
    match norm {
        // Perturbations measured in the L-inf norm pair with the L1 dual:
        // s_w >= sum_j |w_j| via split variables.
        NormKind::Linf => {
            let u: Vec<usize> = (0..d).map(|j| p.add_nonneg(format!("absw_{j}"))).collect();
            for j in 0..d {
                p.add_constraint(format!("absp_{j}"), vec![(w[j], 1.0), (u[j], -1.0)], Sense::Le, 0.0);
                p.add_constraint(format!("absn_{j}"), vec![(w[j], -1.0), (u[j], -1.0)], Sense::Le, 0.0);
            }
            let mut terms: Vec<(usize, f64)> = u.iter().map(|&v| (v, 1.0)).collect();
            terms.push((s_w, -1.0));
            p.add_constraint("dualnorm", terms, Sense::Le, 0.0);
        }
        // L1 perturbations pair with the L-inf dual: s_w >= |w_j| for all j.
        NormKind::L1 => {
            for j in 0..d {
                p.add_constraint(format!("dnp_{j}"), vec![(w[j], 1.0), (s_w, -1.0)], Sense::Le, 0.0);
                p.add_constraint(format!("dnn_{j}"), vec![(w[j], -1.0), (s_w, -1.0)], Sense::Le, 0.0);
            }
        }
        // Euclidean is self-dual: one cone ||w||_2 <= s_w.
        NormKind::L2 => {
            p.add_soc("dualnorm", LinExpr::var(s_w), w.iter().map(|&v| LinExpr::var(v)).collect());
        }
    }
    p.tag("w", w.clone());
    p.tag("b", vec![b]);
    p.tag("s_w", vec![s_w]);
    p.info.insert("d".into(), d.to_string());
    p.info.insert("n".into(), data.n().to_string());
    p.info.insert("variant".into(), variant.to_string());
    if let Some(bx) = boxed {
        p.info.insert("w_max".into(), bx.w_max.to_string());
        p.info.insert("b_max".into(), bx.b_max.to_string());
    }
    Skeleton { p, w, b, s_w }
}

/// Terms for sign * (w . x_i + b).
fn score_terms(w: &[usize], b: usize, x: &[f64], sign: f64) -> Vec<(usize, f64)> {
    let mut terms: Vec<(usize, f64)> =
        w.iter().zip(x).map(|(&wj, &xj)| (wj, sign * xj)).collect();
    terms.push((b, sign));
    terms
}

/// Plain SVM: minimize the average hinge loss over (w, b).
pub fn build_svm(data: &Dataset) -> Result<ConicProgram> {
    let Skeleton { mut p, w, b, s_w: _ } = skeleton(data, NormKind::L2, None, "svm");
    let n = data.n();
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let ti = p.add_nonneg(format!("t_{i}"));
        p.set_objective(ti, 1.0 / n as f64);
        let y = data.label(i) as f64;
        // 1 - y(w.x + b) <= t_i
        let mut terms = score_terms(&w, b, data.row(i), -y);
        terms.push((ti, -1.0));
        p.add_constraint(format!("hinge_{i}"), terms, Sense::Le, -1.0);
        t.push(ti);
    }
    p.tag("t", t);
    Ok(p)
}

/// Hinge objective + hinge fairness caps under feature perturbations of
/// radius rho (continuous program).
pub fn build_hdrfc(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let zeta = spec.zeta.expect("validated");
    let rho = spec.rho;
    let Skeleton { mut p, w, b, s_w } = skeleton(data, spec.norm, None, "hdrfc");
    p.info.insert("rho".into(), rho.to_string());
    let n = data.n();

    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let ti = p.add_nonneg(format!("t_{i}"));
        p.set_objective(ti, 1.0 / n as f64);
        let y = data.label(i) as f64;
        // -y(w.x + b) + rho s_w <= t_i - 1
        let mut terms = score_terms(&w, b, data.row(i), -y);
        terms.push((s_w, rho));
        terms.push((ti, -1.0));
        p.add_constraint(format!("obj_{i}"), terms, Sense::Le, -1.0);
        t.push(ti);
    }
    p.tag("t", t);

    if zeta.is_finite() {
        add_hinge_fairness(&mut p, data, &gi, &w, b, s_w, rho, zeta);
    }
    Ok(p)
}

/// The two hinge fairness blocks of the absolute-trust model, capped at zeta.
fn add_hinge_fairness(
    p: &mut ConicProgram,
    data: &Dataset,
    gi: &GroupIndex,
    w: &[usize],
    b: usize,
    s_w: usize,
    rho: f64,
    zeta: f64,
) {
    let positives = gi.positives();
    for a in [0u8, 1u8] {
        let a2 = 1 - a;
        let mut lam = std::collections::BTreeMap::new();
        for &i in &positives {
            lam.insert(i, p.add_nonneg(format!("lam{a}_{i}")));
        }
        let up = gi.indices(a, 1);
        let down = gi.indices(a2, 1);
        for &i in up {
            // 1 + w.x_i + rho s_w + b <= lam_i
            let mut terms = score_terms(w, b, data.row(i), 1.0);
            terms.push((s_w, rho));
            terms.push((lam[&i], -1.0));
            p.add_constraint(format!("fup{a}_{i}"), terms, Sense::Le, -1.0);
        }
        for &i in down {
            let mut terms = score_terms(w, b, data.row(i), -1.0);
            terms.push((s_w, rho));
            terms.push((lam[&i], -1.0));
            p.add_constraint(format!("fdn{a}_{i}"), terms, Sense::Le, -1.0);
        }
        let mut cap: Vec<(usize, f64)> =
            up.iter().map(|i| (lam[i], 1.0 / up.len() as f64)).collect();
        cap.extend(down.iter().map(|i| (lam[i], 1.0 / down.len() as f64)));
        p.add_constraint(format!("fcap{a}"), cap, Sense::Le, zeta + 1.0);
        p.tag(format!("lam{a}"), lam.into_values().collect());
    }
}

/// Margin-indicator objective + indicator fairness caps under feature
/// perturbations (mixed binary, big-M).
pub fn build_eps_drfc(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let eta = spec.eta.expect("validated");
    let (rho, eps) = (spec.rho, spec.eps);
    let bounds = spec.bounds();
    let Skeleton { mut p, w, b, s_w } = skeleton(data, spec.norm, Some(bounds), "eps-drfc");
    p.info.insert("rho".into(), rho.to_string());
    p.info.insert("eps".into(), eps.to_string());
    let n = data.n();
    let m = big_m(data, bounds, rho, spec.norm, eps);
    let obj_rhs = if spec.obj_rhs_one { 1.0 } else { eps };

    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        let ti = p.add_binary(format!("t_{i}"));
        p.set_objective(ti, 1.0 / n as f64);
        let y = data.label(i) as f64;
        // -y(w.x + b) + rho s_w <= M t_i - eps
        let mut terms = score_terms(&w, b, data.row(i), -y);
        terms.push((s_w, rho));
        terms.push((ti, -m[i]));
        p.add_constraint(format!("obj_{i}"), terms, Sense::Le, -obj_rhs);
        t.push(ti);
    }
    p.tag("t", t);

    // The cap's left side never exceeds 1, so a cap of 1 or more cannot
    // bind; skip the block (and its binaries) in that case.
    if eta < 1.0 {
        add_indicator_fairness(&mut p, data, &gi, &w, b, s_w, rho, rho, eps, eta, &m);
    }
    Ok(p)
}

/// The two indicator fairness blocks shared by the absolute-trust and
/// generalized variants, with per-side radii.
#[allow(clippy::too_many_arguments)]
fn add_indicator_fairness(
    p: &mut ConicProgram,
    data: &Dataset,
    gi: &GroupIndex,
    w: &[usize],
    b: usize,
    s_w: usize,
    rho_up_of: f64,
    rho_dn_of: f64,
    eps: f64,
    eta: f64,
    m: &[f64],
) {
    let positives = gi.positives();
    for a in [0u8, 1u8] {
        let a2 = 1 - a;
        let mut lam = std::collections::BTreeMap::new();
        for &i in &positives {
            lam.insert(i, p.add_binary(format!("lam{a}_{i}")));
        }
        // With per-cell radii the "up" group is I_{a,1} and the "down"
        // group I_{a2,1}; each uses its own radius.
        let (rho_up, rho_dn) = if a == 0 { (rho_up_of, rho_dn_of) } else { (rho_dn_of, rho_up_of) };
        let up = gi.indices(a, 1);
        let down = gi.indices(a2, 1);
        for &i in up {
            // w.x_i + rho s_w + b + eps <= M lam_i
            let mut terms = score_terms(w, b, data.row(i), 1.0);
            if rho_up != 0.0 {
                terms.push((s_w, rho_up));
            }
            terms.push((lam[&i], -m[i]));
            p.add_constraint(format!("fup{a}_{i}"), terms, Sense::Le, -eps);
        }
        for &i in down {
            let mut terms = score_terms(w, b, data.row(i), -1.0);
            if rho_dn != 0.0 {
                terms.push((s_w, rho_dn));
            }
            terms.push((lam[&i], -m[i]));
            p.add_constraint(format!("fdn{a}_{i}"), terms, Sense::Le, 0.0);
        }
        let mut cap: Vec<(usize, f64)> =
            up.iter().map(|i| (lam[i], 1.0 / up.len() as f64)).collect();
        cap.extend(down.iter().map(|i| (lam[i], 1.0 / down.len() as f64)));
        p.add_constraint(format!("fcap{a}"), cap, Sense::Le, eta + 1.0);
        p.tag(format!("lam{a}"), lam.into_values().collect());
    }
}

/// Ground-metric cost of relabeling sample i into cell (a, y):
/// kappa_a |a - a_i| + kappa_y |y - y_i| (labels differ by 2).
fn cell_cost(kappa_a: f64, kappa_y: f64, a: u8, y: i8, a_hat: u8, y_hat: i8) -> f64 {
    let mut c = 0.0;
    if a != a_hat {
        c += kappa_a;
    }
    if y != y_hat {
        c += 2.0 * kappa_y;
    }
    c
}

/// The dual blocks of the general-metric variants are invariant under
/// shifting all mu up and all nu down by the same constant within each
/// connected component of the sample/cell reachability graph, so the
/// optimal face is unbounded and the interior-point iterates can diverge.
/// Pinning one nu per component removes the redundancy without changing
/// the optimal value. Returns one sample index per component.
fn component_pins(data: &Dataset, gi: &GroupIndex, kappa_a: f64, kappa_y: f64, rho: f64) -> Vec<usize> {
    let cell_idx = |c: (u8, i8)| CELLS.iter().position(|&x| x == c).expect("cell");
    let mut parent: Vec<usize> = (0..CELLS.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..data.n() {
        let own = (data.sensitive(i), data.label(i));
        for (a, y) in CELLS {
            if gi.marginal(a, y) == 0.0 {
                continue;
            }
            if cell_cost(kappa_a, kappa_y, a, y, own.0, own.1) > rho {
                continue;
            }
            let (ra, rb) = (find(&mut parent, cell_idx(own)), find(&mut parent, cell_idx((a, y))));
            parent[ra] = rb;
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut pins = Vec::new();
    for i in 0..data.n() {
        let own = cell_idx((data.sensitive(i), data.label(i)));
        if seen.insert(find(&mut parent, own)) {
            pins.push(i);
        }
    }
    pins
}

/// Hinge variant under the general ground metric with flip budget gamma.
/// The adversary may reassign up to a gamma fraction of the mass to other
/// (group, label) cells within the cost radius, but the observed cell
/// marginals are preserved. Continuous program; constraints are generated
/// only for reachable, occupied cells.
pub fn build_hdrfc_general(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let gamma = spec.gamma.expect("validated");
    if gamma == 0.0 {
        // No mass may leave its cell: exactly the absolute-trust model.
        let mut inner = spec.clone();
        inner.variant = Variant::Hdrfc;
        inner.gamma = None;
        inner.kappa_a = None;
        inner.kappa_y = None;
        return build_hdrfc(data, &inner);
    }
    let (kappa_a, kappa_y) = (spec.kappa_a.expect("validated"), spec.kappa_y.expect("validated"));
    let zeta = spec.zeta.expect("validated");
    let rho = spec.rho;
    let Skeleton { mut p, w, b, s_w } = skeleton(data, spec.norm, None, "hdrfc-general");
    p.info.insert("rho".into(), rho.to_string());
    let n = data.n();
    let nf = n as f64;
    // gamma = 1 removes the budget: theta's multiplier vanishes and its
    // constraint rows hold trivially at 0.
    let theta_ub = if gamma >= 1.0 { 0.0 } else { f64::INFINITY };
    let pins = component_pins(data, &gi, kappa_a, kappa_y, rho);

    // Objective dual block.
    let nu: Vec<usize> = (0..n).map(|i| p.add_free(format!("nu_{i}"))).collect();
    for &i in &pins {
        p.add_constraint(format!("pin_nu_{i}"), vec![(nu[i], 1.0)], Sense::Eq, 0.0);
    }
    let theta = p.add_var("theta", 0.0, theta_ub);
    let mut mu = std::collections::BTreeMap::new();
    for (a, y) in CELLS {
        // An empty cell has zero marginal mass, so no mass may occupy it;
        // its dual variable carries no rows and is pinned.
        let v = if gi.marginal(a, y) > 0.0 {
            p.add_free(format!("mu_{a}_{y}"))
        } else {
            p.add_var(format!("mu_{a}_{y}"), 0.0, 0.0)
        };
        mu.insert((a, y), v);
    }
    for &v in &nu {
        p.set_objective(v, 1.0 / nf);
    }
    p.set_objective(theta, -(1.0 - gamma));
    for (a, y) in CELLS {
        p.set_objective(mu[&(a, y)], gi.marginal(a, y));
    }
    for i in 0..n {
        let (ah, yh) = (data.sensitive(i), data.label(i));
        for (a, y) in CELLS {
            let cost = cell_cost(kappa_a, kappa_y, a, y, ah, yh);
            if cost > rho || gi.marginal(a, y) == 0.0 {
                continue;
            }
            let own = (a, y) == (ah, yh);
            // E = mu_ay - theta 1{own} + nu_i; rows: 0 <= E and
            // 1 - y(w.x + b) + (rho - cost) s_w <= E.
            let mut zero_terms = vec![(mu[&(a, y)], -1.0), (nu[i], -1.0)];
            if own {
                zero_terms.push((theta, 1.0));
            }
            p.add_constraint(format!("oz_{i}_{a}_{y}"), zero_terms.clone(), Sense::Le, 0.0);
            let mut terms = score_terms(&w, b, data.row(i), -(y as f64));
            if rho - cost != 0.0 {
                terms.push((s_w, rho - cost));
            }
            terms.extend(zero_terms);
            p.add_constraint(format!("oh_{i}_{a}_{y}"), terms, Sense::Le, -1.0);
        }
    }
    p.tag("nu", nu);
    p.tag("theta", vec![theta]);
    p.tag("mu", mu.values().copied().collect());

    // One dual block per ordered group pair, capped at zeta.
    if zeta.is_finite() {
        for pair_a in [0u8, 1u8] {
            let pair_b = 1 - pair_a;
            let nua: Vec<usize> = (0..n).map(|i| p.add_free(format!("nu{pair_a}_{i}"))).collect();
            for &i in &pins {
                p.add_constraint(format!("pin_nu{pair_a}_{i}"), vec![(nua[i], 1.0)], Sense::Eq, 0.0);
            }
            let theta_a = p.add_var(format!("theta{pair_a}"), 0.0, theta_ub);
            let mut mua = std::collections::BTreeMap::new();
            for (a, y) in CELLS {
                let v = if gi.marginal(a, y) > 0.0 {
                    p.add_free(format!("mu{pair_a}_{a}_{y}"))
                } else {
                    p.add_var(format!("mu{pair_a}_{a}_{y}"), 0.0, 0.0)
                };
                mua.insert((a, y), v);
            }
            let p_up = gi.marginal(pair_a, 1);
            let p_dn = gi.marginal(pair_b, 1);
            for i in 0..n {
                let (ah, yh) = (data.sensitive(i), data.label(i));
                for (a, y) in CELLS {
                    let cost = cell_cost(kappa_a, kappa_y, a, y, ah, yh);
                    if cost > rho || gi.marginal(a, y) == 0.0 {
                        continue;
                    }
                    let own = (a, y) == (ah, yh);
                    let mut e_terms = vec![(mua[&(a, y)], -1.0), (nua[i], -1.0)];
                    if own {
                        e_terms.push((theta_a, 1.0));
                    }
                    p.add_constraint(
                        format!("fz{pair_a}_{i}_{a}_{y}"),
                        e_terms.clone(),
                        Sense::Le,
                        0.0,
                    );
                    // Only the positive-label cells of the pair carry a
                    // hinge row; cells with y = -1 contribute nothing.
                    let (sign, weight) = if y == 1 && a == pair_a {
                        (1.0, p_up)
                    } else if y == 1 && a == pair_b {
                        (-1.0, p_dn)
                    } else {
                        continue;
                    };
                    // 1 + sign (w.x + b) + (rho-cost) s_w <= p_hat * E,
                    // where e_terms already carries -E.
                    let mut terms = score_terms(&w, b, data.row(i), sign);
                    if rho - cost != 0.0 {
                        terms.push((s_w, rho - cost));
                    }
                    for (v, c) in &e_terms {
                        terms.push((*v, c * weight));
                    }
                    p.add_constraint(format!("fh{pair_a}_{i}_{a}_{y}"), terms, Sense::Le, -1.0);
                }
            }
            // (1/N) sum nu^a + sum p_hat mu^a - theta^a (1 - gamma) - 1 <= zeta
            let mut cap: Vec<(usize, f64)> = nua.iter().map(|&v| (v, 1.0 / nf)).collect();
            for (a, y) in CELLS {
                cap.push((mua[&(a, y)], gi.marginal(a, y)));
            }
            cap.push((theta_a, -(1.0 - gamma)));
            p.add_constraint(format!("fcap{pair_a}"), cap, Sense::Le, zeta + 1.0);
            p.tag(format!("nu{pair_a}"), nua);
            p.tag(format!("theta{pair_a}"), vec![theta_a]);
            p.tag(format!("mu{pair_a}"), mua.values().copied().collect());
        }
    }
    Ok(p)
}

/// Margin-indicator variant under the general ground metric (mixed binary).
pub fn build_eps_drfc_general(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    let gi = group_index(data);
    gi.require_positive_groups()?;
    let gamma = spec.gamma.expect("validated");
    if gamma == 0.0 {
        let mut inner = spec.clone();
        inner.variant = Variant::EpsDrfc;
        inner.gamma = None;
        inner.kappa_a = None;
        inner.kappa_y = None;
        return build_eps_drfc(data, &inner);
    }
    let (kappa_a, kappa_y) = (spec.kappa_a.expect("validated"), spec.kappa_y.expect("validated"));
    let eta = spec.eta.expect("validated");
    let (rho, eps) = (spec.rho, spec.eps);
    let bounds = spec.bounds();
    let Skeleton { mut p, w, b, s_w } = skeleton(data, spec.norm, Some(bounds), "eps-drfc-general");
    p.info.insert("rho".into(), rho.to_string());
    p.info.insert("eps".into(), eps.to_string());
    let n = data.n();
    let nf = n as f64;
    let m = big_m(data, bounds, rho, spec.norm, eps);
    let theta_ub = if gamma >= 1.0 { 0.0 } else { f64::INFINITY };
    let pins = component_pins(data, &gi, kappa_a, kappa_y, rho);

    // Objective dual block with one binary per reachable (sample, cell).
    let nu: Vec<usize> = (0..n).map(|i| p.add_free(format!("nu_{i}"))).collect();
    for &i in &pins {
        p.add_constraint(format!("pin_nu_{i}"), vec![(nu[i], 1.0)], Sense::Eq, 0.0);
    }
    let theta = p.add_var("theta", 0.0, theta_ub);
    let mut mu = std::collections::BTreeMap::new();
    for (a, y) in CELLS {
        let v = if gi.marginal(a, y) > 0.0 {
            p.add_free(format!("mu_{a}_{y}"))
        } else {
            p.add_var(format!("mu_{a}_{y}"), 0.0, 0.0)
        };
        mu.insert((a, y), v);
    }
    for &v in &nu {
        p.set_objective(v, 1.0 / nf);
    }
    p.set_objective(theta, -(1.0 - gamma));
    for (a, y) in CELLS {
        p.set_objective(mu[&(a, y)], gi.marginal(a, y));
    }
    let mut taus = Vec::new();
    for i in 0..n {
        let (ah, yh) = (data.sensitive(i), data.label(i));
        for (a, y) in CELLS {
            let cost = cell_cost(kappa_a, kappa_y, a, y, ah, yh);
            if cost > rho || gi.marginal(a, y) == 0.0 {
                continue;
            }
            let own = (a, y) == (ah, yh);
            let tau = p.add_binary(format!("tau_{i}_{a}_{y}"));
            taus.push(tau);
            // tau <= mu_ay - theta 1{own} + nu_i
            let mut e_terms = vec![(tau, 1.0), (mu[&(a, y)], -1.0), (nu[i], -1.0)];
            if own {
                e_terms.push((theta, 1.0));
            }
            p.add_constraint(format!("oz_{i}_{a}_{y}"), e_terms, Sense::Le, 0.0);
            // -y(w.x + b) + (rho - cost) s_w <= M tau - eps, with the cell
            // label y deciding the margin side.
            let mut terms = score_terms(&w, b, data.row(i), -(y as f64));
            if rho - cost != 0.0 {
                terms.push((s_w, rho - cost));
            }
            terms.push((tau, -m[i]));
            p.add_constraint(format!("ob_{i}_{a}_{y}"), terms, Sense::Le, -eps);
        }
    }
    p.tag("nu", nu);
    p.tag("theta", vec![theta]);
    p.tag("mu", mu.values().copied().collect());
    p.tag("tau", taus);

    // Fairness dual blocks, one per ordered pair.
    for pair_a in [0u8, 1u8] {
        let pair_b = 1 - pair_a;
        let nua: Vec<usize> = (0..n).map(|i| p.add_free(format!("nu{pair_a}_{i}"))).collect();
        for &i in &pins {
            p.add_constraint(format!("pin_nu{pair_a}_{i}"), vec![(nua[i], 1.0)], Sense::Eq, 0.0);
        }
        let theta_a = p.add_var(format!("theta{pair_a}"), 0.0, theta_ub);
        let mut mua = std::collections::BTreeMap::new();
        for (a, y) in CELLS {
            let v = if gi.marginal(a, y) > 0.0 {
                p.add_free(format!("mu{pair_a}_{a}_{y}"))
            } else {
                p.add_var(format!("mu{pair_a}_{a}_{y}"), 0.0, 0.0)
            };
            mua.insert((a, y), v);
        }
        let p_up = gi.marginal(pair_a, 1);
        let p_dn = gi.marginal(pair_b, 1);
        let mut lams = Vec::new();
        for i in 0..n {
            let (ah, yh) = (data.sensitive(i), data.label(i));
            for (a, y) in CELLS {
                let cost = cell_cost(kappa_a, kappa_y, a, y, ah, yh);
                if cost > rho || gi.marginal(a, y) == 0.0 {
                    continue;
                }
                let own = (a, y) == (ah, yh);
                let mut e_terms = vec![(mua[&(a, y)], -1.0), (nua[i], -1.0)];
                if own {
                    e_terms.push((theta_a, 1.0));
                }
                if y == 1 && a == pair_a {
                    // p_up^{-1} lam <= E ; w.x + (rho-cost) s_w + b + eps <= M lam
                    let lam = p.add_binary(format!("lam{pair_a}_{a}_{i}"));
                    lams.push(lam);
                    let mut lhs = e_terms.clone();
                    lhs.push((lam, 1.0 / p_up));
                    p.add_constraint(format!("fz{pair_a}_{i}_{a}_{y}"), lhs, Sense::Le, 0.0);
                    let mut terms = score_terms(&w, b, data.row(i), 1.0);
                    if rho - cost != 0.0 {
                        terms.push((s_w, rho - cost));
                    }
                    terms.push((lam, -m[i]));
                    p.add_constraint(format!("fb{pair_a}_{i}_{a}_{y}"), terms, Sense::Le, -eps);
                } else if y == 1 && a == pair_b {
                    // p_dn^{-1} (lam - 1) <= E ; -w.x + (rho-cost) s_w - b <= M lam
                    let lam = p.add_binary(format!("lam{pair_a}_{a}_{i}"));
                    lams.push(lam);
                    let mut lhs = e_terms.clone();
                    lhs.push((lam, 1.0 / p_dn));
                    p.add_constraint(format!("fz{pair_a}_{i}_{a}_{y}"), lhs, Sense::Le, 1.0 / p_dn);
                    let mut terms = score_terms(&w, b, data.row(i), -1.0);
                    if rho - cost != 0.0 {
                        terms.push((s_w, rho - cost));
                    }
                    terms.push((lam, -m[i]));
                    p.add_constraint(format!("fb{pair_a}_{i}_{a}_{y}"), terms, Sense::Le, 0.0);
                } else {
                    // Negative-label cells only pin E >= 0.
                    p.add_constraint(format!("fz{pair_a}_{i}_{a}_{y}"), e_terms, Sense::Le, 0.0);
                }
            }
        }
        // (1/N) sum nu^a + sum p_hat mu^a - theta^a (1 - gamma) <= eta
        let mut cap: Vec<(usize, f64)> = nua.iter().map(|&v| (v, 1.0 / nf)).collect();
        for (a, y) in CELLS {
            cap.push((mua[&(a, y)], gi.marginal(a, y)));
        }
        cap.push((theta_a, -(1.0 - gamma)));
        p.add_constraint(format!("fcap{pair_a}"), cap, Sense::Le, eta);
        p.tag(format!("nu{pair_a}"), nua);
        p.tag(format!("theta{pair_a}"), vec![theta_a]);
        p.tag(format!("mu{pair_a}"), mua.values().copied().collect());
        p.tag(format!("lampair{pair_a}"), lams);
    }
    Ok(p)
}

/// Margin-indicator variant with chi-square marginal ambiguity and per-cell
/// radii (mixed binary SOCP).
pub fn build_generalized_eps_drfc(data: &Dataset, spec: &ModelSpec) -> Result<ConicProgram> {
    let gi = group_index(data);
    for (a, y) in CELLS {
        if gi.indices(a, y).is_empty() {
            return Err(Error::EmptyCell { a, y });
        }
    }
    let eta = spec.eta.expect("validated");
    let delta_p = spec.delta_p.expect("validated");
    let rho_ay = spec.rho_ay.expect("validated");
    let eps = spec.eps;
    let rho_of = |a: u8, y: i8| -> f64 {
        rho_ay[CELLS.iter().position(|&c| c == (a, y)).expect("cell")]
    };
    let rho_max = rho_ay.iter().cloned().fold(0.0f64, f64::max);
    let bounds = spec.bounds();
    let Skeleton { mut p, w, b, s_w } =
        skeleton(data, spec.norm, Some(bounds), "generalized-eps-drfc");
    p.info.insert("eps".into(), eps.to_string());
    let n = data.n();
    let m = big_m(data, bounds, rho_max, spec.norm, eps);

    // Chi-square dual variables. The dual multiplier is named zeta_dual to
    // avoid clashing with the hinge variants' unfairness cap.
    let zeta_dual = p.add_nonneg("zeta_dual");
    let theta = p.add_free("theta");
    let mut r = std::collections::BTreeMap::new();
    let mut s = std::collections::BTreeMap::new();
    for (a, y) in CELLS {
        r.insert((a, y), p.add_free(format!("r_{a}_{y}")));
        s.insert((a, y), p.add_free(format!("s_{a}_{y}")));
    }
    // delta_p zeta - theta - 2 p_hat.r + 2 zeta 1.p_hat
    let sum_p: f64 = CELLS.iter().map(|&(a, y)| gi.marginal(a, y)).sum();
    p.set_objective(zeta_dual, delta_p + 2.0 * sum_p);
    p.set_objective(theta, -1.0);
    for (a, y) in CELLS {
        p.set_objective(r[&(a, y)], -2.0 * gi.marginal(a, y));
    }
    for (a, y) in CELLS {
        // s_ay + theta <= zeta
        p.add_constraint(
            format!("cap_{a}_{y}"),
            vec![(s[&(a, y)], 1.0), (theta, 1.0), (zeta_dual, -1.0)],
            Sense::Le,
            0.0,
        );
        // ||(2 r_ay, s_ay + theta)|| <= 2 zeta - s_ay - theta
        p.add_soc(
            format!("soc_{a}_{y}"),
            LinExpr {
                terms: vec![(zeta_dual, 2.0), (s[&(a, y)], -1.0), (theta, -1.0)],
                constant: 0.0,
            },
            vec![
                LinExpr { terms: vec![(r[&(a, y)], 2.0)], constant: 0.0 },
                LinExpr { terms: vec![(s[&(a, y)], 1.0), (theta, 1.0)], constant: 0.0 },
            ],
        );
    }

    // Per-cell average of the objective binaries bounded by s_ay.
    let mut t = Vec::with_capacity(n);
    for i in 0..n {
        t.push(p.add_binary(format!("t_{i}")));
    }
    for (a, y) in CELLS {
        let cell = gi.indices(a, y);
        let mut terms: Vec<(usize, f64)> =
            cell.iter().map(|&i| (t[i], 1.0 / cell.len() as f64)).collect();
        terms.push((s[&(a, y)], -1.0));
        p.add_constraint(format!("avg_{a}_{y}"), terms, Sense::Le, 0.0);
    }
    for i in 0..n {
        let y = data.label(i) as f64;
        let rho_i = rho_of(data.sensitive(i), data.label(i));
        // -y(w.x + b) + rho_cell s_w <= M t_i - eps
        let mut terms = score_terms(&w, b, data.row(i), -y);
        if rho_i != 0.0 {
            terms.push((s_w, rho_i));
        }
        terms.push((t[i], -m[i]));
        p.add_constraint(format!("obj_{i}"), terms, Sense::Le, -eps);
    }
    p.tag("t", t);
    p.tag("zeta_dual", vec![zeta_dual]);
    p.tag("theta", vec![theta]);
    p.tag("r", r.values().copied().collect());
    p.tag("s", s.values().copied().collect());

    if eta < 1.0 {
        add_indicator_fairness(
            &mut p,
            data,
            &gi,
            &w,
            b,
            s_w,
            rho_of(0, 1),
            rho_of(1, 1),
            eps,
            eta,
            &m,
        );
    }
    Ok(p)
}

/// The chi-square marginal subproblem sup{phi.p : p in the divergence ball}
/// as a primal/dual SOCP pair. The primal is stated as a maximization; its
/// program carries info key `maximize` and minimizes -phi.p.
pub fn build_chi2_pair(
    phi: &[f64],
    p_hat: &[f64],
    delta_p: f64,
) -> Result<(ConicProgram, ConicProgram)> {
    let m = phi.len();
    if p_hat.len() != m || m == 0 {
        return Err(Error::BadSimplexPoint(format!(
            "phi has {m} entries, p_hat has {}",
            p_hat.len()
        )));
    }
    if p_hat.iter().any(|&v| v <= 0.0) {
        return Err(Error::BadSimplexPoint("p_hat must be strictly positive".into()));
    }
    if (p_hat.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::BadSimplexPoint("p_hat must sum to 1".into()));
    }
    if delta_p < 0.0 {
        return Err(Error::BadSimplexPoint(format!("delta_p must be nonnegative, got {delta_p}")));
    }

    // Primal: sup phi.p over p in the ball, stated as min -phi.p. The open
    // condition p > 0 is closed off at 1e-12 for the solver.
    let mut primal = ConicProgram::new();
    let pv: Vec<usize> = (0..m).map(|j| primal.add_var(format!("p_{j}"), 1e-12, f64::INFINITY)).collect();
    let qv: Vec<usize> = (0..m).map(|j| primal.add_nonneg(format!("q_{j}"))).collect();
    for j in 0..m {
        primal.set_objective(pv[j], -phi[j]);
    }
    primal.add_constraint("simplex", pv.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0);
    primal.add_constraint("budget", qv.iter().map(|&v| (v, 1.0)).collect(), Sense::Le, delta_p);
    for j in 0..m {
        // ||(p_j - p_hat_j, p_j / 2, q_j)|| <= p_j / 2 + q_j
        primal.add_soc(
            format!("chi_{j}"),
            LinExpr { terms: vec![(pv[j], 0.5), (qv[j], 1.0)], constant: 0.0 },
            vec![
                LinExpr { terms: vec![(pv[j], 1.0)], constant: -p_hat[j] },
                LinExpr { terms: vec![(pv[j], 0.5)], constant: 0.0 },
                LinExpr { terms: vec![(qv[j], 1.0)], constant: 0.0 },
            ],
        );
    }
    primal.tag("p", pv);
    primal.tag("q", qv);
    primal.info.insert("maximize".into(), "true".into());

    // Dual: min delta_p zeta - theta - 2 p_hat.r + 2 zeta 1.p_hat.
    let mut dual = ConicProgram::new();
    let zeta = dual.add_nonneg("zeta_dual");
    let theta = dual.add_free("theta");
    let rv: Vec<usize> = (0..m).map(|j| dual.add_free(format!("r_{j}"))).collect();
    let sv: Vec<usize> = (0..m).map(|j| dual.add_free(format!("s_{j}"))).collect();
    dual.set_objective(zeta, delta_p + 2.0 * p_hat.iter().sum::<f64>());
    dual.set_objective(theta, -1.0);
    for j in 0..m {
        dual.set_objective(rv[j], -2.0 * p_hat[j]);
        dual.add_constraint(format!("phi_{j}"), vec![(sv[j], 1.0)], Sense::Ge, phi[j]);
        dual.add_constraint(
            format!("cap_{j}"),
            vec![(sv[j], 1.0), (theta, 1.0), (zeta, -1.0)],
            Sense::Le,
            0.0,
        );
        dual.add_soc(
            format!("soc_{j}"),
            LinExpr { terms: vec![(zeta, 2.0), (sv[j], -1.0), (theta, -1.0)], constant: 0.0 },
            vec![
                LinExpr { terms: vec![(rv[j], 2.0)], constant: 0.0 },
                LinExpr { terms: vec![(sv[j], 1.0), (theta, 1.0)], constant: 0.0 },
            ],
        );
    }
    dual.tag("zeta_dual", vec![zeta]);
    dual.tag("theta", vec![theta]);
    dual.tag("r", rv);
    dual.tag("s", sv);
    Ok((primal, dual))
}

/// Per-cell radius schedule C1 (ln n)^{1/d} / n^{1/d}.
pub fn radius_schedule(n_cell: usize, d: usize, c1: f64) -> Result<f64> {
    if n_cell < 2 {
        return Err(Error::DomainError(format!("radius schedule needs n >= 2, got {n_cell}")));
    }
    if d < 2 {
        return Err(Error::DomainError(format!("radius schedule needs d >= 2, got {d}")));
    }
    if c1 <= 0.0 {
        return Err(Error::DomainError(format!("C1 must be positive, got {c1}")));
    }
    let n = n_cell as f64;
    let exp = 1.0 / d as f64;
    Ok(c1 * n.ln().powf(exp) / n.powf(exp))
}
