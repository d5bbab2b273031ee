//! Solver-agnostic conic-program representation plus the helpers every
//! builder needs: dual-norm bounds over the classifier box and per-sample
//! big-M values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::NormKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Sparse linear constraint: Σ coeff·var `sense` rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Affine expression Σ coeff·var + constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum::<f64>() + self.constant
    }
}

/// Second-order cone constraint ‖u‖₂ ≤ t on affine expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub name: String,
    pub t: LinExpr,
    pub u: Vec<LinExpr>,
}

/// A minimization program over continuous and binary variables with linear
/// and second-order-cone constraints. `tags` maps variable roles (w, b, t,
/// lam0, ...) to variable indices; `info` holds free-form build metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub variables: Vec<Variable>,
    pub linear: Vec<LinearConstraint>,
    pub socs: Vec<SocConstraint>,
    /// Dense objective coefficients, one per variable.
    pub objective: Vec<f64>,
    pub obj_offset: f64,
    pub tags: BTreeMap<String, Vec<usize>>,
    pub info: BTreeMap<String, String>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> usize {
        self.variables.push(Variable { name: name.into(), kind: VarKind::Continuous, lb, ub });
        self.objective.push(0.0);
        self.variables.len() - 1
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, 0.0, f64::INFINITY)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable { name: name.into(), kind: VarKind::Binary, lb: 0.0, ub: 1.0 });
        self.objective.push(0.0);
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.linear.push(LinearConstraint { name: name.into(), terms, sense, rhs });
    }

    pub fn add_soc(&mut self, name: impl Into<String>, t: LinExpr, u: Vec<LinExpr>) {
        self.socs.push(SocConstraint { name: name.into(), t, u });
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn tag(&mut self, role: impl Into<String>, indices: Vec<usize>) {
        self.tags.insert(role.into(), indices);
    }

    pub fn tagged(&self, role: &str) -> Option<&[usize]> {
        self.tags.get(role).map(|v| v.as_slice())
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Continuous copy with every binary relaxed to its [0,1] interval.
    pub fn relaxed(&self) -> ConicProgram {
        let mut p = self.clone();
        for v in &mut p.variables {
            if v.kind == VarKind::Binary {
                v.kind = VarKind::Continuous;
            }
        }
        p
    }
}

/// Bounds on the classifier: ‖w‖_∞ ≤ w_max, |b| ≤ b_max.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxBounds {
    pub w_max: f64,
    pub b_max: f64,
}

impl Default for BoxBounds {
    fn default() -> Self {
        Self { w_max: 100.0, b_max: 100.0 }
    }
}

impl BoxBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_max.is_finite() && self.w_max > 0.0 && self.b_max.is_finite() && self.b_max > 0.0)
        {
            return Err(Error::BadSpec(format!(
                "box bounds must be finite and positive, got w_max={}, b_max={}",
                self.w_max, self.b_max
            )));
        }
        Ok(())
    }
}

/// sup{‖w‖_* : ‖w‖_∞ ≤ w_max} for the dual of the given norm.
pub fn dual_norm_bound(norm: NormKind, w_max: f64, d: usize) -> f64 {
    assert!(w_max > 0.0, "w_max must be positive");
    match norm {
        NormKind::Linf => w_max * d as f64,
        NormKind::L2 => w_max * (d as f64).sqrt(),
        NormKind::L1 => w_max,
    }
}

/// Per-sample big-M values valid for every (w, b) in the box:
/// Mᵢ = w_max·‖x̂ᵢ‖₁ + ρ·dual_norm_bound + b_max + max(ε, 1).
pub fn big_m(data: &Dataset, bounds: BoxBounds, rho: f64, norm: NormKind, eps: f64) -> Vec<f64> {
    assert!(rho >= 0.0, "rho must be nonnegative");
    bounds.validate().expect("valid box");
    let pad = rho * dual_norm_bound(norm, bounds.w_max, data.dim());
    (0..data.n())
        .map(|i| {
            let x1: f64 = data.row(i).iter().map(|v| v.abs()).sum();
            bounds.w_max * x1 + pad + bounds.b_max + eps.max(1.0)
        })
        .collect()
}

/// ‖w‖_∞ within 1e-6 of the box bound: the box may have clipped the optimum.
pub fn box_binding_warning(w: &[f64], bounds: BoxBounds) -> Option<String> {
    let winf = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if winf >= bounds.w_max - 1e-6 {
        Some(format!(
            "solution has max|w| = {winf}, at the configured bound {}; the bound may have clipped the optimum",
            bounds.w_max
        ))
    } else {
        None
    }
}

/// Checks structural invariants; returns a list of human-readable defects
/// (empty means the program is well-formed).
pub fn validate(p: &ConicProgram) -> Vec<String> {
    let mut defects = Vec::new();
    let n = p.variables.len();
    if p.objective.len() != n {
        defects.push(format!("objective has {} entries for {} variables", p.objective.len(), n));
    }
    for v in &p.variables {
        if v.kind == VarKind::Binary && (v.lb != 0.0 || v.ub != 1.0) {
            defects.push(format!("binary bounds: variable {} has bounds [{}, {}]", v.name, v.lb, v.ub));
        }
        if v.lb > v.ub {
            defects.push(format!("empty bounds on variable {}", v.name));
        }
    }
    let check_expr = |terms: &[(usize, f64)], ctx: &str, defects: &mut Vec<String>| {
        for &(idx, c) in terms {
            if idx >= n {
                defects.push(format!("unknown variable index {idx} in {ctx}"));
            }
            if !c.is_finite() {
                defects.push(format!("non-finite coefficient in {ctx}"));
            }
        }
    };
    for c in &p.linear {
        check_expr(&c.terms, &format!("constraint {}", c.name), &mut defects);
        if !c.rhs.is_finite() {
            defects.push(format!("non-finite rhs in constraint {}", c.name));
        }
    }
    for s in &p.socs {
        if s.u.is_empty() {
            defects.push(format!("cone {} has empty u", s.name));
        }
        check_expr(&s.t.terms, &format!("cone {}", s.name), &mut defects);
        for e in &s.u {
            check_expr(&e.terms, &format!("cone {}", s.name), &mut defects);
        }
    }
    // Classifier programs (those that record a feature dimension) must carry
    // consistent (w, b) tags; auxiliary programs need not.
    let is_classifier = p.info.contains_key("d");
    match (p.tags.get("w"), p.tags.get("b")) {
        (Some(w), Some(b)) => {
            if b.len() != 1 {
                defects.push(format!("tag b lists {} variables, expected 1", b.len()));
            }
            if let Some(d) = p.info.get("d").and_then(|s| s.parse::<usize>().ok()) {
                if w.len() != d {
                    defects.push(format!("tag w lists {} variables but d = {d}", w.len()));
                }
            }
            for &i in w.iter().chain(b) {
                if i >= n {
                    defects.push(format!("tag references unknown variable index {i}"));
                }
            }
        }
        _ if is_classifier => defects.push("missing w/b tags".into()),
        _ => {}
    }
    defects
}

fn fmt_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    for &(idx, c) in terms {
        if c >= 0.0 {
            let _ = write!(out, " + {} {}", c, vars[idx].name);
        } else {
            let _ = write!(out, " - {} {}", -c, vars[idx].name);
        }
    }
}

/// Emits the program as LP-format text. Programs with second-order cones
/// get an extra comment-prefixed `Cones` section (one line per cone,
/// `name: [t-expr] >= || [u1] ; [u2] ; ... ||`) after the constraints, which
/// LP readers skip as comments.
pub fn export_text(p: &ConicProgram) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    for (idx, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            fmt_terms(&mut out, &[(idx, c)], &p.variables);
        }
    }
    if p.obj_offset != 0.0 || p.objective.iter().all(|&c| c == 0.0) {
        if p.obj_offset >= 0.0 {
            let _ = write!(out, " + {}", p.obj_offset);
        } else {
            let _ = write!(out, " - {}", -p.obj_offset);
        }
    }
    out.push_str("\nSubject To\n");
    for c in &p.linear {
        let _ = write!(out, " {}:", c.name);
        fmt_terms(&mut out, &c.terms, &p.variables);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    if !p.socs.is_empty() {
        out.push_str("\\ Cones: each line states ||u1; u2; ...||_2 <= t\n");
        for s in &p.socs {
            let _ = write!(out, "\\ cone {}: [", s.name);
            fmt_terms(&mut out, &s.t.terms, &p.variables);
            if s.t.constant != 0.0 {
                let _ = write!(out, " + {}", s.t.constant);
            }
            out.push_str(" ] >= ||");
            for (k, e) in s.u.iter().enumerate() {
                if k > 0 {
                    out.push_str(" ;");
                }
                fmt_terms(&mut out, &e.terms, &p.variables);
                if e.constant != 0.0 {
                    let _ = write!(out, " + {}", e.constant);
                }
            }
            out.push_str(" ||\n");
        }
    }
    out.push_str("Bounds\n");
    for v in &p.variables {
        if v.kind == VarKind::Binary {
            continue; // binaries default to [0,1]
        }
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.ub == f64::INFINITY {
            let _ = writeln!(out, " {} >= {}", v.name, v.lb);
        } else if v.lb == f64::NEG_INFINITY {
            let _ = writeln!(out, " {} <= {}", v.name, v.ub);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lb, v.name, v.ub);
        }
    }
    let binaries: Vec<&str> =
        p.variables.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        let _ = writeln!(out, "Binaries\n {}", binaries.join(" "));
    }
    out.push_str("End\n");
    out
}

/// Parses the LP subset emitted by [`export_text`] (no cone section).
/// Intended for round-trip validation, not as a general LP reader.
pub fn parse_text(text: &str) -> Result<ConicProgram> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Constraints,
        Bounds,
        Binaries,
        Done,
    }
    let bad = |msg: &str| Error::InvalidProgram(msg.to_string());

    let mut p = ConicProgram::new();
    let mut name_to_idx: BTreeMap<String, usize> = BTreeMap::new();
    // First pass: collect variable names from objective and constraint terms
    // in order of first appearance, then fill bounds/kinds on the second.
    let mut section = Section::Preamble;
    let mut pending: Vec<(String, Vec<(String, f64)>, Sense, f64, f64)> = Vec::new();
    let mut obj_terms: Vec<(String, f64)> = Vec::new();
    let mut obj_offset = 0.0;
    let mut bounds_lines: Vec<String> = Vec::new();
    let mut binary_names: Vec<String> = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Constraints;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binaries" => {
                section = Section::Binaries;
                continue;
            }
            "End" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Preamble | Section::Done => return Err(bad("unexpected content")),
            Section::Objective => {
                let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
                let (terms, constant) = parse_affine(body)?;
                obj_terms.extend(terms);
                obj_offset += constant;
            }
            Section::Constraints => {
                let (name, body) = line.split_once(':').ok_or_else(|| bad("constraint without name"))?;
                let (body, sense, rhs) = if let Some((l, r)) = body.split_once("<=") {
                    (l, Sense::Le, r)
                } else if let Some((l, r)) = body.split_once(">=") {
                    (l, Sense::Ge, r)
                } else if let Some((l, r)) = body.split_once('=') {
                    (l, Sense::Eq, r)
                } else {
                    return Err(bad("constraint without comparison"));
                };
                let rhs: f64 = rhs.trim().parse().map_err(|_| bad("bad rhs"))?;
                let (terms, constant) = parse_affine(body)?;
                pending.push((name.trim().to_string(), terms, sense, rhs, constant));
            }
            Section::Bounds => bounds_lines.push(line.to_string()),
            Section::Binaries => {
                binary_names.extend(line.split_whitespace().map(str::to_string))
            }
        }
    }

    let intern = |name: &str, p: &mut ConicProgram, map: &mut BTreeMap<String, usize>| {
        *map.entry(name.to_string()).or_insert_with(|| p.add_var(name, 0.0, f64::INFINITY))
    };
    for (name, _) in &obj_terms {
        intern(name, &mut p, &mut name_to_idx);
    }
    for (_, terms, _, _, _) in &pending {
        for (name, _) in terms {
            intern(name, &mut p, &mut name_to_idx);
        }
    }
    for (name, c) in obj_terms {
        let idx = name_to_idx[&name];
        p.objective[idx] += c;
    }
    p.obj_offset = obj_offset;
    for (name, terms, sense, rhs, constant) in pending {
        let terms = terms.into_iter().map(|(n, c)| (name_to_idx[&n], c)).collect();
        p.add_constraint(name, terms, sense, rhs - constant);
    }
    for line in bounds_lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [name, "free"] => {
                let idx = intern(name, &mut p, &mut name_to_idx);
                p.variables[idx].lb = f64::NEG_INFINITY;
                p.variables[idx].ub = f64::INFINITY;
            }
            [name, ">=", lo] => {
                let idx = intern(name, &mut p, &mut name_to_idx);
                p.variables[idx].lb = lo.parse().map_err(|_| bad("bad bound"))?;
            }
            [name, "<=", hi] => {
                let idx = intern(name, &mut p, &mut name_to_idx);
                p.variables[idx].lb = f64::NEG_INFINITY;
                p.variables[idx].ub = hi.parse().map_err(|_| bad("bad bound"))?;
            }
            [lo, "<=", name, "<=", hi] => {
                let idx = intern(name, &mut p, &mut name_to_idx);
                p.variables[idx].lb = lo.parse().map_err(|_| bad("bad bound"))?;
                p.variables[idx].ub = hi.parse().map_err(|_| bad("bad bound"))?;
            }
            _ => return Err(bad("unrecognized bounds line")),
        }
    }
    for name in binary_names {
        let idx = intern(&name, &mut p, &mut name_to_idx);
        p.variables[idx].kind = VarKind::Binary;
        p.variables[idx].lb = 0.0;
        p.variables[idx].ub = 1.0;
    }
    Ok(p)
}

/// Parses "+ 2 x - 3.5 y + 1" into (terms, constant). Every term must carry
/// an explicit sign and coefficient, as produced by the exporter.
fn parse_affine(body: &str) -> Result<(Vec<(String, f64)>, f64)> {
    let bad = |msg: &str| Error::InvalidProgram(msg.to_string());
    let toks: Vec<&str> = body.split_whitespace().collect();
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    while i < toks.len() {
        let sign = match toks[i] {
            "+" => 1.0,
            "-" => -1.0,
            _ => return Err(bad("expected sign token")),
        };
        let value: f64 = toks.get(i + 1).ok_or_else(|| bad("dangling sign"))?.parse().map_err(|_| bad("bad number"))?;
        // A following token that is not a sign is the variable name.
        match toks.get(i + 2) {
            Some(&name) if name != "+" && name != "-" => {
                terms.push((name.to_string(), sign * value));
                i += 3;
            }
            _ => {
                constant += sign * value;
                i += 2;
            }
        }
    }
    Ok((terms, constant))
}
