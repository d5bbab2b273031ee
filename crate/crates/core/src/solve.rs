//! Solving layer: a continuous conic backend (Clarabel) behind a small
//! contract, a deterministic best-bound branch-and-bound for the binary
//! variables, solution extraction, and the CVaR level bisection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Hyperplane;
use crate::model::{ConicProgram, Sense, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub objective: f64,
    /// One value per program variable, in declaration order.
    pub values: Vec<f64>,
    /// Dual objective reported by the continuous backend (root relaxation
    /// for mixed-binary solves).
    pub dual_objective: Option<f64>,
    pub mip_gap: f64,
    pub node_count: u64,
    pub wall_time_s: f64,
    /// One line per accepted incumbent: `node=<k> obj=<v> gap=<g>`.
    pub log: Vec<String>,
}

impl SolveResult {
    pub fn assignment(&self, program: &ConicProgram) -> BTreeMap<String, f64> {
        program
            .variables
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Absolute gap between incumbent and best bound at which the search stops.
    pub mip_gap_tol: f64,
    pub node_limit: u64,
    pub time_limit_s: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { mip_gap_tol: 1e-6, node_limit: 2_000_000, time_limit_s: 3600.0 }
    }
}

fn require_valid(p: &ConicProgram) -> Result<()> {
    let defects = crate::model::validate(p);
    if defects.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidProgram(defects.join("; ")))
    }
}

/// Solves a continuous program (any binaries are treated as their [0,1]
/// relaxation by the caller).
pub fn solve_continuous(p: &ConicProgram) -> Result<SolveResult> {
    require_valid(p)?;
    let start = Instant::now();
    let n = p.n_vars();

    // Map to the backend's `min qᵀx s.t. Ax + s = b, s ∈ K` form: equalities
    // to the zero cone, inequalities to the nonnegative cone (aᵀx ≤ rhs as
    // s = rhs − aᵀx ≥ 0), bounds as extra inequality rows, and every SOC
    // block as s = (t(x), u(x)).
    let mut rows_i: Vec<usize> = Vec::new();
    let mut cols_j: Vec<usize> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut row = 0usize;
    let push_row = |terms: &[(usize, f64)],
                        scale: f64,
                        rhs: f64,
                        rows_i: &mut Vec<usize>,
                        cols_j: &mut Vec<usize>,
                        vals: &mut Vec<f64>,
                        b: &mut Vec<f64>,
                        row: &mut usize| {
        for &(v, c) in terms {
            rows_i.push(*row);
            cols_j.push(v);
            vals.push(scale * c);
        }
        b.push(rhs);
        *row += 1;
    };

    let n_eq = p.linear.iter().filter(|c| c.sense == Sense::Eq).count();
    if n_eq > 0 {
        for c in p.linear.iter().filter(|c| c.sense == Sense::Eq) {
            push_row(&c.terms, 1.0, c.rhs, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
        }
        cones.push(SupportedConeT::ZeroConeT(n_eq));
    }
    let mut n_ineq = 0usize;
    for c in &p.linear {
        match c.sense {
            Sense::Le => {
                push_row(&c.terms, 1.0, c.rhs, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
                n_ineq += 1;
            }
            Sense::Ge => {
                push_row(&c.terms, -1.0, -c.rhs, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
                n_ineq += 1;
            }
            Sense::Eq => {}
        }
    }
    for (v, var) in p.variables.iter().enumerate() {
        if var.lb.is_finite() {
            push_row(&[(v, -1.0)], 1.0, -var.lb, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
            n_ineq += 1;
        }
        if var.ub.is_finite() {
            push_row(&[(v, 1.0)], 1.0, var.ub, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
            n_ineq += 1;
        }
    }
    if n_ineq > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(n_ineq));
    }
    for s in &p.socs {
        push_row(&s.t.terms, -1.0, s.t.constant, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
        for e in &s.u {
            push_row(&e.terms, -1.0, e.constant, &mut rows_i, &mut cols_j, &mut vals, &mut b, &mut row);
        }
        cones.push(SupportedConeT::SecondOrderConeT(s.u.len() + 1));
    }

    if row == 0 {
        // Fully unconstrained: the backend cannot factor an empty system.
        let unbounded = p.objective.iter().any(|&c| c != 0.0);
        return Ok(SolveResult {
            status: if unbounded { Status::Unbounded } else { Status::Optimal },
            objective: if unbounded { f64::NEG_INFINITY } else { p.obj_offset },
            values: vec![0.0; n],
            dual_objective: None,
            mip_gap: 0.0,
            node_count: 1,
            wall_time_s: start.elapsed().as_secs_f64(),
            log: Vec::new(),
        });
    }

    let a = CscMatrix::new_from_triplets(row, n, rows_i, cols_j, vals);
    let pmat = CscMatrix::<f64>::zeros((n, n));
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pmat, &p.objective, &a, &b, &cones, settings);
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        SolverStatus::MaxTime => Status::TimeLimit,
        other => {
            return Err(Error::NumericalFailure(format!(
                "backend terminated with {other:?} (iterations: {})",
                solver.info.iterations
            )))
        }
    };
    Ok(SolveResult {
        status,
        objective: sol.obj_val + p.obj_offset,
        values: sol.x.clone(),
        dual_objective: Some(sol.obj_val_dual + p.obj_offset),
        mip_gap: 0.0,
        node_count: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        log: Vec::new(),
    })
}

const INT_TOL: f64 = 1e-6;

struct Node {
    id: u64,
    bound: f64,
    fixings: Vec<(usize, f64)>,
}

// Best bound first, ties by lowest node id.
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so lowest bound pops first.
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn with_fixings(base: &ConicProgram, fixings: &[(usize, f64)]) -> ConicProgram {
    let mut p = base.clone();
    for &(v, val) in fixings {
        p.variables[v].lb = val;
        p.variables[v].ub = val;
    }
    p
}

/// Deterministic branch-and-bound over the binary variables: best-bound node
/// selection (ties by lowest node id), most-fractional branching, absolute
/// gap stopping rule, with a root rounding heuristic for a warm incumbent.
pub fn solve_mip(p: &ConicProgram, opts: SolveOptions) -> Result<SolveResult> {
    require_valid(p)?;
    let start = Instant::now();
    let binaries: Vec<usize> = (0..p.n_vars())
        .filter(|&v| p.variables[v].kind == VarKind::Binary)
        .collect();
    let relaxed = p.relaxed();

    // When the objective touches only binary variables with one shared
    // coefficient, every integral solution's value is obj_offset + k*c, so
    // any node bound may be rounded up to the next multiple. This is plain
    // integer bound tightening; the small slack guards against solver
    // tolerance pushing an exact multiple over the rounding edge.
    let granularity: Option<f64> = {
        let mut g: Option<f64> = None;
        let mut uniform = true;
        for (v, &c) in p.objective.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if p.variables[v].kind != VarKind::Binary {
                uniform = false;
                break;
            }
            match g {
                None => g = Some(c),
                Some(gv) if (gv - c).abs() <= 1e-15 => {}
                _ => {
                    uniform = false;
                    break;
                }
            }
        }
        if uniform {
            g.filter(|&c| c > 0.0)
        } else {
            None
        }
    };
    let tighten = |bound: f64| -> f64 {
        match granularity {
            Some(c) => p.obj_offset + ((bound - p.obj_offset) / c - 1e-6).ceil() * c,
            None => bound,
        }
    };

    let root = solve_continuous(&relaxed)?;
    match root.status {
        Status::Infeasible => return Ok(SolveResult { wall_time_s: start.elapsed().as_secs_f64(), ..root }),
        Status::Unbounded => return Ok(SolveResult { wall_time_s: start.elapsed().as_secs_f64(), ..root }),
        Status::Optimal => {}
        _ => return Err(Error::NumericalFailure("root relaxation did not solve".into())),
    }
    let root_dual = root.dual_objective;

    let mut log: Vec<String> = Vec::new();
    let mut incumbent: Option<SolveResult> = None;
    let mut node_count: u64 = 1;

    // Branching rule: most-fractional, preferring binaries that carry
    // objective weight over free indicator binaries — fixing the former is
    // what moves the relaxation bound.
    let most_fractional = |values: &[f64]| -> Option<usize> {
        let mut best: Option<(usize, f64, bool)> = None;
        for &v in &binaries {
            let frac = values[v] - values[v].floor();
            let dist = frac.min(1.0 - frac);
            if dist > INT_TOL {
                let weighted = p.objective[v] != 0.0;
                let better = match best {
                    None => true,
                    Some((_, d, w)) => (weighted, dist) > (w, d),
                };
                if better {
                    best = Some((v, dist, weighted));
                }
            }
        }
        best.map(|(v, _, _)| v)
    };

    let accept = |res: SolveResult,
                      node: u64,
                      best_bound: f64,
                      incumbent: &mut Option<SolveResult>,
                      log: &mut Vec<String>| {
        if incumbent.as_ref().map_or(true, |inc| res.objective < inc.objective - 1e-12) {
            let gap = res.objective - best_bound;
            log.push(format!("node={node} obj={} gap={}", res.objective, gap.max(0.0)));
            *incumbent = Some(res);
        }
    };

    // Fix-and-dive heuristic: repeatedly pin the currently most-decided
    // unfixed binary to its rounded value and re-solve; on infeasibility,
    // try the opposite value once. Deterministic; returns an integral
    // solution when the dive survives to the bottom.
    let dive = |start_fixings: &[(usize, f64)], start: &SolveResult| -> Option<SolveResult> {
        let mut fixings = start_fixings.to_vec();
        let fixed: std::collections::BTreeSet<usize> =
            fixings.iter().map(|&(v, _)| v).collect();
        let mut fixed = fixed;
        let mut current = start.clone();
        loop {
            if most_fractional(&current.values).is_none() {
                return Some(current);
            }
            // Pin every already-integral unfixed binary in one batch; the
            // relaxation already proves those pins feasible together.
            let mut batched = false;
            for &v in &binaries {
                if fixed.contains(&v) {
                    continue;
                }
                let frac = current.values[v] - current.values[v].floor();
                if frac.min(1.0 - frac) <= INT_TOL {
                    fixings.push((v, current.values[v].round()));
                    fixed.insert(v);
                    batched = true;
                }
            }
            if batched {
                match solve_continuous(&with_fixings(&relaxed, &fixings)) {
                    Ok(res) if res.status == Status::Optimal => {
                        current = res;
                        continue;
                    }
                    _ => return None,
                }
            }
            // Most decided first: least likely to break feasibility.
            let next = binaries
                .iter()
                .filter(|v| !fixed.contains(v))
                .map(|&v| {
                    let frac = current.values[v] - current.values[v].floor();
                    (v, frac.min(1.0 - frac))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))?;
            let v = next.0;
            let rounded = current.values[v].round();
            fixed.insert(v);
            let mut advanced = false;
            for val in [rounded, 1.0 - rounded] {
                fixings.push((v, val));
                match solve_continuous(&with_fixings(&relaxed, &fixings)) {
                    Ok(res) if res.status == Status::Optimal => {
                        current = res;
                        advanced = true;
                        break;
                    }
                    _ => {
                        fixings.pop();
                    }
                }
            }
            if !advanced {
                return None;
            }
        }
    };

    // Root heuristic pass.
    if !binaries.is_empty() {
        if most_fractional(&root.values).is_none() {
            // Root is already integral.
            accept(root.clone(), 0, root.objective, &mut incumbent, &mut log);
        } else if let Some(res) = dive(&[], &root) {
            accept(res, 0, root.objective, &mut incumbent, &mut log);
        }
    } else {
        accept(root.clone(), 0, root.objective, &mut incumbent, &mut log);
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id: u64 = 1;
    let root_bound = tighten(root.objective);
    if incumbent.as_ref().map_or(true, |inc| inc.objective - root_bound > opts.mip_gap_tol) {
        heap.push(Node { id: 0, bound: root_bound, fixings: Vec::new() });
    }

    let mut limit_status: Option<Status> = None;
    let mut best_bound = root_bound;
    while let Some(node) = heap.pop() {
        best_bound = node.bound;
        if let Some(inc) = &incumbent {
            if inc.objective - best_bound <= opts.mip_gap_tol {
                break;
            }
        }
        if start.elapsed().as_secs_f64() > opts.time_limit_s {
            limit_status = Some(Status::TimeLimit);
            break;
        }
        if node_count >= opts.node_limit {
            limit_status = Some(Status::GapLimit);
            break;
        }

        let sub = with_fixings(&relaxed, &node.fixings);
        let res = match solve_continuous(&sub) {
            Ok(r) => r,
            Err(Error::NumericalFailure(_)) => continue, // prune ill-conditioned node
            Err(e) => return Err(e),
        };
        node_count += 1;
        if res.status != Status::Optimal {
            continue; // infeasible subproblem
        }
        if let Some(inc) = &incumbent {
            if tighten(res.objective) >= inc.objective - opts.mip_gap_tol {
                continue; // bound-pruned
            }
        }
        // Periodic dive from the current node for fresh incumbents.
        if node_count % 512 == 0 {
            if let Some(heur) = dive(&node.fixings, &res) {
                accept(heur, node.id, best_bound, &mut incumbent, &mut log);
                if let Some(inc) = &incumbent {
                    if inc.objective - best_bound <= opts.mip_gap_tol {
                        break;
                    }
                }
            }
        }
        match most_fractional(&res.values) {
            None => {
                accept(res, node.id, best_bound, &mut incumbent, &mut log);
            }
            Some(v) => {
                let bound = tighten(res.objective);
                for val in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((v, val));
                    heap.push(Node { id: next_id, bound, fixings });
                    next_id += 1;
                }
            }
        }
    }

    let wall = start.elapsed().as_secs_f64();
    match incumbent {
        Some(mut inc) => {
            // Remaining open nodes (if any) bound the true optimum.
            let open_bound = heap.iter().map(|n| n.bound).fold(best_bound, f64::min);
            inc.mip_gap = (inc.objective - open_bound.min(inc.objective)).max(0.0);
            inc.status = match limit_status {
                Some(s) => s,
                None => Status::Optimal,
            };
            if inc.status == Status::Optimal {
                inc.mip_gap = inc.mip_gap.min(opts.mip_gap_tol);
            }
            inc.node_count = node_count;
            inc.wall_time_s = wall;
            inc.dual_objective = root_dual;
            inc.log = log;
            Ok(inc)
        }
        None => Ok(SolveResult {
            status: limit_status.unwrap_or(Status::Infeasible),
            objective: f64::INFINITY,
            values: vec![0.0; p.n_vars()],
            dual_objective: root_dual,
            mip_gap: f64::INFINITY,
            node_count,
            wall_time_s: wall,
            log,
        }),
    }
}

/// Dispatches on the presence of binary variables.
pub fn solve(p: &ConicProgram, opts: SolveOptions) -> Result<SolveResult> {
    if p.n_binaries() == 0 {
        solve_continuous(p)
    } else {
        solve_mip(p, opts)
    }
}

/// Reads the tagged (w, b) variables out of a solved program.
pub fn extract_hyperplane(result: &SolveResult, program: &ConicProgram) -> Result<Hyperplane> {
    if !matches!(result.status, Status::Optimal | Status::GapLimit) {
        return Err(Error::MissingTags(format!(
            "no solution to extract from status {:?}",
            result.status
        )));
    }
    let w_idx = program
        .tagged("w")
        .ok_or_else(|| Error::MissingTags("program has no `w` tag".into()))?;
    let b_idx = program
        .tagged("b")
        .ok_or_else(|| Error::MissingTags("program has no `b` tag".into()))?;
    if b_idx.len() != 1 {
        return Err(Error::MissingTags("`b` tag must list exactly one variable".into()));
    }
    let w = w_idx.iter().map(|&i| result.values[i]).collect();
    Ok(Hyperplane::new(w, result.values[b_idx[0]]))
}

/// Feasibility value of the CVaR chance-constraint surrogate at level t:
/// min over (w, b, β ∈ [0,1]) of −β + (1/(tN))·Σ max{0, β − ŷᵢ(wᵀx̂ᵢ+b)}.
fn cvar_inner_value(data: &Dataset, t: f64) -> Result<f64> {
    let mut p = ConicProgram::new();
    let d = data.dim();
    let w: Vec<usize> = (0..d).map(|j| p.add_free(format!("w_{j}"))).collect();
    let b = p.add_free("b");
    let beta = p.add_var("beta", 0.0, 1.0);
    p.set_objective(beta, -1.0);
    for i in 0..data.n() {
        let u = p.add_nonneg(format!("u_{i}"));
        p.set_objective(u, 1.0 / (t * data.n() as f64));
        let y = data.label(i) as f64;
        let mut terms = vec![(u, -1.0), (beta, 1.0), (b, -y)];
        for (j, &wj) in w.iter().enumerate() {
            terms.push((wj, -y * data.row(i)[j]));
        }
        p.add_constraint(format!("hinge_{i}"), terms, Sense::Le, 0.0);
    }
    p.tag("w", w);
    p.tag("b", vec![b]);
    p.info.insert("d".into(), d.to_string());
    let res = solve_continuous(&p)?;
    if res.status != Status::Optimal {
        return Err(Error::NumericalFailure(format!(
            "inner feasibility solve returned {:?}",
            res.status
        )));
    }
    Ok(res.objective)
}

/// Bisects the CVaR level: returns the smallest t in the range at which the
/// chance-constraint surrogate admits a strictly negative value (taken as
/// ≤ −1e−9). That threshold coincides with the optimal average hinge loss.
pub fn cvar_bisection(data: &Dataset, t_range: (f64, f64), tol: f64) -> Result<f64> {
    assert!(tol > 0.0, "tol must be positive");
    let (mut lo, mut hi) = t_range;
    assert!(lo > 0.0 && hi > lo, "need 0 < t_lo < t_hi");
    const STRICT: f64 = -1e-9;
    if cvar_inner_value(data, lo)? <= STRICT {
        return Ok(lo);
    }
    if cvar_inner_value(data, hi)? > STRICT {
        return Ok(hi);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if cvar_inner_value(data, mid)? <= STRICT {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinExpr;
    use approx::assert_abs_diff_eq;

    fn tag_wb(p: &mut ConicProgram) {
        // The validator wants a (w, b) pair; point both at variable 0 for
        // plain test programs.
        p.tag("w", vec![0]);
        p.tag("b", vec![0]);
    }

    #[test]
    fn continuous_min_x_geq_3() {
        let mut p = ConicProgram::new();
        let x = p.add_nonneg("x");
        p.set_objective(x, 1.0);
        p.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        tag_wb(&mut p);
        let res = solve_continuous(&p).unwrap();
        assert_eq!(res.status, Status::Optimal);
        assert_abs_diff_eq!(res.objective, 3.0, epsilon = 1e-7);
    }

    #[test]
    fn continuous_infeasible() {
        let mut p = ConicProgram::new();
        let x = p.add_free("x");
        p.add_constraint("a", vec![(x, 1.0)], Sense::Le, -1.0);
        p.add_constraint("b", vec![(x, 1.0)], Sense::Ge, 1.0);
        tag_wb(&mut p);
        assert_eq!(solve_continuous(&p).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn continuous_unbounded() {
        let mut p = ConicProgram::new();
        let x = p.add_free("x");
        p.set_objective(x, -1.0);
        tag_wb(&mut p);
        assert_eq!(solve_continuous(&p).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn continuous_weak_duality() {
        let mut p = ConicProgram::new();
        let x = p.add_nonneg("x");
        let y = p.add_nonneg("y");
        p.set_objective(x, 2.0);
        p.set_objective(y, 3.0);
        p.add_constraint("c1", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 4.0);
        p.add_constraint("c2", vec![(x, 1.0), (y, 2.0)], Sense::Ge, 5.0);
        tag_wb(&mut p);
        let res = solve_continuous(&p).unwrap();
        assert_abs_diff_eq!(res.objective, res.dual_objective.unwrap(), epsilon = 1e-7);
        assert_abs_diff_eq!(res.objective, 9.0, epsilon = 1e-6);
    }

    #[test]
    fn continuous_soc_distance() {
        // min s subject to ||(x-3, y-4)|| <= s at (x,y) free: optimum 0...
        // pin x,y instead: min s s.t. ||(3,4)|| <= s -> 5.
        let mut p = ConicProgram::new();
        let s = p.add_nonneg("s");
        p.set_objective(s, 1.0);
        p.add_soc(
            "dist",
            LinExpr::var(s),
            vec![
                LinExpr { terms: vec![], constant: 3.0 },
                LinExpr { terms: vec![], constant: 4.0 },
            ],
        );
        tag_wb(&mut p);
        let res = solve_continuous(&p).unwrap();
        assert_abs_diff_eq!(res.objective, 5.0, epsilon = 1e-7);
    }

    #[test]
    fn mip_forced_binary() {
        let mut p = ConicProgram::new();
        let t1 = p.add_binary("t1");
        let t2 = p.add_binary("t2");
        p.set_objective(t1, 1.0);
        p.set_objective(t2, 1.0);
        p.add_constraint("force", vec![(t1, 10.0)], Sense::Ge, 5.0);
        tag_wb(&mut p);
        let res = solve_mip(&p, SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Optimal);
        assert_abs_diff_eq!(res.objective, 1.0, epsilon = 1e-6);
        assert!(res.values[t1] > 0.9 && res.values[t2] < 0.1);
    }

    #[test]
    fn mip_integral_root_solved_at_node_one() {
        let mut p = ConicProgram::new();
        let t = p.add_binary("t");
        p.set_objective(t, 1.0);
        tag_wb(&mut p);
        let res = solve_mip(&p, SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Optimal);
        assert_eq!(res.node_count, 1);
        assert_abs_diff_eq!(res.objective, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn mip_matches_brute_force_on_small_knapsack() {
        // min -3a -4b -2c s.t. 2a + 3b + c <= 4 over binaries.
        let mut p = ConicProgram::new();
        let vars: Vec<usize> = ["a", "b", "c"].iter().map(|n| p.add_binary(*n)).collect();
        for (v, c) in vars.iter().zip([-3.0, -4.0, -2.0]) {
            p.set_objective(*v, c);
        }
        p.add_constraint(
            "cap",
            vars.iter().zip([2.0, 3.0, 1.0]).map(|(&v, c)| (v, c)).collect(),
            Sense::Le,
            4.0,
        );
        tag_wb(&mut p);
        let res = solve_mip(&p, SolveOptions::default()).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|k| ((mask >> k) & 1) as f64).collect();
            if 2.0 * x[0] + 3.0 * x[1] + x[2] <= 4.0 {
                best = best.min(-3.0 * x[0] - 4.0 * x[1] - 2.0 * x[2]);
            }
        }
        assert_abs_diff_eq!(res.objective, best, epsilon = 1e-6);
    }

    #[test]
    fn mip_deterministic() {
        let build = || {
            let mut p = ConicProgram::new();
            let vars: Vec<usize> = (0..6).map(|k| p.add_binary(format!("z_{k}"))).collect();
            for (k, &v) in vars.iter().enumerate() {
                p.set_objective(v, -((k as f64) * 0.7 + 1.0));
            }
            p.add_constraint(
                "cap",
                vars.iter().enumerate().map(|(k, &v)| (v, k as f64 + 1.0)).collect(),
                Sense::Le,
                7.5,
            );
            tag_wb(&mut p);
            p
        };
        let r1 = solve_mip(&build(), SolveOptions::default()).unwrap();
        let r2 = solve_mip(&build(), SolveOptions::default()).unwrap();
        assert_eq!(r1.objective, r2.objective);
        assert_eq!(r1.node_count, r2.node_count);
        assert_eq!(r1.log, r2.log);
    }

    #[test]
    fn relaxation_bounds_mip() {
        let mut p = ConicProgram::new();
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        p.set_objective(a, 1.0);
        p.set_objective(b, 1.0);
        p.add_constraint("c", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.5);
        tag_wb(&mut p);
        let relax = solve_continuous(&p.relaxed()).unwrap();
        let mip = solve_mip(&p, SolveOptions::default()).unwrap();
        assert!(relax.objective <= mip.objective + 1e-9);
        assert_abs_diff_eq!(mip.objective, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn extract_reads_tags() {
        let mut p = ConicProgram::new();
        let w0 = p.add_free("w_0");
        let b = p.add_free("b");
        p.set_objective(w0, 1.0);
        p.add_constraint("cw", vec![(w0, 1.0)], Sense::Ge, 2.0);
        p.add_constraint("cb", vec![(b, 1.0)], Sense::Eq, -1.0);
        p.tag("w", vec![w0]);
        p.tag("b", vec![b]);
        let res = solve_continuous(&p).unwrap();
        let h = extract_hyperplane(&res, &p).unwrap();
        assert_abs_diff_eq!(h.w[0], 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(h.b, -1.0, epsilon = 1e-7);
    }

    #[test]
    fn extract_requires_tags() {
        let mut p = ConicProgram::new();
        let x = p.add_nonneg("x");
        p.set_objective(x, 1.0);
        let res = SolveResult {
            status: Status::Optimal,
            objective: 0.0,
            values: vec![0.0],
            dual_objective: None,
            mip_gap: 0.0,
            node_count: 1,
            wall_time_s: 0.0,
            log: vec![],
        };
        assert!(matches!(extract_hyperplane(&res, &p).unwrap_err(), Error::MissingTags(_)));
    }

    #[test]
    fn cvar_bisection_separable() {
        let data = crate::data::Dataset::new(
            vec![vec![-2.0], vec![2.0]],
            vec![0, 1],
            vec![-1, 1],
        )
        .unwrap();
        let tol = 1e-3;
        let t = cvar_bisection(&data, (tol, 3.0), tol).unwrap();
        assert!(t <= tol, "separable data should give threshold ~0, got {t}");
    }

    #[test]
    fn cvar_bisection_matches_svm_value() {
        // Two points both misclassified by every (w,b)? Use coincident
        // opposite-label points: hinge optimum is 1 at w=0,b=0.
        let data = crate::data::Dataset::new(
            vec![vec![1.0], vec![1.0]],
            vec![0, 1],
            vec![1, -1],
        )
        .unwrap();
        // Independent LP for the SVM value.
        let mut p = ConicProgram::new();
        let w = p.add_free("w_0");
        let b = p.add_free("b");
        let mut obj_terms = Vec::new();
        for i in 0..2 {
            let u = p.add_nonneg(format!("u_{i}"));
            obj_terms.push(u);
            let y = data.label(i) as f64;
            p.add_constraint(
                format!("h_{i}"),
                vec![(u, -1.0), (w, -y * data.row(i)[0]), (b, -y)],
                Sense::Le,
                -1.0,
            );
        }
        for u in obj_terms {
            p.set_objective(u, 0.5);
        }
        p.tag("w", vec![w]);
        p.tag("b", vec![b]);
        let svm = solve_continuous(&p).unwrap().objective;
        let tol = 1e-4;
        let t = cvar_bisection(&data, (tol, svm + 1.0), tol).unwrap();
        assert!((t - svm).abs() <= 10.0 * tol, "t={t}, svm={svm}");
    }
}
