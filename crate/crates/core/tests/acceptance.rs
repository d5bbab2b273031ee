//! End-to-end acceptance gate: ten numbered criteria, each printing one
//! PASS/FAIL line. Run with `--nocapture` to see the lines on success.

use fairdro_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn report(criterion: u32, what: &str, ok: bool) {
    println!(
        "ACCEPTANCE {criterion} {}: {what}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance criterion {criterion} failed: {what}");
}

/// A random dataset guaranteed to have positives in both groups.
fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    assert!(n >= 2);
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut sens: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut labels: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    sens[0] = 0;
    labels[0] = 1;
    sens[1] = 1;
    labels[1] = 1;
    Dataset::new(rows, sens, labels).unwrap()
}

/// A random dataset with at least one sample in every (a, y) cell.
fn random_dataset_full_cells(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    assert!(n >= 4);
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut sens: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut labels: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    for (k, (a, y)) in CELLS.iter().enumerate() {
        sens[k] = *a;
        labels[k] = *y;
    }
    Dataset::new(rows, sens, labels).unwrap()
}

/// Exhaustive boxed grid search over (w, b) with 51 points per axis.
///
/// Returns (strict_best, relaxed_best, obj_var): the best objective over
/// grid points satisfying the constraint strictly, the best over points
/// satisfying it up to one grid cell's constraint variation, and the
/// largest objective jump between axis-adjacent grid points. The true
/// boxed optimum v satisfies relaxed_best − obj_var ≤ v ≤ strict_best up
/// to discretization.
fn grid_search(
    d: usize,
    half_width: f64,
    objective: &dyn Fn(&Hyperplane) -> f64,
    constraint: &dyn Fn(&Hyperplane) -> f64,
    cap: f64,
) -> (f64, f64, f64) {
    const PTS: usize = 51;
    let axis: Vec<f64> = (0..PTS)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (PTS - 1) as f64)
        .collect();
    assert!(d == 1 || d == 2, "grid search supports d in {{1, 2}}");
    let n_axes = d + 1;
    let total = PTS.pow(n_axes as u32);
    let mut vals = vec![0.0f64; total];
    let mut cons = vec![0.0f64; total];
    for idx in 0..total {
        let mut rem = idx;
        let mut coords = [0usize; 3];
        for c in (0..n_axes).rev() {
            coords[c] = rem % PTS;
            rem /= PTS;
        }
        let w: Vec<f64> = (0..d).map(|c| axis[coords[c]]).collect();
        let h = Hyperplane::new(w, axis[coords[d]]);
        vals[idx] = objective(&h);
        cons[idx] = constraint(&h);
    }
    // Largest jumps between axis-adjacent grid points. A point within one
    // cell of the grid can differ by up to half a step per axis, so scale
    // the slack by n_axes / 2.
    let mut obj_var: f64 = 0.0;
    let mut con_var: f64 = 0.0;
    let mut stride = 1;
    for _axis_id in 0..n_axes {
        for idx in 0..total {
            if (idx / stride) % PTS + 1 < PTS {
                let j = idx + stride;
                obj_var = obj_var.max((vals[idx] - vals[j]).abs());
                con_var = con_var.max((cons[idx] - cons[j]).abs());
            }
        }
        stride *= PTS;
    }
    let fac = n_axes as f64 / 2.0;
    let mut strict_best = f64::INFINITY;
    let mut relaxed_best = f64::INFINITY;
    for idx in 0..total {
        if cons[idx] <= cap + 1e-9 {
            strict_best = strict_best.min(vals[idx]);
        }
        if cons[idx] <= cap + fac * con_var + 1e-9 {
            relaxed_best = relaxed_best.min(vals[idx]);
        }
    }
    (strict_best, relaxed_best, fac * obj_var)
}

/// Criterion 1: reformulation optima match exhaustive grid search of the
/// closed-form evaluators, and re-evaluating at the returned classifier
/// reproduces the solver objective.
#[test]
fn criterion_1_reformulation_vs_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let half = 2.0;
    let mut ok = true;
    let mut detail = String::new();
    for inst in 0..200 {
        let n = rng.gen_range(4..=6);
        let d = rng.gen_range(1..=2);
        let data = random_dataset(&mut rng, n, d);
        let rho = rng.gen_range(0.0..0.3);

        // Hinge-loss variant (continuous program).
        let zeta = rng.gen_range(1.2..2.0);
        let mut spec = ModelSpec::new(Variant::Hdrfc);
        spec.zeta = Some(zeta);
        spec.rho = rho;
        let p = build_hdrfc(&data, &spec).unwrap();
        let res = solve_continuous(&p).unwrap();
        assert_eq!(res.status, Status::Optimal);
        let h = extract_hyperplane(&res, &p).unwrap();
        let re_eval = worst_case_hinge_loss(&h, &data, rho, spec.norm);
        // The hinge program is unboxed, so size the grid box to cover the
        // solver's optimizer with margin.
        let reach = h.w.iter().chain(std::iter::once(&h.b)).fold(0.0f64, |m, &v| m.max(v.abs()));
        let half_h = (1.2 * reach).max(half);
        let (strict, relaxed, obj_var) = grid_search(
            d,
            half_h,
            &|h| worst_case_hinge_loss(h, &data, rho, spec.norm),
            &|h| hinge_unfairness(h, &data, rho, spec.norm).unwrap(),
            zeta,
        );
        if (res.objective - re_eval).abs() > 1e-6
            || res.objective > strict + 1e-6
            || res.objective < relaxed - obj_var - 1e-6
        {
            ok = false;
            detail = format!(
                "hinge inst {inst}: solver {} re-eval {re_eval} grid [{relaxed}, {strict}] var {obj_var}",
                res.objective
            );
            break;
        }

        // Indicator-loss variant (mixed-binary program).
        let eta = rng.gen_range(0.3..1.0);
        let eps = 0.05;
        let mut spec = ModelSpec::new(Variant::EpsDrfc);
        spec.eta = Some(eta);
        spec.rho = rho;
        spec.eps = eps;
        spec.w_max = half;
        spec.b_max = half;
        let p = build_eps_drfc(&data, &spec).unwrap();
        let res = solve(&p, SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Optimal, "inst {inst}");
        let h = extract_hyperplane(&res, &p).unwrap();
        let re_eval = worst_case_misclass(&h, &data, rho, eps, spec.norm);
        let (strict, relaxed, obj_var) = grid_search(
            d,
            half,
            &|h| worst_case_misclass(h, &data, rho, eps, spec.norm),
            &|h| worst_case_eps_unfairness(h, &data, rho, eps, spec.norm).unwrap(),
            eta,
        );
        if (res.objective - re_eval).abs() > 1e-4
            || res.objective > strict + 1e-4
            || res.objective < relaxed - obj_var - 1e-4
        {
            ok = false;
            detail = format!(
                "indicator inst {inst}: solver {} re-eval {re_eval} grid [{relaxed}, {strict}] var {obj_var}",
                res.objective
            );
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok = ok && elapsed < 600.0;
    report(
        1,
        &format!("200 instances vs 51-point grid oracle in {elapsed:.1}s {detail}"),
        ok,
    );
}

/// Criterion 2: the robust optimum upper-bounds the empirical
/// misclassification rate of its own solution on the training data.
#[test]
fn criterion_2_conservative_upper_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..50 {
        let n = rng.gen_range(6..=14);
        let data = random_dataset(&mut rng, n, 2);
        let mut spec = ModelSpec::new(Variant::EpsDrfc);
        spec.eta = Some(rng.gen_range(0.2..1.0));
        spec.rho = rng.gen_range(0.0..0.3);
        spec.eps = 0.05;
        spec.w_max = 5.0;
        spec.b_max = 5.0;
        let p = build_eps_drfc(&data, &spec).unwrap();
        let res = solve(&p, SolveOptions::default()).unwrap();
        assert_eq!(res.status, Status::Optimal);
        let h = extract_hyperplane(&res, &p).unwrap();
        let empirical = 1.0 - accuracy(&h, &data);
        worst = worst.max(empirical - res.objective);
    }
    report(
        2,
        &format!("empirical error ≤ optimum + 1e-9 on 50 instances (max excess {worst:.2e})"),
        worst <= 1e-9,
    );
}

/// Criterion 3: the hinge unfairness surrogate never drops below one.
#[test]
fn criterion_3_hinge_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut low = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(4..=20);
        let d = rng.gen_range(1..=3);
        let data = random_dataset(&mut rng, n, d);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let h = Hyperplane::new(w, rng.gen_range(-3.0..3.0));
        let rho = rng.gen_range(0.0..0.5);
        let norm = [NormKind::L1, NormKind::L2, NormKind::Linf][rng.gen_range(0..3)];
        low = low.min(hinge_unfairness(&h, &data, rho, norm).unwrap());
    }
    report(
        3,
        &format!("hinge unfairness ≥ 1 on 1000 random triples (min {low:.12})"),
        low >= 1.0 - 1e-9,
    );
}

/// Criterion 4: bisection on the CVaR feasibility level recovers the
/// hinge-loss optimum.
#[test]
fn criterion_4_cvar_bisection_matches_hinge_optimum() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(8..=16);
        let data = random_dataset(&mut rng, n, 2);
        let svm = solve_continuous(&build_svm(&data).unwrap()).unwrap().objective;
        let tol = 1e-4;
        let t = cvar_bisection(&data, (tol, svm + 1.0), tol).unwrap();
        worst = worst.max((t - svm).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        4,
        &format!("bisection level vs hinge optimum, 20 datasets, max gap {worst:.2e}, {elapsed:.1}s"),
        worst <= 1e-3 && elapsed < 120.0,
    );
}

/// Criterion 5: the general-metric and distribution-shift builders collapse
/// to their feature-only counterparts in the appropriate limits, and the
/// hinge variant with no robustness or fairness pressure equals the plain
/// hinge program.
#[test]
fn criterion_5_reduction_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_a: f64 = 0.0;
    for k in 0..30 {
        let data = random_dataset_full_cells(&mut rng, 6 + k % 6, 2);
        let rho = rng.gen_range(0.05..0.5);
        let zeta = rng.gen_range(1.2..2.0);
        let mut base = ModelSpec::new(Variant::Hdrfc);
        base.zeta = Some(zeta);
        base.rho = rho;
        let v1 = solve_continuous(&build_hdrfc(&data, &base).unwrap()).unwrap().objective;
        let mut gen = ModelSpec::new(Variant::HdrfcGeneral);
        gen.zeta = Some(zeta);
        gen.rho = rho;
        gen.kappa_a = Some(rho + 0.5);
        gen.kappa_y = Some(rho + 0.5);
        gen.gamma = Some(0.5);
        let v2 =
            solve_continuous(&build_hdrfc_general(&data, &gen).unwrap()).unwrap().objective;
        worst_a = worst_a.max((v1 - v2).abs());
    }

    let mut worst_b: f64 = 0.0;
    for k in 0..20 {
        let data = random_dataset_full_cells(&mut rng, 6 + k % 5, 2);
        let rho = rng.gen_range(0.05..0.3);
        let eta = rng.gen_range(0.3..1.0);
        let mut base = ModelSpec::new(Variant::EpsDrfc);
        base.eta = Some(eta);
        base.rho = rho;
        base.w_max = 5.0;
        base.b_max = 5.0;
        let v1 = solve(&build_eps_drfc(&data, &base).unwrap(), SolveOptions::default())
            .unwrap()
            .objective;
        let mut gen = ModelSpec::new(Variant::EpsDrfcGeneral);
        gen.eta = Some(eta);
        gen.rho = rho;
        gen.w_max = 5.0;
        gen.b_max = 5.0;
        gen.kappa_a = Some(rho + 0.5);
        gen.kappa_y = Some(rho + 0.5);
        gen.gamma = Some(0.5);
        let v2 = solve(&build_eps_drfc_general(&data, &gen).unwrap(), SolveOptions::default())
            .unwrap()
            .objective;
        worst_b = worst_b.max((v1 - v2).abs());
    }

    let mut worst_c: f64 = 0.0;
    for k in 0..20 {
        let data = random_dataset_full_cells(&mut rng, 6 + k % 5, 2);
        let rho = rng.gen_range(0.05..0.3);
        let eta = rng.gen_range(0.3..1.0);
        let mut base = ModelSpec::new(Variant::EpsDrfc);
        base.eta = Some(eta);
        base.rho = rho;
        base.w_max = 5.0;
        base.b_max = 5.0;
        let v1 = solve(&build_eps_drfc(&data, &base).unwrap(), SolveOptions::default())
            .unwrap()
            .objective;
        let mut gen = ModelSpec::new(Variant::GeneralizedEpsDrfc);
        gen.eta = Some(eta);
        gen.w_max = 5.0;
        gen.b_max = 5.0;
        gen.rho_ay = Some([rho; 4]);
        gen.delta_p = Some(1e-10);
        let v2 =
            solve(&build_generalized_eps_drfc(&data, &gen).unwrap(), SolveOptions::default())
                .unwrap()
                .objective;
        worst_c = worst_c.max((v1 - v2).abs());
    }

    let mut worst_d: f64 = 0.0;
    for _ in 0..10 {
        let data = random_dataset(&mut rng, 10, 2);
        let svm = solve_continuous(&build_svm(&data).unwrap()).unwrap().objective;
        let mut spec = ModelSpec::new(Variant::Hdrfc);
        spec.zeta = Some(1e6);
        spec.rho = 0.0;
        let v = solve_continuous(&build_hdrfc(&data, &spec).unwrap()).unwrap().objective;
        worst_d = worst_d.max((v - svm).abs());
    }

    report(
        5,
        &format!(
            "reductions: general-hinge {worst_a:.2e} (≤1e-5), general-indicator {worst_b:.2e} (≤1e-4), \
             shift-collapse {worst_c:.2e} (≤1e-4), hinge-vs-plain {worst_d:.2e} (≤1e-8)"
        ),
        worst_a <= 1e-5 && worst_b <= 1e-4 && worst_c <= 1e-4 && worst_d <= 1e-8,
    );
}

/// Criterion 6: the χ²-ball linear-maximization primal and its dual agree.
#[test]
fn criterion_6_chi2_strong_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.gen_range(2..=6);
        let phi: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut p_hat: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = p_hat.iter().sum();
        for v in &mut p_hat {
            *v /= total;
        }
        let delta_p = rng.gen_range(0.01..2.0);
        let (primal, dual) = build_chi2_pair(&phi, &p_hat, delta_p).unwrap();
        // The primal is a maximization expressed as a negated minimization.
        let pv = -solve_continuous(&primal).unwrap().objective;
        let dv = solve_continuous(&dual).unwrap().objective;
        worst = worst.max((pv - dv).abs());
    }
    report(
        6,
        &format!("χ² primal/dual agree on 100 triples (max gap {worst:.2e})"),
        worst <= 1e-6,
    );
}

/// Criterion 7: optimal values move the right way in every robustness and
/// fairness knob.
#[test]
fn criterion_7_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    let mut check = |label: &str, values: &[f64], worst: &mut f64| {
        for k in 1..values.len() {
            let v = values[k - 1] - values[k];
            if v > *worst {
                *worst = v;
                if v > 1e-7 {
                    eprintln!("monotonicity violation in {label}: {values:?}");
                }
            }
        }
    };

    // Nondecreasing in the feature radius (hinge variant).
    for _ in 0..20 {
        let data = random_dataset(&mut rng, 10, 2);
        let vals: Vec<f64> = [0.0, 0.1, 0.2, 0.3, 0.4]
            .iter()
            .map(|&rho| {
                let mut spec = ModelSpec::new(Variant::Hdrfc);
                spec.zeta = Some(1.5);
                spec.rho = rho;
                solve_continuous(&build_hdrfc(&data, &spec).unwrap()).unwrap().objective
            })
            .collect();
        check("rho", &vals, &mut worst);
    }

    // Nondecreasing in the mass-move budget (general-metric hinge variant).
    for _ in 0..20 {
        let data = random_dataset_full_cells(&mut rng, 10, 2);
        let vals: Vec<f64> = [0.05, 0.25, 0.5, 0.75, 0.95]
            .iter()
            .map(|&gamma| {
                let mut spec = ModelSpec::new(Variant::HdrfcGeneral);
                spec.zeta = Some(1.5);
                spec.rho = 0.3;
                spec.kappa_a = Some(0.1);
                spec.kappa_y = Some(0.1);
                spec.gamma = Some(gamma);
                solve_continuous(&build_hdrfc_general(&data, &spec).unwrap())
                    .unwrap()
                    .objective
            })
            .collect();
        check("gamma", &vals, &mut worst);
    }

    // Nondecreasing in the marginal-shift radius (distribution-shift variant).
    let mut mip_opts = SolveOptions::default();
    mip_opts.mip_gap_tol = 1e-9;
    for _ in 0..20 {
        let data = random_dataset_full_cells(&mut rng, 6, 2);
        let vals: Vec<f64> = [1e-6, 0.01, 0.05, 0.1, 0.3]
            .iter()
            .map(|&dp| {
                let mut spec = ModelSpec::new(Variant::GeneralizedEpsDrfc);
                spec.eta = Some(0.8);
                spec.rho_ay = Some([0.1; 4]);
                spec.delta_p = Some(dp);
                spec.w_max = 5.0;
                spec.b_max = 5.0;
                solve(&build_generalized_eps_drfc(&data, &spec).unwrap(), mip_opts)
                    .unwrap()
                    .objective
            })
            .collect();
        check("delta_p", &vals, &mut worst);
    }

    // Nonincreasing in the unfairness budget (indicator variant): negate.
    for _ in 0..20 {
        let data = random_dataset_full_cells(&mut rng, 6, 2);
        let vals: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|&eta| {
                let mut spec = ModelSpec::new(Variant::EpsDrfc);
                spec.eta = Some(eta);
                spec.rho = 0.1;
                spec.w_max = 5.0;
                spec.b_max = 5.0;
                -solve(&build_eps_drfc(&data, &spec).unwrap(), mip_opts).unwrap().objective
            })
            .collect();
        check("eta", &vals, &mut worst);
    }

    // Nonincreasing in the hinge unfairness budget: negate.
    for _ in 0..20 {
        let data = random_dataset(&mut rng, 10, 2);
        let vals: Vec<f64> = [1.05, 1.2, 1.5, 2.0, 3.0]
            .iter()
            .map(|&zeta| {
                let mut spec = ModelSpec::new(Variant::Hdrfc);
                spec.zeta = Some(zeta);
                spec.rho = 0.2;
                -solve_continuous(&build_hdrfc(&data, &spec).unwrap()).unwrap().objective
            })
            .collect();
        check("zeta", &vals, &mut worst);
    }

    report(
        7,
        &format!("monotone in rho/gamma/delta_p/eta/zeta (max violation {worst:.2e})"),
        worst <= 1e-7,
    );
}

/// Criterion 8: across synthetic draws, the fairness-constrained hinge model
/// is fairer out of sample than the plain hinge model at a bounded accuracy
/// cost.
#[test]
fn criterion_8_synthetic_directional() {
    let start = Instant::now();
    let opts = SolveOptions::default();
    let mut unf_fair = Vec::new();
    let mut unf_plain = Vec::new();
    let mut acc_fair = Vec::new();
    let mut acc_plain = Vec::new();
    let mut seed = 0u64;
    while unf_fair.len() < 20 {
        let train_raw = gen_synthetic(50, seed);
        let test_raw = gen_synthetic(150, seed + 1000);
        seed += 1;
        if group_index(&train_raw).require_positive_groups().is_err()
            || group_index(&test_raw).require_positive_groups().is_err()
        {
            continue;
        }
        let (train_std, scaler) = standardize(&train_raw);
        let test_std = apply_scaler(&test_raw, &scaler);

        let mut fair = ModelSpec::new(Variant::Hdrfc);
        fair.zeta = Some(1.2);
        fair.rho = 0.25;
        let (h_fair, _) = train(&train_std, &fair, &opts).unwrap();
        let r_fair = evaluate(&h_fair, &test_std).unwrap();

        let plain = ModelSpec::new(Variant::Svm);
        let (h_plain, _) = train(&train_std, &plain, &opts).unwrap();
        let r_plain = evaluate(&h_plain, &test_std).unwrap();

        unf_fair.push(r_fair.eo_unfairness);
        unf_plain.push(r_plain.eo_unfairness);
        acc_fair.push(r_fair.accuracy);
        acc_plain.push(r_plain.accuracy);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mu_f, mu_p) = (mean(&unf_fair), mean(&unf_plain));
    let (ma_f, ma_p) = (mean(&acc_fair), mean(&acc_plain));
    let elapsed = start.elapsed().as_secs_f64();
    report(
        8,
        &format!(
            "20 seeds: unfairness {mu_f:.4} < {mu_p:.4}, accuracy {ma_f:.4} ≥ {:.4}, {elapsed:.1}s",
            ma_p - 0.15
        ),
        mu_f < mu_p && ma_f >= ma_p - 0.15 && elapsed < 600.0,
    );
}

/// Criterion 9: runtime envelope on synthetic data — the hinge variant at
/// N=1000 in under 10 s, the mixed-binary indicator variant at N=50 to a
/// 1e-4 absolute gap in under 5 min.
#[test]
fn criterion_9_runtime_envelope() {
    let (big, _) = standardize(&gen_synthetic(1000, 7));
    let mut spec = ModelSpec::new(Variant::Hdrfc);
    spec.zeta = Some(1.2);
    spec.rho = 0.25;
    let t0 = Instant::now();
    let p = build_hdrfc(&big, &spec).unwrap();
    let res = solve_continuous(&p).unwrap();
    let t_hinge = t0.elapsed().as_secs_f64();
    let hinge_ok = res.status == Status::Optimal && t_hinge < 10.0;

    let (small, _) = standardize(&gen_synthetic(50, 0));
    let mut spec = ModelSpec::new(Variant::EpsDrfc);
    spec.eta = Some(0.5);
    spec.rho = 0.05;
    spec.w_max = 5.0;
    spec.b_max = 5.0;
    let mut opts = SolveOptions::default();
    opts.mip_gap_tol = 1e-4;
    opts.time_limit_s = 290.0;
    let t0 = Instant::now();
    let p = build_eps_drfc(&small, &spec).unwrap();
    let res = solve(&p, opts).unwrap();
    let t_mip = t0.elapsed().as_secs_f64();
    let mip_ok = res.status == Status::Optimal && res.mip_gap <= 1e-4 && t_mip < 300.0;

    report(
        9,
        &format!("hinge N=1000 in {t_hinge:.2}s (<10), indicator N=50 gap {:.1e} in {t_mip:.2}s (<300)", res.mip_gap),
        hinge_ok && mip_ok,
    );
}

/// Criterion 10: the branch-and-bound solver equals brute-force enumeration
/// over every binary fixing on micro instances.
#[test]
fn criterion_10_mip_vs_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(4..=6);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let mut sens: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
        // Exactly two positives, one per group, keeps the binary count ≤ 12.
        let mut labels: Vec<i8> = vec![-1; n];
        sens[0] = 0;
        labels[0] = 1;
        sens[1] = 1;
        labels[1] = 1;
        let data = Dataset::new(rows, sens, labels).unwrap();

        let mut spec = ModelSpec::new(Variant::EpsDrfc);
        spec.eta = Some(rng.gen_range(0.2..0.9));
        spec.rho = rng.gen_range(0.0..0.3);
        spec.w_max = 5.0;
        spec.b_max = 5.0;
        let p = build_eps_drfc(&data, &spec).unwrap();
        let n_bin = p.n_binaries();
        assert!(n_bin <= 12, "instance has {n_bin} binaries");

        let mut opts = SolveOptions::default();
        opts.mip_gap_tol = 1e-9;
        let res = solve_mip(&p, opts).unwrap();
        assert_eq!(res.status, Status::Optimal);

        let binaries: Vec<usize> = (0..p.n_vars())
            .filter(|&v| p.variables[v].kind == VarKind::Binary)
            .collect();
        let relaxed = p.relaxed();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1u32 << n_bin) {
            let mut fixed = relaxed.clone();
            for (bit, &v) in binaries.iter().enumerate() {
                let val = ((mask >> bit) & 1) as f64;
                fixed.variables[v].lb = val;
                fixed.variables[v].ub = val;
            }
            if let Ok(sub) = solve_continuous(&fixed) {
                if sub.status == Status::Optimal {
                    best = best.min(sub.objective);
                }
            }
        }
        worst = worst.max((res.objective - best).abs());
    }
    report(
        10,
        &format!("branch-and-bound equals enumeration on 20 micro instances (max gap {worst:.2e})"),
        worst <= 1e-7,
    );
}
