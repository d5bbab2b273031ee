//! Distributionally robust fair classification: linear classifiers trained
//! under equal-opportunity constraints that are hardened against feature,
//! group, and label perturbations, via exact conic and mixed-binary
//! reformulations.

pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod reformulate;
pub mod solve;

pub use data::{
    apply_scaler, gen_synthetic, gen_synthetic_with, group_index, load_csv, split, standardize,
    write_csv, CsvSchema, Dataset, GroupIndex, RotationKind, ScalerParams, CELLS,
};
pub use error::{Error, Result};
pub use experiment::{
    atomic_write, benchmark_runtime, cross_validate, evaluate, pareto_sweep, sweep_trial, train,
    write_bench_csv, write_frontier_csv, BenchRow, EvalReport, FrontierPoint, SweepGrid,
    SweepParam,
};
pub use model::{
    big_m, box_binding_warning, dual_norm_bound, export_text, parse_text, validate, BoxBounds,
    ConicProgram, LinExpr, LinearConstraint, Sense, SocConstraint, VarKind, Variable,
};
pub use reformulate::{
    build, build_chi2_pair, build_eps_drfc, build_eps_drfc_general, build_generalized_eps_drfc,
    build_hdrfc, build_hdrfc_general, build_svm, radius_schedule, ModelSpec, Variant,
};
pub use solve::{
    cvar_bisection, extract_hyperplane, solve, solve_continuous, solve_mip, SolveOptions,
    SolveResult, Status,
};
pub use metrics::{
    accuracy, cvar, eo_unfairness, hinge_unfairness, predict, worst_case_eps_unfairness,
    worst_case_hinge_loss, worst_case_misclass, Hyperplane, NormKind,
};
