//! The solve pipeline: initial datum → separatrix bisection → descent flow
//! → Newton polish → persisted solution record.
//!
//! The record carries everything needed to audit the run: the field itself,
//! the energy split with its Nehari residual, the cone-membership report at
//! the solver tolerance, the separatrix scale, and the flow trace as CSV.
//! The command succeeds (exit 0) only when the polish converged and the
//! final iterate passes the cone check.

use std::path::Path;

use annulus_core::cone::{check_cone, solver_tau, WeightFamily};
use annulus_core::energy;
use annulus_core::flow::{
    default_alpha, refine_fixed_point, separatrix_scale, FlowConfig, FlowTrace,
};
use annulus_core::grid::{AnnulusGrid, Field};
use annulus_core::operators::OperatorSet;
use annulus_core::radial::{lift_radial, solve_radial};
use serde::Serialize;
use std::sync::Arc;

use crate::config::{InitialGuess, ProblemConfig, RunConfig, WeightConfig};
use crate::output::{
    self, fmt17, outcome_str, write_json, ConeJson, EnergyJson, ErrorJson, FieldJson,
};
use crate::Failure;

/// Grid shape echo in the solution record.
#[derive(Debug, Clone, Serialize)]
pub struct GridJson {
    pub nr: usize,
    pub ntheta: usize,
    pub n1d: usize,
}

/// Newton-polish summary.
#[derive(Debug, Clone, Serialize)]
pub struct PolishJson {
    pub converged: bool,
    pub iterations: usize,
    /// ‖u - T(u)‖_{H¹} at the returned iterate.
    pub phi_norm: f64,
}

/// The persisted solution record.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionRecord {
    pub problem: ProblemConfig,
    pub grid: GridJson,
    pub seed: u64,
    /// Which initial datum the pipeline used ("radial" or "bump").
    pub initial: String,
    /// Ray scale t* located by the separatrix bisection.
    pub separatrix_scale: f64,
    /// Raw classification of the witness trajectory.
    pub flow_outcome: String,
    /// Accepted steps along the witness trajectory.
    pub flow_steps: usize,
    /// Final verdict: "converged_fixed_point" iff polish + cone pass.
    pub outcome: String,
    pub polish: PolishJson,
    pub energy: EnergyJson,
    /// Ray scale placing the solution on the constraint manifold; 1 at a
    /// fixed point.
    pub nehari_scale: f64,
    pub cone: ConeJson,
    /// Largest per-shell spread max_θ u - min_θ u; zero for radial fields.
    pub angular_variation: f64,
    pub field: FieldJson,
}

/// Everything the pipeline produced, for reuse by other commands.
pub struct SolveProducts {
    pub record: SolutionRecord,
    pub field: Field<f64>,
    pub trace: FlowTrace<f64>,
}

/// Positive latitude-monotone product bump with a mild angular bias.
///
/// The bias (factor 1 + cos²θ) keeps the datum inside the cone while giving
/// the flow a nonradial component, so symmetry breaking is reachable
/// whenever it pays.
fn bump_start(grid: &Arc<AnnulusGrid<f64>>) -> Field<f64> {
    let r0 = grid.params.inner_radius;
    let r1 = grid.params.outer_radius;
    let pi = std::f64::consts::PI;
    let mut psi = Field::from_fn(grid, |r, theta| {
        let s = (r - r0) / (r1 - r0);
        let c = theta.cos();
        (pi * s).sin() * (1.0 + c * c)
    });
    // sin(π·1) is only zero up to roundoff; the boundary must be exact.
    for j in 0..grid.ntheta {
        psi.set(0, j, 0.0);
        psi.set(grid.nr - 1, j, 0.0);
    }
    psi
}

/// Lift of the 1D radial profile, rescaled for a constant coefficient c:
/// if u solves the unit-coefficient problem, c^{-1/(p-2)}·u solves the
/// c-coefficient one.
fn radial_start(
    cfg: &RunConfig,
    grid: &Arc<AnnulusGrid<f64>>,
) -> Result<Field<f64>, Failure> {
    let params = cfg.problem.to_core();
    let rad = solve_radial(&params, cfg.grid.n1d, cfg.tolerances.radial)
        .map_err(|e| Failure::solver("radial", e.to_string()))?;
    let mut u = lift_radial(grid, &rad).map_err(|e| Failure::solver("radial", e.to_string()))?;
    if let WeightFamily::Constant { value } = params.weight {
        if value != 1.0 {
            u.scale(value.powf(-1.0 / (params.exponent - 2.0)));
        }
    }
    Ok(u)
}

/// Run the full pipeline with an explicit initial-datum choice.
pub fn run_pipeline(cfg: &RunConfig, initial: InitialGuess) -> Result<SolveProducts, Failure> {
    let params = cfg.problem.to_core();
    let grid = AnnulusGrid::build(params.clone(), cfg.grid.nr, cfg.grid.ntheta)
        .map_err(|e| Failure::solver("grid", e.to_string()))?;
    let weight = params
        .weight
        .realize(&grid)
        .map_err(|e| Failure::solver("weight", e.to_string()))?;
    let ops = OperatorSet::assemble(&grid);

    let alpha = match cfg.flow.alpha {
        Some(a) => a,
        None => default_alpha(&ops, &weight)
            .map_err(|e| Failure::solver("flow-setup", e.to_string()))?,
    };
    let fc = FlowConfig {
        dt0: cfg.flow.dt0,
        dt_min: cfg.flow.dt_min,
        dt_max: cfg.flow.dt_max,
        phi_tol: cfg.flow.phi_tol,
        alpha,
        t_max_time: cfg.flow.t_max_time,
        decay_action_floor: cfg.flow.decay_action_floor,
    };
    fc.validate().map_err(|e| Failure::solver("flow-setup", e.to_string()))?;

    let is_constant = matches!(cfg.problem.weight, WeightConfig::Constant { .. });
    let (mut psi, initial_used) = match initial {
        InitialGuess::Radial => (radial_start(cfg, &grid)?, "radial"),
        InitialGuess::Bump => (bump_start(&grid), "bump"),
        InitialGuess::Auto => {
            if is_constant {
                match radial_start(cfg, &grid) {
                    Ok(u) => (u, "radial"),
                    Err(_) => (bump_start(&grid), "bump"),
                }
            } else {
                (bump_start(&grid), "bump")
            }
        }
    };
    // Normalize ψ onto the Nehari set so the ray parameter is O(1) for any
    // exponent; near p = 2 the raw bump sits many orders of magnitude below
    // the fixed-point amplitude, and the bisection bracket would be huge.
    let nehari_t = energy::nehari_scale(&ops, &weight, &psi)
        .map_err(|e| Failure::solver("flow-setup", e.to_string()))?;
    psi.scale(nehari_t);

    let (t_star, trace) = separatrix_scale(&ops, &weight, &psi, &fc, cfg.tolerances.bisect)
        .map_err(|e| Failure::solver("separatrix", e.to_string()))?;
    let polish = refine_fixed_point(&ops, &weight, &trace.best_field, cfg.tolerances.polish)
        .map_err(|e| Failure::solver("polish", e.to_string()))?;

    let u = polish.field;
    let tau = solver_tau(&u);
    let cone = check_cone(&u, tau);
    let breakdown = energy::breakdown(&ops, &weight, &u)
        .map_err(|e| Failure::solver("measure", e.to_string()))?;
    let nehari = energy::nehari_scale(&ops, &weight, &u)
        .map_err(|e| Failure::solver("measure", e.to_string()))?;

    let converged = polish.converged && cone.in_cone;
    let record = SolutionRecord {
        problem: cfg.problem.clone(),
        grid: GridJson { nr: cfg.grid.nr, ntheta: cfg.grid.ntheta, n1d: cfg.grid.n1d },
        seed: cfg.seed,
        initial: initial_used.into(),
        separatrix_scale: t_star,
        flow_outcome: outcome_str(trace.outcome).into(),
        flow_steps: trace.samples.len(),
        outcome: if converged { "converged_fixed_point".into() } else { outcome_str(trace.outcome).into() },
        polish: PolishJson {
            converged: polish.converged,
            iterations: polish.iterations,
            phi_norm: polish.phi_norm,
        },
        energy: EnergyJson::from_breakdown(&breakdown),
        nehari_scale: nehari,
        cone: ConeJson::from_report(&cone, tau),
        angular_variation: u.angular_variation(),
        field: FieldJson::from_field(&cfg.problem, &u),
    };
    Ok(SolveProducts { record, field: u, trace })
}

/// Persist a pipeline failure as machine-readable JSON (best effort).
pub fn emit_failure(cfg: &RunConfig, f: &Failure) {
    let path = Path::new(&cfg.out_dir).join("error.json");
    let _ = write_json(&path, &ErrorJson::new(&f.stage, f.message.clone()));
}

/// Write the solution record and flow trace into the output directory.
pub fn write_artifacts(cfg: &RunConfig, products: &SolveProducts) -> Result<(), Failure> {
    let dir = Path::new(&cfg.out_dir);
    write_json(&dir.join("solution.json"), &products.record)
        .map_err(|e| Failure::solver("persist", e.to_string()))?;
    std::fs::write(dir.join("flow_trace.csv"), output::flow_trace_csv(&products.trace))
        .map_err(|e| Failure::solver("persist", e.to_string()))?;
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let products = match run_pipeline(cfg, cfg.solve.initial) {
        Ok(p) => p,
        Err(f) => {
            emit_failure(cfg, &f);
            return Err(f);
        }
    };
    write_artifacts(cfg, &products)?;

    let r = &products.record;
    println!(
        "solve: N = {}, p = {}, annulus [{}, {}], grid {}x{}, initial {}",
        r.problem.dim,
        fmt17(r.problem.exponent),
        fmt17(r.problem.inner_radius),
        fmt17(r.problem.outer_radius),
        r.grid.nr,
        r.grid.ntheta,
        r.initial,
    );
    println!(
        "separatrix scale {} | flow {} after {} accepted steps",
        fmt17(r.separatrix_scale),
        r.flow_outcome,
        r.flow_steps,
    );
    println!(
        "polish: converged = {}, iterations = {}, residual {}",
        r.polish.converged,
        r.polish.iterations,
        fmt17(r.polish.phi_norm),
    );
    println!(
        "action {} | nehari residual {} | cone pass = {}",
        fmt17(r.energy.action),
        fmt17(r.energy.nehari_residual),
        r.cone.in_cone,
    );
    println!("wrote {}/solution.json, {}/flow_trace.csv", cfg.out_dir, cfg.out_dir);

    if r.outcome != "converged_fixed_point" {
        let f = Failure::solver(
            "convergence",
            format!(
                "no converged fixed point: flow {}, polish converged = {}, cone pass = {}",
                r.flow_outcome, r.polish.converged, r.cone.in_cone
            ),
        );
        emit_failure(cfg, &f);
        return Err(f);
    }
    Ok(())
}
