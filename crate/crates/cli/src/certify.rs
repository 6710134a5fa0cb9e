//! Nonradiality certification for the unit-coefficient problem.
//!
//! Three ingredients are combined: the radial profile u_rad from the 1D
//! Newton solver, the first eigenvalue α₁ of the linearized radial pencil
//! (criterion α₁ + 2N < 0 means u_rad is unstable inside the cone), and a
//! full 2D solve started from an angularly biased bump.  Nonradiality is
//! claimed only when the converged candidate strictly beats the radial
//! action AND its angular variation is macroscopic — three orders of
//! magnitude above the grid tolerance — so a claim never rests on roundoff.

use std::path::Path;

use annulus_core::grid::AnnulusGrid;
use annulus_core::operators::OperatorSet;
use annulus_core::radial::{lift_radial, solve_radial};
use annulus_core::spectral::{alpha1_solve, nonradiality_certificate};
use serde::Serialize;

use crate::config::{InitialGuess, ProblemConfig, RunConfig};
use crate::output::{self, fmt17, write_json};
use crate::solve::{emit_failure, run_pipeline, write_artifacts};
use crate::Failure;

/// The persisted certification report.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateJson {
    pub problem: ProblemConfig,
    pub n1d: usize,
    /// First eigenvalue of the radial stability pencil.
    pub alpha1: f64,
    /// Certified residual bound of the eigen solve.
    pub eigen_residual: f64,
    /// α₁ + 2N; negative certifies instability of the radial profile.
    pub criterion: f64,
    pub nonradial_expected: bool,
    /// I''(u_rad)(v, v) for the separated instability direction v.
    pub second_variation_value: f64,
    /// second_variation / (criterion · ∫v²/|x|²); 1 when the 1D pencil and
    /// the 2D Hessian agree.
    pub crosscheck_ratio: Option<f64>,
    /// Action of the lifted radial profile on the 2D grid.
    pub radial_action: f64,
    /// Best explicit competitor action t·(u_rad + s·v), when expected.
    pub competitor_action: Option<f64>,
    pub competitor_scale: Option<f64>,
    /// Action of the converged ground-state candidate.
    pub candidate_action: f64,
    pub candidate_angular_variation: f64,
    /// Claim threshold on the angular variation: 10³ × grid tolerance.
    pub variation_threshold: f64,
    /// sup |candidate - lift(u_rad)| / ‖lift(u_rad)‖_∞.
    pub candidate_radial_distance: f64,
    pub claim_nonradial: bool,
    pub message: String,
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<(), Failure> {
    if !cfg.problem.weight.is_unit() {
        return Err(Failure::validation(
            "certify-nonradial requires the unit coefficient a ≡ 1 \
             (weight = {\"kind\": \"constant\", \"value\": 1.0})",
        ));
    }
    match certify_inner(cfg) {
        Ok(()) => Ok(()),
        Err(f) => {
            emit_failure(cfg, &f);
            Err(f)
        }
    }
}

fn certify_inner(cfg: &RunConfig) -> Result<(), Failure> {
    let params = cfg.problem.to_core();
    let n1d = cfg.grid.n1d;

    let rad = solve_radial(&params, n1d, cfg.tolerances.radial)
        .map_err(|e| Failure::solver("radial", e.to_string()))?;
    let mut spec =
        alpha1_solve(&rad, n1d).map_err(|e| Failure::solver("eigen", e.to_string()))?;

    let grid = AnnulusGrid::build(params.clone(), cfg.grid.nr, cfg.grid.ntheta)
        .map_err(|e| Failure::solver("grid", e.to_string()))?;
    let weight = params
        .weight
        .realize(&grid)
        .map_err(|e| Failure::solver("weight", e.to_string()))?;
    let ops = OperatorSet::assemble(&grid);
    let cert = nonradiality_certificate(&ops, &weight, &rad, &mut spec)
        .map_err(|e| Failure::solver("certificate", e.to_string()))?;

    // Ground-state candidate from an angularly biased start; the bias keeps
    // the symmetry-broken branch reachable whenever it carries lower action.
    let products = run_pipeline(cfg, InitialGuess::Bump)?;
    write_artifacts(cfg, &products)?;
    if products.record.outcome != "converged_fixed_point" {
        return Err(Failure::solver(
            "convergence",
            format!("candidate did not converge: flow {}", products.record.flow_outcome),
        ));
    }

    let lift = lift_radial(&grid, &rad).map_err(|e| Failure::solver("radial", e.to_string()))?;
    let lift_sup = lift.linf();
    let mut dist: f64 = 0.0;
    for (a, b) in products.field.values.iter().zip(&lift.values) {
        dist = dist.max((a - b).abs());
    }
    let candidate_radial_distance = dist / lift_sup;

    let candidate_action = products.record.energy.action;
    let angular_variation = products.record.angular_variation;
    let variation_threshold = 1e3 * products.record.cone.tolerance;

    let beats_radial = candidate_action < cert.radial_action - 1e-10;
    let macroscopic = angular_variation > variation_threshold;
    let claim = cert.criterion < 0.0 && beats_radial && macroscopic;
    let message = if claim {
        "nonradiality certified: the candidate beats the radial action and its angular \
         variation is macroscopic"
            .to_string()
    } else if cert.criterion >= 0.0 {
        "no certificate: criterion nonnegative, the radial profile is stable in the cone"
            .to_string()
    } else {
        format!(
            "no certificate: criterion negative but candidate checks failed \
             (beats_radial = {beats_radial}, macroscopic_variation = {macroscopic})"
        )
    };

    let report = CertificateJson {
        problem: cfg.problem.clone(),
        n1d,
        alpha1: spec.alpha1,
        eigen_residual: spec.residual,
        criterion: cert.criterion,
        nonradial_expected: cert.nonradial_expected,
        second_variation_value: cert.second_variation_value,
        crosscheck_ratio: cert.crosscheck_ratio,
        radial_action: cert.radial_action,
        competitor_action: cert.competitor_action,
        competitor_scale: cert.competitor_scale,
        candidate_action,
        candidate_angular_variation: angular_variation,
        variation_threshold,
        candidate_radial_distance,
        claim_nonradial: claim,
        message: message.clone(),
    };

    let dir = Path::new(&cfg.out_dir);
    write_json(&dir.join("certificate.json"), &report)
        .map_err(|e| Failure::solver("persist", e.to_string()))?;
    std::fs::write(dir.join("radial_profile.csv"), output::radial_csv(&rad))
        .map_err(|e| Failure::solver("persist", e.to_string()))?;

    println!("alpha1 {} | criterion {}", fmt17(report.alpha1), fmt17(report.criterion));
    println!(
        "radial action {} | candidate action {}",
        fmt17(report.radial_action),
        fmt17(report.candidate_action),
    );
    println!(
        "angular variation {} (claim threshold {}) | distance to radial {}",
        fmt17(report.candidate_angular_variation),
        fmt17(report.variation_threshold),
        fmt17(report.candidate_radial_distance),
    );
    println!("{message}");
    println!("wrote {}/certificate.json, {}/radial_profile.csv", cfg.out_dir, cfg.out_dir);
    Ok(())
}
