//! Structural verification suites: each one checks an invariant the solver
//! machinery is built on, against an independent reference (closed form,
//! finite differences, Richardson extrapolation, or a dense eigensolver).
//!
//! The suites are self-consistency firewalls: a wrong assembly can fool the
//! differentiation checks (which compare the code with itself) but not the
//! eigencheck, the manufactured solution, or the volume identity — which is
//! exactly what the `--fault-inject` flag demonstrates.

use std::sync::Arc;
use std::time::Instant;

use annulus_core::cone::{
    check_cone, sample_cone, slice_domination_defect, WeightFamily,
};
use annulus_core::energy;
use annulus_core::grid::{integrate, AnnulusGrid, Field, ProblemParams};
use annulus_core::measure::unit_sphere_area;
use annulus_core::operators::{AssemblyFault, OperatorSet};
use annulus_core::radial::{solve_radial, RadialSolution};
use annulus_core::resolvent::{apply_t, resolvent};
use annulus_core::spectral::{alpha1_solve, stability_pencil_data};

use crate::config::RunConfig;
use crate::{Failure, EXIT_VERIFY};

/// Immutable inputs shared by all suites.
struct Ctx {
    nr: usize,
    ntheta: usize,
    seed: u64,
    fault: Option<AssemblyFault>,
}

impl Ctx {
    fn params(&self, weight: WeightFamily<f64>) -> ProblemParams<f64> {
        ProblemParams {
            dim: 3,
            exponent: 4.0,
            inner_radius: 1.0,
            outer_radius: 2.0,
            weight,
        }
    }

    fn grid(&self, nr: usize, ntheta: usize) -> Result<Arc<AnnulusGrid<f64>>, String> {
        AnnulusGrid::build(self.params(WeightFamily::Constant { value: 1.0 }), nr, ntheta)
            .map_err(|e| e.to_string())
    }

    fn ops(&self, grid: &Arc<AnnulusGrid<f64>>) -> OperatorSet<f64> {
        OperatorSet::assemble_with(grid, self.fault)
    }
}

type SuiteFn = fn(&Ctx) -> Result<String, String>;

/// Registry of all suites, in execution order.
const SUITES: &[(&str, SuiteFn)] = &[
    ("cone-axioms", suite_cone_axioms),
    ("slice-domination", suite_slice_domination),
    ("t-cone-invariance", suite_t_cone_invariance),
    ("dissipation", suite_dissipation),
    ("gradient-fd", suite_gradient_fd),
    ("hessian-fd", suite_hessian_fd),
    ("laplace-beltrami", suite_laplace_beltrami),
    ("quadrature-volume", suite_quadrature_volume),
    ("manufactured-convergence", suite_manufactured_convergence),
    ("eigen-dense-oracle", suite_eigen_dense_oracle),
];

/// Known fault names for `--fault-inject`.
fn parse_fault(name: &str) -> Result<AssemblyFault, String> {
    match name {
        "negate-angular-flux" => Ok(AssemblyFault::NegateAngularFlux),
        other => Err(format!(
            "unknown fault '{other}'; available faults: negate-angular-flux"
        )),
    }
}

/// Outcome of one suite run.
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Run the selected suites; empty `selection` means all.
pub fn run_suites(
    cfg: &RunConfig,
    selection: &[String],
    fault: Option<AssemblyFault>,
) -> Vec<SuiteReport> {
    let ctx = Ctx { nr: cfg.grid.nr, ntheta: cfg.grid.ntheta, seed: cfg.seed, fault };
    let mut reports = Vec::new();
    for (name, f) in SUITES {
        if !selection.is_empty() && !selection.iter().any(|s| s == name) {
            continue;
        }
        let start = Instant::now();
        let outcome = f(&ctx);
        let seconds = start.elapsed().as_secs_f64();
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        reports.push(SuiteReport { name, passed, detail, seconds });
    }
    reports
}

pub fn cmd_verify(
    cfg: &RunConfig,
    selection: &[String],
    fault_name: Option<&str>,
) -> Result<(), Failure> {
    let fault = match fault_name {
        Some(name) => Some(parse_fault(name).map_err(Failure::validation)?),
        None => None,
    };
    if !selection.is_empty() {
        let known: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
        if !selection.iter().any(|s| known.contains(&s.as_str())) {
            println!("warning: suite selection matches nothing; 0 suites run");
            return Ok(());
        }
    }

    let reports = run_suites(cfg, selection, fault);
    println!("{:<26} {:<6} {:>8}  detail", "suite", "result", "seconds");
    for r in &reports {
        println!(
            "{:<26} {:<6} {:>8.2}  {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.seconds,
            r.detail,
        );
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    println!(
        "{} suites run: {} passed, {} failed",
        reports.len(),
        reports.len() - failed.len(),
        failed.len(),
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            stage: "verify".into(),
            message: format!("failed suites: {}", failed.join(", ")),
        })
    }
}

/// Deterministic mid-amplitude cone field used by the calculus suites.
fn reference_state(
    ops: &OperatorSet<f64>,
    weight: &Field<f64>,
    grid: &Arc<AnnulusGrid<f64>>,
) -> Result<Field<f64>, String> {
    let r0 = grid.params.inner_radius;
    let r1 = grid.params.outer_radius;
    let pi = std::f64::consts::PI;
    let mut u = Field::from_fn(grid, |r, theta| {
        let s = (r - r0) / (r1 - r0);
        let c = theta.cos();
        (pi * s).sin() * (1.0 + 0.5 * c * c)
    });
    for j in 0..grid.ntheta {
        u.set(0, j, 0.0);
        u.set(grid.nr - 1, j, 0.0);
    }
    let t = energy::nehari_scale(ops, weight, &u).map_err(|e| e.to_string())?;
    u.scale(0.9 * t);
    Ok(u)
}

/// Samples pass membership and the cone is closed under positive scaling
/// and addition.
fn suite_cone_axioms(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let samples = sample_cone(&g, 12, ctx.seed);
    for (k, u) in samples.iter().enumerate() {
        let tau = 1e-12 * (1.0 + u.linf());
        if !check_cone(u, tau).in_cone {
            return Err(format!("sample {k} fails membership at tau = {tau:.3e}"));
        }
        let mut scaled = u.clone();
        scaled.scale(3.7);
        if !check_cone(&scaled, 3.7 * tau).in_cone {
            return Err(format!("positive scaling left the cone at sample {k}"));
        }
    }
    for pair in samples.windows(2) {
        let w = pair[0].plus_scaled(1.7, &pair[1]);
        let tau = 1e-12 * (1.0 + w.linf());
        if !check_cone(&w, tau).in_cone {
            return Err("positive combination left the cone".into());
        }
    }
    Ok(format!("{} samples closed under scaling and addition", samples.len()))
}

/// The equatorial slice dominates every latitude slice pointwise.
fn suite_slice_domination(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let mut worst: f64 = 0.0;
    for u in sample_cone(&g, 12, ctx.seed ^ 0x51) {
        worst = worst.max(slice_domination_defect(&u) / (1.0 + u.linf()));
    }
    if worst <= 1e-12 {
        Ok(format!("max relative defect {worst:.2e}"))
    } else {
        Err(format!("equator domination violated, relative defect {worst:.2e}"))
    }
}

/// T maps the cone into itself, across coefficient families.
fn suite_t_cone_invariance(ctx: &Ctx) -> Result<String, String> {
    let families = [
        WeightFamily::Constant { value: 1.0 },
        WeightFamily::RadialProfile { slope: 0.5 },
        WeightFamily::AngularProfile { eps: 0.5, power: 2 },
    ];
    let mut applications = 0usize;
    for (fi, fam) in families.iter().enumerate() {
        let g = AnnulusGrid::build(ctx.params(fam.clone()), ctx.nr, ctx.ntheta)
            .map_err(|e| e.to_string())?;
        let ops = ctx.ops(&g);
        let a = fam.realize(&g).map_err(|e| e.to_string())?;
        for (si, u) in sample_cone(&g, 50, ctx.seed + 1000 * fi as u64).iter().enumerate() {
            let (tu, _) = apply_t(&ops, &a, u, None)
                .map_err(|e| format!("family {fi}, sample {si}: {e}"))?;
            let tau = 1e-8 * tu.linf();
            let rep = check_cone(&tu, tau);
            if !rep.in_cone {
                return Err(format!(
                    "family {fi}, sample {si}: output left the cone at tau = {tau:.3e}"
                ));
            }
            applications += 1;
        }
    }
    Ok(format!("{applications} applications stayed in the cone"))
}

/// One explicit Euler step dissipates action at rate ‖u - T(u)‖²; the
/// first-order defect halves when the step halves.
fn suite_dissipation(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let ops = ctx.ops(&g);
    let w = g.params.weight.realize(&g).map_err(|e| e.to_string())?;
    let u = reference_state(&ops, &w, &g)?;
    let (tu, _) = apply_t(&ops, &w, &u, None).map_err(|e| e.to_string())?;
    let phi = u.plus_scaled(-1.0, &tu);
    let phi2 = ops.h1_norm_sq(&phi).map_err(|e| e.to_string())?;
    let act0 = energy::action(&ops, &w, &u).map_err(|e| e.to_string())?;

    let defect = |dt: f64| -> Result<f64, String> {
        let trial = u.plus_scaled(-dt, &phi);
        let act1 = energy::action(&ops, &w, &trial).map_err(|e| e.to_string())?;
        Ok(((act0 - act1) / dt - phi2).abs() / phi2)
    };
    let d1 = defect(0.1)?;
    let d2 = defect(0.05)?;
    let d3 = defect(0.025)?;
    if d2 / d1 < 0.7 && d3 / d2 < 0.7 {
        Ok(format!("defect {d1:.2e} -> {d2:.2e} -> {d3:.2e} under step halving"))
    } else {
        Err(format!(
            "dissipation defect not first order: {d1:.3e} -> {d2:.3e} -> {d3:.3e}"
        ))
    }
}

/// Directional derivative of the action against central differences.
fn suite_gradient_fd(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let ops = ctx.ops(&g);
    let w = g.params.weight.realize(&g).map_err(|e| e.to_string())?;
    let u = reference_state(&ops, &w, &g)?;
    let dirs = sample_cone(&g, 3, ctx.seed ^ 0x9d);
    let mut worst: f64 = 0.0;
    for v in &dirs {
        let exact = energy::first_variation(&ops, &w, &u, v).map_err(|e| e.to_string())?;
        let eps = 1e-5 * (1.0 + u.linf()) / (1.0 + v.linf());
        let ip = energy::action(&ops, &w, &u.plus_scaled(eps, v)).map_err(|e| e.to_string())?;
        let im = energy::action(&ops, &w, &u.plus_scaled(-eps, v)).map_err(|e| e.to_string())?;
        let fd = (ip - im) / (2.0 * eps);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    if worst <= 1e-5 {
        Ok(format!("max relative error {worst:.2e} over {} directions", dirs.len()))
    } else {
        Err(format!("gradient mismatch: relative error {worst:.2e} > 1e-5"))
    }
}

/// Second variation against second differences of the action.
fn suite_hessian_fd(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let ops = ctx.ops(&g);
    let w = g.params.weight.realize(&g).map_err(|e| e.to_string())?;
    let u = reference_state(&ops, &w, &g)?;
    let dirs = sample_cone(&g, 3, ctx.seed ^ 0x2f);
    let i0 = energy::action(&ops, &w, &u).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for v in &dirs {
        let exact = energy::second_variation(&ops, &w, &u, v).map_err(|e| e.to_string())?;
        let eps = 1e-3 * (1.0 + u.linf()) / (1.0 + v.linf());
        let ip = energy::action(&ops, &w, &u.plus_scaled(eps, v)).map_err(|e| e.to_string())?;
        let im = energy::action(&ops, &w, &u.plus_scaled(-eps, v)).map_err(|e| e.to_string())?;
        let fd = (ip - 2.0 * i0 + im) / (eps * eps);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    if worst <= 1e-4 {
        Ok(format!("max relative error {worst:.2e} over {} directions", dirs.len()))
    } else {
        Err(format!("second-variation mismatch: relative error {worst:.2e} > 1e-4"))
    }
}

/// The discrete sphere operator reproduces -Δ_{S²}Y = 6Y for the degree-two
/// harmonic Y = 1 - 3sin²θ, at second order away from the poles.
fn suite_laplace_beltrami(ctx: &Ctx) -> Result<String, String> {
    let residual = |nr: usize, nt: usize| -> Result<f64, String> {
        let g = ctx.grid(nr, nt)?;
        let ops = ctx.ops(&g);
        let y = Field::from_fn(&g, |_, t| 1.0 - 3.0 * t.sin().powi(2));
        let lb = ops.apply_laplace_beltrami(&y);
        let mut sup: f64 = 0.0;
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                if g.theta_nodes[j].abs() <= 1.2 {
                    sup = sup.max((lb.at(i, j) - 6.0 * y.at(i, j)).abs());
                }
            }
        }
        Ok(sup)
    };
    let coarse = residual(ctx.nr, ctx.ntheta)?;
    let fine = residual(2 * ctx.nr - 1, 2 * ctx.ntheta - 1)?;
    let ratio = coarse / fine;
    if ratio > 3.0 && coarse < 2.0 {
        Ok(format!("residual {coarse:.2e} -> {fine:.2e} under refinement (ratio {ratio:.2})"))
    } else {
        Err(format!(
            "eigencheck failed: residual {coarse:.3e} -> {fine:.3e} (ratio {ratio:.2})"
        ))
    }
}

/// The product quadrature integrates constants to the exact annulus volume.
fn suite_quadrature_volume(ctx: &Ctx) -> Result<String, String> {
    let g = ctx.grid(ctx.nr, ctx.ntheta)?;
    let ones = Field::from_fn(&g, |_, _| 1.0);
    let vol = integrate(&g, &ones).map_err(|e| e.to_string())?;
    let n = g.params.dim;
    let exact = unit_sphere_area::<f64>(n - 1)
        * (g.params.outer_radius.powi(n as i32) - g.params.inner_radius.powi(n as i32))
        / n as f64;
    let rel = (vol - exact).abs() / exact;
    if rel <= 1e-12 {
        Ok(format!("relative error {rel:.2e} (requirement is O(h²))"))
    } else {
        Err(format!("volume off by relative {rel:.3e}: {vol} vs exact {exact}"))
    }
}

/// The resolvent reproduces a manufactured radial solution at second order.
fn suite_manufactured_convergence(ctx: &Ctx) -> Result<String, String> {
    let pi = std::f64::consts::PI;
    let sol = |r: f64| (pi * (r - 1.0)).sin();
    let rhs = |r: f64| {
        pi * pi * (pi * (r - 1.0)).sin() - (2.0 / r) * pi * (pi * (r - 1.0)).cos()
            + (pi * (r - 1.0)).sin()
    };
    let mut sups = Vec::new();
    for n in [17usize, 33, 65] {
        let g = ctx.grid(n, 9)?;
        let ops = ctx.ops(&g);
        let f = Field::from_fn(&g, |r, _| rhs(r));
        let (u, stats) = resolvent(&ops, &f, None).map_err(|e| e.to_string())?;
        if !(stats.rel_residual <= 1e-10) {
            return Err(format!("inner solve stalled at residual {:.3e}", stats.rel_residual));
        }
        let mut sup: f64 = 0.0;
        for i in 0..g.nr {
            for j in 0..g.ntheta {
                sup = sup.max((u.at(i, j) - sol(g.r_nodes[i])).abs());
            }
        }
        sups.push(sup);
    }
    let order1 = (sups[0] / sups[1]).log2();
    let order2 = (sups[1] / sups[2]).log2();
    if order1 > 1.8 && order2 > 1.8 {
        Ok(format!("observed orders {order1:.2} / {order2:.2}"))
    } else {
        Err(format!("convergence orders {order1:.2} / {order2:.2} below 1.8, sups {sups:?}"))
    }
}

/// Smallest pencil eigenvalue from a dense eigensolver on the same matrices.
fn dense_alpha1(rad: &RadialSolution<f64>, n1d: usize) -> Result<f64, String> {
    let (diag, off, mass) = stability_pencil_data(rad, n1d).map_err(|e| e.to_string())?;
    let m = diag.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        a[(k, k)] = diag[k] / mass[k];
        if k + 1 < m {
            let c = off[k] / (mass[k] * mass[k + 1]).sqrt();
            a[(k, k + 1)] = c;
            a[(k + 1, k)] = c;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(a);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Certified inverse iteration against a dense eigensolver, with and
/// without the nonlinear potential.
fn suite_eigen_dense_oracle(ctx: &Ctx) -> Result<String, String> {
    let params = ctx.params(WeightFamily::Constant { value: 1.0 });
    let n1d = 129;

    // Zero potential: the pencil reduces to a fixed coefficient problem.
    let h = 1.0 / 32.0;
    let zero = RadialSolution {
        r_nodes: (0..33).map(|k| 1.0 + k as f64 * h).collect(),
        values: vec![0.0; 33],
        residual_norm: 0.0,
        params: params.clone(),
    };
    let mut diffs = Vec::new();
    for rad in [zero, solve_radial(&params, n1d, 1e-9).map_err(|e| e.to_string())?] {
        let spec = alpha1_solve(&rad, n1d).map_err(|e| e.to_string())?;
        let dense = dense_alpha1(&rad, n1d)?;
        let diff = (spec.alpha1 - dense).abs() / (1.0 + dense.abs());
        if diff > 1e-8 {
            return Err(format!(
                "iterative {} vs dense {} differ by relative {diff:.3e}",
                spec.alpha1, dense
            ));
        }
        diffs.push(diff);
    }
    Ok(format!("relative agreement {:.2e} / {:.2e}", diffs[0], diffs[1]))
}
