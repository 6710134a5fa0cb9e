//! Linearized stability of the radial profile and the nonradiality criterion.
//!
//! Linearizing the PDE at the positive radial solution u and separating the
//! angular variable with the degree-two axisymmetric spherical harmonic
//! Y(θ) = 1 - N sin²θ (eigenvalue 2N of -Δ_{S^{N-1}}) reduces the second
//! variation to a weighted radial eigenvalue problem
//!
//! ```text
//!   -w'' - (N-1)/r · w' + (1 - (p-1) u^{p-2}) w = (α / r²) w ,   w(R0)=w(R1)=0 .
//! ```
//!
//! In self-adjoint form (multiply by r^{N-1}) this is a symmetric tridiagonal
//! pencil A w = α M w with M = diag(∫ r^{N-3}), assembled with the same
//! flux-form conventions as everything else.  If the first eigenvalue α₁
//! satisfies α₁ + 2N < 0, then v = w(r)·Y(θ) is a direction of negative
//! second variation at the radial profile:
//!
//! ```text
//!   I''(u)(v, v) = (α₁ + 2N) · ∫ v²/|x|² dx < 0 ,
//! ```
//!
//! so the least-action solution cannot be radial.  This module computes α₁
//! by certified inverse iteration, builds v, evaluates the criterion with an
//! independent 2D cross-check, and sweeps parameters to locate where the
//! criterion changes sign.

use crate::energy;
use crate::grid::{AnnulusGrid, Field, ProblemParams};
use crate::interp::CubicSpline;
use crate::operators::OperatorSet;
use crate::radial::{lift_radial, solve_radial, Radial1d, RadialSolution};
use crate::tridiag;
use crate::{Error, Real, Result};
use std::sync::Arc;

/// First eigenpair of the radial stability pencil.
#[derive(Debug, Clone)]
pub struct SpectralResult<T> {
    /// Radii of the eigen mesh (endpoints included).
    pub r_nodes: Vec<T>,
    /// First eigenfunction, positive inside, zero at the ends, normalized
    /// so that ∫ w²/r² · r^{N-1} dr = 1.
    pub w: Vec<T>,
    /// First eigenvalue α₁.
    pub alpha1: T,
    /// Instability criterion α₁ + 2N.
    pub criterion: T,
    /// Certified residual bound: |α₁ - ρ| ≤ residual for the returned ρ.
    pub residual: T,
    /// I''(u_rad)(v, v) evaluated through the 2D energy module; filled by
    /// the certificate step.
    pub second_variation_value: Option<T>,
    /// second_variation_value / (criterion · ∫ v²/|x|²); ≈ 1 when the 1D and
    /// 2D discretizations agree.  Filled by the certificate step.
    pub crosscheck_ratio: Option<T>,
}

/// Symmetric tridiagonal pencil (A, M) of the stability problem on the
/// interior nodes of a 1D mesh, with the radial profile interpolated onto
/// that mesh.  Returns (diag A, off A, diag M).
fn stability_pencil<T: Real>(
    mesh: &Radial1d<T>,
    rad: &RadialSolution<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let n = mesh.nodes.len();
    let p = rad.params.exponent;
    let spline = CubicSpline::fit(&rad.r_nodes, &rad.values)?;
    let pm2 = p - T::of(2.0);
    let mut diag = Vec::with_capacity(n - 2);
    let mut off = Vec::with_capacity(n - 3);
    let mut mass = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let u = spline.eval(mesh.nodes[k]).max(T::zero());
        let pot = if u == T::zero() { T::zero() } else { (p - T::one()) * u.powf(pm2) };
        diag.push(mesh.faces[k - 1] + mesh.faces[k] + mesh.cells[k] * (T::one() - pot));
        if k < n - 2 {
            off.push(-mesh.faces[k]);
        }
        mass.push(mesh.cells_inv2[k]);
    }
    Ok((diag, off, mass))
}

/// The stability pencil on `n1d` uniform nodes as flat tridiagonal data:
/// (diag A, offdiag A, diag M) over the interior nodes.  Exposed so
/// external oracles (dense eigensolvers) can check [`alpha1_solve`] against
/// the exact same discrete problem.
pub fn stability_pencil_data<T: Real>(
    rad: &RadialSolution<T>,
    n1d: usize,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let mesh = Radial1d::build(&rad.params, n1d)?;
    stability_pencil(&mesh, rad)
}

/// Rayleigh quotient of the pencil at x.
fn rayleigh<T: Real>(diag: &[T], off: &[T], mass: &[T], x: &[T]) -> T {
    let m = x.len();
    let mut num = T::zero();
    let mut den = T::zero();
    for k in 0..m {
        let mut ax = diag[k] * x[k];
        if k > 0 {
            ax = ax + off[k - 1] * x[k - 1];
        }
        if k + 1 < m {
            ax = ax + off[k] * x[k + 1];
        }
        num = num + x[k] * ax;
        den = den + mass[k] * x[k] * x[k];
    }
    num / den
}

/// Residual bound ‖A x - ρ M x‖_{M⁻¹} / ‖x‖_M; bounds the distance from ρ
/// to the nearest eigenvalue of the symmetric pencil.
fn residual_bound<T: Real>(diag: &[T], off: &[T], mass: &[T], x: &[T], rho: T) -> T {
    let m = x.len();
    let mut num = T::zero();
    let mut den = T::zero();
    for k in 0..m {
        let mut ax = diag[k] * x[k];
        if k > 0 {
            ax = ax + off[k - 1] * x[k - 1];
        }
        if k + 1 < m {
            ax = ax + off[k] * x[k + 1];
        }
        let r = ax - rho * mass[k] * x[k];
        num = num + r * r / mass[k];
        den = den + mass[k] * x[k] * x[k];
    }
    (num / den).sqrt()
}

/// Sturm count: eigenvalues of the pencil strictly below `shift`, via the
/// congruent standard tridiagonal M^{-1/2} A M^{-1/2}.
fn pencil_eigs_below<T: Real>(diag: &[T], off: &[T], mass: &[T], shift: T) -> usize {
    let m = diag.len();
    let d: Vec<T> = (0..m).map(|k| diag[k] / mass[k]).collect();
    let e: Vec<T> = (0..m.saturating_sub(1))
        .map(|k| off[k] / (mass[k] * mass[k + 1]).sqrt())
        .collect();
    tridiag::eigs_below(&d, &e, shift)
}

/// Solve for the first eigenpair of the stability pencil on an `n1d`-node
/// mesh, interpolating the radial profile onto it.
///
/// Inverse iteration with a shift certified below α₁: the shift is the lesser
/// of the minimum Rayleigh quotient over 8 probe profiles and a Gershgorin-
/// style bound min_k (cell·potential)/(mass), minus one.  Convergence is
/// declared only when the symmetric residual bound is small AND a Sturm count
/// brackets exactly one eigenvalue around the estimate.
pub fn alpha1_solve<T: Real>(rad: &RadialSolution<T>, n1d: usize) -> Result<SpectralResult<T>> {
    let mesh = Radial1d::build(&rad.params, n1d)?;
    let (diag, off, mass) = stability_pencil(&mesh, rad)?;
    let m = diag.len();
    let nodes = &mesh.nodes;
    let width = nodes[n1d - 1] - nodes[0];

    // 8 probe vectors: the first eight Dirichlet sine modes.
    let mut min_rq = T::infinity();
    for k in 1..=8usize {
        let probe: Vec<T> = (1..n1d - 1)
            .map(|i| (T::of(k as f64) * T::PI() * (nodes[i] - nodes[0]) / width).sin())
            .collect();
        min_rq = min_rq.min(rayleigh(&diag, &off, &mass, &probe));
    }
    // Quadratic-form lower bound: xᵀAx ≥ Σ (diag - |off| row sum) x², so
    // α₁ ≥ min_k (diag_k - neighbor couplings)/mass_k.
    let mut lower = T::infinity();
    for k in 0..m {
        let mut d = diag[k];
        if k > 0 {
            d = d - off[k - 1].abs();
        }
        if k + 1 < m {
            d = d - off[k].abs();
        }
        lower = lower.min(d / mass[k]);
    }
    let mut shift = min_rq.min(lower) - T::one();

    // Inverse iteration from the all-ones profile (positive overlap with the
    // Perron eigenvector is guaranteed).
    let mut x = vec![T::one(); m];
    let mut rho = rayleigh(&diag, &off, &mass, &x);
    let mut bound = T::infinity();
    let tol = T::of(1e-11) * (T::one() + rho.abs());
    let mut converged = false;
    for it in 0..300 {
        // (A - shift M) y = M x
        let sd: Vec<T> = (0..m).map(|k| diag[k] - shift * mass[k]).collect();
        let rhs: Vec<T> = (0..m).map(|k| mass[k] * x[k]).collect();
        let y = tridiag::solve(&off, &sd, &off, &rhs)
            .map_err(|e| Error::EigenStagnation(format!("inner solve failed: {e}")))?;
        let norm = {
            let mut acc = T::zero();
            for k in 0..m {
                acc = acc + mass[k] * y[k] * y[k];
            }
            acc.sqrt()
        };
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::EigenStagnation("iterate collapsed".into()));
        }
        x = y.into_iter().map(|v| v / norm).collect();
        rho = rayleigh(&diag, &off, &mass, &x);
        bound = residual_bound(&diag, &off, &mass, &x, rho);
        let tol_now = T::of(1e-11) * (T::one() + rho.abs());
        if bound <= tol_now {
            converged = true;
            break;
        }
        // After a settling phase, pull the shift toward the estimate to
        // accelerate, keeping it certified below by the residual bound.
        if it >= 10 && it % 5 == 0 {
            let guard = (bound * T::of(100.0)).max(T::of(1e-6) * (T::one() + rho.abs()));
            shift = shift.max(rho - guard);
        }
    }
    if !converged && bound > tol * T::of(100.0) {
        return Err(Error::EigenStagnation(format!(
            "inverse iteration stalled: residual bound {bound} at estimate {rho}"
        )));
    }

    // Certify the estimate is the FIRST eigenvalue: exactly one below ρ+δ,
    // none below ρ-δ.
    let delta = (bound + T::of(1e-9) * (T::one() + rho.abs())) * T::of(2.0);
    let below_hi = pencil_eigs_below(&diag, &off, &mass, rho + delta);
    let below_lo = pencil_eigs_below(&diag, &off, &mass, rho - delta);
    if below_hi != 1 || below_lo != 0 {
        return Err(Error::EigenStagnation(format!(
            "Sturm bracket [{below_lo}, {below_hi}] does not isolate the first eigenvalue at {rho}"
        )));
    }

    // Positive sign normalization, then strict interior positivity.
    let mut idx_max = 0usize;
    for k in 1..m {
        if x[k].abs() > x[idx_max].abs() {
            idx_max = k;
        }
    }
    if x[idx_max] < T::zero() {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
    if !x.iter().all(|&v| v > T::zero()) {
        return Err(Error::EigenStagnation(
            "first eigenfunction is not strictly positive on the interior".into(),
        ));
    }

    // w with zero endpoints, M-normalized (the iteration already normalizes).
    let mut w = vec![T::zero(); n1d];
    w[1..n1d - 1].copy_from_slice(&x);
    let two_n = T::of(2.0 * rad.params.dim as f64);
    Ok(SpectralResult {
        r_nodes: mesh.nodes,
        w,
        alpha1: rho,
        criterion: rho + two_n,
        residual: bound,
        second_variation_value: None,
        crosscheck_ratio: None,
    })
}

/// Build the instability direction v(r, θ) = w(r) · (1 - N sin²θ).
///
/// w is carried onto the grid radii by cubic interpolation; the boundary
/// rows are exactly zero.  The field is even in θ, nonincreasing in |θ|
/// (w > 0 and Y decreases away from the equator), and has vanishing
/// spherical average on every shell up to quadrature accuracy.
pub fn build_instability_direction<T: Real>(
    grid: &Arc<AnnulusGrid<T>>,
    spec: &SpectralResult<T>,
) -> Result<Field<T>> {
    let n = spec.r_nodes.len();
    let scale = spec.r_nodes[n - 1].abs();
    let same = |a: T, b: T| (a - b).abs() <= T::of(1e-12) * scale;
    if !same(grid.params.inner_radius, spec.r_nodes[0])
        || !same(grid.params.outer_radius, spec.r_nodes[n - 1])
    {
        return Err(Error::GridMismatch(
            "instability direction: grid radii differ from the eigen mesh".into(),
        ));
    }
    let spline = CubicSpline::fit(&spec.r_nodes, &spec.w)?;
    let nf = T::of(grid.params.dim as f64);
    let mut out = Field::zeros(grid);
    for i in 1..grid.nr - 1 {
        let wr = spline.eval(grid.r_nodes[i]);
        for j in 0..grid.ntheta {
            let s = grid.theta_nodes[j].sin();
            out.set(i, j, wr * (T::one() - nf * s * s));
        }
    }
    Ok(out)
}

/// Outcome of the nonradiality evaluation at one parameter point.
#[derive(Debug, Clone)]
pub struct CertificateReport<T> {
    /// α₁ + 2N; negative means the radial profile is unstable in 𝒦.
    pub criterion: T,
    /// Action of the lifted radial profile on the evaluation grid.
    pub radial_action: T,
    /// I''(u_rad)(v, v) via the 2D energy module.
    pub second_variation_value: T,
    /// second_variation / (criterion · ∫v²/|x|²); None when the criterion is
    /// too close to zero for the ratio to mean anything.
    pub crosscheck_ratio: Option<T>,
    /// True iff criterion < 0: ground states are then nonradial.
    pub nonradial_expected: bool,
    /// Best Nehari-rescaled competitor action found (only when expected).
    pub competitor_action: Option<T>,
    /// The perturbation scale s that produced the best competitor.
    pub competitor_scale: Option<T>,
    /// The competitor field t·(u_rad + s·v), Nehari-rescaled.
    pub competitor: Option<Field<T>>,
}

/// Evaluate the nonradiality criterion on a 2D grid and, when it fires,
/// construct a lower-action competitor t·(u_rad + s·v).
///
/// Requires unit coefficient (the criterion is derived for a ≡ 1).  Fills
/// the cross-check fields of `spec` as a side effect.
pub fn nonradiality_certificate<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    rad: &RadialSolution<T>,
    spec: &mut SpectralResult<T>,
) -> Result<CertificateReport<T>> {
    let g = &ops.grid;
    if !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("certificate: weight from a different grid".into()));
    }
    let one = T::one();
    for &a in &weight.values {
        if (a - one).abs() > T::of(1e-14) {
            return Err(Error::invalid(
                "nonradiality certificate requires unit coefficient a ≡ 1",
            ));
        }
    }

    let u = lift_radial(g, rad)?;
    let v = build_instability_direction(g, spec)?;
    let svar = energy::second_variation(ops, weight, &u, &v)?;
    let denom = spec.criterion * ops.inv_r2_mass(&v, &v);
    let ratio = if denom.abs() > T::of(1e-10) * (one + svar.abs()) {
        Some(svar / denom)
    } else {
        None
    };
    spec.second_variation_value = Some(svar);
    spec.crosscheck_ratio = ratio;

    let radial_action = energy::action(ops, weight, &u)?;
    let expected = spec.criterion < T::zero();

    let mut best: Option<(T, T, Field<T>)> = None;
    if expected {
        let norm_ratio =
            (ops.h1_norm_sq(&u)? / ops.h1_norm_sq(&v)?).sqrt();
        for &sgn in &[T::of(-0.1), T::of(-0.01), T::of(0.01), T::of(0.1)] {
            let s = sgn * norm_ratio;
            let cand = u.plus_scaled(s, &v);
            let t = match energy::nehari_scale(ops, weight, &cand) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let mut scaled = cand;
            scaled.scale(t);
            let act = energy::action(ops, weight, &scaled)?;
            if best.as_ref().map_or(true, |(b, _, _)| act < *b) {
                best = Some((act, s, scaled));
            }
        }
    }
    let (competitor_action, competitor_scale, competitor) = match best {
        Some((a, s, f)) => (Some(a), Some(s), Some(f)),
        None => (None, None, None),
    };

    Ok(CertificateReport {
        criterion: spec.criterion,
        radial_action,
        second_variation_value: svar,
        crosscheck_ratio: ratio,
        nonradial_expected: expected,
        competitor_action,
        competitor_scale,
        competitor,
    })
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Vary the exponent p at fixed radii.
    VaryP,
    /// Vary the inner radius R with outer radius R + 1 (unit-width annulus).
    VaryR,
}

/// One sweep sample; `None` entries mark solver failures at that parameter.
#[derive(Debug, Clone)]
pub struct SweepSample<T> {
    pub parameter: T,
    pub alpha1: Option<T>,
    pub criterion: Option<T>,
}

/// Sweep result: samples, refined sign change, and asymptotic fit.
#[derive(Debug, Clone)]
pub struct SweepTable<T> {
    pub mode: SweepMode,
    pub samples: Vec<SweepSample<T>>,
    /// Parameter where α₁ + 2N changes sign, refined by bisection to 10⁻³;
    /// None when no sign change occurs in the range.
    pub threshold: Option<T>,
    /// Least-squares slope of log(-α₁) against log(parameter) over the top
    /// half of the range (only samples with α₁ < 0 contribute).
    pub fit_exponent: Option<T>,
    /// Count of adjacent sample pairs where α₁ failed to decrease.
    pub monotone_violations: usize,
}

/// Problem parameters at sweep coordinate `x` (p for VaryP; for VaryR the
/// annulus is [x, x+1], keeping unit width).
pub fn sweep_params<T: Real>(mode: SweepMode, fixed: &ProblemParams<T>, x: T) -> ProblemParams<T> {
    let mut p = fixed.clone();
    match mode {
        SweepMode::VaryP => p.exponent = x,
        SweepMode::VaryR => {
            p.inner_radius = x;
            p.outer_radius = x + T::one();
        }
    }
    p
}

/// Evaluate one sweep sample: radial solve plus eigen solve at coordinate
/// `x`, returning (α₁, α₁ + 2N).  Exposed so callers can distribute samples
/// over workers and reassemble with [`summarize_sweep`].
pub fn sweep_point<T: Real>(
    mode: SweepMode,
    fixed: &ProblemParams<T>,
    x: T,
    n1d: usize,
) -> Result<(T, T)> {
    let params = sweep_params(mode, fixed, x);
    let rad = solve_radial(&params, n1d, T::of(1e-9))?;
    let spec = alpha1_solve(&rad, n1d)?;
    Ok((spec.alpha1, spec.criterion))
}

/// Sweep α₁ over a parameter range.
///
/// Each sample runs the radial solve and the eigen solve at resolution
/// `n1d`; failures are recorded as empty entries rather than aborting the
/// sweep.  When adjacent samples bracket a sign change of α₁ + 2N, the
/// crossing is refined by bisection to 10⁻³.
pub fn threshold_sweep<T: Real>(
    mode: SweepMode,
    fixed: &ProblemParams<T>,
    range: (T, T),
    samples: usize,
    n1d: usize,
) -> Result<SweepTable<T>> {
    let (lo, hi) = range;
    if samples == 0 || !(hi >= lo) {
        return Err(Error::invalid("threshold sweep: empty range or zero samples"));
    }
    match mode {
        SweepMode::VaryP => {
            if !(lo > T::of(2.0)) {
                return Err(Error::invalid("threshold sweep: p must stay above 2"));
            }
        }
        SweepMode::VaryR => {
            if !(lo > T::zero()) {
                return Err(Error::invalid("threshold sweep: R must stay positive"));
            }
        }
    }

    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let x = sweep_coordinate(range, samples, k);
        match sweep_point(mode, fixed, x, n1d) {
            Ok((a, c)) => {
                rows.push(SweepSample { parameter: x, alpha1: Some(a), criterion: Some(c) })
            }
            Err(_) => rows.push(SweepSample { parameter: x, alpha1: None, criterion: None }),
        }
    }
    Ok(summarize_sweep(mode, fixed, rows, range, n1d))
}

/// The k-th of `samples` uniformly spaced coordinates over `range`.
pub fn sweep_coordinate<T: Real>(range: (T, T), samples: usize, k: usize) -> T {
    let (lo, hi) = range;
    if samples <= 1 {
        lo
    } else {
        lo + (hi - lo) * T::of(k as f64) / T::of((samples - 1) as f64)
    }
}

/// Assemble a sweep table from precomputed samples: monotone-trend count,
/// sign-change refinement of α₁ + 2N (extra evaluations at `n1d`), and the
/// asymptotic log-log fit over the upper half of `range`.
pub fn summarize_sweep<T: Real>(
    mode: SweepMode,
    fixed: &ProblemParams<T>,
    rows: Vec<SweepSample<T>>,
    range: (T, T),
    n1d: usize,
) -> SweepTable<T> {
    let (lo, hi) = range;
    let samples = rows.len();
    let mut table = SweepTable {
        mode,
        samples: rows,
        threshold: None,
        fit_exponent: None,
        monotone_violations: 0,
    };

    // Monotone-trend bookkeeping (α₁ expected nonincreasing).
    let good: Vec<(T, T, T)> = table
        .samples
        .iter()
        .filter_map(|s| s.alpha1.map(|a| (s.parameter, a, s.criterion.unwrap())))
        .collect();
    for pair in good.windows(2) {
        if pair[1].1 > pair[0].1 {
            table.monotone_violations += 1;
        }
    }

    // Sign change of the criterion: bisect the first bracketing interval.
    for pair in good.windows(2) {
        let (x0, _, c0) = pair[0];
        let (x1, _, c1) = pair[1];
        if c0 == T::zero() {
            table.threshold = Some(x0);
            break;
        }
        if (c0 < T::zero()) != (c1 < T::zero()) {
            let mut a = x0;
            let mut b = x1;
            let mut ca = c0;
            while b - a > T::of(1e-3) {
                let mid = (a + b) / T::of(2.0);
                match sweep_point(mode, fixed, mid, n1d) {
                    Ok((_, cm)) => {
                        if (cm < T::zero()) == (ca < T::zero()) {
                            a = mid;
                            ca = cm;
                        } else {
                            b = mid;
                        }
                    }
                    Err(_) => break,
                }
            }
            table.threshold = Some((a + b) / T::of(2.0));
            break;
        }
    }

    // Asymptotic exponent: fit log(-α₁) vs log(parameter) over the top half.
    if samples >= 2 {
        let cut = lo + (hi - lo) / T::of(2.0);
        let pts: Vec<(T, T)> = good
            .iter()
            .filter(|&&(x, a, _)| x >= cut && a < T::zero())
            .map(|&(x, a, _)| (x.ln(), (-a).ln()))
            .collect();
        if pts.len() >= 2 {
            let n = T::of(pts.len() as f64);
            let sx: T = pts.iter().map(|&(x, _)| x).sum();
            let sy: T = pts.iter().map(|&(_, y)| y).sum();
            let sxx: T = pts.iter().map(|&(x, _)| x * x).sum();
            let sxy: T = pts.iter().map(|&(x, y)| x * y).sum();
            let det = n * sxx - sx * sx;
            if det.abs() > T::epsilon() {
                table.fit_exponent = Some((n * sxy - sx * sy) / det);
            }
        }
    }
    table
}
