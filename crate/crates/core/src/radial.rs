//! One-dimensional positive radial profiles and radial ↔ 2D transfer.
//!
//! Radial functions reduce the PDE to the two-point boundary value problem
//!
//! ```text
//!   -u'' - (N-1)/r · u' + u = u^{p-1}  on (R0, R1),   u(R0) = u(R1) = 0 ,
//! ```
//!
//! with unit coefficient in front of the nonlinearity.  The discretization
//! reuses the flux-form conventions of the 2D assembly — face conductances
//! ∫ r^{N-1} dr / h², cell masses ∫ r^{N-1} dr — so that a profile solved
//! here and lifted onto a 2D grid with the same radii is a fixed point of
//! the 2D map up to solver tolerance, not merely up to discretization error.
//!
//! The solve is damped Newton from a positive bump scaled to its Nehari
//! point; the positive profile is a saddle of the action, so the Jacobian
//! passes through indefiniteness and the tridiagonal solves are pivoted.
//! Three bump widths are tried before giving up.

use crate::grid::{AnnulusGrid, Field, ProblemParams};
use crate::interp::CubicSpline;
use crate::measure::r_power_integral;
use crate::resolvent::odd_power;
use crate::{Error, Real, Result};
use std::sync::Arc;

/// Positive solution of the radial two-point problem.
#[derive(Debug, Clone)]
pub struct RadialSolution<T> {
    /// Uniform radii including both endpoints.
    pub r_nodes: Vec<T>,
    /// Profile values; zero at the endpoints, positive inside.
    pub values: Vec<T>,
    /// Sup-norm of the node-wise strong-form residual.
    pub residual_norm: T,
    /// Problem data the profile solves (weight is ignored: coefficient ≡ 1).
    pub params: ProblemParams<T>,
}

/// Shared 1D mesh data: flux-form faces and cell moments on uniform radii.
#[derive(Debug)]
pub(crate) struct Radial1d<T> {
    pub nodes: Vec<T>,
    /// ∫_face r^{N-1} dr / h², length n-1.
    pub faces: Vec<T>,
    /// ∫_cell r^{N-1} dr (clamped at the ends), length n.
    pub cells: Vec<T>,
    /// ∫_cell r^{N-3} dr, the 1/r² moment, length n.
    pub cells_inv2: Vec<T>,
}

impl<T: Real> Radial1d<T> {
    pub(crate) fn build(params: &ProblemParams<T>, n1d: usize) -> Result<Self> {
        params.validate()?;
        if n1d < 16 {
            return Err(Error::invalid(format!("radial mesh needs n1d >= 16, got {n1d}")));
        }
        let (r0, r1) = (params.inner_radius, params.outer_radius);
        let h = (r1 - r0) / T::of((n1d - 1) as f64);
        let mut nodes: Vec<T> = (0..n1d).map(|k| r0 + T::of(k as f64) * h).collect();
        nodes[n1d - 1] = r1;
        let dim = params.dim;
        let faces: Vec<T> = (0..n1d - 1)
            .map(|k| r_power_integral(dim - 1, nodes[k], nodes[k + 1]) / (h * h))
            .collect();
        let half = T::of(0.5);
        let mut cells = Vec::with_capacity(n1d);
        let mut cells_inv2 = Vec::with_capacity(n1d);
        for k in 0..n1d {
            let lo = if k == 0 { r0 } else { nodes[k] - half * h };
            let hi = if k == n1d - 1 { r1 } else { nodes[k] + half * h };
            cells.push(r_power_integral(dim - 1, lo, hi));
            cells_inv2.push(r_power_integral(dim - 3, lo, hi));
        }
        Ok(Radial1d { nodes, faces, cells, cells_inv2 })
    }

    /// Strong-form residual of -u'' - (N-1)/r u' + u - u^{p-1} at node k
    /// (interior), i.e. the flux balance divided by the cell mass.
    fn residual(&self, p: T, u: &[T]) -> Vec<T> {
        let n = u.len();
        let mut g = vec![T::zero(); n];
        for k in 1..n - 1 {
            let flux = self.faces[k - 1] * (u[k] - u[k - 1]) + self.faces[k] * (u[k] - u[k + 1]);
            g[k] = flux / self.cells[k] + u[k] - odd_power(u[k], p);
        }
        g
    }

    fn residual_sup(&self, p: T, u: &[T]) -> T {
        self.residual(p, u).iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

/// Rescale u in place to its Nehari point for exponent p: the quadratic and
/// p-homogeneous parts of the action balance, putting the saddle in reach.
fn nehari_rescale_1d<T: Real>(mesh: &Radial1d<T>, p: T, u: &mut [T]) {
    let n = u.len();
    let mut quad = T::zero();
    for k in 0..n - 1 {
        let d = u[k + 1] - u[k];
        quad = quad + mesh.faces[k] * d * d;
    }
    let mut nl = T::zero();
    for k in 0..n {
        quad = quad + mesh.cells[k] * u[k] * u[k];
        nl = nl + mesh.cells[k] * u[k].abs().powf(p);
    }
    if nl > T::zero() {
        let t = (quad / nl).powf(T::one() / (p - T::of(2.0)));
        for x in u.iter_mut() {
            *x = *x * t;
        }
    }
}

/// Newton from sin^m bump starts (m ∈ {1, 2, 4}); Ok on the first converged
/// strictly positive profile, Err(best residual) when every start fails.
fn try_bump_starts<T: Real>(
    mesh: &Radial1d<T>,
    p: T,
    tol: T,
) -> std::result::Result<(Vec<T>, T), T> {
    let n = mesh.nodes.len();
    let r0 = mesh.nodes[0];
    let width = mesh.nodes[n - 1] - r0;
    let mut best_residual = T::infinity();
    for m in [1i32, 2, 4] {
        let mut u: Vec<T> = mesh
            .nodes
            .iter()
            .map(|&r| {
                let x = (r - r0) / width;
                (T::PI() * x).sin().powi(m)
            })
            .collect();
        u[0] = T::zero();
        u[n - 1] = T::zero();
        nehari_rescale_1d(mesh, p, &mut u);

        match newton_1d(mesh, p, &mut u, tol) {
            Ok(res) => {
                if u[1..n - 1].iter().all(|&x| x > T::zero()) {
                    return Ok((u, res));
                }
                // Converged to a sign-changing or trivial root: try the
                // next bump width.
                best_residual = best_residual.min(res);
            }
            Err(res) => best_residual = best_residual.min(res),
        }
    }
    Err(best_residual)
}

/// Solve the radial problem by damped Newton.
///
/// Starts from sin^m bumps (m ∈ {1, 2, 4}) scaled to their Nehari point;
/// each start runs Newton with backtracking on the residual sup-norm, with
/// pivoted tridiagonal linear solves (the Jacobian is indefinite near the
/// saddle).  When no bump start converges at the target exponent — near
/// p = 2 the nonlinearity loses C² smoothness at the boundary, at large p
/// the bumps are far from the saddle — the profile is continued in the
/// exponent from the tame reference p = 4, rescaling to the Nehari point of
/// each intermediate exponent and halving the step on failure.
///
/// `tol` is relative to the profile amplitude: convergence requires the
/// residual sup-norm ≤ tol·(1 + ‖u‖∞).  `residual_norm` on the returned
/// solution is the absolute value.
pub fn solve_radial<T: Real>(
    params: &ProblemParams<T>,
    n1d: usize,
    tol: T,
) -> Result<RadialSolution<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid("solve_radial: tolerance must be positive"));
    }
    let mesh = Radial1d::build(params, n1d)?;
    let n = n1d;
    let target = params.exponent;
    let fail = |best: T| Error::RadialNewtonFailure {
        restarts: 3,
        best_residual: best.to_f64().unwrap_or(f64::NAN),
    };
    let package = |u: Vec<T>, res: T, mesh: Radial1d<T>| RadialSolution {
        r_nodes: mesh.nodes,
        values: u,
        residual_norm: res,
        params: params.clone(),
    };

    let mut best_residual = match try_bump_starts(&mesh, target, tol) {
        Ok((u, res)) => return Ok(package(u, res, mesh)),
        Err(best) => best,
    };

    // Continuation in the exponent from p = 4.
    let two = T::of(2.0);
    let p_ref = T::of(4.0);
    let (mut u, _) = try_bump_starts(&mesh, p_ref, tol).map_err(|b| fail(b.min(best_residual)))?;
    let mut p_cur = p_ref;
    loop {
        let remaining = target - p_cur;
        // Walking down, keep the relative distance to the p = 2 wall; walking
        // up, cap the jump at 1.
        let cap = if remaining < T::zero() { T::of(0.5) * (p_cur - two) } else { T::one() };
        let mut dp = if remaining.abs() <= cap { remaining } else { cap * remaining.signum() };
        loop {
            let exact = dp == remaining;
            let p_next = if exact { target } else { p_cur + dp };
            let mut cand = u.clone();
            nehari_rescale_1d(&mesh, p_next, &mut cand);
            match newton_1d(&mesh, p_next, &mut cand, tol) {
                Ok(r) => {
                    u = cand;
                    p_cur = p_next;
                    best_residual = best_residual.min(r);
                    break;
                }
                Err(b) => {
                    best_residual = best_residual.min(b);
                    dp = dp * T::of(0.5);
                    if dp.abs() < T::of(1e-3) {
                        return Err(fail(best_residual));
                    }
                }
            }
        }
        if p_cur == target {
            break;
        }
    }
    if !u[1..n - 1].iter().all(|&x| x > T::zero()) {
        return Err(fail(best_residual));
    }
    let res = mesh.residual_sup(target, &u);
    Ok(package(u, res, mesh))
}

/// Newton loop; returns the final residual sup-norm, Err(best) on failure.
///
/// The stopping test is relative to the profile amplitude: the flux-balance
/// residual has a roundoff floor of order ε·‖u‖∞/h², so an absolute target
/// is unreachable once the amplitude is large (which it is for p near 2).
fn newton_1d<T: Real>(mesh: &Radial1d<T>, p: T, u: &mut Vec<T>, tol: T) -> std::result::Result<T, T> {
    let n = u.len();
    let amplitude =
        |v: &[T]| T::one() + v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let mut res = mesh.residual_sup(p, u);
    let mut best = res;
    for _ in 0..120 {
        let goal = tol * amplitude(u);
        if res <= goal {
            return Ok(res);
        }
        // Jacobian rows scaled like the residual (divided by cell mass);
        // boundary rows are identity on the zero boundary values.
        let mut sub = vec![T::zero(); n - 1];
        let mut sup = vec![T::zero(); n - 1];
        let mut diag = vec![T::one(); n];
        let g = mesh.residual(p, u);
        let mut rhs: Vec<T> = g.iter().map(|&x| -x).collect();
        rhs[0] = T::zero();
        rhs[n - 1] = T::zero();
        for k in 1..n - 1 {
            let c = mesh.cells[k];
            sub[k - 1] = -mesh.faces[k - 1] / c;
            sup[k] = -mesh.faces[k] / c;
            let uk = u[k].abs();
            let slope = if uk == T::zero() {
                T::zero()
            } else {
                (p - T::one()) * uk.powf(p - T::of(2.0))
            };
            diag[k] = (mesh.faces[k - 1] + mesh.faces[k]) / c + T::one() - slope;
        }
        // Row 0 must not couple forward, row n-1 not backward.
        sup[0] = T::zero();
        sub[n - 2] = T::zero();

        let delta = match crate::tridiag::solve(&sub, &diag, &sup, &rhs) {
            Ok(d) => d,
            Err(_) => return Err(best),
        };

        // Backtracking on the residual sup-norm: sufficient decrease first,
        // then plain decrease once λ is small (the sufficient-decrease test
        // is unreachable at the roundoff plateau and for the merely Hölder
        // second derivative of |u|^{p-2}u near p = 2).
        let mut lambda = T::one();
        let mut accepted = false;
        for halvings in 0..30 {
            let mut trial: Vec<T> =
                u.iter().zip(&delta).map(|(&a, &d)| a + lambda * d).collect();
            // Pivoting may leak O(ε) into the identity boundary rows; the
            // boundary is exactly zero by contract, so pin it.
            trial[0] = T::zero();
            trial[n - 1] = T::zero();
            if trial.iter().all(|x| x.is_finite()) {
                let tr = mesh.residual_sup(p, &trial);
                let sufficient = tr < res * (T::one() - T::of(0.25) * lambda);
                let weak = halvings >= 10 && tr < res;
                if sufficient || weak || tr <= goal {
                    *u = trial;
                    res = tr;
                    best = best.min(res);
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::of(0.5);
        }
        if !accepted {
            return Err(best);
        }
    }
    if res <= tol * amplitude(u) {
        Ok(res)
    } else {
        Err(best)
    }
}

/// Carry a radial profile onto a 2D grid as a θ-constant field.
///
/// Cubic interpolation onto the grid radii; tiny interpolation undershoots
/// are clamped at zero so the lifted field is a cone member by construction.
/// Errors when the radii ranges disagree.
pub fn lift_radial<T: Real>(grid: &Arc<AnnulusGrid<T>>, rad: &RadialSolution<T>) -> Result<Field<T>> {
    let n = rad.r_nodes.len();
    let scale = rad.r_nodes[n - 1].abs();
    let same = |a: T, b: T| (a - b).abs() <= T::of(1e-12) * scale;
    if !same(grid.params.inner_radius, rad.r_nodes[0])
        || !same(grid.params.outer_radius, rad.r_nodes[n - 1])
    {
        return Err(Error::GridMismatch(
            "lift_radial: grid radii differ from the profile's".into(),
        ));
    }
    let spline = CubicSpline::fit(&rad.r_nodes, &rad.values)?;
    let mut out = Field::zeros(grid);
    for i in 1..grid.nr - 1 {
        let v = spline.eval(grid.r_nodes[i]).max(T::zero());
        for j in 0..grid.ntheta {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{check_cone, WeightFamily};
    use crate::energy;
    use crate::operators::OperatorSet;
    use crate::resolvent::apply_t;

    fn params(dim: u32, p: f64) -> ProblemParams<f64> {
        ProblemParams {
            dim,
            exponent: p,
            inner_radius: 1.0,
            outer_radius: 2.0,
            weight: WeightFamily::Constant { value: 1.0 },
        }
    }

    #[test]
    fn profile_is_positive_unimodal_and_converged() {
        let rad = solve_radial(&params(3, 4.0), 257, 1e-10).unwrap();
        assert!(rad.residual_norm <= 1e-10);
        let n = rad.values.len();
        assert_eq!(rad.values[0], 0.0);
        assert_eq!(rad.values[n - 1], 0.0);
        assert!(rad.values[1..n - 1].iter().all(|&x| x > 0.0));
        // Single interior maximum: the difference sequence changes sign once.
        let mut flips = 0;
        let mut last = rad.values[1] - rad.values[0];
        for k in 1..n - 1 {
            let d = rad.values[k + 1] - rad.values[k];
            if d * last < 0.0 {
                flips += 1;
                last = d;
            } else if d != 0.0 {
                last = d;
            }
        }
        assert_eq!(flips, 1, "profile must be unimodal");
    }

    /// Pinned profile values for the benchmark configuration (N = 3, p = 4,
    /// annulus [1,2], unit weight, 257 nodes).  Guards against silent drift
    /// in assembly, scaling, or the Newton path; the solve is deterministic,
    /// so agreement far below the discretization error is expected.
    #[test]
    fn benchmark_profile_snapshot() {
        let rad = solve_radial(&params(3, 4.0), 257, 1e-10).unwrap();
        let n = rad.values.len();
        let expect = [
            ((n - 1) / 4, 3.256153096033507e0),
            ((n - 1) / 2, 3.738750132091868e0),
            (3 * (n - 1) / 4, 1.847317985194508e0),
        ];
        for (k, v) in expect {
            let got = rad.values[k];
            assert!(
                (got - v).abs() <= 1e-8 * v,
                "value at node {k}: got {got:.15e}, pinned {v:.15e}"
            );
        }
        let max = rad.values.iter().cloned().fold(0.0f64, f64::max);
        assert!((max - 3.974309560216586e0).abs() <= 1e-8 * max);
    }

    /// Independent residual evaluator: rebuild the flux balance from scratch
    /// with Simpson-rule face/cell moments (exact for r^{N-1} up to N = 4)
    /// and check the returned profile satisfies it to the solver tolerance.
    #[test]
    fn independent_residual_oracle() {
        for dim in [3u32, 4] {
            let tol = 1e-10_f64;
            let rad = solve_radial(&params(dim, 4.0), 129, tol).unwrap();
            let n = rad.values.len();
            let h = rad.r_nodes[1] - rad.r_nodes[0];
            let simpson = |a: f64, b: f64| {
                let f = |r: f64| r.powi(dim as i32 - 1);
                (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
            };
            let mut worst: f64 = 0.0;
            for k in 1..n - 1 {
                let face_lo = simpson(rad.r_nodes[k - 1], rad.r_nodes[k]) / (h * h);
                let face_hi = simpson(rad.r_nodes[k], rad.r_nodes[k + 1]) / (h * h);
                let cell = simpson(rad.r_nodes[k] - 0.5 * h, rad.r_nodes[k] + 0.5 * h);
                let u = &rad.values;
                let flux = face_lo * (u[k] - u[k - 1]) + face_hi * (u[k] - u[k + 1]);
                let g = flux / cell + u[k] - u[k].powi(3);
                worst = worst.max(g.abs());
            }
            assert!(worst <= tol * 1.01, "dim {dim}: oracle residual {worst:.3e}");
        }
    }

    /// The lifted profile on a 2D grid with matching radii is a Nehari point
    /// (t_u = 1) and a fixed point of the 2D map to solver accuracy: the
    /// θ-constant subspace of the 2D assembly reproduces the 1D operator
    /// exactly.
    #[test]
    fn lifted_profile_is_a_nehari_fixed_point() {
        let pr = params(3, 4.0);
        let rad = solve_radial(&pr, 65, 1e-11).unwrap();
        let g = AnnulusGrid::build(pr.clone(), 65, 9).unwrap();
        let ops = OperatorSet::assemble(&g);
        let a = pr.weight.realize(&g).unwrap();
        let u = lift_radial(&g, &rad).unwrap();

        let t = energy::nehari_scale(&ops, &a, &u).unwrap();
        assert!((t - 1.0).abs() <= 1e-8, "Nehari scale of the lift: {t}");

        let (tu, _) = apply_t(&ops, &a, &u, None).unwrap();
        let mut sup: f64 = 0.0;
        for k in 0..g.len() {
            sup = sup.max((tu.values[k] - u.values[k]).abs());
        }
        assert!(sup <= 1e-7 * u.linf(), "fixed-point defect {sup:.3e}");
    }

    /// Ray geometry around the profile: I'(t·u_rad)(u_rad) is {+,+,-,-} at
    /// t ∈ {0.5, 0.9, 1.1, 2.0} and I(t·u_rad) peaks at t = 1.
    #[test]
    fn ray_sign_pattern_and_action_maximum() {
        let pr = params(3, 4.0);
        let rad = solve_radial(&pr, 65, 1e-11).unwrap();
        let g = AnnulusGrid::build(pr.clone(), 65, 9).unwrap();
        let ops = OperatorSet::assemble(&g);
        let a = pr.weight.realize(&g).unwrap();
        let u = lift_radial(&g, &rad).unwrap();

        let deriv_at = |t: f64| {
            let mut ut = u.clone();
            ut.scale(t);
            energy::first_variation(&ops, &a, &ut, &u).unwrap()
        };
        assert!(deriv_at(0.5) > 0.0);
        assert!(deriv_at(0.9) > 0.0);
        assert!(deriv_at(1.1) < 0.0);
        assert!(deriv_at(2.0) < 0.0);

        let action_at = |t: f64| {
            let mut ut = u.clone();
            ut.scale(t);
            energy::action(&ops, &a, &ut).unwrap()
        };
        let at_one = action_at(1.0);
        for k in 1..=400 {
            let t = 2.5 * k as f64 / 400.0;
            assert!(action_at(t) <= at_one + 1e-12 * at_one.abs());
        }
    }

    #[test]
    fn lift_respects_cone_and_theta_resolution() {
        let pr = params(3, 4.0);
        let rad = solve_radial(&pr, 129, 1e-10).unwrap();
        let g9 = AnnulusGrid::build(pr.clone(), 33, 9).unwrap();
        let g33 = AnnulusGrid::build(pr.clone(), 33, 33).unwrap();
        let u9 = lift_radial(&g9, &rad).unwrap();
        let u33 = lift_radial(&g33, &rad).unwrap();
        assert!(check_cone(&u9, 0.0).in_cone, "{:?}", check_cone(&u9, 0.0));

        // θ-constant integrand: the action cannot depend on the θ resolution.
        let e9 = energy::action(&OperatorSet::assemble(&g9), &pr.weight.realize(&g9).unwrap(), &u9)
            .unwrap();
        let e33 =
            energy::action(&OperatorSet::assemble(&g33), &pr.weight.realize(&g33).unwrap(), &u33)
                .unwrap();
        assert!((e9 - e33).abs() <= 1e-12 * e9.abs(), "{e9} vs {e33}");
    }

    #[test]
    fn lift_rejects_mismatched_radii() {
        let pr = params(3, 4.0);
        let rad = solve_radial(&pr, 65, 1e-10).unwrap();
        let mut other = pr.clone();
        other.outer_radius = 3.0;
        let g = AnnulusGrid::build(other, 33, 9).unwrap();
        assert!(matches!(lift_radial(&g, &rad), Err(Error::GridMismatch(_))));
    }

    /// Fixed-point defect of the lift onto coarser 2D radii decays at second
    /// order when the 2D grid is refined against a fine profile.
    #[test]
    fn lift_fixed_point_defect_is_second_order_across_resolutions() {
        let pr = params(3, 4.0);
        let rad = solve_radial(&pr, 1025, 1e-9).unwrap();
        let mut sups = Vec::new();
        for nr in [17usize, 33] {
            let g = AnnulusGrid::build(pr.clone(), nr, 9).unwrap();
            let ops = OperatorSet::assemble(&g);
            let a = pr.weight.realize(&g).unwrap();
            let u = lift_radial(&g, &rad).unwrap();
            let (tu, _) = apply_t(&ops, &a, &u, None).unwrap();
            let mut sup: f64 = 0.0;
            for k in 0..g.len() {
                sup = sup.max((tu.values[k] - u.values[k]).abs());
            }
            sups.push(sup);
        }
        assert!(sups[0] / sups[1] > 3.0, "defects {sups:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_radial(&params(3, 4.0), 8, 1e-8).is_err());
        assert!(solve_radial(&params(3, 4.0), 64, 0.0).is_err());
    }
}

