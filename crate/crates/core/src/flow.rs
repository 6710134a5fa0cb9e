//! Descent flow, separatrix location, and Newton polish of fixed points.
//!
//! The dynamics is the H¹ negative gradient flow of the action written
//! through the fixed-point map,
//!
//! ```text
//!   dη/dt = -Φ(η),     Φ(v) = v - T(v),     d/dt I(η) = -‖Φ(η)‖²_{H¹} ,
//! ```
//!
//! discretized by explicit Euler polygonals η ← (1-dt)·η + dt·T(η).  Three
//! structural facts carry over exactly to the discrete setting:
//!
//! * steps with dt ≤ 1 are convex combinations of two cone members, so the
//!   invariant cone is preserved step by step;
//! * accepting a step only when the action decreases makes monotonicity an
//!   invariant rather than an estimate;
//! * trajectories either sink into the small ball around zero (an absorbing
//!   set below the mountain-pass level), escape below any fixed action
//!   floor, or hover — and hovering segments concentrate near fixed points,
//!   where a Newton polish takes over.
//!
//! The separatrix between the decay and escape basins along a ray t ↦ t·ψ is
//! located by bisection on the flow outcome; the trajectory started at the
//! separatrix scale is the mountain-pass witness.

use crate::cone::{check_cone, sample_cone, solver_tau};
use crate::energy;
use crate::grid::Field;
use crate::operators::OperatorSet;
use crate::resolvent::{apply_t, odd_power};
use crate::{Error, Real, Result};

/// Step control and classification thresholds of the descent flow.
#[derive(Debug, Clone, Copy)]
pub struct FlowConfig<T> {
    /// Initial step, typically 0.25.
    pub dt0: T,
    /// Smallest step before the flow gives up shrinking.
    pub dt_min: T,
    /// Largest step; must stay ≤ 1 so steps remain convex combinations.
    pub dt_max: T,
    /// Fixed-point declaration threshold on ‖Φ‖_{H¹}.
    pub phi_tol: T,
    /// Radius of the small ball around zero used by the decay test.
    pub alpha: T,
    /// Flow-time budget.
    pub t_max_time: T,
    /// Action level below which the trajectory counts as escaped; the
    /// bracket device uses a ray scale with action under this floor.
    pub decay_action_floor: T,
}

impl<T: Real> FlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(T::zero() < self.dt_min && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max) {
            return Err(Error::invalid("flow config: need 0 < dt_min <= dt0 <= dt_max"));
        }
        if !(self.dt_max <= T::one()) {
            return Err(Error::invalid(
                "flow config: dt_max must stay <= 1 (cone-preserving convex steps)",
            ));
        }
        if !(self.phi_tol > T::zero() && self.alpha > T::zero() && self.t_max_time > T::zero()) {
            return Err(Error::invalid("flow config: tolerances and budget must be positive"));
        }
        Ok(())
    }
}

/// Small-ball radius for which the p-homogeneous part of the action is at
/// most 10% of the quadratic part across a deterministic cone sample set:
/// α^{p-2} ≤ 0.05·p / max_s ∫a|u_s|^p over unit-H¹ samples.
pub fn default_alpha<T: Real>(ops: &OperatorSet<T>, weight: &Field<T>) -> Result<T> {
    let g = &ops.grid;
    let p = g.params.exponent;
    let mut alpha = T::infinity();
    for mut s in sample_cone(g, 64, 9001) {
        let h1 = ops.h1_norm_sq(&s)?.sqrt();
        s.scale(T::one() / h1);
        let e = energy::breakdown(ops, weight, &s)?;
        let a = (T::of(0.05) * p / e.nonlinear).powf(T::one() / (p - T::of(2.0)));
        alpha = alpha.min(a);
    }
    if !alpha.is_finite() || !(alpha > T::zero()) {
        return Err(Error::NonFinite("default_alpha produced a non-finite radius".into()));
    }
    Ok(alpha)
}

/// Positive floor under the action on the sphere ‖u‖_{H¹} = α in the cone:
/// half the minimum action over 64 deterministic cone samples scaled to the
/// sphere.  Errors when the sampled floor is not positive (α too large).
pub fn rho_alpha_surrogate<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    alpha: T,
) -> Result<T> {
    let g = &ops.grid;
    let mut lo = T::infinity();
    for mut s in sample_cone(g, 64, 9001) {
        let h1 = ops.h1_norm_sq(&s)?.sqrt();
        s.scale(alpha / h1);
        lo = lo.min(energy::action(ops, weight, &s)?);
    }
    if !(lo > T::zero()) {
        return Err(Error::invalid(format!(
            "action floor at radius {alpha} is not positive (sampled min {lo})"
        )));
    }
    Ok(lo * T::of(0.5))
}

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowOutcome {
    /// ‖Φ‖ fell below the fixed-point tolerance.
    ConvergedFixedPoint,
    /// Entered the small ball below the mountain-pass floor; sinks to zero.
    DecayedToZero,
    /// Action fell below the configured floor; the trajectory leaves every
    /// bounded sublevel set.
    EscapedNegative,
    /// Budget ran out (or the step hit dt_min without an acceptable move).
    BudgetExhausted,
}

/// One recorded flow state.
#[derive(Debug, Clone, Copy)]
pub struct FlowSample<T> {
    pub time: T,
    pub action: T,
    pub phi_norm: T,
    pub h1_norm: T,
}

/// Trajectory record: samples at accepted steps, the classification, the
/// last iterate, and the iterate with the smallest ‖Φ‖/‖u‖ (the Palais–
/// Smale witness used for polishing).
#[derive(Debug, Clone)]
pub struct FlowTrace<T> {
    pub samples: Vec<FlowSample<T>>,
    pub outcome: FlowOutcome,
    pub final_field: Field<T>,
    /// Index into `samples` of the minimal-‖Φ‖/‖u‖ iterate.
    pub best_index: usize,
    /// The minimal-‖Φ‖/‖u‖ iterate itself.
    pub best_field: Field<T>,
}

/// Integrate the descent flow from `u0`.
///
/// Steps are accepted only when the action strictly decreases; dt halves on
/// rejection (to dt_min) and grows by 1.2× on acceptance (to dt_max).  Every
/// accepted iterate is cone-checked at the solver tolerance; classification
/// checks, in order: fixed point, decay into the small ball, escape below
/// the action floor, exhausted budget.
pub fn flow<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u0: &Field<T>,
    cfg: &FlowConfig<T>,
) -> Result<FlowTrace<T>> {
    cfg.validate()?;
    let g = &ops.grid;
    if !g.compatible(&u0.grid) || !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("flow: field from a different grid".into()));
    }
    if !u0.all_finite() {
        return Err(Error::NonFinite("flow: initial state is not finite".into()));
    }
    let tau0 = solver_tau(u0);
    let rep = check_cone(u0, tau0);
    if !rep.in_cone {
        return Err(Error::ConeExit {
            step: 0,
            defect: worst_defect(&rep),
            tau: tau0.to_f64().unwrap_or(f64::NAN),
        });
    }
    let rho_hat = rho_alpha_surrogate(ops, weight, cfg.alpha)?;

    let mut u = u0.clone();
    let mut dt = cfg.dt0;
    let mut time = T::zero();
    let mut samples = Vec::new();
    let mut best_index = 0usize;
    let mut best_ratio = T::infinity();
    let mut best_field = u.clone();
    let mut warm: Option<Field<T>> = None;
    let mut step: usize = 0;

    loop {
        // State evaluation: T(u), Φ, action, norms.
        let (tu, _) = apply_t(ops, weight, &u, warm.as_ref())?;
        let mut phi = u.clone();
        phi.add_scaled(-T::one(), &tu);
        let phi_norm = ops.stiffness_form(&phi, &phi)?.sqrt();
        let e = energy::breakdown(ops, weight, &u)?;
        let h1_norm = e.h1_sq.sqrt();
        samples.push(FlowSample { time, action: e.action, phi_norm, h1_norm });
        // Witness = minimal ‖Φ‖/‖u‖.  The ratio, not ‖Φ‖ itself: on a decay
        // tail Φ ≈ u, so the absolute norm tends to zero without the state
        // being anywhere near a nontrivial fixed point, while the ratio
        // stays ≈ 1 there and dips only while hovering at the saddle.
        let ratio = phi_norm / h1_norm.max(T::min_positive_value());
        if ratio < best_ratio {
            best_ratio = ratio;
            best_index = samples.len() - 1;
            best_field = u.clone();
        }

        // Classification, in contract order.
        let outcome = if phi_norm <= cfg.phi_tol {
            Some(FlowOutcome::ConvergedFixedPoint)
        } else if h1_norm < cfg.alpha && e.action < rho_hat {
            Some(FlowOutcome::DecayedToZero)
        } else if e.action < cfg.decay_action_floor {
            Some(FlowOutcome::EscapedNegative)
        } else if time >= cfg.t_max_time || step >= 500_000 {
            Some(FlowOutcome::BudgetExhausted)
        } else {
            None
        };
        if let Some(outcome) = outcome {
            return Ok(FlowTrace { samples, outcome, final_field: u, best_index, best_field });
        }

        // Step search: shrink dt until the action decreases.
        loop {
            step += 1;
            let mut trial = u.clone();
            trial.scale(T::one() - dt);
            trial.add_scaled(dt, &tu);
            // The exact dynamics preserve the cone, so any non-cone content
            // of an iterate is roundoff.  Project it out every step: noise
            // seeded at machine precision grows along the unstable spectrum
            // during long saddle hovers, and its cone-incompatible part
            // (odd modes, oscillatory even modes) would otherwise trip the
            // cone guard after enough amplification.
            project_cone(&mut trial);
            if !trial.all_finite() {
                return Err(Error::NonFinite(format!(
                    "flow: non-finite iterate at step {step} (time {time}, dt {dt})"
                )));
            }
            let trial_action = energy::action(ops, weight, &trial)?;
            if trial_action < e.action {
                let tau = solver_tau(&trial);
                let rep = check_cone(&trial, tau);
                if !rep.in_cone {
                    return Err(Error::ConeExit {
                        step,
                        defect: worst_defect(&rep),
                        tau: tau.to_f64().unwrap_or(f64::NAN),
                    });
                }
                u = trial;
                time += dt;
                dt = (dt * T::of(1.2)).min(cfg.dt_max);
                warm = Some(tu);
                break;
            }
            if dt <= cfg.dt_min {
                // No acceptable step at the smallest dt: the trajectory is
                // pinned (numerically critical); report what we have.
                return Ok(FlowTrace {
                    samples,
                    outcome: FlowOutcome::BudgetExhausted,
                    final_field: u,
                    best_index,
                    best_field,
                });
            }
            dt = (dt * T::of(0.5)).max(cfg.dt_min);
        }
    }
}

/// Project u onto the cone: even in θ (average of mirror latitudes), then
/// nonincreasing from the equator toward the poles, then nonnegative.  Exact
/// no-op for fields already in the cone; each clamp moves a value by at most
/// the local cone defect, so on a flow iterate the perturbation is at the
/// roundoff-noise scale.
fn project_cone<T: Real>(u: &mut Field<T>) {
    let nr = u.grid.nr;
    let nt = u.grid.ntheta;
    let mid = nt / 2; // ntheta is odd; the equator row
    for i in 0..nr {
        for j in 0..mid {
            let j2 = nt - 1 - j;
            let m = (u.at(i, j) + u.at(i, j2)) / T::of(2.0);
            u.set(i, j, m);
            u.set(i, j2, m);
        }
        let e = u.at(i, mid).max(T::zero());
        u.set(i, mid, e);
        for j in mid + 1..nt {
            let capped = u.at(i, j).min(u.at(i, j - 1)).max(T::zero());
            u.set(i, j, capped);
            u.set(i, nt - 1 - j, capped);
        }
    }
}

fn worst_defect<T: Real>(rep: &crate::cone::ConeReport<T>) -> f64 {
    let candidates = [
        -rep.min_value.min(T::zero()),
        rep.max_even_defect,
        rep.max_monotone_defect,
        rep.boundary_defect,
    ];
    candidates
        .iter()
        .fold(T::zero(), |m, &x| m.max(x))
        .to_f64()
        .unwrap_or(f64::NAN)
}

/// Locate the separatrix scale t* on the ray t ↦ t·ψ by bisection on the
/// flow outcome.
///
/// Decayed runs raise the lower end, escaped runs lower the upper end; a
/// converged or budget-exhausted probe is itself the mountain-pass witness
/// and is returned immediately.  The upper seed is found by growing t until
/// the ray action sits below the escape floor, the lower seed by shrinking
/// until the flow decays.
pub fn separatrix_scale<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    psi: &Field<T>,
    cfg: &FlowConfig<T>,
    bisect_tol: T,
) -> Result<(T, FlowTrace<T>)> {
    cfg.validate()?;
    if !(bisect_tol > T::zero()) {
        return Err(Error::invalid("separatrix: bisection tolerance must be positive"));
    }
    if psi.linf() == T::zero() {
        return Err(Error::invalid("separatrix: ψ must be nonzero"));
    }
    let scaled = |t: T| -> Field<T> {
        let mut f = psi.clone();
        f.scale(t);
        f
    };

    // Upper seed: ray action below the escape floor guarantees immediate
    // escape classification.
    let mut t_hi = T::one();
    let mut grow = 0;
    while energy::action(ops, weight, &scaled(t_hi))? >= cfg.decay_action_floor {
        t_hi = t_hi * T::of(2.0);
        grow += 1;
        if grow > 60 {
            return Err(Error::SeparatrixDegenerate(
                "ray action never falls below the escape floor".into(),
            ));
        }
    }

    // Lower seed: shrink until the flow decays.
    let mut t_lo = t_hi * T::of(0.5);
    let mut shrink = 0;
    loop {
        let trace = flow(ops, weight, &scaled(t_lo), cfg)?;
        match trace.outcome {
            FlowOutcome::DecayedToZero => break,
            FlowOutcome::ConvergedFixedPoint | FlowOutcome::BudgetExhausted => {
                return Ok((t_lo, trace));
            }
            FlowOutcome::EscapedNegative => {
                t_hi = t_lo;
                t_lo = t_lo * T::of(0.5);
                shrink += 1;
                if shrink > 60 {
                    return Err(Error::SeparatrixDegenerate(
                        "every probed scale escapes; no decay basin found".into(),
                    ));
                }
            }
        }
    }

    // Bisection on the outcome.
    while t_hi - t_lo > bisect_tol {
        let mid = (t_lo + t_hi) / T::of(2.0);
        let trace = flow(ops, weight, &scaled(mid), cfg)?;
        match trace.outcome {
            FlowOutcome::DecayedToZero => t_lo = mid,
            FlowOutcome::EscapedNegative => t_hi = mid,
            FlowOutcome::ConvergedFixedPoint | FlowOutcome::BudgetExhausted => {
                return Ok((mid, trace));
            }
        }
    }
    let t_star = (t_lo + t_hi) / T::of(2.0);
    let witness = flow(ops, weight, &scaled(t_star), cfg)?;
    Ok((t_star, witness))
}

/// Result of the Newton polish.
#[derive(Debug, Clone)]
pub struct PolishResult<T> {
    /// Polished iterate (the input itself if no step improved on it).
    pub field: Field<T>,
    /// ‖Φ‖_{H¹} at the returned iterate.
    pub phi_norm: T,
    /// True iff the target tolerance was reached.
    pub converged: bool,
    /// Newton steps taken.
    pub iterations: usize,
}

/// Newton polish of an approximate fixed point of T.
///
/// Solves H δ = -(S u - M a|u|^{p-2}u) with the indefinite Hessian
/// H = S - (p-1)·diag(m·a·|u|^{p-2}) by diagonally preconditioned MINRES,
/// then backtracks on ‖Φ‖.  On divergence the best iterate seen (the input,
/// if nothing improved) is returned with `converged = false` — a warning,
/// not an error.
///
/// `tol` is relative to the iterate's size: the polish accepts at
/// ‖Φ‖ ≤ tol·(1 + ‖u‖_{H¹}), so exponents close to 2 — where fixed points
/// have very large amplitude — face the same bar as O(1) states instead of
/// an unreachable absolute one.
pub fn refine_fixed_point<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u0: &Field<T>,
    tol: T,
) -> Result<PolishResult<T>> {
    let g = &ops.grid;
    if !g.compatible(&u0.grid) || !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("refine: field from a different grid".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::invalid("refine: tolerance must be positive"));
    }
    let p = g.params.exponent;
    let n = g.len();

    let phi_of = |u: &Field<T>, warm: Option<&Field<T>>| -> Result<(Field<T>, T)> {
        let (tu, _) = apply_t(ops, weight, u, warm)?;
        let mut phi = u.clone();
        phi.add_scaled(-T::one(), &tu);
        let norm = ops.stiffness_form(&phi, &phi)?.sqrt();
        Ok((tu, norm))
    };
    let accept = |phi_norm: T, u: &Field<T>| -> Result<bool> {
        let u_norm = ops.stiffness_form(u, u)?.sqrt();
        Ok(phi_norm <= tol * (T::one() + u_norm))
    };

    let mut u = u0.clone();
    let (mut tu, mut phi_norm) = phi_of(&u, None)?;
    let mut best = PolishResult {
        field: u.clone(),
        phi_norm,
        converged: accept(phi_norm, &u)?,
        iterations: 0,
    };
    if best.converged {
        return Ok(best);
    }

    for it in 1..=30usize {
        // Hessian diagonal weights (p-1)·m·a·|u|^{p-2} on interior nodes.
        let mut hw = vec![T::zero(); n];
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                let a = u.values[k].abs();
                let pot = if a == T::zero() { T::zero() } else { a.powf(p - T::of(2.0)) };
                hw[k] = (p - T::one()) * g.quad_weight(i, j) * weight.values[k] * pot;
            }
        }
        let apply_h = |x: &[T], y: &mut [T]| {
            ops.apply_stiffness_slice(x, y);
            for k in 0..n {
                y[k] = y[k] - hw[k] * x[k];
            }
        };
        // Residual G = S u - M·(a |u|^{p-2} u); zero on the boundary.
        let mut rhs = vec![T::zero(); n];
        ops.apply_stiffness_slice(&u.values, &mut rhs);
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                rhs[k] = -(rhs[k]
                    - g.quad_weight(i, j) * weight.values[k] * odd_power(u.values[k], p));
            }
        }
        for j in 0..g.ntheta {
            rhs[j] = T::zero();
            rhs[(g.nr - 1) * g.ntheta + j] = T::zero();
        }
        let diag: Vec<T> = (0..g.nr)
            .flat_map(|i| (0..g.ntheta).map(move |j| (i, j)))
            .map(|(i, j)| ops.stiffness_diag(i, j) - hw[g.idx(i, j)])
            .collect();
        let delta = match minres(apply_h, &diag, &rhs, T::of(1e-10), n) {
            Ok(d) => d,
            Err(_) => break,
        };

        // Backtracking on ‖Φ‖.
        let mut lambda = T::one();
        let mut moved = false;
        for _ in 0..20 {
            let mut trial = u.clone();
            for k in 0..n {
                trial.values[k] += lambda * delta[k];
            }
            if trial.all_finite() {
                if let Ok((ttu, tnorm)) = phi_of(&trial, Some(&tu)) {
                    if tnorm < phi_norm {
                        u = trial;
                        tu = ttu;
                        phi_norm = tnorm;
                        moved = true;
                        break;
                    }
                }
            }
            lambda = lambda * T::of(0.5);
        }
        if !moved {
            break;
        }
        if phi_norm < best.phi_norm {
            best = PolishResult {
                field: u.clone(),
                phi_norm,
                converged: false,
                iterations: it,
            };
        }
        if accept(phi_norm, &u)? {
            break;
        }
    }
    best.converged = accept(best.phi_norm, &best.field)?;
    Ok(best)
}

/// MINRES on the diagonally preconditioned symmetric system.
///
/// Solves A x = b for symmetric (possibly indefinite) A given the action
/// closure and the raw diagonal of A; preconditioning is by |diag|^{-1/2}
/// on both sides, which keeps the operator symmetric.
fn minres<T: Real>(
    apply_a: impl Fn(&[T], &mut [T]),
    diag: &[T],
    b: &[T],
    rel_tol: T,
    n: usize,
) -> Result<Vec<T>> {
    let floor = T::of(1e-300);
    let d_half_inv: Vec<T> = diag.iter().map(|&d| T::one() / d.abs().max(floor).sqrt()).collect();
    // Preconditioned right-hand side b̂ = D^{-1/2} b; solve Â x̂ = b̂ with
    // Â = D^{-1/2} A D^{-1/2}, then x = D^{-1/2} x̂.
    let bh: Vec<T> = (0..n).map(|k| b[k] * d_half_inv[k]).collect();
    let norm_b = bh.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm_b == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let apply_ah = |x: &[T], y: &mut [T], scratch: &mut Vec<T>| {
        scratch.resize(n, T::zero());
        for k in 0..n {
            scratch[k] = x[k] * d_half_inv[k];
        }
        apply_a(scratch, y);
        for k in 0..n {
            y[k] = y[k] * d_half_inv[k];
        }
    };

    let max_iters = (T::of(10.0) * T::of(n as f64).sqrt() * (T::one() / rel_tol).ln())
        .to_f64()
        .unwrap_or(1e6)
        .ceil() as usize;

    let mut x = vec![T::zero(); n];
    let mut v_prev = vec![T::zero(); n];
    let mut v = bh.clone();
    let mut beta = norm_b;
    for e in v.iter_mut() {
        *e = *e / beta;
    }
    let mut w = vec![T::zero(); n];
    let mut w_old = vec![T::zero(); n];
    let mut scratch = Vec::new();
    let mut av = vec![T::zero(); n];

    // Givens bookkeeping (QR of the tridiagonal Lanczos matrix).
    let mut cs = -T::one();
    let mut sn = T::zero();
    let mut dbar = T::zero();
    let mut epsln = T::zero();
    let mut phibar = beta;

    for _ in 0..max_iters {
        apply_ah(&v, &mut av, &mut scratch);
        let alfa = v.iter().zip(&av).map(|(&a, &b)| a * b).sum::<T>();
        for k in 0..n {
            av[k] = av[k] - alfa * v[k] - beta * v_prev[k];
        }
        let beta_next = av.iter().map(|&x| x * x).sum::<T>().sqrt();

        // Rotate the new column of the tridiagonal matrix.
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        let gamma = (gbar * gbar + beta_next * beta_next).sqrt().max(floor);
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;

        for k in 0..n {
            let wk = (v[k] - oldeps * w_old[k] - delta * w[k]) / gamma;
            w_old[k] = w[k];
            w[k] = wk;
            x[k] += phi * wk;
        }

        if phibar <= rel_tol * norm_b {
            for k in 0..n {
                x[k] = x[k] * d_half_inv[k];
            }
            return Ok(x);
        }
        if beta_next == T::zero() {
            break;
        }
        std::mem::swap(&mut v_prev, &mut v);
        // v = av / beta_next  (av currently holds the unnormalized vector)
        for k in 0..n {
            v[k] = av[k] / beta_next;
        }
        beta = beta_next;
    }
    // Lanczos breakdown with small residual is convergence; otherwise fail.
    if phibar <= rel_tol * norm_b * T::of(100.0) {
        for k in 0..n {
            x[k] = x[k] * d_half_inv[k];
        }
        return Ok(x);
    }
    Err(Error::IterativeNoConvergence {
        solver: "minres",
        iters: max_iters,
        residual: (phibar / norm_b).to_f64().unwrap_or(f64::NAN),
        tol: rel_tol.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::WeightFamily;
    use crate::grid::{AnnulusGrid, ProblemParams};
    use crate::radial::{lift_radial, solve_radial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(nr: usize, nt: usize) -> (Arc<AnnulusGrid<f64>>, OperatorSet<f64>, Field<f64>) {
        let params = ProblemParams {
            dim: 3,
            exponent: 4.0,
            inner_radius: 1.0,
            outer_radius: 2.0,
            weight: WeightFamily::Constant { value: 1.0 },
        };
        let g = AnnulusGrid::build(params, nr, nt).unwrap();
        let ops = OperatorSet::assemble(&g);
        let a = g.params.weight.realize(&g).unwrap();
        (g, ops, a)
    }

    fn config(ops: &OperatorSet<f64>, a: &Field<f64>) -> FlowConfig<f64> {
        FlowConfig {
            dt0: 0.25,
            dt_min: 1e-7,
            dt_max: 1.0,
            phi_tol: 1e-8,
            alpha: default_alpha(ops, a).unwrap(),
            t_max_time: 300.0,
            decay_action_floor: -1.0,
        }
    }

    /// MINRES against a dense oracle on random symmetric indefinite systems.
    #[test]
    fn minres_solves_indefinite_symmetric_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..10 {
            let n = rng.gen_range(5..30);
            let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
                a[(i, i)] += if trial % 2 == 0 { 0.0 } else { 3.0 };
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
            let apply = |x: &[f64], y: &mut [f64]| {
                for i in 0..n {
                    y[i] = (0..n).map(|j| a[(i, j)] * x[j]).sum();
                }
            };
            match minres(apply, &diag, &b, 1e-12, n) {
                Ok(x) => {
                    let mut worst: f64 = 0.0;
                    for i in 0..n {
                        let ax: f64 = (0..n).map(|j| a[(i, j)] * x[j]).sum();
                        worst = worst.max((ax - b[i]).abs());
                    }
                    assert!(worst < 1e-8, "trial {trial}: residual {worst:.3e}");
                }
                Err(_) => {
                    // Near-singular random draws may legitimately fail.
                    assert!(trial % 2 == 0, "well-conditioned trial {trial} must solve");
                }
            }
        }
    }

    #[test]
    fn zero_start_converges_immediately() {
        let (g, ops, a) = setup(9, 9);
        let cfg = config(&ops, &a);
        let tr = flow(&ops, &a, &Field::zeros(&g), &cfg).unwrap();
        assert_eq!(tr.outcome, FlowOutcome::ConvergedFixedPoint);
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.final_field.linf(), 0.0);
    }

    #[test]
    fn small_data_decays_to_zero_with_monotone_action() {
        let (g, ops, a) = setup(13, 13);
        let cfg = config(&ops, &a);
        let mut u0 = sample_cone(&g, 1, 5).pop().unwrap();
        u0.scale(0.01 / u0.linf());
        let tr = flow(&ops, &a, &u0, &cfg).unwrap();
        assert_eq!(tr.outcome, FlowOutcome::DecayedToZero);
        for w in tr.samples.windows(2) {
            assert!(w[1].action < w[0].action, "action must strictly decrease");
        }
        assert!(tr.samples.last().unwrap().h1_norm < cfg.alpha);
    }

    #[test]
    fn large_data_escapes_below_the_floor() {
        let (g, ops, a) = setup(13, 13);
        let cfg = config(&ops, &a);
        let mut u0 = sample_cone(&g, 1, 6).pop().unwrap();
        let t = energy::nehari_scale(&ops, &a, &u0).unwrap();
        u0.scale(3.0 * t);
        let tr = flow(&ops, &a, &u0, &cfg).unwrap();
        assert_eq!(tr.outcome, FlowOutcome::EscapedNegative);
    }

    #[test]
    fn rejects_data_outside_the_cone() {
        let (g, ops, a) = setup(9, 9);
        let cfg = config(&ops, &a);
        let mut u0 = Field::zeros(&g);
        u0.set(4, 2, 1.0);
        u0.set(4, 6, -1.0); // odd part: evenness defect
        assert!(matches!(
            flow(&ops, &a, &u0, &cfg),
            Err(Error::ConeExit { .. })
        ));
    }

    /// Discrete dissipation identity: the one-step defect
    /// (I(u) - I(u - dt·Φ))/dt - ‖Φ‖² is O(dt) and halves with dt.
    #[test]
    fn dissipation_defect_is_first_order_in_dt() {
        let (g, ops, a) = setup(13, 13);
        let mut u0 = sample_cone(&g, 1, 8).pop().unwrap();
        let t = energy::nehari_scale(&ops, &a, &u0).unwrap();
        u0.scale(0.8 * t);

        let defect = |dt: f64| {
            let cfg = FlowConfig {
                dt0: dt,
                dt_min: dt,
                dt_max: dt,
                phi_tol: 1e-14,
                alpha: 1e-6,
                t_max_time: dt * 1.5, // exactly one accepted step
                decay_action_floor: -1e9,
            };
            let tr = flow(&ops, &a, &u0, &cfg).unwrap();
            assert!(tr.samples.len() >= 2, "need one accepted step");
            let s0 = &tr.samples[0];
            let s1 = &tr.samples[1];
            ((s0.action - s1.action) / dt - s0.phi_norm * s0.phi_norm).abs()
        };
        let d1 = defect(0.1);
        let d2 = defect(0.05);
        let d3 = defect(0.025);
        assert!(d2 / d1 < 0.7 && d3 / d2 < 0.7, "defects {d1:.3e} {d2:.3e} {d3:.3e}");
    }

    /// Radial data stays radial: the θ-constant subspace is invariant for
    /// the discrete map, so angular variation stays at solver noise.
    #[test]
    fn radial_data_stays_radial_along_the_flow() {
        let (g, ops, a) = setup(17, 13);
        let cfg = FlowConfig { t_max_time: 10.0, ..config(&ops, &a) };
        let mut u0 = Field::from_fn(&g, |r, _| 2.0 * (std::f64::consts::PI * (r - 1.0)).sin());
        for j in 0..g.ntheta {
            u0.set(0, j, 0.0); // sin(π·1) is 1.2e-16, not 0
            u0.set(g.nr - 1, j, 0.0);
        }
        let tr = flow(&ops, &a, &u0, &cfg).unwrap();
        let spread = tr.final_field.angular_variation();
        assert!(
            spread <= 1e-9 * tr.final_field.linf().max(1e-30),
            "angular variation {spread:.3e}"
        );
    }

    /// Separatrix on the ray through the lifted radial solution: the profile
    /// is a fixed point with Nehari scale one, so t* ≈ 1.
    #[test]
    fn separatrix_scale_is_one_on_the_radial_ray() {
        let (g, ops, a) = setup(33, 9);
        let rad = solve_radial(&g.params, 33, 1e-11).unwrap();
        let psi = lift_radial(&g, &rad).unwrap();
        let cfg = FlowConfig { phi_tol: 1e-6, t_max_time: 400.0, ..config(&ops, &a) };
        let (t_star, witness) = separatrix_scale(&ops, &a, &psi, &cfg, 1e-3).unwrap();
        assert!((t_star - 1.0).abs() <= 2e-2, "t* = {t_star}");
        assert!(
            witness.samples.last().unwrap().action > 0.0,
            "witness must hover above zero action"
        );
    }

    /// Bisection classification is monotone across the separatrix: smaller
    /// scales decay, larger scales escape.
    #[test]
    fn classification_is_monotone_across_the_separatrix() {
        let (g, ops, a) = setup(13, 9);
        let mut psi = sample_cone(&g, 1, 12).pop().unwrap();
        let t = energy::nehari_scale(&ops, &a, &psi).unwrap();
        psi.scale(t);
        let cfg = FlowConfig { phi_tol: 1e-9, t_max_time: 300.0, ..config(&ops, &a) };
        let (t_star, _) = separatrix_scale(&ops, &a, &psi, &cfg, 1e-3).unwrap();
        for k in 0..10 {
            let s = 0.2 + 1.6 * (k as f64) / 9.0; // scales in [0.2, 1.8]
            let scale = s * t_star;
            if (scale - t_star).abs() < 5e-2 * t_star {
                continue; // too close to the separatrix to classify reliably
            }
            let mut u0 = psi.clone();
            u0.scale(scale);
            let tr = flow(&ops, &a, &u0, &cfg).unwrap();
            if scale < t_star {
                assert_eq!(
                    tr.outcome,
                    FlowOutcome::DecayedToZero,
                    "scale {s} below the separatrix must decay"
                );
            } else {
                assert_eq!(
                    tr.outcome,
                    FlowOutcome::EscapedNegative,
                    "scale {s} above the separatrix must escape"
                );
            }
        }
        assert!(separatrix_scale(&ops, &a, &Field::zeros(&g), &cfg, 1e-3).is_err());
    }

    /// Newton polish: at a root it returns immediately; from flow accuracy
    /// it reaches deep tolerance with fast residual decay.
    #[test]
    fn newton_polish_contracts_quadratically() {
        let (g, ops, a) = setup(33, 9);
        let rad = solve_radial(&g.params, 33, 1e-12).unwrap();
        let u = lift_radial(&g, &rad).unwrap();

        // The lift of the converged profile is already a fixed point to
        // solver accuracy: polish must keep it (no wandering).
        let done = refine_fixed_point(&ops, &a, &u, 1e-9).unwrap();
        assert!(done.converged);
        assert!(done.iterations <= 1);

        // Perturb in-cone to phi_norm ~ 1e-2-ish and polish back.
        let mut v = u.clone();
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                v.set(i, j, v.at(i, j) * (1.0 + 0.03 * (g.r_nodes[i] - 1.5)));
            }
        }
        let res = refine_fixed_point(&ops, &a, &v, 1e-10).unwrap();
        assert!(res.converged, "phi after polish: {:.3e}", res.phi_norm);
        let u_norm = ops.stiffness_form(&res.field, &res.field).unwrap().sqrt();
        assert!(res.phi_norm <= 1e-10 * (1.0 + u_norm));
        assert!(res.iterations <= 8, "Newton should contract fast, took {}", res.iterations);
        // The polished field is the radial fixed point again.
        let mut sup: f64 = 0.0;
        for k in 0..g.len() {
            sup = sup.max((res.field.values[k] - u.values[k]).abs());
        }
        assert!(sup <= 1e-7 * u.linf(), "polish drifted {sup:.3e}");
    }

    /// Palais–Smale bookkeeping on a budget-exhausted trace: the recorded
    /// minimal-‖Φ‖/‖u‖ iterate satisfies the norm bound that links action,
    /// ‖Φ‖ and ‖u‖ (the discrete version of the boundedness lemma).
    #[test]
    fn budget_trace_has_bounded_minimal_phi_witness() {
        let (g, ops, a) = setup(13, 13);
        let mut u0 = sample_cone(&g, 1, 31).pop().unwrap();
        let t = energy::nehari_scale(&ops, &a, &u0).unwrap();
        u0.scale(t);
        let cfg = FlowConfig {
            t_max_time: 0.6, // a couple of steps: halt while still hovering
            phi_tol: 1e-14,
            decay_action_floor: -1e9, // keep the escape exit out of reach
            ..config(&ops, &a)
        };
        let tr = flow(&ops, &a, &u0, &cfg).unwrap();
        assert_eq!(tr.outcome, FlowOutcome::BudgetExhausted);
        let best = &tr.samples[tr.best_index];
        let min_ratio = tr
            .samples
            .iter()
            .map(|s| s.phi_norm / s.h1_norm)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.phi_norm / best.h1_norm, min_ratio);
        // ‖u‖² ≤ 2p/(p-2) · (I(u) + ‖Φ‖·‖u‖/p), exact discrete identity.
        let p = 4.0;
        let h1_sq = best.h1_norm * best.h1_norm;
        let bound = 2.0 * p / (p - 2.0) * (best.action + best.phi_norm * best.h1_norm / p);
        assert!(h1_sq <= bound * (1.0 + 1e-10), "{h1_sq} vs {bound}");
        // The stored witness field matches the recorded sample.
        let e = energy::breakdown(&ops, &a, &tr.best_field).unwrap();
        assert!((e.h1_sq.sqrt() - best.h1_norm).abs() <= 1e-12 * best.h1_norm);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let (_, ops, a) = setup(9, 9);
        let mut cfg = config(&ops, &a);
        cfg.dt_max = 1.5;
        assert!(cfg.validate().is_err());
        cfg.dt_max = 0.5;
        cfg.dt0 = 0.9;
        assert!(cfg.validate().is_err());
        let cfg2 = FlowConfig { phi_tol: -1.0, ..config(&ops, &a) };
        assert!(cfg2.validate().is_err());
    }
}
