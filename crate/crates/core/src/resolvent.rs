//! Resolvent (-Δ + Id)⁻¹ with Dirichlet data and the fixed-point map
//!
//! ```text
//!   T(u) = (-Δ + Id)⁻¹ ( a(x) |u|^{p-2} u ) ,
//! ```
//!
//! whose fixed points are exactly the solutions of -Δu + u = a|u|^{p-2}u.
//!
//! The linear solve is conjugate gradients preconditioned by the stiffness
//! diagonal.  The matrix is an M-matrix (see the assembly module), so the
//! solve inherits a discrete maximum principle: nonnegative loads produce
//! nonnegative solutions, and — because the latitude coupling acts through
//! nonnegative edge conductances — loads that are even in θ and nonincreasing
//! in |θ| produce solutions with the same symmetry.  CG preserves these
//! structural facts only up to its tolerance, which is why the stopping
//! criterion is pinned far below the cone-membership tolerance used by the
//! flow.

use crate::grid::Field;
use crate::operators::OperatorSet;
use crate::{Error, Real, Result};

/// Relative residual target of the inner CG solve, measured in the
/// diagonally preconditioned norm.
pub const CG_TOL: f64 = 1e-12;

/// Outcome of one conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgStats<T> {
    /// Iterations consumed.
    pub iters: usize,
    /// Final relative residual (preconditioned norm).
    pub rel_residual: T,
}

/// Solve S x = b by Jacobi-preconditioned CG on the Dirichlet subspace.
///
/// `x0` seeds the iteration (warm starts are allowed and deterministic);
/// boundary rows of S are identity, and both `b` and `x0` must vanish there,
/// so every iterate stays exactly zero on the boundary.  The iteration cap
/// scales like 10·√n·ln(1/tol); exceeding it is an error, not a warning.
pub fn solve_spd<T: Real>(
    ops: &OperatorSet<T>,
    b: &Field<T>,
    x0: Option<&Field<T>>,
) -> Result<(Field<T>, CgStats<T>)> {
    let g = &ops.grid;
    if !g.compatible(&b.grid) {
        return Err(Error::GridMismatch("solve_spd: rhs from a different grid".into()));
    }
    let n = g.len();
    let tol = T::of(CG_TOL);
    let max_iters = (T::of(10.0) * T::of(n as f64).sqrt() * (T::one() / tol).ln())
        .to_f64()
        .unwrap_or(1e6)
        .ceil() as usize;

    let dinv: Vec<T> = (0..g.nr)
        .flat_map(|i| (0..g.ntheta).map(move |j| (i, j)))
        .map(|(i, j)| T::one() / ops.stiffness_diag(i, j))
        .collect();

    let mut x = match x0 {
        Some(f) => {
            if !g.compatible(&f.grid) {
                return Err(Error::GridMismatch("solve_spd: seed from a different grid".into()));
            }
            f.clone()
        }
        None => Field::zeros(g),
    };

    // r = b - S x
    let mut r = Field::zeros(g);
    ops.apply_stiffness_slice(&x.values, &mut r.values);
    for k in 0..n {
        r.values[k] = b.values[k] - r.values[k];
    }

    let dot_pre = |r: &[T]| -> T {
        let mut acc = T::zero();
        for k in 0..n {
            acc = acc + r[k] * r[k] * dinv[k];
        }
        acc
    };

    let rho0 = {
        let nb = dot_pre(&b.values);
        if nb == T::zero() {
            // Zero load: the solution is exactly zero.
            return Ok((Field::zeros(g), CgStats { iters: 0, rel_residual: T::zero() }));
        }
        nb
    };

    let mut z: Vec<T> = (0..n).map(|k| r.values[k] * dinv[k]).collect();
    let mut p = z.clone();
    let mut rz = {
        let mut acc = T::zero();
        for k in 0..n {
            acc = acc + r.values[k] * z[k];
        }
        acc
    };
    let target = tol * tol * rho0;

    let mut sp = vec![T::zero(); n];
    let mut iters = 0usize;
    while dot_pre(&r.values) > target {
        if iters >= max_iters {
            return Err(Error::IterativeNoConvergence {
                solver: "pcg",
                iters,
                residual: (dot_pre(&r.values) / rho0).sqrt().to_f64().unwrap_or(f64::NAN),
                tol: CG_TOL,
            });
        }
        ops.apply_stiffness_slice(&p, &mut sp);
        let mut psp = T::zero();
        for k in 0..n {
            psp = psp + p[k] * sp[k];
        }
        if !(psp > T::zero()) {
            return Err(Error::NonFinite(format!(
                "pcg: curvature p·Sp = {psp} not positive; matrix not SPD?"
            )));
        }
        let alpha = rz / psp;
        for k in 0..n {
            x.values[k] += alpha * p[k];
            r.values[k] -= alpha * sp[k];
        }
        for k in 0..n {
            z[k] = r.values[k] * dinv[k];
        }
        let mut rz_new = T::zero();
        for k in 0..n {
            rz_new = rz_new + r.values[k] * z[k];
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        iters += 1;
    }

    let rel = (dot_pre(&r.values) / rho0).sqrt();
    if !x.all_finite() {
        return Err(Error::NonFinite("pcg produced a non-finite iterate".into()));
    }
    Ok((x, CgStats { iters, rel_residual: rel }))
}

/// Apply the resolvent: solve (-Δ + Id) w = f with zero Dirichlet data.
///
/// `f` is a node-wise load (function values, not a weighted functional); the
/// discrete right-hand side is M f restricted to interior nodes.
pub fn resolvent<T: Real>(
    ops: &OperatorSet<T>,
    f: &Field<T>,
    warm: Option<&Field<T>>,
) -> Result<(Field<T>, CgStats<T>)> {
    let g = &ops.grid;
    if !g.compatible(&f.grid) {
        return Err(Error::GridMismatch("resolvent: load from a different grid".into()));
    }
    let mut b = Field::zeros(g);
    for i in 1..g.nr - 1 {
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            b.values[k] = f.values[k] * g.quad_weight(i, j);
        }
    }
    solve_spd(ops, &b, warm)
}

/// Odd power |u|^{p-2} u, with the sign taken from `u` and u = 0 mapped to 0
/// exactly (floating signum would return ±1 at zero).
#[inline]
pub fn odd_power<T: Real>(u: T, p: T) -> T {
    if u == T::zero() {
        T::zero()
    } else {
        u.signum() * u.abs().powf(p - T::one())
    }
}

/// The fixed-point map T(u) = (-Δ + Id)⁻¹( a |u|^{p-2} u ).
///
/// `weight` must be the realized coefficient field a(x) on the same grid.
/// Positively homogeneous of degree p-1 up to solver tolerance: the CG
/// iteration commutes exactly with scaling by powers of two.
pub fn apply_t<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u: &Field<T>,
    warm: Option<&Field<T>>,
) -> Result<(Field<T>, CgStats<T>)> {
    let g = &ops.grid;
    if !g.compatible(&u.grid) || !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("apply_t: field from a different grid".into()));
    }
    let p = g.params.exponent;
    let mut f = Field::zeros(g);
    for k in 0..g.len() {
        f.values[k] = weight.values[k] * odd_power(u.values[k], p);
    }
    resolvent(ops, &f, warm)
}
