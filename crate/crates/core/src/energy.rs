//! Action functional and its derivatives along the Nehari geometry.
//!
//! The variational problem behind the PDE is critical-point finding for
//!
//! ```text
//!   I(u) = ½ ‖u‖²_{H¹}  -  (1/p) ∫ a(x) |u|^p dx ,
//!   I'(u) v   = B(u, v) - ∫ a |u|^{p-2} u v dx ,
//!   I''(u)[v] = B(v, v) - (p-1) ∫ a |u|^{p-2} v² dx .
//! ```
//!
//! On the ray t ↦ t·u (u ≠ 0) the action first rises like t² and then falls
//! like -t^p; its unique maximum is at the Nehari scaling
//! t_u = (‖u‖² / ∫a|u|^p)^{1/(p-2)}, where I'(t_u u)(u) = 0.  Everything
//! downstream — mountain-pass floors, separatrix hunting, the instability
//! criterion — is phrased through these three quantities, so this module
//! computes them with the same quadrature the assembly uses: the discrete
//! gradient identity I'(u)v = B(u - T(u), v) then holds to solver accuracy.

use crate::grid::Field;
use crate::operators::OperatorSet;
use crate::resolvent::odd_power;
use crate::{Error, Real, Result};

/// The action functional split into its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    /// ‖u‖²_{H¹} = ∫ |∇u|² + u² dx.
    pub h1_sq: T,
    /// ∫ a(x) |u|^p dx.
    pub nonlinear: T,
    /// I(u) = h1_sq/2 - nonlinear/p.
    pub action: T,
    /// I'(u)(u) = h1_sq - nonlinear; zero exactly on the Nehari set.
    pub nehari_residual: T,
}

/// Evaluate the action and its ray derivatives at `u`.
///
/// `weight` is the realized coefficient field a(x) on the same grid; `u`
/// must satisfy the Dirichlet condition exactly.
pub fn breakdown<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u: &Field<T>,
) -> Result<EnergyBreakdown<T>> {
    let g = &ops.grid;
    if !g.compatible(&weight.grid) || !g.compatible(&u.grid) {
        return Err(Error::GridMismatch("breakdown: field from a different grid".into()));
    }
    let h1_sq = ops.h1_norm_sq(u)?;
    let p = g.params.exponent;
    let mut nonlinear = T::zero();
    for i in 0..g.nr {
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            nonlinear = nonlinear
                + g.quad_weight(i, j) * weight.values[k] * u.values[k].abs().powf(p);
        }
    }
    Ok(EnergyBreakdown {
        h1_sq,
        nonlinear,
        action: h1_sq / T::of(2.0) - nonlinear / p,
        nehari_residual: h1_sq - nonlinear,
    })
}

/// I(u); convenience wrapper over `breakdown`.
pub fn action<T: Real>(ops: &OperatorSet<T>, weight: &Field<T>, u: &Field<T>) -> Result<T> {
    Ok(breakdown(ops, weight, u)?.action)
}

/// Nehari scaling t_u = (‖u‖² / ∫a|u|^p)^{1/(p-2)} of a nonzero field.
///
/// Errors when the nonlinear integral is not strictly positive (u ≡ 0, or a
/// degenerate coefficient), since the ray then has no interior maximum.
pub fn nehari_scale<T: Real>(ops: &OperatorSet<T>, weight: &Field<T>, u: &Field<T>) -> Result<T> {
    let e = breakdown(ops, weight, u)?;
    if !(e.nonlinear > T::zero()) {
        return Err(Error::invalid(format!(
            "nehari_scale: nonlinear term {} must be positive",
            e.nonlinear
        )));
    }
    let p = ops.grid.params.exponent;
    let t = (e.h1_sq / e.nonlinear).powf(T::one() / (p - T::of(2.0)));
    if !t.is_finite() {
        return Err(Error::NonFinite("nehari_scale produced a non-finite value".into()));
    }
    Ok(t)
}

/// Directional first variation I'(u)(v) = B(u,v) - ∫ a |u|^{p-2} u v dx.
pub fn first_variation<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u: &Field<T>,
    v: &Field<T>,
) -> Result<T> {
    let g = &ops.grid;
    if !g.compatible(&u.grid) || !g.compatible(&v.grid) || !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("first_variation: field from a different grid".into()));
    }
    let p = g.params.exponent;
    let b = ops.stiffness_form(u, v)?;
    let mut nl = T::zero();
    for i in 0..g.nr {
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            nl = nl
                + g.quad_weight(i, j) * weight.values[k] * odd_power(u.values[k], p) * v.values[k];
        }
    }
    Ok(b - nl)
}

/// Second variation I''(u)[v,v] = B(v,v) - (p-1) ∫ a |u|^{p-2} v² dx.
///
/// Negative values certify descent directions; at a Nehari point the ray
/// direction v = u always gives -(p-2)·‖u‖² < 0.
pub fn second_variation<T: Real>(
    ops: &OperatorSet<T>,
    weight: &Field<T>,
    u: &Field<T>,
    v: &Field<T>,
) -> Result<T> {
    let g = &ops.grid;
    if !g.compatible(&u.grid) || !g.compatible(&v.grid) || !g.compatible(&weight.grid) {
        return Err(Error::GridMismatch("second_variation: field from a different grid".into()));
    }
    let p = g.params.exponent;
    let b = ops.stiffness_form(v, v)?;
    let pm2 = p - T::of(2.0);
    let mut nl = T::zero();
    for i in 0..g.nr {
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            let uk = u.values[k].abs();
            let pot = if uk == T::zero() { T::zero() } else { uk.powf(pm2) };
            nl = nl + g.quad_weight(i, j) * weight.values[k] * pot * v.values[k] * v.values[k];
        }
    }
    Ok(b - (p - T::one()) * nl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{sample_cone, WeightFamily};
    use crate::grid::{AnnulusGrid, ProblemParams};
    use crate::resolvent::apply_t;
    use std::sync::Arc;

    fn setup() -> (Arc<AnnulusGrid<f64>>, OperatorSet<f64>, Field<f64>) {
        let g = AnnulusGrid::build(
            ProblemParams {
                dim: 3,
                exponent: 4.0,
                inner_radius: 1.0,
                outer_radius: 2.0,
                weight: WeightFamily::Constant { value: 1.0 },
            },
            13,
            13,
        )
        .unwrap();
        let ops = OperatorSet::assemble(&g);
        let a = g.params.weight.realize(&g).unwrap();
        (g, ops, a)
    }

    /// The nonlinear integral must agree with an independently ordered
    /// summation of the same quadrature.
    #[test]
    fn nonlinear_term_matches_reversed_summation_oracle() {
        let (g, ops, a) = setup();
        let u = sample_cone(&g, 1, 9).pop().unwrap();
        let e = breakdown(&ops, &a, &u).unwrap();
        let mut oracle = 0.0f64;
        for i in (0..g.nr).rev() {
            for j in (0..g.ntheta).rev() {
                let k = g.idx(i, j);
                oracle += g.quad_weight(i, j) * a.values[k] * u.values[k].abs().powi(4);
            }
        }
        assert!((e.nonlinear - oracle).abs() <= 1e-12 * oracle.abs());
        assert_eq!(e.action, e.h1_sq / 2.0 - e.nonlinear / 4.0);
        assert_eq!(e.nehari_residual, e.h1_sq - e.nonlinear);
    }

    /// Quadratic and p-th order scaling along rays; t = 2 scales the H¹ term
    /// exactly (power of two) and the p-term to roundoff.
    #[test]
    fn ray_scaling_laws() {
        let (_, ops, a) = setup();
        let u = sample_cone(&ops.grid, 1, 21).pop().unwrap();
        let e1 = breakdown(&ops, &a, &u).unwrap();
        let mut u2 = u.clone();
        u2.scale(2.0);
        let e2 = breakdown(&ops, &a, &u2).unwrap();
        assert_eq!(e2.h1_sq, 4.0 * e1.h1_sq, "H¹ term must scale exactly at t = 2");
        assert!((e2.nonlinear - 16.0 * e1.nonlinear).abs() <= 1e-13 * e2.nonlinear);
    }

    /// Nehari scaling: closed form at p = 4, residual zero after rescaling,
    /// and maximality of the action against a dense scan of the ray.
    #[test]
    fn nehari_scale_maximizes_the_ray_action() {
        let (_, ops, a) = setup();
        let u = sample_cone(&ops.grid, 1, 33).pop().unwrap();
        let e = breakdown(&ops, &a, &u).unwrap();
        let t = nehari_scale(&ops, &a, &u).unwrap();
        assert!((t - (e.h1_sq / e.nonlinear).sqrt()).abs() <= 1e-14 * t);

        let mut ut = u.clone();
        ut.scale(t);
        let et = breakdown(&ops, &a, &ut).unwrap();
        assert!(
            et.nehari_residual.abs() <= 1e-12 * et.h1_sq,
            "residual {} vs h1 {}",
            et.nehari_residual,
            et.h1_sq
        );
        // p = 4 makes the Nehari action exactly a quarter of the H¹ norm.
        assert!((et.action - et.h1_sq / 4.0).abs() <= 1e-12 * et.h1_sq);

        // maximality over a 1000-point scan of the ray
        for k in 1..=1000 {
            let s = 3.0 * t * (k as f64) / 1000.0;
            let mut us = u.clone();
            us.scale(s);
            let es = breakdown(&ops, &a, &us).unwrap();
            assert!(es.action <= et.action + 1e-12 * et.action.abs().max(1.0));
        }
        // ray direction is a descent direction at the Nehari point
        let svar = second_variation(&ops, &a, &ut, &u).unwrap();
        assert!(svar < 0.0, "{svar}");
    }

    #[test]
    fn nehari_scale_rejects_zero_fields() {
        let (g, ops, a) = setup();
        let z = Field::zeros(&g);
        assert!(nehari_scale(&ops, &a, &z).is_err());
        let e = breakdown(&ops, &a, &z).unwrap();
        assert_eq!((e.h1_sq, e.nonlinear, e.action, e.nehari_residual), (0.0, 0.0, 0.0, 0.0));
    }

    /// Fields already on the Nehari set rescale by exactly one.
    #[test]
    fn nehari_members_have_unit_scale() {
        let (_, ops, a) = setup();
        let mut u = sample_cone(&ops.grid, 1, 44).pop().unwrap();
        let t = nehari_scale(&ops, &a, &u).unwrap();
        u.scale(t);
        let t2 = nehari_scale(&ops, &a, &u).unwrap();
        assert!((t2 - 1.0).abs() <= 1e-10, "t = {t2}");
    }

    /// Degenerate cases of the second variation: zero base point gives back
    /// the squared norm, and the ray direction on the Nehari set gives the
    /// closed form (2-p)·‖u‖².
    #[test]
    fn second_variation_closed_forms() {
        let (g, ops, a) = setup();
        let v = sample_cone(&g, 1, 61).pop().unwrap();
        let z = Field::zeros(&g);
        let at_zero = second_variation(&ops, &a, &z, &v).unwrap();
        let h1 = ops.h1_norm_sq(&v).unwrap();
        assert!((at_zero - h1).abs() <= 1e-13 * h1);

        let mut u = sample_cone(&g, 1, 62).pop().unwrap();
        let t = nehari_scale(&ops, &a, &u).unwrap();
        u.scale(t);
        let e = breakdown(&ops, &a, &u).unwrap();
        let svar = second_variation(&ops, &a, &u, &u).unwrap();
        let closed = (2.0 - 4.0) * e.h1_sq;
        assert!(
            (svar - closed).abs() <= 1e-10 * e.h1_sq,
            "second variation {svar} vs closed form {closed}"
        );
    }

    /// Central finite differences of I along a direction reproduce the first
    /// variation, and of I' the second variation.
    #[test]
    fn variations_match_finite_differences() {
        let (g, ops, a) = setup();
        let u = sample_cone(&g, 1, 55).pop().unwrap();
        let mut v = sample_cone(&g, 1, 56).pop().unwrap();
        v.scale(0.7);

        let eps = 1e-5;
        let mut up = u.clone();
        up.add_scaled(eps, &v);
        let mut um = u.clone();
        um.add_scaled(-eps, &v);
        let fd1 = (action(&ops, &a, &up).unwrap() - action(&ops, &a, &um).unwrap()) / (2.0 * eps);
        let g1 = first_variation(&ops, &a, &u, &v).unwrap();
        assert!((fd1 - g1).abs() <= 1e-5 * (1.0 + g1.abs()), "fd {fd1} vs {g1}");

        let eps2 = 1e-4;
        let mut up2 = u.clone();
        up2.add_scaled(eps2, &v);
        let mut um2 = u.clone();
        um2.add_scaled(-eps2, &v);
        let fd2 = (first_variation(&ops, &a, &up2, &v).unwrap()
            - first_variation(&ops, &a, &um2, &v).unwrap())
            / (2.0 * eps2);
        let h = second_variation(&ops, &a, &u, &v).unwrap();
        assert!((fd2 - h).abs() <= 1e-4 * (1.0 + h.abs()), "fd {fd2} vs {h}");
    }

    /// Discrete gradient identity: I'(u)(v) = B(u - T(u), v) up to the inner
    /// solver tolerance.  This is what makes u - T(u) the flow direction.
    #[test]
    fn gradient_identity_against_fixed_point_map() {
        let (g, ops, a) = setup();
        let u = sample_cone(&g, 1, 77).pop().unwrap();
        let v = sample_cone(&g, 1, 78).pop().unwrap();
        let (tu, _) = apply_t(&ops, &a, &u, None).unwrap();
        let mut diff = u.clone();
        diff.add_scaled(-1.0, &tu);
        let lhs = first_variation(&ops, &a, &u, &v).unwrap();
        let rhs = ops.stiffness_form(&diff, &v).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()),
            "identity defect {} (lhs {lhs}, rhs {rhs})",
            (lhs - rhs).abs()
        );
    }

    /// Small cone fields sit above zero action: the quadratic term dominates
    /// near the origin, which is the mountain-pass floor the flow relies on.
    #[test]
    fn small_fields_have_positive_action() {
        let (g, ops, a) = setup();
        for u in sample_cone(&g, 10, 91) {
            let mut s = u.clone();
            s.scale(0.01 / s.linf());
            assert!(action(&ops, &a, &s).unwrap() > 0.0);
        }
    }
}
