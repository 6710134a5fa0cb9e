//! Natural cubic spline on a strictly increasing abscissa.
//!
//! Used to carry radial profiles computed on a fine one-dimensional grid
//! onto the radii of a coarser two-dimensional grid.  Natural end conditions
//! (vanishing second derivative) keep the interpolant monotone-friendly and
//! avoid inventing curvature at the annulus boundary, where the profiles
//! vanish anyway.

use crate::{Error, Real, Result};

/// Cubic spline with natural end conditions.
#[derive(Debug, Clone)]
pub struct CubicSpline<T> {
    x: Vec<T>,
    y: Vec<T>,
    /// Second derivatives at the knots.
    y2: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    /// Fit the spline through (x[i], y[i]); x must be strictly increasing
    /// with at least three knots.
    pub fn fit(x: &[T], y: &[T]) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::invalid("spline fit: need at least 3 matching knots"));
        }
        for i in 0..n - 1 {
            if !(x[i + 1] > x[i]) {
                return Err(Error::invalid("spline fit: abscissa must strictly increase"));
            }
        }
        // Natural conditions fix y2 at both ends; the interior second
        // derivatives solve a symmetric positive definite tridiagonal system.
        let m = n - 2;
        let mut diag = vec![T::zero(); m];
        let mut off = vec![T::zero(); m.saturating_sub(1)];
        let mut rhs = vec![T::zero(); m];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i - 1] = (h0 + h1) * T::of(2.0);
            if i < n - 2 {
                off[i - 1] = h1;
            }
            rhs[i - 1] = T::of(6.0)
                * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        let interior = crate::tridiag::solve(&off, &diag, &off, &rhs)?;
        let mut y2 = vec![T::zero(); n];
        y2[1..n - 1].copy_from_slice(&interior);
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), y2 })
    }

    /// Evaluate at `t`, clamping to the knot range (profiles are extended
    /// constantly rather than extrapolated).
    pub fn eval(&self, t: T) -> T {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // Binary search for the knot interval containing t.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.x[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.x[hi] - self.x[lo];
        let a = (self.x[hi] - t) / h;
        let b = (t - self.x[lo]) / h;
        let six = T::of(6.0);
        a * self.y[lo]
            + b * self.y[hi]
            + ((a * a * a - a) * self.y2[lo] + (b * b * b - b) * self.y2[hi]) * (h * h) / six
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knot_values_exactly() {
        let x: Vec<f64> = (0..9).map(|i| 1.0 + 0.125 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| (t * 2.2).sin()).collect();
        let s = CubicSpline::fit(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    /// Cubic splines converge at fourth order for smooth data when the
    /// natural end conditions are exact (f'' = 0 at both ends); checked by
    /// halving the knot spacing.  A generic function is only O(h²) globally
    /// because of the end conditions — also checked.
    #[test]
    fn interpolation_error_decays_fast_under_refinement() {
        let sup_err = |f: &dyn Fn(f64) -> f64, n: usize| {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
            let s = CubicSpline::fit(&x, &y).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..1000 {
                let t = k as f64 / 999.0;
                worst = worst.max((s.eval(t) - f(t)).abs());
            }
            worst
        };
        // sin(πt) has vanishing curvature at both ends: full fourth order.
        let flat = |t: f64| (std::f64::consts::PI * t).sin();
        let (e1, e2) = (sup_err(&flat, 33), sup_err(&flat, 65));
        assert!(e1 / e2 > 12.0, "errors {e1:.3e} -> {e2:.3e}");
        // A generic smooth function still refines at second order.
        let generic = |t: f64| (3.0 * t).sin() * (-t).exp();
        let (g1, g2) = (sup_err(&generic, 33), sup_err(&generic, 65));
        assert!(g1 / g2 > 3.5, "errors {g1:.3e} -> {g2:.3e}");
    }

    #[test]
    fn clamps_outside_the_knot_range() {
        let x = [0.0, 1.0, 2.0];
        let y = [5.0, 7.0, 4.0];
        let s = CubicSpline::fit(&x, &y).unwrap();
        assert_eq!(s.eval(-3.0), 5.0);
        assert_eq!(s.eval(9.0), 4.0);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::fit(&[0.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(CubicSpline::fit(&[0.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
