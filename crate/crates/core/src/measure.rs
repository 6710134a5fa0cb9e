//! Exact building blocks of the axially symmetric measure
//!
//! ```text
//!     dx = ω_{N-2} · r^{N-1} dr · cos^{N-2}θ dθ .
//! ```
//!
//! The grid and operator assembly never sample the measure pointwise; they
//! integrate it in closed form over cells and faces.  This module provides
//! those closed forms:
//!
//! * antiderivatives of `cos^m θ` (power-reduction recurrence),
//! * moments `∫ r^k dr` over intervals,
//! * the surface measure `ω_m` of the unit m-sphere,
//! * Clenshaw–Curtis weights on the latitude nodes, which under
//!   s = sinθ are exactly the Chebyshev–Lobatto points; they give a
//!   spectrally exact shell integral for polynomial angular profiles.

use crate::Real;

/// Antiderivative `I_m(θ) = ∫_0^θ cos^m t dt` for integer `m ≥ 0`.
///
/// Uses the power-reduction recurrence
/// `I_m = cos^{m-1}θ sinθ / m + (m-1)/m · I_{m-2}`,
/// anchored at `I_0 = θ` and `I_1 = sinθ`.  The result is odd in θ.
pub fn cos_power_antiderivative<T: Real>(m: u32, theta: T) -> T {
    match m {
        0 => theta,
        1 => theta.sin(),
        _ => {
            let mf = T::of(m as f64);
            let c = theta.cos();
            let head = c.powi(m as i32 - 1) * theta.sin() / mf;
            head + (mf - T::one()) / mf * cos_power_antiderivative(m - 2, theta)
        }
    }
}

/// `∫_a^b cos^m θ dθ` in closed form.
pub fn cos_power_integral<T: Real>(m: u32, a: T, b: T) -> T {
    cos_power_antiderivative(m, b) - cos_power_antiderivative(m, a)
}

/// `∫_a^b r^k dr` for integer `k ≥ 0` (monomial moment of a radial cell).
pub fn r_power_integral<T: Real>(k: u32, a: T, b: T) -> T {
    let kp1 = T::of((k + 1) as f64);
    (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / kp1
}

/// Surface measure `ω_m = |S^m|` of the unit m-sphere, `m ≥ 0`.
///
/// `ω_m = 2 π^{(m+1)/2} / Γ((m+1)/2)`, evaluated through the exact
/// half-integer Gamma recurrence (no general Gamma needed):
/// ω_0 = 2, ω_1 = 2π, and ω_m = 2π ω_{m-2} / (m - 1).
pub fn unit_sphere_area<T: Real>(m: u32) -> T {
    match m {
        0 => T::of(2.0),
        1 => T::of(2.0) * T::PI(),
        _ => T::of(2.0) * T::PI() * unit_sphere_area::<T>(m - 2) / T::of((m - 1) as f64),
    }
}

/// Clenshaw–Curtis weights for `∫_{-1}^{1} f(s) ds` on the n Lobatto nodes
/// `s_j = -cos(jπ/(n-1))`, j = 0..n-1, with n odd.
///
/// Exact for polynomials of degree ≤ n-1.  O(n²) construction; the node
/// count here is a latitude count, never large.
pub fn clenshaw_curtis_weights<T: Real>(n: usize) -> Vec<T> {
    assert!(n >= 3 && n % 2 == 1, "Clenshaw-Curtis node count must be odd and >= 3");
    let m = n - 1; // even
    let mut w = vec![T::zero(); n];
    let pi = T::PI();
    let mf = T::of(m as f64);
    for (j, wj) in w.iter_mut().enumerate() {
        // w_j = (c_j / m) * [ 1 - Σ_{k=1..m/2} b_k cos(2kjπ/m) · 2/(4k²-1) ],
        // b_k = 1 for k < m/2, b_{m/2} = 1/2; endpoint factor c_j = 1/2 at j ∈ {0, m}.
        let mut s = T::one();
        for k in 1..=m / 2 {
            let bk = if k == m / 2 { T::of(0.5) } else { T::one() };
            let ang = T::of(2.0 * (k as f64) * (j as f64)) * pi / mf;
            let denom = T::of(4.0 * (k as f64) * (k as f64) - 1.0);
            s = s - bk * T::of(2.0) * ang.cos() / denom;
        }
        let cj = if j == 0 || j == m { T::of(0.5) } else { T::one() };
        *wj = T::of(2.0) * cj * s / mf;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite-Simpson oracle used to validate the closed forms.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += c * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn cos_power_integrals_match_quadrature_oracle() {
        for m in 0..8u32 {
            for (a, b) in [(-1.2, 0.4), (0.0, std::f64::consts::FRAC_PI_2), (-0.3, 1.5)] {
                let exact = cos_power_integral::<f64>(m, a, b);
                let oracle = simpson(|t| t.cos().powi(m as i32), a, b, 20_000);
                assert!(
                    (exact - oracle).abs() < 1e-12,
                    "m={m} [{a},{b}]: {exact} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn full_range_cos_integrals_have_known_values() {
        let h = std::f64::consts::FRAC_PI_2;
        // ∫_{-π/2}^{π/2} cos θ dθ = 2; ∫ cos²θ = π/2; ∫ cos³θ = 4/3.
        assert!((cos_power_integral::<f64>(1, -h, h) - 2.0).abs() < 1e-15);
        assert!((cos_power_integral::<f64>(2, -h, h) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((cos_power_integral::<f64>(3, -h, h) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas_match_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area::<f64>(0) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area::<f64>(1) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(2) - 4.0 * pi).abs() < 1e-13);
        assert!((unit_sphere_area::<f64>(3) - 2.0 * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn r_moments_match_quadrature_oracle() {
        for k in 0..6u32 {
            let exact = r_power_integral::<f64>(k, 1.3, 2.7);
            let oracle = simpson(|r| r.powi(k as i32), 1.3, 2.7, 10_000);
            assert!((exact - oracle).abs() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials_exactly() {
        for n in [5usize, 9, 33, 65] {
            let w = clenshaw_curtis_weights::<f64>(n);
            let m = n - 1;
            let nodes: Vec<f64> = (0..n)
                .map(|j| -(std::f64::consts::PI * j as f64 / m as f64).cos())
                .collect();
            // ∫_{-1}^1 s^d ds = 2/(d+1) for even d, 0 for odd d.
            for d in 0..n {
                let got: f64 = nodes.iter().zip(&w).map(|(s, w)| s.powi(d as i32) * w).sum();
                let want = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                assert!(
                    (got - want).abs() < 5e-14,
                    "n={n} degree {d}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn clenshaw_curtis_weights_are_positive_and_sum_to_two() {
        let w = clenshaw_curtis_weights::<f64>(33);
        assert!(w.iter().all(|&x| x > 0.0));
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
