//! The invariant cone and its discrete algebra.
//!
//! 𝒦̂ collects the axially symmetric fields that are nonnegative, even in the
//! latitude θ, and nonincreasing in |θ| away from the equator; 𝒦 additionally
//! imposes the Dirichlet boundary condition at r ∈ {R0, R1}.  Membership is
//! quantified by four defects (larger = worse):
//!
//! * `min_value`            — most negative node value (nonnegativity),
//! * `max_even_defect`      — max |u(r,θ) - u(r,-θ)|,
//! * `max_monotone_defect`  — max positive part of ∂θu on 0 < θ < π/2,
//! * `boundary_defect`      — max |u| at r ∈ {R0, R1}.
//!
//! `sample_cone` draws nonnegative combinations of separable generators
//! s(r)·m(θ); the latitude profiles are built by mirrored, clamped decrements
//! so that evenness and monotonicity hold *bit for bit* and every sample
//! passes `check_cone` with τ = 0.  Solver outputs are checked at the relative
//! tolerance τ = 1e-8·‖u‖_∞, which absorbs iteration roundoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{AnnulusGrid, Field};
use crate::operators::apply_dtheta;
use crate::{Error, Real, Result};
use std::sync::Arc;

/// Admissible weight functions a(x) in front of the nonlinearity.
///
/// All three families are strictly positive and belong to the open cone 𝒦̂
/// for admissible parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily<T> {
    /// a ≡ value.
    Constant { value: T },
    /// a = 1 + slope·(r - R0)/(R1 - R0); requires slope > -1 for positivity.
    RadialProfile { slope: T },
    /// a = 1 + eps·cos^power θ; requires eps ≥ 0 so a is nonincreasing in |θ|.
    AngularProfile { eps: T, power: u32 },
}

impl<T: Real> WeightFamily<T> {
    /// Parameter-level admissibility (positivity and 𝒦̂-compatible shape).
    pub fn validate_params(&self) -> Result<()> {
        match self {
            WeightFamily::Constant { value } => {
                if !(*value > T::zero()) || !value.is_finite() {
                    return Err(Error::invalid(format!(
                        "constant weight must be positive and finite, got {value}"
                    )));
                }
            }
            WeightFamily::RadialProfile { slope } => {
                if !(*slope > T::of(-1.0)) || !slope.is_finite() {
                    return Err(Error::invalid(format!(
                        "radial-profile weight needs slope > -1 for positivity, got {slope}"
                    )));
                }
            }
            WeightFamily::AngularProfile { eps, power: _ } => {
                if !(*eps >= T::zero()) || !eps.is_finite() {
                    return Err(Error::invalid(format!(
                        "angular-profile weight needs eps >= 0 (latitude monotonicity), got {eps}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Realize the weight on a grid and verify 𝒦̂ membership at τ = 0.
    pub fn realize(&self, grid: &Arc<AnnulusGrid<T>>) -> Result<Field<T>> {
        self.validate_params()?;
        let field = match self {
            WeightFamily::Constant { value } => Field::from_fn(grid, |_, _| *value),
            WeightFamily::RadialProfile { slope } => {
                let r0 = grid.params.inner_radius;
                let width = grid.params.outer_radius - r0;
                Field::from_fn(grid, |r, _| T::one() + *slope * (r - r0) / width)
            }
            WeightFamily::AngularProfile { eps, power } => {
                let profile = monotone_cos_power_profile(grid, *power);
                let mut f = Field::zeros(grid);
                for i in 0..grid.nr {
                    for j in 0..grid.ntheta {
                        f.set(i, j, T::one() + *eps * profile[j]);
                    }
                }
                f
            }
        };
        let report = check_cone(&field, T::zero());
        if !report.in_open_cone(T::zero()) {
            return Err(Error::invalid(format!(
                "realized weight leaves the open cone: even defect {}, monotone defect {}, min {}",
                report.max_even_defect, report.max_monotone_defect, report.min_value
            )));
        }
        let min = field.values.iter().fold(T::infinity(), |m, &x| m.min(x));
        if !(min > T::zero()) {
            return Err(Error::invalid(format!("weight must be strictly positive, min = {min}")));
        }
        Ok(field)
    }
}

/// Cone-membership defects of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeReport<T> {
    /// Most negative node value (≥ 0 means nonnegative everywhere).
    pub min_value: T,
    /// max |u(r,θ) - u(r,-θ)| over all nodes.
    pub max_even_defect: T,
    /// max positive part of the latitude derivative on 0 < θ < π/2.
    pub max_monotone_defect: T,
    /// max |u| on r ∈ {R0, R1}.
    pub boundary_defect: T,
    /// Membership in 𝒦 at the tolerance the report was made with.
    pub in_cone: bool,
}

impl<T: Real> ConeReport<T> {
    /// Membership in 𝒦̂ (ignores the boundary condition) at tolerance `tau`.
    pub fn in_open_cone(&self, tau: T) -> bool {
        self.min_value >= -tau && self.max_even_defect <= tau && self.max_monotone_defect <= tau
    }
}

/// Measure all four cone defects of `u` and decide membership at `tau`.
pub fn check_cone<T: Real>(u: &Field<T>, tau: T) -> ConeReport<T> {
    let g = &u.grid;
    let mid = g.equator();

    let min_value = u.values.iter().fold(T::infinity(), |m, &x| m.min(x));

    let mut even = T::zero();
    for i in 0..g.nr {
        for j in 0..mid {
            even = even.max((u.at(i, j) - u.at(i, g.ntheta - 1 - j)).abs());
        }
    }

    // Positive part of ∂θ u strictly between equator and pole; matches
    // apply_dtheta so solver diagnostics and this defect agree exactly.
    let du = apply_dtheta(u);
    let mut mono = T::zero();
    for i in 0..g.nr {
        for j in mid + 1..g.ntheta - 1 {
            mono = mono.max(du.at(i, j));
        }
    }
    mono = mono.max(T::zero());

    let boundary = u.boundary_max_abs();
    let in_cone =
        min_value >= -tau && even <= tau && mono <= tau && boundary <= tau;
    ConeReport {
        min_value,
        max_even_defect: even,
        max_monotone_defect: mono,
        boundary_defect: boundary,
        in_cone,
    }
}

/// Default membership tolerance for solver outputs: 1e-8·‖u‖_∞.
pub fn solver_tau<T: Real>(u: &Field<T>) -> T {
    T::of(1e-8) * u.linf()
}

/// Worst slice-domination defect: max over nodes of u(r,θ) - u(r,0).
///
/// Nonpositive (up to τ) for cone members: the equatorial slice dominates.
pub fn slice_domination_defect<T: Real>(u: &Field<T>) -> T {
    let g = &u.grid;
    let mid = g.equator();
    let mut worst = T::zero();
    for i in 0..g.nr {
        let eq = u.at(i, mid);
        for j in 0..g.ntheta {
            worst = worst.max(u.at(i, j) - eq);
        }
    }
    worst
}

/// Latitude profile cos^power θ evaluated so that evenness is bitwise and
/// monotonicity in |θ| holds exactly in floating point (clamped decrements,
/// mirrored halves).  power = 0 gives the constant profile 1.
fn monotone_cos_power_profile<T: Real>(grid: &AnnulusGrid<T>, power: u32) -> Vec<T> {
    let n = grid.ntheta;
    let mid = grid.equator();
    let mut m = vec![T::zero(); n];
    m[mid] = T::one();
    let mut prev = T::one();
    for k in 1..=mid {
        let raw = if power == 0 {
            T::one()
        } else {
            grid.theta_nodes[mid + k].cos().max(T::zero()).powi(power as i32)
        };
        let clamped = raw.min(prev).max(T::zero());
        m[mid + k] = clamped;
        m[mid - k] = clamped;
        prev = clamped;
    }
    m
}

/// Radial generator profiles: smooth bumps vanishing *exactly* at both ends.
fn radial_bump_profile<T: Real>(grid: &AnnulusGrid<T>, kind: usize) -> Vec<T> {
    let n = grid.nr;
    let mut s = vec![T::zero(); n];
    for (i, si) in s.iter_mut().enumerate().take(n - 1).skip(1) {
        let x = T::of(i as f64) / T::of((n - 1) as f64);
        let base = (T::PI() * x).sin();
        *si = match kind {
            0 => base,
            1 => base * base,
            2 => base * base * base,
            _ => x * (T::one() - x),
        };
    }
    s
}

/// Draw `count` cone members from seeded, reproducible randomness.
///
/// Each sample is a nonnegative combination of separable generators
/// s(r)·m(θ); every sample passes `check_cone` with τ = 0.
pub fn sample_cone<T: Real>(grid: &Arc<AnnulusGrid<T>>, count: usize, seed: u64) -> Vec<Field<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let terms = rng.gen_range(1..=3usize);
        let mut f = Field::zeros(grid);
        for _ in 0..terms {
            let s = radial_bump_profile(grid, rng.gen_range(0..4usize));
            let power = [0u32, 2, 4, 6][rng.gen_range(0..4usize)];
            let m = monotone_cos_power_profile(grid, power);
            let c = T::of(rng.gen_range(0.2..1.0f64));
            for i in 0..grid.nr {
                for j in 0..grid.ntheta {
                    let k = grid.idx(i, j);
                    f.values[k] = f.values[k] + c * s[i] * m[j];
                }
            }
        }
        out.push(f);
    }
    out
}
