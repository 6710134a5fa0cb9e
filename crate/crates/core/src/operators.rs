//! Flux-form assembly of the discrete H¹ machinery.
//!
//! In the (r, θ) variables the axially symmetric operator reads
//!
//! ```text
//!   -Δu + u = -u_rr - (N-1)/r · u_r - r^{-2} cos^{2-N}θ ∂θ( cos^{N-2}θ · u_θ ) + u ,
//! ```
//!
//! with Dirichlet rows at r ∈ {R0, R1} and no-flux closure at the poles
//! θ = ±π/2 (the measure factor cos^{N-2}θ vanishes there).  Instead of
//! discretizing this strong form, the assembly discretizes the energy
//!
//! ```text
//!   B(u,v) = ∫_A ( ∇u·∇v + u v ) dx
//!          = ω Σ_faces,r  (∫_face r^{N-1} dr)/hr² · δ_r u δ_r v · γ_j
//!          + ω Σ_faces,θ  (∫_face cos^{N-2}θ dθ)/hθ² · δ_θ u δ_θ v · b_i
//!          + Σ_nodes m_ij u v ,
//! ```
//!
//! where γ_j and b_i are the closed-form latitude/radial cell moments from
//! the grid and m_ij the quadrature weights.  Summing identical nonnegative
//! edge terms makes the form symmetric *bit for bit* and positive definite,
//! and the induced operator matrix is an M-matrix: off-diagonal entries are
//! nonpositive and the diagonal dominates.  That sign structure is what
//! propagates cone membership through the resolvent, exactly as the
//! continuous maximum principle does.

use std::sync::Arc;

use crate::grid::{AnnulusGrid, Field};
use crate::measure::{cos_power_integral, r_power_integral};
use crate::{Error, Real, Result};

/// Deliberate assembly defects for fault-injection drills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyFault {
    /// Flip the sign of every latitude (angular) flux coefficient.
    NegateAngularFlux,
}

/// Assembled coefficient set of the bilinear forms on one grid.
#[derive(Debug)]
pub struct OperatorSet<T> {
    /// Grid the coefficients were integrated on.
    pub grid: Arc<AnnulusGrid<T>>,
    /// Radial face conductances (∫_face r^{N-1} dr)/hr², length nr-1.
    face_r: Vec<T>,
    /// Latitude face conductances (∫_face cos^{N-2}θ dθ)/hθ², length ntheta-1.
    face_theta: Vec<T>,
    /// Diagonal of the stiffness matrix (Jacobi preconditioner).
    stiff_diag: Vec<T>,
}

impl<T: Real> OperatorSet<T> {
    /// Assemble the forms on `grid`.
    pub fn assemble(grid: &Arc<AnnulusGrid<T>>) -> Self {
        Self::assemble_with(grid, None)
    }

    /// Assemble with an optional injected fault (testing/diagnostics only).
    pub fn assemble_with(grid: &Arc<AnnulusGrid<T>>, fault: Option<AssemblyFault>) -> Self {
        let dim = grid.params.dim;
        let nr = grid.nr;
        let nt = grid.ntheta;
        let hr2 = grid.hr * grid.hr;
        let ht2 = grid.htheta * grid.htheta;

        let face_r: Vec<T> = (0..nr - 1)
            .map(|i| r_power_integral(dim - 1, grid.r_nodes[i], grid.r_nodes[i + 1]) / hr2)
            .collect();

        // Latitude faces, mirrored so face j and face nt-2-j agree bitwise.
        let mut face_theta = vec![T::zero(); nt - 1];
        for j in nt / 2..nt - 1 {
            let g = cos_power_integral(dim - 2, grid.theta_nodes[j], grid.theta_nodes[j + 1]) / ht2;
            face_theta[j] = g;
            face_theta[nt - 2 - j] = g;
        }
        if matches!(fault, Some(AssemblyFault::NegateAngularFlux)) {
            for g in face_theta.iter_mut() {
                *g = -*g;
            }
        }

        let omega = grid.sphere_area;
        let mut stiff_diag = vec![T::zero(); grid.len()];
        for i in 0..nr {
            for j in 0..nt {
                let mut d = omega * grid.cell_r[i] * grid.cell_theta[j]; // mass
                if i > 0 {
                    d = d + omega * face_r[i - 1] * grid.cell_theta[j];
                }
                if i < nr - 1 {
                    d = d + omega * face_r[i] * grid.cell_theta[j];
                }
                if j > 0 {
                    d = d + omega * grid.cell_r_inv2[i] * face_theta[j - 1];
                }
                if j < nt - 1 {
                    d = d + omega * grid.cell_r_inv2[i] * face_theta[j];
                }
                stiff_diag[grid.idx(i, j)] = d;
            }
        }

        OperatorSet { grid: Arc::clone(grid), face_r, face_theta, stiff_diag }
    }

    fn require_same_grid(&self, f: &Field<T>, what: &str) -> Result<()> {
        if !self.grid.compatible(&f.grid) {
            return Err(Error::GridMismatch(format!("{what}: field from a different grid")));
        }
        Ok(())
    }

    fn require_zero_boundary(&self, f: &Field<T>) -> Result<()> {
        let m = f.boundary_max_abs();
        if m != T::zero() {
            return Err(Error::NonzeroBoundary { max_abs: m.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(())
    }

    /// Full H¹ form B(u,v) = ∫ ∇u·∇v + uv dx on Dirichlet fields.
    ///
    /// Symmetric bit for bit (each edge term is a commuting product) and
    /// positive definite; errors if either argument has nonzero boundary.
    pub fn stiffness_form(&self, u: &Field<T>, v: &Field<T>) -> Result<T> {
        self.require_same_grid(u, "stiffness_form")?;
        self.require_same_grid(v, "stiffness_form")?;
        self.require_zero_boundary(u)?;
        self.require_zero_boundary(v)?;
        Ok(self.grad_r_form(u, v) + self.grad_theta_form(u, v) + self.mass_form(u, v))
    }

    /// ‖u‖²_{H¹}; same preconditions as `stiffness_form`.
    pub fn h1_norm_sq(&self, u: &Field<T>) -> Result<T> {
        self.stiffness_form(u, u)
    }

    fn grad_r_form(&self, u: &Field<T>, v: &Field<T>) -> T {
        let g = &self.grid;
        let omega = g.sphere_area;
        let mut acc = T::zero();
        for i in 0..g.nr - 1 {
            for j in 0..g.ntheta {
                let du = u.at(i + 1, j) - u.at(i, j);
                let dv = v.at(i + 1, j) - v.at(i, j);
                // du·dv first: keeps the form symmetric bit for bit.
                acc = acc + (omega * self.face_r[i] * g.cell_theta[j]) * (du * dv);
            }
        }
        acc
    }

    fn grad_theta_form(&self, u: &Field<T>, v: &Field<T>) -> T {
        let g = &self.grid;
        let omega = g.sphere_area;
        let mut acc = T::zero();
        for i in 0..g.nr {
            for j in 0..g.ntheta - 1 {
                let du = u.at(i, j + 1) - u.at(i, j);
                let dv = v.at(i, j + 1) - v.at(i, j);
                acc = acc + (omega * g.cell_r_inv2[i] * self.face_theta[j]) * (du * dv);
            }
        }
        acc
    }

    /// L² pairing ∫ u v dx by the grid quadrature (diagonal mass).
    pub fn mass_form(&self, u: &Field<T>, v: &Field<T>) -> T {
        let g = &self.grid;
        let mut acc = T::zero();
        for i in 0..g.nr {
            let wr = g.sphere_area * g.cell_r[i];
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                acc = acc + (wr * g.cell_theta[j]) * (u.values[k] * v.values[k]);
            }
        }
        acc
    }

    /// Singular pairing ∫ u v / |x|² dx (closed-form radial moment).
    pub fn inv_r2_mass(&self, u: &Field<T>, v: &Field<T>) -> T {
        let g = &self.grid;
        let mut acc = T::zero();
        for i in 0..g.nr {
            let wr = g.sphere_area * g.cell_r_inv2[i];
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                acc = acc + (wr * g.cell_theta[j]) * (u.values[k] * v.values[k]);
            }
        }
        acc
    }

    /// Quadrature weight (diagonal mass entry) of node (i, j).
    #[inline]
    pub fn mass_diag(&self, i: usize, j: usize) -> T {
        self.grid.quad_weight(i, j)
    }

    /// Stiffness diagonal entry of node (i, j) (Jacobi preconditioner).
    #[inline]
    pub fn stiffness_diag(&self, i: usize, j: usize) -> T {
        self.stiff_diag[self.grid.idx(i, j)]
    }

    /// Matrix action y = S u on raw value slices.
    ///
    /// Rows at r ∈ {R0, R1} are identity rows (y = u there), which keeps the
    /// Dirichlet subspace invariant for Krylov iterations.
    pub fn apply_stiffness_slice(&self, u: &[T], y: &mut [T]) {
        let g = &self.grid;
        let nt = g.ntheta;
        let nr = g.nr;
        let omega = g.sphere_area;
        debug_assert_eq!(u.len(), g.len());
        debug_assert_eq!(y.len(), g.len());
        for j in 0..nt {
            y[j] = u[j];
            y[(nr - 1) * nt + j] = u[(nr - 1) * nt + j];
        }
        for i in 1..nr - 1 {
            let b = omega * g.cell_r_inv2[i];
            let mr = omega * g.cell_r[i];
            for j in 0..nt {
                let k = i * nt + j;
                let mut acc = mr * g.cell_theta[j] * u[k];
                let gj = omega * g.cell_theta[j];
                acc = acc + gj * self.face_r[i - 1] * (u[k] - u[k - nt]);
                acc = acc + gj * self.face_r[i] * (u[k] - u[k + nt]);
                if j > 0 {
                    acc = acc + b * self.face_theta[j - 1] * (u[k] - u[k - 1]);
                }
                if j < nt - 1 {
                    acc = acc + b * self.face_theta[j] * (u[k] - u[k + 1]);
                }
                y[k] = acc;
            }
        }
    }

    /// Matrix action on a field (boundary rows identity).
    pub fn apply_stiffness(&self, u: &Field<T>) -> Field<T> {
        let mut out = Field::zeros(&self.grid);
        self.apply_stiffness_slice(&u.values, &mut out.values);
        out
    }

    /// Node-wise PDE residual operator (-Δ_h + Id) u = M⁻¹ S u on interior
    /// nodes; zero on the Dirichlet boundary.
    pub fn apply_pde_operator(&self, u: &Field<T>) -> Field<T> {
        let g = &self.grid;
        let mut y = self.apply_stiffness(u);
        for j in 0..g.ntheta {
            y.set(0, j, T::zero());
            y.set(g.nr - 1, j, T::zero());
        }
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                y.values[k] = y.values[k] / g.quad_weight(i, j);
            }
        }
        y
    }

    /// Discrete Laplace–Beltrami action r²·(angular part) per node.
    ///
    /// For latitude-only fields this approximates -Δ_{S^{N-1}} u; accuracy is
    /// O(h²) away from the poles (the polar rows see degenerate cells).
    pub fn apply_laplace_beltrami(&self, u: &Field<T>) -> Field<T> {
        let g = &self.grid;
        let omega = g.sphere_area;
        let mut out = Field::zeros(&self.grid);
        for i in 0..g.nr {
            let b = omega * g.cell_r_inv2[i];
            let r2 = g.r_nodes[i] * g.r_nodes[i];
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                let mut acc = T::zero();
                if j > 0 {
                    acc = acc + b * self.face_theta[j - 1] * (u.values[k] - u.values[k - 1]);
                }
                if j < g.ntheta - 1 {
                    acc = acc + b * self.face_theta[j] * (u.values[k] - u.values[k + 1]);
                }
                out.values[k] = r2 * acc / g.quad_weight(i, j);
            }
        }
        out
    }

    /// Sparse triplet dump (row, col, value) of the stiffness matrix rows at
    /// interior radii, in flat row-major indexing.  Debug aid.
    pub fn stiffness_triplets(&self) -> Vec<(usize, usize, T)> {
        let g = &self.grid;
        let nt = g.ntheta;
        let omega = g.sphere_area;
        let mut t = Vec::new();
        for i in 1..g.nr - 1 {
            for j in 0..nt {
                let k = g.idx(i, j);
                t.push((k, k, self.stiff_diag[k]));
                let gj = omega * g.cell_theta[j];
                t.push((k, k - nt, -gj * self.face_r[i - 1]));
                t.push((k, k + nt, -gj * self.face_r[i]));
                let b = omega * g.cell_r_inv2[i];
                if j > 0 {
                    t.push((k, k - 1, -b * self.face_theta[j - 1]));
                }
                if j < nt - 1 {
                    t.push((k, k + 1, -b * self.face_theta[j]));
                }
            }
        }
        t
    }
}

/// Latitude derivative: centered differences at interior latitude nodes,
/// one-sided at the poles θ = ±π/2.
pub fn apply_dtheta<T: Real>(u: &Field<T>) -> Field<T> {
    let g = &u.grid;
    let nt = g.ntheta;
    let two_h = T::of(2.0) * g.htheta;
    let mut out = Field::zeros(g);
    for i in 0..g.nr {
        out.set(i, 0, (u.at(i, 1) - u.at(i, 0)) / g.htheta);
        for j in 1..nt - 1 {
            out.set(i, j, (u.at(i, j + 1) - u.at(i, j - 1)) / two_h);
        }
        out.set(i, nt - 1, (u.at(i, nt - 1) - u.at(i, nt - 2)) / g.htheta);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::WeightFamily;
    use crate::grid::ProblemParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(nr: usize, nt: usize) -> Arc<AnnulusGrid<f64>> {
        AnnulusGrid::build(
            ProblemParams {
                dim: 3,
                exponent: 4.0,
                inner_radius: 1.0,
                outer_radius: 2.0,
                weight: WeightFamily::Constant { value: 1.0 },
            },
            nr,
            nt,
        )
        .unwrap()
    }

    fn random_interior(g: &Arc<AnnulusGrid<f64>>, rng: &mut ChaCha8Rng) -> Field<f64> {
        let mut f = Field::zeros(g);
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                f.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        f
    }

    #[test]
    fn form_is_symmetric_bit_for_bit_and_positive() {
        let g = grid(11, 13);
        let ops = OperatorSet::assemble(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = random_interior(&g, &mut rng);
            let v = random_interior(&g, &mut rng);
            let buv = ops.stiffness_form(&u, &v).unwrap();
            let bvu = ops.stiffness_form(&v, &u).unwrap();
            assert_eq!(buv, bvu, "assembly must be symmetric exactly");
            let quad = ops.stiffness_form(&u, &u).unwrap();
            assert!(quad > 0.0 && quad >= ops.mass_form(&u, &u));
        }
    }

    #[test]
    fn green_identity_connects_form_and_operator() {
        let g = grid(9, 11);
        let ops = OperatorSet::assemble(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let u = random_interior(&g, &mut rng);
            let v = random_interior(&g, &mut rng);
            let lhs = ops.stiffness_form(&u, &v).unwrap();
            let rhs = ops.mass_form(&ops.apply_pde_operator(&u), &v);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs() + 1.0),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn matrix_action_agrees_with_form() {
        let g = grid(9, 9);
        let ops = OperatorSet::assemble(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_interior(&g, &mut rng);
        let v = random_interior(&g, &mut rng);
        let su = ops.apply_stiffness(&u);
        let dot: f64 = su.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
        let form = ops.stiffness_form(&u, &v).unwrap();
        assert!((dot - form).abs() <= 1e-12 * (dot.abs() + form.abs() + 1.0));
    }

    #[test]
    fn nonzero_boundary_is_rejected() {
        let g = grid(9, 9);
        let ops = OperatorSet::assemble(&g);
        let mut f = Field::zeros(&g);
        f.set(0, 4, 1.0);
        assert!(matches!(
            ops.h1_norm_sq(&f),
            Err(Error::NonzeroBoundary { .. })
        ));
    }

    /// Manufactured radial solution: v = sin(π(r-R0)/(R1-R0)), N = 3, with
    /// f = -v'' - (2/r) v' + v known in closed form.  The node-wise operator
    /// residual must shrink at second order.
    #[test]
    fn manufactured_solution_residual_is_second_order() {
        let pi = std::f64::consts::PI;
        let sol = |r: f64| (pi * (r - 1.0)).sin();
        let rhs = |r: f64| {
            pi * pi * (pi * (r - 1.0)).sin() - (2.0 / r) * pi * (pi * (r - 1.0)).cos()
                + (pi * (r - 1.0)).sin()
        };
        let mut sups = Vec::new();
        for n in [17usize, 33, 65] {
            let g = grid(n, 9);
            let ops = OperatorSet::assemble(&g);
            let v = Field::from_fn(&g, |r, _| sol(r));
            let lv = ops.apply_pde_operator(&v);
            let mut sup: f64 = 0.0;
            for i in 1..g.nr - 1 {
                for j in 0..g.ntheta {
                    sup = sup.max((lv.at(i, j) - rhs(g.r_nodes[i])).abs());
                }
            }
            sups.push(sup);
        }
        let order1 = (sups[0] / sups[1]).log2();
        let order2 = (sups[1] / sups[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1:.2} {order2:.2}, sups {sups:?}");
    }

    /// Y(θ) = 1 - N sin²θ satisfies -Δ_{S^{N-1}} Y = 2N·Y; the discrete
    /// Laplace-Beltrami action must reproduce 6·Y (N = 3) at O(h²) away from
    /// the poles.
    #[test]
    fn laplace_beltrami_eigencheck_second_order_away_from_poles() {
        let mut sups = Vec::new();
        for n in [17usize, 33, 65] {
            // Refine r and θ together: the r²-correction of the boundary
            // half-cells is O(h_r), so a fixed radial mesh would plateau.
            let g = grid(n, n);
            let ops = OperatorSet::assemble(&g);
            let y = Field::from_fn(&g, |_, t| 1.0 - 3.0 * t.sin().powi(2));
            let lb = ops.apply_laplace_beltrami(&y);
            // Fixed angular collar: pointwise truncation does not decay at
            // the pole itself, so compare on |θ| ≤ 1.2 only.
            let mut sup: f64 = 0.0;
            for i in 1..g.nr - 1 {
                for j in 0..g.ntheta {
                    if g.theta_nodes[j].abs() <= 1.2 {
                        sup = sup.max((lb.at(i, j) - 6.0 * y.at(i, j)).abs());
                    }
                }
            }
            sups.push(sup);
        }
        assert!(sups[0] / sups[1] > 3.0, "{sups:?}");
        assert!(sups[1] / sups[2] > 3.0, "{sups:?}");
    }

    #[test]
    fn injected_angular_fault_breaks_the_eigencheck() {
        let g = grid(9, 33);
        let ops = OperatorSet::assemble_with(&g, Some(AssemblyFault::NegateAngularFlux));
        let y = Field::from_fn(&g, |_, t| 1.0 - 3.0 * t.sin().powi(2));
        let lb = ops.apply_laplace_beltrami(&y);
        let mid = g.equator();
        // Sign is flipped: nowhere near 6Y at the equator band.
        let defect = (lb.at(4, mid) - 6.0 * y.at(4, mid)).abs();
        assert!(defect > 1.0, "fault must be visible, defect {defect}");
    }

    #[test]
    fn dtheta_is_centered_inside_and_one_sided_at_poles() {
        let mut sup_int = Vec::new();
        for nt in [17usize, 33] {
            let g = grid(7, nt);
            let f = Field::from_fn(&g, |r, t| r * t.sin());
            let d = apply_dtheta(&f);
            let mut sup: f64 = 0.0;
            for i in 0..g.nr {
                for j in 1..g.ntheta - 1 {
                    sup = sup.max((d.at(i, j) - g.r_nodes[i] * g.theta_nodes[j].cos()).abs());
                }
            }
            sup_int.push(sup);
            // One-sided first-order at the poles: error O(h), not garbage.
            let pole_err = (d.at(3, 0) - g.r_nodes[3] * g.theta_nodes[0].cos()).abs();
            assert!(pole_err < 2.0 * g.htheta * g.r_nodes[3]);
        }
        assert!(sup_int[0] / sup_int[1] > 3.0, "{sup_int:?}");
    }

    #[test]
    fn triplet_dump_matches_matrix_action() {
        let g = grid(7, 9);
        let ops = OperatorSet::assemble(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = random_interior(&g, &mut rng);
        let mut y = vec![0.0; g.len()];
        for &(r, c, v) in &ops.stiffness_triplets() {
            y[r] += v * u.values[c];
        }
        let su = ops.apply_stiffness(&u);
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                let k = g.idx(i, j);
                assert!((y[k] - su.values[k]).abs() < 1e-13 * (1.0 + su.values[k].abs()));
            }
        }
    }
}
