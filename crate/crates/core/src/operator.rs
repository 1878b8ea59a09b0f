//! Finite-difference Neumann operator `L = -laplace + q`: assembly,
//! eigenproblem and direct boundary-value solves.
//!
//! The Laplacian uses second-order central differences with the Neumann
//! condition imposed by ghost-node reflection (mirror values across the
//! boundary, double mirror at rectangle corners). Scaling the raw stencil
//! rows by the trapezoid mass weights makes the stiffness matrix symmetric,
//! so the eigenproblem reduces to a standard symmetric one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, DomainKind, Grid, Potential};
use crate::linalg::{self, Mat};

/// Assembled discrete operator: symmetric stiffness `A` and diagonal mass
/// weights `M`, so that the eigenproblem reads `A u = lambda M u` and the
/// Neumann BVP `(A - lambda M) u = b(f)`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub boundary: BoundaryMesh,
    pub potential: Potential,
    pub stiffness: Mat,
    pub mass: Vec<f64>,
}

/// One-dimensional mirror-Neumann stencil row coefficients.
/// Returns (diagonal, off-diagonal toward interior) for node `i` of `n`.
fn stencil_1d(i: usize, n: usize, h: f64) -> (f64, f64) {
    let inv_h2 = 1.0 / (h * h);
    if i == 0 || i == n - 1 {
        (2.0 * inv_h2, -2.0 * inv_h2)
    } else {
        (2.0 * inv_h2, -inv_h2)
    }
}

/// Assemble `A = M (-laplace_h + q)` with trapezoid mass weights `M`.
pub fn assemble_operator(
    grid: &Grid,
    boundary: &BoundaryMesh,
    potential: &Potential,
) -> Result<DiscreteOperator> {
    if !potential.matches(grid) {
        return Err(Error::ShapeMismatch);
    }
    let na = grid.n_a();
    let nb = grid.n_b();
    let dof = grid.dof();
    let mass = grid.mass_weights();
    let mut a = Mat::zeros(dof, dof);

    for j in 0..nb {
        for i in 0..na {
            let r = grid.flat(i, j);
            let m = mass[r];
            let mut diag = potential.values[r];

            let (dx, ox) = stencil_1d(i, na, grid.h_a);
            diag += dx;
            if i == 0 {
                a.add_to(r, grid.flat(1, j), m * ox);
            } else if i == na - 1 {
                a.add_to(r, grid.flat(na - 2, j), m * ox);
            } else {
                a.add_to(r, grid.flat(i - 1, j), m * ox);
                a.add_to(r, grid.flat(i + 1, j), m * ox);
            }

            if grid.spec.kind == DomainKind::Rectangle {
                let (dy, oy) = stencil_1d(j, nb, grid.h_b);
                diag += dy;
                if j == 0 {
                    a.add_to(r, grid.flat(i, 1), m * oy);
                } else if j == nb - 1 {
                    a.add_to(r, grid.flat(i, nb - 2), m * oy);
                } else {
                    a.add_to(r, grid.flat(i, j - 1), m * oy);
                    a.add_to(r, grid.flat(i, j + 1), m * oy);
                }
            }

            a.add_to(r, r, m * diag);
        }
    }

    Ok(DiscreteOperator {
        grid: grid.clone(),
        boundary: boundary.clone(),
        potential: potential.clone(),
        stiffness: a,
        mass,
    })
}

/// Eigenpair of the discrete Neumann operator.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Mass-normalised interior eigenvector.
    pub vector: Vec<f64>,
    /// Restriction of the eigenvector to the boundary nodes.
    pub trace: Vec<f64>,
}

/// Lowest eigenpairs, ascending, mass-normalised. Trace signs are whatever
/// the solver produced; nothing downstream may rely on them.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub pairs: Vec<EigenPair>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// Reject spectra with a gap below `eps_gap` among eigenvalues up to
    /// `lambda_max` (the simplicity hypothesis of the recovery pipeline).
    pub fn check_simple(&self, eps_gap: f64, lambda_max: f64) -> Result<()> {
        for w in self.pairs.windows(2) {
            if w[0].lambda > lambda_max {
                break;
            }
            if w[1].lambda - w[0].lambda < eps_gap {
                return Err(Error::DegenerateSpectrum);
            }
        }
        Ok(())
    }
}

/// Solve the symmetric eigenproblem `A u = lambda M u` and keep the lowest
/// `j_max` pairs.
pub fn eigensolve(op: &DiscreteOperator, j_max: usize) -> Result<EigenSystem> {
    let dof = op.grid.dof();
    if j_max > dof {
        return Err(Error::InvalidSpec("j_max exceeds the DOF count"));
    }
    // Standard form: Ahat = M^{-1/2} A M^{-1/2}.
    let sqrt_m: Vec<f64> = op.mass.iter().map(|&m| libm::sqrt(m)).collect();
    let mut ahat = Mat::zeros(dof, dof);
    for i in 0..dof {
        for j in 0..dof {
            let v = op.stiffness.get(i, j) / (sqrt_m[i] * sqrt_m[j]);
            ahat.set(i, j, v);
        }
    }
    // Enforce exact symmetry against assembly roundoff.
    for i in 0..dof {
        for j in 0..i {
            let v = 0.5 * (ahat.get(i, j) + ahat.get(j, i));
            ahat.set(i, j, v);
            ahat.set(j, i, v);
        }
    }
    let eig = linalg::sym_eigen(&ahat)?;
    let mut pairs = Vec::with_capacity(j_max);
    for k in 0..j_max {
        let y = eig.vectors.column(k);
        let vector: Vec<f64> = y.iter().zip(sqrt_m.iter()).map(|(v, s)| v / s).collect();
        let trace: Vec<f64> = op
            .boundary
            .nodes
            .iter()
            .map(|n| vector[n.grid_index])
            .collect();
        pairs.push(EigenPair {
            lambda: eig.values[k],
            vector,
            trace,
        });
    }
    Ok(EigenSystem { pairs })
}

/// Load vector induced by ghost-node Neumann data: `b = 0` in the interior
/// and `b_i = f_i w_i` at boundary node `i` (quadrature weight `w_i`).
pub fn load_vector(op: &DiscreteOperator, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), op.boundary.len());
    let mut b = vec![0.0; op.grid.dof()];
    for (node, &fv) in op.boundary.nodes.iter().zip(f.iter()) {
        b[node.grid_index] += fv * node.weight;
    }
    b
}

/// Shifted stiffness `A - lambda M`.
pub fn shifted_matrix(op: &DiscreteOperator, lambda: f64) -> Mat {
    let dof = op.grid.dof();
    let mut m = op.stiffness.clone();
    for i in 0..dof {
        m.add_to(i, i, -lambda * op.mass[i]);
    }
    m
}

/// Solve `(L - lambda) u = 0` in D with Neumann data `u_N = f` on S
/// (outward normal). Returns the interior solution and its Dirichlet trace.
pub fn solve_neumann_bvp(
    op: &DiscreteOperator,
    lambda: f64,
    f: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.len() != op.boundary.len() {
        return Err(Error::ShapeMismatch);
    }
    let sys = shifted_matrix(op, lambda);
    let lu = linalg::lu_factor(&sys)?;
    let b = load_vector(op, f);
    let u = lu.solve(&b);
    let trace: Vec<f64> = op
        .boundary
        .nodes
        .iter()
        .map(|n| u[n.grid_index])
        .collect();
    Ok((u, trace))
}

/// Discrete L2(D) inner product under the operator's mass weights.
pub fn mass_inner(op: &DiscreteOperator, u: &[f64], v: &[f64]) -> f64 {
    op.mass
        .iter()
        .zip(u.iter())
        .zip(v.iter())
        .map(|((m, a), b)| m * a * b)
        .sum()
}
