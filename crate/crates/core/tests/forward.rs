//! Forward-solver checks against independent oracles: a fine-grid solve of
//! the same eigenproblem, closed-form constant-coefficient solutions, and
//! the discrete spectral expansion identity.

use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thetainv_core::geometry::{build_domain, sample_potential, DomainSpec};
use thetainv_core::linalg;
use thetainv_core::operator::{
    assemble_operator, eigensolve, load_vector, mass_inner, shifted_matrix, solve_neumann_bvp,
    DiscreteOperator,
};

fn interval_operator(extent: f64, n: usize, q: impl Fn(f64) -> f64) -> DiscreteOperator {
    let (grid, boundary) = build_domain(&DomainSpec::interval(extent, n)).unwrap();
    let pot = sample_potential(&grid, |x, _| q(x)).unwrap();
    assemble_operator(&grid, &boundary, &pot).unwrap()
}

#[test]
fn linear_potential_matches_fine_grid_oracle() {
    // Oracle: the same eigenproblem on an 8x finer grid. The coarse answer
    // must sit within 1e-3 relative of the (much more accurate) fine one.
    let coarse = eigensolve(&interval_operator(1.0, 201, |x| x), 4).unwrap();
    let fine = eigensolve(&interval_operator(1.0, 1601, |x| x), 4).unwrap();
    for (c, f) in coarse.pairs.iter().zip(fine.pairs.iter()) {
        let scale = f.lambda.abs().max(1.0);
        assert!(
            (c.lambda - f.lambda).abs() / scale < 1e-3,
            "coarse {} vs fine {}",
            c.lambda,
            f.lambda
        );
    }
}

#[test]
fn shift_covariance() {
    let base = eigensolve(&interval_operator(PI, 151, |x| 0.2 * (3.0 * x).sin()), 6).unwrap();
    let shifted = eigensolve(
        &interval_operator(PI, 151, |x| 0.2 * (3.0 * x).sin() + 1.75),
        6,
    )
    .unwrap();
    for (b, s) in base.pairs.iter().zip(shifted.pairs.iter()) {
        assert!((s.lambda - b.lambda - 1.75).abs() < 1e-10);
        let same: f64 = b
            .vector
            .iter()
            .zip(s.vector.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let flip: f64 = b
            .vector
            .iter()
            .zip(s.vector.iter())
            .map(|(x, y)| (x + y).abs())
            .fold(0.0, f64::max);
        assert!(same.min(flip) < 1e-10);
    }
}

#[test]
fn shifted_system_is_self_adjoint() {
    let op = interval_operator(PI, 101, |x| x * x);
    let sys = shifted_matrix(&op, -0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dof = op.grid.dof();
    let scale = sys.max_abs();
    for _ in 0..5 {
        let u: Vec<f64> = (0..dof).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..dof).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let left = linalg::dot(&sys.mul_vec(&u), &v);
        let right = linalg::dot(&u, &sys.mul_vec(&v));
        assert!((left - right).abs() < 1e-12 * scale * dof as f64);
    }
}

#[test]
fn eigenbasis_expansion_reproduces_direct_solve() {
    // Discrete analogue of the spectral expansion of the Neumann solution:
    // with the full discrete basis the expansion is exact.
    let op = interval_operator(PI, 101, |x| 1.0 + 0.3 * x.sin());
    let eig = eigensolve(&op, op.grid.dof()).unwrap();
    let lambda = -1.3;
    let f = [0.8, -0.4];
    let (u_direct, _) = solve_neumann_bvp(&op, lambda, &f).unwrap();
    let b = load_vector(&op, &f);
    let mut u_exp = vec![0.0; op.grid.dof()];
    for pair in &eig.pairs {
        let coef = linalg::dot(&b, &pair.vector) / (pair.lambda - lambda);
        for (acc, v) in u_exp.iter_mut().zip(pair.vector.iter()) {
            *acc += coef * v;
        }
    }
    let scale = linalg::norm_inf(&u_direct);
    for (a, b) in u_direct.iter().zip(u_exp.iter()) {
        assert!((a - b).abs() < 1e-8 * scale);
    }
}

#[test]
fn eigenvalue_error_decays_second_order() {
    let err = |n: usize| -> f64 {
        let eig = eigensolve(&interval_operator(PI, n, |_| 0.0), 5).unwrap();
        let mut worst: f64 = 0.0;
        for (j, p) in eig.pairs.iter().enumerate().skip(1) {
            let truth = (j * j) as f64;
            worst = worst.max((p.lambda - truth).abs() / truth);
        }
        worst
    };
    let e51 = err(51);
    let e101 = err(101);
    let e201 = err(201);
    for ratio in [e51 / e101, e101 / e201] {
        assert!((3.5..=4.6).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn mass_orthonormality_of_eigenbasis() {
    let op = interval_operator(PI, 101, |x| x.cos());
    let eig = eigensolve(&op, 8).unwrap();
    for a in 0..8 {
        for b in 0..=a {
            let ip = mass_inner(&op, &eig.pairs[a].vector, &eig.pairs[b].vector);
            let expect = if a == b { 1.0 } else { 0.0 };
            let tol = if a == b { 1e-10 } else { 1e-8 };
            assert!((ip - expect).abs() < tol, "({a},{b}): {ip}");
        }
    }
}
