//! Spectral-data pipeline checks: the truncated N-D map against direct
//! solves and a closed-form interval solution, truncation decay, and
//! round trips through theta synthesis/extraction.

use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thetainv_core::geometry::{build_domain, sample_potential, DomainSpec};
use thetainv_core::operator::{assemble_operator, eigensolve, solve_neumann_bvp, DiscreteOperator};
use thetainv_core::spectral::{extract_eigendata, nd_map, synthesize_theta};

fn operator(spec: &DomainSpec, q: impl Fn(f64, f64) -> f64) -> DiscreteOperator {
    let (grid, boundary) = build_domain(spec).unwrap();
    let pot = sample_potential(&grid, q).unwrap();
    assemble_operator(&grid, &boundary, &pot).unwrap()
}

#[test]
fn interval_nd_matches_hyperbolic_closed_form() {
    // q = 0, lambda = -1 on [0, pi]: the solution with data (1, 0) is
    // cosh(pi - x)/sinh(pi), so h(0) = coth(pi) and h(pi) = 1/sinh(pi).
    let op = operator(&DomainSpec::interval(PI, 401), |_, _| 0.0);
    let eig = eigensolve(&op, op.grid.dof()).unwrap();
    let nd = nd_map(&eig, -1.0, op.grid.dof(), &op.boundary, 1e-9).unwrap();
    let h = nd.apply(&[1.0, 0.0]);
    let sinh_pi = PI.sinh();
    assert!((h[0] - PI.cosh() / sinh_pi).abs() < 1e-4, "{}", h[0]);
    assert!((h[1] - 1.0 / sinh_pi).abs() < 1e-4, "{}", h[1]);
}

#[test]
fn full_nd_map_equals_direct_solve() {
    let spec = DomainSpec::rectangle_default_aspect(1.0, 13, 11);
    let op = operator(&spec, |x, y| 1.0 + 0.4 * (PI * x).sin() * y);
    let dof = op.grid.dof();
    let eig = eigensolve(&op, dof).unwrap();
    let nd = nd_map(&eig, -2.0, dof, &op.boundary, 1e-9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..5 {
        let f: Vec<f64> = (0..op.boundary.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let (_, trace) = solve_neumann_bvp(&op, -2.0, &f).unwrap();
        let h = nd.apply(&f);
        let scale = trace.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
        for (a, b) in h.iter().zip(trace.iter()) {
            assert!((a - b).abs() < 1e-8 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn truncation_error_decays_monotonically() {
    // q = 0 interval at lambda = -1: the dominant tail entry is the
    // diagonal one, a sum of positive terms, so max-abs error must shrink
    // as the cut grows.
    let op = operator(&DomainSpec::interval(PI, 201), |_, _| 0.0);
    let dof = op.grid.dof();
    let eig = eigensolve(&op, dof).unwrap();
    let full = nd_map(&eig, -1.0, dof, &op.boundary, 1e-9).unwrap();
    let err = |cut: usize| -> f64 {
        let nd = nd_map(&eig, -1.0, cut, &op.boundary, 1e-9).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..op.boundary.len() {
            for k in 0..op.boundary.len() {
                worst = worst.max((nd.map.get(i, k) - full.map.get(i, k)).abs());
            }
        }
        worst
    };
    let errs: Vec<f64> = [2, 5, 10, 20, 50, 100].iter().map(|&c| err(c)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{:?}", errs);
    }
    // The discrete eigenvalues saturate near 4/h^2 instead of growing like
    // j^2, so the tail past j = 100 is ~100 terms of order 1e-4.
    assert!(errs.last().unwrap() < &2e-2, "{:?}", errs);
}

#[test]
fn extracted_jumps_exhaust_theta() {
    // The recovered squared traces must telescope back to the sampled
    // theta at the top of the grid.
    let spec = DomainSpec::rectangle_default_aspect(PI, 15, 13);
    let op = operator(&spec, |x, y| 0.5 * x + 0.2 * y);
    let eig = eigensolve(&op, 30).unwrap();
    // Stay below the near-degenerate pair at lambda ~ 5.05.
    let grid: Vec<f64> = (0..=100).map(|k| -0.5 + 0.05 * k as f64).collect();
    let samples = synthesize_theta(&eig, &grid, &op.boundary).unwrap();
    eig.check_simple(0.3, *grid.last().unwrap()).unwrap();
    let data = extract_eigendata(&samples, 0.3, 1e-12, Some(&eig)).unwrap();
    let top = grid.len() - 1;
    for i in 0..op.boundary.len() {
        let total: f64 = (0..data.eigenvalues.len())
            .map(|j| data.squared_traces.get(j, i))
            .sum();
        assert!((total - samples.theta.get(top, i)).abs() < 1e-12);
    }
}

#[test]
fn rectangle_round_trip_recovers_eigendata() {
    let spec = DomainSpec::rectangle_default_aspect(PI, 15, 13);
    let op = operator(&spec, |x, y| 0.5 * x + 0.2 * y);
    let eig = eigensolve(&op, 30).unwrap();
    let grid: Vec<f64> = (0..=100).map(|k| -0.5 + 0.05 * k as f64).collect();
    let samples = synthesize_theta(&eig, &grid, &op.boundary).unwrap();
    let data = extract_eigendata(&samples, 0.3, 1e-12, Some(&eig)).unwrap();
    let truth: Vec<_> = eig
        .pairs
        .iter()
        .take_while(|p| p.lambda < *grid.last().unwrap())
        .collect();
    assert_eq!(data.eigenvalues.len(), truth.len());
    for (j, p) in truth.iter().enumerate() {
        assert!((data.eigenvalues[j] - p.lambda).abs() < 1e-6);
        for i in 0..op.boundary.len() {
            let sq = p.trace[i] * p.trace[i];
            assert!((data.squared_traces.get(j, i) - sq).abs() < 1e-10);
        }
    }
}

#[test]
fn nd_map_is_symmetric_under_weights() {
    let spec = DomainSpec::rectangle_default_aspect(1.0, 13, 11);
    let op = operator(&spec, |x, y| x * x + y);
    let eig = eigensolve(&op, 40).unwrap();
    let nd = nd_map(&eig, -1.5, 40, &op.boundary, 1e-9).unwrap();
    assert!(nd.symmetry_defect(&op.boundary.weights()) < 1e-10);
}

#[test]
fn nd_map_is_linear() {
    let op = operator(&DomainSpec::interval(PI, 101), |x, _| x.sin());
    let eig = eigensolve(&op, 50).unwrap();
    let nd = nd_map(&eig, -1.0, 50, &op.boundary, 1e-9).unwrap();
    let f = [0.3, -0.7];
    let g = [1.1, 0.4];
    let sum: Vec<f64> = f.iter().zip(g.iter()).map(|(a, b)| 2.0 * a + b).collect();
    let lhs = nd.apply(&sum);
    let hf = nd.apply(&f);
    let hg = nd.apply(&g);
    for i in 0..2 {
        assert!((lhs[i] - (2.0 * hf[i] + hg[i])).abs() < 1e-13);
    }
}
