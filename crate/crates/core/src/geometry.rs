//! Domain geometry: uniform grids on an interval or rectangle, the
//! parameterised boundary with trapezoid quadrature, and nodal potentials.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Fourth root of two. Default rectangle aspect ratio `extent_b/extent_a`;
/// keeps the separable eigenvalues `m^2 pi^2/a^2 + n^2 pi^2/b^2` pairwise
/// distinct for every index pair reachable at desk scale.
pub const DEFAULT_ASPECT: f64 = 1.189207115002721;

const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// Discretisation request: domain kind, extents and grid-point counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub extent_a: f64,
    pub extent_b: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl DomainSpec {
    pub fn interval(extent_a: f64, n_a: usize) -> Self {
        DomainSpec {
            kind: DomainKind::Interval,
            extent_a,
            extent_b: 0.0,
            n_a,
            n_b: 1,
        }
    }

    pub fn rectangle(extent_a: f64, extent_b: f64, n_a: usize, n_b: usize) -> Self {
        DomainSpec {
            kind: DomainKind::Rectangle,
            extent_a,
            extent_b,
            n_a,
            n_b,
        }
    }

    /// Rectangle with the default irrational aspect ratio.
    pub fn rectangle_default_aspect(extent_a: f64, n_a: usize, n_b: usize) -> Self {
        Self::rectangle(extent_a, extent_a * DEFAULT_ASPECT, n_a, n_b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extent_a > 0.0) || !self.extent_a.is_finite() {
            return Err(Error::InvalidSpec("extent_a must be positive"));
        }
        if self.n_a < MIN_GRID {
            return Err(Error::InvalidSpec("n_a must be at least 8"));
        }
        if self.kind == DomainKind::Rectangle {
            if !(self.extent_b > 0.0) || !self.extent_b.is_finite() {
                return Err(Error::InvalidSpec("extent_b must be positive"));
            }
            if self.n_b < MIN_GRID {
                return Err(Error::InvalidSpec("n_b must be at least 8"));
            }
        }
        Ok(())
    }

    /// Total number of grid nodes.
    pub fn dof(&self) -> usize {
        match self.kind {
            DomainKind::Interval => self.n_a,
            DomainKind::Rectangle => self.n_a * self.n_b,
        }
    }
}

/// Uniform tensor grid. Flat node index is `j * n_a + i` with `i` along x
/// and `j` along y (`j = 0` only, for the interval).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: DomainSpec,
    pub h_a: f64,
    pub h_b: f64,
}

impl Grid {
    pub fn n_a(&self) -> usize {
        self.spec.n_a
    }

    pub fn n_b(&self) -> usize {
        match self.spec.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => self.spec.n_b,
        }
    }

    pub fn dof(&self) -> usize {
        self.spec.dof()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h_a
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h_b
    }

    #[inline]
    pub fn flat(&self, i: usize, j: usize) -> usize {
        j * self.spec.n_a + i
    }

    pub fn node_xy(&self, flat: usize) -> (f64, f64) {
        let i = flat % self.spec.n_a;
        let j = flat / self.spec.n_a;
        (self.x(i), self.y(j))
    }

    /// Trapezoid weights realising the discrete L2(D) inner product.
    pub fn mass_weights(&self) -> Vec<f64> {
        let na = self.n_a();
        let nb = self.n_b();
        let wx = |i: usize| {
            if i == 0 || i == na - 1 {
                0.5 * self.h_a
            } else {
                self.h_a
            }
        };
        match self.spec.kind {
            DomainKind::Interval => (0..na).map(wx).collect(),
            DomainKind::Rectangle => {
                let wy = |j: usize| {
                    if j == 0 || j == nb - 1 {
                        0.5 * self.h_b
                    } else {
                        self.h_b
                    }
                };
                let mut w = Vec::with_capacity(na * nb);
                for j in 0..nb {
                    for i in 0..na {
                        w.push(wx(i) * wy(j));
                    }
                }
                w
            }
        }
    }
}

/// One node of the discretised boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    /// Flat grid index of the node.
    pub grid_index: usize,
    /// Arclength coordinate along the boundary curve.
    pub s: f64,
    /// Quadrature weight.
    pub weight: f64,
}

/// Parameterised boundary with quadrature weights.
///
/// Rectangle boundaries are closed curves enumerated counterclockwise from
/// the origin corner; interval "boundaries" are the two endpoints with unit
/// weights (point evaluation), `closed = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub nodes: Vec<BoundaryNode>,
    pub closed: bool,
    pub perimeter: f64,
}

impl BoundaryMesh {
    /// Closed curve with uniformly spaced nodes, detached from any grid
    /// (node `k` has grid index `k`). Used when a boundary trace is given
    /// on its own, without a domain behind it.
    pub fn closed_uniform(count: usize, perimeter: f64) -> Self {
        assert!(count >= 3 && perimeter > 0.0);
        let h = perimeter / count as f64;
        let nodes = (0..count)
            .map(|k| BoundaryNode {
                grid_index: k,
                s: k as f64 * h,
                weight: h,
            })
            .collect();
        BoundaryMesh {
            nodes,
            closed: true,
            perimeter,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.weight).collect()
    }

    pub fn arclengths(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.s).collect()
    }

    /// Boundary quadrature of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        self.nodes
            .iter()
            .zip(values.iter())
            .map(|(n, v)| n.weight * v)
            .sum()
    }
}

/// Build the grid and boundary mesh for a validated spec.
pub fn build_domain(spec: &DomainSpec) -> Result<(Grid, BoundaryMesh)> {
    spec.validate()?;
    let h_a = spec.extent_a / (spec.n_a - 1) as f64;
    let h_b = match spec.kind {
        DomainKind::Interval => 0.0,
        DomainKind::Rectangle => spec.extent_b / (spec.n_b - 1) as f64,
    };
    let grid = Grid {
        spec: *spec,
        h_a,
        h_b,
    };
    let boundary = match spec.kind {
        DomainKind::Interval => {
            let nodes = alloc::vec![
                BoundaryNode {
                    grid_index: 0,
                    s: 0.0,
                    weight: 1.0,
                },
                BoundaryNode {
                    grid_index: spec.n_a - 1,
                    s: spec.extent_a,
                    weight: 1.0,
                },
            ];
            BoundaryMesh {
                nodes,
                closed: false,
                perimeter: 2.0,
            }
        }
        DomainKind::Rectangle => rectangle_boundary(&grid),
    };
    Ok((grid, boundary))
}

fn rectangle_boundary(grid: &Grid) -> BoundaryMesh {
    let na = grid.n_a();
    let nb = grid.n_b();
    let a = grid.spec.extent_a;
    let b = grid.spec.extent_b;
    let mut nodes = Vec::with_capacity(2 * (na - 1) + 2 * (nb - 1));
    // Counterclockwise, each edge owns its starting corner.
    for i in 0..na - 1 {
        nodes.push((grid.flat(i, 0), i as f64 * grid.h_a));
    }
    for j in 0..nb - 1 {
        nodes.push((grid.flat(na - 1, j), a + j as f64 * grid.h_b));
    }
    for i in (1..na).rev() {
        nodes.push((grid.flat(i, nb - 1), a + b + (na - 1 - i) as f64 * grid.h_a));
    }
    for j in (1..nb).rev() {
        nodes.push((grid.flat(0, j), 2.0 * a + b + (nb - 1 - j) as f64 * grid.h_b));
    }
    let perimeter = 2.0 * (a + b);
    let count = nodes.len();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let s = nodes[k].1;
        let s_prev = nodes[(k + count - 1) % count].1;
        let s_next = nodes[(k + 1) % count].1;
        let gap_prev = if k == 0 { perimeter - s_prev } else { s - s_prev };
        let gap_next = if k == count - 1 {
            perimeter - s
        } else {
            s_next - s
        };
        out.push(BoundaryNode {
            grid_index: nodes[k].0,
            s,
            weight: 0.5 * (gap_prev + gap_next),
        });
    }
    BoundaryMesh {
        nodes: out,
        closed: true,
        perimeter,
    }
}

/// Nodal values of the real potential `q` on the domain grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub values: Vec<f64>,
    pub n_a: usize,
    pub n_b: usize,
}

impl Potential {
    pub fn zero(grid: &Grid) -> Self {
        Potential {
            values: alloc::vec![0.0; grid.dof()],
            n_a: grid.n_a(),
            n_b: grid.n_b(),
        }
    }

    pub fn zero_like(other: &Potential) -> Self {
        Potential {
            values: alloc::vec![0.0; other.values.len()],
            n_a: other.n_a,
            n_b: other.n_b,
        }
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.n_a == grid.n_a() && self.n_b == grid.n_b() && self.values.len() == grid.dof()
    }
}

/// Sample a scalar field at the grid nodes.
pub fn sample_potential<F>(grid: &Grid, formula: F) -> Result<Potential>
where
    F: Fn(f64, f64) -> f64,
{
    let mut values = Vec::with_capacity(grid.dof());
    for j in 0..grid.n_b() {
        for i in 0..grid.n_a() {
            let v = formula(grid.x(i), grid.y(j));
            if !v.is_finite() {
                return Err(Error::NonFiniteValue);
            }
            values.push(v);
        }
    }
    Ok(Potential {
        values,
        n_a: grid.n_a(),
        n_b: grid.n_b(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn interval_boundary_is_two_endpoints() {
        let spec = DomainSpec::interval(PI, 101);
        let (grid, boundary) = build_domain(&spec).unwrap();
        assert_eq!(boundary.len(), 2);
        assert!(!boundary.closed);
        assert_eq!(boundary.nodes[0].s, 0.0);
        assert!((boundary.nodes[1].s - PI).abs() < 1e-15);
        assert_eq!(boundary.nodes[0].weight, 1.0);
        assert_eq!(boundary.nodes[1].weight, 1.0);
        assert!((grid.h_a - PI / 100.0).abs() < 1e-15);
    }

    #[test]
    fn rectangle_perimeter_matches_weights() {
        let spec = DomainSpec::rectangle_default_aspect(PI, 41, 41);
        let (_, boundary) = build_domain(&spec).unwrap();
        assert!(boundary.closed);
        let expect = 2.0 * PI * (1.0 + DEFAULT_ASPECT);
        assert!((boundary.perimeter - expect).abs() / expect < 1e-12);
        let total: f64 = boundary.weights().iter().sum();
        assert!((total - boundary.perimeter).abs() / boundary.perimeter < 1e-12);
        let ones = alloc::vec![1.0; boundary.len()];
        assert!((boundary.integrate(&ones) - boundary.perimeter).abs() / boundary.perimeter < 1e-12);
    }

    #[test]
    fn rectangle_boundary_nodes_bijective_and_ordered() {
        let spec = DomainSpec::rectangle(2.0, 3.0, 9, 11);
        let (grid, boundary) = build_domain(&spec).unwrap();
        assert_eq!(boundary.len(), 2 * (9 - 1) + 2 * (11 - 1));
        // Strictly increasing arclength.
        for w in boundary.nodes.windows(2) {
            assert!(w[1].s > w[0].s);
        }
        // Each boundary grid node appears exactly once.
        let mut seen = alloc::vec![false; grid.dof()];
        for node in &boundary.nodes {
            assert!(!seen[node.grid_index]);
            seen[node.grid_index] = true;
            let (x, y) = grid.node_xy(node.grid_index);
            let on_edge = x == 0.0
                || y == 0.0
                || (x - 2.0).abs() < 1e-12
                || (y - 3.0).abs() < 1e-12;
            assert!(on_edge);
        }
        let boundary_count = seen.iter().filter(|&&b| b).count();
        assert_eq!(boundary_count, boundary.len());
    }

    #[test]
    fn rectangle_edge_quadrature_is_second_order_on_linear() {
        // Linear-in-arclength integrand over the bottom edge only.
        let spec = DomainSpec::rectangle(1.0, 1.0, 21, 21);
        let (_, boundary) = build_domain(&spec).unwrap();
        // Integrate s over s in [0,1) along the bottom edge: restrict to
        // bottom-edge nodes and their interior trapezoid weights.
        let mut total = 0.0;
        for node in &boundary.nodes {
            if node.s < 1.0 - 1e-12 {
                total += node.weight * node.s;
            }
        }
        // Endpoint node at s=1 belongs to the right edge; the sum above is
        // a trapezoid rule missing the right endpoint contribution h/2 * 1.
        let h = 1.0 / 20.0;
        total += 0.5 * h * 1.0;
        assert!((total - 0.5).abs() < h * h);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert_eq!(
            build_domain(&DomainSpec::interval(-1.0, 101)).unwrap_err(),
            Error::InvalidSpec("extent_a must be positive")
        );
        assert!(build_domain(&DomainSpec::interval(1.0, 4)).is_err());
        assert!(build_domain(&DomainSpec::rectangle(-1.0, 1.0, 9, 9)).is_err());
        assert!(build_domain(&DomainSpec::rectangle(1.0, 1.0, 9, 3)).is_err());
    }

    #[test]
    fn potential_sampling() {
        let (grid, _) = build_domain(&DomainSpec::interval(1.0, 11)).unwrap();
        let q = sample_potential(&grid, |x, _| x).unwrap();
        for (i, v) in q.values.iter().enumerate() {
            assert!((v - i as f64 * 0.1).abs() < 1e-14);
        }
        let zero = sample_potential(&grid, |_, _| 0.0).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        assert_eq!(
            sample_potential(&grid, |x, _| 1.0 / x).unwrap_err(),
            Error::NonFiniteValue
        );

        let (grid2, _) = build_domain(&DomainSpec::rectangle(PI, PI, 9, 9)).unwrap();
        let q2 = sample_potential(&grid2, |x, _| 1.0 + 0.3 * libm::sin(x)).unwrap();
        assert!(q2.values.iter().all(|&v| (0.7..=1.3).contains(&v)));
    }
}
