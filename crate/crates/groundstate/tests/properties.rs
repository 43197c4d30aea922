//! Property suites and independent oracles that cross-check the solvers.

use groundstate::geometry::DomainSpec;
use groundstate::grid::{GridDomain, ScalarField};
use groundstate::inf::{inf_update, InfProblem};
use groundstate::plap::{minimize_rayleigh, rayleigh_quotient, PLapProblem};
use proptest::prelude::*;
use rand::prelude::*;

/// Independent oracle: smallest eigenvalue of the standard 5-point Dirichlet
/// Laplacian via inverse power iteration with CG inner solves. Shares nothing
/// with the Rayleigh-quotient implementation path.
mod five_point {
    use groundstate::grid::GridDomain;

    pub struct Op<'g> {
        grid: &'g GridDomain,
        nodes: Vec<u32>,
        compact: Vec<i32>,
    }

    impl<'g> Op<'g> {
        pub fn new(grid: &'g GridDomain) -> Op<'g> {
            let nodes = grid.inside_nodes().to_vec();
            let mut compact = vec![-1i32; grid.node_count()];
            for (c, &n) in nodes.iter().enumerate() {
                compact[n as usize] = c as i32;
            }
            Op {
                grid,
                nodes,
                compact,
            }
        }

        pub fn len(&self) -> usize {
            self.nodes.len()
        }

        /// y = A x with A the 5-point Dirichlet Laplacian (values vanish
        /// outside the interior).
        pub fn apply(&self, x: &[f64], y: &mut [f64]) {
            let h2 = self.grid.h * self.grid.h;
            for (c, &n) in self.nodes.iter().enumerate() {
                let (i, j) = self.grid.node_ij(n as usize);
                let at = |ii: i64, jj: i64| -> f64 {
                    if ii < 0 || jj < 0 || ii >= self.grid.nx as i64 || jj >= self.grid.ny as i64 {
                        return 0.0;
                    }
                    let cc = self.compact[jj as usize * self.grid.nx + ii as usize];
                    if cc < 0 {
                        0.0
                    } else {
                        x[cc as usize]
                    }
                };
                let (i, j) = (i as i64, j as i64);
                y[c] = (4.0 * x[c] - at(i - 1, j) - at(i + 1, j) - at(i, j - 1) - at(i, j + 1))
                    / h2;
            }
        }

        fn dot(a: &[f64], b: &[f64]) -> f64 {
            a.iter().zip(b).map(|(x, y)| x * y).sum()
        }

        /// Conjugate gradients for A x = b.
        pub fn solve(&self, b: &[f64]) -> Vec<f64> {
            let n = self.len();
            let mut x = vec![0.0; n];
            let mut r = b.to_vec();
            let mut p = r.clone();
            let mut ap = vec![0.0; n];
            let mut rr = Self::dot(&r, &r);
            for _ in 0..10 * n {
                if rr.sqrt() < 1e-12 {
                    break;
                }
                self.apply(&p, &mut ap);
                let alpha = rr / Self::dot(&p, &ap);
                for k in 0..n {
                    x[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
                let rr2 = Self::dot(&r, &r);
                let beta = rr2 / rr;
                rr = rr2;
                for k in 0..n {
                    p[k] = r[k] + beta * p[k];
                }
            }
            x
        }

        /// Smallest eigenvalue by inverse power iteration.
        pub fn lambda_min(&self) -> f64 {
            let n = self.len();
            let mut x = vec![1.0; n];
            let mut lambda = 0.0;
            for _ in 0..60 {
                let y = self.solve(&x);
                let norm = Self::dot(&y, &y).sqrt();
                for k in 0..n {
                    x[k] = y[k] / norm;
                }
                let mut ax = vec![0.0; n];
                self.apply(&x, &mut ax);
                lambda = Self::dot(&x, &ax) / Self::dot(&x, &x);
            }
            lambda
        }
    }
}

#[test]
fn p2_matches_five_point_oracle_on_square() {
    let grid = GridDomain::rasterize(DomainSpec::unit_square(), 1.0 / 32.0, 1.0 / 16.0).unwrap();
    assert!(grid.nx <= 40 && grid.ny <= 40);
    let oracle = five_point::Op::new(&grid);
    let lambda_oracle = oracle.lambda_min().sqrt();

    let mut problem = PLapProblem::new(&grid, 2.0);
    problem.tol = 1e-10;
    let result = minimize_rayleigh(&problem).unwrap();
    let rel = (result.lambda - lambda_oracle).abs() / lambda_oracle;
    assert!(
        rel <= 0.005,
        "five-point oracle {lambda_oracle} vs minimizer {} (rel {rel:.5})",
        result.lambda
    );
}

#[test]
fn p2_tracks_five_point_oracle_on_disk() {
    // On a staircase boundary the cell-averaged energy and the 5-point stencil
    // treat the boundary layer differently, an O(h) effect (measured 1.25% at
    // h=1/16); both sit within the staircase error of the continuum value.
    let grid =
        GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 1.0 / 16.0, 1.0 / 8.0).unwrap();
    assert!(grid.nx <= 40 && grid.ny <= 40);
    let oracle = five_point::Op::new(&grid);
    let lambda_oracle = oracle.lambda_min().sqrt();

    let mut problem = PLapProblem::new(&grid, 2.0);
    problem.tol = 1e-10;
    let result = minimize_rayleigh(&problem).unwrap();
    let rel = (result.lambda - lambda_oracle).abs() / lambda_oracle;
    assert!(
        rel <= 0.02,
        "five-point oracle {lambda_oracle} vs minimizer {} (rel {rel:.5})",
        result.lambda
    );
    let continuum = 2.4048;
    assert!((result.lambda - continuum).abs() / continuum <= 0.05);
    assert!((lambda_oracle - continuum).abs() / continuum <= 0.05);
}

fn tiny_grid() -> GridDomain {
    GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 0.25, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quotient_is_zero_homogeneous(seed in 0u64..1000, c in 1e-3f64..1e3) {
        let grid = tiny_grid();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut f = ScalarField::zeros(grid.node_count());
        for &n in grid.inside_nodes() {
            f[n as usize] = rng.random::<f64>() + 1e-6;
        }
        let r = rayleigh_quotient(&f, &grid, 4.0).unwrap();
        let rc = rayleigh_quotient(&f.scaled(c), &grid, 4.0).unwrap();
        prop_assert!((rc - r).abs() <= 1e-12 * r);
    }

    #[test]
    fn update_preserves_order(seed in 0u64..1000) {
        let grid = tiny_grid();
        let mut problem = InfProblem::new(&grid, vec![]).unwrap();
        problem.lambda = 1.0;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut u = ScalarField::zeros(grid.node_count());
        let mut v = ScalarField::zeros(grid.node_count());
        for &n in grid.inside_nodes() {
            let a = rng.random::<f64>();
            u[n as usize] = a;
            v[n as usize] = (a + rng.random::<f64>() * 0.5).min(1.0);
        }
        let fu = inf_update(&u, &problem).unwrap();
        let fv = inf_update(&v, &problem).unwrap();
        for &n in grid.inside_nodes() {
            prop_assert!(fu[n as usize] <= fv[n as usize] + 1e-14);
        }
    }

    #[test]
    fn update_is_positively_homogeneous(seed in 0u64..1000, c in 0.1f64..10.0) {
        let grid = tiny_grid();
        let mut problem = InfProblem::new(&grid, vec![]).unwrap();
        problem.lambda = 1.0;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut u = ScalarField::zeros(grid.node_count());
        for &n in grid.inside_nodes() {
            u[n as usize] = rng.random::<f64>();
        }
        let fu = inf_update(&u, &problem).unwrap();
        let fcu = inf_update(&u.scaled(c), &problem).unwrap();
        for &n in grid.inside_nodes() {
            prop_assert!((fcu[n as usize] - c * fu[n as usize]).abs() <= 1e-14 * (1.0 + c));
        }
    }
}
