//! Principal Dirichlet eigenpair of the p-Laplacian by direct minimization of
//! the discrete nonlinear Rayleigh quotient
//!
//! ```text
//! R(u) = Σ_cells |∇u|_cell^p h²  /  Σ_nodes |u|^p h²,     λ_p = R^{1/p}.
//! ```
//!
//! `|∇u|_cell` is the Euclidean norm of the two cell-centered difference
//! quotients of the four corner values; outside nodes are held at 0, which
//! enforces the Dirichlet condition to O(h). The quotient is evaluated on the
//! field rescaled to max 1 (the scale cancels exactly), so powers stay finite
//! for p up to 128.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::experiments::{ContinuationTrace, TraceStep};
use crate::geometry::Extent;
use crate::grid::{GridDomain, ScalarField};
use crate::inf::ViolationReport;
use crate::par;
use serde::{Deserialize, Serialize};

pub const P_MAX: f64 = 128.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedChoice {
    Distance,
    Constant,
    #[serde(skip)]
    Field(ScalarField),
}

#[derive(Debug, Clone)]
pub struct PLapProblem<'g> {
    pub grid: &'g GridDomain,
    pub p: f64,
    /// Relative quotient change over a 20-iteration window that stops the descent.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: SeedChoice,
}

impl<'g> PLapProblem<'g> {
    pub fn new(grid: &'g GridDomain, p: f64) -> PLapProblem<'g> {
        PLapProblem {
            grid,
            p,
            tol: 1e-9,
            max_iters: 200_000,
            seed: SeedChoice::Distance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// λ_p estimate, `R^{1/p}` at the minimizer.
    pub lambda: f64,
    /// Minimizer, normalized to `Σ u^p h² = 1`.
    pub field: ScalarField,
    pub iterations: usize,
    /// Final relative quotient change over the stopping window.
    pub residual: f64,
    pub converged: bool,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EigenResult {
    /// The same field rescaled to max 1.
    pub fn max_normalized(&self) -> ScalarField {
        let m = self.field.max();
        if m > 0.0 {
            self.field.scaled(1.0 / m)
        } else {
            self.field.clone()
        }
    }
}

/// |x|^p with a fast path for integer p.
fn pow_abs(x: f64, p: f64) -> f64 {
    let xa = x.abs();
    if p == 0.0 {
        return 1.0;
    }
    if p.fract() == 0.0 && p <= 256.0 {
        xa.powi(p as i32)
    } else {
        xa.powf(p)
    }
}

/// g2^(p/2) for g2 ≥ 0, with a fast path for integer p/2.
fn pow_half(g2: f64, p: f64) -> f64 {
    let e = 0.5 * p;
    if e.fract() == 0.0 && e <= 128.0 {
        g2.powi(e as i32)
    } else {
        g2.powf(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuotientEval {
    pub ratio: f64,
    pub num: f64,
    pub den: f64,
    /// max|u| factored out before taking powers.
    pub scale: f64,
}

/// Discretized quotient machinery on the compact interior index space.
/// Exposed so benches can compare the sequential and parallel kernels.
pub struct PlapSystem<'g> {
    grid: &'g GridDomain,
    pub p: f64,
    h: f64,
    ninside: usize,
    /// Corner compact indices (bl, br, tl, tr) per active cell; -1 is outside (value 0).
    cells: Vec<[i32; 4]>,
    /// Lower-left node (ci, cj) per active cell.
    cell_pos: Vec<(u32, u32)>,
    /// Incident cell per role (node as bl, br, tl, tr); -1 if absent.
    node_cells: Vec<[i32; 4]>,
}

const ROLE_SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)];

impl<'g> PlapSystem<'g> {
    pub fn build(grid: &'g GridDomain, p: f64) -> Result<PlapSystem<'g>> {
        if !(2.0..=P_MAX).contains(&p) {
            return Err(Error::invalid("p", format!("must lie in [2, {P_MAX}], got {p}")));
        }
        let nodes = grid.inside_nodes();
        if nodes.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut compact_of = vec![-1i32; grid.node_count()];
        for (c, &n) in nodes.iter().enumerate() {
            compact_of[n as usize] = c as i32;
        }
        let (nx, ny) = (grid.nx, grid.ny);
        let mut cells = Vec::new();
        let mut cell_pos = Vec::new();
        let mut cell_of = vec![-1i32; (nx - 1) * (ny - 1)];
        for cj in 0..ny - 1 {
            for ci in 0..nx - 1 {
                let corners = [
                    compact_of[grid.index(ci, cj)],
                    compact_of[grid.index(ci + 1, cj)],
                    compact_of[grid.index(ci, cj + 1)],
                    compact_of[grid.index(ci + 1, cj + 1)],
                ];
                if corners.iter().any(|&c| c >= 0) {
                    cell_of[cj * (nx - 1) + ci] = cells.len() as i32;
                    cells.push(corners);
                    cell_pos.push((ci as u32, cj as u32));
                }
            }
        }
        let mut node_cells = vec![[-1i32; 4]; nodes.len()];
        for (c, &n) in nodes.iter().enumerate() {
            let (i, j) = grid.node_ij(n as usize);
            let cell_at = |ci: i64, cj: i64| -> i32 {
                if ci < 0 || cj < 0 || ci >= (nx - 1) as i64 || cj >= (ny - 1) as i64 {
                    -1
                } else {
                    cell_of[cj as usize * (nx - 1) + ci as usize]
                }
            };
            node_cells[c] = [
                cell_at(i as i64, j as i64),         // node is bl
                cell_at(i as i64 - 1, j as i64),     // node is br
                cell_at(i as i64, j as i64 - 1),     // node is tl
                cell_at(i as i64 - 1, j as i64 - 1), // node is tr
            ];
        }
        Ok(PlapSystem {
            grid,
            p,
            h: grid.h,
            ninside: nodes.len(),
            cells,
            cell_pos,
            node_cells,
        })
    }

    pub fn ninside(&self) -> usize {
        self.ninside
    }

    pub fn ncells(&self) -> usize {
        self.cells.len()
    }

    pub fn compact_from(&self, field: &ScalarField) -> Vec<f64> {
        self.grid
            .inside_nodes()
            .iter()
            .map(|&n| field[n as usize])
            .collect()
    }

    pub fn field_from(&self, values: &[f64]) -> ScalarField {
        let mut f = ScalarField::zeros(self.grid.node_count());
        for (c, &n) in self.grid.inside_nodes().iter().enumerate() {
            f[n as usize] = values[c];
        }
        f
    }

    #[inline]
    fn cell_gradient(&self, cell: usize, u: &[f64], inv_s: f64) -> (f64, f64, f64) {
        let [bl, br, tl, tr] = self.cells[cell];
        let get = |c: i32| if c < 0 { 0.0 } else { u[c as usize] * inv_s };
        let (vbl, vbr, vtl, vtr) = (get(bl), get(br), get(tl), get(tr));
        let gx = (vbr - vbl + vtr - vtl) / (2.0 * self.h);
        let gy = (vtl - vbl + vtr - vbr) / (2.0 * self.h);
        (gx, gy, gx * gx + gy * gy)
    }

    fn num_term(&self, cell: usize, u: &[f64], inv_s: f64) -> f64 {
        let (_, _, g2) = self.cell_gradient(cell, u, inv_s);
        pow_half(g2, self.p) * self.h * self.h
    }

    fn den_term(&self, c: usize, u: &[f64], inv_s: f64) -> f64 {
        pow_abs(u[c] * inv_s, self.p) * self.h * self.h
    }

    fn eval_from_sums(&self, num: f64, den: f64, scale: f64) -> Result<QuotientEval> {
        if den == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(QuotientEval {
            ratio: num / den,
            num,
            den,
            scale,
        })
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<QuotientEval> {
        let scale = par::max_indexed(self.ninside, |c| u[c].abs());
        if !(scale > 0.0) {
            return Err(Error::ZeroField);
        }
        let inv_s = 1.0 / scale;
        let num = par::sum_indexed(self.cells.len(), |cell| self.num_term(cell, u, inv_s));
        let den = par::sum_indexed(self.ninside, |c| self.den_term(c, u, inv_s));
        self.eval_from_sums(num, den, scale)
    }

    pub fn evaluate_seq(&self, u: &[f64]) -> Result<QuotientEval> {
        let scale = par::max_indexed_seq(self.ninside, |c| u[c].abs());
        if !(scale > 0.0) {
            return Err(Error::ZeroField);
        }
        let inv_s = 1.0 / scale;
        let num = par::sum_indexed_seq(self.cells.len(), |cell| self.num_term(cell, u, inv_s));
        let den = par::sum_indexed_seq(self.ninside, |c| self.den_term(c, u, inv_s));
        self.eval_from_sums(num, den, scale)
    }

    fn gradient_node(&self, c: usize, u: &[f64], eval: &QuotientEval) -> f64 {
        let p = self.p;
        let inv_s = 1.0 / eval.scale;
        let h2 = self.h * self.h;
        let mut dnum = 0.0;
        for (role, &cell) in self.node_cells[c].iter().enumerate() {
            if cell < 0 {
                continue;
            }
            let (gx, gy, g2) = self.cell_gradient(cell as usize, u, inv_s);
            if g2 == 0.0 {
                continue;
            }
            let coef = p * pow_half(g2, p - 2.0);
            let (sx, sy) = ROLE_SIGNS[role];
            dnum += coef * (gx * sx + gy * sy) / (2.0 * self.h) * h2;
        }
        let w = u[c] * inv_s;
        let dden = p * pow_abs(w, p - 1.0) * w.signum() * h2;
        (dnum - eval.ratio * dden) / eval.den * inv_s
    }

    pub fn gradient_into(&self, u: &[f64], eval: &QuotientEval, out: &mut [f64]) {
        par::fill_with(out, |c| self.gradient_node(c, u, eval));
    }

    pub fn gradient_into_seq(&self, u: &[f64], eval: &QuotientEval, out: &mut [f64]) {
        par::fill_with_seq(out, |c| self.gradient_node(c, u, eval));
    }
}

/// Discrete nonlinear Rayleigh quotient of a field.
pub fn rayleigh_quotient(field: &ScalarField, grid: &GridDomain, p: f64) -> Result<f64> {
    let sys = PlapSystem::build(grid, p)?;
    let u = sys.compact_from(field);
    Ok(sys.evaluate(&u)?.ratio)
}

/// Node-wise partial derivatives of the quotient; zero at outside nodes.
pub fn quotient_gradient(field: &ScalarField, grid: &GridDomain, p: f64) -> Result<ScalarField> {
    let sys = PlapSystem::build(grid, p)?;
    let u = sys.compact_from(field);
    let eval = sys.evaluate(&u)?;
    let mut g = vec![0.0; u.len()];
    sys.gradient_into(&u, &eval, &mut g);
    Ok(sys.field_from(&g))
}

/// Rescales a field so `Σ |u|^p h² = 1`.
pub fn normalize_lp(field: &ScalarField, grid: &GridDomain, p: f64) -> Result<ScalarField> {
    let mut out = field.clone();
    normalize_compact(
        &mut out.values,
        grid.inside_nodes().iter().map(|&n| n as usize),
        grid.h,
        p,
    )?;
    // values at outside nodes stay untouched by the iterator above; zero them
    for (idx, v) in out.values.iter_mut().enumerate() {
        if !grid.is_inside(idx) {
            *v = 0.0;
        }
    }
    Ok(out)
}

fn normalize_compact(
    values: &mut [f64],
    inside: impl Iterator<Item = usize> + Clone,
    h: f64,
    p: f64,
) -> Result<()> {
    let m = inside
        .clone()
        .fold(0.0f64, |acc, i| acc.max(values[i].abs()));
    if !(m > 0.0) {
        return Err(Error::ZeroField);
    }
    let mut sum = 0.0;
    for i in inside.clone() {
        sum += pow_abs(values[i] / m, p) * h * h;
    }
    let factor = m * sum.powf(1.0 / p);
    for i in inside {
        values[i] /= factor;
    }
    Ok(())
}

/// Projected gradient descent with backtracking on the quotient.
pub fn minimize_rayleigh(problem: &PLapProblem) -> Result<EigenResult> {
    let grid = problem.grid;
    let sys = PlapSystem::build(grid, problem.p)?;
    if !(problem.tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }

    let seed_field = match &problem.seed {
        SeedChoice::Distance => grid.dist().clone(),
        SeedChoice::Constant => {
            let mut f = ScalarField::zeros(grid.node_count());
            for &n in grid.inside_nodes() {
                f[n as usize] = 1.0;
            }
            f
        }
        SeedChoice::Field(f) => f.clone(),
    };
    let mut u = sys.compact_from(&seed_field);
    for v in u.iter_mut() {
        if *v < 0.0 {
            return Err(Error::invalid("seed", "must be nonnegative"));
        }
    }
    let h = grid.h;
    let n = u.len();
    normalize_compact(&mut u, 0..n, h, problem.p).map_err(|_| Error::ZeroField)?;

    let mut eval = sys.evaluate(&u)?;
    let mut history = vec![eval.ratio];
    let mut step = 1.0f64;
    let mut grad = vec![0.0; u.len()];
    let mut trial = vec![0.0; u.len()];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut floored = false;

    let window_rel = |history: &[f64]| -> f64 {
        let n = history.len();
        let back = n.saturating_sub(21);
        let old = history[back];
        let new = history[n - 1];
        ((old - new) / new).max(0.0)
    };

    while iterations < problem.max_iters {
        iterations += 1;
        sys.gradient_into(&u, &eval, &mut grad);
        let gmax = par::max_indexed(grad.len(), |c| grad[c].abs());
        if gmax == 0.0 {
            residual = 0.0;
            converged = true;
            break;
        }
        let umax = par::max_indexed(u.len(), |c| u[c].abs());
        let base = step * umax / gmax;
        let mut accepted = false;
        for halve in 0..=60u32 {
            let s = base * 0.5f64.powi(halve as i32);
            par::fill_with(&mut trial, |c| (u[c] - s * grad[c]).max(0.0));
            if normalize_compact(&mut trial, 0..n, h, problem.p).is_err() {
                continue; // everything clipped away; halve further
            }
            let teval = match sys.evaluate(&trial) {
                Ok(e) => e,
                Err(_) => continue,
            };
            if teval.ratio < eval.ratio {
                std::mem::swap(&mut u, &mut trial);
                eval = teval;
                step = (step * 1.1).min(1e6);
                accepted = true;
                break;
            }
        }
        if !accepted {
            // the quotient cannot decrease in fp: converged at the floor
            history.push(eval.ratio);
            residual = window_rel(&history);
            converged = true;
            floored = true;
            break;
        }
        debug_assert!(
            history.last().map(|&r| eval.ratio <= r).unwrap_or(true),
            "quotient increased on an accepted step"
        );
        history.push(eval.ratio);
        if history.len() >= 21 {
            residual = window_rel(&history);
            if residual < problem.tol {
                converged = true;
                break;
            }
        }
        if iterations % 1000 == 0 {
            log::debug!(
                "plap p={} iter {iterations}: R={:.12e}",
                problem.p,
                eval.ratio
            );
        }
    }

    let lambda = eval.ratio.powf(1.0 / problem.p);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("quotient".to_string(), eval.ratio);
    diagnostics.insert("step".to_string(), step);
    diagnostics.insert("line_search_floor".to_string(), f64::from(u8::from(floored)));
    Ok(EigenResult {
        lambda,
        field: sys.field_from(&u),
        iterations,
        residual,
        converged,
        diagnostics,
    })
}

/// Solves along an increasing p-schedule, seeding each solve with the previous
/// minimizer (max-renormalized).
pub fn p_continuation(
    grid: &GridDomain,
    p_schedule: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(ContinuationTrace, Vec<(f64, EigenResult)>)> {
    if p_schedule.is_empty() || p_schedule[0] != 2.0 {
        return Err(Error::invalid("p_schedule", "must start at 2"));
    }
    for w in p_schedule.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("p_schedule", "must be strictly increasing"));
        }
    }
    if *p_schedule.last().unwrap() > P_MAX {
        return Err(Error::invalid("p_schedule", format!("capped at {P_MAX}")));
    }

    let mut trace = ContinuationTrace { steps: Vec::new() };
    let mut states = Vec::new();
    let mut seed = SeedChoice::Distance;
    for &p in p_schedule {
        let start = std::time::Instant::now();
        let mut problem = PLapProblem::new(grid, p);
        problem.tol = tol;
        problem.max_iters = max_iters;
        problem.seed = seed.clone();
        let result = minimize_rayleigh(&problem)?;
        let norm = result.max_normalized();
        trace.steps.push(TraceStep {
            parameter: p,
            lambda: result.lambda,
            residual: result.residual,
            iterations: result.iterations,
            probe_left: grid.probe(&norm, -5.0, 0.0)?,
            probe_right: grid.probe(&norm, 5.0, 0.0)?,
            converged: result.converged,
            wall_time: start.elapsed().as_secs_f64(),
        });
        seed = SeedChoice::Field(norm);
        states.push((p, result));
    }
    Ok((trace, states))
}

/// Lemma-style decay bound in the tube: `u ≤ 6·min(δ−x₂, δ+x₂)^{(p−2)/(p−1)} + h`.
/// Applicable for p ≥ 7, λ < 2, and a field with max ≤ 1 on the checked region.
pub fn tube_decay_check(
    field: &ScalarField,
    grid: &GridDomain,
    p: f64,
    lambda: f64,
    delta: f64,
    x_range: (f64, f64),
) -> ViolationReport {
    let mut region_max = 0.0f64;
    let mut nodes = Vec::new();
    for &n in grid.inside_nodes() {
        let (x, y) = grid.coords(n as usize);
        if x >= x_range.0 && x <= x_range.1 && y.abs() < delta {
            region_max = region_max.max(field[n as usize]);
            nodes.push(n);
        }
    }
    if p < 7.0 || lambda >= 2.0 || region_max > 1.0 + 1e-12 {
        return ViolationReport {
            applicable: false,
            checked: 0,
            violations: 0,
            worst_margin: 0.0,
            sample_nodes: Vec::new(),
        };
    }
    let alpha = (p - 2.0) / (p - 1.0);
    let mut report = ViolationReport::clean(nodes.len());
    for n in nodes {
        let (_, y) = grid.coords(n as usize);
        let wall = (delta - y).min(delta + y);
        let bound = 6.0 * wall.powf(alpha) + grid.h;
        let margin = field[n as usize] - bound;
        if margin > 0.0 {
            report.push(n, margin);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TubeEnergy {
    /// `Σ ū |∇u|^{p-1} h²` over the region's cells.
    pub integral_u_grad: f64,
    /// `Σ |∇u|^p h²` over the region's cells.
    pub integral_grad: f64,
    pub root_u_grad: f64,
    pub root_grad: f64,
}

/// Both tube integrals of Lemma-2.2 type over a sub-rectangle, with their
/// p-th roots for bounded-growth diagnostics.
pub fn tube_energy(
    field: &ScalarField,
    grid: &GridDomain,
    p: f64,
    region: &Extent,
) -> Result<TubeEnergy> {
    let sys = PlapSystem::build(grid, p)?;
    let u = sys.compact_from(field);
    let h = grid.h;
    let mut any = false;
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    for (cell, corners) in sys.cells.iter().enumerate() {
        let (ci, cj) = sys.cell_pos[cell];
        let cx = 0.5 * (grid.x(ci as usize) + grid.x(ci as usize + 1));
        let cy = 0.5 * (grid.y(cj as usize) + grid.y(cj as usize + 1));
        if !region.contains(cx, cy) {
            continue;
        }
        any = true;
        let (_, _, g2) = sys.cell_gradient(cell, &u, 1.0);
        let get = |c: i32| if c < 0 { 0.0 } else { u[c as usize] };
        let mean = 0.25 * (get(corners[0]) + get(corners[1]) + get(corners[2]) + get(corners[3]));
        i2 += pow_half(g2, p) * h * h;
        i1 += mean * pow_half(g2, p - 1.0) * h * h;
    }
    if !any {
        return Err(Error::invalid("region", "contains no grid cells"));
    }
    Ok(TubeEnergy {
        integral_u_grad: i1,
        integral_grad: i2,
        root_u_grad: i1.powf(1.0 / p),
        root_grad: i2.powf(1.0 / p),
    })
}
