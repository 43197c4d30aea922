//! Monotone two-branch fixed-point solver for the infinity ground-state
//! equation `max{λ − |Du|/u, Δ_∞ u} = 0`, `u = 0` on the boundary.
//!
//! Per unpinned inside node the update is
//!
//! ```text
//! u(x) ← min( harmonic branch , gradient branch )
//! ```
//!
//! where the harmonic branch solves the two-sided slope balance along the
//! steepest ray pair (plain `(max+min)/2` when all rays are full grid steps)
//! and the gradient branch is `max_d v_d / (1 + λ ℓ_d)`. Both branches are
//! monotone in every neighbor value and positively 1-homogeneous, so the
//! update is a nonexpansive monotone map; its fixed points are discrete
//! viscosity solutions. The equation is 1-homogeneous, so a solve is anchored
//! by pinning ridge nodes at value 1.
//!
//! Sweeps are Jacobi (read old buffer, write new buffer) and the residual is a
//! max reduction, so results are bit-identical for any thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Extent;
use crate::grid::{dir_step, GridDomain, ScalarField};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilKind {
    Four,
    Eight,
}

impl StencilKind {
    pub fn ndirs(self) -> usize {
        match self {
            StencilKind::Four => 4,
            StencilKind::Eight => 8,
        }
    }
}

/// Branch tags, in the CSV encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Branch {
    Outside = 0,
    Pinned = 1,
    Harmonic = 2,
    Gradient = 3,
}

/// Seed strategies expressible in a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarSeed {
    Distance,
    Constant,
}

#[derive(Debug, Clone)]
pub struct InfProblem<'g> {
    pub grid: &'g GridDomain,
    pub lambda: f64,
    /// Nodes held at value 1 (sorted, deduplicated, inside).
    pub pin_set: Vec<u32>,
    pub seed: ScalarField,
    /// Residual tolerance; the stopping threshold is `tol · h`.
    pub tol: f64,
    pub max_iters: usize,
    pub stencil: StencilKind,
}

impl<'g> InfProblem<'g> {
    /// Problem with defaults: λ from the grid's distance field, distance seed
    /// rescaled to [0,1].
    pub fn new(grid: &'g GridDomain, mut pin_set: Vec<u32>) -> Result<InfProblem<'g>> {
        let lambda = grid.lambda_inf()?;
        let m = grid.max_dist();
        let mut seed = grid.dist().clone();
        for v in &mut seed.values {
            *v = (*v / m).clamp(0.0, 1.0);
        }
        pin_set.sort_unstable();
        pin_set.dedup();
        Ok(InfProblem {
            grid,
            lambda,
            pin_set,
            seed,
            tol: 1e-8,
            max_iters: 200_000,
            stencil: StencilKind::Eight,
        })
    }

    pub fn apply_seed(&mut self, seed: ScalarSeed) {
        match seed {
            ScalarSeed::Distance => {
                let m = self.grid.max_dist();
                self.seed = self.grid.dist().clone();
                for v in &mut self.seed.values {
                    *v = (*v / m).clamp(0.0, 1.0);
                }
            }
            ScalarSeed::Constant => {
                self.seed = ScalarField::zeros(self.grid.node_count());
                for &n in self.grid.inside_nodes() {
                    self.seed[n as usize] = 1.0;
                }
            }
        }
    }

    fn validate_for_solve(&self) -> Result<()> {
        if self.pin_set.is_empty() {
            return Err(Error::invalid("pin_set", "must be nonempty for a solve"));
        }
        for &p in &self.pin_set {
            if p as usize >= self.grid.node_count() || !self.grid.is_inside(p as usize) {
                return Err(Error::invalid("pin_set", format!("node {p} is not inside")));
            }
        }
        if self.seed.len() != self.grid.node_count() {
            return Err(Error::invalid("seed", "not aligned with the grid"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be > 0"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InfResult {
    pub field: ScalarField,
    /// Max node update magnitude at termination.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub branch_map: Vec<Branch>,
}

/// Compact update system over inside nodes; exposed so benches can drive the
/// sequential and parallel sweeps directly.
pub struct InfSystem<'g> {
    grid: &'g GridDomain,
    pub lambda: f64,
    ndirs: usize,
    /// Per compact node and direction: compact neighbor index, or
    /// `-(cut_index+1)` when the ray leaves the domain.
    nb: Vec<[i32; 8]>,
    cut_lens: Vec<f64>,
    full_len: [f64; 8],
    inv_grad: [f64; 8],
    pinned: Vec<bool>,
}

impl<'g> InfSystem<'g> {
    pub fn build(problem: &InfProblem<'g>) -> Result<InfSystem<'g>> {
        let grid = problem.grid;
        let nodes = grid.inside_nodes();
        if nodes.is_empty() {
            return Err(Error::EmptyDomain);
        }
        let mut compact_of = vec![u32::MAX; grid.node_count()];
        for (c, &n) in nodes.iter().enumerate() {
            compact_of[n as usize] = c as u32;
        }
        let ndirs = problem.stencil.ndirs();
        let mut nb = vec![[0i32; 8]; nodes.len()];
        let mut cut_lens = Vec::new();
        for (c, &n) in nodes.iter().enumerate() {
            for k in 0..ndirs {
                match grid.inside_neighbor(n as usize, k) {
                    Some(m) => nb[c][k] = compact_of[m] as i32,
                    None => {
                        let len = grid
                            .cut_length(n, k)
                            .expect("outside neighbor of an inside node has a recorded cut");
                        nb[c][k] = -((cut_lens.len() + 1) as i32);
                        cut_lens.push(len);
                    }
                }
            }
        }
        let mut full_len = [0.0; 8];
        let mut inv_grad = [0.0; 8];
        for k in 0..8 {
            full_len[k] = dir_step(k) * grid.h;
            inv_grad[k] = 1.0 / (1.0 + problem.lambda * full_len[k]);
        }
        let mut pinned = vec![false; nodes.len()];
        for &p in &problem.pin_set {
            let c = compact_of[p as usize];
            if c != u32::MAX {
                pinned[c as usize] = true;
            }
        }
        Ok(InfSystem {
            grid,
            lambda: problem.lambda,
            ndirs,
            nb,
            cut_lens,
            full_len,
            inv_grad,
            pinned,
        })
    }

    pub fn len(&self) -> usize {
        self.nb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nb.is_empty()
    }

    fn ray(&self, c: usize, k: usize, old: &[f64]) -> (f64, f64, f64) {
        let e = self.nb[c][k];
        if e >= 0 {
            let v = old[e as usize];
            (v, self.full_len[k], v * self.inv_grad[k])
        } else {
            (0.0, self.cut_lens[(-e - 1) as usize], 0.0)
        }
    }

    /// Both branch values at one node.
    fn branches(&self, c: usize, old: &[f64]) -> (f64, f64) {
        let mut vs = [0.0f64; 8];
        let mut ls = [0.0f64; 8];
        let mut vmax = f64::NEG_INFINITY;
        let mut vmin = f64::INFINITY;
        let mut grad = 0.0f64;
        let mut any_cut = false;
        for k in 0..self.ndirs {
            let (v, l, g) = self.ray(c, k, old);
            vs[k] = v;
            ls[k] = l;
            any_cut |= self.nb[c][k] < 0;
            vmax = vmax.max(v);
            vmin = vmin.min(v);
            grad = grad.max(g);
        }
        let harmonic = if any_cut {
            slope_balance(&vs[..self.ndirs], &ls[..self.ndirs])
        } else {
            0.5 * (vmax + vmin)
        };
        (harmonic, grad)
    }

    pub fn update_node(&self, c: usize, old: &[f64]) -> f64 {
        if self.pinned[c] {
            return 1.0;
        }
        let (harmonic, grad) = self.branches(c, old);
        harmonic.min(grad)
    }

    pub fn sweep_seq(&self, old: &[f64], new: &mut [f64]) -> f64 {
        let mut residual = 0.0f64;
        for c in 0..old.len() {
            let v = self.update_node(c, old);
            residual = residual.max((v - old[c]).abs());
            new[c] = v;
        }
        residual
    }

    #[cfg(feature = "parallel")]
    pub fn sweep_par(&self, old: &[f64], new: &mut [f64]) -> f64 {
        use rayon::prelude::*;
        new.par_iter_mut()
            .enumerate()
            .map(|(c, slot)| {
                let v = self.update_node(c, old);
                let change = (v - old[c]).abs();
                *slot = v;
                change
            })
            .reduce(|| 0.0, f64::max)
    }

    /// One Jacobi sweep; returns the max node change.
    pub fn sweep(&self, old: &[f64], new: &mut [f64]) -> f64 {
        #[cfg(feature = "parallel")]
        {
            self.sweep_par(old, new)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.sweep_seq(old, new)
        }
    }

    fn compact_values(&self, field: &ScalarField, clip: bool, enforce_pins: bool) -> Vec<f64> {
        let nodes = self.grid.inside_nodes();
        let mut out = vec![0.0; nodes.len()];
        for (c, &n) in nodes.iter().enumerate() {
            let mut v = field[n as usize];
            if clip {
                v = v.clamp(0.0, 1.0);
            }
            if enforce_pins && self.pinned[c] {
                v = 1.0;
            }
            out[c] = v;
        }
        out
    }

    fn field_from(&self, values: &[f64]) -> ScalarField {
        let mut f = ScalarField::zeros(self.grid.node_count());
        for (c, &n) in self.grid.inside_nodes().iter().enumerate() {
            f[n as usize] = values[c];
        }
        f
    }

    fn branch_map(&self, values: &[f64]) -> Vec<Branch> {
        let mut map = vec![Branch::Outside; self.grid.node_count()];
        for (c, &n) in self.grid.inside_nodes().iter().enumerate() {
            map[n as usize] = if self.pinned[c] {
                Branch::Pinned
            } else {
                let (harmonic, grad) = self.branches(c, values);
                if harmonic <= grad {
                    Branch::Harmonic
                } else {
                    Branch::Gradient
                }
            };
        }
        map
    }
}

/// Root of `max_d (v_d − u)/ℓ_d + min_d (v_d − u)/ℓ_d = 0` (strictly
/// decreasing in `u`). Solved exactly by enumerating candidate (max, min) ray
/// pairs; of the consistent candidates the maximum is returned, which is
/// canonical under any reordering of the rays.
pub fn slope_balance(v: &[f64], l: &[f64]) -> f64 {
    let k = v.len();
    debug_assert!(k >= 2);
    let mut best = f64::NEG_INFINITY;
    let mut fallback = 0.0;
    let mut fallback_viol = f64::INFINITY;
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let u = (v[a] * l[b] + v[b] * l[a]) / (l[a] + l[b]);
            let sa = (v[a] - u) / l[a];
            let sb = (v[b] - u) / l[b];
            let mut smax = f64::NEG_INFINITY;
            let mut smin = f64::INFINITY;
            for d in 0..k {
                let s = (v[d] - u) / l[d];
                smax = smax.max(s);
                smin = smin.min(s);
            }
            let viol = (smax - sa).max(0.0) + (sb - smin).max(0.0);
            if viol == 0.0 {
                best = best.max(u);
            } else if viol < fallback_viol {
                fallback_viol = viol;
                fallback = u;
            }
        }
    }
    if best > f64::NEG_INFINITY {
        best
    } else {
        fallback
    }
}

/// One Jacobi sweep as a standalone operation.
pub fn inf_update(field: &ScalarField, problem: &InfProblem) -> Result<ScalarField> {
    let sys = InfSystem::build(problem)?;
    let old = sys.compact_values(field, false, false);
    let mut new = vec![0.0; old.len()];
    sys.sweep(&old, &mut new);
    Ok(sys.field_from(&new))
}

/// Max over unpinned inside nodes of |field − inf_update(field)|.
pub fn inf_residual(field: &ScalarField, problem: &InfProblem) -> Result<f64> {
    let sys = InfSystem::build(problem)?;
    let old = sys.compact_values(field, false, false);
    Ok(par::max_indexed(old.len(), |c| {
        if sys.pinned[c] {
            0.0
        } else {
            (sys.update_node(c, &old) - old[c]).abs()
        }
    })
    .max(0.0))
}

/// Jacobi iteration to a fixed point; non-convergence is flagged, not an error.
pub fn solve_inf(problem: &InfProblem) -> Result<InfResult> {
    problem.validate_for_solve()?;
    let sys = InfSystem::build(problem)?;
    let mut cur = sys.compact_values(&problem.seed, true, true);
    let mut next = vec![0.0; cur.len()];
    let threshold = problem.tol * problem.grid.h;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < problem.max_iters {
        residual = sys.sweep(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        // iterates stay in [0,1]: seeds are clipped, pins are 1, and the
        // update is a min of convex combinations and contractions
        debug_assert!(cur.iter().all(|v| (0.0..=1.0).contains(v)));
        if iterations % 1000 == 0 {
            log::debug!("inf sweep {iterations}: residual {residual:.3e}");
        }
        if residual <= threshold {
            converged = true;
            break;
        }
    }
    let field = sys.field_from(&cur);
    let branch_map = sys.branch_map(&cur);
    Ok(InfResult {
        field,
        residual,
        iterations,
        converged,
        branch_map,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationReport {
    pub applicable: bool,
    pub checked: usize,
    pub violations: usize,
    /// Worst `value − bound` over violating nodes (0 when none).
    pub worst_margin: f64,
    /// Up to 16 violating node indices, for localization.
    pub sample_nodes: Vec<u32>,
}

impl ViolationReport {
    pub fn clean(checked: usize) -> ViolationReport {
        ViolationReport {
            applicable: true,
            checked,
            violations: 0,
            worst_margin: 0.0,
            sample_nodes: Vec::new(),
        }
    }

    pub fn push(&mut self, node: u32, margin: f64) {
        self.violations += 1;
        self.worst_margin = self.worst_margin.max(margin);
        if self.sample_nodes.len() < 16 {
            self.sample_nodes.push(node);
        }
    }

    pub fn passed(&self) -> bool {
        self.applicable && self.violations == 0
    }
}

/// Checks `u ≤ dist + 2h` node-wise; expects a max-normalized field.
pub fn distance_bound_check(field: &ScalarField, grid: &GridDomain) -> ViolationReport {
    let slack = 2.0 * grid.h;
    let mut report = ViolationReport::clean(grid.inside_nodes().len());
    for &n in grid.inside_nodes() {
        let margin = field[n as usize] - (grid.dist()[n as usize] + slack);
        if margin > 0.0 {
            report.push(n, margin);
        }
    }
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub outside: usize,
    pub pinned: usize,
    pub harmonic: usize,
    pub gradient: usize,
    #[serde(skip)]
    pub harmonic_bbox: Option<Extent>,
    #[serde(skip)]
    pub gradient_bbox: Option<Extent>,
}

/// Node counts and bounding boxes per branch of a converged result.
pub fn branch_partition(result: &InfResult, grid: &GridDomain) -> BranchSummary {
    let mut summary = BranchSummary {
        outside: 0,
        pinned: 0,
        harmonic: 0,
        gradient: 0,
        harmonic_bbox: None,
        gradient_bbox: None,
    };
    let grow = |bb: &mut Option<Extent>, x: f64, y: f64| {
        *bb = Some(match *bb {
            None => Extent {
                xmin: x,
                xmax: x,
                ymin: y,
                ymax: y,
            },
            Some(e) => Extent {
                xmin: e.xmin.min(x),
                xmax: e.xmax.max(x),
                ymin: e.ymin.min(y),
                ymax: e.ymax.max(y),
            },
        });
    };
    for idx in 0..grid.node_count() {
        match result.branch_map[idx] {
            Branch::Outside => summary.outside += 1,
            Branch::Pinned => summary.pinned += 1,
            Branch::Harmonic => {
                summary.harmonic += 1;
                let (x, y) = grid.coords(idx);
                grow(&mut summary.harmonic_bbox, x, y);
            }
            Branch::Gradient => {
                summary.gradient += 1;
                let (x, y) = grid.coords(idx);
                grow(&mut summary.gradient_bbox, x, y);
            }
        }
    }
    summary
}

/// Fraction of inside nodes within `region` tagged with the gradient branch.
pub fn gradient_fraction(grid: &GridDomain, branch_map: &[Branch], region: &Extent) -> f64 {
    let mut total = 0usize;
    let mut grad = 0usize;
    for &n in grid.inside_nodes() {
        let (x, y) = grid.coords(n as usize);
        if region.contains(x, y) {
            total += 1;
            if branch_map[n as usize] == Branch::Gradient {
                grad += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        grad as f64 / total as f64
    }
}
