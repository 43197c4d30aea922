//! Uniform Cartesian grids over a [`DomainSpec`]: inside masks, the grid
//! distance field, the high ridge, and sub-cell boundary offsets.
//!
//! Nodes are snapped to the global lattice `{ i·h : i ∈ ℤ }` and coordinates
//! are always computed as `(integer)·h`. For a mirror-symmetric domain this
//! makes the node set and every membership test bitwise symmetric under
//! `x₁ ↦ -x₁`, which the solvers rely on for exact discrete equivariance.
//!
//! The distance field is the Euclidean distance to the *continuous* domain
//! boundary: boundary-adjacent nodes locate the boundary along their stencil
//! rays by bisection on the membership predicate (sub-cell accuracy); nodes
//! within one ring take the exact distance to those crossing points; the rest
//! of the interior is filled by an eikonal relaxation on the 8-stencil whose
//! per-sector update `t = dA + sqrt(h² - (dA-dB)²)` is exact for planar
//! fronts in any direction. All updates consume neighbor *values* only, so
//! the fixed point is independent of sweep order and thread count, and on a
//! mirror-symmetric domain the field is bitwise mirror-symmetric.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::par;

/// Stencil directions: axis neighbors first, then diagonals.
pub const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
];

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Step length multiplier per direction (units of `h`).
pub fn dir_step(k: usize) -> f64 {
    if k < 4 {
        1.0
    } else {
        SQRT_2
    }
}

pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;

/// One value per grid node, row-major (`index = j·nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> ScalarField {
        ScalarField {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RasterOptions {
    pub node_budget: Option<usize>,
    pub ridge_tol: Option<f64>,
}

/// Rasterized domain: mask, exact-boundary distance field, high ridge,
/// and the sub-cell boundary offset table used by the solvers.
#[derive(Debug, Clone)]
pub struct GridDomain {
    spec: DomainSpec,
    pub h: f64,
    ix0: i64,
    iy0: i64,
    pub nx: usize,
    pub ny: usize,
    inside: Vec<bool>,
    inside_nodes: Vec<u32>,
    dist: ScalarField,
    max_dist: f64,
    ridge_tol: f64,
    ridge: Vec<u32>,
    cuts: HashMap<u32, [f64; 8]>,
}

/// Sectors of the 8-stencil: (axis direction, adjacent diagonal direction).
const SECTORS: [(usize, usize); 8] = [
    (0, 4),
    (0, 6),
    (1, 5),
    (1, 7),
    (2, 4),
    (2, 7),
    (3, 5),
    (3, 6),
];

impl GridDomain {
    pub fn rasterize(spec: DomainSpec, h: f64, padding: f64) -> Result<GridDomain> {
        GridDomain::rasterize_with(spec, h, padding, RasterOptions::default())
    }

    pub fn rasterize_with(
        spec: DomainSpec,
        h: f64,
        padding: f64,
        opts: RasterOptions,
    ) -> Result<GridDomain> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", format!("must be > 0, got {h}")));
        }
        if !(padding >= h) {
            return Err(Error::invalid(
                "padding",
                format!("must be >= h = {h}, got {padding}"),
            ));
        }
        let budget = opts.node_budget.unwrap_or(DEFAULT_NODE_BUDGET);
        let ridge_tol = opts.ridge_tol.unwrap_or(0.5 * h);

        let bb = spec.bbox();
        let ix0 = ((bb.xmin - padding) / h).floor() as i64;
        let ix1 = ((bb.xmax + padding) / h).ceil() as i64;
        let iy0 = ((bb.ymin - padding) / h).floor() as i64;
        let iy1 = ((bb.ymax + padding) / h).ceil() as i64;
        let nx = (ix1 - ix0 + 1) as usize;
        let ny = (iy1 - iy0 + 1) as usize;
        let nnodes = nx
            .checked_mul(ny)
            .ok_or(Error::NodeBudget {
                requested: usize::MAX,
                budget,
            })?;
        if nnodes > budget {
            return Err(Error::NodeBudget {
                requested: nnodes,
                budget,
            });
        }

        let x_of = |i: usize| ((ix0 + i as i64) as f64) * h;
        let y_of = |j: usize| ((iy0 + j as i64) as f64) * h;

        let mut inside = vec![false; nnodes];
        par::fill_with(&mut inside, |idx| {
            let (i, j) = (idx % nx, idx / nx);
            spec.contains(x_of(i), y_of(j))
        });

        let inside_nodes: Vec<u32> = (0..nnodes)
            .filter(|&idx| inside[idx])
            .map(|idx| idx as u32)
            .collect();

        let mut grid = GridDomain {
            spec,
            h,
            ix0,
            iy0,
            nx,
            ny,
            inside,
            inside_nodes,
            dist: ScalarField::zeros(nnodes),
            max_dist: 0.0,
            ridge_tol,
            ridge: Vec::new(),
            cuts: HashMap::new(),
        };

        if grid.inside_nodes.is_empty() {
            return Ok(grid); // downstream solvers reject empty interiors
        }

        let (cuts, crossings) = grid.compute_cuts();
        grid.cuts = cuts;
        grid.dist = grid.sweep_distance(&crossings);
        grid.max_dist = par::max_indexed(grid.inside_nodes.len(), |c| {
            grid.dist[grid.inside_nodes[c] as usize]
        });
        grid.ridge = grid
            .inside_nodes
            .iter()
            .copied()
            .filter(|&n| grid.dist[n as usize] >= grid.max_dist - grid.ridge_tol)
            .collect();
        Ok(grid)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node_ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        ((self.ix0 + i as i64) as f64) * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        ((self.iy0 + j as i64) as f64) * self.h
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(idx);
        (self.x(i), self.y(j))
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    /// Interior node indices in row-major order.
    pub fn inside_nodes(&self) -> &[u32] {
        &self.inside_nodes
    }

    /// Distance to the continuous domain boundary; 0 at outside nodes.
    pub fn dist(&self) -> &ScalarField {
        &self.dist
    }

    /// Distance field as a standalone operation; errors on empty interiors.
    pub fn distance_field(&self) -> Result<&ScalarField> {
        if self.inside_nodes.is_empty() {
            Err(Error::EmptyDomain)
        } else {
            Ok(&self.dist)
        }
    }

    pub fn max_dist(&self) -> f64 {
        self.max_dist
    }

    pub fn ridge_tol(&self) -> f64 {
        self.ridge_tol
    }

    /// Nodes within `ridge_tol` of the distance maximum.
    pub fn ridge(&self) -> &[u32] {
        &self.ridge
    }

    pub fn lambda_inf(&self) -> Result<f64> {
        lambda_inf(&self.dist)
    }

    /// Sub-cell boundary offset along stencil direction `k` (absolute length),
    /// present iff the neighbor in that direction is outside.
    pub fn cut_length(&self, node: u32, k: usize) -> Option<f64> {
        self.cuts.get(&node).and_then(|lens| {
            let l = lens[k];
            if l.is_nan() {
                None
            } else {
                Some(l)
            }
        })
    }

    fn neighbor(&self, idx: usize, k: usize) -> Option<usize> {
        let (i, j) = self.node_ij(idx);
        let (di, dj) = DIRS[k];
        let ni = i as i64 + di;
        let nj = j as i64 + dj;
        if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
            None
        } else {
            Some(nj as usize * self.nx + ni as usize)
        }
    }

    /// Neighbor index if it exists and is inside.
    pub fn inside_neighbor(&self, idx: usize, k: usize) -> Option<usize> {
        self.neighbor(idx, k).filter(|&n| self.inside[n])
    }

    /// Node of the mirrored coordinate (-x, y), if on the grid.
    pub fn mirrored_node(&self, idx: usize) -> Option<usize> {
        let (i, j) = self.node_ij(idx);
        let gx = self.ix0 + i as i64;
        let mi = -gx - self.ix0;
        if mi < 0 || mi >= self.nx as i64 {
            None
        } else {
            Some(j * self.nx + mi as usize)
        }
    }

    /// Inside node nearest to a point; ties broken by the smaller node index.
    pub fn nearest_inside_node(&self, px: f64, py: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &n in &self.inside_nodes {
            let (x, y) = self.coords(n as usize);
            let d2 = (x - px) * (x - px) + (y - py) * (y - py);
            match best {
                Some((_, bd)) if d2 >= bd => {}
                _ => best = Some((n as usize, d2)),
            }
        }
        best.map(|(n, _)| n)
    }

    /// Field value at the inside node nearest to the given point.
    pub fn probe(&self, field: &ScalarField, px: f64, py: f64) -> Result<f64> {
        let n = self.nearest_inside_node(px, py).ok_or(Error::EmptyDomain)?;
        Ok(field[n])
    }

    /// Max over inside nodes of |u(x₁,x₂) - u(-x₁,x₂)|; a missing mirror node
    /// counts as value 0.
    pub fn asymmetry_sup(&self, field: &ScalarField) -> f64 {
        let mut sup = 0.0f64;
        for &n in &self.inside_nodes {
            let v = field[n as usize];
            let mv = match self.mirrored_node(n as usize) {
                Some(m) => field[m],
                None => 0.0,
            };
            sup = sup.max((v - mv).abs());
        }
        sup
    }

    /// 8-connected components of the ridge, in discovery (row-major) order.
    pub fn ridge_components(&self) -> Vec<Vec<u32>> {
        let in_ridge: std::collections::HashSet<u32> = self.ridge.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        let mut components = Vec::new();
        for &start in &self.ridge {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(start);
            seen.insert(start);
            while let Some(n) = queue.pop_front() {
                comp.push(n);
                for k in 0..8 {
                    if let Some(nb) = self.neighbor(n as usize, k) {
                        let nb = nb as u32;
                        if in_ridge.contains(&nb) && seen.insert(nb) {
                            queue.push_back(nb);
                        }
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// The ridge component reaching farthest right (largest max x₁).
    pub fn rightmost_ridge_component(&self) -> Vec<u32> {
        let mut best: Option<(f64, Vec<u32>)> = None;
        for comp in self.ridge_components() {
            let xmax = comp
                .iter()
                .map(|&n| self.coords(n as usize).0)
                .fold(f64::NEG_INFINITY, f64::max);
            match &best {
                Some((bx, _)) if xmax <= *bx => {}
                _ => best = Some((xmax, comp)),
            }
        }
        best.map(|(_, c)| c).unwrap_or_default()
    }

    pub fn same_lattice(&self, other: &GridDomain) -> bool {
        self.h.to_bits() == other.h.to_bits()
            && self.ix0 == other.ix0
            && self.iy0 == other.iy0
            && self.nx == other.nx
            && self.ny == other.ny
    }

    /// Boundary crossings per front node. Lens are NaN where the neighbor is
    /// inside; crossing points feed the distance sweep.
    fn compute_cuts(&self) -> (HashMap<u32, [f64; 8]>, Vec<(u32, Vec<[f64; 2]>)>) {
        let n = self.inside_nodes.len();
        let mut rows: Vec<Option<([f64; 8], Vec<[f64; 2]>)>> = vec![None; n];
        par::fill_with(&mut rows, |c| {
            let idx = self.inside_nodes[c] as usize;
            let (x, y) = self.coords(idx);
            let mut lens = [f64::NAN; 8];
            let mut points = Vec::new();
            let mut any = false;
            for (k, &(di, dj)) in DIRS.iter().enumerate() {
                let outside = match self.neighbor(idx, k) {
                    Some(nb) => !self.inside[nb],
                    None => true,
                };
                if !outside {
                    continue;
                }
                any = true;
                let sx = (di as f64) * self.h;
                let sy = (dj as f64) * self.h;
                let t = bisect_crossing(&self.spec, x, y, sx, sy, self.h);
                lens[k] = t * dir_step(k) * self.h;
                points.push([x + t * sx, y + t * sy]);
            }
            if any {
                Some((lens, points))
            } else {
                None
            }
        });

        let mut cuts = HashMap::new();
        let mut crossings = Vec::new();
        for (c, row) in rows.into_iter().enumerate() {
            if let Some((lens, points)) = row {
                let node = self.inside_nodes[c];
                cuts.insert(node, lens);
                crossings.push((node, points));
            }
        }
        (cuts, crossings)
    }

    /// Multi-source eikonal relaxation from the boundary crossings, iterated
    /// in Jacobi passes to the unique fixed point.
    fn sweep_distance(&self, crossings: &[(u32, Vec<[f64; 2]>)]) -> ScalarField {
        let ninside = self.inside_nodes.len();
        let mut compact_of = vec![u32::MAX; self.node_count()];
        for (c, &node) in self.inside_nodes.iter().enumerate() {
            compact_of[node as usize] = c as u32;
        }
        // inside-only neighbor table
        let mut nbt = vec![[u32::MAX; 8]; ninside];
        par::fill_with(&mut nbt, |c| {
            let idx = self.inside_nodes[c] as usize;
            let mut row = [u32::MAX; 8];
            for (k, slot) in row.iter_mut().enumerate() {
                if let Some(nb) = self.inside_neighbor(idx, k) {
                    *slot = compact_of[nb];
                }
            }
            row
        });

        // exact distance to the crossing points of a node and its neighbors;
        // min over a value set, so bitwise symmetric on symmetric domains
        let mut points_of: Vec<&[[f64; 2]]> = vec![&[]; ninside];
        for (node, points) in crossings {
            points_of[compact_of[*node as usize] as usize] = points.as_slice();
        }
        let mut cur = vec![f64::INFINITY; ninside];
        par::fill_with(&mut cur, |c| {
            let idx = self.inside_nodes[c] as usize;
            let (x, y) = self.coords(idx);
            let mut best = f64::INFINITY;
            let mut consider = |points: &[[f64; 2]]| {
                for q in points {
                    let dx = x - q[0];
                    let dy = y - q[1];
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            };
            consider(points_of[c]);
            for &nb in &nbt[c] {
                if nb != u32::MAX {
                    consider(points_of[nb as usize]);
                }
            }
            best
        });

        let h = self.h;
        let diag = SQRT_2 * h;
        let mut next = vec![0.0f64; ninside];
        let max_passes = self.nx + self.ny + 8;
        for _pass in 0..max_passes {
            par::fill_with(&mut next, |c| {
                let mut best = cur[c];
                let row = &nbt[c];
                for (k, &nb) in row.iter().enumerate() {
                    if nb == u32::MAX {
                        continue;
                    }
                    let step = if k < 4 { h } else { diag };
                    best = best.min(cur[nb as usize] + step);
                }
                // planar-front reconstruction per 45-degree sector
                for &(ka, kd) in &SECTORS {
                    let (na, nd) = (row[ka], row[kd]);
                    if na == u32::MAX || nd == u32::MAX {
                        continue;
                    }
                    let da = cur[na as usize];
                    if da >= best {
                        continue; // t >= da cannot improve
                    }
                    let q = da - cur[nd as usize];
                    if q >= 0.0 && q * q <= 0.5 * h * h {
                        best = best.min(da + (h * h - q * q).sqrt());
                    }
                }
                best
            });
            let changed = par::max_indexed(ninside, |c| {
                if next[c] < cur[c] {
                    1.0
                } else {
                    0.0
                }
            });
            std::mem::swap(&mut cur, &mut next);
            if changed <= 0.0 {
                break;
            }
        }

        let mut dist = ScalarField::zeros(self.node_count());
        for (c, &node) in self.inside_nodes.iter().enumerate() {
            debug_assert!(cur[c].is_finite(), "unreached interior node {node}");
            dist[node as usize] = cur[c];
        }
        dist
    }
}

/// `λ_∞ = 1 / max dist`.
pub fn lambda_inf(dist: &ScalarField) -> Result<f64> {
    let m = dist.max();
    if m > 0.0 {
        Ok(1.0 / m)
    } else {
        Err(Error::EmptyDomain)
    }
}

/// Bisection for the boundary crossing parameter `t ∈ (0,1]` along the segment
/// from an inside point to an outside point. Tolerance h/100, at most 30 steps.
fn bisect_crossing(spec: &DomainSpec, x0: f64, y0: f64, sx: f64, sy: f64, h: f64) -> f64 {
    let steplen = (sx * sx + sy * sy).sqrt();
    let tol = 0.01 * h;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..30 {
        if (hi - lo) * steplen <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if spec.contains(x0 + mid * sx, y0 + mid * sy) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sample a field on another grid: exact copy on the identical lattice, an
/// integer index shift when only the extents differ, bilinear interpolation
/// otherwise. Values vanish outside the target's interior.
pub fn resample(field: &ScalarField, from: &GridDomain, to: &GridDomain) -> ScalarField {
    assert_eq!(field.len(), from.node_count(), "field/grid mismatch");
    if from.same_lattice(to) {
        return field.clone();
    }
    let mut out = ScalarField::zeros(to.node_count());
    let same_h = from.h.to_bits() == to.h.to_bits();
    par::fill_with(&mut out.values, |idx| {
        if !to.is_inside(idx) {
            return 0.0;
        }
        let (i, j) = to.node_ij(idx);
        if same_h {
            let fi = to.ix0 + i as i64 - from.ix0;
            let fj = to.iy0 + j as i64 - from.iy0;
            if fi < 0 || fj < 0 || fi >= from.nx as i64 || fj >= from.ny as i64 {
                0.0
            } else {
                field[fj as usize * from.nx + fi as usize]
            }
        } else {
            let lx = (to.x(i) - from.x(0)) / from.h;
            let ly = (to.y(j) - from.y(0)) / from.h;
            bilinear(field, from, lx, ly)
        }
    });
    out
}

fn bilinear(field: &ScalarField, grid: &GridDomain, lx: f64, ly: f64) -> f64 {
    // snap to the lattice to keep nested-grid sampling exact
    let snap = |t: f64| {
        let r = t.round();
        if (t - r).abs() < 1e-9 {
            r
        } else {
            t
        }
    };
    let lx = snap(lx);
    let ly = snap(ly);
    if lx < 0.0 || ly < 0.0 || lx > (grid.nx - 1) as f64 || ly > (grid.ny - 1) as f64 {
        return 0.0;
    }
    let i0 = (lx.floor() as usize).min(grid.nx - 2);
    let j0 = (ly.floor() as usize).min(grid.ny - 2);
    let fx = lx - i0 as f64;
    let fy = ly - j0 as f64;
    let v00 = field[grid.index(i0, j0)];
    let v10 = field[grid.index(i0 + 1, j0)];
    let v01 = field[grid.index(i0, j0 + 1)];
    let v11 = field[grid.index(i0 + 1, j0 + 1)];
    (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn unit_ball_half_spacing_pattern() {
        // Independent enumeration: nodes strictly inside B_1(0) on the h=0.5
        // lattice are exactly the 3x3 block |i|,|j| <= 1.
        let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 0.5, 1.0).unwrap();
        let mut expected = Vec::new();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = (grid.x(i), grid.y(j));
                if (x * x + y * y).sqrt() < 1.0 {
                    expected.push(grid.index(i, j) as u32);
                }
            }
        }
        assert_eq!(expected.len(), 9);
        assert_eq!(grid.inside_nodes(), expected.as_slice());
    }

    #[test]
    fn mask_matches_membership_exhaustively() {
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.2, 0.1).unwrap(), 0.1, 0.2).unwrap();
        for idx in 0..grid.node_count() {
            let (x, y) = grid.coords(idx);
            assert_eq!(grid.is_inside(idx), grid.spec().contains(x, y));
        }
    }

    #[test]
    fn dumbbell_grid_dimensions_and_tube_rows() {
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), 0.025, 0.05).unwrap();
        // bbox [-6,6] x [-1,1] plus padding 2h
        assert!(grid.nx >= 481 && grid.nx <= 489, "nx = {}", grid.nx);
        assert!(grid.ny >= 81 && grid.ny <= 89, "ny = {}", grid.ny);
        // every tube-only column has exactly 7 interior nodes across
        for i in 0..grid.nx {
            let x = grid.x(i);
            if x.abs() < 3.9 {
                let count = (0..grid.ny)
                    .filter(|&j| grid.is_inside(grid.index(i, j)))
                    .count();
                assert_eq!(count, 7, "column x={x}");
            }
        }
    }

    #[test]
    fn distance_matches_analytic_on_ball_and_rect() {
        let h = 1.0 / 32.0;
        let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), h, 2.0 * h).unwrap();
        let mut worst = 0.0f64;
        for &n in grid.inside_nodes() {
            let (x, y) = grid.coords(n as usize);
            let analytic = 1.0 - (x * x + y * y).sqrt();
            worst = worst.max((grid.dist()[n as usize] - analytic).abs());
        }
        assert!(worst <= h, "ball distance error {worst} > h");

        let spec = DomainSpec::new(
            "rect",
            vec![crate::geometry::Primitive::rect(0.0, 2.0, 0.0, 1.0)],
        )
        .unwrap();
        let grid = GridDomain::rasterize(spec, h, 2.0 * h).unwrap();
        let mut worst = 0.0f64;
        for &n in grid.inside_nodes() {
            let (x, y) = grid.coords(n as usize);
            let analytic = x.min(2.0 - x).min(y).min(1.0 - y);
            worst = worst.max((grid.dist()[n as usize] - analytic).abs());
        }
        assert!(worst <= h, "rect distance error {worst} > h");
    }

    #[test]
    fn distance_maxima_on_dumbbell_family() {
        let h = 0.025;
        for &eps in &[0.0, 0.2, 0.4] {
            let grid =
                GridDomain::rasterize(DomainSpec::dumbbell(0.1, eps).unwrap(), h, 2.0 * h).unwrap();
            assert!(
                (grid.max_dist() - 1.0).abs() <= h,
                "max dist {} at eps={eps}",
                grid.max_dist()
            );
            // max attained in the right bulb
            let arg = grid
                .inside_nodes()
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    grid.dist()[a as usize]
                        .partial_cmp(&grid.dist()[b as usize])
                        .unwrap()
                })
                .unwrap();
            let (x, _) = grid.coords(arg as usize);
            assert!(x > 0.0, "argmax at x={x} for eps={eps}");
        }
        // half-dumbbell: max = 1 - eps
        let grid = GridDomain::rasterize(DomainSpec::half_dumbbell(0.1, 0.2).unwrap(), h, 2.0 * h)
            .unwrap();
        assert!((grid.max_dist() - 0.8).abs() <= h);
        assert!((grid.lambda_inf().unwrap() - 1.25).abs() <= 2.0 * h);
    }

    #[test]
    fn lambda_inf_examples() {
        let h = 0.025;
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), h, 2.0 * h).unwrap();
        assert!((grid.lambda_inf().unwrap() - 1.0).abs() <= 2.0 * h);
        let ball = GridDomain::rasterize(DomainSpec::ball(2.0).unwrap(), h, 2.0 * h).unwrap();
        assert!((ball.lambda_inf().unwrap() - 0.5).abs() <= 2.0 * h);
        assert!(matches!(
            lambda_inf(&ScalarField::zeros(4)),
            Err(Error::EmptyDomain)
        ));
    }

    #[test]
    fn coarse_grid_has_no_interior() {
        // spacing larger than the domain diameter, domain off the lattice
        let spec = DomainSpec::new(
            "offset-ball",
            vec![crate::geometry::Primitive::ball(0.5, 0.5, 0.3)],
        )
        .unwrap();
        let grid = GridDomain::rasterize(spec, 1.0, 1.0).unwrap();
        assert!(grid.inside_nodes().is_empty());
        assert!(grid.ridge().is_empty());
        assert!(grid.distance_field().is_err());
        assert!(grid.lambda_inf().is_err());
    }

    #[test]
    fn node_budget_enforced() {
        let err = GridDomain::rasterize_with(
            DomainSpec::ball(1.0).unwrap(),
            1e-3,
            2e-3,
            RasterOptions {
                node_budget: Some(1000),
                ridge_tol: None,
            },
        )
        .unwrap_err();
        match err {
            Error::NodeBudget { budget, .. } => assert_eq!(budget, 1000),
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn shrinkage_monotonicity_on_shared_lattice() {
        let h = 0.025;
        let g1 = GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.1).unwrap(), h, 2.0 * h).unwrap();
        let g2 = GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.2).unwrap(), h, 2.0 * h).unwrap();
        // both grids live on the {i·h} lattice; compare via global indices
        for &n in g2.inside_nodes() {
            let (i, j) = g2.node_ij(n as usize);
            let gi = g2.ix0 + i as i64 - g1.ix0;
            let gj = g2.iy0 + j as i64 - g1.iy0;
            assert!(gi >= 0 && gj >= 0 && gi < g1.nx as i64 && gj < g1.ny as i64);
            let m = gj as usize * g1.nx + gi as usize;
            assert!(
                g2.dist()[n as usize] <= g1.dist()[m] + 1e-12,
                "shrinkage violated at node {n}"
            );
        }
    }

    #[test]
    fn dist_is_lipschitz_on_random_pairs() {
        use rand::prelude::*;
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.2, 0.0).unwrap(), 0.05, 0.1).unwrap();
        let nodes = grid.inside_nodes();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = nodes[rng.random_range(0..nodes.len())] as usize;
            let b = nodes[rng.random_range(0..nodes.len())] as usize;
            let (ax, ay) = grid.coords(a);
            let (bx, by) = grid.coords(b);
            let sep = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            assert!((grid.dist()[a] - grid.dist()[b]).abs() <= sep + 1e-12);
        }
    }

    #[test]
    fn ridge_components_of_dumbbell_and_stadium() {
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), 0.025, 0.05).unwrap();
        let comps = grid.ridge_components();
        assert_eq!(comps.len(), 2, "D_0 ridge components");
        let right = grid.rightmost_ridge_component();
        assert!(right
            .iter()
            .all(|&n| grid.coords(n as usize).0 > 0.0));
        // the node exactly at (5,0) is on the lattice and pinned into the ridge
        let n5 = grid.nearest_inside_node(5.0, 0.0).unwrap();
        let (x5, y5) = grid.coords(n5);
        assert_eq!((x5, y5), (5.0, 0.0));
        assert!(right.contains(&(n5 as u32)));

        let stadium = GridDomain::rasterize(DomainSpec::stadium(), 1.0 / 16.0, 0.125).unwrap();
        assert_eq!(stadium.ridge_components().len(), 1, "stadium ridge is connected");
    }

    #[test]
    fn grid_symmetry_is_bitwise() {
        let grid =
            GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), 0.025, 0.05).unwrap();
        for &n in grid.inside_nodes() {
            let m = grid.mirrored_node(n as usize).expect("mirror exists");
            assert!(grid.is_inside(m), "mirror of inside node is inside");
            assert_eq!(
                grid.dist()[n as usize].to_bits(),
                grid.dist()[m].to_bits(),
                "distance field not bitwise symmetric"
            );
        }
    }

    #[test]
    fn resample_identity_and_shift() {
        let spec = DomainSpec::ball(1.0).unwrap();
        let grid = GridDomain::rasterize(spec.clone(), 0.125, 0.25).unwrap();
        let f = grid.dist().clone();
        let same = resample(&f, &grid, &grid);
        assert_eq!(f, same);

        // finer grid and back: changes bounded by local oscillation (~Lip * h)
        let fine = GridDomain::rasterize(spec, 0.0625, 0.25).unwrap();
        let up = resample(&f, &grid, &fine);
        let back = resample(&up, &fine, &grid);
        for &n in grid.inside_nodes() {
            assert!(
                (back[n as usize] - f[n as usize]).abs() <= 0.125 + 1e-12,
                "roundtrip drift too large"
            );
        }
    }

    #[test]
    fn probe_prefers_smallest_index_on_ties() {
        let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 0.5, 1.0).unwrap();
        let mut f = ScalarField::zeros(grid.node_count());
        for (i, &n) in grid.inside_nodes().iter().enumerate() {
            f[n as usize] = i as f64;
        }
        // midpoint between two nodes: the row-major earlier one wins
        let n = grid.nearest_inside_node(0.25, 0.0).unwrap();
        let (x, y) = grid.coords(n);
        assert_eq!((x, y), (0.0, 0.0));
    }
}
