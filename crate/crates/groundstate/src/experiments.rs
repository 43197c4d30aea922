//! End-to-end constructions: ε-continuation toward the symmetric dumbbell,
//! the symmetric variational state, the nonuniqueness witness with its
//! controls, δ-sweeps, and the lemma-level verification battery.

use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Extent};
use crate::grid::{resample, GridDomain, RasterOptions, ScalarField};
use crate::inf::{
    distance_bound_check, solve_inf, InfProblem, InfResult, StencilKind, ViolationReport,
};
use crate::plap::{p_continuation, tube_decay_check, tube_energy, EigenResult, TubeEnergy};

/// One record of a continuation run (ε- or p-parameterized).
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub parameter: f64,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub probe_left: f64,
    pub probe_right: f64,
    pub converged: bool,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationTrace {
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    /// Infer from ridge connectivity: a disconnected ridge expects the
    /// nonuniqueness gap, a connected one expects uniqueness.
    Auto,
    Unique,
    Nonunique,
}

/// Numeric knobs shared by the experiment drivers.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub delta: f64,
    pub h: f64,
    pub padding: f64,
    pub epsilon_schedule: Vec<f64>,
    pub inf_tol: f64,
    pub inf_max_iters: usize,
    pub stencil: StencilKind,
    pub plap_tol: f64,
    pub plap_max_iters: usize,
    pub p_schedule: Vec<f64>,
    pub probe_left: (f64, f64),
    pub probe_right: (f64, f64),
    pub node_budget: Option<usize>,
    pub expect: Expectation,
}

impl ExperimentConfig {
    /// Defaults at tube half-width `delta`: h = δ/4, padding = 2h.
    pub fn for_delta(delta: f64) -> ExperimentConfig {
        let h = delta / 4.0;
        ExperimentConfig {
            delta,
            h,
            padding: 2.0 * h,
            epsilon_schedule: vec![0.2, 0.1, 0.05, 0.02, 0.0],
            inf_tol: 1e-8,
            inf_max_iters: 200_000,
            stencil: StencilKind::Eight,
            plap_tol: 1e-9,
            plap_max_iters: 200_000,
            p_schedule: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            probe_left: (-5.0, 0.0),
            probe_right: (5.0, 0.0),
            node_budget: None,
            expect: Expectation::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0,1)"));
        }
        if !(self.h > 0.0) {
            return Err(Error::invalid("h", "must be > 0"));
        }
        if self.h > self.delta / 4.0 + 1e-15 {
            return Err(Error::invalid(
                "h",
                format!(
                    "must be <= delta/4 = {} so the tube carries at least 7 interior nodes, got {}",
                    self.delta / 4.0,
                    self.h
                ),
            ));
        }
        if self.epsilon_schedule.is_empty() || *self.epsilon_schedule.last().unwrap() != 0.0 {
            return Err(Error::invalid("epsilon_schedule", "must end at 0"));
        }
        for w in self.epsilon_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::invalid(
                    "epsilon_schedule",
                    "must be strictly decreasing",
                ));
            }
        }
        if self
            .epsilon_schedule
            .iter()
            .any(|&e| !(0.0..1.0).contains(&e))
        {
            return Err(Error::invalid("epsilon_schedule", "entries must lie in [0,1)"));
        }
        Ok(())
    }

    fn raster_opts(&self) -> RasterOptions {
        RasterOptions {
            node_budget: self.node_budget,
            ridge_tol: None,
        }
    }
}

fn probe_pair(grid: &GridDomain, field: &ScalarField, cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    Ok((
        grid.probe(field, cfg.probe_left.0, cfg.probe_left.1)?,
        grid.probe(field, cfg.probe_right.0, cfg.probe_right.1)?,
    ))
}

#[derive(Debug)]
pub struct EpsStep {
    pub epsilon: f64,
    pub grid: GridDomain,
    pub result: InfResult,
}

#[derive(Debug)]
pub struct EpsContinuation {
    pub trace: ContinuationTrace,
    pub steps: Vec<EpsStep>,
    /// True when a step failed to converge and the trace was cut short.
    pub aborted: bool,
}

/// Asymmetric-state continuation: solve on D_ε along the schedule, pinning the
/// rightmost ridge component and seeding each step with the previous field.
pub fn epsilon_continuation(cfg: &ExperimentConfig) -> Result<EpsContinuation> {
    cfg.validate()?;
    let mut trace = ContinuationTrace { steps: Vec::new() };
    let mut steps: Vec<EpsStep> = Vec::new();
    let mut aborted = false;
    for &eps in &cfg.epsilon_schedule {
        let start = Instant::now();
        let spec = DomainSpec::dumbbell(cfg.delta, eps)?;
        let grid = GridDomain::rasterize_with(spec, cfg.h, cfg.padding, cfg.raster_opts())?;
        let pins = grid.rightmost_ridge_component();
        let mut problem = InfProblem::new(&grid, pins)?;
        problem.tol = cfg.inf_tol;
        problem.max_iters = cfg.inf_max_iters;
        problem.stencil = cfg.stencil;
        if let Some(prev) = steps.last() {
            let mut seed = resample(&prev.result.field, &prev.grid, &grid);
            for v in &mut seed.values {
                *v = v.clamp(0.0, 1.0);
            }
            problem.seed = seed;
        }
        let result = solve_inf(&problem)?;
        let (probe_left, probe_right) = probe_pair(&grid, &result.field, cfg)?;
        trace.steps.push(TraceStep {
            parameter: eps,
            lambda: problem.lambda,
            residual: result.residual,
            iterations: result.iterations,
            probe_left,
            probe_right,
            converged: result.converged,
            wall_time: start.elapsed().as_secs_f64(),
        });
        let converged = result.converged;
        steps.push(EpsStep {
            epsilon: eps,
            grid,
            result,
        });
        if !converged {
            aborted = true;
            break;
        }
    }
    Ok(EpsContinuation {
        trace,
        steps,
        aborted,
    })
}

#[derive(Debug)]
pub struct SymmetricState {
    pub grid: GridDomain,
    /// Final p-continuation state, max-normalized.
    pub result: EigenResult,
    pub field: ScalarField,
    pub asymmetry: f64,
    pub probe_left: f64,
    pub probe_right: f64,
    pub trace: ContinuationTrace,
}

/// Variational route: p-continuation on D_0 up to the largest scheduled p.
pub fn symmetric_variational_state(cfg: &ExperimentConfig) -> Result<SymmetricState> {
    cfg.validate()?;
    let spec = DomainSpec::dumbbell(cfg.delta, 0.0)?;
    let grid = GridDomain::rasterize_with(spec, cfg.h, cfg.padding, cfg.raster_opts())?;
    let (trace, mut states) =
        p_continuation(&grid, &cfg.p_schedule, cfg.plap_tol, cfg.plap_max_iters)?;
    let (_, result) = states.pop().expect("schedule is nonempty");
    let field = result.max_normalized();
    let asymmetry = grid.asymmetry_sup(&field);
    let (probe_left, probe_right) = probe_pair(&grid, &field, cfg)?;
    Ok(SymmetricState {
        grid,
        result,
        field,
        asymmetry,
        probe_left,
        probe_right,
        trace,
    })
}

/// Domain under witness: the dumbbell family (asymmetric state produced by
/// ε-continuation) or a fixed control domain (produced by right-ridge pinning
/// from a half seed).
#[derive(Debug, Clone)]
pub enum WitnessDomain {
    Dumbbell { delta: f64 },
    Fixed(DomainSpec),
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub domain: String,
    pub h: f64,
    pub lambda: f64,
    pub expect_nonunique: bool,
    pub probe_left_sym: f64,
    pub probe_right_sym: f64,
    pub probe_left_asym: f64,
    pub probe_right_asym: f64,
    /// |u_sym - u_asym| at the left probe.
    pub gap: f64,
    pub unique: bool,
    pub residual_sym: f64,
    pub residual_asym: f64,
    pub converged: bool,
    pub pass: bool,
}

#[derive(Debug)]
pub struct WitnessOutcome {
    pub grid: GridDomain,
    pub sym: InfResult,
    pub asym: InfResult,
    pub continuation: Option<EpsContinuation>,
    pub report: WitnessReport,
}

/// Produces the double-pin state and the asymmetric-procedure state on the
/// identical grid and reports the probe gap.
pub fn nonuniqueness_witness(
    domain: &WitnessDomain,
    cfg: &ExperimentConfig,
) -> Result<WitnessOutcome> {
    let spec = match domain {
        WitnessDomain::Dumbbell { delta } => DomainSpec::dumbbell(*delta, 0.0)?,
        WitnessDomain::Fixed(spec) => spec.clone(),
    };
    if matches!(domain, WitnessDomain::Dumbbell { .. }) {
        cfg.validate()?;
    }
    let grid = GridDomain::rasterize_with(spec, cfg.h, cfg.padding, cfg.raster_opts())?;
    let lambda = grid.lambda_inf()?;

    // symmetric route: every ridge component pinned, distance seed
    let mut sym_problem = InfProblem::new(&grid, grid.ridge().to_vec())?;
    sym_problem.tol = cfg.inf_tol;
    sym_problem.max_iters = cfg.inf_max_iters;
    sym_problem.stencil = cfg.stencil;
    let sym = solve_inf(&sym_problem)?;

    // asymmetric route
    let (asym, continuation) = match domain {
        WitnessDomain::Dumbbell { .. } => {
            let eps = epsilon_continuation(cfg)?;
            let last = eps.steps.last().ok_or(Error::EmptyDomain)?;
            if !last.grid.same_lattice(&grid) {
                return Err(Error::invalid(
                    "epsilon_schedule",
                    "final continuation grid does not match the witness grid",
                ));
            }
            (last.result.clone(), Some(eps))
        }
        WitnessDomain::Fixed(_) => {
            let pins = grid.rightmost_ridge_component();
            let mut problem = InfProblem::new(&grid, pins)?;
            problem.tol = cfg.inf_tol;
            problem.max_iters = cfg.inf_max_iters;
            problem.stencil = cfg.stencil;
            // half seed: distance seed cut off left of the symmetry axis
            for &n in grid.inside_nodes() {
                let (x, _) = grid.coords(n as usize);
                if x < 0.0 {
                    problem.seed[n as usize] = 0.0;
                }
            }
            (solve_inf(&problem)?, None)
        }
    };

    let (probe_left_sym, probe_right_sym) = probe_pair(&grid, &sym.field, cfg)?;
    let (probe_left_asym, probe_right_asym) = probe_pair(&grid, &asym.field, cfg)?;
    let gap = (probe_left_sym - probe_left_asym).abs();
    let expect_nonunique = match cfg.expect {
        Expectation::Auto => grid.ridge_components().len() >= 2,
        Expectation::Unique => false,
        Expectation::Nonunique => true,
    };
    let aborted = continuation.as_ref().map(|c| c.aborted).unwrap_or(false);
    let converged = sym.converged && asym.converged && !aborted;
    let unique = gap <= 5.0 * grid.h;
    let pass = converged
        && if expect_nonunique {
            gap >= 0.3
        } else {
            unique
        };
    let report = WitnessReport {
        domain: grid.spec().name.clone(),
        h: grid.h,
        lambda,
        expect_nonunique,
        probe_left_sym,
        probe_right_sym,
        probe_left_asym,
        probe_right_asym,
        gap,
        unique,
        residual_sym: sym.residual,
        residual_asym: asym.residual,
        converged,
        pass,
    };
    Ok(WitnessOutcome {
        grid,
        sym,
        asym,
        continuation,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub h: f64,
    pub lambda: f64,
    pub probe_left: f64,
    pub probe_right: f64,
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// probe_left of the asymmetric state is non-increasing as δ decreases.
    pub monotone: bool,
    pub pass: bool,
}

/// Witness per δ (h = δ/4); tabulates the asymmetric state's left probe.
pub fn delta_sweep(deltas: &[f64], template: &ExperimentConfig) -> Result<SweepOutcome> {
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "must be nonempty"));
    }
    for w in deltas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid("deltas", "must be strictly decreasing"));
        }
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        let mut cfg = ExperimentConfig::for_delta(delta);
        cfg.epsilon_schedule = template.epsilon_schedule.clone();
        cfg.inf_tol = template.inf_tol;
        cfg.inf_max_iters = template.inf_max_iters;
        cfg.stencil = template.stencil;
        cfg.node_budget = template.node_budget;
        let outcome = nonuniqueness_witness(&WitnessDomain::Dumbbell { delta }, &cfg)?;
        rows.push(SweepRow {
            delta,
            h: cfg.h,
            lambda: outcome.report.lambda,
            probe_left: outcome.report.probe_left_asym,
            probe_right: outcome.report.probe_right_asym,
            gap: outcome.report.gap,
            pass: outcome.report.pass,
        });
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1].probe_left <= w[0].probe_left + 1e-12);
    let pass = monotone && rows.iter().all(|r| r.pass);
    Ok(SweepOutcome {
        rows,
        monotone,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryPRow {
    pub p: f64,
    pub lambda: f64,
    pub decay: ViolationReport,
    pub energy: TubeEnergy,
}

#[derive(Debug, Serialize)]
pub struct BatteryReport {
    pub p_rows: Vec<BatteryPRow>,
    pub distance_check_sym: ViolationReport,
    pub distance_check_asym: ViolationReport,
    /// p-th roots of the tube integrals stay within 16x their p=8 value
    /// (diagnostic trend, not a paper bound).
    pub roots_bounded: bool,
    pub pass: bool,
}

/// Runs the decay and energy checks on p-solutions and the distance-bound
/// check on both ∞-states.
pub fn lemma_battery(cfg: &ExperimentConfig) -> Result<BatteryReport> {
    cfg.validate()?;
    let spec = DomainSpec::dumbbell(cfg.delta, 0.0)?;
    let grid = GridDomain::rasterize_with(spec, cfg.h, cfg.padding, cfg.raster_opts())?;
    let schedule: Vec<f64> = vec![2.0, 4.0, 8.0, 16.0, 32.0];
    let (_, states) = p_continuation(&grid, &schedule, cfg.plap_tol, cfg.plap_max_iters)?;
    let region = Extent {
        xmin: -1.0,
        xmax: 1.0,
        ymin: -cfg.delta,
        ymax: cfg.delta,
    };
    let mut p_rows = Vec::new();
    for (p, state) in &states {
        if *p < 7.0 {
            continue;
        }
        let field = state.max_normalized();
        let decay = tube_decay_check(&field, &grid, *p, state.lambda, cfg.delta, (-3.0, 3.0));
        let energy = tube_energy(&field, &grid, *p, &region)?;
        p_rows.push(BatteryPRow {
            p: *p,
            lambda: state.lambda,
            decay,
            energy,
        });
    }
    let roots_bounded = p_rows
        .first()
        .map(|base| {
            p_rows.iter().all(|row| {
                row.energy.root_grad <= 16.0 * base.energy.root_grad.max(1e-300)
                    && row.energy.root_u_grad <= 16.0 * base.energy.root_u_grad.max(1e-300)
            })
        })
        .unwrap_or(true);

    let witness = nonuniqueness_witness(&WitnessDomain::Dumbbell { delta: cfg.delta }, cfg)?;
    let sym_max = witness.sym.field.max();
    let asym_max = witness.asym.field.max();
    let distance_check_sym =
        distance_bound_check(&witness.sym.field.scaled(1.0 / sym_max), &witness.grid);
    let distance_check_asym =
        distance_bound_check(&witness.asym.field.scaled(1.0 / asym_max), &witness.grid);

    let pass = p_rows.iter().all(|r| r.decay.passed())
        && distance_check_sym.passed()
        && distance_check_asym.passed()
        && witness.report.converged;
    Ok(BatteryReport {
        p_rows,
        distance_check_sym,
        distance_check_asym,
        roots_bounded,
        pass,
    })
}
