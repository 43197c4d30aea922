//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Heavy runs are shared between criteria through lazy statics (the p-schedule
//! continuation feeds criteria 4 and 7; the dumbbell witness feeds 5 and 9).

use std::sync::LazyLock;
use std::time::Instant;

use groundstate::experiments::{
    nonuniqueness_witness, ExperimentConfig, WitnessDomain, WitnessOutcome,
};
use groundstate::geometry::DomainSpec;
use groundstate::grid::{GridDomain, ScalarField};
use groundstate::inf::{inf_update, solve_inf, InfProblem};
use groundstate::io;
use groundstate::plap::{
    minimize_rayleigh, p_continuation, quotient_gradient, rayleigh_quotient, tube_decay_check,
    EigenResult, PLapProblem,
};
use rand::prelude::*;

fn report(criterion: usize, pass: bool, details: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status} - {details}");
    assert!(pass, "criterion {criterion} failed: {details}");
}

struct Timed<T> {
    value: T,
    elapsed: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> Timed<T> {
    let start = Instant::now();
    let value = f();
    Timed {
        value,
        elapsed: start.elapsed().as_secs_f64(),
    }
}

/// Criterion 4/7 workhorse: p-continuation on D_0, delta = 0.1, h = 0.025.
static PCONT_D01: LazyLock<Timed<(GridDomain, Vec<(f64, EigenResult)>)>> = LazyLock::new(|| {
    timed(|| {
        let grid = GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), 0.025, 0.05)
            .unwrap();
        let (_, states) =
            p_continuation(&grid, &[2.0, 4.0, 8.0, 16.0, 32.0, 64.0], 1e-9, 200_000).unwrap();
        (grid, states)
    })
});

/// Criterion 5 witness: delta = 0.05, h = delta/4.
static WITNESS_005: LazyLock<Timed<WitnessOutcome>> = LazyLock::new(|| {
    timed(|| {
        let cfg = ExperimentConfig::for_delta(0.05);
        nonuniqueness_witness(&WitnessDomain::Dumbbell { delta: 0.05 }, &cfg).unwrap()
    })
});

/// Criterion 9 witness: the same run at half the spacing.
static WITNESS_005_FINE: LazyLock<Timed<WitnessOutcome>> = LazyLock::new(|| {
    timed(|| {
        let mut cfg = ExperimentConfig::for_delta(0.05);
        cfg.h /= 2.0;
        cfg.padding = 2.0 * cfg.h;
        cfg.inf_max_iters = 1_000_000;
        nonuniqueness_witness(&WitnessDomain::Dumbbell { delta: 0.05 }, &cfg).unwrap()
    })
});

#[test]
fn criterion_1_lambda_inf_reproduction() {
    let t = timed(|| {
        let d0 = GridDomain::rasterize(DomainSpec::dumbbell(0.1, 0.0).unwrap(), 0.025, 0.05)
            .unwrap();
        let omega =
            GridDomain::rasterize(DomainSpec::half_dumbbell(0.1, 0.2).unwrap(), 0.025, 0.05)
                .unwrap();
        (d0.lambda_inf().unwrap(), omega.lambda_inf().unwrap())
    });
    let (lam_d0, lam_omega) = t.value;
    let tol = 2.0 * 0.025;
    let pass = (lam_d0 - 1.0).abs() <= tol && (lam_omega - 1.25).abs() <= tol && t.elapsed < 10.0;
    report(
        1,
        pass,
        &format!(
            "lambda_inf(D_0)={lam_d0:.5} (target 1 +/- {tol}), lambda_inf(Omega_0.2)={lam_omega:.5} (target 1.25 +/- {tol}), runtime {:.2}s < 10s",
            t.elapsed
        ),
    );
}

#[test]
fn criterion_2_ball_ground_state() {
    let h = 1.0 / 64.0;
    let t = timed(|| {
        let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), h, 2.0 * h).unwrap();
        let center = grid.nearest_inside_node(0.0, 0.0).unwrap() as u32;
        let problem = InfProblem::new(&grid, vec![center]).unwrap();
        let result = solve_inf(&problem).unwrap();
        let mut sup = 0.0f64;
        for &n in grid.inside_nodes() {
            sup = sup.max((result.field[n as usize] - grid.dist()[n as usize]).abs());
        }
        (sup, result.converged)
    });
    let (sup, converged) = t.value;
    let pass = converged && sup <= 5.0 * h && t.elapsed < 120.0;
    report(
        2,
        pass,
        &format!(
            "sup|u - d| = {sup:.5} <= 5h = {:.5}, converged={converged}, runtime {:.1}s < 120s",
            5.0 * h,
            t.elapsed
        ),
    );
}

#[test]
fn criterion_3_p2_oracles() {
    let h = 1.0 / 64.0;
    let square = timed(|| {
        let grid = GridDomain::rasterize(DomainSpec::unit_square(), h, 2.0 * h).unwrap();
        minimize_rayleigh(&PLapProblem::new(&grid, 2.0)).unwrap()
    });
    let disk = timed(|| {
        let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), h, 2.0 * h).unwrap();
        minimize_rayleigh(&PLapProblem::new(&grid, 2.0)).unwrap()
    });
    let target_square = std::f64::consts::PI * std::f64::consts::SQRT_2;
    let target_disk = 2.4048;
    let rel_square = (square.value.lambda - target_square).abs() / target_square;
    let rel_disk = (disk.value.lambda - target_disk).abs() / target_disk;
    let pass = rel_square <= 0.02
        && rel_disk <= 0.02
        && square.value.converged
        && disk.value.converged
        && square.elapsed < 60.0
        && disk.elapsed < 60.0;
    report(
        3,
        pass,
        &format!(
            "square lambda={:.5} (target {target_square:.4}, rel {rel_square:.4}), disk lambda={:.5} (target {target_disk}, rel {rel_disk:.4}), runtimes {:.1}s/{:.1}s < 60s",
            square.value.lambda, disk.value.lambda, square.elapsed, disk.elapsed
        ),
    );
}

#[test]
fn criterion_4_symmetry_of_variational_states() {
    let t = &*PCONT_D01;
    let (grid, states) = &t.value;
    let (p_last, last) = states.last().unwrap();
    assert_eq!(*p_last, 64.0);
    let norm = last.max_normalized();
    let asym = grid.asymmetry_sup(&norm);
    let lambda = last.lambda;
    let pass = asym <= 0.05 && (0.85..=1.15).contains(&lambda) && t.elapsed < 900.0;
    report(
        4,
        pass,
        &format!(
            "sup asymmetry = {asym:.3e} <= 0.05, lambda_64 = {lambda:.4} in [0.85, 1.15], runtime {:.1}s < 900s",
            t.elapsed
        ),
    );
}

#[test]
fn criterion_5_nonuniqueness_witness() {
    let t = &*WITNESS_005;
    let r = &t.value.report;
    let threshold = 1e-8 * t.value.grid.h;
    let pass = r.probe_left_sym >= 0.9
        && r.probe_right_asym == 1.0
        && r.probe_left_asym <= 0.5
        && r.residual_sym <= threshold
        && r.residual_asym <= threshold
        && r.gap >= 0.3
        && t.elapsed < 1800.0;
    report(
        5,
        pass,
        &format!(
            "sym left={:.4} >= 0.9, asym right={} (=1), asym left={:.3e} <= 0.5, residuals {:.2e}/{:.2e} <= {threshold:.2e}, gap={:.4} >= 0.3, runtime {:.1}s < 1800s",
            r.probe_left_sym,
            r.probe_right_asym,
            r.probe_left_asym,
            r.residual_sym,
            r.residual_asym,
            r.gap,
            t.elapsed
        ),
    );
}

#[test]
fn criterion_6_controls() {
    let h = 1.0 / 32.0;
    let mut cfg = ExperimentConfig::for_delta(0.2);
    cfg.h = h;
    cfg.padding = 2.0 * h;

    let ball = nonuniqueness_witness(
        &WitnessDomain::Fixed(DomainSpec::ball(1.0).unwrap()),
        &cfg,
    )
    .unwrap();
    let stadium =
        nonuniqueness_witness(&WitnessDomain::Fixed(DomainSpec::stadium()), &cfg).unwrap();
    let balls = nonuniqueness_witness(
        &WitnessDomain::Fixed(DomainSpec::disjoint_balls(0.2).unwrap()),
        &cfg,
    )
    .unwrap();
    let mut smaller_ball_max = 0.0f64;
    for &n in balls.grid.inside_nodes() {
        let (x, _) = balls.grid.coords(n as usize);
        if x < 0.0 {
            smaller_ball_max = smaller_ball_max.max(balls.sym.field[n as usize]);
        }
    }
    let pass = ball.report.unique
        && ball.report.pass
        && stadium.report.unique
        && stadium.report.pass
        && smaller_ball_max <= cfg.inf_tol;
    report(
        6,
        pass,
        &format!(
            "ball gap={:.2e} <= 5h={:.2e}, stadium gap={:.2e}, disjoint-balls smaller-ball max={:.2e} <= tol={:.0e}",
            ball.report.gap,
            5.0 * h,
            stadium.report.gap,
            smaller_ball_max,
            cfg.inf_tol
        ),
    );
}

#[test]
fn criterion_7_tube_decay_bound() {
    let t = &*PCONT_D01;
    let (grid, states) = &t.value;
    let mut details = String::new();
    let mut pass = true;
    let mut found = 0;
    for (p, state) in states {
        if *p < 8.0 {
            continue;
        }
        found += 1;
        let field = state.max_normalized();
        let rep = tube_decay_check(&field, grid, *p, state.lambda, 0.1, (-3.0, 3.0));
        pass &= rep.applicable && rep.violations == 0;
        details.push_str(&format!(
            "p={p}: {} violations over {} nodes (applicable={}); ",
            rep.violations, rep.checked, rep.applicable
        ));
    }
    pass &= found == 3; // p in {8, 16, 32}
    report(7, pass, &details);
}

#[test]
fn criterion_8_property_suites() {
    // monotonicity and 1-homogeneity, 1000 pairs each
    let grid = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 1.0 / 16.0, 0.125).unwrap();
    let mut problem = InfProblem::new(&grid, vec![]).unwrap();
    problem.lambda = 1.0;
    let mut rng = StdRng::seed_from_u64(20_240_817);
    let mut mono_failures = 0usize;
    let mut homo_failures = 0usize;
    for _ in 0..1000 {
        let mut u = ScalarField::zeros(grid.node_count());
        let mut v = ScalarField::zeros(grid.node_count());
        for &n in grid.inside_nodes() {
            let a = rng.random::<f64>();
            u[n as usize] = a;
            v[n as usize] = (a + rng.random::<f64>() * 0.4).min(1.0);
        }
        let fu = inf_update(&u, &problem).unwrap();
        let fv = inf_update(&v, &problem).unwrap();
        if grid
            .inside_nodes()
            .iter()
            .any(|&n| fu[n as usize] > fv[n as usize] + 1e-14)
        {
            mono_failures += 1;
        }
        let c = 0.1 + rng.random::<f64>() * 5.0;
        let fcu = inf_update(&u.scaled(c), &problem).unwrap();
        if grid
            .inside_nodes()
            .iter()
            .any(|&n| (fcu[n as usize] - c * fu[n as usize]).abs() > 1e-14 * (1.0 + c))
        {
            homo_failures += 1;
        }
    }

    // gradient vs central finite differences: 50 nodes x p in {2,4,8}
    let gg = GridDomain::rasterize(DomainSpec::ball(1.0).unwrap(), 0.125, 0.25).unwrap();
    let mut fd_worst = 0.0f64;
    for &p in &[2.0, 4.0, 8.0] {
        let mut f = ScalarField::zeros(gg.node_count());
        for &n in gg.inside_nodes() {
            f[n as usize] = 0.2 + rng.random::<f64>();
        }
        let g = quotient_gradient(&f, &gg, p).unwrap();
        let nodes = gg.inside_nodes();
        for _ in 0..50 {
            let n = nodes[rng.random_range(0..nodes.len())] as usize;
            let t = 1e-6;
            let mut fp = f.clone();
            fp[n] += t;
            let mut fm = f.clone();
            fm[n] -= t;
            let fd = (rayleigh_quotient(&fp, &gg, p).unwrap()
                - rayleigh_quotient(&fm, &gg, p).unwrap())
                / (2.0 * t);
            let denom = fd.abs().max(g[n].abs()).max(1e-8);
            fd_worst = fd_worst.max((fd - g[n]).abs() / denom);
        }
    }

    // determinism: witness artifacts identical across thread counts
    // (trace compared without its wall_time column)
    let witness_artifacts = || {
        let cfg = ExperimentConfig::for_delta(0.2);
        let outcome =
            nonuniqueness_witness(&WitnessDomain::Dumbbell { delta: 0.2 }, &cfg).unwrap();
        let trace = outcome
            .continuation
            .as_ref()
            .map(|c| io::trace_csv(&c.trace))
            .unwrap_or_default();
        let trace_no_wall: String = trace
            .lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head).unwrap_or(l))
            .collect::<Vec<_>>()
            .join("\n");
        (
            io::field_csv(&outcome.grid, &outcome.sym.field, "u"),
            io::field_csv(&outcome.grid, &outcome.asym.field, "u"),
            serde_json::to_string(&outcome.report).unwrap(),
            trace_no_wall,
        )
    };
    #[cfg(feature = "parallel")]
    let (a, b) = {
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool2 = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        (
            pool1.install(witness_artifacts),
            pool2.install(witness_artifacts),
        )
    };
    #[cfg(not(feature = "parallel"))]
    let (a, b) = (witness_artifacts(), witness_artifacts());
    let deterministic = a == b;

    let pass = mono_failures == 0 && homo_failures == 0 && fd_worst <= 1e-4 && deterministic;
    report(
        8,
        pass,
        &format!(
            "monotonicity failures {mono_failures}/1000, homogeneity failures {homo_failures}/1000, gradient-fd worst rel err {fd_worst:.2e} <= 1e-4, witness byte-identical across thread counts: {deterministic}"
        ),
    );
}

#[test]
fn criterion_9_mesh_refinement_stability() {
    let coarse = &*WITNESS_005;
    let fine = &*WITNESS_005_FINE;
    let delta_probe =
        (fine.value.report.probe_left_asym - coarse.value.report.probe_left_asym).abs();
    let pass = fine.value.report.converged && delta_probe <= 0.05;
    report(
        9,
        pass,
        &format!(
            "probe_left(h=0.0125)={:.3e}, probe_left(h=0.00625)={:.3e}, |change|={delta_probe:.3e} <= 0.05, fine runtime {:.1}s",
            coarse.value.report.probe_left_asym, fine.value.report.probe_left_asym, fine.elapsed
        ),
    );
}
