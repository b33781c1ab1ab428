//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use wfs::bipartite::{
    check_no_signalling, eval_scenario, extremal_report, joint_table, nom_violating_strategy,
    p1_aom_bound, random_bipartite, PS_BOUND, TSIRELSON,
};
use wfs::channel::random_mixed_unitary_channel;
use wfs::cli::{cmd_region, write_sweep_csv};
use wfs::io::{load_bipartite, load_scenario};
use wfs::optimize::{
    bound_falsification_sweep, maximize_witness, with_threads, NelderMeadOptions, Objective,
    SweepConfig, SweepWitness,
};
use wfs::oracle::{oracle_bipartite, oracle_single_party};
use wfs::qlinalg::{random_simplex_weights, random_state, random_unitary, stream_rng, StreamRng};
use wfs::scenario::{
    matching_nom_scenario, run_trial, trial_probabilities, Dynamics, FriendMeasurement, Scenario,
    SuperObserverOp,
};
use wfs::witnesses::{
    eval_t, eval_tq, saturating_aom_realization, violating_nom_realization, QVector, T_BOUND,
};

const TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-12;
const OPT_TOL: f64 = 1e-6;

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn random_q(rng: &mut StreamRng, d: usize) -> QVector {
    loop {
        if let Ok(q) = QVector::new(random_simplex_weights(d, rng)) {
            return q;
        }
    }
}

fn random_basis(rng: &mut StreamRng, d: usize) -> FriendMeasurement {
    FriendMeasurement::from_unitary(&random_unitary(d, rng)).unwrap()
}

/// Random scenario with `ops[0] = 1`; later ops are block unitaries or, with
/// `channels`, occasionally mixed-unitary channels on the whole space.
fn random_scenario(rng: &mut StreamRng, dynamics: Dynamics, channels: bool) -> Scenario {
    let d = rng.random_range(2..=4);
    let n = rng.random_range(1..=2);
    let m = rng.random_range(2..=3);
    let psi = random_state(d, rng);
    let meas: Vec<_> = (0..n).map(|_| random_basis(rng, d)).collect();
    let padding = if channels { rng.random_range(0..=1) } else { 0 };
    let base = Scenario::new(psi, meas, vec![SuperObserverOp::Identity], dynamics)
        .unwrap()
        .with_padding(padding)
        .unwrap();
    let mut ops = vec![SuperObserverOp::Identity];
    for _ in 1..m {
        if channels && rng.random_bool(0.3) {
            let count = rng.random_range(1..=8);
            let dim = base.encoding().system_dim();
            ops.push(
                SuperObserverOp::unital_channel(random_mixed_unitary_channel(dim, count, rng))
                    .unwrap(),
            );
        } else {
            ops.push(
                SuperObserverOp::block_unitary((0..n).map(|_| random_unitary(d, rng)).collect())
                    .unwrap(),
            );
        }
    }
    base.with_ops(ops).unwrap()
}

fn c1_single_party_constructions() -> Outcome {
    let nom = eval_t(&load_scenario(&fixture("nom_t.json")).unwrap(), 1).unwrap();
    let aom = eval_t(&load_scenario(&fixture("aom_t.json")).unwrap(), 1).unwrap();
    check(
        (nom.value - 1.0).abs() <= TOL && (aom.value - 0.5).abs() <= TOL,
        format!("T(NoM) = {:.12}, T(AoM) = {:.12}", nom.value, aom.value),
    )
}

fn c2_aom_bound_sweep() -> Outcome {
    let t = bound_falsification_sweep(&SweepConfig::new(
        SweepWitness::T,
        Dynamics::AoM,
        100_000,
        20,
    ))
    .unwrap();
    let r1 = bound_falsification_sweep(&SweepConfig::new(
        SweepWitness::Rank1,
        Dynamics::AoM,
        100_000,
        21,
    ))
    .unwrap();
    let ok = t.violations.is_empty()
        && t.max_value <= T_BOUND + TOL
        && r1.violations.is_empty()
        && r1.min_margin >= -TOL;
    check(
        ok,
        format!(
            "1e5 samples each: max T = {:.9}, worst rank-one margin = {:.3e}, violations {} + {}",
            t.max_value,
            r1.min_margin,
            t.violations.len(),
            r1.violations.len()
        ),
    )
}

fn c3_tq_constructions() -> Outcome {
    let opts = NelderMeadOptions {
        max_evals: 4_000,
        ..Default::default()
    };
    let rows: Vec<(f64, f64, f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(30, k);
            let d = rng.random_range(2..=4);
            let q = random_q(&mut rng, d);
            let basis = random_basis(&mut rng, d);
            let sat = eval_tq(&saturating_aom_realization(&q, &basis).unwrap(), 1, &q).unwrap();
            let nom = eval_tq(&violating_nom_realization(&q, &basis).unwrap(), 1, &q).unwrap();
            let opt =
                maximize_witness(&Objective::Tq(q.clone()), Dynamics::AoM, 3, k, &opts).unwrap();
            (q.max(), sat.value, nom.value, opt.report.best_value)
        })
        .collect();
    let sat_err = rows.iter().map(|r| (r.1 - r.0).abs()).fold(0.0, f64::max);
    let nom_err = rows.iter().map(|r| (r.2 - 1.0).abs()).fold(0.0, f64::max);
    let opt_excess = rows
        .iter()
        .map(|r| r.3 - r.0)
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        sat_err <= TOL && nom_err <= TOL && opt_excess <= OPT_TOL,
        format!(
            "100 q: |T_sat - max q| <= {sat_err:.2e}, |T_NoM - 1| <= {nom_err:.2e}, optimizer excess {opt_excess:.2e}"
        ),
    )
}

fn c4_unital_channels() -> Outcome {
    let mut cfg = SweepConfig::new(SweepWitness::T, Dynamics::AoM, 1_000, 40);
    cfg.channels = true;
    let r = bound_falsification_sweep(&cfg).unwrap();
    check(
        r.violations.is_empty() && r.max_value <= T_BOUND + TOL,
        format!("1e3 mixed-unitary channels: max T = {:.9}", r.max_value),
    )
}

fn c5_matching_nom() -> Outcome {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let s = random_scenario(&mut stream_rng(50, k), Dynamics::AoM, false);
            let nom = matching_nom_scenario(&s).unwrap();
            let mut worst: f64 = 0.0;
            for x in 0..s.n() {
                for w in 0..s.m() {
                    let a = trial_probabilities(&s, x, w).unwrap();
                    let b = trial_probabilities(&nom, x, w).unwrap();
                    for (p, q) in a.iter().zip(&b) {
                        worst = worst.max((p - q).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(
        worst <= TOL,
        format!("100 scenarios: max |p_AoM - p_NoM| = {worst:.2e}"),
    )
}

fn c6_bipartite_strategy() -> Outcome {
    let built = nom_violating_strategy();
    let parsed = load_bipartite(&fixture("bipartite_nom.json")).unwrap();
    let r = eval_scenario(&built).unwrap();
    let rf = eval_scenario(&parsed).unwrap();
    let ps_target = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0;
    let p1_target = (std::f64::consts::PI / 8.0).cos().powi(2);
    let ok = (r.p0 - 0.75).abs() <= TOL
        && (r.p1 - p1_target).abs() <= TOL
        && (r.ps - ps_target).abs() <= TOL
        && (rf.ps - r.ps).abs() <= TOL
        && check_no_signalling(&joint_table(&built).unwrap());
    check(
        ok,
        format!(
            "P0 = {:.9}, P1 = {:.9}, PS = {:.9}, no-signalling",
            r.p0, r.p1, r.ps
        ),
    )
}

fn c7_bipartite_aom_sweep() -> Outcome {
    let (worst_ps, worst_p1, worst_expr, failed) = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let bs = random_bipartite(2, Dynamics::AoM, &mut stream_rng(70, k));
            let t = joint_table(&bs).unwrap();
            let r = eval_scenario(&bs).unwrap();
            let e = extremal_report(&t);
            let expr = e
                .expressions
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            (
                r.ps - PS_BOUND,
                r.p1 - p1_aom_bound(r.p0),
                expr - TSIRELSON,
                usize::from(!e.passed),
            )
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0),
            |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2), a.3 + b.3),
        );
    check(
        worst_ps <= TOL && worst_p1 <= TOL && worst_expr <= TOL && failed == 0,
        format!(
            "1e4 samples: max PS - 3/4 = {worst_ps:.3e}, max P1 - bound = {worst_p1:.3e}, \
             max relabeled CHSH - Tsirelson = {worst_expr:.3e}, enumeration failures {failed}"
        ),
    )
}

fn c8_oracle() -> Outcome {
    let single = (0..1_000u64)
        .into_par_iter()
        .map(|k| {
            let dynamics = if k % 2 == 0 {
                Dynamics::AoM
            } else {
                Dynamics::NoM
            };
            let s = random_scenario(&mut stream_rng(80, k), dynamics, true);
            let mut worst: f64 = 0.0;
            for x in 0..s.n() {
                for w in 0..s.m() {
                    let a = run_trial(&s, x, w).unwrap();
                    let b = oracle_single_party(&s, x, w).unwrap();
                    for (p, q) in a.probs.iter().zip(&b.probs) {
                        worst = worst.max((p - q).abs());
                    }
                    worst = worst.max((a.null - b.null).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let bipartite = (0..1_000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(81, k);
            let dynamics = if k % 2 == 0 {
                Dynamics::AoM
            } else {
                Dynamics::NoM
            };
            let d_b = rng.random_range(1..=3);
            let bs = random_bipartite(d_b, dynamics, &mut rng);
            let t = joint_table(&bs).unwrap();
            let mut worst: f64 = 0.0;
            for w in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        let o = oracle_bipartite(&bs, x, y, w).unwrap();
                        for (a, row) in o.iter().enumerate() {
                            for (b, &p) in row.iter().enumerate() {
                                worst = worst.max((t.p(w, x, y, a, b) - p).abs());
                            }
                        }
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(
        single <= ORACLE_TOL && bipartite <= ORACLE_TOL,
        format!(
            "1e3 + 1e3 scenarios: max deviation {single:.2e} (single), {bipartite:.2e} (bipartite)"
        ),
    )
}

fn sweep_csv(witness: SweepWitness, mode: Dynamics, threads: usize) -> Vec<u8> {
    let cfg = SweepConfig::new(witness, mode, 2_000, 90);
    let report = with_threads(threads, || bound_falsification_sweep(&cfg)).unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&report.rows, &mut buf).unwrap();
    buf
}

fn c9_determinism() -> Outcome {
    let cases = [
        (SweepWitness::T, Dynamics::AoM),
        (SweepWitness::Tq, Dynamics::NoM),
        (SweepWitness::PS, Dynamics::AoM),
    ];
    let mut identical = true;
    for (w, mode) in cases {
        let reference = sweep_csv(w, mode, 1);
        for threads in [1, 2, 4, 8] {
            identical &= sweep_csv(w, mode, threads) == reference;
        }
    }
    let region = |threads| {
        let mut buf = Vec::new();
        with_threads(threads, || cmd_region(6, 91, None, &mut buf)).unwrap();
        buf
    };
    let reference = region(1);
    identical &= [2, 8].into_iter().all(|t| region(t) == reference);
    check(
        identical,
        "T/Tq/PS sweeps and region CSV byte-identical for 1, 2, 4, 8 threads",
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "1 single-party T constructions",
            Duration::from_secs(1),
            c1_single_party_constructions,
        ),
        (
            "2 AoM bound sweep (T, rank-one)",
            Duration::from_secs(120),
            c2_aom_bound_sweep,
        ),
        (
            "3 T(q) constructions and optimizer",
            Duration::from_secs(300),
            c3_tq_constructions,
        ),
        (
            "4 unital channels under AoM",
            Duration::from_secs(60),
            c4_unital_channels,
        ),
        (
            "5 matching NoM reproduction",
            Duration::from_secs(60),
            c5_matching_nom,
        ),
        (
            "6 bipartite violating strategy",
            Duration::from_secs(1),
            c6_bipartite_strategy,
        ),
        (
            "7 bipartite AoM sweep",
            Duration::from_secs(300),
            c7_bipartite_aom_sweep,
        ),
        ("8 oracle equivalence", Duration::from_secs(300), c8_oracle),
        (
            "9 sweep determinism",
            Duration::from_secs(300),
            c9_determinism,
        ),
    ];
    let mut failures = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let ok = outcome.ok && elapsed <= limit;
        failures += usize::from(!ok);
        println!(
            "{} [{name}] {} ({:.2} s, limit {} s)",
            if ok { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
