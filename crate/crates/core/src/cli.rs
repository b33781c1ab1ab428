//! Command-line front end. Reports go to stdout, diagnostics to stderr.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bipartite::{
    eval_scenario, feasible_region_sweep, joint_table, nom_violating_strategy, JointTable,
};
use crate::error::{Error, Result};
use crate::io::{load_bipartite, load_scenario};
use crate::optimize::{
    bound_falsification_sweep, maximize_witness, NelderMeadOptions, Objective, SweepConfig,
    SweepWitness,
};
use crate::qlinalg::{random_state, random_unitary, stream_rng, ComplexVector};
use crate::scenario::{
    matching_nom_scenario, measure_omega, post_measurement_state, run_trial, CombinedState,
    Dynamics, FriendMeasurement, Scenario, SuperObserverOp,
};
use crate::witnesses::{eval_t, eval_tq, q_from_identity_statistics, QVector, WitnessReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wfs",
    version,
    about = "Extended Wigner's Friend scenario: AoM/NoM statistics and witnesses"
)]
pub struct Cli {
    /// Worker threads for sweeps (results do not depend on it).
    #[arg(long, global = true, env = "WFS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WitnessArg {
    #[value(name = "T", alias = "t")]
    T,
    #[value(name = "Tq", alias = "tq")]
    Tq,
    #[value(name = "PS", alias = "ps")]
    PS,
    #[value(name = "rank1")]
    Rank1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(alias = "AoM")]
    Aom,
    #[value(alias = "NoM")]
    Nom,
}

impl From<ModeArg> for Dynamics {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Aom => Dynamics::AoM,
            ModeArg::Nom => Dynamics::NoM,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a witness on a scenario file and print the report as JSON.
    ///
    /// T and Tq read a single-party scenario; PS reads a bipartite one.
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "T")]
        witness: WitnessArg,
        /// Index of Wigner's operation playing the role of U.
        #[arg(long, default_value_t = 1)]
        w: usize,
        /// Comma-separated q for Tq; defaults to p(.|A,1).
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        /// Slack added to the bound before flagging a violation.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Random-scenario sweep against a witness bound.
    ///
    /// CSV columns: witness, sample, value, bound, violated, seed. Sample k
    /// is drawn from RNG stream k of the seed.
    Sweep {
        #[arg(long, value_enum)]
        witness: WitnessArg,
        #[arg(long, value_enum, default_value = "aom")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; the JSON summary goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use random unital channels (mixtures of up to 8 unitaries) as U.
        #[arg(long)]
        channels: bool,
    },
    /// Points of the (P0, P1) plane.
    ///
    /// CSV columns: P0, P1, mode, seed. Modes: aom, nom, classical,
    /// line_p1_eq_p0, line_p1_eq_1.5_minus_p0, line_tsirelson, boundary.
    Region {
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximize a witness by multi-restart simplex search.
    Optimize {
        #[arg(long, value_enum)]
        witness: WitnessArg,
        #[arg(long, value_enum, default_value = "aom")]
        mode: ModeArg,
        /// Number of restarts.
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
    },
    /// Walk through one of the built-in constructions: wfs, theorem1, bipartite.
    Demo { name: String },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_INVALID;
        }
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Eval {
            scenario,
            witness,
            w,
            q,
            tolerance,
        } => cmd_eval(&scenario, witness, w, q, tolerance, out),
        Command::Sweep {
            witness,
            mode,
            samples,
            seed,
            out: path,
            channels,
        } => cmd_sweep(
            witness,
            mode.into(),
            samples,
            seed,
            path.as_deref(),
            channels,
            out,
        ),
        Command::Region {
            resolution,
            seed,
            out: path,
        } => cmd_region(resolution, seed, path.as_deref(), out),
        Command::Optimize {
            witness,
            mode,
            budget,
            seed,
            q,
        } => cmd_optimize(witness, mode.into(), budget, seed, q, out),
        Command::Demo { name } => cmd_demo(&name, out),
    }
}

fn print_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct PsEval {
    #[serde(flatten)]
    report: WitnessReport,
    p0: f64,
    p1: f64,
    p1_bound: f64,
    no_signalling: bool,
}

pub fn cmd_eval(
    path: &Path,
    witness: WitnessArg,
    w: usize,
    q: Option<Vec<f64>>,
    tolerance: f64,
    out: &mut dyn Write,
) -> Result<()> {
    match witness {
        WitnessArg::T => {
            let s = load_scenario(path)?;
            print_json(&eval_t(&s, w)?.with_tolerance(tolerance), out)
        }
        WitnessArg::Tq => {
            let s = load_scenario(path)?;
            let q = match q {
                Some(q) => QVector::new(q)?,
                None => q_from_identity_statistics(&s)?,
            };
            print_json(&eval_tq(&s, w, &q)?.with_tolerance(tolerance), out)
        }
        WitnessArg::PS => {
            let bs = load_bipartite(path)?;
            let r = eval_scenario(&bs)?;
            let t = joint_table(&bs)?;
            print_json(
                &PsEval {
                    report: r.witness.with_tolerance(tolerance),
                    p0: r.p0,
                    p1: r.p1,
                    p1_bound: r.p1_bound,
                    no_signalling: crate::bipartite::check_no_signalling(&t),
                },
                out,
            )
        }
        WitnessArg::Rank1 => Err(Error::NotApplicable(
            "rank1 is a sweep statistic; use `sweep --witness rank1`".into(),
        )),
    }
}

fn sweep_witness(w: WitnessArg) -> SweepWitness {
    match w {
        WitnessArg::T => SweepWitness::T,
        WitnessArg::Tq => SweepWitness::Tq,
        WitnessArg::PS => SweepWitness::PS,
        WitnessArg::Rank1 => SweepWitness::Rank1,
    }
}

fn open_csv(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_writer(std::fs::File::create(path)?))
}

/// Writes the sweep rows as CSV.
pub fn write_sweep_csv<W: Write>(rows: &[crate::optimize::SweepRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn cmd_sweep(
    witness: WitnessArg,
    mode: Dynamics,
    samples: usize,
    seed: u64,
    path: Option<&Path>,
    channels: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let mut cfg = SweepConfig::new(sweep_witness(witness), mode, samples, seed);
    cfg.channels = channels;
    // open the destination first so an unwritable path fails fast
    let file = path.map(open_csv).transpose()?;
    let report = bound_falsification_sweep(&cfg)?;
    match file {
        Some(mut wtr) => {
            for r in &report.rows {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
            print_json(&report, out)?;
        }
        None => {
            write_sweep_csv(&report.rows, &mut *out)?;
            eprintln!("{}", serde_json::to_string(&report)?);
        }
    }
    if !report.violations.is_empty() && mode == Dynamics::AoM {
        eprintln!(
            "warning: {} sample(s) exceed the AoM bound; reproduce with --seed {} (samples {:?})",
            report.violations.len(),
            seed,
            &report.violations[..report.violations.len().min(10)]
        );
    }
    Ok(())
}

pub fn cmd_region(
    resolution: usize,
    seed: u64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let file = path.map(open_csv).transpose()?;
    let points = feasible_region_sweep(resolution, seed)?;
    match file {
        Some(mut wtr) => {
            for p in &points {
                wtr.serialize(p)?;
            }
            wtr.flush()?;
            writeln!(out, "{} points written", points.len())?;
        }
        None => {
            let mut wtr = csv::Writer::from_writer(&mut *out);
            for p in &points {
                wtr.serialize(p)?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

pub fn cmd_optimize(
    witness: WitnessArg,
    mode: Dynamics,
    budget: usize,
    seed: u64,
    q: Option<Vec<f64>>,
    out: &mut dyn Write,
) -> Result<()> {
    let objective = match witness {
        WitnessArg::T => Objective::T,
        WitnessArg::Tq => Objective::Tq(QVector::new(q.unwrap_or_else(|| vec![0.5, 0.5]))?),
        WitnessArg::PS => Objective::PS,
        WitnessArg::Rank1 => {
            return Err(Error::NotApplicable(
                "rank1 is not an optimization objective".into(),
            ))
        }
    };
    let outcome = maximize_witness(
        &objective,
        mode,
        budget,
        seed,
        &NelderMeadOptions::default(),
    )?;
    print_json(&outcome.report, out)
}

pub const DEMOS: [&str; 3] = ["wfs", "theorem1", "bipartite"];

pub fn cmd_demo(name: &str, out: &mut dyn Write) -> Result<()> {
    match name {
        "wfs" => demo_wfs(out),
        "theorem1" => demo_theorem1(out),
        "bipartite" => demo_bipartite(out),
        other => Err(Error::InvalidScenario(format!(
            "unknown demo {other:?}; available: {}",
            DEMOS.join(", ")
        ))),
    }
}

fn fmt_c(c: &crate::qlinalg::C64) -> String {
    if c.im.abs() < 1e-15 {
        format!("{:.6}", c.re)
    } else {
        format!("({:.6}{:+.6}i)", c.re, c.im)
    }
}

/// Non-zero components of a `Q_s ⊗ Lab` vector as `|q⟩|f_l⟩` terms.
fn describe_vector(v: &ComplexVector, lab_dim: usize) -> String {
    let terms: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 1e-12)
        .map(|(k, c)| format!("{}|{}>|f{}>", fmt_c(c), k / lab_dim, k % lab_dim))
        .collect();
    terms.join(" + ")
}

fn describe_state(s: &CombinedState) -> String {
    let lab_dim = s.encoding().lab_dim();
    match s.pure_vector() {
        Some(v) => format!("pure  {}", describe_vector(v, lab_dim)),
        None => {
            let rho = s.density_matrix();
            let diag: Vec<String> = (0..rho.rows())
                .filter(|&k| rho[(k, k)].norm() > 1e-12)
                .map(|k| {
                    format!(
                        "{:.6} |{}>|f{}><..|",
                        rho[(k, k)].re,
                        k / lab_dim,
                        k % lab_dim
                    )
                })
                .collect();
            format!("mixed {}", diag.join(" + "))
        }
    }
}

fn demo_wfs(out: &mut dyn Write) -> Result<()> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = crate::qlinalg::ComplexMatrix::from_real_rows(&[&[h, h], &[-h, h]])?;
    writeln!(
        out,
        "Q_s prepared in |+> = (|0> + |1>)/sqrt2; Friend measures in the computational basis."
    )?;
    writeln!(
        out,
        "Wigner's U maps (|F0> + |F1>)/sqrt2 to |F0> and (|F1> - |F0>)/sqrt2 to |F1>."
    )?;
    writeln!(out)?;
    let mut final_p = Vec::new();
    for dynamics in [Dynamics::AoM, Dynamics::NoM] {
        let s = Scenario::new(
            ComplexVector::from_real(&[h, h])?,
            vec![FriendMeasurement::computational(2)],
            vec![
                SuperObserverOp::Identity,
                SuperObserverOp::block_unitary(vec![u.clone()])?,
            ],
            dynamics,
        )?;
        let who = match dynamics {
            Dynamics::AoM => "Friend's description (collapse, AoM)",
            Dynamics::NoM => "Wigner's description (unitary, NoM)",
        };
        let st = post_measurement_state(s.psi(), 0, &s)?;
        writeln!(out, "{who}")?;
        writeln!(
            out,
            "  Lab after Friend's measurement: {}",
            describe_state(&st)
        )?;
        let id = run_trial(&s, 0, 0)?;
        writeln!(
            out,
            "  p(0|A,1) = {:.6}  p(1|A,1) = {:.6}",
            id.p(0, 0),
            id.p(0, 1)
        )?;
        let after = crate::scenario::apply_op(&st, &s.ops()[1], &s)?;
        writeln!(out, "  Lab after U: {}", describe_state(&after))?;
        let dist = measure_omega(&after, &s);
        writeln!(
            out,
            "  p(0|A,U) = {:.6}  p(1|A,U) = {:.6}",
            dist.p(0, 0),
            dist.p(0, 1)
        )?;
        let t = eval_t(&s, 1)?;
        writeln!(out, "  T = {:.6} (AoM bound {:.1})", t.value, t.bound)?;
        writeln!(out)?;
        final_p.push(dist.p(0, 0));
    }
    writeln!(
        out,
        "Wigner's measurement {{|F0>, |F1>}} after U: outcome 0 with probability {:.6} (AoM) vs {:.6} (NoM).",
        final_p[0], final_p[1]
    )?;
    writeln!(
        out,
        "Under AoM both outcomes are equally likely; under NoM outcome 0 is certain."
    )?;
    Ok(())
}

fn demo_theorem1(out: &mut dyn Write) -> Result<()> {
    let mut rng = stream_rng(2024, 0);
    let (d, n, m) = (3, 2, 3);
    let meas = (0..n)
        .map(|_| FriendMeasurement::from_unitary(&random_unitary(d, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let mut ops = vec![SuperObserverOp::Identity];
    for _ in 1..m {
        ops.push(SuperObserverOp::block_unitary(
            (0..n).map(|_| random_unitary(d, &mut rng)).collect(),
        )?);
    }
    let aom = Scenario::new(random_state(d, &mut rng), meas, ops, Dynamics::AoM)?;
    let nom = matching_nom_scenario(&aom)?;
    writeln!(
        out,
        "Random AoM scenario (seed 2024): d = {d}, n = {n}, m = {m}."
    )?;
    writeln!(
        out,
        "Matching NoM scenario: each block maps sum_i alpha_i |F_i> to sum_a sqrt(beta_a) |F_a>."
    )?;
    writeln!(out)?;
    writeln!(out, "  x w   a   p_AoM(a|x,w)   p_NoM(a|x,w)")?;
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for w in 0..m {
            let pa = run_trial(&aom, x, w)?;
            let pn = run_trial(&nom, x, w)?;
            for a in 0..d {
                let (u, v) = (pa.p(x, a), pn.p(x, a));
                worst = worst.max((u - v).abs());
                writeln!(out, "  {x} {w}   {a}   {u:.12}   {v:.12}")?;
            }
        }
    }
    writeln!(out)?;
    writeln!(out, "max |p_AoM - p_NoM| = {worst:.3e}")?;
    writeln!(out, "Every AoM table is reproduced under NoM.")?;
    Ok(())
}

fn print_table(t: &JointTable, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "  w x y   p00      p01      p10      p11")?;
    for w in 0..2 {
        for x in 0..2 {
            for y in 0..2 {
                writeln!(
                    out,
                    "  {w} {x} {y}   {:.6} {:.6} {:.6} {:.6}",
                    t.p(w, x, y, 0, 0).max(0.0),
                    t.p(w, x, y, 0, 1).max(0.0),
                    t.p(w, x, y, 1, 0).max(0.0),
                    t.p(w, x, y, 1, 1).max(0.0)
                )?;
            }
        }
    }
    Ok(())
}

fn demo_bipartite(out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "Shared state (|00> + |11>)/sqrt2. Alice's Friend: sigma_z (x=0), sigma_x (x=1)."
    )?;
    writeln!(out, "Bob: sigma_z (y=0), sigma_x (y=1, b=0 <-> |->). Wigner's U: pi/8 rotation of both Lab blocks.")?;
    for dynamics in [Dynamics::NoM, Dynamics::AoM] {
        let bs = nom_violating_strategy().with_dynamics(dynamics);
        let t = joint_table(&bs)?;
        let r = eval_scenario(&bs)?;
        writeln!(out)?;
        writeln!(out, "{}", dynamics.label().to_uppercase())?;
        print_table(&t, out)?;
        writeln!(
            out,
            "  no-signalling: {}",
            crate::bipartite::check_no_signalling(&t)
        )?;
        writeln!(out, "  P0 = {:.7}", r.p0)?;
        writeln!(
            out,
            "  P1 = {:.7}  (AoM bound at this P0: {:.7})",
            r.p1, r.p1_bound
        )?;
        writeln!(
            out,
            "  PS = {:.7}  (AoM bound 0.75, violated: {})",
            r.ps, r.witness.violated
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_to_string(cmd: Command) -> (Result<()>, String) {
        let mut buf = Vec::new();
        let r = dispatch(cmd, &mut buf);
        (r, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn demo_names() {
        for name in DEMOS {
            let (r, text) = run_to_string(Command::Demo { name: name.into() });
            r.unwrap();
            assert!(!text.is_empty());
        }
        let (r, _) = run_to_string(Command::Demo {
            name: "nope".into(),
        });
        let msg = r.unwrap_err().to_string();
        assert!(msg.contains("wfs, theorem1, bipartite"));
    }

    #[test]
    fn bipartite_demo_prints_witnesses() {
        let (r, text) = run_to_string(Command::Demo {
            name: "bipartite".into(),
        });
        r.unwrap();
        assert!(text.contains("P0 = 0.7500000"));
        assert!(text.contains("P1 = 0.8535534"));
        assert!(text.contains("PS = 0.8535534"));
    }

    #[test]
    fn wfs_demo_shows_disagreement() {
        let (r, text) = run_to_string(Command::Demo { name: "wfs".into() });
        r.unwrap();
        assert!(text.contains("0.500000 (AoM) vs 1.000000 (NoM)"), "{text}");
    }

    #[test]
    fn parse_errors_exit_with_two() {
        assert_eq!(run(["wfs", "sweep"]), EXIT_INVALID);
        assert_eq!(run(["wfs", "--help"]), EXIT_OK);
    }
}
