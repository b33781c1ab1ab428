//! Numerical search over scenarios: witness maximization and
//! bound-falsification sweeps.
//!
//! Witness objectives have `|p − q|` kinks, so the local search is a
//! derivative-free Nelder–Mead simplex with random restarts. Restart 0 always
//! starts from the known analytic construction for the requested dynamics,
//! so the reported optimum is never below it.
//!
//! Parameter layouts (all reals):
//!
//! - `T`, `Tq` (Friend basis fixed to the canonical one, which loses no
//!   generality since only `α_i = ⟨ψ_i|ψ⟩` and the block matter):
//!   `2d` entries for `ψ` (re/im pairs, normalized on decode) followed by the
//!   `d² − 1` SU(d) angles of the block `U`.
//! - `PS` (qubit Bob, rank-one `B_y`): 8 entries for `ψ_AB`, 3 + 3 SU(2)
//!   angles for Alice's bases, 2 + 2 angles `(t, φ)` for Bob's vectors
//!   `cos t|0⟩ + e^{iφ} sin t|1⟩`, 3 + 3 SU(2) angles for the blocks of `U`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite::{
    chsh_value, joint_table, nom_violating_strategy, ps_value, random_bipartite, BipartiteScenario,
    BobMeasurement, PS_BOUND,
};
use crate::channel::random_mixed_unitary_channel;
use crate::error::{Error, Result};
use crate::qlinalg::{
    decode_unitary, encode_unitary, random_simplex_weights, random_state, random_unitary,
    stream_rng, su_param_count, ComplexMatrix, ComplexVector, UnitaryParams, C64, EPS_PROB,
};
use crate::scenario::{
    trial_probabilities, Dynamics, FriendMeasurement, Scenario, SuperObserverOp,
};
use crate::witnesses::{
    eval_t, eval_tq, saturating_aom_realization, t_value, tq_value, violating_nom_realization,
    QVector, T_BOUND,
};

/// Stopping rule for one Nelder–Mead run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once every vertex is this close (max-norm) to the best one.
    pub tol_diameter: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            tol_diameter: 1e-8,
            initial_step: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Best value after each iteration; non-decreasing.
    pub trace: Vec<f64>,
}

/// Maximizes `f` starting from the simplex `x0 + step·e_k`.
pub fn nelder_mead_max(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        // minimize the negated objective; NaN counts as worst
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for k in 0..n {
        let mut x = x0.to_vec();
        x[k] += opts.initial_step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut trace = Vec::new();
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(-simplex[0].1);
        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if n == 0 || diameter < opts.tol_diameter || evals >= opts.max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    let (x, v) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        value: -v,
        evals,
        trace,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    T,
    Tq(QVector),
    PS,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::T => "T",
            Objective::Tq(_) => "Tq",
            Objective::PS => "PS",
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Objective::T => T_BOUND,
            Objective::Tq(q) => q.max(),
            Objective::PS => PS_BOUND,
        }
    }

    fn d(&self) -> usize {
        match self {
            Objective::T | Objective::PS => 2,
            Objective::Tq(q) => q.d(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Objective::T | Objective::Tq(_) => {
                let d = self.d();
                2 * d + su_param_count(d)
            }
            Objective::PS => 8 + 3 + 3 + 2 + 2 + 3 + 3,
        }
    }
}

/// Scenario realized by a parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Realization {
    Single(Scenario),
    Bipartite(BipartiteScenario),
}

fn state_from(raw: &[f64]) -> Result<ComplexVector> {
    ComplexVector::new(raw.chunks(2).map(|p| C64::new(p[0], p[1])).collect())?.normalized()
}

fn state_params(v: &ComplexVector) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn su(dim: usize, angles: &[f64]) -> Result<ComplexMatrix> {
    decode_unitary(&UnitaryParams::new(dim, angles.to_vec())?)
}

fn bob_vector(t: f64, phi: f64) -> ComplexVector {
    ComplexVector::new(vec![C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), phi)]).expect("dim 2")
}

/// Builds the scenario a parameter vector describes.
pub fn decode(objective: &Objective, mode: Dynamics, params: &[f64]) -> Result<Realization> {
    if params.len() != objective.param_count() {
        return Err(Error::ParameterCount {
            expected: objective.param_count(),
            actual: params.len(),
        });
    }
    match objective {
        Objective::T | Objective::Tq(_) => {
            let d = objective.d();
            let psi = state_from(&params[..2 * d])?;
            let u = su(d, &params[2 * d..])?;
            Ok(Realization::Single(Scenario::new(
                psi,
                vec![FriendMeasurement::computational(d)],
                vec![
                    SuperObserverOp::Identity,
                    SuperObserverOp::BlockUnitary { blocks: vec![u] },
                ],
                mode,
            )?))
        }
        Objective::PS => {
            let psi = state_from(&params[..8])?;
            let a0 = FriendMeasurement::from_unitary(&su(2, &params[8..11])?)?;
            let a1 = FriendMeasurement::from_unitary(&su(2, &params[11..14])?)?;
            let b0 = BobMeasurement::rank_one(&bob_vector(params[14], params[15]))?;
            let b1 = BobMeasurement::rank_one(&bob_vector(params[16], params[17]))?;
            let u0 = su(2, &params[18..21])?;
            let u1 = su(2, &params[21..24])?;
            Ok(Realization::Bipartite(BipartiteScenario::new(
                psi,
                vec![a0, a1],
                vec![b0, b1],
                vec![
                    SuperObserverOp::Identity,
                    SuperObserverOp::BlockUnitary {
                        blocks: vec![u0, u1],
                    },
                ],
                mode,
            )?))
        }
    }
}

/// Witness value of a realization, straight from the outcome tables.
pub fn objective_value(objective: &Objective, r: &Realization) -> Result<f64> {
    match (objective, r) {
        (Objective::T, Realization::Single(s)) => Ok(t_value(
            &trial_probabilities(s, 0, 1)?,
            &trial_probabilities(s, 0, 0)?,
        )),
        (Objective::Tq(q), Realization::Single(s)) => Ok(tq_value(
            &trial_probabilities(s, 0, 1)?,
            &trial_probabilities(s, 0, 0)?,
            q,
        )),
        (Objective::PS, Realization::Bipartite(bs)) => {
            let t = joint_table(bs)?;
            Ok(ps_value(chsh_value(&t, 0), chsh_value(&t, 1)))
        }
        _ => Err(Error::NotApplicable(
            "objective and realization disagree".into(),
        )),
    }
}

/// Same value through the reporting pipeline (`eval_t`, `eval_tq`, `eval_scenario`).
pub fn reported_value(objective: &Objective, r: &Realization) -> Result<f64> {
    match (objective, r) {
        (Objective::T, Realization::Single(s)) => Ok(eval_t(s, 1)?.value),
        (Objective::Tq(q), Realization::Single(s)) => Ok(eval_tq(s, 1, q)?.value),
        (Objective::PS, Realization::Bipartite(bs)) => Ok(crate::bipartite::eval_scenario(bs)?.ps),
        _ => Err(Error::NotApplicable(
            "objective and realization disagree".into(),
        )),
    }
}

/// Parameters of the analytic construction for `mode`: the bound-saturating
/// one under AoM, the violating one under NoM.
pub fn analytic_seed(objective: &Objective, mode: Dynamics) -> Result<Vec<f64>> {
    match objective {
        Objective::T | Objective::Tq(_) => {
            let q = match objective {
                Objective::Tq(q) => q.clone(),
                _ => QVector::uniform(2)?,
            };
            let z = FriendMeasurement::computational(q.d());
            let s = match (objective, mode) {
                (Objective::T, _) | (_, Dynamics::NoM) => violating_nom_realization(&q, &z)?,
                _ => saturating_aom_realization(&q, &z)?,
            };
            let SuperObserverOp::BlockUnitary { blocks } = &s.ops()[1] else {
                unreachable!("realizations carry a block unitary");
            };
            let mut p = state_params(s.psi());
            p.extend(encode_unitary(&blocks[0])?.angles);
            Ok(p)
        }
        Objective::PS => {
            let bs = nom_violating_strategy();
            let mut p = state_params(bs.psi());
            for m in bs.alice() {
                p.extend(encode_unitary(&m.as_unitary())?.angles);
            }
            // |0⟩ and |−⟩ = (|0⟩ − |1⟩)/√2
            p.extend([0.0, 0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::PI]);
            let SuperObserverOp::BlockUnitary { blocks } = &bs.ops()[1] else {
                unreachable!("violating strategy carries a block unitary");
            };
            for b in blocks {
                match mode {
                    // U = 1 keeps P_1 = P_0 = 3/4, which saturates P_S ≤ 3/4
                    Dynamics::AoM => p.extend(vec![0.0; su_param_count(2)]),
                    Dynamics::NoM => p.extend(encode_unitary(b)?.angles),
                }
            }
            Ok(p)
        }
    }
}

fn random_start<R: Rng + ?Sized>(objective: &Objective, rng: &mut R) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    match objective {
        Objective::T | Objective::Tq(_) => {
            let d = objective.d();
            let mut p = state_params(&random_state(d, rng));
            p.extend(
                encode_unitary(&random_unitary(d, rng))
                    .expect("unitary")
                    .angles,
            );
            p
        }
        Objective::PS => {
            let mut p = state_params(&random_state(4, rng));
            for _ in 0..2 {
                p.extend(
                    encode_unitary(&random_unitary(2, rng))
                        .expect("unitary")
                        .angles,
                );
            }
            for _ in 0..2 {
                p.push(rng.random_range(0.0..pi / 2.0));
                p.push(rng.random_range(-pi..pi));
            }
            for _ in 0..2 {
                p.extend(
                    encode_unitary(&random_unitary(2, rng))
                        .expect("unitary")
                        .angles,
                );
            }
            p
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub witness: String,
    pub mode: Dynamics,
    pub best_value: f64,
    pub bound: f64,
    pub params: Vec<f64>,
    pub seed: u64,
    pub evals: usize,
    /// Value of the analytic construction used as restart 0.
    pub seed_value: f64,
    /// Best value after each restart, in restart order; non-decreasing.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    pub report: OptimizationReport,
    pub best: Realization,
}

/// Multi-restart maximization of a witness. `budget` is the number of
/// restarts (≥ 1); restart `r > 0` starts from a random point drawn from
/// stream `r` of `seed`. Deterministic for a given seed regardless of thread
/// count.
pub fn maximize_witness(
    objective: &Objective,
    mode: Dynamics,
    budget: usize,
    seed: u64,
    opts: &NelderMeadOptions,
) -> Result<OptimizationOutcome> {
    if budget == 0 {
        return Err(Error::InvalidScenario("budget must be >= 1 restart".into()));
    }
    let seed_params = analytic_seed(objective, mode)?;
    let seed_value = objective_value(objective, &decode(objective, mode, &seed_params)?)?;
    let runs: Vec<NelderMeadResult> = (0..budget as u64)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                seed_params.clone()
            } else {
                random_start(objective, &mut stream_rng(seed, r))
            };
            let mut f = |x: &[f64]| {
                decode(objective, mode, x)
                    .and_then(|s| objective_value(objective, &s))
                    .unwrap_or(f64::NAN)
            };
            nelder_mead_max(&mut f, &start, opts)
        })
        .collect();
    let mut best_idx = 0;
    let mut trace = Vec::with_capacity(runs.len());
    let mut running = f64::NEG_INFINITY;
    for (i, run) in runs.iter().enumerate() {
        if run.value > runs[best_idx].value {
            best_idx = i;
        }
        running = running.max(run.value);
        trace.push(running);
    }
    let best_run = &runs[best_idx];
    let best = decode(objective, mode, &best_run.x)?;
    let best_value = objective_value(objective, &best)?;
    Ok(OptimizationOutcome {
        report: OptimizationReport {
            witness: objective.name().into(),
            mode,
            best_value,
            bound: objective.bound(),
            params: best_run.x.clone(),
            seed,
            evals: runs.iter().map(|r| r.evals).sum(),
            seed_value,
            trace,
        },
        best,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepWitness {
    /// `T`, `d = 2`.
    T,
    /// `max_a p(a|Ā,U)` against `max_i p(i|Ā,1)`, `d ∈ {2,3,4}`.
    Rank1,
    /// `T(q)` with random `q`, `d ∈ {2,3,4}`.
    Tq,
    /// `P_S`, qubit Bob.
    PS,
}

impl SweepWitness {
    pub fn name(self) -> &'static str {
        match self {
            SweepWitness::T => "T",
            SweepWitness::Rank1 => "rank1",
            SweepWitness::Tq => "Tq",
            SweepWitness::PS => "PS",
        }
    }
}

impl std::str::FromStr for SweepWitness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(Self::T),
            "rank1" => Ok(Self::Rank1),
            "tq" => Ok(Self::Tq),
            "ps" => Ok(Self::PS),
            other => Err(Error::InvalidScenario(format!(
                "unknown witness {other:?} (expected T, rank1, Tq or PS)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub witness: SweepWitness,
    pub mode: Dynamics,
    pub samples: usize,
    pub seed: u64,
    /// Replace Wigner's block unitary by a random mixture of up to 8 Haar
    /// unitaries on the whole `Q_s ⊗ Lab` space (unital, not block form).
    pub channels: bool,
    /// Under NoM, make sample 0 the analytic violating construction.
    pub inject_construction: bool,
}

impl SweepConfig {
    pub fn new(witness: SweepWitness, mode: Dynamics, samples: usize, seed: u64) -> Self {
        Self {
            witness,
            mode,
            samples,
            seed,
            channels: false,
            inject_construction: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub witness: String,
    pub sample: u64,
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub witness: String,
    pub mode: Dynamics,
    pub samples: usize,
    pub seed: u64,
    pub max_value: f64,
    /// `min(bound − value)` over all samples; negative means a violation.
    pub min_margin: f64,
    /// Sample indices (RNG stream numbers) whose value exceeds the bound.
    pub violations: Vec<u64>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

fn random_single<R: Rng + ?Sized>(
    d: usize,
    mode: Dynamics,
    channels: bool,
    rng: &mut R,
) -> Scenario {
    let psi = random_state(d, rng);
    let basis = FriendMeasurement::from_unitary(&random_unitary(d, rng)).expect("unitary");
    let s = Scenario::new(psi, vec![basis], vec![SuperObserverOp::Identity], mode).expect("valid");
    let op = if channels {
        let count = rng.random_range(1..=8);
        let k = random_mixed_unitary_channel(s.encoding().system_dim(), count, rng);
        SuperObserverOp::UnitalChannel { kraus: k }
    } else {
        SuperObserverOp::BlockUnitary {
            blocks: vec![random_unitary(d, rng)],
        }
    };
    s.with_ops(vec![SuperObserverOp::Identity, op])
        .expect("valid")
}

fn random_q<R: Rng + ?Sized>(d: usize, rng: &mut R) -> QVector {
    loop {
        if let Ok(q) = QVector::new(random_simplex_weights(d, rng)) {
            return q;
        }
    }
}

fn max_of(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `(value, bound)` of sample `k`.
fn sweep_sample(cfg: &SweepConfig, k: u64) -> Result<(f64, f64)> {
    let mut rng = stream_rng(cfg.seed, k);
    let inject = cfg.inject_construction && cfg.mode == Dynamics::NoM && k == 0;
    match cfg.witness {
        SweepWitness::T => {
            let s = if inject {
                let z = FriendMeasurement::computational(2);
                violating_nom_realization(&QVector::uniform(2)?, &z)?
            } else {
                random_single(2, cfg.mode, cfg.channels, &mut rng)
            };
            let v = t_value(
                &trial_probabilities(&s, 0, 1)?,
                &trial_probabilities(&s, 0, 0)?,
            );
            Ok((v, T_BOUND))
        }
        SweepWitness::Rank1 => {
            let d = 2 + (k % 3) as usize;
            let s = random_single(d, cfg.mode, cfg.channels, &mut rng);
            Ok((
                max_of(&trial_probabilities(&s, 0, 1)?),
                max_of(&trial_probabilities(&s, 0, 0)?),
            ))
        }
        SweepWitness::Tq => {
            let d = 2 + (k % 3) as usize;
            let q = random_q(d, &mut rng);
            let s = if inject {
                violating_nom_realization(&q, &FriendMeasurement::computational(d))?
            } else {
                random_single(d, cfg.mode, cfg.channels, &mut rng)
            };
            let v = tq_value(
                &trial_probabilities(&s, 0, 1)?,
                &trial_probabilities(&s, 0, 0)?,
                &q,
            );
            Ok((v, q.max()))
        }
        SweepWitness::PS => {
            if cfg.channels {
                return Err(Error::NotApplicable(
                    "channel sweeps are single-party only".into(),
                ));
            }
            let bs = if inject {
                nom_violating_strategy()
            } else {
                random_bipartite(2, cfg.mode, &mut rng)
            };
            let t = joint_table(&bs)?;
            Ok((ps_value(chsh_value(&t, 0), chsh_value(&t, 1)), PS_BOUND))
        }
    }
}

/// Evaluates `samples` random scenarios. Sample `k` uses RNG stream `k` of
/// `seed`, so rows are identical for any thread count.
pub fn bound_falsification_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidScenario("samples must be >= 1".into()));
    }
    let rows = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|k| {
            let (value, bound) = sweep_sample(cfg, k)?;
            Ok(SweepRow {
                witness: cfg.witness.name().into(),
                sample: k,
                value,
                bound,
                violated: value > bound + EPS_PROB,
                seed: cfg.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_value = rows
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_margin = rows
        .iter()
        .map(|r| r.bound - r.value)
        .fold(f64::INFINITY, f64::min);
    let violations = rows
        .iter()
        .filter(|r| r.violated)
        .map(|r| r.sample)
        .collect();
    Ok(SweepReport {
        witness: cfg.witness.name().into(),
        mode: cfg.mode,
        samples: cfg.samples,
        seed: cfg.seed,
        max_value,
        min_margin,
        violations,
        rows,
    })
}

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}
