//! Single-party witnesses `T` and `T(q)`.
//!
//! Both are functions of observed outcome tables only:
//!
//! ```text
//! T    = p(0|Ā,U) − |p(0|Ā,1) − ½| − |p(1|Ā,1) − ½|      (AoM: ≤ ½)
//! T(q) = p(0|Ā,U) − Σ_i |p(i|Ā,1) − q_i|                 (AoM: ≤ max q_i)
//! ```
//!
//! Outcome `0` plays the role of `+1`. Under NoM both reach 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::scenario_digest;
use crate::qlinalg::{unitary_mapping, ComplexMatrix, ComplexVector, C64, EPS_PROB, ONE, ZERO};
use crate::scenario::{
    trial_probabilities, Dynamics, FriendMeasurement, Scenario, SuperObserverOp,
};

/// Free parameters of `T(q)`: a probability vector with every entry `< 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QVector(Vec<f64>);

impl QVector {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidQ("q must have at least one entry".into()));
        }
        if let Some((i, v)) = q
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v >= 1.0)
        {
            return Err(Error::InvalidQ(format!("q[{i}] = {v} is outside [0, 1)")));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > EPS_PROB {
            return Err(Error::InvalidQ(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(Self(q))
    }

    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First index attaining the maximum.
    pub fn argmax(&self) -> usize {
        let m = self.max();
        self.0.iter().position(|&v| v == m).expect("non-empty")
    }
}

impl TryFrom<Vec<f64>> for QVector {
    type Error = Error;
    fn try_from(q: Vec<f64>) -> Result<Self> {
        Self::new(q)
    }
}

impl From<QVector> for Vec<f64> {
    fn from(q: QVector) -> Self {
        q.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub witness: String,
    pub value: f64,
    /// Largest value reachable under AoM.
    pub bound: f64,
    pub violated: bool,
    pub inputs_digest: String,
    pub seed: Option<u64>,
    pub tolerance: f64,
}

impl WitnessReport {
    pub fn new(witness: impl Into<String>, value: f64, bound: f64, inputs_digest: String) -> Self {
        Self {
            witness: witness.into(),
            value,
            bound,
            violated: value > bound + EPS_PROB,
            inputs_digest,
            seed: None,
            tolerance: EPS_PROB,
        }
    }

    /// Re-decides `violated` with a looser or tighter tolerance, e.g. to
    /// allow for experimental imperfections.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.violated = self.value > self.bound + tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

pub const T_BOUND: f64 = 0.5;

/// `T` from `p(·|Ā,U)` and `p(·|Ā,1)` (both of length 2).
pub fn t_value(p_u: &[f64], p_id: &[f64]) -> f64 {
    p_u[0] - (p_id[0] - 0.5).abs() - (p_id[1] - 0.5).abs()
}

/// `T(q)` from `p(·|Ā,U)` and `p(·|Ā,1)`.
pub fn tq_value(p_u: &[f64], p_id: &[f64], q: &QVector) -> f64 {
    p_u[0]
        - p_id
            .iter()
            .zip(q.as_slice())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
}

fn check_single_input(scenario: &Scenario) -> Result<()> {
    if scenario.n() != 1 {
        return Err(Error::NotApplicable(format!(
            "witness needs a single Friend input (n = 1), scenario has n = {}",
            scenario.n()
        )));
    }
    Ok(())
}

fn check_w(scenario: &Scenario, w: usize) -> Result<()> {
    if w >= scenario.m() {
        return Err(Error::IndexOutOfRange {
            what: "w",
            index: w,
            limit: scenario.m(),
        });
    }
    Ok(())
}

pub fn eval_t(scenario: &Scenario, w: usize) -> Result<WitnessReport> {
    check_single_input(scenario)?;
    if scenario.d() != 2 {
        return Err(Error::NotApplicable(format!(
            "T needs d = 2, scenario has d = {}",
            scenario.d()
        )));
    }
    check_w(scenario, w)?;
    let p_id = trial_probabilities(scenario, 0, 0)?;
    let p_u = trial_probabilities(scenario, 0, w)?;
    Ok(WitnessReport::new(
        "T",
        t_value(&p_u, &p_id),
        T_BOUND,
        scenario_digest(scenario),
    ))
}

pub fn eval_tq(scenario: &Scenario, w: usize, q: &QVector) -> Result<WitnessReport> {
    check_single_input(scenario)?;
    if q.d() != scenario.d() {
        return Err(Error::InvalidQ(format!(
            "q has {} entries, scenario has d = {}",
            q.d(),
            scenario.d()
        )));
    }
    check_w(scenario, w)?;
    let p_id = trial_probabilities(scenario, 0, 0)?;
    let p_u = trial_probabilities(scenario, 0, w)?;
    Ok(WitnessReport::new(
        "Tq",
        tq_value(&p_u, &p_id, q),
        q.max(),
        scenario_digest(scenario),
    ))
}

/// `T(q)` when `Q_s` starts in the mixture `Σ_k p_k |φ_k⟩⟨φ_k|`. The outcome
/// tables are linear in the input state, so each pure component is run
/// through the scenario and the tables are averaged.
pub fn eval_tq_mixed_input(
    scenario: &Scenario,
    ensemble: &[(f64, ComplexVector)],
    w: usize,
    q: &QVector,
) -> Result<WitnessReport> {
    check_single_input(scenario)?;
    check_w(scenario, w)?;
    let d = scenario.d();
    let mut p_id = vec![0.0; d];
    let mut p_u = vec![0.0; d];
    let total: f64 = ensemble.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > EPS_PROB || ensemble.iter().any(|(p, _)| *p < 0.0) {
        return Err(Error::InvalidScenario(
            "mixture weights must be non-negative and sum to 1".into(),
        ));
    }
    let mut digest_input = String::new();
    for (p, phi) in ensemble {
        let component = Scenario::new(
            phi.clone(),
            scenario.measurements().to_vec(),
            scenario.ops().to_vec(),
            scenario.dynamics(),
        )?;
        for (acc, v) in p_id.iter_mut().zip(trial_probabilities(&component, 0, 0)?) {
            *acc += p * v;
        }
        for (acc, v) in p_u.iter_mut().zip(trial_probabilities(&component, 0, w)?) {
            *acc += p * v;
        }
        digest_input.push_str(&format!("{p:e}:{};", scenario_digest(&component)));
    }
    Ok(WitnessReport::new(
        "Tq",
        tq_value(&p_u, &p_id, q),
        q.max(),
        crate::io::digest(digest_input.as_bytes()),
    ))
}

/// `Σ_i √q_i |ψ_i⟩`
pub fn sqrt_q_state(q: &QVector, basis: &FriendMeasurement) -> Result<ComplexVector> {
    if q.d() != basis.d() {
        return Err(Error::InvalidQ(format!(
            "q has {} entries, basis has {}",
            q.d(),
            basis.d()
        )));
    }
    let mut psi = ComplexVector::zeros(q.d());
    for (i, &qi) in q.as_slice().iter().enumerate() {
        psi.axpy(C64::new(qi.sqrt(), 0.0), basis.vector(i));
    }
    psi.normalized()
}

/// AoM realization reaching `T(q) = max q_i`: `ψ = Σ √q_i |ψ_i⟩` and a block
/// permutation exchanging `|F_{i_m}⟩` and `|F_0⟩`, `q_{i_m} = max q_i`.
pub fn saturating_aom_realization(q: &QVector, basis: &FriendMeasurement) -> Result<Scenario> {
    let psi = sqrt_q_state(q, basis)?;
    let d = q.d();
    let im = q.argmax();
    let swap = ComplexMatrix::from_fn(d, d, |a, i| {
        let target = if i == im {
            0
        } else if i == 0 {
            im
        } else {
            i
        };
        if a == target {
            ONE
        } else {
            ZERO
        }
    });
    Scenario::new(
        psi,
        vec![basis.clone()],
        vec![
            SuperObserverOp::Identity,
            SuperObserverOp::block_unitary(vec![swap])?,
        ],
        Dynamics::AoM,
    )
}

/// NoM realization reaching `T(q) = 1`: the block unitary sends
/// `Σ √q_i |F_i⟩` to `|F_0⟩`.
pub fn violating_nom_realization(q: &QVector, basis: &FriendMeasurement) -> Result<Scenario> {
    let psi = sqrt_q_state(q, basis)?;
    let d = q.d();
    let source = ComplexVector::new(
        q.as_slice()
            .iter()
            .map(|v| C64::new(v.sqrt(), 0.0))
            .collect(),
    )?;
    let u = unitary_mapping(&source, &ComplexVector::basis(d, 0))?;
    Scenario::new(
        psi,
        vec![basis.clone()],
        vec![
            SuperObserverOp::Identity,
            SuperObserverOp::block_unitary(vec![u])?,
        ],
        Dynamics::NoM,
    )
}

/// `max_a p(a|Ā_x,U_w) ≤ max_i p(i|Ā_x,1) + ε` for every input `x`.
pub fn check_rank1_bound(scenario: &Scenario, w: usize) -> Result<bool> {
    Ok(rank1_margin(scenario, w)? >= -EPS_PROB)
}

/// `min_x [max_i p(i|Ā_x,1) − max_a p(a|Ā_x,U_w)]`; negative values are
/// violations of the AoM bound.
pub fn rank1_margin(scenario: &Scenario, w: usize) -> Result<f64> {
    if scenario.dynamics() != Dynamics::AoM {
        return Err(Error::NotApplicable(
            "the rank-one bound is an AoM statement".into(),
        ));
    }
    check_w(scenario, w)?;
    let mut margin = f64::INFINITY;
    for x in 0..scenario.n() {
        let max_id = max_of(&trial_probabilities(scenario, x, 0)?);
        let max_u = max_of(&trial_probabilities(scenario, x, w)?);
        margin = margin.min(max_id - max_u);
    }
    Ok(margin)
}

fn max_of(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `q = p(·|Ā,1)`, which zeroes the penalty term of `T(q)`.
pub fn q_from_identity_statistics(scenario: &Scenario) -> Result<QVector> {
    check_single_input(scenario)?;
    let p = trial_probabilities(scenario, 0, 0)?;
    let total: f64 = p.iter().sum();
    QVector::new(p.iter().map(|v| v / total).collect())
}
