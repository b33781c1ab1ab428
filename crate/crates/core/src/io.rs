//! JSON scenario documents.
//!
//! Complex numbers are `[re, im]` pairs, vectors are arrays of pairs and
//! matrices are arrays of rows.
//!
//! ```json
//! {
//!   "d": 2, "n": 1, "m": 2, "dynamics": "NoM",
//!   "psi": [[0.7071067811865476, 0], [0.7071067811865476, 0]],
//!   "measurements": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]],
//!   "ops": [
//!     {"kind": "identity"},
//!     {"kind": "block_unitary", "blocks": [[[[0.7071067811865476, 0], [0.7071067811865476, 0]],
//!                                          [[-0.7071067811865476, 0], [0.7071067811865476, 0]]]]}
//!   ]
//! }
//! ```
//!
//! `measurements[x]` lists Friend's basis vectors `|ψ^x_0⟩ … |ψ^x_{d−1}⟩`.
//! `lab_padding` (optional) adds junk Lab levels. Bipartite documents replace
//! `measurements` with `alice` and add `d_b` plus `bob`: for each setting `y`
//! the projector onto outcome `b = 0`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bipartite::{BipartiteScenario, BobMeasurement};
use crate::error::{Error, Result};
use crate::qlinalg::{ComplexMatrix, ComplexVector, C64};
use crate::scenario::{Dynamics, FriendMeasurement, Scenario, SuperObserverOp};

type Pair = [f64; 2];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpDoc {
    Identity,
    BlockUnitary { blocks: Vec<Vec<Vec<Pair>>> },
    UnitalChannel { kraus: Vec<Vec<Vec<Pair>>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub dynamics: Dynamics,
    pub psi: Vec<Pair>,
    pub measurements: Vec<Vec<Vec<Pair>>>,
    pub ops: Vec<OpDoc>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub lab_padding: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BipartiteDoc {
    pub d_b: usize,
    pub dynamics: Dynamics,
    pub psi: Vec<Pair>,
    pub alice: Vec<Vec<Vec<Pair>>>,
    pub bob: Vec<Vec<Vec<Pair>>>,
    pub ops: Vec<OpDoc>,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

fn to_c(p: &Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn from_c(c: &C64) -> Pair {
    [c.re, c.im]
}

fn vector_from(v: &[Pair]) -> Result<ComplexVector> {
    ComplexVector::new(v.iter().map(to_c).collect())
}

fn vector_doc(v: &ComplexVector) -> Vec<Pair> {
    v.iter().map(from_c).collect()
}

fn matrix_from(rows: &[Vec<Pair>]) -> Result<ComplexMatrix> {
    ComplexMatrix::from_rows(rows.iter().map(|r| r.iter().map(to_c).collect()).collect())
}

fn matrix_doc(m: &ComplexMatrix) -> Vec<Vec<Pair>> {
    m.to_rows()
        .iter()
        .map(|r| r.iter().map(from_c).collect())
        .collect()
}

fn measurement_from(basis: &[Vec<Pair>]) -> Result<FriendMeasurement> {
    FriendMeasurement::new(
        basis
            .iter()
            .map(|v| vector_from(v))
            .collect::<Result<_>>()?,
    )
}

fn measurement_doc(m: &FriendMeasurement) -> Vec<Vec<Pair>> {
    m.basis().iter().map(vector_doc).collect()
}

fn op_from(doc: &OpDoc) -> Result<SuperObserverOp> {
    match doc {
        OpDoc::Identity => Ok(SuperObserverOp::Identity),
        OpDoc::BlockUnitary { blocks } => SuperObserverOp::block_unitary(
            blocks
                .iter()
                .map(|b| matrix_from(b))
                .collect::<Result<_>>()?,
        ),
        OpDoc::UnitalChannel { kraus } => SuperObserverOp::unital_channel(
            kraus
                .iter()
                .map(|k| matrix_from(k))
                .collect::<Result<_>>()?,
        ),
    }
}

fn op_doc(op: &SuperObserverOp) -> OpDoc {
    match op {
        SuperObserverOp::Identity => OpDoc::Identity,
        SuperObserverOp::BlockUnitary { blocks } => OpDoc::BlockUnitary {
            blocks: blocks.iter().map(matrix_doc).collect(),
        },
        SuperObserverOp::UnitalChannel { kraus } => OpDoc::UnitalChannel {
            kraus: kraus.iter().map(matrix_doc).collect(),
        },
    }
}

impl ScenarioDoc {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            d: s.d(),
            n: s.n(),
            m: s.m(),
            dynamics: s.dynamics(),
            psi: vector_doc(s.psi()),
            measurements: s.measurements().iter().map(measurement_doc).collect(),
            ops: s.ops().iter().map(op_doc).collect(),
            lab_padding: s.encoding().padding,
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        if self.measurements.len() != self.n {
            return Err(Error::InvalidScenario(format!(
                "n = {} but {} measurements given",
                self.n,
                self.measurements.len()
            )));
        }
        if self.ops.len() != self.m {
            return Err(Error::InvalidScenario(format!(
                "m = {} but {} ops given",
                self.m,
                self.ops.len()
            )));
        }
        let measurements = self
            .measurements
            .iter()
            .map(|m| measurement_from(m))
            .collect::<Result<Vec<_>>>()?;
        if let Some(m) = measurements.iter().find(|m| m.d() != self.d) {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: m.d(),
            });
        }
        let ops = self.ops.iter().map(op_from).collect::<Result<Vec<_>>>()?;
        Scenario::new_padded(
            vector_from(&self.psi)?,
            measurements,
            ops,
            self.dynamics,
            self.lab_padding,
        )
    }
}

impl BipartiteDoc {
    pub fn from_scenario(bs: &BipartiteScenario) -> Self {
        Self {
            d_b: bs.d_b(),
            dynamics: bs.dynamics(),
            psi: vector_doc(bs.psi()),
            alice: bs.alice().iter().map(measurement_doc).collect(),
            bob: bs
                .bob()
                .iter()
                .map(|b| matrix_doc(b.projector(0)))
                .collect(),
            ops: bs.ops().iter().map(op_doc).collect(),
        }
    }

    pub fn to_scenario(&self) -> Result<BipartiteScenario> {
        let alice = self
            .alice
            .iter()
            .map(|m| measurement_from(m))
            .collect::<Result<Vec<_>>>()?;
        let bob = self
            .bob
            .iter()
            .map(|p| BobMeasurement::new(matrix_from(p)?))
            .collect::<Result<Vec<_>>>()?;
        if let Some(b) = bob.iter().find(|b| b.dim() != self.d_b) {
            return Err(Error::DimensionMismatch {
                expected: self.d_b,
                actual: b.dim(),
            });
        }
        let ops = self.ops.iter().map(op_from).collect::<Result<Vec<_>>>()?;
        BipartiteScenario::new(vector_from(&self.psi)?, alice, bob, ops, self.dynamics)
    }
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioDoc::from_scenario(s)).expect("plain data")
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    serde_json::from_str::<ScenarioDoc>(text)?.to_scenario()
}

pub fn bipartite_to_json(bs: &BipartiteScenario) -> String {
    serde_json::to_string_pretty(&BipartiteDoc::from_scenario(bs)).expect("plain data")
}

pub fn bipartite_from_json(text: &str) -> Result<BipartiteScenario> {
    serde_json::from_str::<BipartiteDoc>(text)?.to_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    scenario_from_json(&std::fs::read_to_string(path)?)
}

pub fn load_bipartite(path: &Path) -> Result<BipartiteScenario> {
    bipartite_from_json(&std::fs::read_to_string(path)?)
}

/// SHA-256 of the compact JSON form, hex encoded.
pub fn scenario_digest(s: &Scenario) -> String {
    digest(&serde_json::to_vec(&ScenarioDoc::from_scenario(s)).expect("plain data"))
}

pub fn bipartite_digest(bs: &BipartiteScenario) -> String {
    digest(&serde_json::to_vec(&BipartiteDoc::from_scenario(bs)).expect("plain data"))
}

pub(crate) fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
