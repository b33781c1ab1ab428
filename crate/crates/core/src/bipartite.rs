//! Two-party extension: Alice's Lab (Friend + Wigner) shares a state with Bob.
//!
//! Alice's Friend has two binary rank-one measurements (`x ∈ {0,1}`), Wigner
//! applies `U_w` (`w ∈ {0,1}`, `U_0 = 1`) to Alice's Lab and measures `Ω`,
//! and Bob measures a binary projective `B_y` of any rank on his system. The
//! witnesses are
//!
//! ```text
//! P_w = Σ c_{abxy} p(a,b|x,y,U_w),   c = ¼ iff a ⊕ b = x·y
//! P_S = P_1 − |P_0 − ¾|              (AoM: ≤ ¾)
//! P_1 ≤ min{(1 + 1/√2)/2, max{P_0, 3/2 − P_0}}   (AoM)
//! ```
//!
//! Bob's measurement acts on a separate tensor factor, so it commutes with
//! Wigner's operation and is evaluated on the final state.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{bipartite_digest, digest};
use crate::qlinalg::{
    random_simplex_weights, random_state, random_unitary, stream_rng, ComplexMatrix, ComplexVector,
    C64, EPS_NORM, EPS_PROB, EPS_UNITARY, ZERO,
};
use crate::scenario::{
    assemble_block_unitary, Dynamics, FriendMeasurement, LabEncoding, LabFrame, SuperObserverOp,
};
use crate::witnesses::WitnessReport;

/// `(1 + 1/√2)/2 = cos²(π/8)`
pub const TSIRELSON: f64 = 0.853_553_390_593_273_8;
pub const PS_BOUND: f64 = 0.75;

/// Bob's binary projective measurement `{P_0, 1 − P_0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BobMeasurement {
    projectors: [ComplexMatrix; 2],
}

impl BobMeasurement {
    pub fn new(p0: ComplexMatrix) -> Result<Self> {
        if !p0.is_square() {
            return Err(Error::NotProjective("projector must be square".into()));
        }
        if !p0.is_projector(EPS_UNITARY) {
            return Err(Error::NotProjective(
                "Bob's outcome-0 operator is not a Hermitian idempotent".into(),
            ));
        }
        let p1 = ComplexMatrix::identity(p0.rows()).sub(&p0);
        Ok(Self {
            projectors: [p0, p1],
        })
    }

    /// Outcome 0 on `|v⟩`, outcome 1 on its orthogonal complement.
    pub fn rank_one(v: &ComplexVector) -> Result<Self> {
        Self::new(crate::qlinalg::projector(v)?)
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].rows()
    }

    pub fn projector(&self, b: usize) -> &ComplexMatrix {
        &self.projectors[b]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteScenario {
    psi: ComplexVector,
    d_b: usize,
    alice: Vec<FriendMeasurement>,
    bob: Vec<BobMeasurement>,
    ops: Vec<SuperObserverOp>,
    dynamics: Dynamics,
    encoding: LabEncoding,
}

impl BipartiteScenario {
    /// `psi` lives on `Q_A ⊗ Q_B` (Alice's index major). Both parties have two
    /// settings and Wigner has `ops = [Identity, U]`.
    pub fn new(
        psi: ComplexVector,
        alice: Vec<FriendMeasurement>,
        bob: Vec<BobMeasurement>,
        ops: Vec<SuperObserverOp>,
        dynamics: Dynamics,
    ) -> Result<Self> {
        if alice.len() != 2 || bob.len() != 2 {
            return Err(Error::InvalidScenario(
                "both parties need exactly two measurement settings".into(),
            ));
        }
        if let Some(m) = alice.iter().find(|m| m.d() != 2) {
            return Err(Error::InvalidScenario(format!(
                "Alice's Friend measurements must be binary, found d = {}",
                m.d()
            )));
        }
        let d_b = bob[0].dim();
        if bob[1].dim() != d_b {
            return Err(Error::DimensionMismatch {
                expected: d_b,
                actual: bob[1].dim(),
            });
        }
        if psi.dim() != 2 * d_b {
            return Err(Error::DimensionMismatch {
                expected: 2 * d_b,
                actual: psi.dim(),
            });
        }
        if !psi.is_normalized(EPS_NORM) {
            return Err(Error::NotNormalized(psi.norm_sqr()));
        }
        if ops.len() != 2 {
            return Err(Error::InvalidScenario(format!(
                "need ops [identity, U], found {} ops",
                ops.len()
            )));
        }
        if ops[0] != SuperObserverOp::Identity {
            return Err(Error::InvalidScenario(format!(
                "ops[0] must be identity, found {}",
                ops[0].kind()
            )));
        }
        let encoding = LabEncoding::new(2, 2);
        for op in &ops {
            op.validate(&encoding)?;
        }
        Ok(Self {
            psi,
            d_b,
            alice,
            bob,
            ops,
            dynamics,
            encoding,
        })
    }

    pub fn psi(&self) -> &ComplexVector {
        &self.psi
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn alice(&self) -> &[FriendMeasurement] {
        &self.alice
    }

    pub fn bob(&self) -> &[BobMeasurement] {
        &self.bob
    }

    pub fn ops(&self) -> &[SuperObserverOp] {
        &self.ops
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn encoding(&self) -> &LabEncoding {
        &self.encoding
    }

    pub fn with_dynamics(&self, dynamics: Dynamics) -> Self {
        Self {
            dynamics,
            ..self.clone()
        }
    }

    pub fn with_op(&self, op: SuperObserverOp) -> Result<Self> {
        Self::new(
            self.psi.clone(),
            self.alice.clone(),
            self.bob.clone(),
            vec![SuperObserverOp::Identity, op],
            self.dynamics,
        )
    }

    fn frame(&self) -> LabFrame<'_> {
        LabFrame::new(&self.encoding, &self.alice, self.d_b)
    }
}

/// `p(a,b|x,y,U_w)` for all 32 combinations of the five bits.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    probs: [f64; 32],
}

fn table_index(w: usize, x: usize, y: usize, a: usize, b: usize) -> usize {
    debug_assert!(w < 2 && x < 2 && y < 2 && a < 2 && b < 2);
    (((w * 2 + x) * 2 + y) * 2 + a) * 2 + b
}

fn bits() -> impl Iterator<Item = (usize, usize, usize, usize, usize)> {
    (0..32).map(|k| {
        (
            (k >> 4) & 1,
            (k >> 3) & 1,
            (k >> 2) & 1,
            (k >> 1) & 1,
            k & 1,
        )
    })
}

impl JointTable {
    pub fn from_fn(mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64) -> Self {
        let mut probs = [0.0; 32];
        for (w, x, y, a, b) in bits() {
            probs[table_index(w, x, y, a, b)] = f(w, x, y, a, b);
        }
        Self { probs }
    }

    pub fn p(&self, w: usize, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.probs[table_index(w, x, y, a, b)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `Σ_b p(a,b|x,y,U_w)`
    pub fn alice_marginal(&self, w: usize, x: usize, y: usize, a: usize) -> f64 {
        self.p(w, x, y, a, 0) + self.p(w, x, y, a, 1)
    }

    /// `Σ_a p(a,b|x,y,U_w)`
    pub fn bob_marginal(&self, w: usize, x: usize, y: usize, b: usize) -> f64 {
        self.p(w, x, y, 0, b) + self.p(w, x, y, 1, b)
    }

    /// Largest deviation of any `(x,y,w)` slice from a probability distribution.
    pub fn normalization_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    let mut s = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            let p = self.p(w, x, y, a, b);
                            worst = worst.max(-p);
                            s += p;
                        }
                    }
                    worst = worst.max((s - 1.0).abs());
                }
            }
        }
        worst
    }

    pub fn digest(&self) -> String {
        digest(&serde_json::to_vec(self).expect("plain data"))
    }
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    w: usize,
    x: usize,
    y: usize,
    a: usize,
    b: usize,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    entries: Vec<TableEntry>,
}

impl Serialize for JointTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableDoc {
            entries: bits()
                .map(|(w, x, y, a, b)| TableEntry {
                    w,
                    x,
                    y,
                    a,
                    b,
                    p: self.p(w, x, y, a, b),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = TableDoc::deserialize(d)?;
        let mut seen = [false; 32];
        let mut probs = [0.0; 32];
        for e in doc.entries {
            if e.w > 1 || e.x > 1 || e.y > 1 || e.a > 1 || e.b > 1 {
                return Err(D::Error::custom("table indices must be bits"));
            }
            let k = table_index(e.w, e.x, e.y, e.a, e.b);
            if seen[k] {
                return Err(D::Error::custom("duplicate table entry"));
            }
            seen[k] = true;
            probs[k] = e.p;
        }
        if seen.iter().any(|s| !s) {
            return Err(D::Error::custom("table needs all 32 entries"));
        }
        Ok(Self { probs })
    }
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s.re
}

/// Full table: for each `x` build Alice's Lab state (dephased under AoM,
/// coherent under NoM), apply `U_w ⊗ 1_B`, and measure `P^x_a ⊗ B^y_b`.
pub fn joint_table(bs: &BipartiteScenario) -> Result<JointTable> {
    let frame = bs.frame();
    let mut probs = [0.0; 32];
    for x in 0..2 {
        let state = frame.post_measurement(&bs.psi, x, bs.dynamics);
        for (w, op) in bs.ops.iter().enumerate() {
            let evolved = frame.apply_op(&state, op)?;
            let sectors = frame.sector_operators(&evolved);
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        probs[table_index(w, x, y, a, b)] =
                            trace_product(bs.bob[y].projector(b), &sectors[x][a]);
                    }
                }
            }
        }
    }
    Ok(JointTable { probs })
}

/// Largest violation of the no-signalling conditions: Alice's marginal must
/// not depend on `y`; Bob's marginal must depend on neither `x` nor `w`.
pub fn signalling_defect(t: &JointTable) -> f64 {
    let mut worst: f64 = 0.0;
    for w in 0..2 {
        for x in 0..2 {
            for a in 0..2 {
                worst =
                    worst.max((t.alice_marginal(w, x, 0, a) - t.alice_marginal(w, x, 1, a)).abs());
            }
        }
    }
    for y in 0..2 {
        for b in 0..2 {
            let reference = t.bob_marginal(0, 0, y, b);
            for w in 0..2 {
                for x in 0..2 {
                    worst = worst.max((t.bob_marginal(w, x, y, b) - reference).abs());
                }
            }
        }
    }
    worst
}

pub fn check_no_signalling(t: &JointTable) -> bool {
    signalling_defect(t) <= EPS_PROB
}

/// `c_{abxy}`
pub fn chsh_coefficient(a: usize, b: usize, x: usize, y: usize) -> f64 {
    if a ^ b == x & y {
        0.25
    } else {
        0.0
    }
}

/// `P_w = Σ c_{abxy} p(a,b|x,y,U_w)`
pub fn chsh_value(t: &JointTable, w: usize) -> f64 {
    relabeled_chsh(t, w, [0, 0])
}

/// CHSH with Alice's output flipped for input `x` whenever `flips[x] = 1`:
/// success iff `a ⊕ b = x·y ⊕ flips[x]`.
pub fn relabeled_chsh(t: &JointTable, w: usize, flips: [usize; 2]) -> f64 {
    let mut s = 0.0;
    for (x, &flip) in flips.iter().enumerate() {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    s += chsh_coefficient(a ^ flip, b, x, y) * t.p(w, x, y, a, b);
                }
            }
        }
    }
    s
}

/// AoM upper bound on `P_1` given `P_0`.
pub fn p1_aom_bound(p0: f64) -> f64 {
    TSIRELSON.min(p0.max(1.5 - p0))
}

pub fn ps_value(p0: f64, p1: f64) -> f64 {
    p1 - (p0 - 0.75).abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub p0: f64,
    pub p1: f64,
    pub ps: f64,
    /// AoM bound on `P_1` at this `P_0`.
    pub p1_bound: f64,
    pub p1_violated: bool,
    /// `P_S` against its AoM bound ¾.
    pub witness: WitnessReport,
}

pub fn eval_p0_p1_ps(t: &JointTable) -> ChshReport {
    let p0 = chsh_value(t, 0);
    let p1 = chsh_value(t, 1);
    let ps = ps_value(p0, p1);
    let p1_bound = p1_aom_bound(p0);
    ChshReport {
        p0,
        p1,
        ps,
        p1_bound,
        p1_violated: p1 > p1_bound + EPS_PROB,
        witness: WitnessReport::new("PS", ps, PS_BOUND, t.digest()),
    }
}

/// Evaluates `P_0, P_1, P_S` on the scenario's table, with the scenario's
/// digest in the report.
pub fn eval_scenario(bs: &BipartiteScenario) -> Result<ChshReport> {
    let mut r = eval_p0_p1_ps(&joint_table(bs)?);
    r.witness.inputs_digest = bipartite_digest(bs);
    Ok(r)
}

/// Real rotation `[[cos θ, −sin θ], [sin θ, cos θ]]` in the `{|F_0⟩, |F_1⟩}`
/// block.
pub fn rotation_block(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]]).expect("2x2")
}

/// NoM strategy reaching `P_S = (1 + 1/√2)/2`.
///
/// Shared state `(|00⟩ + |11⟩)/√2`. Alice's Friend measures `σ_z` for
/// `x = 0` and `σ_x` for `x = 1` (basis `|+⟩, −|−⟩`). Bob measures `σ_z` for
/// `y = 0` and `σ_x` for `y = 1` with `b = 0 ↔ |−⟩`. Wigner's `U` rotates
/// both Lab blocks by `π/8`.
pub fn nom_violating_strategy() -> BipartiteScenario {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = ComplexVector::from_real(&[h, 0.0, 0.0, h]).expect("dim 4");
    let sigma_x = FriendMeasurement::new(vec![
        ComplexVector::from_real(&[h, h]).expect("dim 2"),
        ComplexVector::from_real(&[-h, h]).expect("dim 2"),
    ])
    .expect("orthonormal");
    let bob = vec![
        BobMeasurement::rank_one(&ComplexVector::basis(2, 0)).expect("unit vector"),
        BobMeasurement::rank_one(&ComplexVector::from_real(&[h, -h]).expect("dim 2"))
            .expect("unit vector"),
    ];
    let r = rotation_block(std::f64::consts::PI / 8.0);
    BipartiteScenario::new(
        psi,
        vec![FriendMeasurement::computational(2), sigma_x],
        bob,
        vec![
            SuperObserverOp::Identity,
            SuperObserverOp::BlockUnitary {
                blocks: vec![r.clone(), r],
            },
        ],
        Dynamics::NoM,
    )
    .expect("valid construction")
}

/// Outcome of the extremal-point enumeration on an AoM table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalReport {
    pub p0: f64,
    pub p1: f64,
    /// Relabeled CHSH values on the `w = 0` table for flips
    /// `(0,0), (1,1), (0,1), (1,0)`.
    pub expressions: [f64; 4],
    pub p1_below_max: bool,
    pub complement_identity: bool,
    pub mixed_relabelings_bounded: bool,
    pub tsirelson_respected: bool,
    pub passed: bool,
}

pub const RELABELINGS: [[usize; 2]; 4] = [[0, 0], [1, 1], [0, 1], [1, 0]];

/// Checks the AoM bound on `P_1` through the four extremal points of the
/// block-unitary parameters: each point turns `P_1` into a CHSH expression
/// with Alice's outputs relabeled per input, so `P_1` is at most their
/// maximum. Expression 2 equals `1 − P_0`, expressions 3–4 are at most
/// `3/2 − P_0`, and all respect Tsirelson's bound.
pub fn extremal_bound_check(bs: &BipartiteScenario) -> Result<ExtremalReport> {
    if bs.dynamics != Dynamics::AoM {
        return Err(Error::NotApplicable(
            "the extremal-point bound is an AoM statement".into(),
        ));
    }
    Ok(extremal_report(&joint_table(bs)?))
}

pub fn extremal_report(t: &JointTable) -> ExtremalReport {
    let p0 = chsh_value(t, 0);
    let p1 = chsh_value(t, 1);
    let expressions = RELABELINGS.map(|f| relabeled_chsh(t, 0, f));
    let max = expressions
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let p1_below_max = p1 <= max + EPS_PROB;
    let complement_identity = (expressions[1] - (1.0 - p0)).abs() <= EPS_PROB;
    let mixed_relabelings_bounded = expressions[2..].iter().all(|&e| e <= 1.5 - p0 + EPS_PROB);
    let tsirelson_respected = expressions.iter().all(|&e| e <= TSIRELSON + EPS_PROB);
    ExtremalReport {
        p0,
        p1,
        expressions,
        p1_below_max,
        complement_identity,
        mixed_relabelings_bounded,
        tsirelson_respected,
        passed: p1_below_max
            && complement_identity
            && mixed_relabelings_bounded
            && tsirelson_respected,
    }
}

/// Largest deviation from
/// `p(a,b|x,y,U) = |U^x[a][a]|² p(a,b|x,y,1) + |U^x[a][a⊕1]|² p(a⊕1,b|x,y,1)`
/// together with the column normalization of each block. Only meaningful for
/// AoM tables with a block-unitary `U`.
pub fn alpha_decomposition_defect(bs: &BipartiteScenario, t: &JointTable) -> Result<f64> {
    let SuperObserverOp::BlockUnitary { blocks } = &bs.ops[1] else {
        return Err(Error::NotApplicable(
            "decomposition needs a block-unitary U".into(),
        ));
    };
    let mut worst: f64 = 0.0;
    for (x, u) in blocks.iter().enumerate() {
        for col in 0..2 {
            let norm = u[(0, col)].norm_sqr() + u[(1, col)].norm_sqr();
            worst = worst.max((norm - 1.0).abs());
        }
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let predicted = u[(a, a)].norm_sqr() * t.p(0, x, y, a, b)
                        + u[(a, a ^ 1)].norm_sqr() * t.p(0, x, y, a ^ 1, b);
                    worst = worst.max((predicted - t.p(1, x, y, a, b)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Random bipartite scenario: Haar state on `Q_A ⊗ Q_B`, Haar bases for
/// Alice, Bob projectors of random rank in a Haar basis, and Haar blocks.
pub fn random_bipartite<R: Rng + ?Sized>(
    d_b: usize,
    dynamics: Dynamics,
    rng: &mut R,
) -> BipartiteScenario {
    let psi = random_state(2 * d_b, rng);
    let alice = (0..2)
        .map(|_| FriendMeasurement::from_unitary(&random_unitary(2, rng)).expect("unitary"))
        .collect();
    let bob = (0..2).map(|_| random_bob(d_b, rng)).collect();
    let op = SuperObserverOp::BlockUnitary {
        blocks: vec![random_unitary(2, rng), random_unitary(2, rng)],
    };
    BipartiteScenario::new(
        psi,
        alice,
        bob,
        vec![SuperObserverOp::Identity, op],
        dynamics,
    )
    .expect("valid by construction")
}

fn random_bob<R: Rng + ?Sized>(d_b: usize, rng: &mut R) -> BobMeasurement {
    let v = random_unitary(d_b, rng);
    let rank = rng.random_range(0..=d_b);
    let mut p0 = ComplexMatrix::zeros(d_b, d_b);
    for k in 0..rank {
        let col = v.column(k);
        p0 = p0.add(&ComplexMatrix::outer(&col, &col));
    }
    BobMeasurement::new(p0).expect("projector by construction")
}

/// Kraus operators `√p_k U_k` with each `U_k` a random block unitary on
/// Alice's Lab: a unital channel that never leaves the `|F^x_i⟩` sectors.
pub fn random_block_mixture<R: Rng + ?Sized>(
    bs: &BipartiteScenario,
    count: usize,
    rng: &mut R,
) -> Vec<ComplexMatrix> {
    random_simplex_weights(count, rng)
        .into_iter()
        .map(|p| {
            let blocks = vec![random_unitary(2, rng), random_unitary(2, rng)];
            assemble_block_unitary(&blocks, &bs.alice, &bs.encoding)
                .expect("valid blocks")
                .scale(C64::new(p.sqrt(), 0.0))
        })
        .collect()
}

/// Deterministic local strategy: Alice outputs `alice[x]`, Bob `bob[y]`, and
/// under `U` Alice's output for input `x` is flipped when `flips[x] = 1`
/// (a block permutation, the only deterministic AoM-compatible operation).
pub fn deterministic_table(alice: [usize; 2], bob: [usize; 2], flips: [usize; 2]) -> JointTable {
    JointTable::from_fn(|w, x, y, a, b| {
        let a_out = if w == 1 {
            alice[x] ^ flips[x]
        } else {
            alice[x]
        };
        if a == a_out && b == bob[y] {
            1.0
        } else {
            0.0
        }
    })
}

fn deterministic_points() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(64);
    for k in 0..64usize {
        let alice = [k & 1, (k >> 1) & 1];
        let bob = [(k >> 2) & 1, (k >> 3) & 1];
        let flips = [(k >> 4) & 1, (k >> 5) & 1];
        let t = deterministic_table(alice, bob, flips);
        out.push((chsh_value(&t, 0), chsh_value(&t, 1)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    #[serde(rename = "P0")]
    pub p0: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    pub mode: String,
    pub seed: u64,
}

impl RegionPoint {
    fn new(p0: f64, p1: f64, mode: &str, seed: u64) -> Self {
        Self {
            p0,
            p1,
            mode: mode.into(),
            seed,
        }
    }
}

/// Point cloud for the `(P_0, P_1)` plane.
///
/// Rows by `mode`:
/// - `aom`, `nom`: `resolution²` random scenarios each (sample `k` drawn from
///   stream `k` of `seed`), plus the violating strategy in both dynamics;
/// - `classical`: the 64 deterministic strategies and `resolution²` random
///   mixtures of them;
/// - `line_p1_eq_p0`, `line_p1_eq_1.5_minus_p0`, `line_tsirelson`: the three
///   analytic lines at `resolution` points;
/// - `boundary`: the AoM frontier `P_1 = min{T, max{P_0, 3/2 − P_0}}` with
///   its corners.
///
/// The `seed` column holds the per-sample stream index for random rows and
/// the sweep seed otherwise.
pub fn feasible_region_sweep(resolution: usize, seed: u64) -> Result<Vec<RegionPoint>> {
    if resolution < 2 {
        return Err(Error::InvalidScenario("resolution must be >= 2".into()));
    }
    let samples = resolution * resolution;
    let mut out = Vec::new();

    for (mode, dynamics, offset) in [
        ("aom", Dynamics::AoM, 0u64),
        ("nom", Dynamics::NoM, 1u64 << 32),
    ] {
        let strategy = nom_violating_strategy().with_dynamics(dynamics);
        let r = eval_scenario(&strategy)?;
        out.push(RegionPoint::new(r.p0, r.p1, mode, seed));
        let points: Vec<RegionPoint> = (0..samples as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(seed, offset + k);
                let bs = random_bipartite(2, dynamics, &mut rng);
                let t = joint_table(&bs).expect("valid scenario");
                RegionPoint::new(chsh_value(&t, 0), chsh_value(&t, 1), mode, offset + k)
            })
            .collect();
        out.extend(points);
    }

    let det = deterministic_points();
    out.extend(
        det.iter()
            .map(|&(p0, p1)| RegionPoint::new(p0, p1, "classical", seed)),
    );
    let mixtures: Vec<RegionPoint> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let stream = (2u64 << 32) + k;
            let mut rng = stream_rng(seed, stream);
            let support = rng.random_range(1..=4usize);
            let weights = random_simplex_weights(support, &mut rng);
            let (mut p0, mut p1) = (0.0, 0.0);
            for w in weights {
                let (a, b) = det[rng.random_range(0..det.len())];
                p0 += w * a;
                p1 += w * b;
            }
            RegionPoint::new(p0, p1, "classical", stream)
        })
        .collect();
    out.extend(mixtures);

    for i in 0..resolution {
        let t = i as f64 / (resolution - 1) as f64;
        out.push(RegionPoint::new(t, t, "line_p1_eq_p0", seed));
    }
    for i in 0..resolution {
        let t = 0.5 + 0.5 * i as f64 / (resolution - 1) as f64;
        out.push(RegionPoint::new(
            t,
            1.5 - t,
            "line_p1_eq_1.5_minus_p0",
            seed,
        ));
    }
    for i in 0..resolution {
        let t = i as f64 / (resolution - 1) as f64;
        out.push(RegionPoint::new(t, TSIRELSON, "line_tsirelson", seed));
    }

    let lo = 1.0 - TSIRELSON;
    let mut frontier: Vec<f64> = (0..resolution)
        .map(|i| lo + (TSIRELSON - lo) * i as f64 / (resolution - 1) as f64)
        .collect();
    frontier.extend([1.5 - TSIRELSON, 0.75]);
    frontier.sort_by(f64::total_cmp);
    frontier.dedup();
    out.extend(
        frontier
            .into_iter()
            .map(|p0| RegionPoint::new(p0, p1_aom_bound(p0), "boundary", seed)),
    );
    Ok(out)
}

/// Marginal state of Bob, `Tr_A |ψ⟩⟨ψ|`.
pub fn bob_reduced_state(bs: &BipartiteScenario) -> ComplexMatrix {
    let d_b = bs.d_b;
    ComplexMatrix::from_fn(d_b, d_b, |i, j| {
        (0..2)
            .map(|q| bs.psi[q * d_b + i] * bs.psi[q * d_b + j].conj())
            .fold(ZERO, |acc, v| acc + v)
    })
}

/// Product of independent local statistics, used to cross-check product
/// inputs: `p(a|x) p(b|y)`.
pub fn product_prediction(
    alice_state: &ComplexVector,
    bob_state: &ComplexVector,
    bs: &BipartiteScenario,
    x: usize,
    y: usize,
    a: usize,
    b: usize,
) -> f64 {
    let pa = bs.alice[x].vector(a).inner(alice_state).norm_sqr();
    let rho_b = ComplexMatrix::outer(bob_state, bob_state);
    pa * trace_product(bs.bob[y].projector(b), &rho_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_mixed_unitary_channel;
    use crate::qlinalg::tensor;
    use std::f64::consts::PI;

    #[test]
    fn violating_strategy_reaches_tsirelson() {
        let bs = nom_violating_strategy();
        let t = joint_table(&bs).unwrap();
        assert!(check_no_signalling(&t));
        assert!(t.normalization_defect() < 1e-12);
        let r = eval_p0_p1_ps(&t);
        assert!((r.p0 - 0.75).abs() < 1e-12, "P0 = {}", r.p0);
        assert!(
            (r.p1 - (PI / 8.0).cos().powi(2)).abs() < 1e-12,
            "P1 = {}",
            r.p1
        );
        assert!((r.ps - (1.0 + 1.0 / 2f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(r.witness.violated);
        assert!(r.p1_violated);
    }

    #[test]
    fn violating_strategy_identity_slices() {
        let t = joint_table(&nom_violating_strategy()).unwrap();
        // (0,0): perfectly correlated
        assert!((t.p(0, 0, 0, 0, 0) - 0.5).abs() < 1e-12);
        assert!((t.p(0, 0, 0, 1, 1) - 0.5).abs() < 1e-12);
        // x != y: uniform
        for (x, y) in [(0, 1), (1, 0)] {
            for a in 0..2 {
                for b in 0..2 {
                    assert!((t.p(0, x, y, a, b) - 0.25).abs() < 1e-12);
                }
            }
        }
        // (1,1): anti-correlated with Bob's relabeled outcomes
        assert!((t.p(0, 1, 1, 0, 1) - 0.5).abs() < 1e-12);
        assert!((t.p(0, 1, 1, 1, 0) - 0.5).abs() < 1e-12);
        // (0,0) under U
        let s = t.p(1, 0, 0, 0, 0) + t.p(1, 0, 0, 1, 1);
        assert!((s - (PI / 8.0).cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn violating_strategy_under_aom_respects_bounds() {
        let bs = nom_violating_strategy().with_dynamics(Dynamics::AoM);
        let r = eval_scenario(&bs).unwrap();
        assert!(r.ps <= 0.75 + 1e-12);
        assert!(!r.witness.violated);
        let e = extremal_bound_check(&bs).unwrap();
        assert!(e.passed, "{e:?}");
    }

    #[test]
    fn product_state_gives_deterministic_outcome() {
        let psi = tensor(&ComplexVector::basis(2, 0), &ComplexVector::basis(2, 0));
        let z = FriendMeasurement::computational(2);
        let bz = BobMeasurement::rank_one(&ComplexVector::basis(2, 0)).unwrap();
        let bs = BipartiteScenario::new(
            psi,
            vec![z.clone(), z],
            vec![bz.clone(), bz],
            vec![SuperObserverOp::Identity, SuperObserverOp::Identity],
            Dynamics::AoM,
        )
        .unwrap();
        let t = joint_table(&bs).unwrap();
        assert!((t.p(0, 0, 0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_u_gives_p1_equal_p0() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let bs = random_bipartite(2, Dynamics::NoM, &mut rng)
                .with_op(SuperObserverOp::Identity)
                .unwrap();
            let r = eval_scenario(&bs).unwrap();
            assert!((r.p0 - r.p1).abs() < 1e-12);
            assert!(r.ps <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn classical_all_zero_strategy() {
        let t = deterministic_table([0, 0], [0, 0], [0, 0]);
        let r = eval_p0_p1_ps(&t);
        assert_eq!((r.p0, r.p1, r.ps), (0.75, 0.75, 0.75));
        assert!(check_no_signalling(&t));
    }

    #[test]
    fn signalling_table_is_detected() {
        // Alice's output copies Bob's setting
        let t = JointTable::from_fn(|_, _, y, a, b| if a == y && b == 0 { 1.0 } else { 0.0 });
        assert!(!check_no_signalling(&t));
        // Bob's marginal depending on w
        let t = JointTable::from_fn(|w, _, _, a, b| if a == 0 && b == w { 1.0 } else { 0.0 });
        assert!(!check_no_signalling(&t));
    }

    #[test]
    fn relabeled_complement_identity() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..50 {
            let t = joint_table(&random_bipartite(2, Dynamics::NoM, &mut rng)).unwrap();
            for w in 0..2 {
                let p = relabeled_chsh(&t, w, [0, 0]);
                let q = relabeled_chsh(&t, w, [1, 1]);
                assert!((p + q - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_tables_are_valid_and_no_signalling() {
        let mut rng = stream_rng(3, 0);
        for d_b in 1..=4 {
            for dynamics in [Dynamics::AoM, Dynamics::NoM] {
                for _ in 0..25 {
                    let t = joint_table(&random_bipartite(d_b, dynamics, &mut rng)).unwrap();
                    assert!(t.normalization_defect() < 1e-12);
                    assert!(check_no_signalling(&t));
                }
            }
        }
    }

    #[test]
    fn aom_bounds_and_extremal_check_on_random_scenarios() {
        let mut rng = stream_rng(4, 0);
        for _ in 0..300 {
            let bs = random_bipartite(2, Dynamics::AoM, &mut rng);
            let t = joint_table(&bs).unwrap();
            let r = eval_p0_p1_ps(&t);
            assert!(r.ps <= 0.75 + 1e-9);
            assert!(r.p1 <= p1_aom_bound(r.p0) + 1e-9);
            assert!(extremal_report(&t).passed);
            assert!(alpha_decomposition_defect(&bs, &t).unwrap() < 1e-12);
        }
    }

    #[test]
    fn identity_slices_match_between_dynamics() {
        let mut rng = stream_rng(5, 0);
        for _ in 0..30 {
            let bs = random_bipartite(3, Dynamics::AoM, &mut rng);
            let a = joint_table(&bs).unwrap();
            let n = joint_table(&bs.with_dynamics(Dynamics::NoM)).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    for aa in 0..2 {
                        for b in 0..2 {
                            assert!((a.p(0, x, y, aa, b) - n.p(0, x, y, aa, b)).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mixtures_of_block_unitaries_keep_bounds() {
        let mut rng = stream_rng(6, 0);
        for _ in 0..50 {
            let bs = random_bipartite(2, Dynamics::AoM, &mut rng);
            let k = random_block_mixture(&bs, 3, &mut rng);
            let bs = bs
                .with_op(SuperObserverOp::unital_channel(k).unwrap())
                .unwrap();
            let t = joint_table(&bs).unwrap();
            assert!(t.normalization_defect() < 1e-9);
            assert!(check_no_signalling(&t));
            let r = eval_p0_p1_ps(&t);
            assert!(r.ps <= 0.75 + 1e-9);
            assert!(extremal_report(&t).passed);
        }
    }

    #[test]
    fn leaking_channels_lose_mass_to_other_outcomes() {
        let mut rng = stream_rng(13, 0);
        let dim = LabEncoding::new(2, 2).system_dim();
        let bs = random_bipartite(2, Dynamics::AoM, &mut rng);
        let k = random_mixed_unitary_channel(dim, 3, &mut rng);
        let bs = bs
            .with_op(SuperObserverOp::unital_channel(k).unwrap())
            .unwrap();
        let t = joint_table(&bs).unwrap();
        // w = 0 slices stay normalized; w = 1 slices only see sector x
        for x in 0..2 {
            for y in 0..2 {
                let s0: f64 = (0..4).map(|k| t.p(0, x, y, k >> 1, k & 1)).sum();
                let s1: f64 = (0..4).map(|k| t.p(1, x, y, k >> 1, k & 1)).sum();
                assert!((s0 - 1.0).abs() < 1e-12);
                assert!(s1 < 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn region_sweep_contents() {
        let pts = feasible_region_sweep(4, 7).unwrap();
        assert!(pts.iter().any(|p| p.mode == "nom"
            && (p.p0 - 0.75).abs() < 1e-9
            && (p.p1 - TSIRELSON).abs() < 1e-9));
        assert!(pts
            .iter()
            .filter(|p| p.mode == "aom")
            .all(|p| p.p1 <= p0_max(p.p0) + 1e-9));
        assert!(pts.iter().any(|p| p.mode == "boundary"
            && (p.p0 - TSIRELSON).abs() < 1e-12
            && (p.p1 - TSIRELSON).abs() < 1e-12));
        assert!(pts
            .iter()
            .any(|p| p.mode == "classical" && p.p0 == 0.75 && p.p1 == 0.75));
        assert!(feasible_region_sweep(1, 7).is_err());
        assert_eq!(pts, feasible_region_sweep(4, 7).unwrap());
    }

    fn p0_max(p0: f64) -> f64 {
        p0.max(1.5 - p0)
    }

    #[test]
    fn classical_points_respect_aom_frontier() {
        for (p0, p1) in deterministic_points() {
            assert!(p1 <= p1_aom_bound(p0) + 1e-12);
            assert!(ps_value(p0, p1) <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn table_json_round_trip() {
        let t = joint_table(&nom_violating_strategy()).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<JointTable>(&text).unwrap(), t);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["entries"].as_array().unwrap().len(), 32);
    }

    #[test]
    fn bob_projector_validation() {
        let not_proj = ComplexMatrix::from_real_rows(&[&[0.5, 0.0], &[0.0, 0.5]]).unwrap();
        assert!(matches!(
            BobMeasurement::new(not_proj),
            Err(Error::NotProjective(_))
        ));
    }

    #[test]
    fn product_inputs_factorize() {
        let mut rng = stream_rng(8, 0);
        let a = random_state(2, &mut rng);
        let b = random_state(2, &mut rng);
        let bs = random_bipartite(2, Dynamics::NoM, &mut rng);
        let bs = BipartiteScenario::new(
            tensor(&a, &b),
            bs.alice().to_vec(),
            bs.bob().to_vec(),
            bs.ops().to_vec(),
            Dynamics::NoM,
        )
        .unwrap();
        let t = joint_table(&bs).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for aa in 0..2 {
                    for bb in 0..2 {
                        let expected = product_prediction(&a, &b, &bs, x, y, aa, bb);
                        assert!((t.p(0, x, y, aa, bb) - expected).abs() < 1e-12);
                    }
                }
            }
        }
        let rho = bob_reduced_state(&bs);
        assert!(rho.max_abs_diff(&ComplexMatrix::outer(&b, &b)) < 1e-12);
    }
}
