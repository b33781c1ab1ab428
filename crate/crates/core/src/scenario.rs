//! The extended Wigner's Friend scenario.
//!
//! A run: Friend receives input `x` and measures `Q_s` in the basis
//! `{|ψ^x_i⟩}`, recording outcome `i` in the Lab pointer state `|f^x_i⟩`. The
//! super-observer then applies operation `w` to `Q_s ⊗ Lab` and finally
//! measures `Ω = {P^x_i, 1 − Σ P^x_i}` with `P^x_i = |F^x_i⟩⟨F^x_i|`,
//! `|F^x_i⟩ = |ψ^x_i⟩|f^x_i⟩`.
//!
//! Under AoM the Lab after Friend's measurement is the mixture
//! `Σ |α^x_i|² |F^x_i⟩⟨F^x_i|`; under NoM it is the pure state
//! `Σ α^x_i |F^x_i⟩`, with `α^x_i = ⟨ψ^x_i|ψ⟩`.
//!
//! Layout of the combined space: `Q_s ⊗ Lab ⊗ Env`, where `Env` is a
//! spectator factor (Bob's system in the two-party setting, trivial here).
//! The Lab has `d·n + 1 (+ padding)` levels: `|f^x_i⟩` sits at `x·d + i`,
//! index `d·n` is the junk level.

use serde::{Deserialize, Serialize};

use crate::channel::check_unital;
use crate::error::{Error, Result};
use crate::qlinalg::{
    tensor, unitary_mapping, ComplexMatrix, ComplexVector, C64, EPS_NORM, EPS_PROB, EPS_UNITARY,
    ONE, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dynamics {
    /// Absoluteness of measurement: Friend's measurement collapses the Lab
    /// for every observer.
    AoM,
    /// Non-absoluteness: the super-observer evolves the Lab unitarily.
    NoM,
}

impl Dynamics {
    pub fn label(self) -> &'static str {
        match self {
            Dynamics::AoM => "aom",
            Dynamics::NoM => "nom",
        }
    }
}

impl std::str::FromStr for Dynamics {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aom" => Ok(Dynamics::AoM),
            "nom" => Ok(Dynamics::NoM),
            other => Err(Error::InvalidScenario(format!(
                "unknown dynamics {other:?} (expected AoM or NoM)"
            ))),
        }
    }
}

/// Friend's rank-one projective measurement for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct FriendMeasurement {
    basis: Vec<ComplexVector>,
}

impl FriendMeasurement {
    pub fn new(basis: Vec<ComplexVector>) -> Result<Self> {
        let d = basis.len();
        if d == 0 {
            return Err(Error::InvalidDimension(
                "measurement needs >= 1 outcome".into(),
            ));
        }
        for v in &basis {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: v.dim(),
                });
            }
        }
        for (i, u) in basis.iter().enumerate() {
            for (j, v) in basis.iter().enumerate().skip(i) {
                let target = if i == j { ONE } else { ZERO };
                let dev = (u.inner(v) - target).norm();
                if dev > EPS_UNITARY {
                    return Err(Error::NotOrthonormal(format!(
                        "<psi_{i}|psi_{j}> deviates by {dev:e}"
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    /// Measurement in the canonical basis.
    pub fn computational(d: usize) -> Self {
        Self {
            basis: (0..d).map(|i| ComplexVector::basis(d, i)).collect(),
        }
    }

    /// Basis given by the columns of a unitary.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_unitary(EPS_UNITARY) {
            return Err(Error::NotUnitary("measurement basis matrix".into()));
        }
        Self::new((0..u.cols()).map(|j| u.column(j)).collect())
    }

    /// σ_x eigenbasis `{|+⟩, |−⟩}`.
    pub fn sigma_x() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            basis: vec![
                ComplexVector::from_real(&[h, h]).expect("dim 2"),
                ComplexVector::from_real(&[h, -h]).expect("dim 2"),
            ],
        }
    }

    pub fn d(&self) -> usize {
        self.basis.len()
    }

    pub fn vector(&self, i: usize) -> &ComplexVector {
        &self.basis[i]
    }

    pub fn basis(&self) -> &[ComplexVector] {
        &self.basis
    }

    /// Matrix with the basis vectors as columns.
    pub fn as_unitary(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.basis).expect("square")
    }

    /// `α_i = ⟨ψ_i|ψ⟩`
    pub fn amplitudes(&self, psi: &ComplexVector) -> Vec<C64> {
        self.basis.iter().map(|b| b.inner(psi)).collect()
    }
}

/// Lab register layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabEncoding {
    pub d: usize,
    pub n: usize,
    /// Extra junk levels beyond the single ∅ level.
    pub padding: usize,
}

impl LabEncoding {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n, padding: 0 }
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn lab_dim(&self) -> usize {
        self.d * self.n + 1 + self.padding
    }

    /// Dimension of `Q_s ⊗ Lab`.
    pub fn system_dim(&self) -> usize {
        self.d * self.lab_dim()
    }

    pub fn f_index(&self, x: usize, i: usize) -> usize {
        x * self.d + i
    }

    pub fn junk_index(&self) -> usize {
        self.d * self.n
    }

    /// `|f^x_i⟩`
    pub fn lab_vector(&self, x: usize, i: usize) -> ComplexVector {
        ComplexVector::basis(self.lab_dim(), self.f_index(x, i))
    }

    fn check(&self, x: usize, i: usize) -> Result<()> {
        if x >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "x",
                index: x,
                limit: self.n,
            });
        }
        if i >= self.d {
            return Err(Error::IndexOutOfRange {
                what: "i",
                index: i,
                limit: self.d,
            });
        }
        Ok(())
    }
}

/// `|F^x_i⟩ = |ψ^x_i⟩ ⊗ |f^x_i⟩`
pub fn embed_f(
    x: usize,
    i: usize,
    meas: &FriendMeasurement,
    enc: &LabEncoding,
) -> Result<ComplexVector> {
    enc.check(x, i)?;
    if meas.d() != enc.d {
        return Err(Error::DimensionMismatch {
            expected: enc.d,
            actual: meas.d(),
        });
    }
    Ok(tensor(meas.vector(i), &enc.lab_vector(x, i)))
}

/// Operation applied by the super-observer at step `w`.
#[derive(Clone, Debug, PartialEq)]
pub enum SuperObserverOp {
    Identity,
    /// `U_w = ⊕_x U^x_w`. Block `x` is a `d×d` unitary written in the basis
    /// `{|F^x_i⟩}`: `U|F^x_i⟩ = Σ_a blocks[x][(a, i)] |F^x_a⟩`. Identity on
    /// the orthogonal complement of all `|F^x_i⟩`.
    BlockUnitary {
        blocks: Vec<ComplexMatrix>,
    },
    /// Unital channel on `Q_s ⊗ Lab`, Kraus operators of size `system_dim`.
    UnitalChannel {
        kraus: Vec<ComplexMatrix>,
    },
}

impl SuperObserverOp {
    pub fn block_unitary(blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidScenario(
                "block unitary with no blocks".into(),
            ));
        }
        for (x, b) in blocks.iter().enumerate() {
            if !b.is_unitary(EPS_UNITARY) {
                return Err(Error::NotUnitary(format!("block {x} of U_w")));
            }
        }
        Ok(Self::BlockUnitary { blocks })
    }

    pub fn unital_channel(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        check_unital(&kraus, EPS_UNITARY)?;
        Ok(Self::UnitalChannel { kraus })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::BlockUnitary { .. } => "block_unitary",
            Self::UnitalChannel { .. } => "unital_channel",
        }
    }

    pub(crate) fn validate(&self, enc: &LabEncoding) -> Result<()> {
        match self {
            Self::Identity => Ok(()),
            Self::BlockUnitary { blocks } => {
                if blocks.len() != enc.n {
                    return Err(Error::InvalidScenario(format!(
                        "block unitary has {} blocks, expected n = {}",
                        blocks.len(),
                        enc.n
                    )));
                }
                for (x, b) in blocks.iter().enumerate() {
                    if b.rows() != enc.d || b.cols() != enc.d {
                        return Err(Error::DimensionMismatch {
                            expected: enc.d,
                            actual: b.rows().max(b.cols()),
                        });
                    }
                    if !b.is_unitary(EPS_UNITARY) {
                        return Err(Error::NotUnitary(format!("block {x} of U_w")));
                    }
                }
                Ok(())
            }
            Self::UnitalChannel { kraus } => {
                let dim = enc.system_dim();
                if let Some(k) = kraus.iter().find(|k| k.rows() != dim || k.cols() != dim) {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: k.rows().max(k.cols()),
                    });
                }
                check_unital(kraus, EPS_UNITARY)
            }
        }
    }
}

/// Full description of a single-party experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    psi: ComplexVector,
    measurements: Vec<FriendMeasurement>,
    ops: Vec<SuperObserverOp>,
    dynamics: Dynamics,
    encoding: LabEncoding,
}

impl Scenario {
    pub fn new(
        psi: ComplexVector,
        measurements: Vec<FriendMeasurement>,
        ops: Vec<SuperObserverOp>,
        dynamics: Dynamics,
    ) -> Result<Self> {
        Self::new_padded(psi, measurements, ops, dynamics, 0)
    }

    /// Like [`Scenario::new`] with `padding` extra junk Lab levels; channel
    /// Kraus operators must be sized for the padded space.
    pub fn new_padded(
        psi: ComplexVector,
        measurements: Vec<FriendMeasurement>,
        ops: Vec<SuperObserverOp>,
        dynamics: Dynamics,
        padding: usize,
    ) -> Result<Self> {
        let Some(first) = measurements.first() else {
            return Err(Error::InvalidScenario(
                "need at least one Friend measurement".into(),
            ));
        };
        let d = first.d();
        if let Some(m) = measurements.iter().find(|m| m.d() != d) {
            return Err(Error::InvalidScenario(format!(
                "Friend measurements disagree on d: {d} vs {}",
                m.d()
            )));
        }
        if psi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: psi.dim(),
            });
        }
        if !psi.is_normalized(EPS_NORM) {
            return Err(Error::NotNormalized(psi.norm_sqr()));
        }
        match ops.first() {
            None => return Err(Error::InvalidScenario("need at least one operation".into())),
            Some(SuperObserverOp::Identity) => {}
            Some(other) => {
                return Err(Error::InvalidScenario(format!(
                    "ops[0] must be identity, found {}",
                    other.kind()
                )))
            }
        }
        let encoding = LabEncoding::new(d, measurements.len()).with_padding(padding);
        for op in &ops {
            op.validate(&encoding)?;
        }
        Ok(Self {
            psi,
            measurements,
            ops,
            dynamics,
            encoding,
        })
    }

    /// Adds `padding` extra junk levels to the Lab. Channels must already be
    /// sized for the padded space, so this is only valid for block ops.
    pub fn with_padding(mut self, padding: usize) -> Result<Self> {
        self.encoding = self.encoding.with_padding(padding);
        for op in &self.ops {
            op.validate(&self.encoding)?;
        }
        Ok(self)
    }

    pub fn with_dynamics(&self, dynamics: Dynamics) -> Self {
        Self {
            dynamics,
            ..self.clone()
        }
    }

    pub fn with_ops(&self, ops: Vec<SuperObserverOp>) -> Result<Self> {
        Self::new_padded(
            self.psi.clone(),
            self.measurements.clone(),
            ops,
            self.dynamics,
            self.encoding.padding,
        )
    }

    pub fn d(&self) -> usize {
        self.encoding.d
    }

    pub fn n(&self) -> usize {
        self.encoding.n
    }

    pub fn m(&self) -> usize {
        self.ops.len()
    }

    pub fn psi(&self) -> &ComplexVector {
        &self.psi
    }

    pub fn measurements(&self) -> &[FriendMeasurement] {
        &self.measurements
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

    pub(crate) fn frame(&self) -> LabFrame<'_> {
        LabFrame::new(&self.encoding, &self.measurements, 1)
    }

    fn check_xw(&self, x: usize, w: usize) -> Result<()> {
        if x >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "x",
                index: x,
                limit: self.n(),
            });
        }
        if w >= self.m() {
            return Err(Error::IndexOutOfRange {
                what: "w",
                index: w,
                limit: self.m(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Repr {
    Pure(ComplexVector),
    /// `Σ w_k |v_k⟩⟨v_k|`, weights summing to the trace.
    Ensemble(Vec<(f64, ComplexVector)>),
    Density(ComplexMatrix),
}

/// State of `Q_s ⊗ Lab (⊗ Env)` after Friend's measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedState {
    pub(crate) repr: Repr,
    encoding: LabEncoding,
    env_dim: usize,
    /// Set once Friend has flipped the ancilla to record a definite outcome.
    pub ancilla_flag: bool,
}

impl CombinedState {
    pub fn kind(&self) -> StateKind {
        match self.repr {
            Repr::Pure(_) => StateKind::Pure,
            _ => StateKind::Mixed,
        }
    }

    pub fn encoding(&self) -> &LabEncoding {
        &self.encoding
    }

    pub fn dim(&self) -> usize {
        self.encoding.system_dim() * self.env_dim
    }

    pub fn pure_vector(&self) -> Option<&ComplexVector> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            _ => None,
        }
    }

    pub fn density_matrix(&self) -> ComplexMatrix {
        match &self.repr {
            Repr::Pure(v) => ComplexMatrix::outer(v, v),
            Repr::Ensemble(items) => {
                let dim = self.dim();
                let mut rho = ComplexMatrix::zeros(dim, dim);
                for (w, v) in items {
                    rho = rho.add(&ComplexMatrix::outer(v, v).scale(C64::new(*w, 0.0)));
                }
                rho
            }
            Repr::Density(rho) => rho.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_sqr(),
            Repr::Ensemble(items) => items.iter().map(|(w, v)| w * v.norm_sqr()).sum(),
            Repr::Density(rho) => rho.trace().re,
        }
    }

    /// Pure: normalized. Mixed: Hermitian, PSD, unit trace.
    pub fn check_invariants(&self) -> Result<()> {
        match &self.repr {
            Repr::Pure(v) => {
                if !v.is_normalized(EPS_NORM) {
                    return Err(Error::NotNormalized(v.norm_sqr()));
                }
            }
            _ => {
                let rho = self.density_matrix();
                if !rho.is_hermitian(EPS_UNITARY) {
                    return Err(Error::InvalidScenario(
                        "density matrix not Hermitian".into(),
                    ));
                }
                let min = rho.min_eigenvalue();
                if min < -EPS_UNITARY {
                    return Err(Error::InvalidScenario(format!(
                        "density matrix has eigenvalue {min:e}"
                    )));
                }
                if (rho.trace().re - 1.0).abs() > EPS_NORM {
                    return Err(Error::NotNormalized(rho.trace().re));
                }
            }
        }
        Ok(())
    }

    fn with_repr(&self, repr: Repr) -> Self {
        Self {
            repr,
            encoding: self.encoding,
            env_dim: self.env_dim,
            ancilla_flag: self.ancilla_flag,
        }
    }
}

/// Precomputed geometry of the `|F^x_i⟩` family inside `Q_s ⊗ Lab ⊗ Env`.
pub(crate) struct LabFrame<'a> {
    pub enc: &'a LabEncoding,
    pub meas: &'a [FriendMeasurement],
    pub env: usize,
}

impl<'a> LabFrame<'a> {
    pub fn new(enc: &'a LabEncoding, meas: &'a [FriendMeasurement], env: usize) -> Self {
        Self { enc, meas, env }
    }

    pub fn total_dim(&self) -> usize {
        self.enc.system_dim() * self.env
    }

    /// Flat index of `|q⟩|l⟩|e⟩`.
    fn idx(&self, q: usize, l: usize, e: usize) -> usize {
        (q * self.enc.lab_dim() + l) * self.env + e
    }

    /// `(⟨F^x_i| ⊗ 1_Env) v`
    pub fn component(&self, v: &ComplexVector, x: usize, i: usize) -> ComplexVector {
        let l = self.enc.f_index(x, i);
        let psi = self.meas[x].vector(i);
        let mut out = ComplexVector::zeros(self.env);
        for q in 0..self.enc.d {
            let c = psi[q].conj();
            if c == ZERO {
                continue;
            }
            for e in 0..self.env {
                out[e] += c * v[self.idx(q, l, e)];
            }
        }
        out
    }

    /// `v += |F^x_i⟩ ⊗ |env⟩`
    fn add_embedded(&self, v: &mut ComplexVector, x: usize, i: usize, env: &ComplexVector) {
        let l = self.enc.f_index(x, i);
        let psi = self.meas[x].vector(i);
        for q in 0..self.enc.d {
            for e in 0..self.env {
                v[self.idx(q, l, e)] += psi[q] * env[e];
            }
        }
    }

    /// `Σ_i |F^x_i⟩ ⊗ comps[i]`
    pub fn embed_components(&self, x: usize, comps: &[ComplexVector]) -> ComplexVector {
        let mut v = ComplexVector::zeros(self.total_dim());
        for (i, c) in comps.iter().enumerate() {
            self.add_embedded(&mut v, x, i, c);
        }
        v
    }

    /// `(U_w ⊗ 1_Env) v` for `U_w = ⊕_x U^x ⊕ 1`.
    pub fn apply_blocks(&self, blocks: &[ComplexMatrix], v: &ComplexVector) -> ComplexVector {
        let mut out = v.clone();
        let d = self.enc.d;
        for (x, u) in blocks.iter().enumerate() {
            let comps: Vec<ComplexVector> = (0..d).map(|i| self.component(v, x, i)).collect();
            for a in 0..d {
                let mut delta = ComplexVector::zeros(self.env);
                for (i, c) in comps.iter().enumerate() {
                    let coeff = if a == i { u[(a, i)] - ONE } else { u[(a, i)] };
                    if coeff != ZERO {
                        delta.axpy(coeff, c);
                    }
                }
                self.add_embedded(&mut out, x, a, &delta);
            }
        }
        out
    }

    /// Full `system_dim × system_dim` matrix of `⊕_x U^x ⊕ 1`.
    pub fn assemble_blocks(&self, blocks: &[ComplexMatrix]) -> ComplexMatrix {
        let frame = LabFrame::new(self.enc, self.meas, 1);
        let dim = self.enc.system_dim();
        let cols: Vec<ComplexVector> = (0..dim)
            .map(|j| frame.apply_blocks(blocks, &ComplexVector::basis(dim, j)))
            .collect();
        ComplexMatrix::from_columns(&cols).expect("square")
    }

    /// `K ⊗ 1_Env`
    pub fn lift(&self, k: &ComplexMatrix) -> ComplexMatrix {
        if self.env == 1 {
            k.clone()
        } else {
            tensor(k, &ComplexMatrix::identity(self.env))
        }
    }

    /// `(⟨F^x_i| ⊗ 1) ρ (|F^x_i⟩ ⊗ 1)`, an `env × env` matrix.
    pub fn reduced(&self, rho: &ComplexMatrix, x: usize, i: usize) -> ComplexMatrix {
        let l = self.enc.f_index(x, i);
        let psi = self.meas[x].vector(i);
        let d = self.enc.d;
        ComplexMatrix::from_fn(self.env, self.env, |e1, e2| {
            let mut s = ZERO;
            for q1 in 0..d {
                for q2 in 0..d {
                    s += psi[q1].conj() * rho[(self.idx(q1, l, e1), self.idx(q2, l, e2))] * psi[q2];
                }
            }
            s
        })
    }

    /// Post-measurement state for input `x` given the joint pre-measurement
    /// vector on `Q_s ⊗ Env`.
    pub fn post_measurement(
        &self,
        joint: &ComplexVector,
        x: usize,
        dynamics: Dynamics,
    ) -> CombinedState {
        let d = self.enc.d;
        let psi_x = &self.meas[x];
        // β_i = (⟨ψ^x_i| ⊗ 1) joint
        let betas: Vec<ComplexVector> = (0..d)
            .map(|i| {
                let b = psi_x.vector(i);
                let mut out = ComplexVector::zeros(self.env);
                for q in 0..d {
                    for e in 0..self.env {
                        out[e] += b[q].conj() * joint[q * self.env + e];
                    }
                }
                out
            })
            .collect();
        let repr = match dynamics {
            Dynamics::NoM => Repr::Pure(self.embed_components(x, &betas)),
            Dynamics::AoM => {
                let mut items = Vec::with_capacity(d);
                for (i, b) in betas.iter().enumerate() {
                    let w = b.norm_sqr();
                    if w == 0.0 {
                        continue;
                    }
                    let unit = b.scale(C64::new(1.0 / w.sqrt(), 0.0));
                    let mut comps = vec![ComplexVector::zeros(self.env); d];
                    comps[i] = unit;
                    items.push((w, self.embed_components(x, &comps)));
                }
                if items.len() == 1 {
                    Repr::Pure(items.pop().expect("one item").1)
                } else {
                    Repr::Ensemble(items)
                }
            }
        };
        CombinedState {
            repr,
            encoding: *self.enc,
            env_dim: self.env,
            ancilla_flag: true,
        }
    }

    pub fn apply_op(&self, s: &CombinedState, op: &SuperObserverOp) -> Result<CombinedState> {
        if s.dim() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                actual: s.dim(),
            });
        }
        op.validate(self.enc)?;
        Ok(match op {
            SuperObserverOp::Identity => s.clone(),
            SuperObserverOp::BlockUnitary { blocks } => match &s.repr {
                Repr::Pure(v) => s.with_repr(Repr::Pure(self.apply_blocks(blocks, v))),
                Repr::Ensemble(items) => s.with_repr(Repr::Ensemble(
                    items
                        .iter()
                        .map(|(w, v)| (*w, self.apply_blocks(blocks, v)))
                        .collect(),
                )),
                Repr::Density(rho) => {
                    let u = self.lift(&self.assemble_blocks(blocks));
                    s.with_repr(Repr::Density(u.conjugate(rho)))
                }
            },
            SuperObserverOp::UnitalChannel { kraus } => {
                let lifted: Vec<ComplexMatrix> = kraus.iter().map(|k| self.lift(k)).collect();
                // pure inputs are promoted to rank-one density matrices
                let rho = s.density_matrix();
                let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
                for k in &lifted {
                    out = out.add(&k.conjugate(&rho));
                }
                s.with_repr(Repr::Density(out))
            }
        })
    }

    /// `env × env` operator `(⟨F^x_a| ⊗ 1) ρ (|F^x_a⟩ ⊗ 1)` for every `(x, a)`.
    pub fn sector_operators(&self, s: &CombinedState) -> Vec<Vec<ComplexMatrix>> {
        let (d, n) = (self.enc.d, self.enc.n);
        match &s.repr {
            Repr::Pure(v) => (0..n)
                .map(|x| {
                    (0..d)
                        .map(|a| {
                            let c = self.component(v, x, a);
                            ComplexMatrix::outer(&c, &c)
                        })
                        .collect()
                })
                .collect(),
            Repr::Ensemble(items) => (0..n)
                .map(|x| {
                    (0..d)
                        .map(|a| {
                            let mut acc = ComplexMatrix::zeros(self.env, self.env);
                            for (w, v) in items {
                                let c = self.component(v, x, a);
                                acc =
                                    acc.add(&ComplexMatrix::outer(&c, &c).scale(C64::new(*w, 0.0)));
                            }
                            acc
                        })
                        .collect()
                })
                .collect(),
            Repr::Density(rho) => (0..n)
                .map(|x| (0..d).map(|a| self.reduced(rho, x, a)).collect())
                .collect(),
        }
    }

    /// Probabilities of every `Ω` outcome `(x, a)`.
    pub fn omega_probabilities(&self, s: &CombinedState) -> Vec<f64> {
        let (d, n) = (self.enc.d, self.enc.n);
        let mut probs = vec![0.0; d * n];
        match &s.repr {
            Repr::Pure(v) => {
                for x in 0..n {
                    for a in 0..d {
                        probs[x * d + a] = self.component(v, x, a).norm_sqr();
                    }
                }
            }
            Repr::Ensemble(items) => {
                for (w, v) in items {
                    for x in 0..n {
                        for a in 0..d {
                            probs[x * d + a] += w * self.component(v, x, a).norm_sqr();
                        }
                    }
                }
            }
            Repr::Density(rho) => {
                for x in 0..n {
                    for a in 0..d {
                        probs[x * d + a] = self.reduced(rho, x, a).trace().re;
                    }
                }
            }
        }
        probs
    }
}

/// Full `system_dim × system_dim` matrix of `⊕_x U^x ⊕ 1` on `Q_s ⊗ Lab`.
pub fn assemble_block_unitary(
    blocks: &[ComplexMatrix],
    measurements: &[FriendMeasurement],
    encoding: &LabEncoding,
) -> Result<ComplexMatrix> {
    SuperObserverOp::block_unitary(blocks.to_vec())?.validate(encoding)?;
    if measurements.len() != encoding.n {
        return Err(Error::InvalidScenario(format!(
            "{} measurements for n = {}",
            measurements.len(),
            encoding.n
        )));
    }
    Ok(LabFrame::new(encoding, measurements, 1).assemble_blocks(blocks))
}

/// Probabilities of the `(dn+1)`-outcome measurement `Ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub d: usize,
    pub n: usize,
    /// `probs[x·d + a] = Tr(P^x_a ρ)`
    pub probs: Vec<f64>,
    /// Probability of the ∅ outcome.
    pub null: f64,
}

impl OutcomeDistribution {
    pub fn p(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.d + a]
    }

    /// `p(a | Ā_x, U_w)` over `a`.
    pub fn sector(&self, x: usize) -> &[f64] {
        &self.probs[x * self.d..(x + 1) * self.d]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.null
    }

    pub fn is_distribution(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p >= -tol)
            && self.null >= -tol
            && (self.total() - 1.0).abs() <= tol
    }

    /// Mass outside sector `x` (∅ included).
    pub fn leakage(&self, x: usize) -> f64 {
        self.total() - self.sector(x).iter().sum::<f64>()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.n)
            .flat_map(|x| (0..self.d).map(move |a| format!("a={a},x={x}")))
            .collect();
        out.push("null".into());
        out
    }
}

/// Combined `Q_s ⊗ Lab` state after Friend measures `Ā_x` on `psi`.
pub fn post_measurement_state(
    psi: &ComplexVector,
    x: usize,
    scenario: &Scenario,
) -> Result<CombinedState> {
    if psi.dim() != scenario.d() {
        return Err(Error::DimensionMismatch {
            expected: scenario.d(),
            actual: psi.dim(),
        });
    }
    if !psi.is_normalized(EPS_NORM) {
        return Err(Error::NotNormalized(psi.norm_sqr()));
    }
    if x >= scenario.n() {
        return Err(Error::IndexOutOfRange {
            what: "x",
            index: x,
            limit: scenario.n(),
        });
    }
    Ok(scenario
        .frame()
        .post_measurement(psi, x, scenario.dynamics()))
}

pub fn apply_op(
    s: &CombinedState,
    op: &SuperObserverOp,
    scenario: &Scenario,
) -> Result<CombinedState> {
    scenario.frame().apply_op(s, op)
}

pub fn measure_omega(s: &CombinedState, scenario: &Scenario) -> OutcomeDistribution {
    let frame = scenario.frame();
    let probs = frame.omega_probabilities(s);
    let null = (s.trace() - probs.iter().sum::<f64>()).max(0.0);
    OutcomeDistribution {
        d: scenario.d(),
        n: scenario.n(),
        probs,
        null,
    }
}

/// One run of the protocol with inputs `(x, w)`; `sector(x)` of the result is
/// `p(a | Ā_x, U_w)`.
pub fn run_trial(scenario: &Scenario, x: usize, w: usize) -> Result<OutcomeDistribution> {
    scenario.check_xw(x, w)?;
    let s = post_measurement_state(scenario.psi(), x, scenario)?;
    let s = apply_op(&s, &scenario.ops()[w], scenario)?;
    Ok(measure_omega(&s, scenario))
}

/// `p(· | Ā_x, U_w)` as a plain vector.
pub fn trial_probabilities(scenario: &Scenario, x: usize, w: usize) -> Result<Vec<f64>> {
    Ok(run_trial(scenario, x, w)?.sector(x).to_vec())
}

/// Friend's consistency check at step t5: `true` iff op `w` keeps every
/// `span{|F^x_i⟩}_i` invariant.
pub fn friend_consistency_check(scenario: &Scenario, w: usize) -> Result<bool> {
    if w >= scenario.m() {
        return Err(Error::IndexOutOfRange {
            what: "w",
            index: w,
            limit: scenario.m(),
        });
    }
    Ok(off_block_weight(scenario, w) <= EPS_UNITARY)
}

/// `max_x Σ_k ‖(1 − Π_x) K_k Π_x‖_F`, with `Π_x` the projector onto sector `x`.
pub fn off_block_weight(scenario: &Scenario, w: usize) -> f64 {
    let frame = scenario.frame();
    let kraus: Vec<ComplexMatrix> = match &scenario.ops()[w] {
        SuperObserverOp::Identity => return 0.0,
        SuperObserverOp::BlockUnitary { blocks } => vec![frame.assemble_blocks(blocks)],
        SuperObserverOp::UnitalChannel { kraus } => kraus.clone(),
    };
    let (d, n) = (scenario.d(), scenario.n());
    let mut worst: f64 = 0.0;
    for x in 0..n {
        let mut leak = 0.0;
        for k in &kraus {
            for i in 0..d {
                let f = embed_f(x, i, &scenario.measurements()[x], scenario.encoding())
                    .expect("indices in range");
                let img = k.apply(&f);
                let mut residual = img.clone();
                for a in 0..d {
                    let fa = embed_f(x, a, &scenario.measurements()[x], scenario.encoding())
                        .expect("indices in range");
                    residual.axpy(-fa.inner(&img), &fa);
                }
                leak += residual.norm_sqr();
            }
        }
        worst = worst.max(leak.sqrt());
    }
    worst
}

/// For an AoM scenario with block-unitary ops, the NoM operations that
/// reproduce every `p(a | Ā_x, U_w)` exactly: `Ũ^x_w` maps
/// `Σ_i α^x_i |F^x_i⟩` to `Σ_a √β_{a,w,x} |F^x_a⟩`.
pub fn matching_nom_unitary(scenario: &Scenario) -> Result<Vec<SuperObserverOp>> {
    if scenario.dynamics() != Dynamics::AoM {
        return Err(Error::NotApplicable(
            "matching NoM construction needs an AoM scenario".into(),
        ));
    }
    let (d, n) = (scenario.d(), scenario.n());
    let mut out = Vec::with_capacity(scenario.m());
    for (w, op) in scenario.ops().iter().enumerate() {
        let blocks = match op {
            SuperObserverOp::Identity => {
                out.push(SuperObserverOp::Identity);
                continue;
            }
            SuperObserverOp::BlockUnitary { blocks } => blocks,
            SuperObserverOp::UnitalChannel { .. } => {
                return Err(Error::NotApplicable(format!(
                    "op {w} is a channel; matching construction needs block unitaries"
                )))
            }
        };
        let mut new_blocks = Vec::with_capacity(n);
        for (x, u) in blocks.iter().enumerate() {
            let alpha = scenario.measurements()[x].amplitudes(scenario.psi());
            // β_a = Σ_i |α_i U[a][i]|²
            let beta: Vec<f64> = (0..d)
                .map(|a| (0..d).map(|i| (alpha[i] * u[(a, i)]).norm_sqr()).sum())
                .collect();
            let source = ComplexVector::new(alpha)?;
            let target =
                ComplexVector::new(beta.iter().map(|b| C64::new(b.sqrt(), 0.0)).collect())?;
            new_blocks.push(unitary_mapping(&source, &target)?);
        }
        out.push(SuperObserverOp::BlockUnitary { blocks: new_blocks });
    }
    Ok(out)
}

/// NoM scenario with the ops from [`matching_nom_unitary`].
pub fn matching_nom_scenario(scenario: &Scenario) -> Result<Scenario> {
    let ops = matching_nom_unitary(scenario)?;
    scenario.with_dynamics(Dynamics::NoM).with_ops(ops)
}

/// Sanity bound used in tests: every trial distribution is a distribution.
pub fn all_trials_valid(scenario: &Scenario) -> Result<bool> {
    for x in 0..scenario.n() {
        for w in 0..scenario.m() {
            if !run_trial(scenario, x, w)?.is_distribution(EPS_PROB) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{random_state, random_unitary, stream_rng};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> ComplexVector {
        ComplexVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap()
    }

    fn hadamard_like() -> ComplexMatrix {
        // [[1, 1], [-1, 1]] / sqrt2 in the basis {F+, F-}
        ComplexMatrix::from_real_rows(&[
            &[FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            &[-FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        ])
        .unwrap()
    }

    fn section_scenario(dynamics: Dynamics) -> Scenario {
        Scenario::new(
            plus(),
            vec![FriendMeasurement::computational(2)],
            vec![
                SuperObserverOp::Identity,
                SuperObserverOp::block_unitary(vec![hadamard_like()]).unwrap(),
            ],
            dynamics,
        )
        .unwrap()
    }

    #[test]
    fn embed_f_basis_case() {
        let enc = LabEncoding::new(2, 1);
        let f = embed_f(0, 0, &FriendMeasurement::computational(2), &enc).unwrap();
        assert_eq!(f.dim(), 6);
        assert_eq!(
            f,
            tensor(&ComplexVector::basis(2, 0), &ComplexVector::basis(3, 0))
        );
    }

    #[test]
    fn embed_f_orthogonality() {
        let enc = LabEncoding::new(2, 2);
        let z = FriendMeasurement::computational(2);
        let f00 = embed_f(0, 0, &z, &enc).unwrap();
        let f01 = embed_f(0, 1, &z, &enc).unwrap();
        assert_eq!(f00.inner(&f01), ZERO);
        // identical Q_s bases, different x: the Lab factor separates them
        for i in 0..2 {
            for j in 0..2 {
                let a = embed_f(0, i, &z, &enc).unwrap();
                let b = embed_f(1, j, &z, &enc).unwrap();
                assert_eq!(a.inner(&b), ZERO);
            }
        }
    }

    #[test]
    fn embed_f_rejects_bad_index() {
        let enc = LabEncoding::new(2, 1);
        let z = FriendMeasurement::computational(2);
        assert!(matches!(
            embed_f(1, 0, &z, &enc),
            Err(Error::IndexOutOfRange { what: "x", .. })
        ));
        assert!(matches!(
            embed_f(0, 2, &z, &enc),
            Err(Error::IndexOutOfRange { what: "i", .. })
        ));
    }

    #[test]
    fn eigenstate_gives_identical_pure_states() {
        for dynamics in [Dynamics::AoM, Dynamics::NoM] {
            let s = section_scenario(dynamics);
            let st = post_measurement_state(&ComplexVector::basis(2, 0), 0, &s).unwrap();
            assert_eq!(st.kind(), StateKind::Pure);
            let f0 = embed_f(0, 0, &s.measurements()[0], s.encoding()).unwrap();
            assert!(st.pure_vector().unwrap().max_abs_diff(&f0) < 1e-15);
            assert!(st.ancilla_flag);
        }
    }

    #[test]
    fn superposition_under_nom_and_aom() {
        let s = section_scenario(Dynamics::NoM);
        let enc = s.encoding();
        let z = &s.measurements()[0];
        let fp = embed_f(0, 0, z, enc).unwrap();
        let fm = embed_f(0, 1, z, enc).unwrap();
        let expected = fp.add(&fm).scale(C64::new(FRAC_1_SQRT_2, 0.0));
        let nom = post_measurement_state(&plus(), 0, &s).unwrap();
        assert!(nom.pure_vector().unwrap().max_abs_diff(&expected) < 1e-15);

        let s = section_scenario(Dynamics::AoM);
        let aom = post_measurement_state(&plus(), 0, &s).unwrap();
        assert_eq!(aom.kind(), StateKind::Mixed);
        let expected = ComplexMatrix::outer(&fp, &fp)
            .add(&ComplexMatrix::outer(&fm, &fm))
            .scale(C64::new(0.5, 0.0));
        assert!(aom.density_matrix().max_abs_diff(&expected) < 1e-15);
        aom.check_invariants().unwrap();
    }

    #[test]
    fn post_measurement_rejects_wrong_dim() {
        let s = section_scenario(Dynamics::NoM);
        assert!(matches!(
            post_measurement_state(&ComplexVector::basis(3, 0), 0, &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn identity_op_leaves_state_bitwise_unchanged() {
        let s = section_scenario(Dynamics::AoM);
        let st = post_measurement_state(&plus(), 0, &s).unwrap();
        assert_eq!(apply_op(&st, &SuperObserverOp::Identity, &s).unwrap(), st);
    }

    #[test]
    fn rotation_sends_nom_state_to_f_plus() {
        let s = section_scenario(Dynamics::NoM);
        let st = post_measurement_state(&plus(), 0, &s).unwrap();
        let out = apply_op(&st, &s.ops()[1], &s).unwrap();
        let fp = embed_f(0, 0, &s.measurements()[0], s.encoding()).unwrap();
        assert!(out.pure_vector().unwrap().max_abs_diff(&fp) < 1e-15);
    }

    #[test]
    fn rotation_leaves_aom_mixture_invariant() {
        let s = section_scenario(Dynamics::AoM);
        let st = post_measurement_state(&plus(), 0, &s).unwrap();
        let out = apply_op(&st, &s.ops()[1], &s).unwrap();
        // oracle: U ρ U† with the assembled full matrix
        let u = s.frame().assemble_blocks(match &s.ops()[1] {
            SuperObserverOp::BlockUnitary { blocks } => blocks,
            _ => unreachable!(),
        });
        let direct = u.conjugate(&st.density_matrix());
        assert!(out.density_matrix().max_abs_diff(&direct) < 1e-15);
        assert!(out.density_matrix().max_abs_diff(&st.density_matrix()) < 1e-15);
    }

    #[test]
    fn omega_on_canonical_states() {
        let s = section_scenario(Dynamics::NoM);
        let st = post_measurement_state(&plus(), 0, &s).unwrap();
        let dist = measure_omega(&st, &s);
        assert!((dist.p(0, 0) - 0.5).abs() < 1e-15);
        assert!((dist.p(0, 1) - 0.5).abs() < 1e-15);
        assert!(dist.null.abs() < 1e-15);

        let fp = post_measurement_state(&ComplexVector::basis(2, 0), 0, &s).unwrap();
        assert!((measure_omega(&fp, &s).p(0, 0) - 1.0).abs() < 1e-15);

        let junk = ComplexVector::basis(6, s.encoding().junk_index());
        let st = CombinedState {
            repr: Repr::Pure(junk),
            encoding: *s.encoding(),
            env_dim: 1,
            ancilla_flag: true,
        };
        let dist = measure_omega(&st, &s);
        assert!((dist.null - 1.0).abs() < 1e-15);
        assert_eq!(dist.labels().last().unwrap(), "null");
    }

    #[test]
    fn run_trial_reproduces_section_example() {
        let nom = section_scenario(Dynamics::NoM);
        let half = FRAC_1_SQRT_2 * FRAC_1_SQRT_2;
        assert_eq!(trial_probabilities(&nom, 0, 0).unwrap(), [half, half]);
        let p = trial_probabilities(&nom, 0, 1).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        let aom = section_scenario(Dynamics::AoM);
        let p = trial_probabilities(&aom, 0, 1).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn run_trial_rejects_bad_indices() {
        let s = section_scenario(Dynamics::NoM);
        assert!(run_trial(&s, 1, 0).is_err());
        assert!(run_trial(&s, 0, 2).is_err());
    }

    #[test]
    fn scenario_validation() {
        let z = FriendMeasurement::computational(2);
        let not_unitary = ComplexMatrix::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        let err = Scenario::new(
            plus(),
            vec![z.clone()],
            vec![
                SuperObserverOp::Identity,
                SuperObserverOp::BlockUnitary {
                    blocks: vec![not_unitary],
                },
            ],
            Dynamics::AoM,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unitarity check failed"));

        let err = Scenario::new(
            plus(),
            vec![z.clone()],
            vec![SuperObserverOp::block_unitary(vec![hadamard_like()]).unwrap()],
            Dynamics::AoM,
        )
        .unwrap_err();
        assert!(err.to_string().contains("ops[0] must be identity"));

        let err = Scenario::new(
            ComplexVector::from_real(&[1.0, 1.0]).unwrap(),
            vec![z.clone()],
            vec![SuperObserverOp::Identity],
            Dynamics::AoM,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotNormalized(_)));

        let err = Scenario::new(
            plus(),
            vec![z, FriendMeasurement::computational(3)],
            vec![SuperObserverOp::Identity],
            Dynamics::AoM,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidScenario(_)));
    }

    #[test]
    fn friend_measurement_rejects_non_orthonormal() {
        let err = FriendMeasurement::new(vec![plus(), ComplexVector::basis(2, 0)]).unwrap_err();
        assert!(matches!(err, Error::NotOrthonormal(_)));
    }

    fn random_block_scenario(
        rng: &mut crate::qlinalg::StreamRng,
        d: usize,
        n: usize,
        m: usize,
        dynamics: Dynamics,
    ) -> Scenario {
        let psi = random_state(d, rng);
        let meas = (0..n)
            .map(|_| FriendMeasurement::from_unitary(&random_unitary(d, rng)).unwrap())
            .collect();
        let mut ops = vec![SuperObserverOp::Identity];
        for _ in 1..m {
            ops.push(
                SuperObserverOp::block_unitary((0..n).map(|_| random_unitary(d, rng)).collect())
                    .unwrap(),
            );
        }
        Scenario::new(psi, meas, ops, dynamics).unwrap()
    }

    #[test]
    fn block_ops_pass_consistency_and_full_unitaries_fail() {
        let mut rng = stream_rng(4, 0);
        let s = random_block_scenario(&mut rng, 3, 2, 3, Dynamics::NoM);
        for w in 0..3 {
            assert!(friend_consistency_check(&s, w).unwrap());
        }
        let dim = s.encoding().system_dim();
        let haar = SuperObserverOp::unital_channel(vec![random_unitary(dim, &mut rng)]).unwrap();
        let s2 = s.with_ops(vec![SuperObserverOp::Identity, haar]).unwrap();
        assert!(friend_consistency_check(&s2, 0).unwrap());
        assert!(!friend_consistency_check(&s2, 1).unwrap());
        assert!(off_block_weight(&s2, 1) > 0.1);
    }

    #[test]
    fn block_ops_keep_mass_in_sector() {
        let mut rng = stream_rng(5, 0);
        for trial in 0..50 {
            let d = 2 + trial % 3;
            let n = 1 + trial % 2;
            let dynamics = if trial % 2 == 0 {
                Dynamics::AoM
            } else {
                Dynamics::NoM
            };
            let s = random_block_scenario(&mut rng, d, n, 3, dynamics);
            for x in 0..n {
                for w in 0..3 {
                    let dist = run_trial(&s, x, w).unwrap();
                    assert!(dist.is_distribution(EPS_PROB));
                    assert!(dist.leakage(x) <= EPS_PROB);
                }
            }
        }
    }

    #[test]
    fn identity_trial_gives_born_weights() {
        let mut rng = stream_rng(6, 0);
        for dynamics in [Dynamics::AoM, Dynamics::NoM] {
            let s = random_block_scenario(&mut rng, 4, 2, 2, dynamics);
            for x in 0..2 {
                let alpha = s.measurements()[x].amplitudes(s.psi());
                let p = trial_probabilities(&s, x, 0).unwrap();
                for a in 0..4 {
                    assert!((p[a] - alpha[a].norm_sqr()).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn matching_nom_reproduces_aom_tables() {
        let mut rng = stream_rng(7, 0);
        for trial in 0..100 {
            let d = 2 + trial % 3;
            let n = 1 + trial % 2;
            let m = 1 + trial % 3;
            let aom = random_block_scenario(&mut rng, d, n, m, Dynamics::AoM);
            let nom = matching_nom_scenario(&aom).unwrap();
            assert_eq!(nom.dynamics(), Dynamics::NoM);
            for x in 0..n {
                for w in 0..m {
                    let pa = trial_probabilities(&aom, x, w).unwrap();
                    let pn = trial_probabilities(&nom, x, w).unwrap();
                    for a in 0..d {
                        assert!((pa[a] - pn[a]).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn matching_nom_requires_aom() {
        let s = section_scenario(Dynamics::NoM);
        assert!(matches!(
            matching_nom_unitary(&s),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn padding_adds_junk_levels_without_changing_statistics() {
        let s = section_scenario(Dynamics::NoM);
        let padded = s.clone().with_padding(3).unwrap();
        assert_eq!(padded.encoding().lab_dim(), 6);
        for w in 0..2 {
            assert_eq!(
                trial_probabilities(&s, 0, w).unwrap(),
                trial_probabilities(&padded, 0, w).unwrap()
            );
        }
    }

    #[test]
    fn channel_ops_preserve_trace() {
        let mut rng = stream_rng(8, 0);
        let s = random_block_scenario(&mut rng, 2, 1, 1, Dynamics::AoM);
        let dim = s.encoding().system_dim();
        let k = crate::channel::random_mixed_unitary_channel(dim, 4, &mut rng);
        let s = s
            .with_ops(vec![
                SuperObserverOp::Identity,
                SuperObserverOp::unital_channel(k).unwrap(),
            ])
            .unwrap();
        let st = post_measurement_state(s.psi(), 0, &s).unwrap();
        let out = apply_op(&st, &s.ops()[1], &s).unwrap();
        assert_eq!(out.kind(), StateKind::Mixed);
        assert!((out.trace() - 1.0).abs() <= EPS_PROB);
        out.check_invariants().unwrap();
        assert!(run_trial(&s, 0, 1).unwrap().is_distribution(EPS_PROB));
    }
}
