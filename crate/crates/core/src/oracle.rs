//! Brute-force reference pipeline.
//!
//! Everything here is dense `nalgebra` arithmetic on full density matrices:
//! Friend's measurement is the isometry `V_x = Σ_i |F^x_i⟩⟨ψ^x_i|` followed
//! (under AoM) by the explicit dephasing `Σ_i P^x_i ρ P^x_i`, Wigner's
//! operation is the fully assembled matrix `U_w` (or the Kraus sum), and
//! probabilities are `Tr(P ρ)`. None of the pure-state shortcuts of
//! [`crate::scenario`] are used, so agreement between the two paths is a
//! meaningful check.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bipartite::BipartiteScenario;
use crate::error::{Error, Result};
use crate::qlinalg::{ComplexMatrix, ComplexVector};
use crate::scenario::{
    Dynamics, FriendMeasurement, LabEncoding, OutcomeDistribution, Scenario, SuperObserverOp,
};

type M = DMatrix<Complex64>;

fn column(v: &ComplexVector) -> M {
    M::from_iterator(v.dim(), 1, v.iter().copied())
}

fn dense(m: &ComplexMatrix) -> M {
    M::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn basis_column(dim: usize, k: usize) -> M {
    let mut m = M::zeros(dim, 1);
    m[(k, 0)] = Complex64::new(1.0, 0.0);
    m
}

/// `|F^x_i⟩` as a column, built with an explicit Kronecker product.
fn f_column(meas: &FriendMeasurement, enc: &LabEncoding, x: usize, i: usize) -> M {
    column(meas.vector(i)).kronecker(&basis_column(enc.lab_dim(), x * enc.d + i))
}

fn trace_re(m: &M) -> f64 {
    m.trace().re
}

struct Geometry {
    /// `f[x][i] = |F^x_i⟩`
    f: Vec<Vec<M>>,
    psi: Vec<Vec<M>>,
    dim: usize,
}

impl Geometry {
    fn new(measurements: &[FriendMeasurement], enc: &LabEncoding) -> Self {
        let f = measurements
            .iter()
            .enumerate()
            .map(|(x, m)| (0..enc.d).map(|i| f_column(m, enc, x, i)).collect())
            .collect();
        let psi = measurements
            .iter()
            .map(|m| (0..enc.d).map(|i| column(m.vector(i))).collect())
            .collect();
        Self {
            f,
            psi,
            dim: enc.system_dim(),
        }
    }

    fn projector(&self, x: usize, i: usize) -> M {
        &self.f[x][i] * self.f[x][i].adjoint()
    }

    /// `V_x = Σ_i |F^x_i⟩⟨ψ^x_i|`
    fn isometry(&self, x: usize) -> M {
        let mut v = M::zeros(self.dim, self.psi[x][0].nrows());
        for (f, p) in self.f[x].iter().zip(&self.psi[x]) {
            v += f * p.adjoint();
        }
        v
    }

    /// `1 + Σ_x Σ_{a,i} (U^x[a][i] − δ_{ai}) |F^x_a⟩⟨F^x_i|`
    fn block_unitary(&self, blocks: &[ComplexMatrix]) -> M {
        let mut u = M::identity(self.dim, self.dim);
        for (x, b) in blocks.iter().enumerate() {
            let d = b.rows();
            for a in 0..d {
                for i in 0..d {
                    let delta = if a == i { 1.0 } else { 0.0 };
                    let c = b[(a, i)] - Complex64::new(delta, 0.0);
                    u += (&self.f[x][a] * self.f[x][i].adjoint()) * c;
                }
            }
        }
        u
    }
}

fn kraus_of(op: &SuperObserverOp, geo: &Geometry) -> Vec<M> {
    match op {
        SuperObserverOp::Identity => vec![M::identity(geo.dim, geo.dim)],
        SuperObserverOp::BlockUnitary { blocks } => vec![geo.block_unitary(blocks)],
        SuperObserverOp::UnitalChannel { kraus } => kraus.iter().map(dense).collect(),
    }
}

fn evolve(rho: &M, kraus: &[M]) -> M {
    let mut out = M::zeros(rho.nrows(), rho.ncols());
    for k in kraus {
        out += k * rho * k.adjoint();
    }
    out
}

/// `p(·|Ā_x, U_w)` over all `Ω` outcomes via full density matrices.
pub fn oracle_single_party(scenario: &Scenario, x: usize, w: usize) -> Result<OutcomeDistribution> {
    if x >= scenario.n() || w >= scenario.m() {
        return Err(Error::IndexOutOfRange {
            what: "x/w",
            index: x.max(w),
            limit: scenario.n().min(scenario.m()),
        });
    }
    let enc = scenario.encoding();
    let geo = Geometry::new(scenario.measurements(), enc);
    let psi = column(scenario.psi());
    let v = geo.isometry(x);
    let mut rho = &v * (&psi * psi.adjoint()) * v.adjoint();
    if scenario.dynamics() == Dynamics::AoM {
        let projectors: Vec<M> = (0..enc.d).map(|i| geo.projector(x, i)).collect();
        rho = evolve(&rho, &projectors);
    }
    let rho = evolve(&rho, &kraus_of(&scenario.ops()[w], &geo));
    let mut probs = Vec::with_capacity(enc.d * enc.n);
    for xx in 0..enc.n {
        for a in 0..enc.d {
            probs.push(trace_re(&(geo.projector(xx, a) * &rho)));
        }
    }
    let null = trace_re(&rho) - probs.iter().sum::<f64>();
    Ok(OutcomeDistribution {
        d: enc.d,
        n: enc.n,
        probs,
        null: null.max(0.0),
    })
}

/// `p(a,b|x,y,U_w)` as `[[p(0,0), p(0,1)], [p(1,0), p(1,1)]]`, computed on
/// the full `(Q_A ⊗ Lab_A) ⊗ Q_B` space.
pub fn oracle_bipartite(
    bs: &BipartiteScenario,
    x: usize,
    y: usize,
    w: usize,
) -> Result<[[f64; 2]; 2]> {
    if x > 1 || y > 1 || w > 1 {
        return Err(Error::IndexOutOfRange {
            what: "x/y/w",
            index: x.max(y).max(w),
            limit: 2,
        });
    }
    let enc = bs.encoding();
    let geo = Geometry::new(bs.alice(), enc);
    let id_b = M::identity(bs.d_b(), bs.d_b());
    let psi = column(bs.psi());
    let v = geo.isometry(x).kronecker(&id_b);
    let mut rho = &v * (&psi * psi.adjoint()) * v.adjoint();
    if bs.dynamics() == Dynamics::AoM {
        let projectors: Vec<M> = (0..2)
            .map(|i| geo.projector(x, i).kronecker(&id_b))
            .collect();
        rho = evolve(&rho, &projectors);
    }
    let kraus: Vec<M> = kraus_of(&bs.ops()[w], &geo)
        .iter()
        .map(|k| k.kronecker(&id_b))
        .collect();
    let rho = evolve(&rho, &kraus);
    let mut out = [[0.0; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, p) in row.iter_mut().enumerate() {
            let proj = geo
                .projector(x, a)
                .kronecker(&dense(bs.bob()[y].projector(b)));
            *p = trace_re(&(proj * &rho));
        }
    }
    Ok(out)
}

/// Largest deviation of the oracle's `w = 1` probabilities from the
/// decomposition `|U^x[a][a]|² p(a,b|·,1) + |U^x[a][a⊕1]|² p(a⊕1,b|·,1)`,
/// both sides computed by the oracle. Needs an AoM scenario with a block
/// unitary.
pub fn oracle_alpha_decomposition_defect(bs: &BipartiteScenario) -> Result<f64> {
    if bs.dynamics() != Dynamics::AoM {
        return Err(Error::NotApplicable("decomposition holds under AoM".into()));
    }
    let SuperObserverOp::BlockUnitary { blocks } = &bs.ops()[1] else {
        return Err(Error::NotApplicable(
            "decomposition needs a block unitary".into(),
        ));
    };
    let enc = bs.encoding();
    let geo = Geometry::new(bs.alice(), enc);
    let u = geo.block_unitary(blocks);
    let mut worst: f64 = 0.0;
    for x in 0..2 {
        // α_{i,j} = ⟨F^x_j|U|F^x_i⟩, computed from the assembled matrix
        let alpha = |i: usize, j: usize| (geo.f[x][j].adjoint() * &u * &geo.f[x][i])[(0, 0)];
        for i in 0..2 {
            let norm = alpha(i, 0).norm_sqr() + alpha(i, 1).norm_sqr();
            worst = worst.max((norm - 1.0).abs());
        }
        for y in 0..2 {
            let p_id = oracle_bipartite(bs, x, y, 0)?;
            let p_u = oracle_bipartite(bs, x, y, 1)?;
            for a in 0..2 {
                for b in 0..2 {
                    let predicted = alpha(a, a).norm_sqr() * p_id[a][b]
                        + alpha(a ^ 1, a).norm_sqr() * p_id[a ^ 1][b];
                    worst = worst.max((predicted - p_u[a][b]).abs());
                }
            }
        }
    }
    Ok(worst)
}
