//! Unital quantum channels given by Kraus operators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::qlinalg::{
    random_simplex_weights, random_unitary, ComplexMatrix, C64, EPS_UNITARY, ZERO,
};

/// Largest entrywise deviation of `Σ K†K` and `Σ KK†` from the identity.
pub fn unitality_defect(kraus: &[ComplexMatrix]) -> (f64, f64) {
    let dim = kraus[0].rows();
    let mut tp = ComplexMatrix::zeros(dim, dim);
    let mut un = ComplexMatrix::zeros(dim, dim);
    for k in kraus {
        let kd = k.adjoint();
        tp = tp.add(&kd.matmul(k));
        un = un.add(&k.matmul(&kd));
    }
    let id = ComplexMatrix::identity(dim);
    (tp.max_abs_diff(&id), un.max_abs_diff(&id))
}

/// Checks that `kraus` describes a unital CPTP map on a single square space.
pub fn check_unital(kraus: &[ComplexMatrix], tol: f64) -> Result<()> {
    let Some(first) = kraus.first() else {
        return Err(Error::NotUnital("empty Kraus set".into()));
    };
    if !first.is_square() {
        return Err(Error::NotUnital("Kraus operators must be square".into()));
    }
    let dim = first.rows();
    if let Some(k) = kraus.iter().find(|k| k.rows() != dim || k.cols() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: k.rows().max(k.cols()),
        });
    }
    let (tp, un) = unitality_defect(kraus);
    if tp > tol {
        return Err(Error::NotUnital(format!(
            "sum K^dag K deviates from identity by {tp:e}"
        )));
    }
    if un > tol {
        return Err(Error::NotUnital(format!(
            "sum K K^dag deviates from identity by {un:e}"
        )));
    }
    Ok(())
}

/// `Σ_k K ρ K†`
pub fn apply_kraus(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
    for k in kraus {
        out = out.add(&k.conjugate(rho));
    }
    out
}

/// Convex mixture of `count` Haar unitaries with uniform-simplex weights.
/// Always unital.
pub fn random_mixed_unitary_channel<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Vec<ComplexMatrix> {
    assert!(count >= 1);
    let weights = random_simplex_weights(count, rng);
    weights
        .into_iter()
        .map(|w| random_unitary(dim, rng).scale(C64::new(w.sqrt(), 0.0)))
        .collect()
}

/// General unital channel: Ginibre Kraus operators pushed onto the unital
/// CPTP set by alternating trace-preserving and unital normalizations
/// (operator Sinkhorn scaling). Draws that fail to converge are rejected and
/// resampled.
pub fn random_general_unital_channel<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Vec<ComplexMatrix> {
    assert!(count >= 1);
    loop {
        let mut kraus: Vec<ComplexMatrix> = (0..count)
            .map(|_| {
                let g = random_unitary(dim, rng);
                let h = random_unitary(dim, rng);
                // random singular values in (0, 1] keep the draw full rank
                let s: Vec<C64> = (0..dim)
                    .map(|_| C64::new(rng.random_range(0.05..1.0), 0.0))
                    .collect();
                g.matmul(&ComplexMatrix::diagonal(&s)).matmul(&h)
            })
            .collect();
        if sinkhorn_normalize(&mut kraus, 1e-13, 5000) && check_unital(&kraus, EPS_UNITARY).is_ok()
        {
            return kraus;
        }
    }
}

fn sinkhorn_normalize(kraus: &mut [ComplexMatrix], tol: f64, max_iter: usize) -> bool {
    for _ in 0..max_iter {
        let (tp, un) = unitality_defect(kraus);
        if tp <= tol && un <= tol {
            return true;
        }
        let dim = kraus[0].rows();
        let mut s = ComplexMatrix::zeros(dim, dim);
        for k in kraus.iter() {
            s = s.add(&k.adjoint().matmul(k));
        }
        let Some(s_inv) = inverse_sqrt(&s) else {
            return false;
        };
        for k in kraus.iter_mut() {
            *k = k.matmul(&s_inv);
        }
        let mut t = ComplexMatrix::zeros(dim, dim);
        for k in kraus.iter() {
            t = t.add(&k.matmul(&k.adjoint()));
        }
        let Some(t_inv) = inverse_sqrt(&t) else {
            return false;
        };
        for k in kraus.iter_mut() {
            *k = t_inv.matmul(k);
        }
    }
    false
}

fn inverse_sqrt(h: &ComplexMatrix) -> Option<ComplexMatrix> {
    let (vals, vecs) = h.hermitian_eigen();
    if vals[0] <= 1e-12 {
        return None;
    }
    let d: Vec<C64> = vals.iter().map(|v| C64::new(1.0 / v.sqrt(), 0.0)).collect();
    Some(
        vecs.matmul(&ComplexMatrix::diagonal(&d))
            .matmul(&vecs.adjoint()),
    )
}

/// Kraus set of the completely dephasing channel in the canonical basis
/// (unital, not a unitary mixture in general).
pub fn dephasing_channel(dim: usize) -> Vec<ComplexMatrix> {
    (0..dim)
        .map(|i| {
            ComplexMatrix::from_fn(dim, dim, |r, c| {
                if r == i && c == i {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            })
        })
        .collect()
}
