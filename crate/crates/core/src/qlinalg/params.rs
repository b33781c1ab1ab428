//! Givens-rotation parametrization of SU(d).
//!
//! Layout of `angles` (length `d² − 1`): for every pair `(i, j)` with
//! `i < j` in lexicographic order, a rotation angle `θ` followed by a phase
//! `φ`; then `d − 1` diagonal phases `λ_0 … λ_{d−2}`. The decoded matrix is
//!
//! ```text
//! U = G(0,1) · G(0,2) · … · G(d−2,d−1) · diag(e^{iλ_0}, …, e^{−iΣλ})
//! ```
//!
//! where `G(i,j)` acts on rows/columns `i, j` as
//! `[[cos θ, −e^{−iφ} sin θ], [e^{iφ} sin θ, cos θ]]` and is the identity
//! elsewhere. Every factor has determinant 1, and the elimination in
//! [`encode_unitary`] shows the map is onto SU(d).

use serde::{Deserialize, Serialize};

use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Number of real parameters in the full SU(d) parametrization.
pub fn su_param_count(dim: usize) -> usize {
    dim * dim - 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryParams {
    pub dim: usize,
    pub angles: Vec<f64>,
}

impl UnitaryParams {
    pub fn new(dim: usize, angles: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("unitary dim must be >= 1".into()));
        }
        let expected = su_param_count(dim);
        if angles.len() != expected {
            return Err(Error::ParameterCount {
                expected,
                actual: angles.len(),
            });
        }
        Ok(Self { dim, angles })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            angles: vec![0.0; su_param_count(dim)],
        }
    }
}

fn pairs(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |i| (i + 1..dim).map(move |j| (i, j)))
}

/// Builds the SU(d) element described by `p`.
pub fn decode_unitary(p: &UnitaryParams) -> Result<ComplexMatrix> {
    let dim = p.dim;
    let expected = su_param_count(dim);
    if p.angles.len() != expected {
        return Err(Error::ParameterCount {
            expected,
            actual: p.angles.len(),
        });
    }
    let n_pairs = dim * (dim - 1) / 2;
    let phases = &p.angles[2 * n_pairs..];
    let mut diag = Vec::with_capacity(dim);
    let mut total = 0.0;
    for &l in phases {
        diag.push(C64::from_polar(1.0, l));
        total += l;
    }
    diag.push(C64::from_polar(1.0, -total));
    let mut u = ComplexMatrix::diagonal(&diag);

    // Left-multiply by the rotations from last to first.
    let rotations: Vec<(usize, usize)> = pairs(dim).collect();
    for (k, &(i, j)) in rotations.iter().enumerate().rev() {
        let theta = p.angles[2 * k];
        let phi = p.angles[2 * k + 1];
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        let (gii, gij, gji, gjj) = (C64::new(c, 0.0), -e.conj() * s, e * s, C64::new(c, 0.0));
        for col in 0..dim {
            let a = u[(i, col)];
            let b = u[(j, col)];
            u[(i, col)] = gii * a + gij * b;
            u[(j, col)] = gji * a + gjj * b;
        }
    }
    Ok(u)
}

/// Inverse of [`decode_unitary`] up to a global phase: any unitary `u` is
/// first rescaled by `det(u)^{−1/d}` so that it lies in SU(d).
pub fn encode_unitary(u: &ComplexMatrix) -> Result<UnitaryParams> {
    if !u.is_unitary(1e-8) {
        return Err(Error::NotUnitary(
            "cannot encode a non-unitary matrix".into(),
        ));
    }
    let dim = u.rows();
    let det = u.determinant();
    let fix = C64::from_polar(1.0, -det.arg() / dim as f64);
    let mut m = u.scale(fix);

    let mut angles = Vec::with_capacity(su_param_count(dim));
    for (i, j) in pairs(dim) {
        let a = m[(i, i)];
        let b = m[(j, i)];
        let (theta, phi) = if b.norm() < 1e-300 {
            (0.0, 0.0)
        } else {
            (b.norm().atan2(a.norm()), b.arg() - a.arg())
        };
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        // apply G(θ, φ)† on rows i, j
        for col in 0..dim {
            let x = m[(i, col)];
            let y = m[(j, col)];
            m[(i, col)] = x * c + e.conj() * s * y;
            m[(j, col)] = -e * s * x + y * c;
        }
        m[(j, i)] = ZERO;
        angles.push(theta);
        angles.push(phi);
    }
    for k in 0..dim.saturating_sub(1) {
        angles.push(m[(k, k)].arg());
    }
    UnitaryParams::new(dim, angles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{seeded_unitary, EPS_UNITARY, ONE};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_angles_decode_to_identity() {
        for dim in 1..6 {
            let u = decode_unitary(&UnitaryParams::identity(dim)).unwrap();
            assert!(u.max_abs_diff(&ComplexMatrix::identity(dim)) < 1e-15);
        }
    }

    #[test]
    fn single_rotation_in_dim_two() {
        // θ = π/8, φ = 0 gives the real rotation [[c, −s], [s, c]]
        let u = decode_unitary(&UnitaryParams::new(2, vec![PI / 8.0, 0.0, 0.0]).unwrap()).unwrap();
        let (s, c) = (PI / 8.0).sin_cos();
        let expected = ComplexMatrix::from_real_rows(&[&[c, -s], &[s, c]]).unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-15);

        let u = decode_unitary(&UnitaryParams::new(2, vec![PI / 4.0, 0.3, -0.7]).unwrap()).unwrap();
        assert!(u.is_unitary(EPS_UNITARY));
        assert!((u.determinant() - ONE).norm() < 1e-12);
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        assert!(matches!(
            UnitaryParams::new(3, vec![0.0; 7]),
            Err(Error::ParameterCount {
                expected: 8,
                actual: 7
            })
        ));
        let bad = UnitaryParams {
            dim: 2,
            angles: vec![0.0; 2],
        };
        assert!(decode_unitary(&bad).is_err());
    }

    #[test]
    fn encode_identity_round_trips() {
        for dim in 1..6 {
            let p = encode_unitary(&ComplexMatrix::identity(dim)).unwrap();
            assert!(p.angles.iter().all(|a| a.abs() < 1e-15));
            let u = decode_unitary(&p).unwrap();
            assert!(u.max_abs_diff(&ComplexMatrix::identity(dim)) < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn decode_is_special_unitary(dim in 1usize..6, raw in prop::collection::vec(-10.0f64..10.0, 35)) {
            let angles = raw[..su_param_count(dim)].to_vec();
            let u = decode_unitary(&UnitaryParams::new(dim, angles).unwrap()).unwrap();
            prop_assert!(u.is_unitary(EPS_UNITARY));
            prop_assert!((u.determinant() - ONE).norm() < 1e-9);
        }

        #[test]
        fn encode_then_decode_recovers_unitary_up_to_phase(dim in 1usize..6, seed in any::<u64>()) {
            let u = seeded_unitary(dim, seed);
            let v = decode_unitary(&encode_unitary(&u).unwrap()).unwrap();
            // v = e^{iγ} u for some global phase γ
            let overlap = u.adjoint().matmul(&v).trace() / dim as f64;
            prop_assert!((overlap.norm() - 1.0).abs() < 1e-9);
            prop_assert!(v.max_abs_diff(&u.scale(overlap)) < 1e-9);
        }
    }
}
