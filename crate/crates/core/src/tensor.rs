//! Dense complex matrices and the qubit-register constructions built on them.
//!
//! Register ordering is fixed crate-wide: a local space `H` followed by its
//! ancilla qubits `Q_1 ⊗ Q_2 ⊗ Q_3` (Alice) or `Q_4 ⊗ Q_5 ⊗ Q_6` (Bob), so an
//! isometry output is indexed `(h, q1, q2, q3)` with `q3` varying fastest.
//! [`controlled`] puts its control qubit first, as in `|0⟩⟨0|⊗I + |1⟩⟨1|⊗U`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Frobenius tolerance used for Hermiticity and unitarity checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} needs a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("register {position} out of range 1..={total}")]
    RegisterOutOfRange { position: usize, total: usize },
    #[error("invalid matrix shape: {0}")]
    BadShape(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("eigendecomposition did not converge")]
    NoConvergence,
}

/// Dense complex matrix stored row-major on the wire and column-major in memory.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{}x{}{}", self.rows(), self.cols(), self.0)
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::BadShape(format!("{rows}x{cols} has no entries")));
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &data)))
    }

    /// Real row-major entries; panics on a length mismatch.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "from_real: wrong entry count");
        Self(DMatrix::from_row_iterator(
            rows,
            cols,
            data.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.0[(i, j)] = value;
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols() != rhs.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "mul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.same_shape("add", rhs)?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.same_shape("sub", rhs)?;
        Ok(Self(&self.0 - &rhs.0))
    }

    fn same_shape(&self, op: &'static str, rhs: &Self) -> Result<(), LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr(self† · other)`.
    pub fn frobenius_inner(&self, other: &Self) -> Result<C64, LinalgError> {
        self.same_shape("frobenius_inner", other)?;
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `‖self − self†‖`; infinite for non-square matrices.
    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint()).norm()
    }

    /// `‖self†·self − I‖`.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.cols();
        (self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(n, n)).norm()
    }

    /// `(self + self†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.0.clone().singular_values().max()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self * other + other * self
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            data: self.row_major().into_iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        let data = repr.data.into_iter().map(|[re, im]| C64::new(re, im)).collect();
        ComplexMatrix::from_row_major(repr.rows, repr.cols, data).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

// Operator impls panic on shape mismatch; use the `try_*` methods for fallible arithmetic.

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::try_mul(self, rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::try_add(self, rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::try_sub(self, rhs).expect("matrix difference shape mismatch")
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self * &rhs
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self + &rhs
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        &self - &rhs
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        -&self
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Kronecker product of a sequence, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, f| kron(&acc, f))
}

/// Product of a sequence, left to right; identity of size `dim` when empty.
pub fn product<'a>(dim: usize, factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(dim), |acc, f| &acc * f)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn pauli_y() -> ComplexMatrix {
    let i = C64::i();
    ComplexMatrix::from_row_major(2, 2, vec![C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)])
        .expect("static shape")
}

/// `|0⟩ ↦ |+⟩`, `|1⟩ ↦ |−⟩`.
pub fn hadamard() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 2, &[h, h, h, -h])
}

/// Column vector `|+⟩`.
pub fn ket_plus() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_real(2, 1, &[h, h])
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ u` with the control qubit as the leading factor.
pub fn controlled(u: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    if !u.is_square() {
        return Err(LinalgError::NotSquare {
            op: "controlled",
            rows: u.rows(),
            cols: u.cols(),
        });
    }
    let n = u.rows();
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        out.set(i, i, C64::new(1.0, 0.0));
        for j in 0..n {
            out.set(n + i, n + j, u.get(i, j));
        }
    }
    Ok(out)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at 1-based `position` among `total_registers` qubits.
pub fn embed_on_register(
    op: &ComplexMatrix,
    position: usize,
    total_registers: usize,
) -> Result<ComplexMatrix, LinalgError> {
    if op.shape() != (2, 2) {
        return Err(LinalgError::BadShape(format!(
            "register operator must be 2x2, got {:?}",
            op.shape()
        )));
    }
    if position == 0 || position > total_registers {
        return Err(LinalgError::RegisterOutOfRange {
            position,
            total: total_registers,
        });
    }
    let left = ComplexMatrix::identity(1 << (position - 1));
    let right = ComplexMatrix::identity(1 << (total_registers - position));
    Ok(kron(&kron(&left, op), &right))
}

/// Permutation `K` with `K (a ⊗ b) = b ⊗ a` for `a ∈ C^d1`, `b ∈ C^d2`.
pub fn swap_factors(d1: usize, d2: usize) -> ComplexMatrix {
    let n = d1 * d2;
    let mut k = ComplexMatrix::zeros(n, n);
    for i in 0..d1 {
        for j in 0..d2 {
            k.set(j * d1 + i, i * d2 + j, C64::new(1.0, 0.0));
        }
    }
    k
}

/// Spectral decomposition of a Hermitian matrix; eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    /// `V f(Λ) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let diag: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        &(&self.vectors * &ComplexMatrix::diagonal(&diag)) * &self.vectors.adjoint()
    }
}

pub fn hermitian_eigendecomposition(a: &ComplexMatrix) -> Result<Eigen, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            op: "hermitian_eigendecomposition",
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let deviation = a.hermiticity_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian { deviation });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let sym = a.hermitian_part();
    let eig = SymmetricEigen::try_new(sym.0, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.rows(), a.cols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen {
        values,
        vectors: ComplexMatrix(vectors),
    })
}

/// `exp(i · scale · h)` for Hermitian `h`.
pub fn exp_i_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix, LinalgError> {
    let eig = hermitian_eigendecomposition(h)?;
    Ok(eig.apply(|x| C64::from_polar(1.0, scale * x)))
}

/// Matrix sign of a Hermitian matrix; zero eigenvalues map to `+1`.
pub fn hermitian_sign(h: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let eig = hermitian_eigendecomposition(h)?;
    Ok(eig.apply(|x| C64::new(if x < 0.0 { -1.0 } else { 1.0 }, 0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }
}

impl fmt::Display for BellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// 2×2 coefficient matrix of a Bell pair, rows on `Q_i`, columns on `Q_{i+3}`.
pub fn bell_matrix(kind: BellKind) -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let entries = match kind {
        BellKind::PhiPlus => [h, 0.0, 0.0, h],
        BellKind::PhiMinus => [h, 0.0, 0.0, -h],
        BellKind::PsiPlus => [0.0, h, h, 0.0],
        BellKind::PsiMinus => [0.0, h, -h, 0.0],
    };
    ComplexMatrix::from_real(2, 2, &entries)
}

/// One of the six qubit registers `Q_1..Q_6`; 1–3 are Alice's, 4–6 Bob's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitIndex(u8);

impl QubitIndex {
    pub fn new(index: u8) -> Option<Self> {
        (1..=6).contains(&index).then_some(Self(index))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_alice(self) -> bool {
        self.0 <= 3
    }

    /// Position within the owning party's three ancillas, 1-based.
    pub fn local_position(self) -> usize {
        usize::from((self.0 - 1) % 3 + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn kron_identities_and_paulis() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));

        let xz = kron(&pauli_x(), &pauli_z());
        assert_eq!(xz.get(0, 2), c(1.0));
        assert_eq!(xz.get(1, 3), c(-1.0));
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)] {
            assert_eq!(xz.get(i, j), c(0.0));
        }

        let phi = bell_matrix(BellKind::PhiPlus);
        assert!((kron(&phi, &phi).frobenius_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arithmetic_examples() {
        let a = ComplexMatrix::from_row_major(
            2,
            3,
            (0..6).map(|k| C64::new(k as f64, -(k as f64) / 2.0)).collect(),
        )
        .unwrap();
        assert_eq!(a.adjoint().adjoint(), a);
        assert!(close(&(&pauli_x() * &pauli_x()), &ComplexMatrix::identity(2), 0.0));
        assert!(close(
            &(&pauli_z() * &pauli_x()),
            &-(&pauli_x() * &pauli_z()),
            0.0
        ));
        assert!(matches!(
            a.try_mul(&a),
            Err(LinalgError::DimensionMismatch { op: "mul", .. })
        ));
        assert!(a.try_add(&a.transpose()).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let n = ComplexMatrix::identity(8).scale_real(1.0 / 8f64.sqrt());
        assert!((n.frobenius_norm() - 1.0).abs() < 1e-15);
        assert_eq!(ComplexMatrix::zeros(3, 2).frobenius_norm(), 0.0);
        assert!((pauli_x().frobenius_norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn controlled_examples() {
        assert_eq!(
            controlled(&ComplexMatrix::identity(3)).unwrap(),
            ComplexMatrix::identity(6)
        );
        assert!(matches!(
            controlled(&ComplexMatrix::zeros(2, 3)),
            Err(LinalgError::NotSquare { .. })
        ));

        // X_ctrl C(U) X_ctrl = C(U)(I ⊗ U) and Z_ctrl C(U) = C(−U) with U = Y ⊗ Z.
        let u = kron(&pauli_y(), &pauli_z());
        let cu = controlled(&u).unwrap();
        let id4 = ComplexMatrix::identity(4);
        let x_ctrl = kron(&pauli_x(), &id4);
        let z_ctrl = kron(&pauli_z(), &id4);
        let lhs = &(&x_ctrl * &cu) * &x_ctrl;
        assert!(close(&lhs, &(&cu * &kron(&ComplexMatrix::identity(2), &u)), 1e-14));
        assert!(close(&(&z_ctrl * &cu), &controlled(&-&u).unwrap(), 1e-14));
    }

    #[test]
    fn embed_examples() {
        let i4 = ComplexMatrix::identity(4);
        assert_eq!(embed_on_register(&pauli_x(), 1, 3).unwrap(), kron(&pauli_x(), &i4));
        assert_eq!(embed_on_register(&pauli_z(), 3, 3).unwrap(), kron(&i4, &pauli_z()));

        let ket00 = ComplexMatrix::from_real(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let out = &embed_on_register(&hadamard(), 2, 2).unwrap() * &ket00;
        let ket0_plus = kron(&ComplexMatrix::from_real(2, 1, &[1.0, 0.0]), &ket_plus());
        assert!(close(&out, &ket0_plus, 1e-15));

        assert!(matches!(
            embed_on_register(&pauli_x(), 4, 3),
            Err(LinalgError::RegisterOutOfRange { position: 4, total: 3 })
        ));
        assert!(embed_on_register(&pauli_x(), 0, 3).is_err());
    }

    #[test]
    fn eigen_examples() {
        let ez = hermitian_eigendecomposition(&pauli_z()).unwrap();
        assert_eq!(ez.values, vec![-1.0, 1.0]);

        let ex = hermitian_eigendecomposition(&pauli_x()).unwrap();
        assert!((ex.values[0] + 1.0).abs() < 1e-14 && (ex.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let minus = ComplexMatrix::from_real(2, 1, &[h, -h]);
        let v0 = ComplexMatrix::from_fn(2, 1, |r, _| ex.vectors.get(r, 0));
        // |−⟩ up to phase
        assert!((minus.frobenius_inner(&v0).unwrap().norm() - 1.0).abs() < 1e-14);

        let e4 = hermitian_eigendecomposition(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(e4.values, vec![1.0; 4]);

        let bad = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            hermitian_eigendecomposition(&bad),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn exp_examples() {
        let h = kron(&pauli_x(), &pauli_y());
        assert!(close(&exp_i_hermitian(&h, 0.0).unwrap(), &ComplexMatrix::identity(4), 1e-14));
        let minus_i = ComplexMatrix::identity(2).scale_real(-1.0);
        assert!(close(
            &exp_i_hermitian(&pauli_z(), std::f64::consts::PI).unwrap(),
            &minus_i,
            1e-14
        ));

        let delta = 1e-4;
        let taylor = &ComplexMatrix::identity(4) + &h.scale(C64::new(0.0, delta));
        let err = (&exp_i_hermitian(&h, delta).unwrap() - &taylor).frobenius_norm();
        // second-order remainder ‖h²‖δ²/2 = δ²
        assert!(err < 2.0 * delta * delta, "taylor remainder {err}");
        assert!(err > 0.25 * delta * delta);
    }

    #[test]
    fn bell_examples() {
        let phi = bell_matrix(BellKind::PhiPlus);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(phi, ComplexMatrix::from_real(2, 2, &[h, 0.0, 0.0, h]));

        for a in BellKind::ALL {
            for b in BellKind::ALL {
                let ip = bell_matrix(a).frobenius_inner(&bell_matrix(b)).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - c(want)).norm() < 1e-15, "{a} {b}");
            }
        }

        let x = pauli_x();
        assert!(close(&(&(&x * &phi) * &x), &phi, 0.0));
        let phim = bell_matrix(BellKind::PhiMinus);
        assert!(close(&(&(&x * &phim) * &x), &-&phim, 0.0));
    }

    #[test]
    fn swap_factors_swaps() {
        let a = ComplexMatrix::from_real(3, 1, &[1.0, 2.0, 3.0]);
        let b = ComplexMatrix::from_real(2, 1, &[5.0, 7.0]);
        assert_eq!(&swap_factors(3, 2) * &kron(&a, &b), kron(&b, &a));
    }

    #[test]
    fn sign_maps_zero_to_plus_one() {
        let h = ComplexMatrix::from_real(3, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5]);
        let s = hermitian_sign(&h).unwrap();
        assert!(close(&s, &ComplexMatrix::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]), 1e-14));
    }

    #[test]
    fn json_round_trip_and_rejects_bad_shape() {
        let m = ComplexMatrix::from_row_major(1, 2, vec![C64::new(1.0, -2.0), C64::new(0.5, 0.0)])
            .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"data":[[1.0,-2.0],[0.5,0.0]]}"#);
        assert_eq!(serde_json::from_str::<ComplexMatrix>(&s).unwrap(), m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"data":[[1,0]]}"#).is_err());
    }

    #[test]
    fn qubit_index_sides() {
        assert!(QubitIndex::new(0).is_none() && QubitIndex::new(7).is_none());
        let q5 = QubitIndex::new(5).unwrap();
        assert!(!q5.is_alice());
        assert_eq!(q5.local_position(), 2);
        assert!(QubitIndex::new(3).unwrap().is_alice());
    }
}
