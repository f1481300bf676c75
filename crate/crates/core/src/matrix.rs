//! Dense complex matrices, density operators and the spectral functions
//! (entropy, Schatten norms) everything else is built on.
//!
//! Matrices are stored row-major. Eigendecompositions of Hermitian matrices
//! are delegated to `nalgebra`; everything else is plain loops, which is all
//! the dimensions handled here (a few dozen) ever need.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Entrywise tolerance for the Hermitian invariant.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `tr ρ = 1`.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-NEGATIVE_EIGEN_TOL, 0)` are rounding noise and clamp to 0.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
/// Tolerance on the Euclidean norm of a pure state.
pub const PURE_NORM_TOL: f64 = 1e-12;

/// Entropies are reported in nats. Divide by this to get bits.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / NATS_PER_BIT
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::mismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// `|v⟩⟨w|`
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij − B_ij|`; shapes must agree.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(
            self.shape(),
            other.shape(),
            "shape mismatch in max_abs_diff"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A − A†|` entrywise. Infinite for non-square matrices.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A†)/2`
    pub fn hermitian_part(&self) -> Self {
        debug_assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `A v`
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(
            self.cols,
            v.len(),
            "vector length differs from column count"
        );
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// `A† v`
    pub fn adjoint_mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "vector length differs from row count");
        let mut out = vec![ZERO; self.cols];
        for (row, &x) in self.data.chunks_exact(self.cols).zip(v) {
            if x == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * x;
            }
        }
        out
    }

    /// `A X A†`
    pub fn conjugate(&self, x: &ComplexMatrix) -> Self {
        self.matmul(x).matmul(&self.adjoint())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&z| z == ZERO)
    }

    /// Extracts the `rows × cols` sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigvalsh(&self) -> Vec<f64> {
        assert!(self.is_square(), "eigvalsh needs a square matrix");
        if self.rows == 0 {
            return Vec::new();
        }
        let mut vals: Vec<f64> = self
            .hermitian_part()
            .to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Eigendecomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> HermitianEigen {
        assert!(self.is_square(), "eigh needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return HermitianEigen {
                values: Vec::new(),
                vectors: Self::zeros(0, 0),
            };
        }
        let eig = self.hermitian_part().to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = Self::from_nalgebra(&eig.eigenvectors);
        let vectors = Self::from_fn(n, n, |i, j| vecs[(i, order[j])]);
        HermitianEigen { values, vectors }
    }

    /// Thin QR with the diagonal of `R` made real and non-negative.
    /// Returns `(Q, R)` with `Q` of shape `rows × min(rows, cols)`.
    pub fn qr_positive(&self) -> (Self, Self) {
        let qr = self.to_nalgebra().qr();
        let mut q = Self::from_nalgebra(&qr.q());
        let mut r = Self::from_nalgebra(&qr.r());
        for k in 0..r.rows.min(r.cols) {
            let d = r[(k, k)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
            for j in 0..r.cols {
                r[(k, j)] *= phase.conj();
            }
            for i in 0..q.rows {
                q[(i, k)] *= phase;
            }
        }
        (q, r)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Wire format: `{"rows": n, "cols": m, "data": [[re, im], ...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(deserializer)?;
        let data = raw.data.iter().map(|&[re, im]| C64::new(re, im)).collect();
        ComplexMatrix::from_vec(raw.rows, raw.cols, data).map_err(serde::de::Error::custom)
    }
}

/// Eigenpairs of a Hermitian matrix; `vectors` holds eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows())
            .map(|i| self.vectors[(i, k)])
            .collect()
    }

    /// `Q f(Λ) Q†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let q = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += q[(i, k)] * q[(j, k)].conj() * fv[k];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Clamp the spectrum of a state: values in `[-tol, 0)` become 0, values
/// above 1 become 1, anything more negative is an error.
pub fn clamp_spectrum(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| {
            if v < -NEGATIVE_EIGEN_TOL {
                Err(Error::Validation {
                    invariant: "positive semidefinite",
                    residual: -v,
                })
            } else {
                Ok(v.clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// `−Σ λ ln λ` with `0 ln 0 = 0`, after clamping.
pub fn entropy_from_spectrum(values: &[f64]) -> Result<f64> {
    Ok(clamp_spectrum(values)?
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum())
}

/// The exponent of a Schatten norm. `p = ∞` is its own variant so the
/// operator-norm branch never goes through a huge finite power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchattenP {
    Finite(f64),
    Infinity,
}

impl SchattenP {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::domain(format!(
                "Schatten exponent must be >= 1, got {p}"
            )));
        }
        Ok(if p.is_infinite() {
            SchattenP::Infinity
        } else {
            SchattenP::Finite(p)
        })
    }

    pub fn is_one(&self) -> bool {
        matches!(self, SchattenP::Finite(p) if *p == 1.0)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            SchattenP::Finite(p) => *p,
            SchattenP::Infinity => f64::INFINITY,
        }
    }

    /// `n^((1−p)/p)`: the norm of `Ī_n`, and the scale factor picked up by
    /// tensoring with `Ī_n`.
    pub fn mixing_factor(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            SchattenP::Finite(p) => n.powf((1.0 - p) / p),
            SchattenP::Infinity => 1.0 / n,
        }
    }
}

impl fmt::Display for SchattenP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenP::Finite(p) => write!(f, "{p}"),
            SchattenP::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for SchattenP {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(SchattenP::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid Schatten exponent {s:?}")))?;
                SchattenP::new(p)
            }
        }
    }
}

impl Serialize for SchattenP {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SchattenP::Finite(p) => serializer.serialize_f64(*p),
            SchattenP::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SchattenP {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => SchattenP::new(p),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `(Σ λ^p)^(1/p)` over a clamped spectrum.
pub fn schatten_from_spectrum(values: &[f64], p: SchattenP) -> Result<f64> {
    let vals: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v < -NEGATIVE_EIGEN_TOL {
                Err(Error::Validation {
                    invariant: "positive semidefinite",
                    residual: -v,
                })
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect::<Result<_>>()?;
    Ok(match p {
        SchattenP::Infinity => vals.iter().copied().fold(0.0, f64::max),
        SchattenP::Finite(1.0) => vals.iter().sum(),
        SchattenP::Finite(p) => vals.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p),
    })
}

/// A positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::mismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let herm = matrix.hermitian_residual();
        if herm > HERMITIAN_TOL {
            return Err(Error::Validation {
                invariant: "Hermitian",
                residual: herm,
            });
        }
        let tr = matrix.trace();
        let trace_residual = (tr - ONE).norm();
        if trace_residual > TRACE_TOL {
            return Err(Error::Validation {
                invariant: "unit trace",
                residual: trace_residual,
            });
        }
        let min_eig = matrix.eigvalsh().first().copied().unwrap_or(0.0);
        if min_eig < -NEGATIVE_EIGEN_TOL {
            return Err(Error::Validation {
                invariant: "positive semidefinite",
                residual: -min_eig,
            });
        }
        Ok(DensityMatrix {
            matrix: matrix.hermitian_part(),
        })
    }

    /// Wraps a matrix that is a state by construction (channel outputs,
    /// tensor products of states). Only the Hermitian part is kept.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        DensityMatrix {
            matrix: matrix.hermitian_part(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let a = psi.amplitudes();
        DensityMatrix {
            matrix: ComplexMatrix::outer(a, a),
        }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diagonal(probs))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.eigvalsh()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_trusted(tensor(&self.matrix, &other.matrix))
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(deserializer)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// A unit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(Error::Validation {
                invariant: "unit norm",
                residual: (norm - 1.0).abs(),
            });
        }
        Ok(PureState { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = vec_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(PureState { amplitudes })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[k] = ONE;
        PureState { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[f64; 2]> = self.amplitudes.iter().map(|z| [z.re, z.im]).collect();
        v.serialize(serializer)
    }
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Kronecker product, `(i₁i₂, j₁j₂) ↦ a[i₁,j₁]·b[i₂,j₂]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn tensor_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_from_spectrum(&rho.eigenvalues())
        .expect("a validated density matrix has no significantly negative eigenvalue")
}

/// Schatten p-norm of a positive semidefinite Hermitian matrix.
pub fn schatten_norm(rho: &ComplexMatrix, p: SchattenP) -> Result<f64> {
    let herm = rho.hermitian_residual();
    if herm > HERMITIAN_TOL {
        return Err(Error::Validation {
            invariant: "Hermitian",
            residual: herm,
        });
    }
    schatten_from_spectrum(&rho.eigvalsh(), p)
}

/// Which tensor factor a partial trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Reduced state on one factor of `H ⊗ K`, `dims = (dim H, dim K)`.
pub fn partial_trace(
    rho: &DensityMatrix,
    keep: Subsystem,
    dims: (usize, usize),
) -> Result<DensityMatrix> {
    let (a, b) = dims;
    if a * b != rho.dim() {
        return Err(Error::mismatch(format!(
            "partial trace over {a}x{b} factors of a {}-dimensional state",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let reduced = match keep {
        Subsystem::First => {
            ComplexMatrix::from_fn(a, a, |i, j| (0..b).map(|k| m[(i * b + k, j * b + k)]).sum())
        }
        Subsystem::Second => {
            ComplexMatrix::from_fn(b, b, |k, l| (0..a).map(|i| m[(i * b + k, i * b + l)]).sum())
        }
    };
    Ok(DensityMatrix::from_trusted(reduced))
}
