//! Dense complex operator algebra on finite tensor-product Hilbert spaces.
//!
//! Everything downstream (superoperators, projections, solvers) is built on
//! the [`Operator`] type: a dense complex square matrix tagged with the
//! factorization of the space it acts on. Matrices are stored column-major
//! (the `nalgebra` layout), which doubles as the column-stacking
//! vectorization used by the superoperator module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances for physical-state checks.
///
/// Defaults are tuned for double precision at the dimensions this crate
/// targets; all fields can be overridden from an experiment configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum Hermiticity defect `max |m_ij - conj(m_ji)|`.
    pub herm_tol: f64,
    /// Maximum unit-trace defect `|tr - 1|`.
    pub trace_tol: f64,
    /// Most negative admissible eigenvalue of a positive operator.
    pub psd_tol: f64,
    /// Maximum defect of `U† U - I` for computed unitaries.
    pub unitary_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            trace_tol: 1e-9,
            psd_tol: 1e-9,
            unitary_tol: 1e-11,
        }
    }
}

/// A finite tensor-product Hilbert space, stored as the ordered list of
/// factor dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpace {
    factors: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSpace("factor list is empty".into()));
        }
        if factors.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpace("factor dimension must be >= 1".into()));
        }
        Ok(Self { factors })
    }

    /// Single-factor space of dimension `dim`.
    pub fn single(dim: usize) -> Self {
        Self::new(vec![dim]).expect("dimension must be >= 1")
    }

    pub fn qubit() -> Self {
        Self::single(2)
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Concatenate factor lists: the space of `self ⊗ other`.
    pub fn tensor(&self, other: &HilbertSpace) -> HilbertSpace {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        HilbertSpace { factors }
    }

    /// Dimensions `(d_sys, d_env)` when factors `0..=split` are the system.
    pub fn split_dims(&self, split: usize) -> Result<(usize, usize)> {
        if split + 1 > self.factors.len() {
            return Err(Error::InvalidSpace(format!(
                "split index {split} out of range for {} factors",
                self.factors.len()
            )));
        }
        let d_sys = self.factors[..=split].iter().product();
        let d_env = self.factors[split + 1..].iter().product();
        Ok((d_sys, d_env))
    }

    /// The subspace formed by factors `0..=split`.
    pub fn system_part(&self, split: usize) -> Result<HilbertSpace> {
        if split + 1 > self.factors.len() {
            return Err(Error::InvalidSpace(format!(
                "split index {split} out of range for {} factors",
                self.factors.len()
            )));
        }
        HilbertSpace::new(self.factors[..=split].to_vec())
    }

    /// The subspace formed by factors `split+1..`.
    pub fn env_part(&self, split: usize) -> Result<HilbertSpace> {
        if split + 1 >= self.factors.len() {
            return Err(Error::InvalidSpace(format!(
                "no environment factors after split {split}"
            )));
        }
        HilbertSpace::new(self.factors[split + 1..].to_vec())
    }
}

/// Dense complex operator on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(space: HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "operator matrix side vs space dimension",
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    /// Build from row-major nested slices; used by config parsing and tests.
    pub fn from_rows(space: HilbertSpace, rows: &[Vec<C64>]) -> Result<Self> {
        let d = space.total_dim();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "row data vs space dimension",
                expected: d,
                got: rows.len(),
            });
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d),
        }
    }

    /// Matrix unit |i⟩⟨j| on `space`.
    pub fn matrix_unit(space: HilbertSpace, i: usize, j: usize) -> Self {
        let d = space.total_dim();
        let mut m = DMatrix::zeros(d, d);
        m[(i, j)] = C64::new(1.0, 0.0);
        Self { space, matrix: m }
    }

    /// Diagonal operator from real entries.
    pub fn from_real_diagonal(space: HilbertSpace, diag: &[f64]) -> Result<Self> {
        let d = space.total_dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                context: "diagonal length vs space dimension",
                expected: d,
                got: diag.len(),
            });
        }
        let matrix = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    /// Reinterpret the same matrix on a differently factored space of equal
    /// total dimension.
    pub fn with_space(&self, space: HilbertSpace) -> Result<Self> {
        Operator::from_matrix(space, self.matrix.clone())
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diagonal().iter().sum()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn transpose(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.transpose(),
        }
    }

    pub fn conjugate(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: self.matrix.map(|z| z * factor),
        }
    }

    pub fn scale_re(&self, factor: f64) -> Operator {
        self.scale(C64::new(factor, 0.0))
    }

    /// Maximum absolute entry (Chebyshev norm); the defect norm used in
    /// reports throughout the crate.
    pub fn max_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum Hermiticity defect `max |m_ij - conj(m_ji)|`.
    pub fn herm_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                let defect = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(defect);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.herm_defect() <= tol
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    /// Anticommutator `{self, other}`.
    pub fn anticommutator(&self, other: &Operator) -> Operator {
        self * other + other * self
    }

    /// Column-stacked vectorization (the matrix in column-major order).
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.matrix.as_slice())
    }

    /// Inverse of [`Operator::vectorize`] for a given space.
    pub fn from_vectorized(space: HilbertSpace, v: &DVector<C64>) -> Result<Self> {
        let d = space.total_dim();
        if v.len() != d * d {
            return Err(Error::DimensionMismatch {
                context: "vectorized length vs space dimension squared",
                expected: d * d,
                got: v.len(),
            });
        }
        let matrix = DMatrix::from_column_slice(d, d, v.as_slice());
        Ok(Self { space, matrix })
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                assert_eq!(
                    self.dim(),
                    rhs.dim(),
                    "operator dimension mismatch in arithmetic"
                );
                Operator {
                    space: self.space.clone(),
                    matrix: &self.matrix $op &rhs.matrix,
                }
            }
        }
        impl std::ops::$trait<Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                (&self).$method(&rhs)
            }
        }
        impl std::ops::$trait<&Operator> for Operator {
            type Output = Operator;
            fn $method(self, rhs: &Operator) -> Operator {
                (&self).$method(rhs)
            }
        }
        impl std::ops::$trait<Operator> for &Operator {
            type Output = Operator;
            fn $method(self, rhs: Operator) -> Operator {
                self.$method(&rhs)
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);

impl std::ops::Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl std::ops::Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        -&self
    }
}

/// Kronecker product `a ⊗ b`; the result space concatenates the factor lists.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let da = a.dim();
    let db = b.dim();
    let d = da * db;
    let mut m = DMatrix::zeros(d, d);
    for ia in 0..da {
        for ja in 0..da {
            let x = a.matrix[(ia, ja)];
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    m[(ia * db + ib, ja * db + jb)] = x * b.matrix[(ib, jb)];
                }
            }
        }
    }
    Operator {
        space: a.space.tensor(&b.space),
        matrix: m,
    }
}

/// Partial trace over all factors after `split` (the environment).
///
/// `split` is the index of the last system factor.
pub fn partial_trace_env(x: &Operator, split: usize) -> Result<Operator> {
    let (d_sys, d_env) = x.space.split_dims(split)?;
    let sys_space = x.space.system_part(split)?;
    let mut m = DMatrix::zeros(d_sys, d_sys);
    for a in 0..d_sys {
        for b in 0..d_sys {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..d_env {
                s += x.matrix[(a * d_env + k, b * d_env + k)];
            }
            m[(a, b)] = s;
        }
    }
    Operator::from_matrix(sys_space, m)
}

/// Partial trace with an inserted environment operator:
/// returns `tr_env{(I ⊗ op_env) x}` on the system factors.
pub fn partial_trace_env_with(x: &Operator, split: usize, op_env: &Operator) -> Result<Operator> {
    let (d_sys, d_env) = x.space.split_dims(split)?;
    if op_env.dim() != d_env {
        return Err(Error::DimensionMismatch {
            context: "environment operator vs environment dimension",
            expected: d_env,
            got: op_env.dim(),
        });
    }
    let sys_space = x.space.system_part(split)?;
    let mut m = DMatrix::zeros(d_sys, d_sys);
    for a in 0..d_sys {
        for b in 0..d_sys {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..d_env {
                for l in 0..d_env {
                    let w = op_env.matrix[(k, l)];
                    if w != C64::new(0.0, 0.0) {
                        s += w * x.matrix[(a * d_env + l, b * d_env + k)];
                    }
                }
            }
            m[(a, b)] = s;
        }
    }
    Operator::from_matrix(sys_space, m)
}

/// Hilbert-Schmidt inner product `tr{x† y}`.
pub fn hs_inner(x: &Operator, y: &Operator) -> Result<C64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            context: "inner product operands",
            expected: x.dim(),
            got: y.dim(),
        });
    }
    let mut s = C64::new(0.0, 0.0);
    for (a, b) in x.matrix.iter().zip(y.matrix.iter()) {
        s += a.conj() * b;
    }
    Ok(s)
}

/// Eigendecomposition of a Hermitian operator: real eigenvalues (ascending)
/// and the unitary of eigenvectors as columns.
pub fn hermitian_eigen(h: &Operator, herm_tol: f64) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let defect = h.herm_defect();
    if defect > herm_tol {
        return Err(Error::NonHermitian {
            defect,
            tol: herm_tol,
        });
    }
    // Symmetrize to suppress round-off before factorizing.
    let sym = (h.matrix.clone() + h.matrix.adjoint()).map(|z| z * C64::new(0.5, 0.0));
    let se = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let d = h.dim();
    let mut vecs = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// Eigenvalues of the Hermitian part `(x + x†)/2`, ascending.
pub fn hermitian_part_eigenvalues(x: &Operator) -> Vec<f64> {
    let sym = (x.matrix.clone() + x.matrix.adjoint()).map(|z| z * C64::new(0.5, 0.0));
    let mut vals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Minimum eigenvalue of the Hermitian part of `x`.
pub fn min_eigenvalue(x: &Operator) -> f64 {
    hermitian_part_eigenvalues(x)[0]
}

/// Trace distance `(1/2) Σ |eig(a - b)|` between Hermitian operators.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "trace distance operands",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let diff = a - b;
    Ok(0.5 * hermitian_part_eigenvalues(&diff).iter().map(|v| v.abs()).sum::<f64>())
}

/// `e^{i h t}` for Hermitian `h`, via eigendecomposition.
pub fn expm_hermitian_phase(h: &Operator, t: f64) -> Result<Operator> {
    expm_hermitian_phase_tol(h, t, Tolerances::default().herm_tol)
}

pub fn expm_hermitian_phase_tol(h: &Operator, t: f64, herm_tol: f64) -> Result<Operator> {
    let (vals, vecs) = hermitian_eigen(h, herm_tol)?;
    let d = h.dim();
    let mut phased = vecs.clone();
    for (col, &lambda) in vals.iter().enumerate() {
        let phase = C64::new(0.0, lambda * t).exp();
        for row in 0..d {
            phased[(row, col)] *= phase;
        }
    }
    let m = phased * vecs.adjoint();
    Operator::from_matrix(h.space.clone(), m)
}

/// Report produced by [`check_density`].
#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub herm_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub passes: bool,
}

/// Check the density-matrix conditions (Hermitian, unit trace, positive
/// semidefinite) and report the defects.
pub fn check_density(x: &Operator, tol: &Tolerances) -> DensityReport {
    let herm_defect = x.herm_defect();
    let trace_defect = (x.trace() - C64::new(1.0, 0.0)).norm();
    let min_eig = min_eigenvalue(x);
    DensityReport {
        herm_defect,
        trace_defect,
        min_eigenvalue: min_eig,
        passes: herm_defect <= tol.herm_tol
            && trace_defect <= tol.trace_tol
            && min_eig >= -tol.psd_tol,
    }
}

/// A checked density matrix: Hermitian, unit-trace, positive semidefinite
/// within the supplied tolerances.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator, tol: &Tolerances) -> Result<Self> {
        let report = check_density(&op, tol);
        if !report.passes {
            return Err(Error::InvalidDensity(format!(
                "herm defect {:.3e}, trace defect {:.3e}, min eigenvalue {:.3e}",
                report.herm_defect, report.trace_defect, report.min_eigenvalue
            )));
        }
        Ok(Self { op })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn pauli_x() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(0.0), cr(1.0)], vec![cr(1.0), cr(0.0)]],
    )
    .unwrap()
}

pub fn pauli_y() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), cr(0.0)]],
    )
    .unwrap()
}

pub fn pauli_z() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(1.0), cr(0.0)], vec![cr(0.0), cr(-1.0)]],
    )
    .unwrap()
}

/// Raising operator |0⟩⟨1| in the convention that |0⟩ is the excited state.
pub fn sigma_plus() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(0.0), cr(1.0)], vec![cr(0.0), cr(0.0)]],
    )
    .unwrap()
}

/// Lowering operator |1⟩⟨0|.
pub fn sigma_minus() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(0.0), cr(0.0)], vec![cr(1.0), cr(0.0)]],
    )
    .unwrap()
}

/// |+⟩⟨+| on a qubit.
pub fn plus_state() -> Operator {
    Operator::from_rows(
        HilbertSpace::qubit(),
        &[vec![cr(0.5), cr(0.5)], vec![cr(0.5), cr(0.5)]],
    )
    .unwrap()
}
