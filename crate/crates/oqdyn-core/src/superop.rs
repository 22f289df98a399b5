//! Superoperators: linear maps on operators.
//!
//! Two representations are supported and interchangeable below the dense
//! cap: a dense `d² × d²` matrix in the column-stacking vectorized basis,
//! and a matrix-free applicator. Under column stacking the map
//! `ρ ↦ A ρ B` has dense form `Bᵀ ⊗ A`; that convention is fixed here and
//! relied on everywhere else.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::{
    expm_hermitian_phase_tol, hermitian_eigen, HilbertSpace, Operator, Tolerances,
};

/// Largest operator dimension for which dense superoperator matrices
/// (side `d²`) are materialized.
pub const DENSE_DIM_CAP: usize = 32;

type ApplyFn = Arc<dyn Fn(&Operator) -> Operator + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Dense(DMatrix<C64>),
    Apply(ApplyFn),
}

/// Linear map on operators of side `dim`.
#[derive(Clone)]
pub struct SuperOperator {
    dim: usize,
    repr: Repr,
}

impl std::fmt::Debug for SuperOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.repr {
            Repr::Dense(_) => "dense",
            Repr::Apply(_) => "matrix-free",
        };
        write!(f, "SuperOperator {{ dim: {}, repr: {} }}", self.dim, kind)
    }
}

impl SuperOperator {
    /// Wrap a dense `d² × d²` matrix in the column-stacking basis.
    pub fn from_dense(matrix: DMatrix<C64>) -> Result<Self> {
        let side = matrix.nrows();
        if matrix.ncols() != side {
            return Err(Error::DimensionMismatch {
                context: "superoperator matrix must be square",
                expected: side,
                got: matrix.ncols(),
            });
        }
        let dim = (side as f64).sqrt().round() as usize;
        if dim * dim != side {
            return Err(Error::InvalidSpace(format!(
                "superoperator side {side} is not a perfect square"
            )));
        }
        Ok(Self {
            dim,
            repr: Repr::Dense(matrix),
        })
    }

    /// Wrap a matrix-free applicator. The closure must be linear and
    /// stateless; linearity is spot-checked by the test suite, not here.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&Operator) -> Operator + Send + Sync + 'static,
    {
        Self {
            dim,
            repr: Repr::Apply(Arc::new(f)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            repr: Repr::Dense(DMatrix::identity(dim * dim, dim * dim)),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            repr: Repr::Dense(DMatrix::zeros(dim * dim, dim * dim)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense(_))
    }

    /// Apply the map; the result keeps the input's space.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "superoperator applied to operator",
                expected: self.dim,
                got: x.dim(),
            });
        }
        match &self.repr {
            Repr::Dense(m) => {
                let y = m * x.vectorize();
                Operator::from_vectorized(x.space().clone(), &y)
            }
            Repr::Apply(f) => Ok(f(x)),
        }
    }

    /// Dense matrix of the map, materialized by basis application when the
    /// representation is matrix-free. Subject to [`DENSE_DIM_CAP`].
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        match &self.repr {
            Repr::Dense(m) => Ok(m.clone()),
            Repr::Apply(f) => {
                if self.dim > DENSE_DIM_CAP {
                    return Err(Error::DenseCapExceeded {
                        dim: self.dim,
                        cap: DENSE_DIM_CAP,
                    });
                }
                let d = self.dim;
                let space = HilbertSpace::single(d);
                let mut m = DMatrix::zeros(d * d, d * d);
                for j in 0..d {
                    for i in 0..d {
                        let col = j * d + i;
                        let unit = Operator::matrix_unit(space.clone(), i, j);
                        let out = f(&unit).vectorize();
                        m.set_column(col, &out);
                    }
                }
                Ok(m)
            }
        }
    }

    /// Adjoint with respect to the Hilbert-Schmidt inner product:
    /// `(X, S Y) = (S† X, Y)`.
    pub fn adjoint(&self) -> Result<SuperOperator> {
        let m = self.to_dense()?;
        SuperOperator::from_dense(m.adjoint())
    }

    /// Composition `self ∘ other`: `(self ∘ other)(X) = self(other(X))`.
    pub fn compose(&self, other: &SuperOperator) -> Result<SuperOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "superoperator composition",
                expected: self.dim,
                got: other.dim,
            });
        }
        match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => SuperOperator::from_dense(a * b),
            _ => {
                let a = self.clone();
                let b = other.clone();
                Ok(SuperOperator::from_fn(self.dim, move |x| {
                    a.apply(&b.apply(x).expect("dimension checked at composition"))
                        .expect("dimension checked at composition")
                }))
            }
        }
    }

    pub fn add(&self, other: &SuperOperator) -> Result<SuperOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "superoperator addition",
                expected: self.dim,
                got: other.dim,
            });
        }
        match (&self.repr, &other.repr) {
            (Repr::Dense(a), Repr::Dense(b)) => SuperOperator::from_dense(a + b),
            _ => {
                let a = self.clone();
                let b = other.clone();
                Ok(SuperOperator::from_fn(self.dim, move |x| {
                    let ya = a.apply(x).expect("dimension checked at addition");
                    let yb = b.apply(x).expect("dimension checked at addition");
                    ya + yb
                }))
            }
        }
    }

    pub fn scale(&self, factor: C64) -> SuperOperator {
        match &self.repr {
            Repr::Dense(m) => SuperOperator {
                dim: self.dim,
                repr: Repr::Dense(m.map(|z| z * factor)),
            },
            Repr::Apply(_) => {
                let inner = self.clone();
                SuperOperator::from_fn(self.dim, move |x| {
                    inner.apply(x).expect("same dimension").scale(factor)
                })
            }
        }
    }
}

/// Dense form of `ρ ↦ A ρ B` in the column-stacking basis: `Bᵀ ⊗ A`.
pub fn sandwich_dense(a: &Operator, b: &Operator) -> Result<DMatrix<C64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "sandwich factors",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let d = a.dim();
    let bt = b.matrix().transpose();
    let am = a.matrix();
    let mut m = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let w = bt[(i, j)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..d {
                for l in 0..d {
                    m[(i * d + k, j * d + l)] = w * am[(k, l)];
                }
            }
        }
    }
    Ok(m)
}

/// The Liouvillian `ρ ↦ -i [h, ρ]` for Hermitian `h` (matrix-free).
pub fn liouvillian(h: &Operator) -> Result<SuperOperator> {
    liouvillian_tol(h, Tolerances::default().herm_tol)
}

pub fn liouvillian_tol(h: &Operator, herm_tol: f64) -> Result<SuperOperator> {
    let defect = h.herm_defect();
    if defect > herm_tol {
        return Err(Error::NonHermitian {
            defect,
            tol: herm_tol,
        });
    }
    let h = h.clone();
    Ok(SuperOperator::from_fn(h.dim(), move |x| {
        h.commutator(x).scale(C64::new(0.0, -1.0))
    }))
}

/// Dense Liouvillian `-i (I ⊗ h - hᵀ ⊗ I)`.
pub fn liouvillian_dense(h: &Operator) -> Result<DMatrix<C64>> {
    let d = h.dim();
    if d > DENSE_DIM_CAP {
        return Err(Error::DenseCapExceeded {
            dim: d,
            cap: DENSE_DIM_CAP,
        });
    }
    let id = Operator::identity(h.space().clone());
    let left = sandwich_dense(h, &id)?;
    let right = sandwich_dense(&id, h)?;
    Ok((left - right).map(|z| z * C64::new(0.0, -1.0)))
}

/// Interaction-picture Hamiltonian `e^{i h0 t} h_i e^{-i h0 t}`.
pub fn interaction_hamiltonian(h_int: &Operator, h0: &Operator, t: f64) -> Result<Operator> {
    if h_int.dim() != h0.dim() {
        return Err(Error::DimensionMismatch {
            context: "interaction vs free Hamiltonian",
            expected: h0.dim(),
            got: h_int.dim(),
        });
    }
    let tol = Tolerances::default().herm_tol;
    let defect = h_int.herm_defect();
    if defect > tol {
        return Err(Error::NonHermitian { defect, tol });
    }
    let u = expm_hermitian_phase_tol(h0, t, tol)?;
    Ok(&(&u * h_int) * &u.dagger())
}

/// Interaction picture with the eigendecomposition of `h0` cached, so that
/// `h_at(t)` costs two matrix products per call.
#[derive(Clone)]
pub struct InteractionPicture {
    space: HilbertSpace,
    eigvals: Arc<Vec<f64>>,
    eigvecs: Arc<DMatrix<C64>>,
    /// `V† H_I V` precomputed in the `h0` eigenbasis.
    h_int_eigbasis: Arc<DMatrix<C64>>,
}

impl InteractionPicture {
    pub fn new(h0: &Operator, h_int: &Operator) -> Result<Self> {
        if h_int.dim() != h0.dim() {
            return Err(Error::DimensionMismatch {
                context: "interaction vs free Hamiltonian",
                expected: h0.dim(),
                got: h_int.dim(),
            });
        }
        let tol = Tolerances::default().herm_tol;
        let defect = h_int.herm_defect();
        if defect > tol {
            return Err(Error::NonHermitian { defect, tol });
        }
        let (vals, vecs) = hermitian_eigen(h0, tol)?;
        let in_basis = vecs.adjoint() * h_int.matrix() * &vecs;
        Ok(Self {
            space: h0.space().clone(),
            eigvals: Arc::new(vals),
            eigvecs: Arc::new(vecs),
            h_int_eigbasis: Arc::new(in_basis),
        })
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// `H_I(t) = e^{i h0 t} H_I e^{-i h0 t}`.
    pub fn h_at(&self, t: f64) -> Operator {
        let d = self.dim();
        let mut m = self.h_int_eigbasis.as_ref().clone();
        for i in 0..d {
            for j in 0..d {
                let phase = C64::new(0.0, (self.eigvals[i] - self.eigvals[j]) * t).exp();
                m[(i, j)] *= phase;
            }
        }
        let full = self.eigvecs.as_ref() * m * self.eigvecs.adjoint();
        Operator::from_matrix(self.space.clone(), full).expect("square by construction")
    }

    /// The interaction-picture Liouvillian as a time-dependent superoperator.
    pub fn liouvillian(&self) -> TimeDependentSuperOperator {
        let picture = self.clone();
        TimeDependentSuperOperator::from_fn(self.dim(), move |t| {
            let h = picture.h_at(t);
            let d = h.dim();
            SuperOperator::from_fn(d, move |x| h.commutator(x).scale(C64::new(0.0, -1.0)))
        })
    }
}

type GeneratorFn = Arc<dyn Fn(f64) -> SuperOperator + Send + Sync>;

/// A family `t ↦ S(t)` of superoperators; evaluation must be a pure
/// function of `t`.
#[derive(Clone)]
pub struct TimeDependentSuperOperator {
    dim: usize,
    gen: GeneratorFn,
}

impl TimeDependentSuperOperator {
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> SuperOperator + Send + Sync + 'static,
    {
        Self {
            dim,
            gen: Arc::new(f),
        }
    }

    /// Constant-in-time family.
    pub fn constant(s: SuperOperator) -> Self {
        let dim = s.dim();
        Self::from_fn(dim, move |_| s.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: f64) -> SuperOperator {
        (self.gen)(t)
    }
}

/// Matrix exponential of a dense superoperator matrix.
pub fn expm_dense(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.exp()
}

/// Time-ordered exponential `T exp[∫_{t0}^{t1} L(s) ds]`, approximated by an
/// ordered product of midpoint-sampled factor exponentials (second-order
/// accurate in the step size). Later factors multiply from the left.
pub fn time_ordered_exp(
    l: &TimeDependentSuperOperator,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<SuperOperator> {
    if t1 < t0 {
        return Err(Error::InvalidGrid(format!(
            "time-ordered exponential needs t1 >= t0 (got {t0} > {t1})"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidGrid("steps must be >= 1".into()));
    }
    let d = l.dim();
    if d > DENSE_DIM_CAP {
        return Err(Error::DenseCapExceeded {
            dim: d,
            cap: DENSE_DIM_CAP,
        });
    }
    let side = d * d;
    let mut u = DMatrix::<C64>::identity(side, side);
    if t1 == t0 {
        return SuperOperator::from_dense(u);
    }
    let h = (t1 - t0) / steps as f64;
    for k in 0..steps {
        let s = t0 + (k as f64 + 0.5) * h;
        let gen = l.at(s).to_dense()?;
        let factor = expm_dense(&gen.map(|z| z * C64::new(h, 0.0)));
        u = factor * u;
    }
    SuperOperator::from_dense(u)
}

/// Choi matrix `Σ_ij Φ(E_ij) ⊗ E_ij` of a map on operators of side `d`;
/// the map is completely positive iff this `d² × d²` matrix is positive
/// semidefinite.
pub fn choi_matrix(s: &SuperOperator) -> Result<DMatrix<C64>> {
    let d = s.dim();
    if d > DENSE_DIM_CAP {
        return Err(Error::DenseCapExceeded {
            dim: d,
            cap: DENSE_DIM_CAP,
        });
    }
    let space = HilbertSpace::single(d);
    let mut choi = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let image = s.apply(&Operator::matrix_unit(space.clone(), i, j))?;
            for k in 0..d {
                for l in 0..d {
                    choi[(k * d + i, l * d + j)] += image.entry(k, l);
                }
            }
        }
    }
    Ok(choi)
}
