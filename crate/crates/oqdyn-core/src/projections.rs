//! Product-state and correlated projection superoperators.
//!
//! A correlated projection is described by operator families `{A_i}`, `{B_i}`
//! on the environment space, acting as `ρ ↦ Σ_i tr_env{A_i ρ} ⊗ B_i`. The
//! families must satisfy a duality relation (`tr{B_i A_j} = δ_ij`), a
//! trace-preservation condition, and a complete-positivity condition;
//! [`CorrelatedProjection::validate`] reports the defects and
//! [`CorrelatedProjection::into_validated`] returns the token type that
//! solvers require. Solvers additionally restrict to the positive form
//! (`A_i ≥ 0`, `B_i ≥ 0`, `tr B_i = 1`, `Σ A_i = I`), under which the
//! projection maps states to separable states.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{
    hermitian_eigen, hs_inner, min_eigenvalue, tensor, DensityMatrix, HilbertSpace, Operator,
    Tolerances,
};
use crate::random::{random_density, SeededRng};

/// Defect threshold for the projection-family conditions.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Gram condition number above which linear independence is flagged.
pub const GRAM_COND_WARN: f64 = 1e8;
/// Relative eigenvalue floor below which a Gram matrix counts as singular.
const GRAM_SINGULAR_REL: f64 = 1e-13;
/// Threshold for the conservation-law defect.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// Projection onto an uncorrelated product state with a fixed environment
/// reference state: `ρ ↦ (tr_env ρ) ⊗ ρ0`.
#[derive(Debug, Clone)]
pub struct ProductProjection {
    rho0: DensityMatrix,
    split: usize,
}

impl ProductProjection {
    pub fn new(rho0: DensityMatrix, split: usize) -> Self {
        Self { rho0, split }
    }

    pub fn rho0(&self) -> &Operator {
        self.rho0.op()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn env_dim(&self) -> usize {
        self.rho0.op().dim()
    }

    /// `(tr_env ρ) ⊗ ρ0`.
    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let (d_sys, d_env, sys_space) = split_dims_for(rho, self.env_dim(), self.split)?;
        let identity = Operator::identity(HilbertSpace::single(d_env));
        let reduced = extract_block(rho, d_sys, d_env, &identity, sys_space)?;
        Ok(tensor(&reduced, self.rho0.op()))
    }

    /// `ρ - P ρ`.
    pub fn complementary(&self, rho: &Operator) -> Result<Operator> {
        Ok(rho - &self.apply(rho)?)
    }
}

/// Operator families defining a correlated projection superoperator.
#[derive(Debug, Clone)]
pub struct CorrelatedProjection {
    a_ops: Vec<Operator>,
    b_ops: Vec<Operator>,
    split: usize,
}

/// Validation report for the correlated-projection conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionValidation {
    pub rank: usize,
    /// Worst Hermiticity defect over all `A_i` and `B_i`.
    pub herm_defect: f64,
    /// `max_ij |tr{B_i A_j} - δ_ij|`.
    pub duality_defect: f64,
    /// `‖Σ_i (tr B_i) A_i - I‖_max`.
    pub trace_preservation_defect: f64,
    /// Minimum eigenvalue of `Σ_i A_iᵀ ⊗ B_i` (complete positivity).
    pub positivity_min_eigenvalue: f64,
    /// Gram condition numbers of the `{A_i}` and `{B_i}` families.
    pub gram_condition_a: f64,
    pub gram_condition_b: f64,
    pub gram_singular: bool,
    pub gram_warning: bool,
    /// Whether the restricted positive form holds
    /// (`A_i ≥ 0`, `B_i ≥ 0`, `tr B_i = 1`, `Σ A_i = I`).
    pub restricted_positive_form: bool,
    pub duality_ok: bool,
    pub trace_preservation_ok: bool,
    pub positivity_ok: bool,
    pub passes: bool,
}

impl CorrelatedProjection {
    pub fn new(a_ops: Vec<Operator>, b_ops: Vec<Operator>, split: usize) -> Result<Self> {
        if a_ops.is_empty() {
            return Err(Error::InvalidProjection(
                "projection needs at least one operator pair".into(),
            ));
        }
        if a_ops.len() != b_ops.len() {
            return Err(Error::InvalidProjection(format!(
                "family sizes differ: {} A operators vs {} B operators",
                a_ops.len(),
                b_ops.len()
            )));
        }
        let d = a_ops[0].dim();
        for op in a_ops.iter().chain(b_ops.iter()) {
            if op.dim() != d {
                return Err(Error::DimensionMismatch {
                    context: "projection operator family",
                    expected: d,
                    got: op.dim(),
                });
            }
        }
        Ok(Self {
            a_ops,
            b_ops,
            split,
        })
    }

    pub fn rank(&self) -> usize {
        self.a_ops.len()
    }

    pub fn env_dim(&self) -> usize {
        self.a_ops[0].dim()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn a_ops(&self) -> &[Operator] {
        &self.a_ops
    }

    pub fn b_ops(&self) -> &[Operator] {
        &self.b_ops
    }

    /// Check the projection-family conditions and report every defect.
    pub fn validate(&self) -> ProjectionValidation {
        let n = self.rank();
        let d_env = self.env_dim();

        let herm_defect = self
            .a_ops
            .iter()
            .chain(self.b_ops.iter())
            .map(|op| op.herm_defect())
            .fold(0.0, f64::max);

        // Duality tr{B_i A_j} = δ_ij.
        let mut duality_defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = (&self.b_ops[i] * &self.a_ops[j]).trace();
                let target = if i == j { 1.0 } else { 0.0 };
                duality_defect = duality_defect.max((v - C64::new(target, 0.0)).norm());
            }
        }

        // Trace preservation Σ (tr B_i) A_i = I.
        let mut weighted = Operator::zeros(HilbertSpace::single(d_env));
        for (a, b) in self.a_ops.iter().zip(self.b_ops.iter()) {
            weighted = weighted + a.scale(b.trace());
        }
        let trace_preservation_defect =
            (&weighted - &Operator::identity(HilbertSpace::single(d_env))).max_norm();

        // Complete positivity: Σ A_iᵀ ⊗ B_i ≥ 0.
        let mut choi_like = Operator::zeros(HilbertSpace::new(vec![d_env, d_env]).unwrap());
        for (a, b) in self.a_ops.iter().zip(self.b_ops.iter()) {
            choi_like = choi_like + tensor(&a.transpose(), b);
        }
        let positivity_min_eigenvalue = min_eigenvalue(&choi_like);

        let (gram_condition_a, singular_a) = gram_condition(&self.a_ops);
        let (gram_condition_b, singular_b) = gram_condition(&self.b_ops);
        let gram_singular = singular_a || singular_b;
        let gram_warning =
            gram_condition_a > GRAM_COND_WARN || gram_condition_b > GRAM_COND_WARN;

        let restricted_positive_form = {
            let a_pos = self
                .a_ops
                .iter()
                .all(|a| min_eigenvalue(a) >= -PROJECTION_TOL);
            let b_pos = self
                .b_ops
                .iter()
                .all(|b| min_eigenvalue(b) >= -PROJECTION_TOL);
            let b_unit = self
                .b_ops
                .iter()
                .all(|b| (b.trace() - C64::new(1.0, 0.0)).norm() <= PROJECTION_TOL);
            let a_sum = {
                let mut s = Operator::zeros(HilbertSpace::single(d_env));
                for a in &self.a_ops {
                    s = s + a.clone();
                }
                (&s - &Operator::identity(HilbertSpace::single(d_env))).max_norm()
                    <= PROJECTION_TOL
            };
            a_pos && b_pos && b_unit && a_sum
        };

        let duality_ok = duality_defect <= PROJECTION_TOL;
        let trace_preservation_ok = trace_preservation_defect <= PROJECTION_TOL;
        let positivity_ok = positivity_min_eigenvalue >= -PROJECTION_TOL;
        let herm_ok = herm_defect <= PROJECTION_TOL;
        let passes =
            duality_ok && trace_preservation_ok && positivity_ok && herm_ok && !gram_singular;

        ProjectionValidation {
            rank: n,
            herm_defect,
            duality_defect,
            trace_preservation_defect,
            positivity_min_eigenvalue,
            gram_condition_a,
            gram_condition_b,
            gram_singular,
            gram_warning,
            restricted_positive_form,
            duality_ok,
            trace_preservation_ok,
            positivity_ok,
            passes,
        }
    }

    /// Validate and, on success, return the token type accepted by solvers.
    pub fn into_validated(self) -> Result<ValidatedProjection> {
        let validation = self.validate();
        if !validation.passes {
            return Err(Error::InvalidProjection(format!(
                "validation failed: duality defect {:.3e}, trace defect {:.3e}, \
                 min eigenvalue {:.3e}, Hermiticity defect {:.3e}, gram singular {}",
                validation.duality_defect,
                validation.trace_preservation_defect,
                validation.positivity_min_eigenvalue,
                validation.herm_defect,
                validation.gram_singular,
            )));
        }
        Ok(ValidatedProjection {
            a_ops: self.a_ops,
            b_ops: self.b_ops,
            split: self.split,
            validation,
        })
    }
}

/// A correlated projection that has passed validation. Solvers take this
/// type instead of re-checking the family conditions per step.
#[derive(Debug, Clone)]
pub struct ValidatedProjection {
    a_ops: Vec<Operator>,
    b_ops: Vec<Operator>,
    split: usize,
    validation: ProjectionValidation,
}

impl ValidatedProjection {
    /// View a product projection as the rank-1 correlated family
    /// `A = I_env`, `B = ρ0`.
    pub fn from_product(p: &ProductProjection) -> Self {
        let d_env = p.env_dim();
        let proj = CorrelatedProjection::new(
            vec![Operator::identity(HilbertSpace::single(d_env))],
            vec![p.rho0().clone()],
            p.split(),
        )
        .expect("rank-1 family is well-formed");
        proj.into_validated()
            .expect("identity/reference-state pair always validates")
    }

    pub fn rank(&self) -> usize {
        self.a_ops.len()
    }

    pub fn env_dim(&self) -> usize {
        self.a_ops[0].dim()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn a_ops(&self) -> &[Operator] {
        &self.a_ops
    }

    pub fn b_ops(&self) -> &[Operator] {
        &self.b_ops
    }

    pub fn report(&self) -> &ProjectionValidation {
        &self.validation
    }

    /// Whether the restricted positive form holds; solvers require it.
    pub fn is_restricted_positive(&self) -> bool {
        self.validation.restricted_positive_form
    }

    /// The relevant states `ρ_i = tr_env{A_i ρ}`.
    pub fn relevant_states(&self, rho: &Operator) -> Result<Vec<Operator>> {
        let (d_sys, d_env, sys_space) = split_dims_for(rho, self.env_dim(), self.split)?;
        self.a_ops
            .iter()
            .map(|a| extract_block(rho, d_sys, d_env, a, sys_space.clone()))
            .collect()
    }

    /// `Σ_i ρ_i ⊗ B_i` from a list of system blocks.
    pub fn inject(&self, blocks: &[Operator]) -> Result<Operator> {
        if blocks.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                context: "block count vs projection rank",
                expected: self.rank(),
                got: blocks.len(),
            });
        }
        let mut out = tensor(&blocks[0], &self.b_ops[0]);
        for (block, b) in blocks.iter().zip(self.b_ops.iter()).skip(1) {
            if block.dim() != blocks[0].dim() {
                return Err(Error::DimensionMismatch {
                    context: "block dimensions",
                    expected: blocks[0].dim(),
                    got: block.dim(),
                });
            }
            out = out + tensor(block, b);
        }
        Ok(out)
    }

    /// The projection `P ρ = Σ_i tr_env{A_i ρ} ⊗ B_i`.
    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        let blocks = self.relevant_states(rho)?;
        self.inject(&blocks)
    }

    /// The complementary projection `Q ρ = ρ - P ρ`.
    pub fn complementary(&self, rho: &Operator) -> Result<Operator> {
        Ok(rho - &self.apply(rho)?)
    }

    /// Adjoint application `P† X = Σ_i tr_env{B_i X} ⊗ A_i`.
    pub fn adjoint_apply(&self, x: &Operator) -> Result<Operator> {
        let (d_sys, d_env, sys_space) = split_dims_for(x, self.env_dim(), self.split)?;
        let mut out: Option<Operator> = None;
        for (a, b) in self.a_ops.iter().zip(self.b_ops.iter()) {
            let reduced = extract_block(x, d_sys, d_env, b, sys_space.clone())?;
            let term = tensor(&reduced, a);
            out = Some(match out {
                Some(acc) => acc + term,
                None => term,
            });
        }
        Ok(out.expect("rank >= 1"))
    }

    /// Build a correlated initial state `ρ(0) = Σ_i ρ_i ⊗ B_i` from positive
    /// blocks with total trace one; the result is a fixed point of the
    /// projection.
    pub fn assemble_initial_state(
        &self,
        blocks: &[Operator],
        tol: &Tolerances,
    ) -> Result<Operator> {
        if blocks.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                context: "block count vs projection rank",
                expected: self.rank(),
                got: blocks.len(),
            });
        }
        let mut total_trace = 0.0;
        for (i, block) in blocks.iter().enumerate() {
            let herm = block.herm_defect();
            if herm > tol.herm_tol {
                return Err(Error::InvalidDensity(format!(
                    "block {i} is not Hermitian (defect {herm:.3e})"
                )));
            }
            let min_eig = min_eigenvalue(block);
            if min_eig < -tol.psd_tol {
                return Err(Error::InvalidDensity(format!(
                    "block {i} has negative eigenvalue {min_eig:.3e}"
                )));
            }
            total_trace += block.trace().re;
        }
        if (total_trace - 1.0).abs() > tol.trace_tol {
            return Err(Error::InvalidDensity(format!(
                "block traces sum to {total_trace}, expected 1"
            )));
        }
        self.inject(blocks)
    }

    /// Check compatibility with a conserved quantity: `P† C = C`, plus a
    /// sampled check of `tr{C P ρ} = tr{C ρ}`.
    pub fn conservation_check(&self, c: &Operator) -> Result<ConservationReport> {
        let tol = Tolerances::default();
        let defect = c.herm_defect();
        if defect > tol.herm_tol {
            return Err(Error::NonHermitian {
                defect,
                tol: tol.herm_tol,
            });
        }
        let projected = self.adjoint_apply(c)?;
        let adjoint_defect = (&projected - c).max_norm();

        let mut rng = SeededRng::new(0x5eed_c0de);
        let space = HilbertSpace::new(vec![c.dim() / self.env_dim(), self.env_dim()])?;
        let mut sampled_trace_defect: f64 = 0.0;
        for _ in 0..8 {
            let rho = random_density(&mut rng, space.clone());
            let lhs = hs_inner(c, &self.apply(&rho)?)?;
            let rhs = hs_inner(c, &rho)?;
            sampled_trace_defect = sampled_trace_defect.max((lhs - rhs).norm());
        }

        Ok(ConservationReport {
            adjoint_defect,
            sampled_trace_defect,
            passes: adjoint_defect <= CONSERVATION_TOL,
        })
    }
}

/// Report of [`ValidatedProjection::conservation_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    /// `‖P† C - C‖_max`.
    pub adjoint_defect: f64,
    /// Worst `|tr{C P ρ} - tr{C ρ}|` over sampled states.
    pub sampled_trace_defect: f64,
    pub passes: bool,
}

/// Dimensions and system space for applying a projection with environment
/// dimension `d_env` to `rho`. Falls back to a single-factor system space
/// when `rho`'s factor list does not expose the split.
fn split_dims_for(
    rho: &Operator,
    d_env: usize,
    split: usize,
) -> Result<(usize, usize, HilbertSpace)> {
    let d = rho.dim();
    if d % d_env != 0 {
        return Err(Error::DimensionMismatch {
            context: "state dimension vs projection environment dimension",
            expected: d_env,
            got: d,
        });
    }
    let d_sys = d / d_env;
    if let Ok((s, e)) = rho.space().split_dims(split) {
        if e == d_env && s == d_sys {
            return Ok((d_sys, d_env, rho.space().system_part(split)?));
        }
    }
    Ok((d_sys, d_env, HilbertSpace::single(d_sys)))
}

/// `tr_env{(I ⊗ w) rho}` by direct index summation on the `(d_sys, d_env)`
/// split.
fn extract_block(
    rho: &Operator,
    d_sys: usize,
    d_env: usize,
    w: &Operator,
    sys_space: HilbertSpace,
) -> Result<Operator> {
    let mut m = nalgebra::DMatrix::zeros(d_sys, d_sys);
    for k in 0..d_env {
        for l in 0..d_env {
            let weight = w.entry(k, l);
            if weight == C64::new(0.0, 0.0) {
                continue;
            }
            for a in 0..d_sys {
                for b in 0..d_sys {
                    m[(a, b)] += weight * rho.entry(a * d_env + l, b * d_env + k);
                }
            }
        }
    }
    Operator::from_matrix(sys_space, m)
}

/// Condition number of the Gram matrix `G_ij = (X_i, X_j)` of an operator
/// family, and whether it is numerically singular.
fn gram_condition(ops: &[Operator]) -> (f64, bool) {
    let n = ops.len();
    let mut gm = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gm[(i, j)] = hs_inner(&ops[i], &ops[j]).expect("same space");
        }
    }
    let g = Operator::from_matrix(HilbertSpace::single(n), gm).unwrap();
    let (vals, _) = hermitian_eigen(&g, 1e-8).expect("gram matrix is Hermitian");
    let max = vals[n - 1].abs();
    let min = vals[0];
    if min <= max * GRAM_SINGULAR_REL {
        (f64::INFINITY, true)
    } else {
        (max / min, false)
    }
}

/// Random valid restricted-form family: unitarily rotated orthogonal
/// projectors with random block states supported on each subspace. Used by
/// the test suites; deterministic for a fixed generator state.
pub fn random_valid_projection(
    rng: &mut SeededRng,
    d_env: usize,
    rank: usize,
) -> CorrelatedProjection {
    assert!(rank >= 1 && rank <= d_env);
    // Random partition of the levels into `rank` nonempty groups.
    let mut sizes = vec![1usize; rank];
    for _ in 0..(d_env - rank) {
        let k = rng.index(rank);
        sizes[k] += 1;
    }
    let u = crate::random::random_unitary(rng, HilbertSpace::single(d_env));
    let mut a_ops = Vec::new();
    let mut b_ops = Vec::new();
    let mut offset = 0;
    for &size in &sizes {
        let diag: Vec<f64> = (0..d_env)
            .map(|i| {
                if i >= offset && i < offset + size {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let pi_diag = Operator::from_real_diagonal(HilbertSpace::single(d_env), &diag).unwrap();
        let pi = &(&u * &pi_diag) * &u.dagger();
        // Random density supported inside the subspace: Π G G† Π, normalized.
        let g = crate::random::random_operator(rng, HilbertSpace::single(d_env));
        let inside = &(&pi * &(&g * &g.dagger())) * &pi;
        let b = inside.scale_re(1.0 / inside.trace().re);
        a_ops.push(pi);
        b_ops.push(b);
        offset += size;
    }
    CorrelatedProjection::new(a_ops, b_ops, 0).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{check_density, cr, partial_trace_env, pauli_z};
    use crate::random::{random_hermitian, random_operator};
    use proptest::prelude::*;

    fn env_identity(d: usize) -> Operator {
        Operator::identity(HilbertSpace::single(d))
    }

    /// Two-band family on a `d_env`-dimensional environment: orthogonal
    /// projectors onto the first `k` and remaining levels.
    fn band_family(d_env: usize, k: usize) -> (Vec<Operator>, Vec<Operator>) {
        let space = HilbertSpace::single(d_env);
        let diag1: Vec<f64> = (0..d_env).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
        let diag2: Vec<f64> = (0..d_env).map(|i| if i < k { 0.0 } else { 1.0 }).collect();
        let p1 = Operator::from_real_diagonal(space.clone(), &diag1).unwrap();
        let p2 = Operator::from_real_diagonal(space, &diag2).unwrap();
        let a = vec![p1.clone(), p2.clone()];
        let b = vec![
            p1.scale_re(1.0 / k as f64),
            p2.scale_re(1.0 / (d_env - k) as f64),
        ];
        (a, b)
    }

    fn product_projection(d_env: usize, rng: &mut SeededRng) -> ProductProjection {
        let rho0 = random_density(rng, HilbertSpace::single(d_env));
        ProductProjection::new(DensityMatrix::new(rho0, &Tolerances::default()).unwrap(), 0)
    }

    #[test]
    fn product_projection_fixes_product_states() {
        let mut rng = SeededRng::new(1);
        let p = product_projection(3, &mut rng);
        let rho_s = random_density(&mut rng, HilbertSpace::single(2));
        let joint = tensor(&rho_s, p.rho0());
        let projected = p.apply(&joint).unwrap();
        assert!((&projected - &joint).max_norm() < 1e-13);
    }

    #[test]
    fn product_projection_on_bell_state() {
        let space = HilbertSpace::new(vec![2, 2]).unwrap();
        let mut m = nalgebra::DMatrix::zeros(4, 4);
        for &i in &[0usize, 3] {
            for &j in &[0usize, 3] {
                m[(i, j)] = cr(0.5);
            }
        }
        let bell = Operator::from_matrix(space, m).unwrap();
        let rho0 = env_identity(2).scale_re(0.5);
        let p = ProductProjection::new(
            DensityMatrix::new(rho0.clone(), &Tolerances::default()).unwrap(),
            0,
        );
        let projected = p.apply(&bell).unwrap();
        let expect = tensor(&env_identity(2).scale_re(0.5), &rho0);
        assert!((&projected - &expect).max_norm() < 1e-14);
    }

    #[test]
    fn product_projection_idempotent_and_trace_preserving() {
        let mut rng = SeededRng::new(2);
        let p = product_projection(4, &mut rng);
        let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 4]).unwrap());
        let once = p.apply(&rho).unwrap();
        let twice = p.apply(&once).unwrap();
        assert!((once.trace() - rho.trace()).norm() < 1e-12);
        assert!((&twice - &once).max_norm() < 1e-12);
    }

    #[test]
    fn correlated_rank_one_reduces_to_product() {
        let mut rng = SeededRng::new(3);
        let p = product_projection(4, &mut rng);
        let validated = ValidatedProjection::from_product(&p);
        let rho = random_operator(&mut rng, HilbertSpace::new(vec![2, 4]).unwrap());
        let via_product = p.apply(&rho).unwrap();
        let via_correlated = validated.apply(&rho).unwrap();
        assert!((&via_product - &via_correlated).max_norm() < 1e-13);
    }

    #[test]
    fn correlated_projection_fixes_assembled_states() {
        let (a, b) = band_family(8, 3);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(4);
        let blocks = vec![
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.6),
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.4),
        ];
        let rho = proj.inject(&blocks).unwrap();
        let projected = proj.apply(&rho).unwrap();
        assert!((&projected - &rho).max_norm() < 1e-12);
    }

    #[test]
    fn correlated_projection_preserves_trace_and_positivity() {
        let (a, b) = band_family(8, 4);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(5);
        let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 8]).unwrap());
        let projected = proj.apply(&rho).unwrap();
        assert!((projected.trace() - rho.trace()).norm() < 1e-12);
        assert!(min_eigenvalue(&projected) >= -1e-12);
        let twice = proj.apply(&projected).unwrap();
        assert!((&twice - &projected).max_norm() < 1e-11);
    }

    #[test]
    fn validation_accepts_reference_pair() {
        let mut rng = SeededRng::new(6);
        let rho0 = random_density(&mut rng, HilbertSpace::single(3));
        let proj = CorrelatedProjection::new(vec![env_identity(3)], vec![rho0], 0).unwrap();
        let report = proj.validate();
        assert!(report.passes, "{report:?}");
        assert!(report.restricted_positive_form);
    }

    #[test]
    fn validation_accepts_band_projectors() {
        let (a, b) = band_family(6, 2);
        let report = CorrelatedProjection::new(a, b, 0).unwrap().validate();
        assert!(report.passes, "{report:?}");
        assert!(report.duality_defect < 1e-14);
        assert!(report.restricted_positive_form);
    }

    #[test]
    fn validation_flags_non_unit_trace_b() {
        // Scaling B breaks trace preservation Σ (tr B_i) A_i = I.
        let (a, mut b) = band_family(6, 2);
        b[0] = b[0].scale_re(2.0);
        let report = CorrelatedProjection::new(a, b, 0).unwrap().validate();
        assert!(!report.trace_preservation_ok);
        assert!(!report.passes);
    }

    #[test]
    fn validation_flags_dependent_families() {
        let (mut a, mut b) = band_family(6, 3);
        a[1] = a[0].clone();
        b[1] = b[0].clone();
        let report = CorrelatedProjection::new(a, b, 0).unwrap().validate();
        assert!(report.gram_singular);
        assert!(!report.passes);
    }

    #[test]
    fn complementary_annihilates_fixed_points() {
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(7);
        let blocks = vec![
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.5),
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.5),
        ];
        let rho = proj.inject(&blocks).unwrap();
        assert!(proj.complementary(&rho).unwrap().max_norm() < 1e-12);

        let arbitrary = random_operator(&mut rng, HilbertSpace::new(vec![2, 6]).unwrap());
        let q = proj.complementary(&arbitrary).unwrap();
        assert!(proj.apply(&q).unwrap().max_norm() < 1e-11);
        assert!(q.trace().norm() < 1e-12);
    }

    #[test]
    fn relevant_states_of_product_state() {
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a.clone(), b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(8);
        let rho_s = random_density(&mut rng, HilbertSpace::qubit());
        let rho0 = random_density(&mut rng, HilbertSpace::single(6));
        let joint = tensor(&rho_s, &rho0);
        let blocks = proj.relevant_states(&joint).unwrap();
        for (block, a_op) in blocks.iter().zip(a.iter()) {
            let weight = (a_op * &rho0).trace();
            let expect = rho_s.scale(weight);
            assert!((block - &expect).max_norm() < 1e-12);
        }
    }

    #[test]
    fn relevant_states_normalization_and_positivity() {
        let (a, b) = band_family(8, 3);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(9);
        let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 8]).unwrap());
        let blocks = proj.relevant_states(&rho).unwrap();
        let total: f64 = blocks.iter().map(|bk| bk.trace().re).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for block in &blocks {
            assert!(min_eigenvalue(block) >= -1e-10);
        }
    }

    #[test]
    fn assemble_round_trip() {
        let (a, b) = band_family(8, 3);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(10);
        let blocks = vec![
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.7),
            random_density(&mut rng, HilbertSpace::qubit()).scale_re(0.3),
        ];
        let tol = Tolerances::default();
        let rho0 = proj.assemble_initial_state(&blocks, &tol).unwrap();
        assert!(check_density(&rho0, &tol).passes);
        assert!((&proj.apply(&rho0).unwrap() - &rho0).max_norm() < 1e-11);
        let recovered = proj.relevant_states(&rho0).unwrap();
        for (orig, rec) in blocks.iter().zip(recovered.iter()) {
            assert!((orig - rec).max_norm() < 1e-12);
        }
    }

    #[test]
    fn assemble_rejects_bad_blocks() {
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let tol = Tolerances::default();
        let negative =
            Operator::from_real_diagonal(HilbertSpace::qubit(), &[0.8, -0.3]).unwrap();
        let ok = Operator::from_real_diagonal(HilbertSpace::qubit(), &[0.5, 0.0]).unwrap();
        assert!(proj
            .assemble_initial_state(&[negative, ok.clone()], &tol)
            .is_err());
        // Traces summing to 0.9 must be rejected.
        let small = Operator::from_real_diagonal(HilbertSpace::qubit(), &[0.4, 0.0]).unwrap();
        assert!(proj.assemble_initial_state(&[ok, small], &tol).is_err());
    }

    #[test]
    fn assemble_rank_one_is_tensor_product() {
        let mut rng = SeededRng::new(11);
        let p = product_projection(4, &mut rng);
        let validated = ValidatedProjection::from_product(&p);
        let rho_s = random_density(&mut rng, HilbertSpace::qubit());
        let tol = Tolerances::default();
        let rho = validated
            .assemble_initial_state(std::slice::from_ref(&rho_s), &tol)
            .unwrap();
        assert!((&rho - &tensor(&rho_s, p.rho0())).max_norm() < 1e-14);
    }

    #[test]
    fn conservation_check_accepts_identity() {
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let c = Operator::identity(HilbertSpace::new(vec![2, 6]).unwrap());
        let report = proj.conservation_check(&c).unwrap();
        assert!(report.passes, "{report:?}");
        assert!(report.adjoint_defect < 1e-12);
    }

    #[test]
    fn conservation_check_band_weighted_observable() {
        // C = σ_z ⊗ I + I ⊗ (c_1 Π_1 + c_2 Π_2) is invariant under the
        // adjoint of the band projection.
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a.clone(), b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let c = tensor(&pauli_z(), &env_identity(6))
            + tensor(
                &Operator::identity(HilbertSpace::qubit()),
                &(a[0].scale_re(1.5) + a[1].scale_re(-0.5)),
            );
        let report = proj.conservation_check(&c).unwrap();
        assert!(report.passes, "{report:?}");
    }

    #[test]
    fn conservation_check_rejects_entangling_observable() {
        let (a, b) = band_family(6, 2);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(12);
        let c = random_hermitian(&mut rng, HilbertSpace::new(vec![2, 6]).unwrap());
        let report = proj.conservation_check(&c).unwrap();
        assert!(!report.passes);
        assert!(report.adjoint_defect > 1e-3);
    }

    #[test]
    fn reduced_state_unchanged_by_projection() {
        // tr_env{P ρ} = tr_env{ρ}: the projection keeps all information
        // needed to reconstruct the reduced state.
        let (a, b) = band_family(8, 3);
        let proj = CorrelatedProjection::new(a, b, 0)
            .unwrap()
            .into_validated()
            .unwrap();
        let mut rng = SeededRng::new(13);
        let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 8]).unwrap());
        let projected = proj.apply(&rho).unwrap();
        let before = partial_trace_env(&rho, 0).unwrap();
        let after = partial_trace_env(&projected, 0).unwrap();
        assert!((&before - &after).max_norm() < 1e-12);
    }

    #[test]
    fn random_valid_projections_validate() {
        let mut rng = SeededRng::new(14);
        for &(d_env, rank) in &[(4usize, 2usize), (6, 3), (8, 1)] {
            let proj = random_valid_projection(&mut rng, d_env, rank);
            let report = proj.validate();
            assert!(report.passes, "d_env={d_env} rank={rank}: {report:?}");
            assert!(report.restricted_positive_form);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn prop_projection_idempotent(seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let proj = random_valid_projection(&mut rng, 6, 2)
                .into_validated()
                .unwrap();
            let rho = random_operator(&mut rng, HilbertSpace::new(vec![2, 6]).unwrap());
            let once = proj.apply(&rho).unwrap();
            let twice = proj.apply(&once).unwrap();
            prop_assert!((&twice - &once).max_norm() <= 1e-11);
        }

        #[test]
        fn prop_projection_positive_on_states(seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let proj = random_valid_projection(&mut rng, 4, 2)
                .into_validated()
                .unwrap();
            let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 4]).unwrap());
            let projected = proj.apply(&rho).unwrap();
            prop_assert!(min_eigenvalue(&projected) >= -1e-9);
            prop_assert!((projected.trace() - rho.trace()).norm() <= 1e-12);
        }

        #[test]
        fn prop_separable_output_round_trips(seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let proj = random_valid_projection(&mut rng, 6, 3)
                .into_validated()
                .unwrap();
            let rho = random_density(&mut rng, HilbertSpace::new(vec![2, 6]).unwrap());
            let projected = proj.apply(&rho).unwrap();
            let blocks = proj.relevant_states(&projected).unwrap();
            let rebuilt = proj.inject(&blocks).unwrap();
            prop_assert!((&rebuilt - &projected).max_norm() <= 1e-12);
        }
    }
}
