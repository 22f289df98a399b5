//! Deterministic, platform-independent sampling of operators and states.
//!
//! All randomness in the crate flows through [`SeededRng`], a ChaCha12 stream
//! keyed by a `u64` seed. Floating-point draws are derived from the raw
//! 64-bit output by fixed arithmetic, so a given seed produces bit-identical
//! results on every platform.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::operator::{hermitian_eigen, HilbertSpace, Operator, Tolerances};

/// ChaCha12-backed generator with uniform draws on `[-1, 1)`.
pub struct SeededRng {
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw on `[-1, 1)`: the top 53 bits of one `u64` scaled to
    /// `[0, 1)`, then shifted.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.inner.next_u64() >> 11;
        (bits as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
    }

    /// Complex draw with independent uniform real and imaginary parts.
    pub fn complex_uniform(&mut self) -> C64 {
        let re = self.uniform();
        let im = self.uniform();
        C64::new(re, im)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.uniform() + 1.0) * 0.5
    }

    /// Integer draw in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }
}

/// Dense operator with independent uniform complex entries.
pub fn random_operator(rng: &mut SeededRng, space: HilbertSpace) -> Operator {
    let d = space.total_dim();
    let m = DMatrix::from_fn(d, d, |_, _| rng.complex_uniform());
    Operator::from_matrix(space, m).unwrap()
}

/// Random Hermitian operator `(M + M†)/2`.
pub fn random_hermitian(rng: &mut SeededRng, space: HilbertSpace) -> Operator {
    let m = random_operator(rng, space);
    (&m + &m.dagger()).scale_re(0.5)
}

/// Random density matrix `G G† / tr{G G†}`.
pub fn random_density(rng: &mut SeededRng, space: HilbertSpace) -> Operator {
    let g = random_operator(rng, space);
    let p = &g * &g.dagger();
    let tr = p.trace().re;
    p.scale_re(1.0 / tr)
}

/// Random unitary: the eigenvector matrix of a random Hermitian operator.
pub fn random_unitary(rng: &mut SeededRng, space: HilbertSpace) -> Operator {
    let h = random_hermitian(rng, space.clone());
    let (_, vecs) = hermitian_eigen(&h, Tolerances::default().herm_tol * 10.0)
        .expect("symmetrized operator is Hermitian");
    Operator::from_matrix(space, vecs).unwrap()
}
