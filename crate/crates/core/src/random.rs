//! Seeded random operators and states for randomized test suites.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::operator::{normalize, CMatrix, Operator, StateK, C64};

pub type TestRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. complex Gaussian entries of standard deviation `scale`.
pub fn random_complex<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Operator {
    Operator::from_fn(dim, |_, _| gaussian_c64(rng) * scale)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Operator {
    random_complex(rng, dim, scale).hermitize()
}

/// Full-rank state `exp(-K)/Z` with `K` drawn from [`random_hermitian`].
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize, spread: f64) -> Result<StateK> {
    normalize(&random_hermitian(rng, dim, spread))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let g: CMatrix = DMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    Operator::from_matrix_unchecked(q)
}

/// Product of independent random single-qubit states.
pub fn random_product_state<R: Rng + ?Sized>(
    rng: &mut R,
    n_sites: usize,
    spread: f64,
) -> Result<StateK> {
    let mut k = random_hermitian(rng, 2, spread);
    for _ in 1..n_sites {
        let local = random_hermitian(rng, 2, spread);
        k = &k.kron(&Operator::identity(2)) + &Operator::identity(k.dim()).kron(&local);
    }
    normalize(&k)
}
