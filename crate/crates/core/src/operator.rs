//! Dense complex operators, Hermitian spectral decomposition and states in
//! log-representation.
//!
//! Every matrix function (exponential, logarithm, fractional powers) is
//! evaluated through a full Hermitian eigendecomposition. A [`StateK`] keeps
//! its decomposition so that geometries built on it never re-diagonalize.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Absolute tolerance on `|A_ij - conj(A_ji)|` for an operator to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Smallest eigenvalue accepted by [`logm_posdef`].
pub const EIGENVALUE_FLOOR: f64 = 1e-300;

/// Default cap on the Hilbert-space dimension of embedded operators.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A square complex matrix acting on a finite-dimensional Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: CMatrix,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({}x{}){}", self.dim(), self.dim(), self.m)
    }
}

impl Operator {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "operator dimension must be >= 1".into(),
            ));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "operator has non-finite entries".into(),
            ));
        }
        Ok(Self { m })
    }

    /// Wraps a matrix already known to be square and finite.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            m: CMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            m: CMatrix::from_diagonal(&d),
        }
    }

    /// Row-major real entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), dim * dim);
        Self::from_fn(dim, |i, j| C64::new(entries[i * dim + j], 0.0))
    }

    /// The dyad `|i><j|`.
    pub fn dyad(dim: usize, i: usize, j: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(i, j)] = ONE;
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            for i in j..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let max_asymmetry = self.max_asymmetry();
        if max_asymmetry > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry,
                tolerance: HERMITIAN_TOL,
            });
        }
        Ok(())
    }

    /// `(A + A†) / 2`.
    pub fn hermitize(&self) -> Self {
        Self {
            m: (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_hermitian(HERMITIAN_TOL) {
            if let Ok(decomp) = hermitian_eig(self) {
                return decomp
                    .eigenvalues
                    .iter()
                    .fold(0.0, |acc: f64, x| acc.max(x.abs()));
            }
        }
        self.m
            .clone()
            .singular_values()
            .iter()
            .fold(0.0, |acc: f64, &x| acc.max(x))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: &self.m * C64::new(factor, 0.0),
        }
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        Self {
            m: &self.m * factor,
        }
    }

    /// `self + factor * other`, in place.
    pub fn axpy(&mut self, factor: f64, other: &Operator) {
        self.m.zip_apply(&other.m, |a, b| *a += b * factor);
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    fn check_dims(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_dims(other)?;
        Ok(commutator_unchecked(self, other))
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &Operator) -> Result<Operator> {
        self.check_dims(other)?;
        let ab = matmul(&self.m, &other.m);
        let ba = matmul(&other.m, &self.m);
        Ok(Self { m: ab + ba })
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        self.check_dims(other)?;
        Ok(trace_product(&self.m, &other.m))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).norm()))
    }
}

pub(crate) fn commutator_unchecked(a: &Operator, b: &Operator) -> Operator {
    let ab = matmul(&a.m, &b.m);
    let ba = matmul(&b.m, &a.m);
    Operator { m: ab - ba }
}

fn split(a: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

/// Complex product via four real GEMMs.
pub(crate) fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    if a.nrows() < 16 {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut re = &ar * &br;
    re.gemm(-1.0, &ai, &bi, 1.0);
    let mut im = &ar * &bi;
    im.gemm(1.0, &ai, &br, 1.0);
    re.zip_map(&im, C64::new)
}

/// `a b c`.
pub(crate) fn matmul3(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> CMatrix {
    matmul(&matmul(a, b), c)
}

/// `[a, b] / i`, Hermitian whenever `a` and `b` are.
pub(crate) fn commutator_over_i(a: &Operator, b: &Operator) -> Operator {
    let c = commutator_unchecked(a, b);
    Operator { m: c.m * (-I) }
}

/// `Tr(A B) = sum_ij A_ij B_ji`.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for j in 0..d {
        for i in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator {
            m: matmul(&self.m, &rhs.m),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

/// Eigenvalues in ascending order with the matching unitary of column eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(diag(lambda)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lambda));
        }
        Operator {
            m: matmul(&scaled, &v.adjoint()),
        }
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|x| x)
    }

    /// `V† A V`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        matmul3(&self.eigenvectors.adjoint(), a, &self.eigenvectors)
    }

    /// `V A V†`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        matmul3(&self.eigenvectors, a, &self.eigenvectors.adjoint())
    }
}

/// Full eigendecomposition of a Hermitian operator.
pub fn hermitian_eig(a: &Operator) -> Result<SpectralDecomp> {
    a.ensure_hermitian()?;
    let dim = a.dim();
    let eig = SymmetricEigen::try_new(a.m.clone(), f64::EPSILON, 1000 * dim.max(1))
        .ok_or(Error::ConvergenceFailure { dim })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

pub fn expm_hermitian(a: &Operator) -> Result<Operator> {
    Ok(hermitian_eig(a)?.map(f64::exp))
}

pub fn logm_posdef(a: &Operator) -> Result<Operator> {
    let decomp = hermitian_eig(a)?;
    let min_eigenvalue = decomp.eigenvalues[0];
    if min_eigenvalue <= EIGENVALUE_FLOOR {
        return Err(Error::NotPositiveDefinite { min_eigenvalue });
    }
    Ok(decomp.map(f64::ln))
}

/// Embeds a single-site spin-1/2 operator at `site` (1-based, site 1 is the
/// most significant qubit) of an `n_sites` chain.
pub fn embed_site(local: &Operator, site: usize, n_sites: usize) -> Result<Operator> {
    embed_site_with_cap(local, site, n_sites, DEFAULT_MAX_DIM)
}

pub fn embed_site_with_cap(
    local: &Operator,
    site: usize,
    n_sites: usize,
    max_dim: usize,
) -> Result<Operator> {
    if local.dim() != 2 {
        return Err(Error::DimMismatch {
            left: local.dim(),
            right: 2,
        });
    }
    if site == 0 || site > n_sites {
        return Err(Error::InvalidArgument(format!(
            "site {site} outside 1..={n_sites}"
        )));
    }
    check_chain_dim(n_sites, max_dim)?;
    let left = Operator::identity(1 << (site - 1));
    let right = Operator::identity(1 << (n_sites - site));
    Ok(left.kron(local).kron(&right))
}

pub(crate) fn check_chain_dim(n_sites: usize, max_dim: usize) -> Result<usize> {
    if n_sites >= usize::BITS as usize || (1usize << n_sites) > max_dim {
        return Err(Error::DimOverflow { n_sites, max_dim });
    }
    Ok(1 << n_sites)
}

/// A full-rank state `rho = exp(-K)` stored through `K` and its decomposition.
///
/// `K` is always shifted so that `Tr exp(-K) = 1`.
#[derive(Clone, Debug)]
pub struct StateK {
    k: Operator,
    decomp: SpectralDecomp,
    probs: Vec<f64>,
    rho: CMatrix,
    log_partition: f64,
}

/// Normalizes `k` so that `Tr exp(-k') = 1` with `k' = k + log(Tr exp(-k)) id`.
pub fn normalize(k: &Operator) -> Result<StateK> {
    StateK::from_k(k)
}

impl StateK {
    pub fn from_k(k: &Operator) -> Result<Self> {
        let decomp = hermitian_eig(k)?;
        Ok(Self::from_decomposition(k, decomp))
    }

    fn from_decomposition(k: &Operator, mut decomp: SpectralDecomp) -> Self {
        // log Tr exp(-K) via log-sum-exp over the smallest eigenvalue.
        let lambda_min = decomp.eigenvalues[0];
        let sum: f64 = decomp
            .eigenvalues
            .iter()
            .map(|&l| (-(l - lambda_min)).exp())
            .sum();
        let log_partition = -lambda_min + sum.ln();
        for l in decomp.eigenvalues.iter_mut() {
            *l += log_partition;
        }
        let probs: Vec<f64> = decomp.eigenvalues.iter().map(|&l| (-l).exp()).collect();
        let mut k_shifted = k.clone();
        for i in 0..k.dim() {
            k_shifted.m[(i, i)] += C64::new(log_partition, 0.0);
        }
        let rho = {
            let v = &decomp.eigenvectors;
            let mut scaled = v.clone();
            for (j, &p) in probs.iter().enumerate() {
                scaled.column_mut(j).scale_mut(p);
            }
            let r = matmul(&scaled, &v.adjoint());
            (&r + r.adjoint()) * C64::new(0.5, 0.0)
        };
        Self {
            k: k_shifted,
            decomp,
            probs,
            rho,
            log_partition,
        }
    }

    /// State from a density matrix; `rho` must be Hermitian positive definite.
    pub fn from_density(rho: &Operator) -> Result<Self> {
        let log = logm_posdef(rho)?;
        Self::from_k(&-&log)
    }

    /// The state `U rho U†` for unitary `u`, reusing the decomposition.
    pub fn conjugated(&self, u: &CMatrix) -> StateK {
        let u_dag = u.adjoint();
        let k = Operator {
            m: matmul3(u, self.k.matrix(), &u_dag),
        };
        let rho = matmul3(u, &self.rho, &u_dag);
        let decomp = SpectralDecomp {
            eigenvalues: self.decomp.eigenvalues.clone(),
            eigenvectors: matmul(u, &self.decomp.eigenvectors),
        };
        StateK {
            k: k.hermitize(),
            decomp,
            probs: self.probs.clone(),
            rho: (&rho + rho.adjoint()) * C64::new(0.5, 0.0),
            log_partition: self.log_partition,
        }
    }

    pub fn dim(&self) -> usize {
        self.k.dim()
    }

    /// The normalized `K = -log rho`.
    pub fn k(&self) -> &Operator {
        &self.k
    }

    /// Eigendecomposition of the normalized `K`; eigenvalues are `-log p_i`.
    pub fn decomp(&self) -> &SpectralDecomp {
        &self.decomp
    }

    /// Eigenvalues `p_i` of `rho`, ordered from largest to smallest.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `log p_i`, accurate even when `p_i` underflows.
    pub fn log_probs(&self) -> Vec<f64> {
        self.decomp.eigenvalues.iter().map(|&l| -l).collect()
    }

    pub fn rho_matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn rho(&self) -> Operator {
        Operator {
            m: self.rho.clone(),
        }
    }

    /// `log Tr exp(-K_in)` of the operator this state was built from.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// `Tr exp(-K_in)` of the operator this state was built from.
    pub fn raw_trace(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn expectation(&self, q: &Operator) -> f64 {
        self.expectation_complex(q).re
    }

    pub fn expectation_complex(&self, q: &Operator) -> C64 {
        trace_product(&self.rho, &q.m)
    }

    pub fn to_eigenbasis(&self, a: &Operator) -> CMatrix {
        self.decomp.to_eigenbasis(&a.m)
    }

    /// `rho^tau = V diag(p^tau) V†`.
    pub fn rho_power(&self, tau: f64) -> Operator {
        self.decomp.map(|l| (-tau * l).exp())
    }
}
