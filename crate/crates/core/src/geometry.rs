//! State-dependent scalar products on the operator algebra.
//!
//! Every product is evaluated as a Frobenius pairing `sum_ij conj(L_ij) R_ij`
//! between a left representation of `A` and a right representation of `B`:
//!
//! | kind  | left        | right                    |
//! |-------|-------------|--------------------------|
//! | HS    | `A`         | `B`                      |
//! | GNS   | `A`         | `B rho`                  |
//! | covar | `A`         | `(B rho + rho B) / 2`    |
//! | KMB   | `V† A V`    | `W ∘ (V† B V)`           |
//!
//! so batched Gram assembly transforms each operator once.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{matmul, CMatrix, Operator, StateK, C64, ZERO};
use crate::projection::OperatorBasis;

/// Below this separation of `log p` the KMB weight switches to its limit `p`.
pub const KMB_LOG_GAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Hs,
    Gns,
    Covar,
    Kmb,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Hs => "hs",
            GeometryKind::Gns => "gns",
            GeometryKind::Covar => "covar",
            GeometryKind::Kmb => "kmb",
        }
    }

    pub fn needs_reference(self) -> bool {
        self != GeometryKind::Hs
    }

    /// Whether Hermitian inputs always give real products.
    pub fn is_real(self) -> bool {
        self != GeometryKind::Gns
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" => Ok(GeometryKind::Hs),
            "gns" => Ok(GeometryKind::Gns),
            "covar" => Ok(GeometryKind::Covar),
            "kmb" => Ok(GeometryKind::Kmb),
            other => Err(Error::InvalidArgument(format!(
                "unknown geometry '{other}'"
            ))),
        }
    }
}

/// A scalar product bound to a reference state.
#[derive(Clone, Debug)]
pub struct Geometry {
    kind: GeometryKind,
    reference: Option<Arc<StateK>>,
    weights: Option<DMatrix<f64>>,
}

impl Geometry {
    /// The Hilbert-Schmidt product `Tr A†B`.
    pub fn hs() -> Self {
        Self {
            kind: GeometryKind::Hs,
            reference: None,
            weights: None,
        }
    }

    pub fn new(kind: GeometryKind, reference: StateK) -> Self {
        Self::from_shared(kind, Arc::new(reference))
    }

    pub fn from_shared(kind: GeometryKind, reference: Arc<StateK>) -> Self {
        let weights = (kind == GeometryKind::Kmb).then(|| kmb_weight_matrix(&reference));
        Self {
            kind,
            reference: Some(reference),
            weights,
        }
    }

    pub fn with_reference(kind: GeometryKind, reference: Option<StateK>) -> Result<Self> {
        match (kind, reference) {
            (GeometryKind::Hs, _) => Ok(Self::hs()),
            (kind, Some(state)) => Ok(Self::new(kind, state)),
            (kind, None) => Err(Error::MissingReference(kind.name())),
        }
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn reference(&self) -> Option<&StateK> {
        self.reference.as_deref()
    }

    pub fn shared_reference(&self) -> Option<Arc<StateK>> {
        self.reference.clone()
    }

    fn state(&self) -> Result<&StateK> {
        self.reference
            .as_deref()
            .ok_or(Error::MissingReference(self.kind.name()))
    }

    fn check_dim(&self, a: &Operator) -> Result<()> {
        if let Some(state) = self.reference.as_deref() {
            if state.dim() != a.dim() {
                return Err(Error::DimMismatch {
                    left: state.dim(),
                    right: a.dim(),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn left_rep(&self, a: &Operator) -> Result<CMatrix> {
        self.check_dim(a)?;
        Ok(match self.kind {
            GeometryKind::Kmb => self.state()?.to_eigenbasis(a),
            _ => a.matrix().clone(),
        })
    }

    pub(crate) fn right_rep(&self, b: &Operator) -> Result<CMatrix> {
        self.check_dim(b)?;
        Ok(match self.kind {
            GeometryKind::Hs => b.matrix().clone(),
            GeometryKind::Gns => matmul(b.matrix(), self.state()?.rho_matrix()),
            GeometryKind::Covar => {
                let rho = self.state()?.rho_matrix();
                (matmul(b.matrix(), rho) + matmul(rho, b.matrix())) * C64::new(0.5, 0.0)
            }
            GeometryKind::Kmb => {
                let mut bt = self.state()?.to_eigenbasis(b);
                let w = self.weights.as_ref().expect("KMB geometry carries weights");
                bt.zip_apply(w, |z, wij| *z *= wij);
                bt
            }
        })
    }

    pub fn inner(&self, a: &Operator, b: &Operator) -> Result<C64> {
        if a.dim() != b.dim() {
            return Err(Error::DimMismatch {
                left: a.dim(),
                right: b.dim(),
            });
        }
        Ok(frobenius_pairing(&self.left_rep(a)?, &self.right_rep(b)?))
    }

    pub fn induced_norm(&self, a: &Operator) -> Result<f64> {
        Ok(self.inner(a, a)?.re.max(0.0).sqrt())
    }

    /// Matrix of products `(a_i, b_j)`.
    pub fn cross_gram(&self, left: &[&Operator], right: &[&Operator]) -> Result<CMatrix> {
        let l: Vec<CMatrix> = left
            .iter()
            .map(|a| self.left_rep(a))
            .collect::<Result<_>>()?;
        let r: Vec<CMatrix> = right
            .iter()
            .map(|b| self.right_rep(b))
            .collect::<Result<_>>()?;
        Ok(CMatrix::from_fn(l.len(), r.len(), |i, j| {
            frobenius_pairing(&l[i], &r[j])
        }))
    }

    pub fn gram(&self, basis: &OperatorBasis) -> Result<GramMatrix> {
        let ops: Vec<&Operator> = basis.elements().iter().collect();
        let mut entries = self.cross_gram(&ops, &ops)?;
        // exact Hermitian symmetry; the two triangles differ only by roundoff
        let n = entries.nrows();
        for i in 0..n {
            entries[(i, i)].im = 0.0;
            for j in 0..i {
                let avg = (entries[(i, j)] + entries[(j, i)].conj()) * 0.5;
                entries[(i, j)] = avg;
                entries[(j, i)] = avg.conj();
            }
        }
        Ok(GramMatrix {
            entries,
            labels: basis.labels().to_vec(),
            kind: self.kind,
        })
    }
}

/// `sum_ij conj(L_ij) R_ij`.
pub(crate) fn frobenius_pairing(l: &CMatrix, r: &CMatrix) -> C64 {
    l.iter()
        .zip(r.iter())
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// The KMB weight `(p_i - p_j) / (log p_i - log p_j)`.
pub fn kmb_weight(p_i: f64, p_j: f64) -> Result<f64> {
    for p in [p_i, p_j] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::NonPositiveProbability(p));
        }
    }
    Ok(kmb_weight_from_logs(p_i.ln(), p_j.ln()))
}

/// KMB weight from `log p_i`, `log p_j`. Written as `p_min expm1(x)/x` with
/// `x = |log p_i - log p_j|` so neither cancellation nor overflow occurs.
pub(crate) fn kmb_weight_from_logs(log_i: f64, log_j: f64) -> f64 {
    let x = (log_i - log_j).abs();
    if x < KMB_LOG_GAP {
        return log_i.exp();
    }
    log_i.min(log_j).exp() * x.exp_m1() / x
}

pub(crate) fn kmb_weight_matrix(state: &StateK) -> DMatrix<f64> {
    let logs = state.log_probs();
    let d = logs.len();
    DMatrix::from_fn(d, d, |i, j| kmb_weight_from_logs(logs[i], logs[j]))
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// KMB product by quadrature of `∫_0^1 Tr[σ^{1-τ} A† σ^τ B] dτ`.
pub fn kmb_inner_quadrature(
    sigma: &StateK,
    a: &Operator,
    b: &Operator,
    n_nodes: usize,
) -> Result<C64> {
    if n_nodes < 8 {
        return Err(Error::InvalidArgument(format!(
            "n_nodes must be >= 8, got {n_nodes}"
        )));
    }
    for op in [a, b] {
        if op.dim() != sigma.dim() {
            return Err(Error::DimMismatch {
                left: sigma.dim(),
                right: op.dim(),
            });
        }
    }
    let (nodes, weights) = gauss_legendre_unit(n_nodes);
    let a_dag = a.adjoint();
    let mut acc = ZERO;
    for (&tau, &w) in nodes.iter().zip(&weights) {
        let left = sigma.rho_power(1.0 - tau);
        let right = sigma.rho_power(tau);
        let prod = &(&(&left * &a_dag) * &right) * b;
        acc += prod.trace() * w;
    }
    Ok(acc)
}

/// Gram matrix of a basis under a geometry.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    pub entries: CMatrix,
    pub labels: Vec<String>,
    pub kind: GeometryKind,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    pub fn max_imag(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0, |acc: f64, z| acc.max(z.im.abs()))
    }

    /// Eigenvalues of the Hermitian Gram matrix in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let op = Operator::from_matrix(self.entries.clone())?;
        Ok(crate::operator::hermitian_eig(&op)?.eigenvalues)
    }
}
