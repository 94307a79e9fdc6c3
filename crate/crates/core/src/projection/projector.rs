use crate::error::{Error, Result};
use crate::geometry::{frobenius_pairing, Geometry, GramMatrix};
use crate::operator::{CMatrix, Operator, C64};
use crate::projection::pinv::pinv_hermitian;
use crate::projection::OperatorBasis;

pub const DEFAULT_RCOND: f64 = 1e-10;

/// Orthogonal projector onto `span(basis)` under `geometry`.
#[derive(Clone, Debug)]
pub struct Projector {
    basis: OperatorBasis,
    geometry: Geometry,
    gram: GramMatrix,
    gram_inverse: CMatrix,
    rank: usize,
    rcond: f64,
    left_reps: Vec<CMatrix>,
}

pub fn build_projector(
    basis: &OperatorBasis,
    geometry: &Geometry,
    rcond: f64,
) -> Result<Projector> {
    Projector::new(basis.clone(), geometry.clone(), rcond)
}

impl Projector {
    pub fn new(basis: OperatorBasis, geometry: Geometry, rcond: f64) -> Result<Self> {
        if !(rcond > 0.0 && rcond < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rcond must be in (0, 1), got {rcond}"
            )));
        }
        if let Some(reference) = geometry.reference() {
            if reference.dim() != basis.dim() {
                return Err(Error::GeometryMismatch(format!(
                    "basis acts on dimension {} but the reference state has dimension {}",
                    basis.dim(),
                    reference.dim()
                )));
            }
        }
        let gram = geometry.gram(&basis)?;
        let pinv = pinv_hermitian(&gram.entries, rcond)?;
        if pinv.rank == 0 {
            return Err(Error::DegenerateBasis);
        }
        let left_reps = basis
            .elements()
            .iter()
            .map(|q| geometry.left_rep(q))
            .collect::<Result<_>>()?;
        Ok(Self {
            basis,
            geometry,
            gram,
            gram_inverse: pinv.matrix,
            rank: pinv.rank,
            rcond,
            left_reps,
        })
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &CMatrix {
        &self.gram_inverse
    }

    pub fn effective_rank(&self) -> usize {
        self.rank
    }

    pub fn rcond_used(&self) -> f64 {
        self.rcond
    }

    /// `v_a = (Q_a, K)`.
    pub fn moments(&self, k: &Operator) -> Result<Vec<C64>> {
        if k.dim() != self.basis.dim() {
            return Err(Error::DimMismatch {
                left: self.basis.dim(),
                right: k.dim(),
            });
        }
        let right = self.geometry.right_rep(k)?;
        Ok(self
            .left_reps
            .iter()
            .map(|l| frobenius_pairing(l, &right))
            .collect())
    }

    /// Projection with complex coefficients; valid for any input and geometry.
    pub fn project_general(&self, k: &Operator) -> Result<(Operator, Vec<C64>)> {
        let v = nalgebra::DVector::from_vec(self.moments(k)?);
        let c = &self.gram_inverse * v;
        let mut out = CMatrix::zeros(k.dim(), k.dim());
        for (ci, q) in c.iter().zip(self.basis.elements()) {
            out += q.matrix() * *ci;
        }
        Ok((
            Operator::from_matrix_unchecked(out),
            c.iter().copied().collect(),
        ))
    }

    /// Projection of a Hermitian operator under a real geometry; the result
    /// is Hermitian with real coefficients.
    pub fn project(&self, k: &Operator) -> Result<(Operator, Vec<f64>)> {
        if !self.geometry.kind().is_real() {
            return Err(Error::GeometryMismatch(format!(
                "{} projections have complex coefficients",
                self.geometry.kind()
            )));
        }
        k.ensure_hermitian()?;
        let v = nalgebra::DVector::from_iterator(
            self.basis.len(),
            self.moments(k)?.into_iter().map(|z| z.re),
        );
        let g_inv = self.gram_inverse.map(|z| z.re);
        let c = g_inv * v;
        let coefficients: Vec<f64> = c.iter().copied().collect();
        Ok((self.basis.combine(&coefficients)?, coefficients))
    }

    /// `max_a |(Q_a, K - pi K)|`.
    pub fn orthogonality_residual(&self, k: &Operator) -> Result<f64> {
        let (pk, _) = self.project_general(k)?;
        let diff = k - &pk;
        Ok(self
            .moments(&diff)?
            .iter()
            .fold(0.0, |m: f64, z| m.max(z.norm())))
    }
}
