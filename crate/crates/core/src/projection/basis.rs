use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operator::Operator;
use crate::projection::pinv::equilibrated_rank;

/// An ordered, labelled list of Hermitian operators.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    elements: Vec<Operator>,
    labels: Vec<String>,
    pruned_from: Vec<String>,
}

impl OperatorBasis {
    pub fn new(elements: Vec<Operator>, labels: Vec<String>) -> Result<Self> {
        if elements.len() != labels.len() {
            return Err(Error::DimMismatch {
                left: elements.len(),
                right: labels.len(),
            });
        }
        if elements.is_empty() {
            return Err(Error::DegenerateBasis);
        }
        let dim = elements[0].dim();
        for e in &elements {
            if e.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: e.dim(),
                });
            }
            e.ensure_hermitian()?;
        }
        Ok(Self {
            elements,
            labels,
            pruned_from: Vec::new(),
        })
    }

    /// Basis with labels `q0, q1, ...`.
    pub fn unlabelled(elements: Vec<Operator>) -> Result<Self> {
        let labels = (0..elements.len()).map(|i| format!("q{i}")).collect();
        Self::new(elements, labels)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Labels of elements removed by [`OperatorBasis::prune`].
    pub fn pruned_from(&self) -> &[String] {
        &self.pruned_from
    }

    pub fn get(&self, label: &str) -> Option<&Operator> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.elements[i])
    }

    pub fn push(&mut self, element: Operator, label: impl Into<String>) -> Result<()> {
        if element.dim() != self.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: element.dim(),
            });
        }
        element.ensure_hermitian()?;
        self.elements.push(element);
        self.labels.push(label.into());
        Ok(())
    }

    /// Index of an element equal to a nonzero multiple `s * id`, with `s`.
    pub fn identity_component(&self) -> Option<(usize, f64)> {
        let d = self.dim();
        self.elements.iter().enumerate().find_map(|(idx, e)| {
            let s = e.trace().re / d as f64;
            let off = e.max_abs_diff(&Operator::identity(d).scale(s));
            (s.abs() > 1e-12 && off <= 1e-12 * s.abs().max(1.0)).then_some((idx, s))
        })
    }

    /// Greedy rank pruning: elements are visited in order and kept only if
    /// they raise the numerical rank of the Gram matrix under `geometry`.
    pub fn prune(&self, geometry: &Geometry, rcond: f64) -> Result<OperatorBasis> {
        let gram = geometry.gram(self)?.entries;
        let mut kept: Vec<usize> = Vec::new();
        let mut dropped = self.pruned_from.clone();
        for idx in 0..self.len() {
            let mut trial = kept.clone();
            trial.push(idx);
            let sub = gram.select_rows(&trial).select_columns(&trial);
            if equilibrated_rank(&sub, rcond)? == trial.len() {
                kept = trial;
            } else {
                dropped.push(self.labels[idx].clone());
            }
        }
        if kept.is_empty() {
            return Err(Error::DegenerateBasis);
        }
        Ok(OperatorBasis {
            elements: kept.iter().map(|&i| self.elements[i].clone()).collect(),
            labels: kept.iter().map(|&i| self.labels[i].clone()).collect(),
            pruned_from: dropped,
        })
    }

    /// `sum_a c_a Q_a`.
    pub fn combine(&self, coefficients: &[f64]) -> Result<Operator> {
        if coefficients.len() != self.len() {
            return Err(Error::DimMismatch {
                left: self.len(),
                right: coefficients.len(),
            });
        }
        let mut out = Operator::zeros(self.dim());
        for (c, q) in coefficients.iter().zip(&self.elements) {
            if *c != 0.0 {
                out.axpy(*c, q);
            }
        }
        Ok(out)
    }
}
