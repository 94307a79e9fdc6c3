use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};
use crate::operator::{Operator, StateK};
use crate::projection::pinv::pinv_hermitian;
use crate::projection::{OperatorBasis, Projector, DEFAULT_RCOND};

const MAX_HALVINGS: usize = 20;

/// Result of the nonlinear Max-Ent projection.
#[derive(Clone, Debug)]
pub struct MaxEntSolution {
    /// Multipliers `lambda_a` with `sigma = exp(-sum_a lambda_a Q_a)`.
    pub coefficients: Vec<f64>,
    /// The basis the multipliers refer to; the identity is appended when absent.
    pub basis: OperatorBasis,
    pub state: StateK,
    /// `max_a |Tr[exp(-K) Q_a] - Tr[rho Q_a]|`.
    pub residual: f64,
    pub iterations: usize,
    /// `S(rho || sigma)` at the initial guess and after every accepted step.
    pub relative_entropy_history: Vec<f64>,
}

struct Iterate {
    lambda: Vec<f64>,
    state: StateK,
    /// `F_a = Tr[exp(-K) Q_a] - mu_a`
    mismatch: Vec<f64>,
    residual: f64,
    objective: f64,
}

fn evaluate(basis: &OperatorBasis, mu: &[f64], lambda: Vec<f64>) -> Result<Iterate> {
    let k = basis.combine(&lambda)?;
    let state = StateK::from_k(&k)?;
    let z = state.raw_trace();
    let mismatch: Vec<f64> = basis
        .elements()
        .iter()
        .zip(mu)
        .map(|(q, m)| z * state.expectation(q) - m)
        .collect();
    let residual = mismatch.iter().fold(0.0, |acc: f64, f| acc.max(f.abs()));
    let objective = lambda.iter().zip(mu).map(|(l, m)| l * m).sum::<f64>() + state.log_partition();
    Ok(Iterate {
        lambda,
        state,
        mismatch,
        residual,
        objective,
    })
}

/// Finds the maximum-entropy state sharing the expectation values of `basis`
/// with `rho`, by damped Newton iteration on the multipliers.
pub fn maxent_project(
    rho: &StateK,
    basis: &OperatorBasis,
    tol: f64,
    max_iter: usize,
) -> Result<MaxEntSolution> {
    let mut basis = basis.clone();
    if basis.dim() != rho.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: basis.dim(),
        });
    }
    if basis.identity_component().is_none() {
        basis.push(Operator::identity(rho.dim()), "id")?;
    }
    let mu: Vec<f64> = basis
        .elements()
        .iter()
        .map(|q| rho.expectation(q))
        .collect();
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument(
            "target expectation values are not finite".into(),
        ));
    }
    let entropy_rho = crate::diagnostics::vn_entropy(rho);

    let initial = Projector::new(
        basis.clone(),
        Geometry::new(GeometryKind::Covar, rho.clone()),
        DEFAULT_RCOND,
    )?;
    let (_, lambda0) = initial.project(rho.k())?;
    let mut current = evaluate(&basis, &mu, lambda0)?;
    let mut history = vec![current.objective - entropy_rho];
    let mut reference_rank = None;
    let mut iterations = 0;

    let finish =
        |it: Iterate, iterations: usize, history: Vec<f64>, basis: &OperatorBasis| MaxEntSolution {
            coefficients: it.lambda,
            basis: basis.clone(),
            state: it.state,
            residual: it.residual,
            iterations,
            relative_entropy_history: history,
        };

    loop {
        if current.residual <= tol {
            return Ok(finish(current, iterations, history, &basis));
        }
        if iterations >= max_iter {
            return Err(Error::MaxIterExceeded(Box::new(finish(
                current, iterations, history, &basis,
            ))));
        }
        let gram = Geometry::new(GeometryKind::Kmb, current.state.clone()).gram(&basis)?;
        let pinv = pinv_hermitian(&gram.real_part(), DEFAULT_RCOND)?;
        let rank0 = *reference_rank.get_or_insert(pinv.rank);
        if pinv.rank == 0 || pinv.rank < rank0 {
            return Err(Error::SingularJacobian {
                rank: pinv.rank,
                size: basis.len(),
            });
        }
        let z = current.state.raw_trace();
        let step = &pinv.matrix * DVector::from_column_slice(&current.mismatch) / z;

        let scale: f64 = 1.0
            + current
                .lambda
                .iter()
                .zip(&mu)
                .map(|(l, m)| (l * m).abs())
                .sum::<f64>()
            + current.state.log_partition().abs();
        let slack = 1e-12 * scale;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = current
                .lambda
                .iter()
                .zip(step.iter())
                .map(|(l, d)| l + alpha * d)
                .collect();
            if let Ok(candidate) = evaluate(&basis, &mu, trial) {
                if candidate.objective <= current.objective + slack {
                    accepted = Some(candidate);
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some(next) => {
                history.push(next.objective - entropy_rho);
                current = next;
            }
            None => {
                return Err(Error::MaxIterExceeded(Box::new(finish(
                    current, iterations, history, &basis,
                ))));
            }
        }
    }
}
