//! Entropies, distances between trajectories and projector discrepancies.

use std::collections::BTreeMap;

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};
use crate::operator::{Operator, StateK};
use crate::projection::{OperatorBasis, Projector, DEFAULT_RCOND};

/// Relative entropies in `[-CLAMP_TOL, 0)` are reported as zero.
pub const CLAMP_TOL: f64 = 1e-9;

pub fn vn_entropy(rho: &StateK) -> f64 {
    // -sum p log p with -log p taken from the eigenvalues of K
    rho.probs()
        .iter()
        .zip(&rho.decomp().eigenvalues)
        .map(|(p, k)| p * k)
        .sum::<f64>()
        .max(0.0)
}

/// `S(rho || sigma)` together with a flag telling whether a small negative
/// value was clamped to zero.
pub fn relative_entropy_checked(rho: &StateK, sigma: &StateK) -> Result<(f64, bool)> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let cross = rho.expectation(sigma.k());
    let value = cross - vn_entropy_unclamped(rho);
    if (-CLAMP_TOL..0.0).contains(&value) {
        return Ok((0.0, true));
    }
    Ok((value, false))
}

fn vn_entropy_unclamped(rho: &StateK) -> f64 {
    rho.probs()
        .iter()
        .zip(&rho.decomp().eigenvalues)
        .map(|(p, k)| p * k)
        .sum()
}

pub fn relative_entropy(rho: &StateK, sigma: &StateK) -> Result<f64> {
    Ok(relative_entropy_checked(rho, sigma)?.0)
}

/// Which state the geometry of `delta` and `delta_tilde` is bound to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Anchor {
    #[default]
    Restricted,
    Free,
}

/// Named metric series on a shared time grid.
#[derive(Clone, Debug, Default)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series.get(name).map(Vec::as_slice)
    }
}

/// Distances between a free trajectory and a restricted (or projected) one.
///
/// Per time point, with `dK = K(t) - K~(t)` and the geometry of `kind` bound
/// to the anchor state: `delta_tilde = ||dK||`, `delta = ||pi_B dK||`,
/// `kmb_dist_vs_free = ||dK||_KMB` and `relent_vs_free = S(rho(t) || sigma~(t))`.
pub fn delta_metrics(
    free: &TrajectoryRecord,
    restricted: &TrajectoryRecord,
    basis: &OperatorBasis,
    kind: GeometryKind,
    anchor: Anchor,
) -> Result<ComparisonReport> {
    let free_states = free
        .states
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("free trajectory does not carry states".into()))?;
    let restricted_states = restricted.states.as_ref().ok_or_else(|| {
        Error::InvalidArgument("restricted trajectory does not carry states".into())
    })?;
    if free.times.len() != restricted.times.len() {
        return Err(Error::DimMismatch {
            left: free.times.len(),
            right: restricted.times.len(),
        });
    }
    for (a, b) in free.times.iter().zip(&restricted.times) {
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time grids differ ({a} vs {b})"
            )));
        }
    }

    let n = free.times.len();
    let mut report = ComparisonReport {
        times: free.times.clone(),
        ..Default::default()
    };
    let mut relent = Vec::with_capacity(n);
    let mut kmb_dist = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut delta_tilde = Vec::with_capacity(n);
    let mut clamps = 0usize;

    for i in 0..n {
        let rho = &free_states[i];
        let sigma = &restricted_states[i];
        let dk = rho.k() - sigma.k();
        let (s, clamped) = relative_entropy_checked(rho, sigma)?;
        clamps += clamped as usize;
        relent.push(s);

        let anchor_state = match anchor {
            Anchor::Restricted => sigma.clone(),
            Anchor::Free => rho.clone(),
        };
        let geometry = Geometry::new(kind, anchor_state.clone());
        let dt = geometry.induced_norm(&dk)?;
        let kmb = if kind == GeometryKind::Kmb {
            dt
        } else {
            Geometry::new(GeometryKind::Kmb, anchor_state).induced_norm(&dk)?
        };
        let projector = Projector::new(basis.clone(), geometry.clone(), DEFAULT_RCOND)?;
        let (pdk, _) = projector.project(&dk)?;
        let d = geometry.induced_norm(&pdk)?;
        if d > dt * (1.0 + 1e-9) + 1e-9 {
            report.warnings.push(format!(
                "delta {d:.6e} exceeds delta_tilde {dt:.6e} at t = {}",
                free.times[i]
            ));
        }
        kmb_dist.push(kmb);
        delta.push(d);
        delta_tilde.push(dt);
    }
    if clamps > 0 {
        report
            .warnings
            .push(format!("{clamps} relative entropies clamped to zero"));
    }
    report.series.insert("relent_vs_free".into(), relent);
    report.series.insert("kmb_dist_vs_free".into(), kmb_dist);
    report.series.insert("delta".into(), delta);
    report.series.insert("delta_tilde".into(), delta_tilde);
    report.metadata.insert("geometry".into(), kind.to_string());
    report.metadata.insert(
        "anchor".into(),
        match anchor {
            Anchor::Restricted => "restricted".into(),
            Anchor::Free => "free".into(),
        },
    );
    Ok(report)
}

/// Differences between the KMB and covar projections of one operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorDiscrepancy {
    /// `||pi_KMB Q - pi_covar Q||_KMB`
    pub delta_kmb: f64,
    /// `||pi_KMB Q - pi_covar Q||_covar`
    pub delta_covar: f64,
    /// `2 ||Q - pi_covar Q||_KMB`
    pub bound_kmb: f64,
    /// `2 ||Q - pi_KMB Q||_covar`
    pub bound_covar: f64,
    /// `||pi_KMB Q||_KMB, ||pi_covar Q||_KMB, ||pi_covar Q||_covar, ||pi_KMB Q||_covar`.
    pub norm_chain: [f64; 4],
}

impl ProjectorDiscrepancy {
    /// Whether `norm_chain` is non-decreasing up to `margin`.
    ///
    /// Only the middle link is a consequence of the norm ordering; the outer
    /// two fail for generic bases.
    pub fn chain_holds(&self, margin: f64) -> bool {
        self.norm_chain.windows(2).all(|w| w[0] <= w[1] + margin)
    }

    /// The middle chain link, `delta_kmb <= delta_covar` and both triangle bounds.
    pub fn bounds_hold(&self, margin: f64) -> bool {
        self.norm_chain[1] <= self.norm_chain[2] + margin
            && self.delta_kmb <= self.delta_covar + margin
            && self.delta_kmb <= self.bound_kmb + margin
            && self.delta_covar <= self.bound_covar + margin
    }

    pub fn holds(&self, margin: f64) -> bool {
        self.chain_holds(margin) && self.bounds_hold(margin)
    }
}

pub fn projector_discrepancy(
    sigma: &StateK,
    basis: &OperatorBasis,
    q: &Operator,
) -> Result<ProjectorDiscrepancy> {
    let kmb = Geometry::new(GeometryKind::Kmb, sigma.clone());
    let covar = Geometry::new(GeometryKind::Covar, sigma.clone());
    let (pk, _) = Projector::new(basis.clone(), kmb.clone(), DEFAULT_RCOND)?.project(q)?;
    let (pc, _) = Projector::new(basis.clone(), covar.clone(), DEFAULT_RCOND)?.project(q)?;
    let diff = &pk - &pc;
    Ok(ProjectorDiscrepancy {
        delta_kmb: kmb.induced_norm(&diff)?,
        delta_covar: covar.induced_norm(&diff)?,
        bound_kmb: 2.0 * kmb.induced_norm(&(q - &pc))?,
        bound_covar: 2.0 * covar.induced_norm(&(q - &pk))?,
        norm_chain: [
            kmb.induced_norm(&pk)?,
            kmb.induced_norm(&pc)?,
            covar.induced_norm(&pc)?,
            covar.induced_norm(&pk)?,
        ],
    })
}
