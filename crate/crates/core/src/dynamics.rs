//! Exact evolution of `K = -log rho`, hierarchical bases, projected
//! trajectories and the restricted dynamics on the Max-Ent manifold.
//!
//! Units have `hbar = 1`; the exact flow is `dK/dt = [H, K]/i`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::vn_entropy;
use crate::error::{Error, Result};
use crate::geometry::{frobenius_pairing, kmb_weight_matrix, Geometry, GeometryKind};
use crate::ode::{integrate_with, OdeSettings, OdeStats, OdeSystem};
use crate::operator::{commutator_over_i, hermitian_eig, matmul, CMatrix, Operator, StateK, C64};
use crate::projection::pinv::pinv_hermitian;
use crate::projection::{OperatorBasis, Projector, DEFAULT_RCOND};

/// Named observables recorded along a trajectory.
pub type Observables = [(String, Operator)];

/// `b_0 = K0`, `b_m = [H, b_{m-1}]/i`, returned as `b_0 ..= b_count`.
pub fn iterated_commutators(h: &Operator, k0: &Operator, count: usize) -> Result<Vec<Operator>> {
    if h.dim() != k0.dim() {
        return Err(Error::DimMismatch {
            left: h.dim(),
            right: k0.dim(),
        });
    }
    let mut out = vec![k0.clone()];
    for m in 1..=count {
        let next = commutator_over_i(h, &out[m - 1]).hermitize();
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct HierarchicalBasis {
    pub level: usize,
    pub core: OperatorBasis,
    /// `b_0 ..= b_level`.
    pub iterated: Vec<Operator>,
    /// `core ∪ {b_1 .. b_level}` after rank pruning.
    pub combined: OperatorBasis,
}

/// Extends `core` with `b_1 .. b_ell` and prunes the result under the covar
/// geometry at `exp(-K0)`.
pub fn hierarchical_basis(
    h: &Operator,
    k0: &StateK,
    core: &OperatorBasis,
    ell: usize,
    rcond: f64,
) -> Result<HierarchicalBasis> {
    let iterated = iterated_commutators(h, k0.k(), ell)?;
    let mut combined = core.clone();
    for (m, b) in iterated.iter().enumerate().skip(1) {
        combined.push(b.clone(), format!("b{m}"))?;
    }
    let geometry = Geometry::new(GeometryKind::Covar, k0.clone());
    let combined = combined.prune(&geometry, rcond)?;
    Ok(HierarchicalBasis {
        level: ell,
        core: core.clone(),
        iterated,
        combined,
    })
}

/// Time series produced by the evolution routines.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Labels of the coefficient vectors; empty for exact trajectories.
    pub labels: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    /// Normalized states, one per time.
    pub states: Option<Vec<StateK>>,
    pub observables: BTreeMap<String, Vec<f64>>,
    /// Includes `trace_rho` and `entropy`.
    pub diagnostics: BTreeMap<String, Vec<f64>>,
    pub warnings: Vec<String>,
    pub stats: Option<OdeStats>,
}

impl TrajectoryRecord {
    fn with_times(times: &[f64], labels: Vec<String>, observables: &Observables) -> Self {
        let mut rec = TrajectoryRecord {
            times: times.to_vec(),
            labels,
            states: Some(Vec::with_capacity(times.len())),
            ..Default::default()
        };
        for (name, _) in observables {
            rec.observables
                .insert(name.clone(), Vec::with_capacity(times.len()));
        }
        rec
    }

    fn record(&mut self, phi: Vec<f64>, state: StateK, raw_trace: f64, observables: &Observables) {
        for (name, q) in observables {
            self.observables
                .get_mut(name)
                .expect("registered")
                .push(state.expectation(q));
        }
        self.diagnostics
            .entry("trace_rho".into())
            .or_default()
            .push(raw_trace);
        self.diagnostics
            .entry("entropy".into())
            .or_default()
            .push(vn_entropy(&state));
        self.phi.push(phi);
        if let Some(states) = self.states.as_mut() {
            states.push(state);
        }
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(Vec::as_slice)
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics.get(name).map(Vec::as_slice)
    }

    pub fn drop_states(&mut self) {
        self.states = None;
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "times must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `K(t) = U K0 U†` with `U = exp(-iHt)` from one decomposition of `H`.
pub fn evolve_exact_k(
    h: &Operator,
    k0: &StateK,
    times: &[f64],
    observables: &Observables,
) -> Result<TrajectoryRecord> {
    check_grid(times)?;
    if h.dim() != k0.dim() {
        return Err(Error::DimMismatch {
            left: h.dim(),
            right: k0.dim(),
        });
    }
    let eh = hermitian_eig(h)?;
    let v = &eh.eigenvectors;
    let v_dag = v.adjoint();
    let mut rec = TrajectoryRecord::with_times(times, Vec::new(), observables);
    for &t in times {
        let mut phased = v.clone();
        for (j, &e) in eh.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            phased.column_mut(j).apply(|z| *z *= phase);
        }
        let u = matmul(&phased, &v_dag);
        let state = k0.conjugated(&u);
        rec.record(Vec::new(), state, 1.0, observables);
    }
    Ok(rec)
}

/// Projects `K(t)` of an exact trajectory onto `span(basis)` with the
/// geometry bound to `rho(t)` at every time.
pub fn projected_trajectory(
    traj: &TrajectoryRecord,
    basis: &OperatorBasis,
    kind: GeometryKind,
    observables: &Observables,
) -> Result<TrajectoryRecord> {
    let states = traj
        .states
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory does not carry states".into()))?;
    let mut rec = TrajectoryRecord::with_times(&traj.times, basis.labels().to_vec(), observables);
    for state in states {
        let projector = Projector::new(
            basis.clone(),
            Geometry::new(kind, state.clone()),
            DEFAULT_RCOND,
        )?;
        let (pk, coefficients) = projector.project(state.k())?;
        let projected = StateK::from_k(&pk)?;
        let raw = projected.raw_trace();
        rec.record(coefficients, projected, raw, observables);
    }
    Ok(rec)
}

/// When the Gram and generator matrices of the restricted flow are rebuilt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RebuildPolicy {
    /// At every right-hand-side evaluation.
    #[default]
    EveryEvaluation,
    /// Once per solver step, frozen across its stages.
    PerStep,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedSettings {
    pub ode: OdeSettings,
    pub rcond: f64,
    pub rebuild: RebuildPolicy,
}

impl Default for RestrictedSettings {
    fn default() -> Self {
        Self {
            ode: OdeSettings::default(),
            rcond: DEFAULT_RCOND,
            rebuild: RebuildPolicy::default(),
        }
    }
}

/// Cap on the memory of the precomputed covar products, in complex entries.
const COVAR_CACHE_LIMIT: usize = 1 << 24;

enum Kernel {
    /// Rows hold `[Re T, Im T]` for `T = {Q_a, Q_b}/2` (upper triangle), then
    /// `T = {Q_a, C_b}/2`, so `Re Tr(rho T)` is one matrix-vector product.
    CovarCached {
        rows: DMatrix<f64>,
    },
    General,
}

/// Right-hand side of `G(phi) dphi/dt = M(phi) phi`.
struct RestrictedFlow<'a> {
    basis: &'a OperatorBasis,
    commutators: Vec<Operator>,
    kind: GeometryKind,
    rcond: f64,
    rebuild: RebuildPolicy,
    kernel: Kernel,
    frozen: Option<DMatrix<f64>>,
    min_rank: usize,
    evaluations: usize,
}

impl<'a> RestrictedFlow<'a> {
    fn new(
        h: &Operator,
        basis: &'a OperatorBasis,
        kind: GeometryKind,
        settings: &RestrictedSettings,
    ) -> Result<Self> {
        if !kind.is_real() {
            return Err(Error::GeometryMismatch(format!(
                "restricted dynamics needs a real geometry, got {kind}"
            )));
        }
        let commutators: Vec<Operator> = basis
            .elements()
            .iter()
            .map(|q| commutator_over_i(h, q).hermitize())
            .collect();
        let n = basis.len();
        let d = basis.dim();
        let cache_entries = (n * (n + 1) / 2 + n * n) * d * d;
        let kernel = if kind == GeometryKind::Covar && cache_entries <= COVAR_CACHE_LIMIT {
            let q = basis.elements();
            let mut products = Vec::with_capacity(n * (n + 1) / 2 + n * n);
            for a in 0..n {
                for b in a..n {
                    products.push(q[a].anticommutator(&q[b])?);
                }
            }
            for qa in q {
                for c in &commutators {
                    products.push(qa.anticommutator(c)?);
                }
            }
            let dd = d * d;
            let mut rows = DMatrix::<f64>::zeros(products.len(), 2 * dd);
            for (r, t) in products.iter().enumerate() {
                for (idx, z) in t.matrix().iter().enumerate() {
                    rows[(r, idx)] = 0.5 * z.re;
                    rows[(r, dd + idx)] = 0.5 * z.im;
                }
            }
            Kernel::CovarCached { rows }
        } else {
            Kernel::General
        };
        Ok(Self {
            basis,
            commutators,
            kind,
            rcond: settings.rcond,
            rebuild: settings.rebuild,
            kernel,
            frozen: None,
            min_rank: n,
            evaluations: 0,
        })
    }

    /// `G` and `M` at the normalized state of `phi`.
    fn matrices(&self, state: &StateK) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = self.basis.len();
        let mut g = DMatrix::<f64>::zeros(n, n);
        let mut m = DMatrix::<f64>::zeros(n, n);
        match (&self.kernel, self.kind) {
            (Kernel::CovarCached { rows }, _) => {
                // Re Tr(rho T) = sum_ij Re(rho_ij) Re(T_ij) + Im(rho_ij) Im(T_ij) for Hermitian T
                let rho = state.rho_matrix();
                let dd = rho.len();
                let mut flat = DVector::<f64>::zeros(2 * dd);
                for (idx, z) in rho.iter().enumerate() {
                    flat[idx] = z.re;
                    flat[dd + idx] = z.im;
                }
                let values = rows * flat;
                let mut idx = 0;
                for a in 0..n {
                    for b in a..n {
                        g[(a, b)] = values[idx];
                        g[(b, a)] = values[idx];
                        idx += 1;
                    }
                }
                for a in 0..n {
                    for b in 0..n {
                        m[(a, b)] = values[idx];
                        idx += 1;
                    }
                }
            }
            (Kernel::General, GeometryKind::Kmb) => {
                let w = kmb_weight_matrix(state);
                let weigh = |mut t: CMatrix| {
                    t.zip_apply(&w, |z, wij| *z *= wij);
                    t
                };
                let q_t: Vec<CMatrix> = self
                    .basis
                    .elements()
                    .iter()
                    .map(|q| state.to_eigenbasis(q))
                    .collect();
                let q_w: Vec<CMatrix> = q_t.iter().cloned().map(weigh).collect();
                for a in 0..n {
                    for b in a..n {
                        let v = frobenius_pairing(&q_t[a], &q_w[b]).re;
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                    }
                }
                for (b, c) in self.commutators.iter().enumerate() {
                    let c_w = weigh(state.to_eigenbasis(c));
                    for a in 0..n {
                        m[(a, b)] = frobenius_pairing(&q_t[a], &c_w).re;
                    }
                }
            }
            (Kernel::General, kind) => {
                let geometry = Geometry::new(kind, state.clone());
                let q: Vec<&Operator> = self.basis.elements().iter().collect();
                let c: Vec<&Operator> = self.commutators.iter().collect();
                g = geometry.cross_gram(&q, &q)?.map(|z| z.re);
                g = (&g + g.transpose()) * 0.5;
                m = geometry.cross_gram(&q, &c)?.map(|z| z.re);
            }
        }
        Ok((g, m))
    }

    fn generator(&mut self, t: f64, phi: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.basis.combine(phi)?;
        let state = StateK::from_k(&k)?;
        let (g, m) = self.matrices(&state)?;
        let pinv = pinv_hermitian(&g, self.rcond)?;
        if pinv.rank == 0 {
            return Err(Error::GramSingular { t });
        }
        self.min_rank = self.min_rank.min(pinv.rank);
        self.evaluations += 1;
        Ok(pinv.matrix * m)
    }
}

impl OdeSystem for RestrictedFlow<'_> {
    fn rhs(&mut self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let phi = DVector::from_column_slice(y);
        let rate = match self.rebuild {
            RebuildPolicy::EveryEvaluation => self.generator(t, y)? * phi,
            RebuildPolicy::PerStep => {
                if self.frozen.is_none() {
                    self.frozen = Some(self.generator(t, y)?);
                }
                self.frozen.as_ref().expect("frozen generator") * phi
            }
        };
        dydt.copy_from_slice(rate.as_slice());
        Ok(())
    }

    fn begin_step(&mut self, t: f64, y: &[f64]) -> Result<()> {
        if self.rebuild == RebuildPolicy::PerStep {
            self.frozen = Some(self.generator(t, y)?);
        }
        Ok(())
    }

    fn reuse_last_stage(&self) -> bool {
        self.rebuild == RebuildPolicy::EveryEvaluation
    }
}

/// Coefficients of `k` in `basis`, requiring `k` to lie in the span.
pub fn initial_coefficients(basis: &OperatorBasis, k: &Operator, rcond: f64) -> Result<Vec<f64>> {
    let projector = Projector::new(basis.clone(), Geometry::hs(), rcond)?;
    let (pk, coefficients) = projector.project(k)?;
    let residual = (k - &pk).frobenius_norm();
    if residual > 1e-8 * k.frobenius_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "initial K is not in the span of the basis (residual {residual:.3e})"
        )));
    }
    Ok(coefficients)
}

/// Integrates the restricted dynamics from `K(0) = k0.k()` and records the
/// state at every entry of `times`.
pub fn restricted_evolve(
    h: &Operator,
    basis: &OperatorBasis,
    k0: &StateK,
    kind: GeometryKind,
    times: &[f64],
    settings: &RestrictedSettings,
    observables: &Observables,
) -> Result<TrajectoryRecord> {
    check_grid(times)?;
    if h.dim() != basis.dim() || k0.dim() != basis.dim() {
        return Err(Error::DimMismatch {
            left: basis.dim(),
            right: h.dim().max(k0.dim()),
        });
    }
    let phi0 = initial_coefficients(basis, k0.k(), settings.rcond)?;
    let mut flow = RestrictedFlow::new(h, basis, kind, settings)?;
    let mut rec = TrajectoryRecord::with_times(times, basis.labels().to_vec(), observables);
    let mut pending: Vec<(Vec<f64>, StateK, f64)> = Vec::with_capacity(times.len());
    let (_, stats) = integrate_with(&mut flow, &phi0, times, &settings.ode, |_, y| {
        let k = basis.combine(y)?;
        let state = StateK::from_k(&k)?;
        let raw = state.raw_trace();
        pending.push((y.to_vec(), state, raw));
        Ok(())
    })?;
    for (phi, state, raw) in pending {
        rec.record(phi, state, raw, observables);
    }
    if flow.min_rank < basis.len() {
        rec.warnings.push(format!(
            "{kind} Gram matrix rank-truncated to {} of {} during restricted evolution",
            flow.min_rank,
            basis.len()
        ));
    }
    rec.stats = Some(stats);
    Ok(rec)
}

/// Cumulative trapezoid of `||[H, K~(t)]||_KMB` at the recorded states.
pub fn error_bound(traj: &TrajectoryRecord, h: &Operator) -> Result<Vec<f64>> {
    let states = traj
        .states
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("trajectory does not carry states".into()))?;
    let rates: Vec<f64> = states
        .iter()
        .map(|s| {
            let c = commutator_over_i(h, s.k());
            Geometry::new(GeometryKind::Kmb, s.clone()).induced_norm(&c)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(rates.len());
    let mut acc = 0.0;
    for i in 0..rates.len() {
        if i > 0 {
            acc += 0.5 * (rates[i] + rates[i - 1]) * (traj.times[i] - traj.times[i - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}
