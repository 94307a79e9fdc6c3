//! Seeded randomized invariant suites.

use std::fmt;

use maxent_core::diagnostics::{projector_discrepancy, relative_entropy, vn_entropy};
use maxent_core::geometry::{kmb_inner_quadrature, Geometry, GeometryKind};
use maxent_core::models::fermionic_gaussian_table;
use maxent_core::operator::{embed_site, normalize, Operator, StateK};
use maxent_core::projection::{
    maxent_project, mf_project, pauli_local_bases, OperatorBasis, Projector, DEFAULT_RCOND,
};
use maxent_core::random::{
    random_hermitian, random_product_state, random_state, random_unitary, rng_from_seed, TestRng,
};
use maxent_core::Result;
use rand::Rng;
use serde::Serialize;

/// Outcome of one suite. `worst` is the largest violation seen, measured
/// against `tolerance` (positive means the invariant was broken).
#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.error.is_none()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} {}/{} cases ok, worst {:.3e} (tol {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases - self.failures,
            self.cases,
            self.worst,
            self.tolerance
        )?;
        if let Some(e) = &self.error {
            write!(f, ": {e}")?;
        }
        Ok(())
    }
}

/// Runs `case` `cases` times; each call returns the violation magnitude
/// (`<= tolerance` is a pass).
fn suite(
    name: &str,
    cases: usize,
    tolerance: f64,
    rng: &mut TestRng,
    mut case: impl FnMut(&mut TestRng) -> Result<f64>,
) -> SuiteResult {
    let mut out = SuiteResult {
        name: name.into(),
        cases,
        failures: 0,
        worst: f64::NEG_INFINITY,
        tolerance,
        error: None,
    };
    for _ in 0..cases {
        match case(rng) {
            Ok(v) => {
                out.worst = out.worst.max(v);
                if !(v <= tolerance) {
                    out.failures += 1;
                }
            }
            Err(e) => {
                out.failures += 1;
                out.error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    out
}

fn basis_with_identity(rng: &mut TestRng, dim: usize, extra: usize) -> Result<OperatorBasis> {
    let mut ops = vec![Operator::identity(dim)];
    ops.extend((0..extra).map(|_| random_hermitian(rng, dim, 1.0)));
    OperatorBasis::unlabelled(ops)
}

/// Relative deviation of the eigenbasis KMB product from 64-node quadrature.
pub fn kmb_quadrature(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("kmb_vs_quadrature", cases, 1e-8, &mut rng, |rng| {
        let dim = rng.random_range(2..=8);
        let spread = rng.random_range(0.1..2.5);
        let sigma = random_state(rng, dim, spread)?;
        let a = random_hermitian(rng, dim, 1.0);
        let b = random_hermitian(rng, dim, 1.0);
        let exact = Geometry::new(GeometryKind::Kmb, sigma.clone()).inner(&a, &b)?;
        let quad = kmb_inner_quadrature(&sigma, &a, &b, 64)?;
        Ok((exact - quad).norm() / exact.norm().max(1.0))
    })
}

/// `||A|| >= ||A||_covar >= ||A||_KMB >= S(sigma || e^{log sigma - A})`,
/// the last leg with `A` shifted so the target state is normalized.
pub fn norm_chain(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("norm_chain", cases, 1e-9, &mut rng, |rng| {
        let dim = rng.random_range(2..=6);
        let spread = rng.random_range(0.1..2.5);
        let sigma = random_state(rng, dim, spread)?;
        let scale = rng.random_range(0.1..1.5);
        let a = random_hermitian(rng, dim, scale);
        let covar = Geometry::new(GeometryKind::Covar, sigma.clone()).induced_norm(&a)?;
        let kmb = Geometry::new(GeometryKind::Kmb, sigma.clone()).induced_norm(&a)?;
        let shifted = normalize(&(sigma.k() + &a))?;
        let a_unit = shifted.k() - sigma.k();
        let kmb_unit = Geometry::new(GeometryKind::Kmb, sigma.clone()).induced_norm(&a_unit)?;
        let s = relative_entropy(&sigma, &shifted)?;
        Ok((covar - a.spectral_norm())
            .max(kmb - covar)
            .max(s - kmb_unit))
    })
}

fn discrepancy_case(rng: &mut TestRng) -> Result<maxent_core::diagnostics::ProjectorDiscrepancy> {
    let dim = rng.random_range(2..=5);
    let sigma = random_state(rng, dim, 1.5)?;
    let extra = rng.random_range(1..=3);
    let basis = basis_with_identity(rng, dim, extra)?;
    let q = random_hermitian(rng, dim, 1.0);
    projector_discrepancy(&sigma, &basis, &q)
}

fn chain_violation(d: &maxent_core::diagnostics::ProjectorDiscrepancy) -> f64 {
    d.norm_chain
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn bounds_violation(d: &maxent_core::diagnostics::ProjectorDiscrepancy) -> f64 {
    (d.norm_chain[1] - d.norm_chain[2])
        .max(d.delta_kmb - d.delta_covar)
        .max(d.delta_kmb - d.bound_kmb)
        .max(d.delta_covar - d.bound_covar)
}

/// The middle norm link, `delta_KMB <= delta_covar` and both triangle bounds.
pub fn projector_bounds(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("projector_bounds", cases, 1e-9, &mut rng, |rng| {
        Ok(bounds_violation(&discrepancy_case(rng)?))
    })
}

/// The full four-term projector norm chain together with the bounds.
pub fn projector_chain(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("projector_chain", cases, 1e-9, &mut rng, |rng| {
        let d = discrepancy_case(rng)?;
        Ok(chain_violation(&d).max(bounds_violation(&d)))
    })
}

/// With a basis of eigen-dyads of `sigma`, both projectors coincide and the
/// chain collapses to equalities.
pub fn eigen_dyad_equality(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("eigen_dyad_equality", cases, 1e-9, &mut rng, |rng| {
        let dim = rng.random_range(2..=5);
        let sigma = random_state(rng, dim, 1.5)?;
        let v = &sigma.decomp().eigenvectors;
        let dyads = (0..dim)
            .map(|i| {
                let col = v.column(i);
                Operator::from_matrix(col * col.adjoint())
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = OperatorBasis::unlabelled(dyads)?;
        let q = random_hermitian(rng, dim, 1.0);
        let d = projector_discrepancy(&sigma, &basis, &q)?;
        let spread = d
            .norm_chain
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - d.norm_chain.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        Ok(spread
            .max(d.delta_kmb)
            .max(d.delta_covar)
            .max(bounds_violation(&d)))
    })
}

/// `mf_project` against the KMB and covar projectors on the span of local
/// Paulis, at random product states of two qubits.
pub fn mean_field(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    let locals = pauli_local_bases(2);
    let mut embedded = vec![Operator::identity(4)];
    for (site, b) in locals.iter().enumerate() {
        for q in b.elements() {
            embedded.push(embed_site(q, site + 1, 2).expect("two-site embedding"));
        }
    }
    let basis = OperatorBasis::unlabelled(embedded).expect("local Pauli basis");
    suite("mean_field_projector", cases, 1e-8, &mut rng, |rng| {
        let spread = rng.random_range(0.2..2.0);
        let sigma = random_product_state(rng, 2, spread)?;
        let o = random_hermitian(rng, 4, 1.0);
        let mf = mf_project(&sigma, &locals, &o)?;
        let mut worst: f64 = 0.0;
        for kind in [GeometryKind::Covar, GeometryKind::Kmb] {
            let p = Projector::new(
                basis.clone(),
                Geometry::new(kind, sigma.clone()),
                DEFAULT_RCOND,
            )?;
            worst = worst.max(p.project(&o)?.0.max_abs_diff(&mf));
        }
        Ok(worst)
    })
}

/// Fermionic Gaussian norms against closed forms for one and two modes.
pub fn fermionic_table() -> SuiteResult {
    let omegas = [0.5, 1.0, 2.0];
    let mut configs: Vec<Vec<f64>> = omegas.iter().map(|&w| vec![w]).collect();
    for &a in &omegas {
        for &b in &omegas {
            configs.push(vec![a, b]);
        }
    }
    let mut it = configs.into_iter();
    let cases = it.len();
    let mut rng = rng_from_seed(0);
    suite("fermionic_gaussian_table", cases, 1e-9, &mut rng, |_| {
        let omegas = it.next().expect("one config per case");
        let rows = fermionic_gaussian_table(&omegas)?;
        Ok(rows.iter().map(|r| r.max_error()).fold(0.0, f64::max))
    })
}

/// `S(rho||sigma) >= 0`, `S(rho||rho) = 0`, and unitary invariance and the
/// `log d` bound of the von Neumann entropy.
pub fn entropy(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("relative_entropy", cases, 1e-9, &mut rng, |rng| {
        let dim = rng.random_range(2..=6);
        let rho = random_state(rng, dim, 1.5)?;
        let sigma = random_state(rng, dim, 1.5)?;
        let u = random_unitary(rng, dim);
        let rotated = StateK::from_k(&(&(&u * rho.k()) * &u.adjoint()))?;
        let s = vn_entropy(&rho);
        Ok((-relative_entropy(&rho, &sigma)?)
            .max(relative_entropy(&rho, &rho)?.abs())
            .max((vn_entropy(&rotated) - s).abs())
            .max(s - (dim as f64).ln()))
    })
}

/// Max-Ent projections reproduce the basis expectations.
pub fn maxent_moments(seed: u64, cases: usize) -> SuiteResult {
    let mut rng = rng_from_seed(seed);
    suite("maxent_moments", cases, 1e-8, &mut rng, |rng| {
        let dim = rng.random_range(2..=4);
        let rho = random_state(rng, dim, 1.0)?;
        let basis = basis_with_identity(rng, dim, 2)?;
        let sol = maxent_project(&rho, &basis, 1e-10, 100)?;
        Ok(basis
            .elements()
            .iter()
            .map(|q| (sol.state.expectation(q) - rho.expectation(q)).abs())
            .fold(0.0, f64::max))
    })
}

/// All suites whose invariants are theorems. `scale` multiplies the case
/// counts.
pub fn run_all(seed: u64, scale: usize) -> Vec<SuiteResult> {
    let s = scale.max(1);
    vec![
        kmb_quadrature(seed, 20 * s),
        norm_chain(seed.wrapping_add(1), 50 * s),
        projector_bounds(seed.wrapping_add(2), 20 * s),
        eigen_dyad_equality(seed.wrapping_add(3), 10 * s),
        mean_field(seed.wrapping_add(4), 10 * s),
        fermionic_table(),
        entropy(seed.wrapping_add(5), 20 * s),
        maxent_moments(seed.wrapping_add(6), 10 * s),
    ]
}
