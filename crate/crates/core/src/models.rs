//! The XX spin chain, its observables and initial states, and the fermionic
//! Gaussian norm table.
//!
//! Spin operators are `S = sigma / 2`. Basis states are ordered with site 1
//! as the most significant qubit and `|0>` as spin up, so the all-down state
//! is the last basis vector.

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometryKind};
use crate::operator::{check_chain_dim, normalize, Operator, StateK, DEFAULT_MAX_DIM, I, ZERO};

pub fn spin_x() -> Operator {
    Operator::from_real_rows(2, &[0.0, 0.5, 0.5, 0.0])
}

pub fn spin_y() -> Operator {
    Operator::from_fn(2, |i, j| match (i, j) {
        (0, 1) => -I * 0.5,
        (1, 0) => I * 0.5,
        _ => ZERO,
    })
}

pub fn spin_z() -> Operator {
    Operator::from_real_diagonal(&[0.5, -0.5])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinChainSpec {
    pub n_sites: usize,
    pub coupling: f64,
    pub periodic: bool,
    pub max_dim: usize,
}

impl SpinChainSpec {
    pub fn new(n_sites: usize, coupling: f64, periodic: bool) -> Self {
        Self {
            n_sites,
            coupling,
            periodic,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn validate(&self) -> Result<usize> {
        if self.n_sites < 2 {
            return Err(Error::InvalidArgument(format!(
                "a chain needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidArgument("coupling must be finite".into()));
        }
        check_chain_dim(self.n_sites, self.max_dim)
    }

    /// Nearest-neighbour bonds `(i, j)`, 1-based. A periodic two-site ring
    /// lists its single pair twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds: Vec<(usize, usize)> = (1..self.n_sites).map(|j| (j, j + 1)).collect();
        if self.periodic {
            bonds.push((self.n_sites, 1));
        }
        bonds
    }
}

/// `H = -J sum_<ij> (S_i^x S_j^x + S_i^y S_j^y)`.
pub fn build_xx_hamiltonian(spec: &SpinChainSpec) -> Result<Operator> {
    let dim = spec.validate()?;
    let n = spec.n_sites;
    let sx: Vec<Operator> = (1..=n)
        .map(|j| crate::operator::embed_site_with_cap(&spin_x(), j, n, spec.max_dim))
        .collect::<Result<_>>()?;
    let sy: Vec<Operator> = (1..=n)
        .map(|j| crate::operator::embed_site_with_cap(&spin_y(), j, n, spec.max_dim))
        .collect::<Result<_>>()?;
    let mut h = Operator::zeros(dim);
    for (a, b) in spec.bonds() {
        let term = &(&sx[a - 1] * &sx[b - 1]) + &(&sy[a - 1] * &sy[b - 1]);
        h.axpy(-spec.coupling, &term);
    }
    Ok(h.hermitize())
}

fn diagonal_from_sites(n_sites: usize, weight: impl Fn(usize) -> f64) -> Result<Operator> {
    let dim = check_chain_dim(n_sites, DEFAULT_MAX_DIM)?;
    let diag: Vec<f64> = (0..dim)
        .map(|index| {
            (1..=n_sites)
                .filter(|&site| (index >> (n_sites - site)) & 1 == 0)
                .map(&weight)
                .sum()
        })
        .collect();
    Ok(Operator::from_real_diagonal(&diag))
}

/// `n = sum_j (S_j^z + 1/2)`, the number of up spins.
pub fn build_occupation(n_sites: usize) -> Result<Operator> {
    if n_sites == 0 {
        return Err(Error::InvalidArgument("n_sites must be >= 1".into()));
    }
    diagonal_from_sites(n_sites, |_| 1.0)
}

/// `x = sum_j (2(j-1)/(N-1) - 1)(S_j^z + 1/2)`.
pub fn build_position(n_sites: usize) -> Result<Operator> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument(
            "position needs at least 2 sites".into(),
        ));
    }
    let span = (n_sites - 1) as f64;
    diagonal_from_sites(n_sites, |j| 2.0 * (j - 1) as f64 / span - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialStateSpec {
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub zeta: f64,
    pub x0: f64,
}

impl InitialStateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("zeta", self.zeta),
            ("x0", self.x0),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// `K0 = beta H + c1 (n - zeta)^2 + c2 (x - x0)^2`, before normalization.
pub fn initial_k_operator(
    spec: &InitialStateSpec,
    h: &Operator,
    n: &Operator,
    x: &Operator,
) -> Result<Operator> {
    spec.validate()?;
    let d = h.dim();
    if n.dim() != d || x.dim() != d {
        return Err(Error::DimMismatch {
            left: d,
            right: n.dim().max(x.dim()),
        });
    }
    let id = Operator::identity(d);
    let dn = n - &id.scale(spec.zeta);
    let dx = x - &id.scale(spec.x0);
    let mut k = h.scale(spec.beta);
    k.axpy(spec.c1, &(&dn * &dn));
    k.axpy(spec.c2, &(&dx * &dx));
    Ok(k.hermitize())
}

pub fn build_initial_k(
    spec: &InitialStateSpec,
    h: &Operator,
    n: &Operator,
    x: &Operator,
) -> Result<StateK> {
    normalize(&initial_k_operator(spec, h, n, x)?)
}

/// One row of the fermionic norm table: numeric squared norms next to their
/// closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRow {
    pub label: String,
    pub kmb_norm2: f64,
    pub covar_norm2: f64,
    pub kmb_closed: f64,
    pub covar_closed: f64,
}

impl NormRow {
    pub fn max_error(&self) -> f64 {
        (self.kmb_norm2 - self.kmb_closed)
            .abs()
            .max((self.covar_norm2 - self.covar_closed).abs())
    }
}

/// Fermi occupation `1 / (e^omega + 1)`.
pub fn fermi_occupation(omega: f64) -> f64 {
    1.0 / (omega.exp() + 1.0)
}

/// Annihilation operator of mode `i` (0-based) on `m` modes; occupied is bit 1
/// and modes before `i` carry the parity string.
fn annihilator(i: usize, m: usize) -> Operator {
    let lower = Operator::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0]);
    let parity = Operator::from_real_diagonal(&[1.0, -1.0]);
    let mut op = Operator::identity(1);
    for k in 0..m {
        let factor = match k.cmp(&i) {
            std::cmp::Ordering::Less => parity.clone(),
            std::cmp::Ordering::Equal => lower.clone(),
            std::cmp::Ordering::Greater => Operator::identity(2),
        };
        op = op.kron(&factor);
    }
    op
}

/// Squared KMB and covar norms of `id, a_i, a_i a_j, a_i† a_j, a_i† a_i - n_i`
/// at `sigma ∝ exp(-sum_i omega_i a_i† a_i)`, against their fermionic closed forms.
pub fn fermionic_gaussian_table(omegas: &[f64]) -> Result<Vec<NormRow>> {
    let m = omegas.len();
    if !(1..=3).contains(&m) {
        return Err(Error::UnsupportedModeCount(m));
    }
    if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(
            "mode energies must be positive".into(),
        ));
    }
    let a: Vec<Operator> = (0..m).map(|i| annihilator(i, m)).collect();
    let number: Vec<Operator> = a.iter().map(|ai| &ai.adjoint() * ai).collect();
    let mut k = Operator::zeros(1 << m);
    for (w, ni) in omegas.iter().zip(&number) {
        k.axpy(*w, ni);
    }
    let sigma = normalize(&k)?;
    let kmb = Geometry::new(GeometryKind::Kmb, sigma.clone());
    let covar = Geometry::new(GeometryKind::Covar, sigma);
    let occ: Vec<f64> = omegas.iter().map(|&w| fermi_occupation(w)).collect();

    let mut rows = Vec::new();
    let mut push =
        |label: String, op: Operator, kmb_closed: f64, covar_closed: f64| -> Result<()> {
            rows.push(NormRow {
                label,
                kmb_norm2: kmb.inner(&op, &op)?.re,
                covar_norm2: covar.inner(&op, &op)?.re,
                kmb_closed,
                covar_closed,
            });
            Ok(())
        };

    push("id".into(), Operator::identity(1 << m), 1.0, 1.0)?;
    for i in 0..m {
        let (w, n) = (omegas[i], occ[i]);
        push(
            format!("a_{}", i + 1),
            a[i].clone(),
            (1.0 - 2.0 * n) / w,
            0.5,
        )?;
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let (ni, nj) = (occ[i], occ[j]);
            push(
                format!("a_{} a_{}", i + 1, j + 1),
                &a[i] * &a[j],
                (1.0 - ni - nj) / (omegas[i] + omegas[j]),
                ni * nj + (1.0 - ni - nj) / 2.0,
            )?;
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let (ni, nj) = (occ[i], occ[j]);
            let gap = omegas[i] - omegas[j];
            let kmb_closed = if gap.abs() < 1e-12 {
                ni * (1.0 - ni)
            } else {
                (nj - ni) / gap
            };
            push(
                format!("a_{}^+ a_{}", i + 1, j + 1),
                &a[i].adjoint() * &a[j],
                kmb_closed,
                (ni + nj) / 2.0 - ni * nj,
            )?;
        }
    }
    for i in 0..m {
        let n = occ[i];
        let centered = &number[i] - &Operator::identity(1 << m).scale(n);
        push(
            format!("a_{0}^+ a_{0} - n_{0}", i + 1),
            centered,
            n * (1.0 - n),
            n * (1.0 - n),
        )?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{embed_site, hermitian_eig};

    fn total_sz(n: usize) -> Operator {
        let mut s = Operator::zeros(1 << n);
        for j in 1..=n {
            s = &s + &embed_site(&spin_z(), j, n).unwrap();
        }
        s
    }

    #[test]
    fn two_site_ring_counts_bond_twice() {
        let h = build_xx_hamiltonian(&SpinChainSpec::new(2, 1.0, true)).unwrap();
        let sx1 = embed_site(&spin_x(), 1, 2).unwrap();
        let sx2 = embed_site(&spin_x(), 2, 2).unwrap();
        let sy1 = embed_site(&spin_y(), 1, 2).unwrap();
        let sy2 = embed_site(&spin_y(), 2, 2).unwrap();
        let expected = (&(&sx1 * &sx2) + &(&sy1 * &sy2)).scale(-2.0);
        assert!(h.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn hamiltonian_conserves_magnetization_and_occupation() {
        for n in [2, 3, 4, 6] {
            let h = build_xx_hamiltonian(&SpinChainSpec::new(n, 1.0, true)).unwrap();
            assert!(h.commutator(&total_sz(n)).unwrap().frobenius_norm() < 1e-12);
            let occ = build_occupation(n).unwrap();
            assert!(h.commutator(&occ).unwrap().frobenius_norm() < 1e-12);
        }
        let h = build_xx_hamiltonian(&SpinChainSpec::new(6, 1.0, true)).unwrap();
        assert_eq!(h.dim(), 64);
    }

    #[test]
    fn hamiltonian_block_structure() {
        let n = 4;
        let h = build_xx_hamiltonian(&SpinChainSpec::new(n, 0.7, false)).unwrap();
        let occ = build_occupation(n).unwrap();
        let mut off = 0.0f64;
        for r in 0..16 {
            for c in 0..16 {
                if occ.matrix()[(r, r)] != occ.matrix()[(c, c)] {
                    off = off.max(h.matrix()[(r, c)].norm());
                }
            }
        }
        assert!(off < 1e-12);
    }

    #[test]
    fn periodic_chain_is_translation_invariant() {
        let n = 4;
        let h = build_xx_hamiltonian(&SpinChainSpec::new(n, 1.3, true)).unwrap();
        // cyclic shift of site labels as a permutation of basis indices
        let shift = |i: usize| ((i >> 1) | ((i & 1) << (n - 1))) & ((1 << n) - 1);
        let shifted = Operator::from_fn(1 << n, |r, c| h.matrix()[(shift(r), shift(c))]);
        assert!(shifted.max_abs_diff(&h) < 1e-12);
    }

    #[test]
    fn occupation_and_position_spectra() {
        let n = 5;
        let occ = build_occupation(n).unwrap();
        let all_up = 0;
        let all_down = (1 << n) - 1;
        assert_eq!(occ.matrix()[(all_down, all_down)].re, 0.0);
        assert_eq!(occ.matrix()[(all_up, all_up)].re, n as f64);
        let expected = &total_sz(n) + &Operator::identity(1 << n).scale(n as f64 / 2.0);
        assert!(occ.max_abs_diff(&expected) < 1e-14);

        let x = build_position(n).unwrap();
        let site1_only = all_down & !(1 << (n - 1));
        let site_n_only = all_down & !1;
        assert!((x.matrix()[(site1_only, site1_only)].re + 1.0).abs() < 1e-14);
        assert!((x.matrix()[(site_n_only, site_n_only)].re - 1.0).abs() < 1e-14);
        let h = build_xx_hamiltonian(&SpinChainSpec::new(n, 1.0, true)).unwrap();
        assert!(h.commutator(&x).unwrap().frobenius_norm() > 1e-3);
    }

    #[test]
    fn invalid_specs() {
        assert!(build_xx_hamiltonian(&SpinChainSpec::new(1, 1.0, true)).is_err());
        assert!(matches!(
            build_xx_hamiltonian(&SpinChainSpec::new(20, 1.0, true)),
            Err(Error::DimOverflow { .. })
        ));
        let bad = InitialStateSpec {
            beta: 0.0,
            c1: 0.0,
            c2: 0.0,
            zeta: 1.0,
            x0: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    fn preset_occupation(beta: f64, c: f64) -> f64 {
        let n_sites = 6;
        let h = build_xx_hamiltonian(&SpinChainSpec::new(n_sites, 1.0, true)).unwrap();
        let n = build_occupation(n_sites).unwrap();
        let x = build_position(n_sites).unwrap();
        let spec = InitialStateSpec {
            beta,
            c1: c,
            c2: c,
            zeta: 1.0,
            x0: -0.3,
        };
        let s = build_initial_k(&spec, &h, &n, &x).unwrap();
        s.expectation(&n)
    }

    #[test]
    fn preset_initial_occupations() {
        let cold = preset_occupation(1.0, 3.0);
        assert!((cold - 1.0).abs() < 0.15, "{cold}");
        assert!((cold - 1.1030903921353).abs() < 1e-9);
        // the high-temperature preset sits well above one excitation
        let hot = preset_occupation(0.1, 1.0);
        assert!((hot - 1.4334530473877).abs() < 1e-9, "{hot}");
    }

    #[test]
    fn zero_penalties_give_thermal_state() {
        let n_sites = 4;
        let h = build_xx_hamiltonian(&SpinChainSpec::new(n_sites, 1.0, true)).unwrap();
        let n = build_occupation(n_sites).unwrap();
        let x = build_position(n_sites).unwrap();
        let spec = InitialStateSpec {
            beta: 0.7,
            c1: 0.0,
            c2: 0.0,
            zeta: 1.0,
            x0: -0.3,
        };
        let s = build_initial_k(&spec, &h, &n, &x).unwrap();
        let eh = hermitian_eig(&h).unwrap();
        let thermal = eh.map(|e| (-0.7 * e).exp());
        let thermal = thermal.scale(1.0 / thermal.trace().re);
        assert!(s.rho().max_abs_diff(&thermal) < 1e-12);
    }

    #[test]
    fn fermionic_table_matches_closed_forms() {
        for omegas in [
            vec![1.0],
            vec![0.5, 2.0],
            vec![1.0, 1.0],
            vec![0.5, 1.0, 2.0],
        ] {
            for row in fermionic_gaussian_table(&omegas).unwrap() {
                assert!(row.max_error() < 1e-9, "{omegas:?} {row:?}");
            }
        }
        let rows = fermionic_gaussian_table(&[1.0]).unwrap();
        let a1 = rows.iter().find(|r| r.label == "a_1").unwrap();
        assert!((a1.covar_norm2 - 0.5).abs() < 1e-12);
        let centered = rows.last().unwrap();
        assert!((centered.kmb_norm2 - centered.covar_norm2).abs() < 1e-9);
        assert!(matches!(
            fermionic_gaussian_table(&[]),
            Err(Error::UnsupportedModeCount(0))
        ));
        assert!(fermionic_gaussian_table(&[1.0; 4]).is_err());
    }

    #[test]
    fn annihilators_anticommute() {
        let m = 3;
        for i in 0..m {
            for j in 0..m {
                let ai = annihilator(i, m);
                let aj = annihilator(j, m);
                let ac = ai.anticommutator(&aj.adjoint()).unwrap();
                let expected = if i == j {
                    Operator::identity(8)
                } else {
                    Operator::zeros(8)
                };
                assert!(ac.max_abs_diff(&expected) < 1e-15);
                assert!(ai.anticommutator(&aj).unwrap().frobenius_norm() < 1e-15);
            }
        }
    }
}
