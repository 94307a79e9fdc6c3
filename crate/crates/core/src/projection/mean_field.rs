use crate::error::{Error, Result};
use crate::operator::{CMatrix, Operator, StateK, C64, I, ONE, ZERO};
use crate::projection::OperatorBasis;

/// Maximum deviation from a product form accepted by [`mf_project`].
pub const PRODUCT_TOL: f64 = 1e-9;

/// Single-qubit Pauli matrix `sigma^a`, with `a = 0` the identity.
fn pauli_entry(a: usize, row: usize, col: usize) -> C64 {
    match (a, row, col) {
        (0, r, c) if r == c => ONE,
        (1, r, c) if r != c => ONE,
        (2, 0, 1) => -I,
        (2, 1, 0) => I,
        (3, 0, 0) => ONE,
        (3, 1, 1) => -ONE,
        _ => ZERO,
    }
}

fn pauli(a: usize) -> Operator {
    Operator::from_fn(2, |r, c| pauli_entry(a, r, c))
}

fn n_sites_of(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Bit of `index` belonging to `site` (0-based, site 0 most significant).
fn site_bit(index: usize, site: usize, n: usize) -> usize {
    (index >> (n - 1 - site)) & 1
}

/// Single-site reduced density matrices, site 0 first.
pub fn partial_traces(state: &StateK) -> Result<Vec<CMatrix>> {
    let rho = state.rho_matrix();
    let d = state.dim();
    let n = n_sites_of(d)?;
    let mut out = vec![CMatrix::zeros(2, 2); n];
    for (site, local) in out.iter_mut().enumerate() {
        let mask = 1usize << (n - 1 - site);
        for i in 0..d {
            if i & mask != 0 {
                continue;
            }
            for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let r = if a == 1 { i | mask } else { i };
                let c = if b == 1 { i | mask } else { i };
                local[(a, b)] += rho[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Coefficients `Tr(P_s O) / d` of `O` in the Pauli-string basis; `s` is read
/// as base-4 digits with site 0 most significant.
fn pauli_coefficients(o: &Operator, n: usize) -> Vec<C64> {
    let d = 1usize << n;
    let m = o.matrix();
    let count = 1usize << (2 * n);
    let mut coeffs = vec![ZERO; count];
    for (s, coeff) in coeffs.iter_mut().enumerate() {
        let digits: Vec<usize> = (0..n).map(|j| (s >> (2 * (n - 1 - j))) & 3).collect();
        let flip: usize = digits
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1 || a == 2)
            .fold(0, |acc, (j, _)| acc | (1 << (n - 1 - j)));
        let mut acc = ZERO;
        for row in 0..d {
            let col = row ^ flip;
            let mut p = ONE;
            for (j, &a) in digits.iter().enumerate() {
                p *= pauli_entry(a, site_bit(row, j, n), site_bit(col, j, n));
            }
            // Tr(P O) = sum_row P[row, col] O[col, row]
            acc += p * m[(col, row)];
        }
        *coeff = acc / d as f64;
    }
    coeffs
}

fn check_local_basis(basis: &OperatorBasis, site: usize) -> Result<()> {
    if basis.dim() != 2 {
        return Err(Error::DimMismatch {
            left: 2,
            right: basis.dim(),
        });
    }
    // {id} ∪ basis must span all 2x2 matrices: rank of the Pauli coordinates
    let mut rows: Vec<[f64; 4]> = vec![[1.0, 0.0, 0.0, 0.0]];
    for q in basis.elements() {
        let m = q.matrix();
        let coords = [1, 2, 3].map(|a| {
            let p = pauli(a);
            crate::operator::trace_product(p.matrix(), m).re / 2.0
        });
        rows.push([0.0, coords[0], coords[1], coords[2]]);
    }
    let mat = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let rank = mat
        .svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10)
        .count();
    if rank < 4 {
        return Err(Error::InvalidArgument(format!(
            "local basis of site {} does not span the single-site algebra",
            site + 1
        )));
    }
    Ok(())
}

/// Mean-field projection of `o` at a product state `sigma`:
/// `<O> + sum_Q (Q - <Q>) d<O>/d<Q>` over the local bases, with `<O>`
/// expanded as a multilinear function of single-site expectation values.
///
/// Every local basis must span the single-site algebra together with the
/// identity; the result does not depend on which such basis is chosen.
pub fn mf_project(sigma: &StateK, local_bases: &[OperatorBasis], o: &Operator) -> Result<Operator> {
    let d = sigma.dim();
    if o.dim() != d {
        return Err(Error::DimMismatch {
            left: d,
            right: o.dim(),
        });
    }
    let n = n_sites_of(d)?;
    if local_bases.len() != n {
        return Err(Error::DimMismatch {
            left: n,
            right: local_bases.len(),
        });
    }
    for (site, b) in local_bases.iter().enumerate() {
        check_local_basis(b, site)?;
    }

    let locals = partial_traces(sigma)?;
    let mut product = locals[0].clone();
    for l in &locals[1..] {
        product = product.kronecker(l);
    }
    let deviation = (&product - sigma.rho_matrix()).camax();
    if deviation > PRODUCT_TOL {
        return Err(Error::NotProductState { deviation });
    }

    // m[j][a] = <sigma^a>_j
    let means: Vec<[C64; 4]> = locals
        .iter()
        .map(|l| [0, 1, 2, 3].map(|a| crate::operator::trace_product(l, pauli(a).matrix())))
        .collect();
    let coeffs = pauli_coefficients(o, n);

    let mut expectation = ZERO;
    let mut gradient = vec![[ZERO; 4]; n];
    for (s, c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let digits: Vec<usize> = (0..n).map(|j| (s >> (2 * (n - 1 - j))) & 3).collect();
        let factors: Vec<C64> = digits
            .iter()
            .enumerate()
            .map(|(j, &a)| means[j][a])
            .collect();
        expectation += factors.iter().fold(*c, |acc, f| acc * f);
        for j in 0..n {
            if digits[j] == 0 {
                continue;
            }
            let rest = factors
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .fold(*c, |acc, (_, f)| acc * f);
            gradient[j][digits[j]] += rest;
        }
    }

    let mut out = Operator::identity(d).scale_complex(expectation);
    for (j, grad) in gradient.iter().enumerate() {
        for a in 1..4 {
            if grad[a].norm() == 0.0 {
                continue;
            }
            let centered = &pauli(a) - &Operator::identity(2).scale_complex(means[j][a]);
            let embedded = crate::operator::embed_site(&centered, j + 1, n)?;
            out = &out + &embedded.scale_complex(grad[a]);
        }
    }
    Ok(out)
}

/// Local bases `{sx, sy, sz}` on every site.
pub fn pauli_local_bases(n_sites: usize) -> Vec<OperatorBasis> {
    (0..n_sites)
        .map(|_| {
            OperatorBasis::new(
                vec![pauli(1), pauli(2), pauli(3)],
                vec!["sx".into(), "sy".into(), "sz".into()],
            )
            .expect("Pauli matrices are Hermitian")
        })
        .collect()
}
