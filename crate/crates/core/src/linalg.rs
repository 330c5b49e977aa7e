//! Small dense linear-algebra helpers shared by the channel and
//! discrimination modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::qudit::DenseOperator;

/// Eigenvalues of a Hermitian matrix, ascending. The input is assumed
/// Hermitian; only its lower triangle effectively matters.
pub fn hermitian_eigenvalues(m: &DenseOperator) -> Vec<f64> {
    let d = m.dim();
    let nm = DMatrix::from_fn(d, d, |r, c| m.entry(r, c));
    let mut ev: Vec<f64> = nm.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

/// Smallest eigenvalue of a Hermitian matrix. Dimensions 2 and 3 use the
/// closed-form characteristic-polynomial solutions; larger matrices go
/// through the iterative decomposition.
pub fn min_eigenvalue(m: &DenseOperator) -> f64 {
    match m.dim() {
        2 => {
            let a = m.entry(0, 0).re;
            let b = m.entry(1, 1).re;
            let c = m.entry(0, 1);
            let mid = 0.5 * (a + b);
            let delta = 0.5 * (a - b);
            mid - (delta * delta + c.norm_sqr()).sqrt()
        }
        3 => min_eigenvalue_3x3(m),
        _ => hermitian_eigenvalues(m)[0],
    }
}

fn det3(m: [[Complex64; 3]; 3]) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

// Trigonometric solution of the characteristic cubic; the smallest root is
// q + 2p cos(phi + 2pi/3) with phi in [0, pi/3].
fn min_eigenvalue_3x3(m: &DenseOperator) -> f64 {
    let off = m.entry(0, 1).norm_sqr() + m.entry(0, 2).norm_sqr() + m.entry(1, 2).norm_sqr();
    let diag = [m.entry(0, 0).re, m.entry(1, 1).re, m.entry(2, 2).re];
    if off <= f64::EPSILON * (diag.iter().map(|x| x * x).sum::<f64>() + 1.0) {
        return diag.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    let q = (diag[0] + diag[1] + diag[2]) / 3.0;
    let p2 = diag.iter().map(|x| (x - q) * (x - q)).sum::<f64>() + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (r, row) in b.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let shift = if r == c {
                Complex64::new(q, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            *entry = (m.entry(r, c) - shift) / p;
        }
    }
    let r = (det3(b).re / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
}

/// Number of eigenvalues above `threshold`.
pub fn rank_by_eigenvalues(m: &DenseOperator, threshold: f64) -> usize {
    hermitian_eigenvalues(m)
        .iter()
        .filter(|&&ev| ev > threshold)
        .count()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalizes `candidates` against `basis` (and each other) by modified
/// Gram-Schmidt with a second re-orthogonalization pass, appending accepted
/// vectors to `basis` in candidate order. Candidates whose residual norm
/// falls below `tol` are dropped.
pub fn extend_orthonormal(basis: &mut Vec<Vec<Complex64>>, candidates: &[Vec<Complex64>], tol: f64) {
    for cand in candidates {
        let mut v = cand.clone();
        for _ in 0..2 {
            for q in basis.iter() {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q.iter()) {
                    *vi -= c * qi;
                }
            }
        }
        let n = norm(&v);
        if n > tol {
            for vi in &mut v {
                *vi /= n;
            }
            basis.push(v);
        }
    }
}

/// Standard basis vectors of dimension `dim` in index order, for use as
/// completion candidates.
pub fn standard_basis(dim: usize) -> Vec<Vec<Complex64>> {
    (0..dim)
        .map(|i| {
            let mut v = vec![Complex64::new(0.0, 0.0); dim];
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_known_hermitian() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let mut m = DenseOperator::zeros(2);
        m.set_entry(0, 0, Complex64::new(1.0, 0.0));
        m.set_entry(0, 1, Complex64::new(0.0, 1.0));
        m.set_entry(1, 0, Complex64::new(0.0, -1.0));
        m.set_entry(1, 1, Complex64::new(1.0, 0.0));
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 0.0).abs() <= 1e-12);
        assert!((ev[1] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn rank_counts_positive_eigenvalues() {
        let mut m = DenseOperator::zeros(3);
        m.set_entry(0, 0, Complex64::new(2.0, 0.0));
        m.set_entry(1, 1, Complex64::new(1e-14, 0.0));
        assert_eq!(rank_by_eigenvalues(&m, 1e-10), 1);
    }

    #[test]
    fn gram_schmidt_completes_to_full_basis() {
        let dim = 4;
        let mut basis = vec![];
        let first = vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.5, 0.0),
        ];
        extend_orthonormal(&mut basis, &[first], 1e-10);
        extend_orthonormal(&mut basis, &standard_basis(dim), 1e-10);
        assert_eq!(basis.len(), dim);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let g = dot(a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - Complex64::new(expect, 0.0)).norm() <= 1e-12);
            }
        }
    }
}
