//! Optimal conclusive discrimination of the nu-state family: failure
//! probability, failure states, and the extended-space unitary realizing the
//! discrimination map, plus a grid-search feasibility oracle that bounds the
//! optimum without using the closed form.

use num_complex::Complex64;

use crate::channel::{nu_family, SchmidtSpectrum};
use crate::error::{Error, Result};
use crate::linalg;
use crate::qudit::{root_of_unity, DenseOperator};

/// Gram matrix of the failure states shifted by the per-state success
/// probabilities: `Q_{k,l} = <nu_k|nu_l> - p_k delta_{k,l}`. Positive
/// semidefiniteness of this matrix is the feasibility condition for a
/// conclusive discrimination strategy with success vector `p`.
#[derive(Debug, Clone)]
pub struct QMatrix {
    pub d: usize,
    pub entries: DenseOperator,
}

impl QMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

/// Builds `Q(p)` from the nu-family Gram matrix.
pub fn q_matrix(s: &SchmidtSpectrum, p: &[f64]) -> Result<QMatrix> {
    let d = s.d();
    if p.len() != d {
        return Err(Error::Shape(format!(
            "success vector of length {} for dimension {}",
            p.len(),
            d
        )));
    }
    let fam = nu_family(s);
    let mut entries = fam.gram;
    for (k, &pk) in p.iter().enumerate() {
        let v = entries.entry(k, k) - Complex64::new(pk, 0.0);
        entries.set_entry(k, k, v);
    }
    Ok(QMatrix { d, entries })
}

/// Optimal average failure probability for uniform priors:
/// `1 - d * min_k(A_k^2)`.
pub fn optimal_failure(s: &SchmidtSpectrum) -> Result<f64> {
    s.require_li()?;
    let a_min = s.a_min();
    Ok((1.0 - s.d() as f64 * a_min * a_min).clamp(0.0, 1.0))
}

/// Failure states `|phi_l>` in the inconclusive subspace, unnormalized;
/// `phi[l][k]` is the coefficient on the k-th inconclusive basis ket.
pub fn phi_states(s: &SchmidtSpectrum) -> Result<Vec<Vec<Complex64>>> {
    s.require_li()?;
    let d = s.d();
    let a_min = s.a_min();
    let b: Vec<f64> = s
        .coeffs()
        .iter()
        .map(|&a| (a * a - a_min * a_min).max(0.0).sqrt())
        .collect();
    let scale = 1.0 / (d as f64).sqrt();
    Ok((0..d)
        .map(|l| {
            (0..d)
                .map(|k| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (m, &bm) in b.iter().enumerate() {
                        acc += root_of_unity((m as i64) * (l as i64 - k as i64), d) * bm;
                    }
                    acc * scale
                })
                .collect()
        })
        .collect())
}

/// Validated discrimination strategy on the doubled space `U (+) A`:
/// coordinates `0..d` are the conclusive basis, `d..2d` the inconclusive
/// basis. The sender's space injects onto the first `d` coordinates.
#[derive(Debug, Clone)]
pub struct DiscriminationPlan {
    pub d: usize,
    /// Common failure probability of every state.
    pub failure: f64,
    /// `1 - failure`.
    pub success: f64,
    /// Failure states, one per input state, unnormalized.
    pub phi: Vec<Vec<Complex64>>,
    /// Unitary of size `2d` mapping embedded nu states to
    /// `sqrt(success)|u_l> + |phi_l>`.
    pub unitary: DenseOperator,
}

impl DiscriminationPlan {
    /// Injects a `d`-dimensional vector onto the first `d` coordinates of
    /// the doubled space.
    pub fn embed(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.d, "embedding expects a vector of dimension d");
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * self.d];
        out[..self.d].copy_from_slice(v);
        out
    }
}

/// Builds the discrimination plan with the default (index-order) completion.
pub fn build_unitary(s: &SchmidtSpectrum) -> Result<DiscriminationPlan> {
    let order: Vec<usize> = (0..2 * s.d()).collect();
    build_unitary_with_completion(s, &order)
}

/// Uniform priors are the only supported prior assignment.
pub fn build_unitary_with_priors(
    s: &SchmidtSpectrum,
    priors: &[f64],
) -> Result<DiscriminationPlan> {
    let d = s.d();
    let uniform = 1.0 / d as f64;
    if priors.len() != d || priors.iter().any(|&e| (e - uniform).abs() > 1e-12) {
        return Err(Error::UnsupportedPriors);
    }
    build_unitary(s)
}

/// As [`build_unitary`], but the orthonormal completion of the unmapped
/// domain and codomain complements draws standard basis vectors in the given
/// order. The completion choice does not affect any observable statistic.
pub fn build_unitary_with_completion(
    s: &SchmidtSpectrum,
    completion_order: &[usize],
) -> Result<DiscriminationPlan> {
    s.require_li()?;
    let d = s.d();
    let dim = 2 * d;
    if completion_order.len() != dim {
        return Err(Error::Shape(format!(
            "completion order of length {} for extended dimension {}",
            completion_order.len(),
            dim
        )));
    }
    let fam = nu_family(s);
    let failure = optimal_failure(s)?;
    let success = 1.0 - failure;
    let phi = phi_states(s)?;

    for (l, phi_l) in phi.iter().enumerate() {
        let norm_sqr: f64 = phi_l.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sqr - failure).abs() > 1e-10 {
            return Err(Error::InternalConsistency(format!(
                "phi_{l} squared norm {norm_sqr} differs from failure {failure}"
            )));
        }
    }

    // Domain vectors: nu states embedded on the first d coordinates.
    // Target vectors: sqrt(S)|u_l> + |phi_l>.
    let mut domain: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let mut targets: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    let sqrt_s = success.sqrt();
    for l in 0..d {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[..d].copy_from_slice(fam.states[l].amps());
        domain.push(v);
        let mut t = vec![Complex64::new(0.0, 0.0); dim];
        t[l] = Complex64::new(sqrt_s, 0.0);
        t[d..].copy_from_slice(&phi[l]);
        targets.push(t);
    }

    // The map nu_l -> t_l extends to a unitary only if it preserves the
    // Gram matrix.
    for k in 0..d {
        for l in 0..d {
            let g_t: Complex64 = targets[k]
                .iter()
                .zip(targets[l].iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            if (g_t - fam.gram.entry(k, l)).norm() > 1e-10 {
                return Err(Error::InternalConsistency(format!(
                    "isometry condition violated at ({k},{l}): target Gram {g_t} vs nu Gram {}",
                    fam.gram.entry(k, l)
                )));
            }
        }
    }

    // Orthonormalize both families in the same index order so matching
    // triangular coefficients cancel, then complete both sides over the
    // standard basis in `completion_order`.
    let mut q_dom: Vec<Vec<Complex64>> = Vec::new();
    linalg::extend_orthonormal(&mut q_dom, &domain, 1e-10);
    let mut q_cod: Vec<Vec<Complex64>> = Vec::new();
    linalg::extend_orthonormal(&mut q_cod, &targets, 1e-10);
    if q_dom.len() != d || q_cod.len() != d {
        return Err(Error::InternalConsistency(
            "input family lost rank during orthonormalization".into(),
        ));
    }
    let std_basis = linalg::standard_basis(dim);
    let completion: Vec<Vec<Complex64>> = completion_order
        .iter()
        .map(|&i| std_basis[i].clone())
        .collect();
    linalg::extend_orthonormal(&mut q_dom, &completion, 1e-8);
    linalg::extend_orthonormal(&mut q_cod, &completion, 1e-8);
    if q_dom.len() != dim || q_cod.len() != dim {
        return Err(Error::InternalConsistency(
            "orthonormal completion did not reach full dimension".into(),
        ));
    }

    // U = sum_i |q_cod_i><q_dom_i|
    let mut unitary = DenseOperator::zeros(dim);
    for i in 0..dim {
        for r in 0..dim {
            for c in 0..dim {
                let v = unitary.entry(r, c) + q_cod[i][r] * q_dom[i][c].conj();
                unitary.set_entry(r, c, v);
            }
        }
    }

    let residual = unitary.unitarity_residual();
    if residual > 1e-10 {
        return Err(Error::InternalConsistency(format!(
            "unitarity residual {residual} after completion"
        )));
    }
    for l in 0..d {
        let image = unitary.mul_vec(&domain[l]);
        let dev: f64 = image
            .iter()
            .zip(targets[l].iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::InternalConsistency(format!(
                "U nu_{l} deviates from its target by {dev}"
            )));
        }
    }

    Ok(DiscriminationPlan {
        d,
        failure,
        success,
        phi,
        unitary,
    })
}

/// Outcome of the grid-search feasibility oracle.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best (smallest) average failure probability found on the grid.
    pub failure: f64,
    /// The success vector achieving it.
    pub best_p: Vec<f64>,
}

const PSD_EIG_TOL: f64 = 1e-10;
// Margin for the principal-minor prefilter: any point whose Q passes the
// eigenvalue test has all principal minors above -1e-9 (interlacing plus a
// Gershgorin bound on the spectrum), so pruning below that margin never
// discards an eigenvalue-feasible point.
const MINOR_MARGIN: f64 = 1e-9;

struct OracleSearch {
    gram: DenseOperator,
    d: usize,
    steps: usize,
    resolution: f64,
    best_sum: i64,
    best_p: Option<Vec<usize>>,
}

impl OracleSearch {
    fn p_of(&self, idx: usize) -> f64 {
        idx as f64 * self.resolution
    }

    fn feasible(&self, indices: &[usize]) -> bool {
        // Q(p) = Gram - diag(p), built from the cached Gram matrix.
        let mut q = self.gram.clone();
        for (k, &idx) in indices.iter().enumerate() {
            let v = q.entry(k, k) - Complex64::new(self.p_of(idx), 0.0);
            q.set_entry(k, k, v);
        }
        linalg::min_eigenvalue(&q) >= -PSD_EIG_TOL
    }

    /// Largest grid index for coordinate `c` compatible with the pairwise
    /// principal minors against the already-fixed coordinates, or `None`
    /// when no value works.
    fn pair_cap(&self, fixed: &[usize], c: usize) -> Option<usize> {
        let mut cap = self.steps;
        for (k, &ik) in fixed.iter().enumerate() {
            let g2 = self.gram.entry(k, c).norm_sqr();
            let slack = 1.0 - self.p_of(ik);
            if slack <= 1e-15 {
                if g2 > MINOR_MARGIN {
                    return None;
                }
                continue;
            }
            let ub = 1.0 - (g2 - MINOR_MARGIN) / slack;
            if ub < 0.0 {
                return None;
            }
            let ub_idx = (ub / self.resolution + 1e-9).floor() as i64;
            cap = cap.min(ub_idx.max(0) as usize);
        }
        Some(cap)
    }

    fn descend(&mut self, fixed: &mut Vec<usize>) {
        let level = fixed.len();
        let partial: i64 = fixed.iter().map(|&i| i as i64).sum();

        if level == self.d - 1 {
            let Some(cap) = self.pair_cap(fixed, level) else {
                return;
            };
            if partial + cap as i64 <= self.best_sum {
                return;
            }
            // Feasibility is monotone decreasing in each coordinate, so the
            // largest feasible last index is found by bisection.
            fixed.push(0);
            if !self.feasible(fixed) {
                fixed.pop();
                return;
            }
            let (mut lo, mut hi) = (0usize, cap);
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                *fixed.last_mut().expect("pushed above") = mid;
                if self.feasible(fixed) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            if partial + lo as i64 > self.best_sum {
                self.best_sum = partial + lo as i64;
                *fixed.last_mut().expect("pushed above") = lo;
                self.best_p = Some(fixed.clone());
            }
            fixed.pop();
            return;
        }

        // Optimistic bound over the remaining coordinates from the pairwise
        // minors; used to start the scan at the first index that could
        // strictly improve on the incumbent.
        let mut rest_max = 0i64;
        for c in level + 1..self.d {
            match self.pair_cap(fixed, c) {
                Some(cap) => rest_max += cap as i64,
                None => return,
            }
        }
        let Some(own_cap) = self.pair_cap(fixed, level) else {
            return;
        };
        // Subtree rooted at idx tops out at partial + idx + rest_max.
        let start = (self.best_sum + 1 - partial - rest_max).max(0) as usize;
        if start > own_cap {
            return;
        }
        for idx in start..=own_cap {
            fixed.push(idx);
            // Adding a coordinate can only tighten the subtree, so recheck
            // the minors at the next level; recursion handles it.
            self.descend(fixed);
            fixed.pop();
        }
    }
}

/// Maximizes the average success `(1/d) sum_l p_l` over the grid
/// `p_l in {0, resolution, 2*resolution, ..., 1}`, accepting a point iff
/// `Q(p)` has minimum eigenvalue at least `-1e-10`. Ties are broken by the
/// lexicographically smallest grid index, so the result is deterministic.
/// Pruning only removes points that are provably infeasible or provably do
/// not improve the incumbent, leaving the result identical to exhaustive
/// enumeration.
pub fn feasibility_oracle(s: &SchmidtSpectrum, resolution: f64) -> Result<OracleResult> {
    s.require_li()?;
    let d = s.d();
    if d > 4 {
        return Err(Error::OracleUnsupported(d));
    }
    if !(resolution > 1e-4 && resolution <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "oracle resolution {resolution} outside (1e-4, 0.5]"
        )));
    }
    let steps = (1.0 / resolution + 1e-9).floor() as usize;

    let mut search = OracleSearch {
        gram: nu_family(s).gram,
        d,
        steps,
        resolution,
        best_sum: -1,
        best_p: None,
    };

    // Seed the pruning bound with the best equal-component point; the scan
    // itself still discovers the incumbent so lexicographic tie-breaking is
    // preserved.
    {
        let (mut lo, mut hi) = (0usize, steps);
        let diag_feasible =
            |g: usize| -> bool { search.feasible(&vec![g; d]) };
        if diag_feasible(0) {
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if diag_feasible(mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            search.best_sum = (lo as i64) * d as i64 - 1;
        }
    }

    let mut fixed = Vec::with_capacity(d);
    search.descend(&mut fixed);

    let best_idx = search.best_p.ok_or_else(|| {
        Error::InternalConsistency("feasibility oracle found no feasible grid point".into())
    })?;
    let best_p: Vec<f64> = best_idx.iter().map(|&i| i as f64 * resolution).collect();
    let avg_success: f64 = best_p.iter().sum::<f64>() / d as f64;
    Ok(OracleResult {
        failure: 1.0 - avg_success,
        best_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{enumerate_branches, fourier, StateVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spectrum_2() -> SchmidtSpectrum {
        SchmidtSpectrum::new(vec![0.6, 0.8]).unwrap()
    }

    fn spectrum_3() -> SchmidtSpectrum {
        SchmidtSpectrum::new(vec![0.2f64.sqrt(), 0.3f64.sqrt(), 0.5f64.sqrt()]).unwrap()
    }

    #[test]
    fn optimal_failure_examples() {
        assert!(optimal_failure(&SchmidtSpectrum::maximal(4).unwrap()).unwrap() <= 1e-12);
        assert!((optimal_failure(&spectrum_2()).unwrap() - 0.28).abs() <= 1e-12);
        assert!((optimal_failure(&spectrum_3()).unwrap() - 0.4).abs() <= 1e-12);
    }

    #[test]
    fn optimal_failure_rejects_ld() {
        let s = SchmidtSpectrum::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            optimal_failure(&s),
            Err(Error::LinearlyDependent(_))
        ));
    }

    #[test]
    fn q_with_zero_p_is_gram() {
        let s = spectrum_3();
        let q = q_matrix(&s, &[0.0; 3]).unwrap();
        assert!(q.entries.max_abs_diff(&nu_family(&s).gram) <= 1e-15);
    }

    #[test]
    fn q_maximal_all_ones_is_zero() {
        let s = SchmidtSpectrum::maximal(3).unwrap();
        let q = q_matrix(&s, &[1.0; 3]).unwrap();
        assert!(q.entries.max_abs_diff(&DenseOperator::zeros(3)) <= 1e-12);
    }

    #[test]
    fn q_fourier_conjugate_is_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for d in 2..=5 {
            let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
            let failure = optimal_failure(&s).unwrap();
            let q = q_matrix(&s, &vec![1.0 - failure; d]).unwrap();
            let f = fourier(d).unwrap();
            let tilde = f.matmul(&q.entries).matmul(&f.adjoint());
            for r in 0..d {
                for c in 0..d {
                    let expect = if r == c {
                        let a = s.coeffs()[r];
                        Complex64::new(failure - 1.0 + d as f64 * a * a, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!(
                        (tilde.entry(r, c) - expect).norm() <= 1e-10,
                        "d={d} entry ({r},{c})"
                    );
                }
            }
        }
    }

    #[test]
    fn q_at_optimum_is_psd_with_zero_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 2..=6 {
            let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
            let success = 1.0 - optimal_failure(&s).unwrap();
            let q = q_matrix(&s, &vec![success; d]).unwrap();
            let min_eig = q.min_eigenvalue();
            assert!(
                (-1e-10..=1e-8).contains(&min_eig),
                "min eigenvalue {min_eig} at d={d}"
            );
            assert!(q.is_psd(1e-10));
        }
    }

    #[test]
    fn q_past_optimum_is_not_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in 2..=6 {
            let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
            let success = 1.0 - optimal_failure(&s).unwrap();
            let q = q_matrix(&s, &vec![success + 0.01; d]).unwrap();
            assert!(q.min_eigenvalue() < -1e-6);
        }
    }

    #[test]
    fn phi_vanishes_for_maximal() {
        let phi = phi_states(&SchmidtSpectrum::maximal(3).unwrap()).unwrap();
        for v in phi {
            for c in v {
                assert!(c.norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn phi_norms_match_failure() {
        let phi = phi_states(&spectrum_2()).unwrap();
        for v in &phi {
            let n: f64 = v.iter().map(|c| c.norm_sqr()).sum();
            assert!((n - 0.28).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_gram_equals_q_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=5 {
            let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
            let phi = phi_states(&s).unwrap();
            let success = 1.0 - optimal_failure(&s).unwrap();
            let q = q_matrix(&s, &vec![success; d]).unwrap();
            for k in 0..d {
                for l in 0..d {
                    let g: Complex64 = phi[k]
                        .iter()
                        .zip(phi[l].iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    assert!((g - q.entries.entry(k, l)).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn phi_family_is_linearly_dependent() {
        let phi = phi_states(&spectrum_3()).unwrap();
        let mut gram = DenseOperator::zeros(3);
        for k in 0..3 {
            for l in 0..3 {
                let g: Complex64 = phi[k]
                    .iter()
                    .zip(phi[l].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                gram.set_entry(k, l, g);
            }
        }
        assert!(linalg::rank_by_eigenvalues(&gram, 1e-10) <= 2);
    }

    #[test]
    fn unitary_maximal_restricts_to_inverse_fourier() {
        let d = 3;
        let plan = build_unitary(&SchmidtSpectrum::maximal(d).unwrap()).unwrap();
        let f_adj = fourier(d).unwrap().adjoint();
        for r in 0..d {
            for c in 0..d {
                assert!((plan.unitary.entry(r, c) - f_adj.entry(r, c)).norm() <= 1e-10);
            }
            for c in 0..d {
                assert!(plan.unitary.entry(d + r, c).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn unitary_discriminates_unambiguously_d2() {
        let s = spectrum_2();
        let plan = build_unitary(&s).unwrap();
        let fam = nu_family(&s);
        let mapped = plan.unitary.mul_vec(&plan.embed(fam.states[0].amps()));
        let state = StateVector::new(vec![4], mapped).unwrap();
        let branches = enumerate_branches(&state, 0, None).unwrap();
        assert!((branches[0].probability - 0.72).abs() <= 1e-10);
        assert!(branches[1].probability <= 1e-20);
    }

    #[test]
    fn unitary_cross_talk_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [2usize, 3, 4] {
            for _ in 0..5 {
                let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
                let plan = build_unitary(&s).unwrap();
                let fam = nu_family(&s);
                for l in 0..d {
                    let image = plan.unitary.mul_vec(&plan.embed(fam.states[l].amps()));
                    for (lp, amp) in image.iter().enumerate().take(d) {
                        if lp != l {
                            assert!(
                                amp.norm_sqr() <= 1e-20,
                                "cross-talk {} at d={d} l={l} l'={lp}",
                                amp.norm_sqr()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unitary_validates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in 2..=5 {
            let s = SchmidtSpectrum::random_li(d, &mut rng).unwrap();
            let plan = build_unitary(&s).unwrap();
            assert!(plan.unitary.unitarity_residual() <= 1e-10);
            let fam = nu_family(&s);
            let sqrt_s = plan.success.sqrt();
            for l in 0..d {
                let image = plan.unitary.mul_vec(&plan.embed(fam.states[l].amps()));
                for (r, amp) in image.iter().enumerate() {
                    let expect = if r < d {
                        if r == l {
                            Complex64::new(sqrt_s, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    } else {
                        plan.phi[l][r - d]
                    };
                    assert!((amp - expect).norm() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn priors_must_be_uniform() {
        let s = spectrum_2();
        assert!(build_unitary_with_priors(&s, &[0.5, 0.5]).is_ok());
        assert!(matches!(
            build_unitary_with_priors(&s, &[0.3, 0.7]),
            Err(Error::UnsupportedPriors)
        ));
    }

    #[test]
    fn oracle_maximal_failure_is_zero() {
        let s = SchmidtSpectrum::maximal(2).unwrap();
        let r = feasibility_oracle(&s, 0.01).unwrap();
        assert!(r.failure <= 0.01);
    }

    #[test]
    fn oracle_d2_example() {
        let r = feasibility_oracle(&spectrum_2(), 0.005).unwrap();
        assert!((r.failure - 0.28).abs() <= 0.01, "oracle failure {}", r.failure);
        assert!((r.best_p[0] - r.best_p[1]).abs() <= 0.005 + 1e-12);
    }

    #[test]
    fn oracle_d3_matches_closed_form() {
        let s = spectrum_3();
        let r = feasibility_oracle(&s, 0.01).unwrap();
        let closed = optimal_failure(&s).unwrap();
        assert!(r.failure >= closed - 1e-9);
        assert!(r.failure <= closed + 0.03 + 1e-12);
    }

    // Several coefficients can share the minimal value; the closed form and
    // the plan still apply, with the residual vanishing on every tied index.
    #[test]
    fn degenerate_minimum_is_handled() {
        let s = SchmidtSpectrum::new(vec![0.5, 0.5, 0.5f64.sqrt()]).unwrap();
        let failure = optimal_failure(&s).unwrap();
        assert!((failure - 0.25).abs() <= 1e-12);
        let plan = build_unitary(&s).unwrap();
        for phi_l in &plan.phi {
            let n: f64 = phi_l.iter().map(|c| c.norm_sqr()).sum();
            assert!((n - failure).abs() <= 1e-10);
        }
        let oracle = feasibility_oracle(&s, 0.01).unwrap();
        assert!((oracle.failure - failure).abs() <= 0.011);
    }

    #[test]
    fn oracle_rejects_large_dimensions() {
        let s = SchmidtSpectrum::maximal(5).unwrap();
        assert!(matches!(
            feasibility_oracle(&s, 0.05),
            Err(Error::OracleUnsupported(5))
        ));
    }
}
