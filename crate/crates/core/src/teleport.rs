//! The conclusive teleportation protocol: channel preparation, GXOR,
//! discrimination unitary, measurements and classical correction, with both
//! sampled and exhaustive-branch execution.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::channel::{channel_state, SchmidtSpectrum};
use crate::discrimination::{build_unitary, phi_states, DiscriminationPlan};
use crate::error::{Error, Result};
use crate::qudit::{
    apply, bell_state, clock_z, fourier, gxor, measure, root_of_unity, shift_x, DenseOperator,
    StateVector,
};

/// What the receiver applies on an inconclusive outcome. The conclusive
/// branch always receives the full `X^{d-k} Z^l` correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionStrategy {
    /// Stop after the measurements.
    #[serde(rename = "none")]
    NoCorrection,
    /// Apply `X^{d-k}` conditional on the particle-3 outcome.
    #[serde(rename = "x")]
    XOnly,
    /// Apply `X^{d-k}`, then `Z^s` conditional on the inconclusive index.
    #[serde(rename = "xz")]
    XAndZ,
}

impl CorrectionStrategy {
    pub const ALL: [CorrectionStrategy; 3] = [
        CorrectionStrategy::NoCorrection,
        CorrectionStrategy::XOnly,
        CorrectionStrategy::XAndZ,
    ];
}

impl fmt::Display for CorrectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CorrectionStrategy::NoCorrection => "none",
            CorrectionStrategy::XOnly => "x",
            CorrectionStrategy::XAndZ => "xz",
        };
        f.write_str(name)
    }
}

impl FromStr for CorrectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CorrectionStrategy::NoCorrection),
            "x" => Ok(CorrectionStrategy::XOnly),
            "xz" => Ok(CorrectionStrategy::XAndZ),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected none, x or xz)"
            ))),
        }
    }
}

/// Measurement branch of one protocol execution. `l` and `s` index the
/// conclusive and inconclusive outcomes on particle 2, `k` the computational
/// outcome on particle 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Conclusive { l: usize, k: usize },
    Inconclusive { s: usize, k: usize },
}

impl Branch {
    pub fn is_conclusive(&self) -> bool {
        matches!(self, Branch::Conclusive { .. })
    }
}

/// Record of one protocol execution (or one enumerated branch).
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub input: StateVector,
    pub branch: Branch,
    pub probability: f64,
    /// Receiver's corrected, renormalized state; zero for branches of
    /// vanishing probability.
    pub output: StateVector,
    pub fidelity: f64,
}

/// Flat serialization of a [`ProtocolRun`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolRunRecord {
    pub branch_type: String,
    pub l_or_s: usize,
    pub k: usize,
    pub probability: f64,
    pub fidelity: f64,
}

impl ProtocolRun {
    pub fn to_record(&self) -> ProtocolRunRecord {
        let (branch_type, l_or_s, k) = match self.branch {
            Branch::Conclusive { l, k } => ("conclusive".to_string(), l, k),
            Branch::Inconclusive { s, k } => ("inconclusive".to_string(), s, k),
        };
        ProtocolRunRecord {
            branch_type,
            l_or_s,
            k,
            probability: self.probability,
            fidelity: self.fidelity,
        }
    }
}

fn check_input(d: usize, psi: &StateVector) -> Result<()> {
    if psi.dims() != [d] {
        return Err(Error::Shape(format!(
            "input state has dims {:?}, expected [{d}]",
            psi.dims()
        )));
    }
    Ok(())
}

/// Powers `op^0 .. op^{d-1}` cached for corrections.
fn powers(op: &DenseOperator, d: usize) -> Vec<DenseOperator> {
    let mut out = Vec::with_capacity(d);
    out.push(DenseOperator::identity(op.dim()));
    for j in 1..d {
        out.push(out[j - 1].matmul(op));
    }
    out
}

pub(crate) struct Corrections {
    d: usize,
    x_pows: Vec<DenseOperator>,
    z_pows: Vec<DenseOperator>,
}

impl Corrections {
    pub(crate) fn new(d: usize) -> Result<Self> {
        Ok(Self {
            d,
            x_pows: powers(&shift_x(d)?, d),
            z_pows: powers(&clock_z(d)?, d),
        })
    }

    /// Correction operator for a branch, `None` when nothing is applied.
    pub(crate) fn for_branch(
        &self,
        branch: Branch,
        strategy: CorrectionStrategy,
    ) -> Option<DenseOperator> {
        let d = self.d;
        match branch {
            Branch::Conclusive { l, k } => {
                Some(self.x_pows[(d - k) % d].matmul(&self.z_pows[l]))
            }
            Branch::Inconclusive { s, k } => match strategy {
                CorrectionStrategy::NoCorrection => None,
                CorrectionStrategy::XOnly => Some(self.x_pows[(d - k) % d].clone()),
                CorrectionStrategy::XAndZ => {
                    Some(self.z_pows[s].matmul(&self.x_pows[(d - k) % d]))
                }
            },
        }
    }
}

fn finish_branch(
    psi: &StateVector,
    branch: Branch,
    probability: f64,
    pre_correction: Vec<Complex64>,
    corrections: &Corrections,
    strategy: CorrectionStrategy,
) -> ProtocolRun {
    let d = corrections.d;
    let corrected = match corrections.for_branch(branch, strategy) {
        Some(op) => op.mul_vec(&pre_correction),
        None => pre_correction,
    };
    let raw = StateVector::from_raw(vec![d], corrected).expect("valid shape");
    let (output, fidelity) = if probability > 1e-24 {
        let out = raw.normalized().expect("nonzero norm");
        let fid = psi.overlap_sqr(&out).expect("same dims");
        (out, fid)
    } else {
        (raw, 0.0)
    };
    ProtocolRun {
        input: psi.clone(),
        branch,
        probability,
        output,
        fidelity,
    }
}

/// Contracts the (collapsed) sender subsystems out of a three-party state,
/// returning the receiver's unnormalized amplitude vector.
fn extract_receiver(state: &StateVector, ket2: &[Complex64], outcome3: usize) -> Vec<Complex64> {
    let dims = state.dims();
    let (d1, d2, d3) = (dims[0], dims[1], dims[2]);
    assert_eq!(ket2.len(), d2);
    let mut v = vec![Complex64::new(0.0, 0.0); d1];
    for (r, vr) in v.iter_mut().enumerate() {
        for (j, b) in ket2.iter().enumerate() {
            *vr += b.conj() * state.amps()[(r * d2 + j) * d3 + outcome3];
        }
    }
    v
}

/// Standard teleportation through the maximally entangled channel: GXOR,
/// Fourier-basis measurement on particle 2, computational measurement on
/// particle 3, then the `X^{d-k} Z^l` correction. Every branch teleports
/// perfectly.
pub fn run_standard(d: usize, psi: &StateVector, rng: &mut impl Rng) -> Result<ProtocolRun> {
    check_input(d, psi)?;
    let state = bell_state(0, 0, d)?.tensor(psi);
    let state = apply(&gxor(d)?, &state, &[1, 2])?;
    let f = fourier(d)?;
    let rec2 = measure(&state, 1, Some(&f), rng)?;
    let rec3 = measure(&rec2.post_state, 2, None, rng)?;
    let (l, k) = (rec2.outcome, rec3.outcome);
    let f_ket: Vec<Complex64> = (0..d).map(|j| f.entry(j, l)).collect();
    let pre = extract_receiver(&rec3.post_state, &f_ket, k);
    let corrections = Corrections::new(d)?;
    Ok(finish_branch(
        psi,
        Branch::Conclusive { l, k },
        rec2.probability * rec3.probability,
        pre,
        &corrections,
        CorrectionStrategy::XAndZ,
    ))
}

/// State of the (receiver, doubled sender, particle 3) register after the
/// channel preparation, GXOR and discrimination unitary.
fn prepared_state(
    s: &SchmidtSpectrum,
    plan: &DiscriminationPlan,
    psi: &StateVector,
) -> Result<StateVector> {
    let d = s.d();
    check_input(d, psi)?;
    let state = channel_state(s).tensor(psi);
    let state = apply(&gxor(d)?, &state, &[1, 2])?;
    let state = state.embed_subsystem(1, 2 * d)?;
    apply(&plan.unitary, &state, &[1])
}

fn branch_label(d: usize, outcome2: usize, k: usize) -> Branch {
    if outcome2 < d {
        Branch::Conclusive { l: outcome2, k }
    } else {
        Branch::Inconclusive {
            s: outcome2 - d,
            k,
        }
    }
}

/// One sampled execution of the conclusive protocol. Particle 2 is measured
/// first (computationally, in the doubled space), then particle 3.
pub fn run_conclusive(
    s: &SchmidtSpectrum,
    psi: &StateVector,
    strategy: CorrectionStrategy,
    rng: &mut impl Rng,
) -> Result<ProtocolRun> {
    let plan = build_unitary(s)?;
    run_conclusive_with_plan(s, &plan, psi, strategy, rng)
}

pub fn run_conclusive_with_plan(
    s: &SchmidtSpectrum,
    plan: &DiscriminationPlan,
    psi: &StateVector,
    strategy: CorrectionStrategy,
    rng: &mut impl Rng,
) -> Result<ProtocolRun> {
    let d = s.d();
    let state = prepared_state(s, plan, psi)?;
    let rec2 = measure(&state, 1, None, rng)?;
    let rec3 = measure(&rec2.post_state, 2, None, rng)?;
    let mut ket2 = vec![Complex64::new(0.0, 0.0); 2 * d];
    ket2[rec2.outcome] = Complex64::new(1.0, 0.0);
    let pre = extract_receiver(&rec3.post_state, &ket2, rec3.outcome);
    let corrections = Corrections::new(d)?;
    // The contraction of a collapsed state is already normalized; rescale to
    // the branch amplitude so `finish_branch` sees the raw branch vector.
    let scale = (rec2.probability * rec3.probability).sqrt();
    let pre: Vec<Complex64> = pre.into_iter().map(|a| a * scale).collect();
    Ok(finish_branch(
        psi,
        branch_label(d, rec2.outcome, rec3.outcome),
        rec2.probability * rec3.probability,
        pre,
        &corrections,
        strategy,
    ))
}

/// Deterministic enumeration of all `2d * d` measurement branches, in
/// (particle-2 outcome, particle-3 outcome) lexicographic order.
pub fn enumerate_runs(
    s: &SchmidtSpectrum,
    psi: &StateVector,
    strategy: CorrectionStrategy,
) -> Result<Vec<ProtocolRun>> {
    let plan = build_unitary(s)?;
    enumerate_runs_with_plan(s, &plan, psi, strategy)
}

pub fn enumerate_runs_with_plan(
    s: &SchmidtSpectrum,
    plan: &DiscriminationPlan,
    psi: &StateVector,
    strategy: CorrectionStrategy,
) -> Result<Vec<ProtocolRun>> {
    let d = s.d();
    let state = prepared_state(s, plan, psi)?;
    let corrections = Corrections::new(d)?;
    let mut runs = Vec::with_capacity(2 * d * d);
    for outcome2 in 0..2 * d {
        for k in 0..d {
            let pre: Vec<Complex64> = (0..d)
                .map(|r| state.amps()[(r * 2 * d + outcome2) * d + k])
                .collect();
            let probability: f64 = pre.iter().map(|a| a.norm_sqr()).sum();
            runs.push(finish_branch(
                psi,
                branch_label(d, outcome2, k),
                probability,
                pre,
                &corrections,
                strategy,
            ));
        }
    }
    Ok(runs)
}

/// Linear maps taking the input state to each branch's unnormalized
/// pre-correction receiver vector, extracted by running the protocol on the
/// computational basis kets. Branches come in the same order as
/// [`enumerate_runs`].
pub(crate) fn branch_maps(
    s: &SchmidtSpectrum,
    plan: &DiscriminationPlan,
) -> Result<Vec<(Branch, DenseOperator)>> {
    let d = s.d();
    let mut maps: Vec<(Branch, DenseOperator)> = Vec::with_capacity(2 * d * d);
    for outcome2 in 0..2 * d {
        for k in 0..d {
            maps.push((branch_label(d, outcome2, k), DenseOperator::zeros(d)));
        }
    }
    for j in 0..d {
        let basis_input = StateVector::ket(d, j)?;
        let state = prepared_state(s, plan, &basis_input)?;
        for outcome2 in 0..2 * d {
            for k in 0..d {
                let map = &mut maps[outcome2 * d + k].1;
                for r in 0..d {
                    map.set_entry(r, j, state.amps()[(r * 2 * d + outcome2) * d + k]);
                }
            }
        }
    }
    Ok(maps)
}

/// Total probability of the conclusive branches.
pub fn conclusive_mass(runs: &[ProtocolRun]) -> f64 {
    runs.iter()
        .filter(|r| r.branch.is_conclusive())
        .map(|r| r.probability)
        .sum()
}

/// Comparison of every enumerated pre-correction branch against its closed
/// form. Direction deviations are phase-insensitive distances between
/// normalized vectors; prefactor ratios compare simulated branch norms to the
/// norms the nominal closed-form prefactors would give.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalStateReport {
    pub max_conclusive_dev: f64,
    pub max_inconclusive_dev: f64,
    /// Deviation of the `X^{d-k}`-corrected inconclusive branch from its
    /// single-phase closed form, exact vector comparison.
    pub max_x_corrected_dev: f64,
    /// Simulated / nominal norm for conclusive branches; equals
    /// `sqrt(success)` because the nominal form carries no success factor.
    pub conclusive_prefactor_ratio: f64,
    /// Simulated / nominal norm for inconclusive branches; equals 1.
    pub inconclusive_prefactor_ratio: f64,
    pub zero_probability_inconclusive: bool,
}

/// `min over theta of || a/|a| - e^{i theta} b/|b| ||`, evaluated at the
/// optimal phase so matching directions cancel componentwise instead of
/// through `sqrt(2 - 2|<a|b>|)`, which loses half the significand.
fn phase_insensitive_dev(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if na < 1e-14 && nb < 1e-14 {
        return 0.0;
    }
    if na < 1e-14 || nb < 1e-14 {
        return std::f64::consts::SQRT_2;
    }
    let ip: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if ip.norm() > 1e-300 {
        ip.conj() / ip.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x / na - phase * (y / nb)).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn conditional_state_check(
    s: &SchmidtSpectrum,
    psi: &StateVector,
) -> Result<ConditionalStateReport> {
    let d = s.d();
    check_input(d, psi)?;
    let plan = build_unitary(s)?;
    let state = prepared_state(s, &plan, psi)?;
    let phi = phi_states(s)?;
    let x_pows = powers(&shift_x(d)?, d);
    let z_pows = powers(&clock_z(d)?, d);
    let df = d as f64;

    let mut max_conclusive_dev: f64 = 0.0;
    let mut max_inconclusive_dev: f64 = 0.0;
    let mut max_x_corrected_dev: f64 = 0.0;
    let mut conclusive_ratios: Vec<f64> = Vec::new();
    let mut inconclusive_ratios: Vec<f64> = Vec::new();
    let mut zero_probability_inconclusive = true;

    for outcome2 in 0..2 * d {
        for k in 0..d {
            let sim: Vec<Complex64> = (0..d)
                .map(|r| state.amps()[(r * 2 * d + outcome2) * d + k])
                .collect();
            let sim_norm: f64 = sim.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            match branch_label(d, outcome2, k) {
                Branch::Conclusive { l, k } => {
                    // Nominal closed form: (1/d) Z^{d-l} X^k |psi>.
                    let op = z_pows[(d - l) % d].matmul(&x_pows[k]);
                    let closed: Vec<Complex64> = op
                        .mul_vec(psi.amps())
                        .into_iter()
                        .map(|a| a / df)
                        .collect();
                    let closed_norm: f64 =
                        closed.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                    max_conclusive_dev = max_conclusive_dev.max(phase_insensitive_dev(&sim, &closed));
                    conclusive_ratios.push(sim_norm / closed_norm);
                }
                Branch::Inconclusive { s: s_idx, k } => {
                    // Closed form: (1/d) sum_l phi_l[s] Z^{d-l} X^k |psi>;
                    // phi_l[s] carries the 1/sqrt(d) of the nominal
                    // coefficient, so this matches the nominal prefactor.
                    let mut closed = vec![Complex64::new(0.0, 0.0); d];
                    let mut x_closed = vec![Complex64::new(0.0, 0.0); d];
                    for (l, phi_l) in phi.iter().enumerate() {
                        let op = z_pows[(d - l) % d].matmul(&x_pows[k]);
                        let term = op.mul_vec(psi.amps());
                        let coeff = phi_l[s_idx] / df;
                        for (t, c) in closed.iter_mut().zip(term.iter()) {
                            *t += coeff * c;
                        }
                        // After X^{d-k}: sum_l phi_l[s] w^{-lk} Z^{d-l}|psi> / d
                        let zterm = z_pows[(d - l) % d].mul_vec(psi.amps());
                        let xcoeff = coeff * root_of_unity(-((l * k) as i64), d);
                        for (t, c) in x_closed.iter_mut().zip(zterm.iter()) {
                            *t += xcoeff * c;
                        }
                    }
                    let closed_norm: f64 =
                        closed.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                    if sim_norm > 1e-10 || closed_norm > 1e-10 {
                        zero_probability_inconclusive = false;
                        max_inconclusive_dev =
                            max_inconclusive_dev.max(phase_insensitive_dev(&sim, &closed));
                        inconclusive_ratios.push(sim_norm / closed_norm);
                    }
                    let x_sim = x_pows[(d - k) % d].mul_vec(&sim);
                    let dev = x_sim
                        .iter()
                        .zip(x_closed.iter())
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max);
                    max_x_corrected_dev = max_x_corrected_dev.max(dev);
                }
            }
        }
    }

    let spread = |v: &[f64]| -> f64 {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &x in v {
            min = min.min(x);
            max = max.max(x);
        }
        if v.is_empty() {
            0.0
        } else {
            max - min
        }
    };
    if spread(&conclusive_ratios) > 1e-9 || spread(&inconclusive_ratios) > 1e-9 {
        return Err(Error::InternalConsistency(
            "branch norm ratios are not uniform across branches".into(),
        ));
    }

    Ok(ConditionalStateReport {
        max_conclusive_dev,
        max_inconclusive_dev,
        max_x_corrected_dev,
        conclusive_prefactor_ratio: conclusive_ratios.first().copied().unwrap_or(0.0),
        inconclusive_prefactor_ratio: inconclusive_ratios.first().copied().unwrap_or(1.0),
        zero_probability_inconclusive,
    })
}

/// Max amplitude deviation between the prepared protocol state (with the
/// inconclusive block rotated by the Fourier transform) and the two-channel
/// closed form built from the residual coefficients.
pub fn protocol_identity_deviation(s: &SchmidtSpectrum, psi: &StateVector) -> Result<f64> {
    let d = s.d();
    check_input(d, psi)?;
    let plan = build_unitary(s)?;
    let state = prepared_state(s, &plan, psi)?;

    // I (+) F on the doubled sender space.
    let f = fourier(d)?;
    let mut rot = DenseOperator::identity(2 * d);
    for r in 0..d {
        for c in 0..d {
            rot.set_entry(d + r, d + c, f.entry(r, c));
        }
        rot.set_entry(d + r, d + r, f.entry(r, r));
    }
    let state = apply(&rot, &state, &[1])?;

    let a_min = s.a_min();
    let sqrt_s = (d as f64 * a_min * a_min).sqrt();
    let b: Vec<f64> = s
        .coeffs()
        .iter()
        .map(|&a| (a * a - a_min * a_min).max(0.0).sqrt())
        .collect();
    let x_pows = powers(&shift_x(d)?, d);
    let z_pows = powers(&clock_z(d)?, d);

    let mut expect = vec![Complex64::new(0.0, 0.0); d * 2 * d * d];
    for l in 0..d {
        // sqrt(S)|u_l> + sum_n w^{ln} B_n |a_n>
        let mut sender = vec![Complex64::new(0.0, 0.0); 2 * d];
        sender[l] = Complex64::new(sqrt_s, 0.0);
        for (n, &bn) in b.iter().enumerate() {
            sender[d + n] = root_of_unity((l * n) as i64, d) * bn;
        }
        for k in 0..d {
            let op = z_pows[(d - l) % d].matmul(&x_pows[k]);
            let receiver = op.mul_vec(psi.amps());
            for (r, rv) in receiver.iter().enumerate() {
                for (j, sv) in sender.iter().enumerate() {
                    expect[(r * 2 * d + j) * d + k] += rv * sv / d as f64;
                }
            }
        }
    }

    Ok(state
        .amps()
        .iter()
        .zip(expect.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}
