//! Non-maximally entangled channels given by their Schmidt coefficients,
//! the derived family of phase-shifted sender states, and the two-channel
//! decomposition.

use num_complex::Complex64;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::qudit::{root_of_unity, DenseOperator, StateVector};

/// Coefficient below which an amplitude counts as zero for linear
/// (in)dependence purposes.
pub const ZERO_COEFF_THRESHOLD: f64 = 1e-12;

/// Schmidt coefficients of a two-qudit pure channel. Order is significant:
/// index m labels the Schmidt basis ket `|m>|m>`. Coefficients are
/// nonnegative reals with squares summing to 1.
///
/// Serializes as a plain JSON array of the coefficients; deserialization
/// validates normalization (use [`SchmidtSpectrum::new_renormalized`] for
/// unnormalized input).
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    d: usize,
    coeffs: Vec<f64>,
}

impl Serialize for SchmidtSpectrum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coeffs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SchmidtSpectrum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coeffs = Vec::<f64>::deserialize(deserializer)?;
        SchmidtSpectrum::new(coeffs).map_err(D::Error::custom)
    }
}

impl SchmidtSpectrum {
    /// Accepts only spectra already normalized to within 1e-9.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&coeffs)?;
        let sum_sq: f64 = coeffs.iter().map(|a| a * a).sum();
        if (sum_sq - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(sum_sq));
        }
        Ok(Self {
            d: coeffs.len(),
            coeffs,
        })
    }

    /// Rescales the coefficients so their squares sum to 1.
    pub fn new_renormalized(coeffs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&coeffs)?;
        let sum_sq: f64 = coeffs.iter().map(|a| a * a).sum();
        if sum_sq < 1e-18 {
            return Err(Error::InvalidCoefficients(
                "all coefficients are zero".into(),
            ));
        }
        let scale = sum_sq.sqrt();
        Ok(Self {
            d: coeffs.len(),
            coeffs: coeffs.into_iter().map(|a| a / scale).collect(),
        })
    }

    fn check_entries(coeffs: &[f64]) -> Result<()> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidDimension(coeffs.len()));
        }
        for (index, &value) in coeffs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidCoefficients(format!(
                    "coefficient at index {index} is not finite"
                )));
            }
            if value < 0.0 {
                return Err(Error::NegativeCoefficient { index, value });
            }
        }
        Ok(())
    }

    /// The maximally entangled spectrum `A_m = 1/sqrt(d)`.
    pub fn maximal(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        Ok(Self {
            d,
            coeffs: vec![1.0 / (d as f64).sqrt(); d],
        })
    }

    /// Random spectrum with every coefficient bounded away from zero;
    /// linearly independent by construction. Intended for verification
    /// sweeps and tests.
    pub fn random_li(d: usize, rng: &mut impl Rng) -> Result<Self> {
        let coeffs: Vec<f64> = (0..d).map(|_| 0.15 + 0.85 * rng.gen::<f64>()).collect();
        Self::new_renormalized(coeffs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Smallest coefficient (the value, not an index).
    pub fn a_min(&self) -> f64 {
        self.coeffs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Indices of coefficients below [`ZERO_COEFF_THRESHOLD`].
    pub fn zero_indices(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a <= ZERO_COEFF_THRESHOLD)
            .map(|(i, _)| i)
            .collect()
    }

    pub(crate) fn require_li(&self) -> Result<()> {
        let zeros = self.zero_indices();
        if zeros.is_empty() {
            Ok(())
        } else {
            Err(Error::LinearlyDependent(zeros))
        }
    }
}

/// The `d` sender states `|nu_l> = Z^l sum_k A_k |k>` together with their
/// Gram matrix.
#[derive(Debug, Clone)]
pub struct NuFamily {
    pub d: usize,
    pub states: Vec<StateVector>,
    pub gram: DenseOperator,
}

/// Two-qudit channel `sum_m A_m |m>|m>`.
pub fn channel_state(s: &SchmidtSpectrum) -> StateVector {
    let d = s.d();
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for (m, &a) in s.coeffs().iter().enumerate() {
        amps[m * d + m] = Complex64::new(a, 0.0);
    }
    StateVector::from_raw(vec![d, d], amps).expect("valid shape")
}

/// Closed-form Gram entry `<nu_n|nu_m> = sum_k exp(2 pi i k(m-n)/d) A_k^2`.
fn gram_closed_form(s: &SchmidtSpectrum, n: usize, m: usize) -> Complex64 {
    let d = s.d();
    s.coeffs()
        .iter()
        .enumerate()
        .map(|(k, &a)| root_of_unity((k as i64) * (m as i64 - n as i64), d) * (a * a))
        .sum()
}

/// Builds the nu-state family and its Gram matrix. The Gram matrix is
/// computed from direct inner products (Hermitized exactly) and checked
/// against the closed form.
pub fn nu_family(s: &SchmidtSpectrum) -> NuFamily {
    let d = s.d();
    let states: Vec<StateVector> = (0..d)
        .map(|l| {
            let amps: Vec<Complex64> = s
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, &a)| root_of_unity((l * k) as i64, d) * a)
                .collect();
            StateVector::from_raw(vec![d], amps).expect("valid shape")
        })
        .collect();

    let mut gram = DenseOperator::zeros(d);
    for n in 0..d {
        for m in n..d {
            let g = states[n].inner(&states[m]).expect("same dims");
            gram.set_entry(n, m, g);
            gram.set_entry(m, n, g.conj());
        }
    }
    for n in 0..d {
        for m in 0..d {
            debug_assert!(
                (gram.entry(n, m) - gram_closed_form(s, n, m)).norm() <= 1e-12,
                "Gram closed form diverges from direct inner product"
            );
        }
    }
    NuFamily { d, states, gram }
}

/// Number of nonzero coefficients and whether the nu family is linearly
/// independent (rank == d). Agrees with the numerical rank of the Gram
/// matrix for spectra whose coefficients are not borderline.
pub fn li_rank(s: &SchmidtSpectrum) -> (usize, bool) {
    let rank = s.d() - s.zero_indices().len();
    // Cross-check against the Gram spectrum unless some coefficient sits in
    // the gap where the two thresholds disagree by construction.
    let ambiguous = s
        .coeffs()
        .iter()
        .any(|&a| a > ZERO_COEFF_THRESHOLD && a * a * (s.d() as f64) <= 1e-10);
    if !ambiguous {
        debug_assert_eq!(
            rank,
            linalg::rank_by_eigenvalues(&nu_family(s).gram, 1e-10),
            "coefficient rank disagrees with Gram rank"
        );
    }
    (rank, rank == s.d())
}

/// Coefficient-level split of the channel into a maximally entangled part
/// of weight `d * A_min^2` and a residual channel. `residual` is `None`
/// for the maximal channel, where the second term vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDecomposition {
    pub weight_success: f64,
    pub residual: Option<Vec<f64>>,
}

pub fn decompose_channel(s: &SchmidtSpectrum) -> Result<ChannelDecomposition> {
    s.require_li()?;
    let d = s.d() as f64;
    let a_min = s.a_min();
    let weight_success = d * a_min * a_min;
    let rest = 1.0 - weight_success;
    if rest <= 1e-12 {
        return Ok(ChannelDecomposition {
            weight_success: 1.0,
            residual: None,
        });
    }
    let residual = s
        .coeffs()
        .iter()
        .map(|&a| ((a * a - a_min * a_min).max(0.0) / rest).sqrt())
        .collect();
    Ok(ChannelDecomposition {
        weight_success,
        residual: Some(residual),
    })
}
