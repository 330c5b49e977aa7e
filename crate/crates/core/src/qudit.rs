//! Dense state-vector and operator algebra for small multi-qudit registers.
//!
//! States live over an ordered list of subsystem dimensions, amplitudes
//! stored row-major over that list. Operators are dense complex square
//! matrices. Everything is immutable after construction and safe to share
//! across threads.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// `exp(2*pi*i * num / den)` on the principal branch.
pub fn root_of_unity(num: i64, den: usize) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (num as f64) / (den as f64))
}

/// Pure state of a composite register; `amps` is row-major over `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from explicit amplitudes. The squared norm must be
    /// within 1e-9 of 1.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        let state = Self::from_raw(dims, amps)?;
        let n2 = state.norm_sqr();
        if (n2 - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(n2));
        }
        Ok(state)
    }

    /// Same shape checks as [`StateVector::new`] but without the norm check;
    /// used internally for unnormalized branch vectors.
    pub(crate) fn from_raw(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidDimension(
                dims.iter().copied().min().unwrap_or(0),
            ));
        }
        let total: usize = dims.iter().product();
        if amps.len() != total {
            return Err(Error::Shape(format!(
                "expected {} amplitudes for dims {:?}, got {}",
                total,
                dims,
                amps.len()
            )));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state `|indices[0], indices[1], ...>`.
    pub fn basis_state(dims: Vec<usize>, indices: &[usize]) -> Result<Self> {
        if indices.len() != dims.len() {
            return Err(Error::Shape(format!(
                "{} indices for {} subsystems",
                indices.len(),
                dims.len()
            )));
        }
        for (&i, &d) in indices.iter().zip(dims.iter()) {
            if i >= d {
                return Err(Error::InvalidIndex { index: i, dim: d });
            }
        }
        let total: usize = dims.iter().product();
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        let mut flat = 0usize;
        for (&i, &d) in indices.iter().zip(dims.iter()) {
            flat = flat * d + i;
        }
        amps[flat] = Complex64::new(1.0, 0.0);
        Self::from_raw(dims, amps)
    }

    /// Single-qudit basis ket `|index>` of dimension `d`.
    pub fn ket(d: usize, index: usize) -> Result<Self> {
        Self::basis_state(vec![d], &[index])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "inner product between dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`.
    pub fn overlap_sqr(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Tensor product, `self` on the left.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self { dims, amps }
    }

    pub(crate) fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(Error::ZeroNormState);
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    /// Re-indexes subsystem `target` into a larger space of dimension
    /// `new_dim`, placing the existing amplitudes on the first coordinates.
    pub fn embed_subsystem(&self, target: usize, new_dim: usize) -> Result<Self> {
        if target >= self.dims.len() {
            return Err(Error::InvalidIndex {
                index: target,
                dim: self.dims.len(),
            });
        }
        let old = self.dims[target];
        if new_dim < old {
            return Err(Error::Shape(format!(
                "cannot embed dimension {old} into {new_dim}"
            )));
        }
        let mut dims = self.dims.clone();
        dims[target] = new_dim;
        let total: usize = dims.iter().product();
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        let old_strides = strides(&self.dims);
        let new_strides = strides(&dims);
        for (flat, &a) in self.amps.iter().enumerate() {
            let digits = unflatten(flat, &self.dims, &old_strides);
            let mut new_flat = 0usize;
            for (j, &dig) in digits.iter().enumerate() {
                new_flat += dig * new_strides[j];
            }
            amps[new_flat] = a;
        }
        Self::from_raw(dims, amps)
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

fn unflatten(mut flat: usize, dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut digits = vec![0usize; dims.len()];
    for j in 0..dims.len() {
        digits[j] = flat / strides[j];
        flat %= strides[j];
    }
    digits
}

/// Dense complex square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.entry(c, r).conj())
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "operator dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let a = self.entry(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..d {
                    let v = out.entry(r, c) + a * rhs.entry(k, c);
                    out.set_entry(r, c, v);
                }
            }
        }
        out
    }

    /// `self^k` by repeated multiplication.
    pub fn pow(&self, k: usize) -> Self {
        let mut out = Self::identity(self.dim);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Kronecker product, `self` acting on the left (slower-varying) factor.
    pub fn kron(&self, rhs: &Self) -> Self {
        let d = self.dim * rhs.dim;
        DenseOperator::from_fn(d, |r, c| {
            let (ra, rb) = (r / rhs.dim, r % rhs.dim);
            let (ca, cb) = (c / rhs.dim, c % rhs.dim);
            self.entry(ra, ca) * rhs.entry(rb, cb)
        })
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.dim {
                acc += self.entry(r, c) * v[c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// Max-norm distance to another operator.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |(U^dag U - I)_{rc}|`; zero for exactly unitary matrices.
    pub fn unitarity_residual(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&Self::identity(self.dim))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

/// Cyclic shift: `X|n> = |(n+1) mod d>`.
pub fn shift_x(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    Ok(DenseOperator::from_fn(d, |r, c| {
        if r == (c + 1) % d {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Phase gate: `Z|n> = exp(2*pi*i n/d)|n>`.
pub fn clock_z(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    Ok(DenseOperator::from_fn(d, |r, c| {
        if r == c {
            root_of_unity(r as i64, d)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Discrete Fourier transform: `<k|F|l> = exp(2*pi*i lk/d)/sqrt(d)`.
pub fn fourier(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    let scale = 1.0 / (d as f64).sqrt();
    Ok(DenseOperator::from_fn(d, |k, l| {
        root_of_unity((k * l) as i64, d) * scale
    }))
}

/// Two-qudit gate `|i, j> -> |i, (i - j) mod d>`; self-inverse.
pub fn gxor(d: usize) -> Result<DenseOperator> {
    check_dim(d)?;
    let mut op = DenseOperator::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            let col = i * d + j;
            let row = i * d + (i + d - j) % d;
            op.set_entry(row, col, Complex64::new(1.0, 0.0));
        }
    }
    Ok(op)
}

/// Maximally entangled two-qudit basis state
/// `(1/sqrt(d)) sum_j exp(2*pi*i jn/d) |j> |(j+m) mod d>`.
pub fn bell_state(n: usize, m: usize, d: usize) -> Result<StateVector> {
    check_dim(d)?;
    if n >= d {
        return Err(Error::InvalidIndex { index: n, dim: d });
    }
    if m >= d {
        return Err(Error::InvalidIndex { index: m, dim: d });
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for j in 0..d {
        amps[j * d + (j + m) % d] = root_of_unity((j * n) as i64, d) * scale;
    }
    StateVector::from_raw(vec![d, d], amps)
}

/// Applies `op` to the listed subsystems of `state`, identity elsewhere.
/// `targets` are distinct subsystem indices; their dimensions, in order,
/// must multiply to `op.dim()`.
pub fn apply(op: &DenseOperator, state: &StateVector, targets: &[usize]) -> Result<StateVector> {
    let dims = state.dims();
    let n = dims.len();
    for &t in targets {
        if t >= n {
            return Err(Error::InvalidIndex { index: t, dim: n });
        }
    }
    for (i, &t) in targets.iter().enumerate() {
        if targets[..i].contains(&t) {
            return Err(Error::Shape(format!("duplicate target {t}")));
        }
    }
    let tdim: usize = targets.iter().map(|&t| dims[t]).product();
    if tdim != op.dim() {
        return Err(Error::Shape(format!(
            "operator of dimension {} applied to subsystems of total dimension {}",
            op.dim(),
            tdim
        )));
    }

    let st = strides(dims);
    // Flat offset of each composite target index, row-major over the target
    // dimensions in listed order.
    let mut offsets = vec![0usize; tdim];
    for (t, off) in offsets.iter_mut().enumerate() {
        let mut rem = t;
        for &tg in targets.iter().rev() {
            let dt = dims[tg];
            *off += (rem % dt) * st[tg];
            rem /= dt;
        }
    }

    let rest: Vec<usize> = (0..n).filter(|i| !targets.contains(i)).collect();
    let rest_total: usize = rest.iter().map(|&i| dims[i]).product();

    let mut out = vec![Complex64::new(0.0, 0.0); state.total_dim()];
    let mut gathered = vec![Complex64::new(0.0, 0.0); tdim];
    for r in 0..rest_total {
        let mut base = 0usize;
        let mut rem = r;
        for &rg in rest.iter().rev() {
            base += (rem % dims[rg]) * st[rg];
            rem /= dims[rg];
        }
        for (t, &off) in offsets.iter().enumerate() {
            gathered[t] = state.amps()[base + off];
        }
        let transformed = op.mul_vec(&gathered);
        for (t, &off) in offsets.iter().enumerate() {
            out[base + off] = transformed[t];
        }
    }
    StateVector::from_raw(dims.to_vec(), out)
}

/// One projective-measurement branch: outcome index, its Born probability,
/// and the renormalized conditional state (measured subsystem collapsed to
/// the corresponding basis ket).
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: StateVector,
}

fn branch(
    state: &StateVector,
    target: usize,
    basis: Option<&DenseOperator>,
    outcome: usize,
) -> (f64, StateVector) {
    let dims = state.dims();
    let st = strides(dims);
    let m = dims[target];
    let stride_t = st[target];
    let total = state.total_dim();

    // w[rest] = sum_j conj(B[j][outcome]) amp[rest, j]
    let mut post = vec![Complex64::new(0.0, 0.0); total];
    let mut prob = 0.0;
    let block = stride_t * m;
    let mut base = 0usize;
    while base < total {
        for low in 0..stride_t {
            let mut w = Complex64::new(0.0, 0.0);
            match basis {
                None => w = state.amps()[base + outcome * stride_t + low],
                Some(b) => {
                    for j in 0..m {
                        w += b.entry(j, outcome).conj() * state.amps()[base + j * stride_t + low];
                    }
                }
            }
            prob += w.norm_sqr();
            match basis {
                None => post[base + outcome * stride_t + low] = w,
                Some(b) => {
                    for j in 0..m {
                        post[base + j * stride_t + low] = b.entry(j, outcome) * w;
                    }
                }
            }
        }
        base += block;
    }
    (
        prob,
        StateVector {
            dims: dims.to_vec(),
            amps: post,
        },
    )
}

fn check_basis(state: &StateVector, target: usize, basis: Option<&DenseOperator>) -> Result<()> {
    let dims = state.dims();
    if target >= dims.len() {
        return Err(Error::InvalidIndex {
            index: target,
            dim: dims.len(),
        });
    }
    if let Some(b) = basis {
        if b.dim() != dims[target] {
            return Err(Error::Shape(format!(
                "basis of dimension {} for subsystem of dimension {}",
                b.dim(),
                dims[target]
            )));
        }
        debug_assert!(b.unitarity_residual() <= 1e-10, "measurement basis not unitary");
    }
    Ok(())
}

/// Deterministic variant of [`measure`]: every branch, in outcome order.
/// Probabilities sum to 1 for a normalized input; zero-probability branches
/// carry their (zero) residual vector unnormalized.
pub fn enumerate_branches(
    state: &StateVector,
    target: usize,
    basis: Option<&DenseOperator>,
) -> Result<Vec<MeasurementRecord>> {
    check_basis(state, target, basis)?;
    if state.norm_sqr() < 1e-14 {
        return Err(Error::ZeroNormState);
    }
    let m = state.dims()[target];
    let mut out = Vec::with_capacity(m);
    for o in 0..m {
        let (p, raw) = branch(state, target, basis, o);
        let post_state = if p > 1e-28 {
            raw.normalized()?
        } else {
            raw
        };
        out.push(MeasurementRecord {
            outcome: o,
            probability: p,
            post_state,
        });
    }
    Ok(out)
}

/// Projective measurement of one subsystem. `basis` columns are the
/// measurement kets; `None` means computational. The outcome is sampled by
/// inverse CDF over branch probabilities in outcome-index order, so a given
/// seed reproduces outcomes bit-for-bit.
pub fn measure(
    state: &StateVector,
    target: usize,
    basis: Option<&DenseOperator>,
    rng: &mut impl Rng,
) -> Result<MeasurementRecord> {
    check_basis(state, target, basis)?;
    if state.norm_sqr() < 1e-14 {
        return Err(Error::ZeroNormState);
    }
    let m = state.dims()[target];
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut chosen = None;
    for o in 0..m {
        let (p, raw) = branch(state, target, basis, o);
        cumulative += p;
        if u < cumulative {
            chosen = Some((o, p, raw));
            break;
        }
    }
    // Fall back to the last nonzero branch if rounding pushed u past the sum.
    let (outcome, probability, raw) = match chosen {
        Some(c) => c,
        None => {
            let mut last = None;
            for o in (0..m).rev() {
                let (p, raw) = branch(state, target, basis, o);
                if p > 1e-28 {
                    last = Some((o, p, raw));
                    break;
                }
            }
            last.ok_or(Error::ZeroNormState)?
        }
    };
    Ok(MeasurementRecord {
        outcome,
        probability,
        post_state: raw.normalized()?,
    })
}

/// Samples a pure state from the unitarily invariant measure: independent
/// standard complex Gaussian amplitudes, normalized.
pub fn haar_state(d: usize, rng: &mut impl Rng) -> StateVector {
    assert!(d >= 2, "dimension must be at least 2");
    loop {
        let amps: Vec<Complex64> = (0..d)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im)
            })
            .collect();
        let state = StateVector {
            dims: vec![d],
            amps,
        };
        if state.norm_sqr() > 1e-12 {
            return state.normalized().expect("nonzero norm");
        }
    }
}
