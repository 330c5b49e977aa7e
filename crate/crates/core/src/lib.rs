//! Simulation of conclusive teleportation of qudit states through
//! non-maximally entangled pure channels.
//!
//! The channel is specified by its Schmidt coefficients. Teleporting through
//! it turns the sender's Bell measurement into the problem of unambiguously
//! discriminating a family of non-orthogonal single-qudit states; this crate
//! builds the optimal discrimination strategy, runs the full protocol with
//! configurable classical corrections, and evaluates average fidelities
//! three independent ways (closed form, exact second-moment integration,
//! Monte Carlo).
//!
//! Modules:
//! - [`qudit`]: dense state vectors, the shift/clock/Fourier/GXOR gate set,
//!   projective measurement and Haar sampling,
//! - [`channel`]: Schmidt spectra, the derived sender-state family and the
//!   two-channel decomposition,
//! - [`discrimination`]: optimal failure probability, failure states, the
//!   extended-space unitary, and a grid-search feasibility oracle,
//! - [`teleport`]: the protocol itself, sampled or branch-enumerated,
//! - [`fidelity`]: closed-form averages, the exact Haar evaluator and Monte
//!   Carlo estimators,
//! - [`cli`]: the batch front-end used by the `qudit-teleport` binary.

pub mod channel;
pub mod cli;
pub mod discrimination;
pub mod error;
pub mod fidelity;
pub mod linalg;
pub mod qudit;
pub mod teleport;
