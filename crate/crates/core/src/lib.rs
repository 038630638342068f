//! A desk-scale laboratory for environment-interacting program selection and
//! test-driven refinement.
//!
//! Everything runs inside a fully enumerable synthetic world: programs are
//! finite input/output tables, test suites are explicit case lists, and an
//! execution harness produces per-case outputs, scalar rewards, and structured
//! reports. Because the world is enumerable, every estimator in this crate can
//! be checked against a brute-force oracle.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`env`] — the generative world: latent algorithms, lossy descriptions,
//!   program/test samplers, and the execution harness.
//! - [`kernel`] — functional similarity between programs under a distribution
//!   over test suites, its sharpened variants, equivalence, Gram matrices,
//!   and fuzzy neighborhood measures.
//! - [`snr`] — signal-to-noise diagnostics comparing the smooth
//!   (mean-agreement) estimator against the sharp (all-suites-identical)
//!   estimator, with exact closed forms on atom distributions.
//! - [`select`] — execution-based selection heuristics (MBR, MaxPass, CodeT
//!   families and friends) over a cached execution matrix, greedy top-k
//!   selection, and code-test calibration checks.
//! - [`bandit`] — Gaussian-process Thompson sampling over a finite arm set
//!   with a reward split into an observable and a hidden component; regret
//!   traces, information gain, and bound verification.
//! - [`refine`] — an exact-Bayesian stand-in policy that plays iterative
//!   code/test refinement under oracle-test or self-test feedback.
//! - [`harness`] — reproducible experiment runner: JSON configs, seed
//!   management, CSV emission, and run manifests.
//! - [`verify`] — the named acceptance checks binding all of the above.
//!
//! Determinism is a first-class requirement: all sampling goes through
//! explicitly seeded ChaCha streams and every run with an identical config
//! reproduces byte-identical CSV output.


pub mod bandit;
pub mod env;
pub mod error;
pub mod exact;

pub mod harness;
pub mod kernel;
pub mod refine;
pub mod select;
pub mod snr;



pub mod stream;
pub mod verify;


pub use error::{Error, Result};
