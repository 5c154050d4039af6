//! Simulation of a continuous-time permutation-valued birth process and its
//! two limits, with exact small-n oracles and statistical verification.
//!
//! The state is a permutation of `{1, …, n}` encoded by its left-inversion
//! vector; each component count evolves as an independent time-inhomogeneous
//! birth process. Two limit regimes are implemented and checked against
//! simulation:
//!
//! * a macroscopic (fluid) limit, where rescaled element trajectories follow
//!   deterministic curves `z_{x,a}(t)` and the empirical measure of the
//!   permutation concentrates on an explicit two-parameter density; and
//! * a local limit around a bulk position, where the left-inversion counts
//!   become i.i.d. birth processes indexed by ℤ whose reconstruction is a
//!   random bijection of ℤ, coupled to the finite system by dependent
//!   thinning.
//!
//! Modules: [`perm`] (permutations, inversion encodings, exact enumeration),
//! [`birth`] (rate functions and thinning simulation), [`process`] (the
//! n-component process), [`global`] (fluid-limit analytics and experiments),
//! [`local`] (ℤ-indexed machinery and the coupling), [`stats`]
//! (goodness-of-fit statistics), [`rng`] (counter-based stream derivation).

pub mod birth;
pub mod error;
pub mod global;
pub mod local;
pub mod perm;
pub mod process;
pub mod rng;
pub mod stats;

pub use error::Error;
pub use perm::{InversionVector, Permutation};
pub use process::MallowsProcessPath;
