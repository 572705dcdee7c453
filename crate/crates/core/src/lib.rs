//! Conjugate functions and conformal differential invariants on R³.
//!
//! Two functions f, g on a domain in R³ are conjugate when their gradients
//! have equal length and are orthogonal. This crate decides pointwise whether
//! f admits a conjugate, computes the candidate conjugate directions,
//! reconstructs g by path integration, and evaluates a catalogue of conformal
//! invariants of f together with the identities relating them.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod directions;
pub mod expr;
pub mod gallery;
pub mod integrability;
pub mod invariants;
pub mod jet;
pub mod mobius;
pub mod reconstruct;
pub mod sampling;
pub mod selftest;
pub mod tensor;

pub use directions::{DirectionClass, DirectionSolution, NormalFrame};
pub use expr::{parse, Expr, ParseError};
pub use invariants::{Invariant, InvariantSet, TensorSet};
pub use jet::Jet3;
pub use conformal::ConformalMap;
pub use gallery::GalleryEntry;
pub use integrability::{IntegrabilityReport, PointReport, Verdict};
pub use mobius::{CanonicalCase, CanonicalForm, LorentzPair};
pub use reconstruct::{PathGrid, SampledField};
pub use tensor::Vec3;
