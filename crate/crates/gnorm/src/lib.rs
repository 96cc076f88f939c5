//! Certified, convergent upper and lower bounds on the universal and
//! reduced C*-norms of integral group ring elements of finitely presented
//! groups, plus the word-problem, invertibility, and spectrum decision
//! procedures built on those bounds.
//!
//! Upper bounds come from a sum-of-squares/quadratic-module SDP hierarchy
//! with exact-rational certificate extraction ([`sos`], [`sdp`],
//! [`certify`]). Lower bounds come from exact trace moments and ball
//! compressions ([`lower`]) and from exact finite-dimensional unitary
//! representations ([`rep`]). [`decide`] orchestrates both sides into
//! monotone bound reports and the derived decision procedures.

pub mod certify;
pub mod decide;
pub mod error;
pub mod exact;
pub mod lower;
pub mod presentation;
pub mod rep;
pub mod ring;
pub mod sdp;
pub mod sos;
pub mod wordprob;

pub use error::{Error, Result};
