//! Orbits of Möbius transformations over prime fields, and the
//! exponential-sum machinery for measuring cancellation along them:
//! single/coprime/prime-indexed/weighted sums, the combinatorial
//! decomposition of the von Mangoldt function with its dyadic box sums,
//! products-in-residue-classes counting via multiplicative characters,
//! and a deterministic experiment harness with a CLI.

pub mod arith;
pub mod error;
pub mod expsum;
pub mod fpcore;
pub mod harness;
pub mod hb;
pub mod moebius;
pub mod residue;

pub use error::{Error, Result};
pub use fpcore::{Fp, Fp2, SpectralKind};
pub use moebius::{MoebiusMap, OrbitSpec, ProjPoint};
