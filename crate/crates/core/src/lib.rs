//! Cutting-and-pasting of Kasparov modules over finite-dimensional
//! C*-algebras, with numerical verification of every gluing identity.
//!
//! Algebras are direct sums of matrix blocks over sites, Hilbert modules are
//! column spaces per coefficient site, and "compact" defects are measured as
//! (norm, numerical rank) pairs at a fixed truncation.
//!
//! The numerical core is generic over the real scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `*32` variants for single precision.

pub mod algebra;
pub mod hilbert;
pub mod homotopy;
pub mod kasparov;
pub mod models;
pub mod numerics;
pub mod scenario;
pub mod surgery;

pub use numerics::{CMatrix, Real};

pub type Matrix = CMatrix<f64>;
pub type Element = algebra::AlgElement<f64>;
pub type Partition = algebra::PartitionOfUnity<f64>;
pub type Rep = hilbert::Representation<f64>;
pub type Operator = hilbert::Adjointable<f64>;
pub type Module = kasparov::KasparovModule<f64>;
pub type Witness = kasparov::AgreementWitness<f64>;
pub type Glued = surgery::GluedModule<f64>;
pub type Scenario = models::Scenario<f64>;

pub type Matrix32 = CMatrix<f32>;
pub type Element32 = algebra::AlgElement<f32>;
pub type Partition32 = algebra::PartitionOfUnity<f32>;
pub type Module32 = kasparov::KasparovModule<f32>;
pub type Glued32 = surgery::GluedModule<f32>;
pub type Scenario32 = models::Scenario<f32>;
