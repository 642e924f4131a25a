//! Effective operators of composites in the Hilbert-space framework, at
//! finite dimension.
//!
//! The core types are generic over the scalar field ([`Scalar`]: `f32`,
//! `f64`, `Complex32`, `Complex64`); the aliases below fix the common
//! double-precision choices.

pub mod conductivity;
pub mod error;
pub mod multiphase;
pub mod operator;
pub mod random;
pub mod scalar;
pub mod zproblem;

pub use error::{Error, Result};
pub use multiphase::{
    in_domain_d, realize, schur_of_pencil, Factorization, NormalizedPencil, PencilPoint, Realization,
    SubspaceCollection,
};
pub use operator::{BlockPartition, Operator};
pub use scalar::{Scalar, ScalarField};
pub use zproblem::{HypothesisReport, MonotonicityReport, TripleDecomposition, ZProblem, ZSolution};

pub use num_complex::{Complex32, Complex64};

pub type RealOperator = Operator<f64>;
pub type ComplexOperator = Operator<Complex64>;
pub type RealDecomposition = TripleDecomposition<f64>;
pub type ComplexDecomposition = TripleDecomposition<Complex64>;
pub type RealZProblem = ZProblem<f64>;
pub type ComplexZProblem = ZProblem<Complex64>;
pub type RealCollection = SubspaceCollection<f64>;
pub type ComplexCollection = SubspaceCollection<Complex64>;
pub type RealPencil = NormalizedPencil<f64>;
pub type ComplexPencil = NormalizedPencil<Complex64>;
pub type ComplexDenseModel = conductivity::DenseModel<Complex64>;
pub type RealDenseModel = conductivity::DenseModel<f64>;
