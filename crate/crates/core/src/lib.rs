//! Simulation of generalized quantum measurements by randomized
//! few-outcome measurements with postselection.
//!
//! Outcome labels are 0-based in this API and 1-based in every file format.

pub mod bounds;
pub mod dilation;
pub mod error;
pub mod generators;
pub mod io;
pub mod noise;
pub mod numerics;
pub mod partitions;
pub mod povm;
pub mod rng;
pub mod sampling;
pub mod scheme;

pub use bounds::{BoundsReport, WeightVector};
pub use dilation::{DilationOptions, NaimarkDilation};
pub use error::{Error, Result};
pub use generators::FiducialVector;
pub use noise::{ComparisonReport, NoiseModel};
pub use numerics::{CMatrix, C64};
pub use partitions::SearchResult;
pub use povm::{DepolarizingMode, Povm, ProbVector, QuantumState, StochasticMap, ValidationReport};
pub use rng::Seed;
pub use sampling::SampleReport;
pub use scheme::{Partition, SchemeResult, SubPovm};
