//! Shared fixtures for the criterion benchmarks.

use face_core::sim::{generate_sample, CovModel};
use face_core::{factorize_smoother, BasisSpec, DataMatrix, SmootherFactor};

/// Case-1 curves with their noise, `J x I`.
pub fn case_one(j: usize, i: usize, seed: u64) -> DataMatrix {
    generate_sample(&CovModel::case(1).expect("case 1"), j, i, seed).expect("sample")
}

pub fn factor(j: usize, knots: usize) -> SmootherFactor {
    factorize_smoother(&BasisSpec::equispaced(j, knots)).expect("factor")
}
