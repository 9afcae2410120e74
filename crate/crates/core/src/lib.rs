//! Kernel aggregation of marker-level copy-number association tests.
//!
//! Marker-level tests ([`marker_tests`]) are transformed and smoothed along
//! the chromosome ([`kernel`]); the maximum aggregate is compared with a
//! permutation null that keeps the intensity matrix intact
//! ([`significance`]), which controls the family-wise error rate in the weak
//! sense. [`spikein`] simulates CNV signals in noise to measure level and
//! power.

pub mod error;
pub mod kernel;
pub mod rng;
pub mod significance;
pub mod special;
pub mod spikein;
pub mod stats;
pub mod track;

pub use error::{Error, Result};
pub use kernel::{
    adaptive_bandwidth, aggregate, kernel_weight, t_max, transform, AggregationProfile, Aggregator,
    Bandwidth, KernelShape, KernelSpec, TransformKind, TransformSpec,
};
pub use marker_tests::{
    regression_test, run_marker_tests, two_sample_test, Direction, MarkerTestTrack, MarkerTester,
    TestResult,
};
pub use significance::{
    global_p, monte_carlo_null, permutation_null, scan, scan_methods, threshold, Method, MultiScan,
    NullDistribution, NullMethod, Permutations, ScanResult, ScanSettings,
};
pub use track::{load_phenotype, load_track, MarkerTrack, Phenotype, PhenotypeKind};
