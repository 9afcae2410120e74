//! Benchmark fixtures.

use cnvks_core::spikein::{build_dataset, SimDataset, SimScenario};

/// Simulated dataset with `n` subjects and `markers` markers under the default CNV.
pub fn dataset(n: usize, markers: usize) -> SimDataset {
    let scenario = SimScenario {
        n,
        markers,
        cnv_size: (markers / 10).max(1),
        ..SimScenario::default()
    };
    build_dataset(&scenario, 1).expect("valid fixture scenario")
}
