//! Shared fixtures for the criterion benchmarks.

use msvm_core::simgen::{generate, DesignKind, SimDesign};
use msvm_core::Dataset;

/// A five-class training draw at the given size (must be divisible by 5).
pub fn five_class_train(n: usize) -> Dataset {
    let (train, _, _, _) = generate(&SimDesign {
        kind: DesignKind::FiveClass,
        n_train: n,
        n_tune: n,
        n_test: n,
        seed: 7,
    })
    .expect("valid design");
    train
}
