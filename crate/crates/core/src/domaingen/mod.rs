//! Synthetic source/target domains with controlled shift.
//!
//! A [`GroundTruth`] holds per-task linear logit weights for both domains,
//! mixed from a shared component and a domain component. [`sample_domain`]
//! draws examples from it; target examples lose a fixed subset of features
//! after their labels are drawn.

mod dataset;
mod io;
mod sample;
mod spec;
mod truth;

pub use dataset::{Dataset, Domain, Example, Labels, Provenance, Schema, Task};
pub use io::{dataset_to_string, load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC};
pub use sample::{dataset_fingerprint, sample_domain};
pub use spec::DomainSpec;
pub use truth::{gaussian_sigmoid_mean, make_ground_truth, GroundTruth, TaskWeights};
