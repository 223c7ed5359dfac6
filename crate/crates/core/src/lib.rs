//! Class-incremental classification over fixed, precomputed feature vectors.
//!
//! Every known class owns an independent binary linear SVM trained with the
//! class's own features as positives and a bounded pool of negative features
//! as negatives. When a batch of new classes arrives, the negative pool is
//! refreshed by a selection strategy (`ind`, `rand`, `div`) under a constant
//! budget `K`, classifiers for the new classes are trained against it, and
//! earlier classifiers stay frozen. Predictions rank raw classifier scores.
//!
//! Modules, bottom-up:
//!
//! * [`features`]: feature vectors, normalization, binary/CSV feature files.
//! * [`svm`]: dual coordinate descent trainer and duality-gap certificate.
//! * [`memory`]: quota law, negative selection strategies, greedy diversification.
//! * [`engine`]: state transitions, top-k prediction, checkpoints.
//! * [`eval`]: top-k accuracy, C grid search, synthetic data, report files.
//! * [`cli`]: configuration and the command implementations behind the binary.

pub mod cli;
pub mod engine;
pub mod error;
pub mod eval;
pub mod features;
pub mod memory;
pub mod seed;
pub mod svm;

pub use error::{Error, Result};
pub use features::{ClassFeatures, ClassId, FeatureVector, LabeledDataset};
pub use svm::{LinearClassifier, SolverConfig};
