//! Accelerometer gesture recognition at desk scale.
//!
//! The crate covers the whole batch pipeline for triaxial accelerometer
//! gestures (`O`, `X` and unconstrained `Random` motion): window segmentation
//! and synthesis, augmentation, a fixed feature bank, four small classifiers
//! with footprint estimates and int8 quantization, a genetic search over
//! feature subsets and models, and evaluation, profiling and reporting.

pub mod augment;
pub mod automl;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod models;
pub mod profile;
pub mod report;
pub mod seed;
pub mod signal;
pub mod synth;

pub use dataset::{Dataset, Entry, Origin, Provenance};
pub use error::{Error, Result};
pub use features::{FeatureAxis, FeatureEntry, FeatureId, FeatureSet, FeatureVector, Scaler};
pub use signal::{Annotation, Axis, GestureClass, Recording, Sample, Window};
