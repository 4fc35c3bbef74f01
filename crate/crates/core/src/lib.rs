//! Near-field MIMO channel model with rough-surface reflectors.
//!
//! The crate pairs a closed-form channel model (line of sight, point
//! scatterers, and a reflector split into a deterministic specular part and a
//! stochastic diffuse part) with a Huygens-Fresnel integrator over sampled
//! rough surfaces that serves as a numerical reference. On top sit
//! ensemble statistics, multi-user beamforming metrics, scenario files and
//! the experiment drivers used by the `nfchan` binary.

// `!(x > 0.0)` also rejects NaN; series coefficients are kept as published.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bundled;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hf;
pub mod io;
pub mod model;
pub mod multiuser;
pub mod scenario;
pub mod special;
pub mod stats;
pub mod surface;
pub mod verify;

pub use channel::{ChannelMatrix, Provenance};
pub use error::{Error, Result};
pub use experiments::{run_experiment, write_outputs, Experiment, ExperimentOutput, RunOptions, Table};
pub use geometry::{ArrayGeometry, PlaneSpec, Point3};
pub use hf::HFConfig;
pub use model::{ReflectorModel, StochasticMode};
pub use multiuser::{Beamformer, NoiseModel};
pub use num_complex::Complex64;
pub use scenario::{load_scenario, ScenarioConfig};
pub use stats::EnsembleSummary;
pub use surface::{RoughSurface, SurfaceRealization};
pub use verify::CriterionResult;
