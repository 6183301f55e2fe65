//! Entropy-reweighted D-optimal sensor placement for bearing-only
//! multi-source localization.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs and the RNG handles passed in; IO, parallel sweeps and the CLI
//! live in the `bearing_place` companion crate.
//!
//! The pipeline per iteration is:
//!
//! 1. [`maxent::maxent_reweight`] tilts each source's particle weights towards
//!    a Dirac target at the weighted mean, subject to a sliced-Wasserstein
//!    accuracy budget (skipped by the baseline).
//! 2. [`placement::optimize_placement`] maximizes the summed log-determinant
//!    of the per-source bearing Fisher information over sensor positions.
//! 3. Bearings are simulated at the new sensors and the particle filter in
//!    [`particle_filter`] updates and (when degenerate) resamples.
//!
//! [`trial::run_trial`] strings these together for one seeded scenario.

#![no_std]

extern crate alloc;

pub mod error;
pub mod fim;
pub mod geometry;
pub mod maxent;
pub mod particle_filter;
pub mod placement;
pub mod trial;

pub use error::{Error, Result};
pub use fim::{Matrix2, WeightVector};
pub use geometry::{Angle, NoiseModel, Point2};
pub use maxent::{AccuracyBudget, TiltSolution};
pub use particle_filter::ParticleCloud;
pub use placement::{DomainBox, PlacementResult, SensorArray};
pub use trial::{Method, Scenario, TrialRecord};
