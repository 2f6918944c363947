//! Numerical engine for self-consistent transfer operators of graphon-coupled
//! expanding circle maps.
//!
//! The crate is organised bottom-up:
//!
//! - [`circle_maps`]: local dynamics `f` and coupling `h` with exact derivatives
//! - [`graphon`]: interaction kernels, finite-graph sampling and kernel norms
//! - [`densities`]: single-fiber densities, norms and metrics
//! - [`fibered`]: gridded disintegrations and base-direction regularity
//! - [`sto`]: mean field, fiber maps, the transfer step, the fixed-point
//!   solver and quantitative probes
//! - [`finite_sim`]: direct ensemble simulation of the `N`-node network
//! - [`report`]: rate fits and machine-readable run reports
//! - [`trials`]: grid-independent random inputs for randomized audits
//! - [`audits`]: seeded multi-trial versions of the probes
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod audits;
pub mod circle_maps;
pub mod densities;
pub mod error;
pub mod fibered;
pub mod finite_sim;
pub mod graphon;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod sto;
pub mod trials;

pub use error::{Result, StoError};
pub use scalar::Real;

pub type ExpandingMap64 = circle_maps::ExpandingMap<f64>;
pub type CouplingFunction64 = circle_maps::CouplingFunction<f64>;
pub type Graphon64 = graphon::Graphon<f64>;
pub type AdjacencyMatrix64 = graphon::AdjacencyMatrix<f64>;
pub type CircleDensity64 = densities::CircleDensity<f64>;
pub type SignedCircleFunction64 = densities::SignedCircleFunction<f64>;
pub type FiberedDensity64 = fibered::FiberedDensity<f64>;
pub type MeanFieldTable64 = sto::MeanFieldTable<f64>;
pub type FiberMapRealization64 = sto::FiberMapRealization<f64>;
pub type NetworkSystem64 = finite_sim::NetworkSystem<f64>;
pub type EnsembleState64 = finite_sim::EnsembleState<f64>;

pub type ExpandingMap32 = circle_maps::ExpandingMap<f32>;
pub type CircleDensity32 = densities::CircleDensity<f32>;
pub type FiberedDensity32 = fibered::FiberedDensity<f32>;
