//! Nearest-neighbor estimators of integrals of regression functions over a
//! box (expectations weighted by the inverse covariate density) and of
//! matching functionals.
//!
//! The regression function is estimated at a point by a least-squares
//! polynomial of degree `L` through the `K` nearest sample points, i.e. the
//! sample points defining the K-th order Voronoi cell that contains it.
//! Integrating that fit over a box (by uniform Monte Carlo) or averaging it
//! over an auxiliary sample removes the bias of plain nearest-neighbor
//! matching without any bandwidth. `K` and `L` depend only on the dimension.
//!
//! Modules:
//! - [`knn`]: exact kd-tree K-nearest-neighbor search.
//! - [`local_poly`]: monomial basis and local-fit weights.
//! - [`qr`]: pivoted QR used for the local least-squares fits.
//! - [`estimators`]: box integrals, matching, ATT, region ATE, covariate shift.
//! - [`berkson`]: Fourier deconvolution for Berkson errors-in-variables.
//! - [`sim`]: simulation scenarios and replication summaries.
//! - [`io`]: CSV datasets and box specifications.

pub mod berkson;
pub mod data;
pub mod error;
pub mod estimators;
pub mod io;
pub mod knn;
pub mod local_poly;
pub mod plan;
pub mod qr;
pub mod quadrature;
pub mod rng;
pub mod sim;

pub use data::{BoxSupport, PointSet, Sample, TreatmentDataset};
pub use error::{Error, Result};
pub use estimators::{
    estimate_ate_region, estimate_att, estimate_phi, estimate_psi, estimate_weighted_loss,
    AteRegionReport, AttReport, EstimateReport, LocalFit, MonteCarlo,
};
pub use knn::{NeighborIndex, Neighborhood};
pub use local_poly::{evaluate_local_fit, local_fit_weights, multi_index_set, recommended_k};
pub use plan::with_workers;
