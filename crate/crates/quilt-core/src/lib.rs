//! Graph quilting: Gaussian graphical-model recovery when some variable
//! pairs are never observed together.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature for
//! faster `std`-backed math in `nalgebra`; file formats, the CLI and the
//! parallel simulation runner live in the companion `quilt` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod edges;
pub mod error;
pub mod estimators;
pub mod gqlasso;
pub mod linalg;
pub mod madgq;
pub mod reco;
pub mod rng;
pub mod scheme;
pub mod simlab;

pub use edges::EdgeSet;
pub use error::{QuiltError, Result};
pub use madgq::{PartitionABC, PrecisionEstimate};
pub use scheme::{IndicatorData, ObservationScheme, PairMask, PartialCovariance, SubsetMoments};

pub use nalgebra::DMatrix;
