//! Second- and fourth-order statistical characterization of linear
//! structural responses.
//!
//! The modal solution `q(t)` of a linear system is computed once, its
//! covariance matrix and rank-4 central-moment tensor are estimated once, and
//! every output point's stress statistics follow by contracting those modal
//! statistics with the local stress mode shapes. A direct per-node path
//! (filtering the loads through each node's FRF) is kept alongside as an
//! oracle.

pub mod error;
pub mod loadgen;
pub mod modal;
pub mod response;
pub mod rotation;
pub mod series;
pub mod sigstats;
pub mod spectra;
pub mod tensor4;

pub use error::{Error, Result};
pub use series::{TimeSeries, TimeSeriesSet};
pub use tensor4::{MomentTensor4, VoigtTensor4};

pub use num_complex::Complex64;
