//! Lead-lag analysis of irregularly sampled, long-memory time series in the
//! frequency domain.
//!
//! Each series is projected onto a small set of Fourier frequencies by a
//! direct sum over its observations. Products of projections give
//! cross-spectra, which are inverted into cross-correlograms; the lead-lag
//! ratio and characteristic delay are read off those. Long memory is removed
//! by multiplying projections by `(i f)^alpha` before the product.

// `!(x > 0.0)` is how parameter checks reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod causal;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lrd;
pub mod parallel;
pub mod pipeline;
pub mod series;
pub mod spectral;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use series::{
    demean, dedup_and_sort, CrossCorrelogram, FrequencyGrid, IrregularSeries, LagGrid,
    RegularSeries,
};
pub use spectral::{CrossSpectrum, FourierProjection};
