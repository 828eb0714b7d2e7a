//! Correlation regime-change toolkit for dated market events.
//!
//! The crate covers the full analysis chain: price ingestion and calendar
//! alignment, ADF unit-root tests, trailing-window Pearson correlations,
//! Chow structural-break tests at a known date, univariate ARMA-GARCH
//! maximum likelihood, and DCC(1,1) dynamic correlations. The
//! [`pipeline`] module ties the stages together and writes tables and
//! figure data.

pub mod adf;
pub mod chow;
pub mod dcc;
pub mod error;
pub mod garch;
pub mod ingest;
pub mod linreg;
pub mod numerics;
pub mod pipeline;
pub mod rolling;
pub mod series;

pub use error::{Error, Result};
