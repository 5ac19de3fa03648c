//! Monte Carlo validation, SNR sweeps and the `ialf` command line tool, on
//! top of the closed forms in `ialf-core`.

pub mod config;
pub mod mcsim;
pub mod sweep;
