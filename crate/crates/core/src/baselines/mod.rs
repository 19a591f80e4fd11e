//! IEEE 802.11 DCF and its power-saving mode, slot-abstracted, plus the
//! carrier-sense / ATIM tuning sweeps that define the best-DCF and best-PSM
//! reference configurations.

mod csma;
mod tune;

pub use csma::{run_dcf, run_psm, DcfConfig, PsmConfig};
pub use tune::{tune_best, TunePoint, TuneScheme};
