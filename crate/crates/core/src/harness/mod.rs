//! Run orchestration: configuration, the coupled loop, monitoring, output
//! files and experiment recipes.

pub mod config;
pub mod coupled;
pub mod experiments;
pub mod monitor;
pub mod output;

use thiserror::Error;

use crate::ctrw::CtrwError;
use crate::fields::FieldError;
use crate::fracops::FracError;
use crate::ks_macro::KsError;
use crate::mild_verify::MildError;
use crate::ns_fluid::FluidError;
use crate::specfun::SpecfunError;

pub use config::{parse_config, ConfigError, InitSpec, Model, MonitorConfig, SimConfig};
pub use coupled::{advance_coupled, initial_field, Checkpoint, Simulation};
pub use experiments::{run_experiment, CriterionLine, EXPERIMENTS};
pub use monitor::{Monitor, MonitorRecord};
pub use output::{run_ctrw, run_mild, run_simulation, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    ConfigParse(#[from] ConfigError),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ks(#[from] KsError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Ctrw(#[from] CtrwError),
    #[error(transparent)]
    Mild(#[from] MildError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Non-finite values in either component.
    pub fn is_blowup(&self) -> bool {
        matches!(
            self,
            HarnessError::Ks(KsError::BlowupDetected { .. }) | HarnessError::Fluid(FluidError::BlowupDetected { .. })
        )
    }
}

/// Sizes the global rayon pool from `CHEMOFLOW_THREADS` when set. Returns
/// the thread count in use. Safe to call more than once.
pub fn init_threads() -> usize {
    if let Some(n) = std::env::var("CHEMOFLOW_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    rayon::current_num_threads()
}
