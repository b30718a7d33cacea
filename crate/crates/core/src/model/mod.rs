//! Network definition: configuration, named parameters, the forward graph and
//! complexity accounting.

pub mod blocks;
pub mod complexity;
mod config;
pub mod network;
pub mod params;

pub use complexity::{count_multi_adds, count_multi_adds_at_input, count_params, report, ComplexityReport, ModuleCost};
pub use config::EPNetConfig;
pub use network::{epnet_forward, epnet_infer, espm_forward, pfem_forward, shallow_extract};
pub use params::{Gradients, ModelParams, ParamSpec};
