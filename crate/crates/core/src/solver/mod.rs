//! Training algorithms and the trained model type.

pub mod bep;
mod model;
pub mod ova;
mod projection;
pub mod subgradient;

pub use bep::{solve_bep, train_bep, BepDualState, BepOptions, BepReport, BlockOutcome};
pub use model::{KernelModel, MODEL_VERSION};
pub use ova::{solve_binary, train_ova, OvaOptions, OvaReport};
pub use projection::project_capped_simplex;
pub use subgradient::{train_subgradient, SubgradientOptions, SubgradientReport};
