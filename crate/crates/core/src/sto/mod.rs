//! The self-consistent transfer operator `F nu = (F_nu)_* nu` on gridded
//! fibered densities, its fixed-point solver and the probe suite.

mod fiber_map;
mod mean_field;
mod probes;
mod solver;
mod transfer;
pub mod ulam;

pub use fiber_map::{alpha_hat, inverse_branches, realize_fiber_map, FiberMapRealization};
pub use mean_field::{mean_field, MeanFieldTable};
pub use probes::{
    ck_distance_bound, fiber_map_ck_distance, hilbert_contraction_probe, lasota_yorke_probe,
    lipschitz_probe, memory_loss_probe, refinement_c2_change, HilbertRecord, LasotaYorkeRecord,
    MemoryLossTrace, GRAPHON_L1_GRID,
};
pub use solver::{fixed_point, uniqueness_probe, SolveReport};
pub use transfer::{fiber_pushforward, sto_step, transfer_raw, StepStats, StoModel, MASS_WARN};
