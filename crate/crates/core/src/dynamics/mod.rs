//! Peakon flow, collision handling and the two-peakon collision theory.

mod flow;
mod merge;
pub mod two_peakon;

pub use flow::{
    integrate, rhs, ApproachSample, CollisionEvent, IntegrationStats, IntegratorConfig, Sample, Trajectory,
};
pub use merge::{merge, regularized_coords, split, SplitState};
pub use two_peakon::{
    classification_grid, collision_time, h0_max, reduced_gap_rate, time_to_gap, unit_energy_state, v_c_field,
    will_collide_2peakon, Branch, CollisionTime, GridPoint,
};
