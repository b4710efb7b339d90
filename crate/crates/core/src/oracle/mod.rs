//! Independent checks of certificates: dense gridding of the semi-infinite conditions,
//! the vertex-maximum property of cubic matrix functions, and trajectory simulation.
//!
//! Nothing here reuses the LMI assembly; conditions are re-evaluated directly from the
//! system matrices and `K(p)`.

mod cubic;
mod grid;
mod schedule;
mod simulate;

pub use cubic::{CubicMatrixFunction, VertexMaxReport};
pub use grid::{condition_at, grid_max_eig, GridReport};
pub use schedule::{random_schedule, Clock, Schedule};
pub use simulate::{
    check_decay, check_dissipation, empirical_gain, random_unit_state, simulate, DecayReport,
    DissipationReport, GainReport, Trajectory,
};
