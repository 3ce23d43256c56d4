pub mod bounds;
pub mod grid;
pub mod lsq;
pub mod metrics;
pub mod units;

pub use bounds::{damping_bounds, default_bounds, inertia_bounds, param_names};
pub use grid::{identify_grid, GridProblem};
pub use lsq::{multistart, solve_local, BoundsBox, MultistartConfig, StartRecord};
pub use metrics::{r_squared, rms_error};
pub use units::{
    identify_grid_following, identify_grid_forming, identify_hydro, identify_thermal, IdentResult,
    UnitIo,
};
