mod balance;
pub mod poly;
pub mod sim;
pub mod ss;
pub mod tf;

pub use nalgebra::Complex;
pub use poly::Polynomial;
pub use sim::{
    lsim, lsim_ss, lsim_ss_hold, simulate_discrete, LinearSystem, MeasurementTrace, SimTrace, Trace,
};
pub use ss::{discretize_hold, discretize_zoh, mimo_to_ss, tf_to_ss, Hold, StateSpace};
pub use tf::{
    dcgain, poles, tf_add, tf_feedback, tf_mul, tf_sub, DcGain, MimoTF, RationalTF, CANCEL_TOL,
};
