//! Linear frequency-response modelling of mixed hydro, thermal and
//! converter-based power systems, with scenario simulation and
//! box-constrained multistart parameter identification.

pub mod error;
pub mod ident;
pub mod io;
pub mod lti;
pub mod pipeline;
pub mod plant;
pub mod synth;
pub mod system;

pub use error::{Error, Result};
