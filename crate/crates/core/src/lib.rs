pub mod birth_death;
pub mod error;
pub mod evolution;
pub mod jump_process;
pub mod measures;
pub mod pdmp;
pub mod quad;
pub mod tabulated;
pub mod transport;

pub use error::{Error, Result};
