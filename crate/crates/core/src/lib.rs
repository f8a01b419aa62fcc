pub mod control;
pub mod coupling;
pub mod error;
pub mod nilpotent;
pub mod oracle;
pub mod protocols;
pub mod scenario;
pub mod state;

pub use error::{Error, Result};
