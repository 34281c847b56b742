//! Repetitive control under intermittent, timestamped sampling.
//!
//! The crate covers the whole loop: rational LTI models and their frequency
//! responses ([`lti`]), the timestamping operator and its complement
//! ([`timestamping`]), repetitive controllers ([`repetitive`]), frequency-domain
//! stability certificates for arbitrary timestamp realizations
//! ([`stability`]), an automated design loop ([`design`]) and a closed-loop
//! simulation harness with error metrics ([`sim`]).

pub mod design;
pub mod error;
pub mod lti;
pub mod poly;
pub mod repetitive;
pub mod sim;
pub mod stability;
pub mod timestamping;

pub use error::{Error, Result};
