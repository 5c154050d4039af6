//! Library surface of the experiment runner, exposed so integration tests
//! can parse emitted reports back into their typed form.

pub mod config;
pub mod experiments;
pub mod report;
