//! Scenario configuration, presets, and the reproduction harness for the
//! conditional-swap entangling simulator.

pub mod config;
pub mod plot;
pub mod presets;
pub mod run;
pub mod validate;
