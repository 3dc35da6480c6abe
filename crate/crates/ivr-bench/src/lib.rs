//! Solid-body-rotation transmission benchmark driver.
//!
//! The library half of the `ivr-bench` binary: case configuration
//! ([`config`]), the rotating-bodies initial condition ([`ic`]), case
//! execution with the offline/online timing split ([`context`]), error
//! metrics on the global grid ([`metrics`]), basis-size sweeps ([`sweep`]),
//! and plain-text field dumps ([`dump`]).

pub mod config;
pub mod context;
pub mod dump;
pub mod ic;
pub mod metrics;
pub mod sweep;
