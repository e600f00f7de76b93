//! File formats and command implementations for the `netequil` binary.

pub mod app;
pub mod format;
