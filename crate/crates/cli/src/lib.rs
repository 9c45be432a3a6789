//! Scenario runner for the `qlayer` binary.

pub mod catalog;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod verify;
