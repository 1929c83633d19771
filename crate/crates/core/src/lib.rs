//! Release engineering engines: configuration, versioning, branching,
//! issue handling, changelogs, licensing and event dispatch.

pub mod config;
pub mod defaults;
pub mod generators;
pub mod issue;
pub mod ledger;
pub mod license;
pub mod markers;
pub mod orchestrator;
pub mod pipeline;
pub mod plan;
pub mod providers;
pub mod report;
pub mod vcs;
pub mod version;
