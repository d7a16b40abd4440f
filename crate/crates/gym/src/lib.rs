//! Std companion to `spatial-gym-core`: puzzle documents, catalog, evaluation
//! harness, episode logs, the HTTP session service and importers.

pub mod catalog;
pub mod clock;
pub mod document;
pub mod harness;
pub mod log;
pub mod service;
pub mod import;
