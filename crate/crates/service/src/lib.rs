//! HTTP API, on-disk event logs, the batch simulator and the `reverie` CLI.

pub mod api;
pub mod cli;
pub mod config;
pub mod sim;
pub mod store;
