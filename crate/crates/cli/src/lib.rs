//! HTTP service and command line around the `topicrag` core.

pub mod app;
pub mod cli;
pub mod config;
pub mod http;
