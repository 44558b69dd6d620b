//! Topic-grounded question answering for structured product documentation.

pub mod classify;
pub mod client;
pub mod contenttools;
pub mod corpus;
pub mod evalstore;
pub mod faq;
pub mod generate;
pub mod guard;
pub mod pipeline;
pub mod regression;
pub mod retrieve;
pub mod rewrite;
pub mod text;
