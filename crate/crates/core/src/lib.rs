//! Intentional feed pipeline.
//!
//! A feed is described by a [`model::FeedConfig`]: the owner's stated intent,
//! the sources to pull from, include/limit preference prompts and a ranking
//! style. [`planner`] drafts a config from free text, [`sourcer`] collects
//! candidate posts, [`curator`] scores them with a language model, and
//! [`ranker`] orders the survivors by weighted Borda count. [`pipeline`]
//! strings the stages together for one generation.

pub mod catalog;
pub mod curator;
pub mod lm;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod ranker;
pub mod sourcer;

pub use model::*;
