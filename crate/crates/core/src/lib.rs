//! Knowledgeable Network of Thoughts: LWT scripts, their execution as a
//! network of single-step inferences, the three-stage prompting pipeline,
//! task generators with exact-answer oracles, and benchmark accounting.

pub mod backends;
pub mod harness;
pub mod lwt;
pub mod metrics;
pub mod pipeline;
pub mod runtime;
pub mod tasks;
