//! Conversation threading and ABCDE coding of small-group transcripts with
//! language models: corpus handling, sliding windows, prompt rendering, model
//! clients, output parsing, agreement metrics and experiment running.

pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod outparse;
pub mod prompts;
pub mod runner;
pub mod windowing;
