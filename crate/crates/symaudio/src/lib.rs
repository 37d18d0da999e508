pub mod bench;
pub mod cli;
pub mod config;
pub mod golden;
pub mod llm;
pub mod registry;
pub mod wav;
