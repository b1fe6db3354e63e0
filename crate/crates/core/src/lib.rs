pub mod rng;
pub mod schema;
pub mod prompt;
pub mod ruledsl;
pub mod model;
pub mod llm;
pub mod ensemble;
pub mod eval;
pub mod cli;
