pub mod cbi;
pub mod dataset;
pub mod discovery;
pub mod effects;
pub mod graph;
pub mod model;
pub mod resolve;
pub mod stats;
pub mod synth;
