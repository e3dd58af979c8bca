pub mod sim;
pub mod graph;
pub mod features;
pub mod nn;
pub mod encoder;
pub mod shield;
pub mod metrics;
pub mod agent;
