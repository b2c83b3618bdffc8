pub mod backend;
pub mod cdp;
pub mod env;
pub mod protocol;
pub mod raster;
pub mod rng;
pub mod synthetic;
pub mod agents;
pub mod jsonl;
pub mod runner;
pub mod distill;
