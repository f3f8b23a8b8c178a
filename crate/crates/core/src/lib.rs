pub mod cli;
pub mod data;
pub mod graph;
pub mod labeling;
pub mod model;
pub mod tensor;
pub mod train;
