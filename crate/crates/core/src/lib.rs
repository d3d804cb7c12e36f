pub mod contract;
pub mod crypto;
pub mod execution;
pub mod merkle;
pub mod randomization;
pub mod settlement;
pub mod wire;
pub mod simnet;
