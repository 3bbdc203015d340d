pub mod dse;
pub mod perf;
pub mod protocol;
pub mod sim;
pub mod trace;
