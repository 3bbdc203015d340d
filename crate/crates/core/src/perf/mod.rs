//! Fast estimators used inside the exploration loop: the packet-level
//! surrogate simulator, the FPGA resource model and the line-rate test.

mod resources;
mod surrogate;
mod timing;

pub use resources::{
    align_to_bram, estimate_resources, max_throughput, CalibrationError, CalibrationProfile, FreqCoefficients,
    LogicCoefficients, ResourceEstimate, BRAM_BLOCK_BITS,
};
pub use surrogate::{run_surrogate, SurrogateResult};
pub use timing::{timing_feasible, TimingBudget};
