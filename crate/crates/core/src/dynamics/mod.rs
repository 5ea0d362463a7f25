//! Time integration of the LLG equation with spin-transfer torque.

pub mod rkf45;
pub mod session;
pub mod torque;
pub mod trajectory;

pub use rkf45::{IntegratorConfig, RelaxMethod, Rhs, Rkf45, StepInfo};
pub use session::{PulseOutcome, PulseSchedule, PulseSegment, SimSettings, Simulation};
pub use torque::{llg_rhs, stt_beta, stt_epsilon, LlgTerms, TorqueParams, DEFAULT_MP};
pub use trajectory::{Sample, Trajectory};
