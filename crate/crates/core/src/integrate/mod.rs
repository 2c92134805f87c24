//! Time integration: the IMEX stepper, a dense exponential reference and
//! the trajectory driver.

pub mod expm;
pub mod imex;
pub mod simulate;


pub use expm::{expm, expm_oracle};
pub use imex::{factor_implicit, step_imex, DelayState, ImplicitFactor, Stepper};
pub use simulate::{initial_state, simulate, HistoryPreset, InitialData, ProfilePreset, SimConfig, TemperaturePreset};
