pub mod error;
pub mod lip;
pub mod safety;
pub mod control;
pub mod sim;
pub mod biped;
pub mod acceptance;
pub mod cli;

pub use error::{Error, Result};
pub use lip::{GaitParams, StepMatrix, StepState};
