//! Footstep planning for a trotting quadruped with learned linear motion
//! models.

pub mod error;
pub mod geometry;
pub mod models;
pub mod numfmt;
pub mod planner;
pub mod sim;
pub mod terrain;

pub use error::{Error, Result};
