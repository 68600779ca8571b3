//! Simulation, perception and learning core for a four-wheel independently
//! steered field robot navigating crop rows.

pub mod kinematics;
pub mod world;
pub mod planner;
pub mod perception;
pub mod env;
pub mod learner;
pub mod baseline;
pub mod evalharness;
pub mod trace;
pub mod teleop;
