//! Feedback control of falling liquid films with localised blowing and
//! suction: reduced-order film models, their linearisation, LQR gain design
//! and nonlinear closed-loop simulation.

pub mod actuators;
pub mod banded;
pub mod config;
pub mod control;
pub mod io;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod lqr;
pub mod solver;
