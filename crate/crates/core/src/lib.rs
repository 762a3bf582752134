//! Frequency-domain analysis of buffer-feedback regulatory systems.
//!
//! A regulated species `y` is held near a set point by a feedback loop
//! acting through intermediates `z`, and in parallel by a reversible
//! buffer exchange with a reservoir species `x`. This crate linearizes
//! such process models, assembles the loop and closed-loop transfer
//! functions, checks the Bode-type integral and peak limits on the
//! sensitivity function numerically, and simulates step and sinusoidal
//! disturbances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod glycolysis;
pub mod limits;
pub mod looptf;
pub mod numfmt;
pub mod plantmodel;
pub mod quadrature;
pub mod ratcalc;
pub mod simkit;
pub mod verify;

pub use error::{Error, Result};
