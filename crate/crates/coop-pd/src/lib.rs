//! Replicator-potential analytics, ε-greedy Q-learning matches and
//! cooperation-frontier calibration for the repeated prisoner's dilemma.

pub mod analytics;
pub mod calibrate;
pub mod classify;
pub mod config;
pub mod game;
pub mod harness;
pub mod meta;
pub mod numfmt;
pub mod qlearn;
