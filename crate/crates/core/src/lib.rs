//! Timestamp-manipulation mining: difficulty rules, strategies, Markov
//! analysis, Monte Carlo engine and forensic scoring.
#![no_std]

extern crate alloc;

pub mod chain;
pub mod strategy;
pub mod markov;
pub mod sim;
pub mod forensics;
