//! Experiment harness for the LinkBo protocol engine: message streams over
//! ideal and analog wires, parameter sweeps, trace files and report output.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod stream;
pub mod table2;
pub mod tracefile;
