//! Experiment harness around the guarded decoding engine: corpus loading,
//! experiment runs, parameter sweeps, and report files.

pub mod experiment;
