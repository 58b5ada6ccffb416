//! Test signals, noise and the Monte-Carlo harness.

mod generator;
mod study;

pub use generator::{Generator, GeneratorKind, NoiseModel};
pub use study::{run_study, HistogramBin, Method, MethodRow, SimulationReport, StudyConfig};
