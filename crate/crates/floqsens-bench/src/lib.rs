//! Shared fixtures for the benchmarks.

use floqsens::floquet::{gallery, model_library, quasienergies, FloquetSpectrum, TwoToneModel};
use floqsens::opspace::PhaseGrid;

/// A gallery model with its default parameters.
pub fn model(name: &str) -> TwoToneModel {
    let info = gallery()
        .into_iter()
        .find(|g| g.name == name)
        .expect("gallery model");
    model_library(name, &info.defaults()).expect("gallery model builds")
}

/// Quasienergy spectrum of a gallery model on an m × m grid.
pub fn spectrum(name: &str, m: usize) -> FloquetSpectrum {
    quasienergies(&model(name), &PhaseGrid::new(m).expect("grid")).expect("spectrum")
}
