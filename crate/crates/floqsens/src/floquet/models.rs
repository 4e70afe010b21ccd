//! Built-in two-tone models.
//!
//! Parameters are passed by name; every model lists its parameters with defaults so callers
//! can start from [`ModelInfo::defaults`] and override selectively. All models are written
//! in units with ħ = 1.

use super::TwoToneModel;
use crate::error::{Error, Result};
use crate::opspace::{ket_bra, sigma_x, sigma_y, sigma_z};
use crate::{CMat, C64};
use std::collections::BTreeMap;

/// Named model parameters.
pub type ModelParams = BTreeMap<String, f64>;

/// Description of a gallery entry.
#[derive(Clone, Debug)]
pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Defining Hamiltonian, θⱼ = ωⱼt + φⱼ and Xᵢⱼ = |i⟩⟨j| + h.c.
    pub hamiltonian: &'static str,
    /// (name, default, meaning)
    pub params: &'static [(&'static str, f64, &'static str)],
}

impl ModelInfo {
    pub fn defaults(&self) -> ModelParams {
        self.params
            .iter()
            .map(|(k, v, _)| (k.to_string(), *v))
            .collect()
    }
}

const QUBIT_PARAMS: &[(&str, f64, &str)] = &[
    ("omega0", 1.0, "qubit splitting"),
    ("omega", 1.0, "common drive frequency"),
    ("A", 0.5, "drive amplitude"),
];

/// All built-in models.
pub fn gallery() -> Vec<ModelInfo> {
    vec![
        ModelInfo {
            name: "circular",
            summary: "spin-1/2 in two co-rotating circularly polarised fields (σx cos + σy sin per drive)",
            hamiltonian: "H = ω₀σz/2 + A Σⱼ (σx cos θⱼ + σy sin θⱼ)",
            params: &[("omega0", 1.0, "qubit splitting"), ("omega", 0.25, "common drive frequency"), ("A", 0.125, "drive amplitude")],
        },
        ModelInfo {
            name: "polarization",
            summary: "transverse qubit driven by a left- and a right-circular field; bands cross at zero phase difference",
            hamiltonian: "H = ω₀σx/2 + A (σx cos θ₁ + σy sin θ₁) + A (σx cos θ₂ − σy sin θ₂)",
            params: QUBIT_PARAMS,
        },
        ModelInfo {
            name: "zeeman",
            summary: "spin-1/2 in a static plus two oscillating longitudinal fields; commuting, phase-insensitive",
            hamiltonian: "H = −(g/2) σz (B0 + B1 cos θ₁ + B2 cos θ₂)",
            params: &[
                ("g", 1.0, "gyromagnetic factor"),
                ("B0", 1.0, "static field"),
                ("B1", 1.0, "first drive field"),
                ("B2", 1.0, "second drive field"),
                ("omega1", 1.0, "first drive frequency"),
                ("omega2", 1.0, "second drive frequency"),
            ],
        },
        ModelInfo {
            name: "specific",
            summary: "qubit with asymmetric drive couplings; no phase-difference degeneracies",
            hamiltonian: "H = ω₀σz/2 + A (σz cos θ₁ + 3σy sin θ₁) + A (2σz cos θ₂ + σx sin θ₂)",
            params: QUBIT_PARAMS,
        },
        ModelInfo {
            name: "qutrit",
            summary: "ladder qutrit with a cascaded two-photon path and a direct two-level coupling",
            hamiltonian: "H = ω12 |1⟩⟨1| + (ω12 + ω23) |2⟩⟨2| + A (X₀₁/2 cos θ₁ + 2X₀₂ sin θ₁) + A (X₁₂/2 cos θ₂ − 2X₀₂ sin θ₂)",
            params: &[
                ("omega12", 1.0, "first transition frequency"),
                ("omega23", 0.5, "second transition frequency"),
                ("omega", 1.0, "common drive frequency"),
                ("A", 0.5, "drive amplitude"),
            ],
        },
    ]
}

fn get(model: &str, params: &ModelParams, key: &'static str) -> Result<f64> {
    params.get(key).copied().ok_or(Error::MissingParameter {
        model: model.to_string(),
        param: key.to_string(),
    })
}

fn check_known(info: &ModelInfo, params: &ModelParams) -> Result<()> {
    for k in params.keys() {
        if !info.params.iter().any(|(p, _, _)| p == k) {
            return Err(Error::InvalidArgument(format!(
                "model '{}' has no parameter '{k}'",
                info.name
            )));
        }
    }
    Ok(())
}

fn scale(m: CMat, s: f64) -> CMat {
    m * C64::new(s, 0.0)
}

/// Levenshtein distance, used for "did you mean" suggestions.
fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(ca != *cb))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Build a gallery model from named parameters.
pub fn model_library(name: &str, params: &ModelParams) -> Result<TwoToneModel> {
    let all = gallery();
    let Some(info) = all.iter().find(|m| m.name == name) else {
        let suggestion = all
            .iter()
            .map(|m| (edit_distance(name, m.name), m.name))
            .filter(|(d, _)| *d <= 3)
            .min()
            .map(|(_, n)| n.to_string());
        return Err(Error::UnknownModel {
            name: name.to_string(),
            suggestion,
        });
    };
    check_known(info, params)?;
    let p = |k| get(name, params, k);
    match name {
        "circular" => {
            let (w0, w, a) = (p("omega0")?, p("omega")?, p("A")?);
            TwoToneModel::new(
                name,
                scale(sigma_z(), 0.5 * w0),
                scale(sigma_y(), a),
                scale(sigma_x(), a),
                scale(sigma_y(), a),
                scale(sigma_x(), a),
                w,
                w,
            )
        }
        "polarization" => {
            let (w0, w, a) = (p("omega0")?, p("omega")?, p("A")?);
            TwoToneModel::new(
                name,
                scale(sigma_x(), 0.5 * w0),
                scale(sigma_y(), a),
                scale(sigma_x(), a),
                scale(sigma_y(), -a),
                scale(sigma_x(), a),
                w,
                w,
            )
        }
        "zeeman" => {
            let (g, b0, b1, b2) = (p("g")?, p("B0")?, p("B1")?, p("B2")?);
            let (w1, w2) = (p("omega1")?, p("omega2")?);
            let sz = scale(sigma_z(), 0.5);
            TwoToneModel::new(
                name,
                scale(sz.clone(), -g * b0),
                CMat::zeros(2, 2),
                scale(sz.clone(), -g * b1),
                CMat::zeros(2, 2),
                scale(sz, -g * b2),
                w1,
                w2,
            )
        }
        "specific" => {
            let (w0, w, a) = (p("omega0")?, p("omega")?, p("A")?);
            TwoToneModel::new(
                name,
                scale(sigma_z(), 0.5 * w0),
                scale(sigma_y(), 3.0 * a),
                scale(sigma_z(), a),
                scale(sigma_x(), a),
                scale(sigma_z(), 2.0 * a),
                w,
                w,
            )
        }
        "qutrit" => {
            let (w12, w23, w, a) = (p("omega12")?, p("omega23")?, p("omega")?, p("A")?);
            let sym = |i, j| ket_bra(3, i, j) + ket_bra(3, j, i);
            let h0 = scale(ket_bra(3, 1, 1), w12) + scale(ket_bra(3, 2, 2), w12 + w23);
            TwoToneModel::new(
                name,
                h0,
                scale(sym(2, 0), 2.0 * a),
                scale(sym(1, 0), 0.5 * a),
                scale(sym(2, 0), -2.0 * a),
                scale(sym(2, 1), 0.5 * a),
                w,
                w,
            )
        }
        _ => unreachable!("gallery entry without constructor"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_gallery_entry_builds_from_defaults() {
        for info in gallery() {
            let m = model_library(info.name, &info.defaults()).unwrap();
            assert!(m.equal_frequencies());
        }
    }

    #[test]
    fn unknown_model_suggests_nearest() {
        match model_library("circulr", &ModelParams::new()) {
            Err(Error::UnknownModel { suggestion, .. }) => {
                assert_eq!(suggestion.as_deref(), Some("circular"))
            }
            other => panic!("unexpected {other:?}"),
        }
        match model_library("xyz", &ModelParams::new()) {
            Err(Error::UnknownModel { suggestion, .. }) => assert!(suggestion.is_none()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_and_unknown_parameters_are_reported() {
        let mut p = gallery()[0].defaults();
        p.remove("A");
        assert!(matches!(
            model_library("circular", &p),
            Err(Error::MissingParameter { .. })
        ));
        let mut p = gallery()[0].defaults();
        p.insert("B".into(), 1.0);
        assert!(matches!(
            model_library("circular", &p),
            Err(Error::InvalidArgument(_))
        ));
    }
}
