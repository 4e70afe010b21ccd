//! Declarative run configuration.
//!
//! Units: energies and frequencies in units of the qudit splitting ω₀ (the model's own
//! parameters), times in units of the common drive period T_com, phases in radians.
//! Every object rejects unknown keys.

use floqsens::floquet::{gallery, model_library, ModelParams, TwoToneModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// Experiment kinds, one per subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bands,
    Power,
    Evolve,
    Qfi,
    Parity,
    Scaling,
    Loss,
    Bayes,
    Noise,
    Detune,
    Optimize,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bands => "bands",
            Experiment::Power => "power",
            Experiment::Evolve => "evolve",
            Experiment::Qfi => "qfi",
            Experiment::Parity => "parity",
            Experiment::Scaling => "scaling",
            Experiment::Loss => "loss",
            Experiment::Bayes => "bayes",
            Experiment::Noise => "noise",
            Experiment::Detune => "detune",
            Experiment::Optimize => "optimize",
            Experiment::Validate => "validate",
        }
    }

    fn needs_periods(self) -> bool {
        matches!(
            self,
            Experiment::Evolve
                | Experiment::Qfi
                | Experiment::Parity
                | Experiment::Scaling
                | Experiment::Detune
                | Experiment::Optimize
                | Experiment::Validate
        )
    }
}

/// A configuration problem detected before any computation (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; when present it must match the subcommand.
    pub experiment: Option<Experiment>,
    pub model: ModelSpec,
    #[serde(default)]
    pub input: InputSpec,
    /// Phase-grid points per axis (m × m lattice).
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Evolution times in units of T_com.
    pub periods: Option<Periods>,
    /// Fock truncation per mode (default n_c + ⌈6√n_c⌉ + 8).
    pub n_max: Option<usize>,
    /// Master seed for stochastic experiments.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ancilla: AncillaSpec,
    /// Number of θ̃ samples in [0, 2π) for parity readout.
    #[serde(default = "default_theta_points")]
    pub theta_points: usize,
    /// Output directory (overridden by --out).
    pub out: Option<PathBuf>,
    pub evolve: Option<EvolveSpec>,
    pub scaling: Option<ScalingSpec>,
    pub loss: Option<LossSpec>,
    pub bayes: Option<BayesSpec>,
    pub noise: Option<NoiseSpec>,
    pub detune: Option<DetuneSpec>,
    pub optimize: Option<OptimizeSpec>,
}

fn default_grid() -> usize {
    64
}

fn default_theta_points() -> usize {
    256
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Gallery name (see `floqsens list-models`).
    pub name: String,
    /// Overrides of the gallery defaults.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Fock,
    Coherent,
}

/// Drive input: |n_c, n_c⟩ or a coherent product with mean n_c per mode and phases φ₁₀, φ₂₀.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub kind: InputKind,
    pub n_c: u64,
    #[serde(default)]
    pub phi10: f64,
    #[serde(default)]
    pub phi20: f64,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            kind: InputKind::Fock,
            n_c: 25,
            phi10: 0.0,
            phi20: 0.0,
        }
    }
}

/// Either an explicit list or an inclusive range.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Periods {
    List(Vec<u64>),
    Range(PeriodRange),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodRange {
    pub from: u64,
    pub to: u64,
    #[serde(default = "one")]
    pub step: u64,
}

fn one() -> u64 {
    1
}

impl Periods {
    pub fn values(&self) -> Vec<u64> {
        match self {
            Periods::List(v) => v.clone(),
            Periods::Range(r) => (r.from..=r.to).step_by(r.step.max(1) as usize).collect(),
        }
    }
}

/// Ancilla |β, ±⟩ built from the functional power operator of `drive`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaSpec {
    #[serde(default = "one_usize")]
    pub drive: usize,
    /// Free relative phases β (radians); empty means all zero.
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub minus: bool,
}

fn one_usize() -> usize {
    1
}

impl Default for AncillaSpec {
    fn default() -> Self {
        Self {
            drive: 1,
            beta: Vec::new(),
            minus: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Phase-lattice model (unrestricted photon numbers).
    #[default]
    Lattice,
    /// Full quantized model on a truncated Fock space.
    Fock,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    #[serde(default)]
    pub engine: Engine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Δθ̃ at a fixed θ̃ (`theta`).
    Fixed,
    /// Minimum Δθ̃ over the θ̃ grid.
    Best,
    /// Δθ̃ from the θ̃-averaged Fisher information.
    #[default]
    Average,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    #[serde(default)]
    pub selection: Selection,
    /// θ̃ for the fixed selection (radians; 0 is evaluated at 1e−3).
    pub theta: Option<f64>,
    /// Classifier horizon in T_com (default: the last period).
    pub horizon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeState {
    /// (|N,0⟩ + |0,N⟩)/√2.
    Noon,
    /// Twin-Fock |N/2, N/2⟩ after a balanced beam splitter.
    TwinFock,
    /// Path-entangled state from the full Fock model with n_c = N/2 (model, ancilla, `pes_periods`).
    Pes,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub states: Vec<ProbeState>,
    /// Total photon number N.
    pub n: usize,
    /// Arm transmissions η ∈ [0, 1].
    pub etas: Vec<f64>,
    /// Generation time of the PES probe in T_com.
    #[serde(default = "four")]
    pub pes_periods: u64,
}

fn four() -> u64 {
    4
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BayesSpec {
    pub states: Vec<ProbeState>,
    pub n: usize,
    /// Gaussian prior widths δθ (radians).
    pub prior_widths: Vec<f64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "four")]
    pub pes_periods: u64,
}

fn default_nodes() -> usize {
    64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKindSpec {
    /// White noise on the ancilla, coupled through σx (first Pauli-like axis).
    Dephasing,
    /// White frequency noise on one drive.
    Frequency,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKindSpec,
    /// Noise strengths δη or δω in units of the drive frequency ω.
    pub strengths: Vec<f64>,
    /// Drive receiving frequency noise.
    #[serde(default = "one_usize")]
    pub drive: usize,
    /// Time step τ in T_com (at most 1e−3).
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    /// Simulated time in T_com.
    pub horizon: f64,
    #[serde(default = "default_samples")]
    pub samples_per_tcom: usize,
    /// Transfer counts as terminated once its slope falls below this fraction of the initial slope.
    #[serde(default = "half")]
    pub termination_fraction: f64,
    /// Classical drive phases (φ₁, φ₂) of the trajectory, snapped to the grid.
    #[serde(default = "default_noise_phases")]
    pub phases: [f64; 2],
}

fn default_tau() -> f64 {
    1e-3
}

/// Smallest trajectory ensemble the noise averages accept.
pub const MIN_TRAJECTORIES: usize = 50;

fn default_trajectories() -> usize {
    MIN_TRAJECTORIES
}

fn default_samples() -> usize {
    10
}

fn half() -> f64 {
    0.5
}

fn default_noise_phases() -> [f64; 2] {
    [std::f64::consts::FRAC_PI_2, 0.0]
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DetuneSpec {
    /// Common detunings δω in units of ω (rounded to multiples of 1/grid).
    pub delta_omegas: Vec<f64>,
    /// Relative rise of Δθ̃ over the undetuned series that marks the onset.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Fixed θ̃ (radians); absent means the best θ̃ per time.
    pub theta: Option<f64>,
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default)]
    pub engine: Engine,
    /// Scan points per free phase.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub refine_sweeps: usize,
}

fn default_points() -> usize {
    24
}

/// A validated configuration with the model already built.
pub struct Prepared {
    pub config: RunConfig,
    pub experiment: Experiment,
    pub model: TwoToneModel,
    pub periods: Vec<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    /// Schema checks that need no computation; builds the model.
    pub fn prepare(self, experiment: Experiment) -> Result<Prepared, ConfigError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return bad(format!(
                    "config is for '{}' but the subcommand is '{}'",
                    e.name(),
                    experiment.name()
                ));
            }
        }
        let mut params: ModelParams = gallery()
            .into_iter()
            .find(|m| m.name == self.model.name)
            .map(|m| m.defaults())
            .unwrap_or_default();
        params.extend(self.model.params.clone());
        let model =
            model_library(&self.model.name, &params).map_err(|e| ConfigError(e.to_string()))?;
        if self.grid < 4 {
            return bad("grid must be at least 4");
        }
        if self.input.n_c == 0 {
            return bad("input.n_c must be positive");
        }
        if self.theta_points < 4 {
            return bad("theta_points must be at least 4");
        }
        if !(1..=2).contains(&self.ancilla.drive) {
            return bad("ancilla.drive must be 1 or 2");
        }
        let probe_n = match experiment {
            Experiment::Loss => self.loss.as_ref().map(|l| l.n as u64 / 2),
            Experiment::Bayes => self.bayes.as_ref().map(|b| b.n as u64 / 2),
            _ => Some(self.input.n_c),
        };
        if let (Some(n), Some(n_c)) = (self.n_max, probe_n) {
            if (n as u64) < n_c {
                return bad(format!(
                    "n_max must be at least the per-mode occupation {n_c}"
                ));
            }
        }
        let periods = self
            .periods
            .as_ref()
            .map(Periods::values)
            .unwrap_or_default();
        if experiment.needs_periods() && periods.is_empty() {
            return bad(format!(
                "'{}' needs a non-empty 'periods'",
                experiment.name()
            ));
        }
        if periods.windows(2).any(|w| w[1] <= w[0]) || periods.first() == Some(&0) {
            return bad("periods must be positive and strictly increasing");
        }
        let section = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                bad(format!("'{}' needs a '{key}' section", experiment.name()))
            }
        };
        match experiment {
            Experiment::Loss => {
                section(self.loss.is_some(), "loss")?;
                let l = self.loss.as_ref().unwrap();
                check_probe(&l.states, l.n)?;
                if l.etas.is_empty() || l.etas.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return bad("loss.etas must be a non-empty list in [0, 1]");
                }
            }
            Experiment::Bayes => {
                section(self.bayes.is_some(), "bayes")?;
                let b = self.bayes.as_ref().unwrap();
                check_probe(&b.states, b.n)?;
                if b.prior_widths.is_empty() || b.prior_widths.iter().any(|w| *w <= 0.0) {
                    return bad("bayes.prior_widths must be a non-empty list of positive widths");
                }
                if b.nodes < 2 {
                    return bad("bayes.nodes must be at least 2");
                }
            }
            Experiment::Noise => {
                section(self.noise.is_some(), "noise")?;
                let n = self.noise.as_ref().unwrap();
                if n.strengths.is_empty() || n.strengths.iter().any(|s| *s < 0.0) {
                    return bad("noise.strengths must be a non-empty list of non-negative values");
                }
                if !(n.tau > 0.0 && n.tau <= 1e-3) {
                    return bad("noise.tau must lie in (0, 1e-3] T_com");
                }
                if n.horizon <= 0.0 || n.trajectories == 0 || n.samples_per_tcom == 0 {
                    return bad(
                        "noise.horizon, trajectories and samples_per_tcom must be positive",
                    );
                }
                if !(1..=2).contains(&n.drive) {
                    return bad("noise.drive must be 1 or 2");
                }
            }
            Experiment::Detune => {
                section(self.detune.is_some(), "detune")?;
                let d = self.detune.as_ref().unwrap();
                if d.delta_omegas.is_empty()
                    || d.delta_omegas.iter().any(|x| !(0.0..0.5).contains(x))
                {
                    return bad("detune.delta_omegas must be a non-empty list in [0, 0.5)");
                }
            }
            Experiment::Scaling => {
                let s = self.scaling.clone().unwrap_or_default();
                if s.selection == Selection::Fixed && s.theta.is_none() {
                    return bad("scaling.selection 'fixed' needs scaling.theta");
                }
                if periods.len() < 2 {
                    return bad("scaling needs at least two periods");
                }
            }
            Experiment::Optimize => {
                if let Some(o) = &self.optimize {
                    if o.points < 2 {
                        return bad("optimize.points must be at least 2");
                    }
                }
            }
            _ => {}
        }
        Ok(Prepared {
            experiment,
            model,
            periods,
            config: self,
        })
    }
}

fn check_probe(states: &[ProbeState], n: usize) -> Result<(), ConfigError> {
    if states.is_empty() {
        return bad("states must list at least one probe");
    }
    if n == 0 || n % 2 == 1 {
        return bad("the total photon number n must be even and positive");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> &'static str {
        r#"{"model": {"name": "polarization"}, "periods": [1, 2, 3]}"#
    }

    #[test]
    fn defaults_and_ranges() {
        let c = RunConfig::parse(base()).unwrap();
        assert_eq!(c.grid, 64);
        assert_eq!(c.input.kind, InputKind::Fock);
        let c = RunConfig::parse(
            r#"{"model": {"name": "zeeman"}, "periods": {"from": 2, "to": 10, "step": 4}}"#,
        )
        .unwrap();
        assert_eq!(c.periods.unwrap().values(), vec![2, 6, 10]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"model": {"name": "zeeman"}, "colour": 1}"#,
            r#"{"model": {"name": "zeeman", "param": {}}}"#,
            r#"{"model": {"name": "zeeman"}, "input": {"kind": "fock", "n_c": 3, "phase": 0}}"#,
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn semantic_checks() {
        let c = RunConfig::parse(base()).unwrap();
        assert!(c.clone().prepare(Experiment::Qfi).is_ok());
        assert!(c.clone().prepare(Experiment::Loss).is_err());
        let c = RunConfig::parse(r#"{"model": {"name": "polarisation"}}"#).unwrap();
        let e = c.prepare(Experiment::Bands).err().unwrap();
        assert!(e.0.contains("did you mean 'polarization'"), "{e}");
        let c = RunConfig::parse(r#"{"experiment": "qfi", "model": {"name": "zeeman"}}"#).unwrap();
        assert!(c.prepare(Experiment::Bands).is_err());
        let c = RunConfig::parse(r#"{"model": {"name": "zeeman"}, "periods": [3, 2]}"#).unwrap();
        assert!(c.prepare(Experiment::Qfi).is_err());
        let c = RunConfig::parse(r#"{"model": {"name": "zeeman", "params": {"B9": 1}}}"#).unwrap();
        assert!(c.prepare(Experiment::Bands).is_err());
    }
}
