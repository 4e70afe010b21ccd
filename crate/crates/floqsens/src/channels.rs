//! Imperfections: photon loss in one interferometer arm (Kraus channel), Bayesian estimation
//! with an a-priori phase distribution, and stochastic / deterministic drive and qudit noise.

use crate::error::{Error, Result};
use crate::floquet::{TwoToneModel, DEFAULT_STEPS_PER_TCOM};
use crate::lattice::{project_pes, FieldDistribution, LatticeState};
use crate::linalg::{self, ONE, ZERO};
use crate::metrology::{checked_spectrum, pure_density, qfi_mixed};
use crate::opspace::{PhaseGrid, TwoModeState};
use crate::readout::{parity_curve, parity_curve_density};
use crate::{CMat, CVec, C64};
use gauss_quad::hermite::GaussHermite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::num::NonZeroUsize;

// ---------------------------------------------------------------------------
// Two-mode density matrices and photon loss
// ---------------------------------------------------------------------------

/// Density matrix on the Fock window 0..=n_max per mode, basis index n₁(n_max+1) + n₂.
#[derive(Clone, Debug)]
pub struct TwoModeDensity {
    pub n_max: usize,
    pub rho: CMat,
}

impl TwoModeDensity {
    pub fn new(n_max: usize, rho: CMat) -> Result<Self> {
        let s = (n_max + 1) * (n_max + 1);
        if rho.nrows() != s || rho.ncols() != s {
            return Err(Error::InvalidDensity(format!("expected a {s}×{s} matrix")));
        }
        let d = Self { n_max, rho };
        d.validate()?;
        Ok(d)
    }

    /// |ψ⟩⟨ψ| on the smallest Fock window containing the state.
    pub fn from_pure(state: &TwoModeState) -> Result<Self> {
        let n_max = state
            .iter()
            .filter(|(_, _, a)| *a != ZERO)
            .fold(0i64, |m, (n1, n2, _)| m.max(n1).max(n2));
        let (window, dropped) = state.to_fock_window(n_max.max(0) as usize);
        if dropped > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "state has weight {dropped:.3e} at negative occupations"
            )));
        }
        let norm = window.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "state not normalised (‖ψ‖² = {norm})"
            )));
        }
        Ok(Self {
            n_max: n_max as usize,
            rho: pure_density(&window),
        })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_max + 1) + n2
    }

    /// Trace 1 within 1e−9, Hermitian within 1e−10, eigenvalues ≥ −1e−8.
    pub fn validate(&self) -> Result<()> {
        checked_spectrum(&self.rho).map(|_| ())
    }

    /// Ĵz = (n̂₁ − n̂₂)/2 eigenvalue of each basis index.
    pub fn jz_values(&self) -> Vec<f64> {
        let s = self.n_max + 1;
        (0..self.dim())
            .map(|k| 0.5 * ((k / s) as f64 - (k % s) as f64))
            .collect()
    }

    /// Restriction to the basis states with non-negligible population (ρ is PSD, so
    /// rows with vanishing diagonal vanish). Returns the compressed matrix and kept indices.
    pub fn support(&self) -> (CMat, Vec<usize>) {
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&k| self.rho[(k, k)].re > 1e-14)
            .collect();
        let r = CMat::from_fn(keep.len(), keep.len(), |a, b| self.rho[(keep[a], keep[b])]);
        (r, keep)
    }

    /// QFI for the generator Ĵz.
    pub fn qfi_jz(&self) -> Result<f64> {
        let (r, keep) = self.support();
        let jz = self.jz_values();
        let gen = CMat::from_diagonal(&CVec::from_iterator(
            keep.len(),
            keep.iter().map(|&k| C64::new(jz[k], 0.0)),
        ));
        let tr = linalg::trace(&r).re;
        qfi_mixed(&(r / C64::new(tr, 0.0)), &gen)
    }
}

fn binomial_sqrt(n: usize, j: usize) -> f64 {
    // √C(n, j) through logs of factorials to stay finite for large n.
    let lf = |k: usize| (1..=k).map(|x| (x as f64).ln()).sum::<f64>();
    (0.5 * (lf(n) - lf(j) - lf(n - j))).exp()
}

/// Matrix element ⟨n−j|K̂_j|n⟩ = √C(n,j) (1−η)^{j/2} η^{(n−j)/2}.
fn kraus_element(n: usize, j: usize, eta: f64) -> f64 {
    if j > n {
        return 0.0;
    }
    let loss = if j == 0 {
        1.0
    } else {
        (1.0 - eta).powf(0.5 * j as f64)
    };
    let keep = if n == j {
        1.0
    } else {
        eta.powf(0.5 * (n - j) as f64)
    };
    binomial_sqrt(n, j) * loss * keep
}

/// Σ_j K̂_j†K̂_j − 1 on a single mode truncated at n_max (max-abs residual).
pub fn kraus_completeness_residual(n_max: usize, eta: f64) -> f64 {
    (0..=n_max)
        .map(|n| {
            ((0..=n)
                .map(|j| kraus_element(n, j, eta).powi(2))
                .sum::<f64>()
                - 1.0)
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Photon loss in arm 1 with transmissivity η: ρ ↦ Σ_j K̂_j ρ K̂_j†,
/// K̂_j = (1−η)^{j/2} η^{n̂₁/2} â₁ʲ/√j!.
pub fn lossy_channel(input: &TwoModeDensity, eta: f64) -> Result<TwoModeDensity> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!(
            "transmissivity η = {eta} outside [0, 1]"
        )));
    }
    let s = input.n_max + 1;
    let dim = input.dim();
    let mut out = CMat::zeros(dim, dim);
    for j in 0..s {
        for a in 0..dim {
            let (n1, n2) = (a / s, a % s);
            let ka = kraus_element(n1, j, eta);
            if ka == 0.0 {
                continue;
            }
            let ra = (n1 - j) * s + n2;
            for b in 0..dim {
                let (m1, m2) = (b / s, b % s);
                let kb = kraus_element(m1, j, eta);
                if kb == 0.0 {
                    continue;
                }
                let v = input.rho[(a, b)];
                if v != ZERO {
                    out[(ra, (m1 - j) * s + m2)] += v * (ka * kb);
                }
            }
        }
    }
    let d = TwoModeDensity {
        n_max: input.n_max,
        rho: out,
    };
    let tr = linalg::trace(&d.rho).re;
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "loss channel changed the trace to {tr}"
        )));
    }
    Ok(d)
}

/// One transmissivity of a loss sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LossPoint {
    pub eta: f64,
    pub qfi: f64,
    pub delta_theta_qfi: f64,
    /// Largest parity Fisher information over the θ̃ grid.
    pub parity_fisher: f64,
    pub delta_theta_parity: f64,
    pub theta_tilde: f64,
}

/// QFI and best parity sensitivity after loss, per η.
pub fn loss_sweep(state: &TwoModeState, etas: &[f64], thetas: &[f64]) -> Result<Vec<LossPoint>> {
    let rho0 = TwoModeDensity::from_pure(state)?;
    etas.par_iter()
        .map(|&eta| {
            let rho = lossy_channel(&rho0, eta)?;
            let qfi = rho.qfi_jz()?;
            let curve = if eta == 1.0 {
                parity_curve(&state.to_fock_window(rho.n_max).0, thetas)?
            } else {
                parity_curve_density(&rho.rho, rho.n_max, thetas)?
            };
            let (theta_tilde, dp) = curve.best().unwrap_or((f64::NAN, f64::INFINITY));
            Ok(LossPoint {
                eta,
                qfi,
                delta_theta_qfi: 1.0 / qfi.sqrt(),
                parity_fisher: 1.0 / (dp * dp),
                delta_theta_parity: dp,
                theta_tilde,
            })
        })
        .collect()
}

pub fn write_loss_csv<W: Write>(mut w: W, rows: &[LossPoint]) -> std::io::Result<()> {
    writeln!(
        w,
        "eta,qfi,delta_theta_qfi,parity_fisher,delta_theta_parity,theta_tilde"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.eta, r.qfi, r.delta_theta_qfi, r.parity_fisher, r.delta_theta_parity, r.theta_tilde
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bayesian estimation with an a-priori phase distribution
// ---------------------------------------------------------------------------

/// A-priori distribution P(θ) of the imprinted phase (centred at θ = 0) with quadrature.
#[derive(Clone, Debug, Serialize)]
pub struct PriorModel {
    /// Width δθ for Gaussian priors.
    pub width: Option<f64>,
    pub nodes: Vec<f64>,
    /// Quadrature weights including P(θ): Σ w_i g(θ_i) ≈ ∫P(θ) g(θ) dθ.
    pub weights: Vec<f64>,
    /// Classical Fisher information F₀ = ∫(∂_θ ln P)² P dθ.
    pub fisher: f64,
}

impl PriorModel {
    /// Gaussian of width δθ, Gauss–Hermite rule with `nodes` points (F₀ = 1/δθ²).
    pub fn gaussian(width: f64, nodes: usize) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior width {width} must be positive"
            )));
        }
        let n = NonZeroUsize::new(nodes)
            .ok_or_else(|| Error::InvalidArgument("need at least one node".into()))?;
        let rule = GaussHermite::new(n);
        let norm = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * width * x, w / norm))
            .unzip();
        let p = Self {
            width: Some(width),
            nodes,
            weights,
            fisher: 1.0 / (width * width),
        };
        p.check()?;
        Ok(p)
    }

    /// Tabulated density on an increasing, uniform θ grid (trapezoid rule; F₀ by central differences).
    pub fn tabulated(thetas: &[f64], density: &[f64]) -> Result<Self> {
        if thetas.len() != density.len() || thetas.len() < 3 {
            return Err(Error::InvalidArgument(
                "tabulated prior needs ≥ 3 matching samples".into(),
            ));
        }
        if density.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior density must be finite and non-negative".into(),
            ));
        }
        let h = thetas[1] - thetas[0];
        if thetas
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0))
            || h <= 0.0
        {
            return Err(Error::InvalidArgument(
                "tabulated prior needs a uniform increasing grid".into(),
            ));
        }
        let n = thetas.len();
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.5 * h * density[i]
                } else {
                    h * density[i]
                }
            })
            .collect();
        let mut fisher = 0.0;
        for i in 1..n - 1 {
            if density[i] > 0.0 {
                let d = (density[i + 1] - density[i - 1]) / (2.0 * h);
                fisher += h * d * d / density[i];
            }
        }
        let p = Self {
            width: None,
            nodes: thetas.to_vec(),
            weights,
            fisher,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "prior integrates to {total}, not 1"
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * (t - m) * (t - m))
            .sum()
    }

    /// (∫P e^{−iθΔ}, ∫P θ e^{−iθΔ}) for a Ĵz eigenvalue difference Δ.
    fn moments(&self, delta: f64) -> (C64, C64) {
        let mut a = ZERO;
        let mut b = ZERO;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let e = C64::from_polar(w, -t * delta);
            a += e;
            b += e * t;
        }
        (a, b)
    }
}

/// Posterior variance under the optimal projective measurement and the resulting gain.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BayesResult {
    pub prior_variance: f64,
    pub prior_fisher: f64,
    /// Minimal posterior variance Δ_pθ².
    pub posterior_variance: f64,
    /// Δθ_m with 1/Δθ_m² = 1/Δ_pθ² − F₀ (+∞ when the measurement adds nothing).
    pub delta_theta_m: f64,
}

/// Optimal-measurement posterior variance for the phase-imprinted family ρ_θ = e^{−iθĴz}ρe^{iθĴz}.
pub fn bayesian_improvement(probe: &TwoModeDensity, prior: &PriorModel) -> Result<BayesResult> {
    probe.validate()?;
    let (r, keep) = probe.support();
    let jz = probe.jz_values();
    let n = keep.len();
    // Distinct Ĵz differences are half-integers; cache their prior moments.
    let span = 2 * probe.n_max + 1;
    let mut cache: Vec<Option<(C64, C64)>> = vec![None; 2 * span + 1];
    let mut moments = |d: f64| {
        let k = (2.0 * d).round() as i64 + span as i64;
        *cache[k as usize].get_or_insert_with(|| prior.moments(d))
    };
    let mut avg = CMat::zeros(n, n);
    let mut first = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (m0, m1) = moments(jz[keep[a]] - jz[keep[b]]);
            avg[(a, b)] = r[(a, b)] * m0;
            first[(a, b)] = r[(a, b)] * m1;
        }
    }
    let (lam, vecs) = linalg::herm_eig(&avg);
    let fb = vecs.adjoint() * &first * &vecs;
    let mut gain = 0.0;
    for k in 0..n {
        for l in 0..n {
            let s = lam[k] + lam[l];
            if s > 1e-12 {
                gain += 2.0 * fb[(k, l)].norm_sqr() / s;
            }
        }
    }
    let mean = prior.mean();
    let second: f64 = prior
        .nodes
        .iter()
        .zip(&prior.weights)
        .map(|(t, w)| w * t * t)
        .sum();
    let posterior = (second - gain).max(0.0);
    let prior_variance = second - mean * mean;
    let inv = 1.0 / posterior - prior.fisher;
    let delta_theta_m = if inv <= 1e-8 * prior.fisher {
        f64::INFINITY
    } else {
        1.0 / inv.sqrt()
    };
    Ok(BayesResult {
        prior_variance,
        prior_fisher: prior.fisher,
        posterior_variance: posterior,
        delta_theta_m,
    })
}

// ---------------------------------------------------------------------------
// Noise on the classical energy-transfer trajectory
// ---------------------------------------------------------------------------

/// Noise source acting on a classical-drive trajectory.
#[derive(Clone, Debug, Serialize)]
pub enum NoiseKind {
    /// δĤ(t) = η(t)·axis with white Gaussian η.
    Dephasing,
    /// ω_j → ω_j + Δω(t) with white Gaussian Δω on one drive (1 or 2).
    Frequency { drive: usize },
    /// Constant frequency offset on one drive.
    Detuning { drive: usize },
}

#[derive(Clone, Debug)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// δη or δω (energy units).
    pub strength: f64,
    /// Time step τ (absolute time).
    pub tau: f64,
    /// Qudit operator coupled to the dephasing noise.
    pub axis: CMat,
    pub seed: u64,
}

/// Trajectory-averaged work of both drives.
#[derive(Clone, Debug, Serialize)]
pub struct NoisyTransfer {
    /// Sample times (absolute), one per sampling interval.
    pub times: Vec<f64>,
    pub mean_work: [Vec<f64>; 2],
    /// Standard error of the mean.
    pub stderr: [Vec<f64>; 2],
    /// Sample variance of the accumulated drive-phase meander ΔΦ(t).
    pub phase_variance: Vec<f64>,
    pub trajectories: usize,
}

impl NoisyTransfer {
    /// First sample time at which the per-period slope of E_j (averaged over three periods)
    /// drops below `fraction` of the slope over the first period.
    pub fn termination_time(
        &self,
        j: usize,
        samples_per_tcom: usize,
        fraction: f64,
    ) -> Option<f64> {
        let e = &self.mean_work[j];
        let k = samples_per_tcom;
        if e.len() <= 4 * k {
            return None;
        }
        let slope = |i: usize| e[i + k] - e[i];
        let s0 = slope(0);
        (0..e.len() - 3 * k).find_map(|i| {
            let avg = (slope(i) + slope(i + k) + slope(i + 2 * k)) / 3.0;
            (avg.abs() < fraction * s0.abs()).then(|| self.times[i])
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,E1,E2,E1_err,E2_err,phase_variance")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.times[i],
                self.mean_work[0][i],
                self.mean_work[1][i],
                self.stderr[0][i],
                self.stderr[1][i],
                self.phase_variance[i]
            )?;
        }
        Ok(())
    }
}

/// Per-trajectory generator: ChaCha stream `index` under the master seed, so results do not
/// depend on scheduling or thread count.
fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte-Carlo average of the drive work E_j(t) = ∫⟨dĤ_j/dt⟩ dt under noise.
pub fn noisy_energy_transfer(
    model: &TwoToneModel,
    phases: (f64, f64),
    psi0: &CVec,
    noise: &NoiseSpec,
    trajectories: usize,
    horizon: f64,
    samples_per_tcom: usize,
) -> Result<NoisyTransfer> {
    let t_com = model.t_com();
    if noise.tau > 1e-3 * t_com * (1.0 + 1e-9) || noise.tau <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time step τ = {} must lie in (0, 1e−3 T_com]",
            noise.tau
        )));
    }
    if trajectories < 50 {
        return Err(Error::InvalidArgument(format!(
            "need at least 50 trajectories, got {trajectories}"
        )));
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 || psi0.len() != model.dim() {
        return Err(Error::InvalidArgument(
            "initial qudit state must be normalised and match the model".into(),
        ));
    }
    if noise.strength < 0.0 {
        return Err(Error::InvalidArgument(
            "noise strength must be non-negative".into(),
        ));
    }
    let drive = match noise.kind {
        NoiseKind::Frequency { drive } | NoiseKind::Detuning { drive } => {
            if drive != 1 && drive != 2 {
                return Err(Error::InvalidArgument(format!(
                    "drive index {drive} must be 1 or 2"
                )));
            }
            drive
        }
        NoiseKind::Dephasing => {
            if noise.axis.nrows() != model.dim()
                || linalg::hermiticity_residual(&noise.axis) > 1e-12
            {
                return Err(Error::InvalidArgument(
                    "dephasing axis must be a Hermitian qudit operator".into(),
                ));
            }
            0
        }
    };
    let steps_per_sample = ((t_com / noise.tau) / samples_per_tcom as f64)
        .round()
        .max(1.0) as usize;
    let dt = t_com / (steps_per_sample * samples_per_tcom) as f64;
    let samples = (horizon / t_com * samples_per_tcom as f64).ceil() as usize;
    let runs: Vec<(Vec<[f64; 2]>, Vec<f64>)> = (0..trajectories as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = trajectory_rng(noise.seed, index);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let mut psi = psi0.clone();
            let mut work = [0.0f64; 2];
            let mut meander = 0.0f64;
            let mut out = Vec::with_capacity(samples + 1);
            let mut phi_out = Vec::with_capacity(samples + 1);
            out.push(work);
            phi_out.push(0.0);
            let mut t = 0.0;
            for _ in 0..samples {
                for _ in 0..steps_per_sample {
                    let tm = t + 0.5 * dt;
                    let (mut h, dw) = match noise.kind {
                        NoiseKind::Dephasing => {
                            let eta = noise.strength * normal.sample(&mut rng);
                            (
                                model.hamiltonian(tm, phases) + &noise.axis * C64::new(eta, 0.0),
                                0.0,
                            )
                        }
                        NoiseKind::Frequency { .. } | NoiseKind::Detuning { .. } => {
                            let dw = match noise.kind {
                                NoiseKind::Frequency { .. } => {
                                    noise.strength * normal.sample(&mut rng)
                                }
                                _ => noise.strength,
                            };
                            // Phase at the step midpoint: accumulated meander plus half of this step.
                            let mid = meander + 0.5 * dw * dt;
                            let ph = if drive == 1 {
                                (phases.0 + mid, phases.1)
                            } else {
                                (phases.0, phases.1 + mid)
                            };
                            (model.hamiltonian(tm, ph), dw)
                        }
                    };
                    let ph_mid = if drive == 0 {
                        phases
                    } else {
                        let mid = meander + 0.5 * dw * dt;
                        if drive == 1 {
                            (phases.0 + mid, phases.1)
                        } else {
                            (phases.0, phases.1 + mid)
                        }
                    };
                    if h.nrows() == 2 {
                        // Keep the Hermitian part exact for the closed-form 2×2 exponential.
                        h[(1, 0)] = h[(0, 1)].conj();
                    }
                    let half = if h.nrows() == 2 {
                        linalg::expm_herm2(h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)], 0.5 * dt)
                    } else {
                        linalg::expm_herm(&h, 0.5 * dt)
                    };
                    let mid = &half * &psi;
                    for (j, wj) in work.iter_mut().enumerate() {
                        let mut rate = model.drive_rate(j + 1, tm, ph_mid);
                        if j + 1 == drive {
                            // dH_j/dt carries the instantaneous frequency ω_j + Δω.
                            let w = model.omega(j + 1);
                            rate *= C64::new((w + dw) / w, 0.0);
                        }
                        *wj += dt * linalg::expectation(&rate, &mid).re;
                    }
                    psi = &half * mid;
                    meander += dw * dt;
                    t += dt;
                }
                out.push(work);
                phi_out.push(meander);
            }
            (out, phi_out)
        })
        .collect();
    let n = trajectories as f64;
    let len = samples + 1;
    let mut res = NoisyTransfer {
        times: (0..len)
            .map(|i| i as f64 * steps_per_sample as f64 * dt)
            .collect(),
        mean_work: [vec![0.0; len], vec![0.0; len]],
        stderr: [vec![0.0; len], vec![0.0; len]],
        phase_variance: vec![0.0; len],
        trajectories,
    };
    for i in 0..len {
        for j in 0..2 {
            let m = runs.iter().map(|r| r.0[i][j]).sum::<f64>() / n;
            let v = runs.iter().map(|r| (r.0[i][j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            res.mean_work[j][i] = m;
            res.stderr[j][i] = (v / n).sqrt();
        }
        let pm = runs.iter().map(|r| r.1[i]).sum::<f64>() / n;
        res.phase_variance[i] = runs.iter().map(|r| (r.1[i] - pm).powi(2)).sum::<f64>() / (n - 1.0);
    }
    Ok(res)
}

// ---------------------------------------------------------------------------
// Deterministic detuning of the quantized drives
// ---------------------------------------------------------------------------

/// Parity sensitivity when both drives run at ω + δω while the ancilla (coin) state and
/// projection are those prepared for ω.
#[derive(Clone, Debug, Serialize)]
pub struct DetunedSeries {
    pub delta_omega: f64,
    /// Elapsed time in nominal periods T_com = 2π/ω.
    pub periods: Vec<f64>,
    pub delta_theta: Vec<f64>,
    pub baseline: Vec<f64>,
    /// First time at which Δθ̃ departs from the baseline by more than `threshold` (relative).
    pub onset: Option<f64>,
    pub threshold: f64,
}

impl DetunedSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta_omega,T,delta_theta,baseline")?;
        for i in 0..self.periods.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.delta_omega, self.periods[i], self.delta_theta[i], self.baseline[i]
            )?;
        }
        Ok(())
    }
}

/// One nominal period U'_φ(T) of the detuned drives at every grid point, for a common
/// detuning of `shift` grid cells per nominal period (δω/ω = shift/m).
///
/// With ω₁ = ω₂ a common phase offset c is a time offset, so along each Δφ line
/// U'_{φ+c}(T) = U'_φ(T + c/ω') U'_φ(c/ω')†. Every needed time is a multiple of T'/m, hence one
/// propagation per line over 2 + shift/m detuned periods suffices.
fn detuned_period_propagators(
    model: &TwoToneModel,
    grid: &PhaseGrid,
    shift: usize,
) -> Result<Vec<CMat>> {
    let m = grid.m;
    let omega = model.omega(1);
    let omega_d = omega * (1.0 + shift as f64 / m as f64);
    let detuned = model.with_frequencies(omega_d, omega_d)?;
    let t_d = 2.0 * std::f64::consts::PI / omega_d;
    let sub = DEFAULT_STEPS_PER_TCOM.div_ceil(m).max(2);
    let dt = t_d / (m * sub) as f64;
    let samples = 2 * m + shift;
    let lines: Vec<Vec<CMat>> = (0..m)
        .into_par_iter()
        .map(|i1| {
            let phases = (grid.phase(i1), 0.0);
            let mut u = CMat::identity(model.dim(), model.dim());
            let mut out = Vec::with_capacity(samples);
            for k in 0..samples {
                out.push(u.clone());
                for q in 0..sub {
                    let t0 = ((k * sub + q) as f64) * dt;
                    u = detuned.step(t0, dt, phases) * u;
                }
            }
            out
        })
        .collect();
    let mut w = vec![CMat::zeros(0, 0); grid.len()];
    for (i1, line) in lines.iter().enumerate() {
        for j in 0..m {
            let p = grid.index((i1 + j) as isize, j as isize);
            w[p] = &line[m + shift + j] * line[j].adjoint();
        }
    }
    Ok(w)
}

/// Δθ̃ at fixed θ̃ (or the best over `thetas` when `theta` is None) for the PES at each time.
fn sensitivity_at(
    state: &LatticeState,
    ancilla: &CVec,
    theta: Option<f64>,
    thetas: &[f64],
) -> Result<f64> {
    let pes = project_pes(state, ancilla)?.number_state()?;
    match theta {
        Some(t) => {
            let c = parity_curve(&pes, &[t])?;
            Ok(if c.flagged[0] {
                f64::INFINITY
            } else {
                c.delta_theta[0]
            })
        }
        None => Ok(parity_curve(&pes, thetas)?
            .best()
            .map(|b| b.1)
            .unwrap_or(f64::INFINITY)),
    }
}

/// Stroboscopic lattice evolution under a common detuning of `shift` grid cells per period:
/// period k acts with U'_{φ + k·s}(T), s = 2π·shift/m along (1, 1). Returns Δθ̃ at `periods`.
fn detuned_sensitivities(
    w: &[CMat],
    psi0: &LatticeState,
    shift: usize,
    periods: &[u64],
    ancilla: &CVec,
    theta: Option<f64>,
    thetas: &[f64],
) -> Result<Vec<f64>> {
    let grid = psi0.grid;
    let d = psi0.dim;
    let mut state = psi0.clone();
    let mut out = Vec::with_capacity(periods.len());
    let mut k = 0u64;
    for &target in periods {
        while k < target {
            let offset = (k as usize * shift) % grid.m;
            state
                .amps
                .par_chunks_mut(d)
                .enumerate()
                .for_each(|(p, chunk)| {
                    let (i1, i2) = grid.coords(p);
                    let q = grid.index((i1 + offset) as isize, (i2 + offset) as isize);
                    let psi = &w[q] * CVec::from_column_slice(chunk);
                    chunk.copy_from_slice(psi.as_slice());
                });
            k += 1;
        }
        state.periods = k;
        out.push(sensitivity_at(&state, ancilla, theta, thetas)?);
    }
    Ok(out)
}

/// Parity sensitivity series under a common drive detuning δω (lattice model).
///
/// Both drives run at ω + δω while the coin state, the projection and the sampling times
/// t = k·2π/ω belong to the nominal drive. δω is rounded to the nearest multiple of ω/m so
/// that the accumulated phase offset δω·t stays on the grid; the rounded value is reported.
/// The evolution is exact on the lattice, including the micromotion at the sampling times.
#[allow(clippy::too_many_arguments)]
pub fn detuned_parity(
    model: &TwoToneModel,
    grid: &PhaseGrid,
    f: &FieldDistribution,
    ancilla: &CVec,
    delta_omega: f64,
    periods: &[u64],
    theta: Option<f64>,
    thetas: &[f64],
    threshold: f64,
) -> Result<DetunedSeries> {
    if !model.equal_frequencies() {
        return Err(Error::Unsupported(
            "detuned parity series need ω₁ = ω₂".into(),
        ));
    }
    if f.grid != *grid {
        return Err(Error::InvalidArgument(
            "field distribution and grid differ".into(),
        ));
    }
    if periods.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "periods must be strictly increasing".into(),
        ));
    }
    let omega = model.omega(1);
    if delta_omega < 0.0 || delta_omega >= 0.5 * omega {
        return Err(Error::InvalidArgument(format!(
            "δω = {delta_omega} must lie in [0, ω/2), ω = {omega}"
        )));
    }
    let shift = (delta_omega / omega * grid.m as f64).round() as usize;
    let psi0 = LatticeState::product(f, ancilla)?;
    let w0 = detuned_period_propagators(model, grid, 0)?;
    let baseline = detuned_sensitivities(&w0, &psi0, 0, periods, ancilla, theta, thetas)?;
    let series = if shift == 0 {
        baseline.clone()
    } else {
        let w = detuned_period_propagators(model, grid, shift)?;
        detuned_sensitivities(&w, &psi0, shift, periods, ancilla, theta, thetas)?
    };
    let onset = periods
        .iter()
        .zip(series.iter().zip(&baseline))
        .find(|(_, (s, b))| !((*s / *b) - 1.0).abs().le(&threshold))
        .map(|(&k, _)| k as f64);
    Ok(DetunedSeries {
        delta_omega: omega * shift as f64 / grid.m as f64,
        periods: periods.iter().map(|&k| k as f64).collect(),
        delta_theta: series,
        baseline,
        onset,
        threshold,
    })
}

/// Identity-matrix helper for dephasing along the computational z axis of a qudit.
pub fn qudit_sigma_z(d: usize) -> CMat {
    CMat::from_fn(d, d, |a, b| {
        if a == b {
            if a == 0 {
                ONE
            } else {
                -ONE
            }
        } else {
            ZERO
        }
    })
}
