//! Quantum Fisher information, the asymptotic band bounds, the path-entanglement witness
//! and ancilla-phase optimisation.

use crate::error::{Error, Result};
use crate::floquet::FloquetSpectrum;
use crate::fock::{evolve_fock, pes_fock, FockState, KrylovOptions, QuantizedModel};
use crate::lattice::{
    ancilla_state, drive_field_to_number, evolve_lattice, functional_power, project_pes,
    FieldDistribution, FunctionalPowerOperator, LatticeState,
};
use crate::linalg::{self, ZERO};
use crate::opspace::{NumberMoments, TwoModeOperator, TwoModeState};
use crate::{CMat, CVec, C64};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// F_q = 4(⟨A²⟩ − ⟨A⟩²) for a normalised pure state on the operator's Fock window.
pub fn qfi_pure(state: &TwoModeState, generator: &TwoModeOperator) -> Result<f64> {
    let x = generator.flatten(state)?;
    let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "state not normalised (‖ψ‖² = {norm})"
        )));
    }
    let y = generator.apply(&x);
    let mean: C64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
    let second: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    Ok((4.0 * (second - mean.re * mean.re)).max(0.0))
}

/// F_q of a pure state for the generator Ĵz, on any number window.
pub fn qfi_pure_jz(state: &TwoModeState) -> f64 {
    4.0 * state.number_moments().var_jz()
}

/// Mixed-state QFI F_q = 2 Σ (λ_k − λ_l)²/(λ_k + λ_l) |⟨k|A|l⟩|².
pub fn qfi_mixed(rho: &CMat, generator: &CMat) -> Result<f64> {
    let (vals, vecs) = checked_spectrum(rho)?;
    let a = vecs.adjoint() * generator * &vecs;
    let n = vals.len();
    let mut f = 0.0;
    for k in 0..n {
        for l in 0..n {
            let s = vals[k] + vals[l];
            if s <= 1e-12 {
                continue;
            }
            let d = vals[k] - vals[l];
            f += d * d / s * a[(k, l)].norm_sqr();
        }
    }
    Ok(2.0 * f)
}

/// Validate a density matrix and return its clamped, renormalised spectrum.
pub fn checked_spectrum(rho: &CMat) -> Result<(Vec<f64>, CMat)> {
    let tr = linalg::trace(rho);
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::InvalidDensity(format!("trace {tr} differs from 1")));
    }
    let h = linalg::hermiticity_residual(rho);
    if h > 1e-10 {
        return Err(Error::InvalidDensity(format!(
            "not Hermitian (residual {h:.3e})"
        )));
    }
    let (mut vals, vecs) = linalg::herm_eig(rho);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::InvalidDensity(format!(
            "negative eigenvalue {min:.3e}"
        )));
    }
    vals.iter_mut().for_each(|v| {
        if *v < 1e-10 {
            *v = v.max(0.0);
        }
    });
    let total: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= total);
    Ok((vals, vecs))
}

/// |ψ⟩⟨ψ| on the flattened Fock window of `state`.
pub fn pure_density(state: &TwoModeState) -> CMat {
    let v = CVec::from_column_slice(&state.amps);
    &v * v.adjoint()
}

/// Scalar band bound P²[f] and the window [½P², 2P²] for F_q/T².
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QfiBound {
    pub p2: f64,
    pub lower: f64,
    pub upper: f64,
}

/// P²[f] = ½ ∫|f|² Σ_n (∂_{Δφ}ε_n)² for qubit ancillae.
pub fn qfi_bound(spectrum: &FloquetSpectrum, f: &FieldDistribution) -> Result<QfiBound> {
    if spectrum.dim != 2 {
        return Err(Error::Unsupported(format!(
            "the P² bound applies to qubit ancillae, got d = {}",
            spectrum.dim
        )));
    }
    if spectrum.grid != f.grid {
        return Err(Error::InvalidArgument(
            "spectrum and field distribution use different grids".into(),
        ));
    }
    let p2: f64 = (0..f.grid.len())
        .filter(|&p| f.weight(p) > 0.0)
        .map(|p| {
            0.5 * f.quadrature_weight(p)
                * (0..2)
                    .map(|n| spectrum.delta_derivative(p, n).powi(2))
                    .sum::<f64>()
        })
        .sum();
    Ok(QfiBound {
        p2,
        lower: 0.5 * p2,
        upper: 2.0 * p2,
    })
}

/// Q[f] = ∫|f|² |∂_{φ₁}ε₁ ∂_{φ₂}ε₂|, the scale of the mode-entanglement term.
pub fn q_functional(spectrum: &FloquetSpectrum, f: &FieldDistribution) -> Result<f64> {
    if spectrum.dim != 2 {
        return Err(Error::Unsupported(
            "the entanglement bound applies to qubit ancillae".into(),
        ));
    }
    Ok((0..f.grid.len())
        .filter(|&p| f.weight(p) > 0.0)
        .map(|p| {
            f.quadrature_weight(p)
                * (spectrum.derivative(p, 0, 1) * spectrum.derivative(p, 1, 2)).abs()
        })
        .sum())
}

/// Long-time limit of F_q/T² for a PES projected back onto its own ancilla:
/// a weighted variance of ∂_{Δφ}ε_n with weights |f|²|u_n|⁴/𝒩², u_n = ⟨n(φ)|β⟩.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AsymptoticCoefficient {
    /// 𝒩² = ∫|f|² Σ|u_n|⁴.
    pub norm: f64,
    /// (1/𝒩²) ∫|f|² Σ|u_n|⁴ (∂_{Δφ}ε_n)².
    pub second_moment: f64,
    /// (1/𝒩²) ∫|f|² Σ|u_n|⁴ ∂_{Δφ}ε_n.
    pub mean: f64,
}

impl AsymptoticCoefficient {
    /// lim F_q/T² = second moment − mean² (≥ 0, strict for non-zero functional power).
    pub fn coefficient(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

pub fn asymptotic_coefficient(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    ancilla: &CVec,
) -> Result<AsymptoticCoefficient> {
    if ancilla.len() != spectrum.dim {
        return Err(Error::InvalidArgument("ancilla dimension mismatch".into()));
    }
    let (mut norm, mut second, mut mean) = (0.0, 0.0, 0.0);
    for p in (0..f.grid.len()).filter(|&p| f.weight(p) > 0.0) {
        let w = f.quadrature_weight(p);
        let v = &spectrum.states[p];
        for n in 0..spectrum.dim {
            let u4 = v.column(n).dotc(ancilla).norm_sqr().powi(2);
            let s = spectrum.delta_derivative(p, n);
            norm += w * u4;
            second += w * u4 * s * s;
            mean += w * u4 * s;
        }
    }
    Ok(AsymptoticCoefficient {
        norm,
        second_moment: second / norm,
        mean: mean / norm,
    })
}

/// Path-entanglement witness from the occupation covariance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Witness {
    /// K = −2[⟨n₁n₂⟩ − ⟨n₁⟩⟨n₂⟩].
    pub k: f64,
    pub error: f64,
    /// K > 3 × error (and K > 1e−12).
    pub entangled: bool,
    /// 𝓑 = K/(2T²) and the window [½Q, 2Q], when a spectrum and time are supplied.
    pub b: Option<f64>,
    pub q: Option<f64>,
    pub in_window: Option<bool>,
}

pub fn entanglement_witness(moments: &NumberMoments, error: f64) -> Witness {
    let k = moments.covariance_k();
    Witness {
        k,
        error,
        entangled: k > 3.0 * error && k > 1e-12,
        b: None,
        q: None,
        in_window: None,
    }
}

/// Witness plus the ½Q[f] ≤ 𝓑 ≤ 2Q[f] check at time `time` (absolute units).
pub fn entanglement_witness_with_bound(
    moments: &NumberMoments,
    error: f64,
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    time: f64,
) -> Result<Witness> {
    let mut w = entanglement_witness(moments, error);
    let q = q_functional(spectrum, f)?;
    let b = w.k / (2.0 * time * time);
    w.b = Some(b);
    w.q = Some(q);
    w.in_window = Some(b >= 0.5 * q && b <= 2.0 * q);
    Ok(w)
}

/// One row of a sensing report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SensingRow {
    /// Time in units of T_com.
    pub periods: u64,
    pub qfi: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
    pub mean_jz: f64,
    pub k: f64,
    pub q: f64,
    pub success_probability: f64,
    pub edge_mass: f64,
}

/// QFI time series of a PES with the band bounds.
#[derive(Clone, Debug, Serialize)]
pub struct SensingReport {
    pub model: String,
    pub input: String,
    pub t_com: f64,
    pub p2: Option<f64>,
    pub q: Option<f64>,
    pub asymptotic: Option<f64>,
    pub rows: Vec<SensingRow>,
}

impl SensingReport {
    /// F_q/T² per row, T in absolute units.
    pub fn normalized_qfi(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.qfi / (r.periods as f64 * self.t_com).powi(2))
            .collect()
    }

    /// CSV (T, qfi, bound_lo, bound_hi, mean_jz, K, Q); bounds are on F_q (not F_q/T²).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,qfi,bound_lo,bound_hi,mean_jz,K,Q")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.periods, r.qfi, r.bound_lo, r.bound_hi, r.mean_jz, r.k, r.q
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Lattice sensing pipeline: evolve f ⊗ |β⟩, project onto |β⟩, record F_q, bounds and witness.
pub fn lattice_sensing_report(
    model_name: &str,
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    ancilla: &CVec,
    periods: &[u64],
) -> Result<SensingReport> {
    let psi0 = LatticeState::product(f, ancilla)?;
    let qubit = spectrum.dim == 2;
    let bound = if qubit {
        Some(qfi_bound(spectrum, f)?)
    } else {
        None
    };
    let q = if qubit {
        Some(q_functional(spectrum, f)?)
    } else {
        None
    };
    let asymptotic = asymptotic_coefficient(spectrum, f, ancilla)?.coefficient();
    let rows = periods
        .iter()
        .map(|&k| -> Result<SensingRow> {
            let psi = evolve_lattice(spectrum, &psi0, k)?;
            let pes = project_pes(&psi, ancilla)?;
            let st = pes.number_state()?;
            let m = st.number_moments();
            let t = k as f64 * spectrum.t_com;
            let (lo, hi) =
                bound.map_or((f64::NAN, f64::NAN), |b| (b.lower * t * t, b.upper * t * t));
            Ok(SensingRow {
                periods: k,
                qfi: 4.0 * m.var_jz(),
                bound_lo: lo,
                bound_hi: hi,
                mean_jz: m.mean_jz(),
                k: m.covariance_k(),
                q: q.unwrap_or(f64::NAN),
                success_probability: pes.probability,
                edge_mass: crate::lattice::edge_mass(&st),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensingReport {
        model: model_name.to_string(),
        input: format!("{:?}", f.kind),
        t_com: spectrum.t_com,
        p2: bound.map(|b| b.p2),
        q,
        asymptotic: Some(asymptotic),
        rows,
    })
}

/// Result of an ancilla-phase scan.
#[derive(Clone, Debug, Serialize)]
pub struct AncillaOptimization {
    pub best_phases: Vec<f64>,
    pub best_qfi: f64,
    /// (phases, F_q) for every scanned point.
    pub landscape: Vec<(Vec<f64>, f64)>,
    /// True when the landscape is constant (e.g. flat bands).
    pub flat: bool,
    pub periods: u64,
    pub t_com: f64,
}

impl AncillaOptimization {
    pub fn min_qfi(&self) -> f64 {
        self.landscape
            .iter()
            .map(|x| x.1)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.best_phases.len();
        let head: Vec<String> = (1..=d).map(|k| format!("beta{k}")).collect();
        writeln!(w, "{},qfi,qfi_over_t2", head.join(","))?;
        let t2 = (self.periods as f64 * self.t_com).powi(2);
        for (b, q) in &self.landscape {
            let cols: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{},{}", cols.join(","), q, q / t2)?;
        }
        Ok(())
    }
}

/// Grid scan of F_q over `n_free` phases in [0, 2π), followed by optional coordinate-descent
/// refinement around the best grid point.
#[allow(clippy::type_complexity)]
fn scan_phases(
    n_free: usize,
    config: &OptimizerConfig,
    evaluate: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
) -> Result<(Vec<f64>, f64, Vec<(Vec<f64>, f64)>, bool)> {
    let n = config.points.max(1);
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let total = n.pow(n_free as u32);
    let landscape: Vec<(Vec<f64>, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut r = idx;
            let beta: Vec<f64> = (0..n_free)
                .map(|_| {
                    let b = (r % n) as f64 * step;
                    r /= n;
                    b
                })
                .collect();
            evaluate(&beta).map(|q| (beta, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut best_phases, mut best_qfi) = landscape
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(b, q)| (b.clone(), *q))
        .unwrap_or((vec![], 0.0));
    let min = landscape.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let flat = (best_qfi - min).abs() <= 1e-9 * best_qfi.abs().max(1.0);
    if !flat {
        let mut h = step / 2.0;
        for _ in 0..config.refine_sweeps {
            for axis in 0..n_free {
                for dir in [-1.0, 1.0] {
                    let mut trial = best_phases.clone();
                    trial[axis] += dir * h;
                    let q = evaluate(&trial)?;
                    if q > best_qfi {
                        best_qfi = q;
                        best_phases = trial;
                    }
                }
            }
            h /= 2.0;
        }
    }
    Ok((best_phases, best_qfi, landscape, flat))
}

/// Scan configuration for [`optimize_ancilla_phases`].
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    /// Points per phase axis.
    pub points: usize,
    /// Coordinate-descent refinement sweeps after the grid scan (0 disables).
    pub refine_sweeps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            points: 32,
            refine_sweeps: 0,
        }
    }
}

/// Maximise F_q[PES_T, Ĵz] over the free phases of |β,+⟩_f by exhaustive grid scan.
///
/// The evolved lattice state is linear in the ancilla, so the d² projected fields
/// ⟨l|U_φ(T)|k⟩ f(φ) in the P̂_j[f] eigenbasis are computed once and recombined per β.
/// With vanishing functional power the computational basis is used and the landscape is
/// reported as flat when it is constant.
pub fn optimize_ancilla_phases(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    drive: usize,
    periods: u64,
    config: &OptimizerConfig,
) -> Result<AncillaOptimization> {
    let d = spectrum.dim;
    let power = match functional_power(spectrum, f, drive) {
        Ok(p) => Some(p),
        Err(Error::ZeroFunctionalPower { .. }) => None,
        Err(e) => return Err(e),
    };
    let basis: CMat = power
        .as_ref()
        .map_or_else(|| CMat::identity(d, d), |p| p.eigenvectors.clone());
    let n_free = power
        .as_ref()
        .map_or(d - 1, FunctionalPowerOperator::free_phases);
    let coeffs = |beta: &[f64]| -> Result<CVec> {
        match &power {
            Some(p) => {
                let psi = ancilla_state(p, beta, false)?;
                Ok(basis.adjoint() * psi)
            }
            None => {
                let mut c = CVec::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0));
                for (k, b) in beta.iter().enumerate() {
                    c[k + 1] *= C64::from_polar(1.0, *b);
                }
                Ok(c)
            }
        }
    };
    // g[l][k](φ) = ⟨b_l|U_φ(T)|b_k⟩ f(φ) √(cell area)
    let w = C64::new(f.grid.cell_area().sqrt(), 0.0);
    let kk = periods as f64;
    let mut g = vec![vec![ZERO; f.grid.len()]; d * d];
    for p in 0..f.grid.len() {
        if f.weight(p) == 0.0 {
            continue;
        }
        let u = basis.adjoint() * spectrum.stroboscopic_propagator(p, kk) * &basis;
        for l in 0..d {
            for k in 0..d {
                g[l * d + k][p] = u[(l, k)] * f.amplitudes[p] * w;
            }
        }
    }
    let evaluate = |beta: &[f64]| -> Result<f64> {
        let c = coeffs(beta)?;
        let mut field = vec![ZERO; f.grid.len()];
        for l in 0..d {
            for k in 0..d {
                let a = c[l].conj() * c[k];
                if a.norm() == 0.0 {
                    continue;
                }
                for (x, y) in field.iter_mut().zip(&g[l * d + k]) {
                    *x += a * y;
                }
            }
        }
        let prob: f64 = field.iter().map(|z| z.norm_sqr()).sum();
        if prob < 1e-12 {
            return Ok(0.0);
        }
        let st = drive_field_to_number(&f.grid, &field, f.occupancy)?;
        Ok(4.0 * st.number_moments().var_jz())
    };
    let (best_phases, best_qfi, landscape, flat) = scan_phases(n_free, config, &evaluate)?;
    Ok(AncillaOptimization {
        best_phases,
        best_qfi,
        landscape,
        flat,
        periods,
        t_com: spectrum.t_com,
    })
}

/// Full Fock-model counterpart of [`optimize_ancilla_phases`]: the ancilla family |β,+⟩_f is
/// taken from the lattice functional power operator, the drives start in `drives`.
///
/// One Krylov propagation per P̂_j[f] eigenvector suffices; every β is a recombination.
pub fn optimize_ancilla_phases_fock(
    qm: &QuantizedModel,
    power: &FunctionalPowerOperator,
    drives: &TwoModeState,
    periods: u64,
    opts: &KrylovOptions,
    config: &OptimizerConfig,
) -> Result<AncillaOptimization> {
    let d = qm.dim;
    if power.matrix.nrows() != d {
        return Err(Error::InvalidArgument(
            "power operator and quantized model differ in qudit dimension".into(),
        ));
    }
    let duration = periods as f64 * qm.t_com;
    let evolved: Vec<FockState> = (0..d)
        .into_par_iter()
        .map(|k| {
            let start = FockState::product(&power.eigenvectors.column(k).clone_owned(), drives)?;
            evolve_fock(qm, &start, duration, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluate = |beta: &[f64]| -> Result<f64> {
        let anc = ancilla_state(power, beta, false)?;
        let c = power.eigenvectors.adjoint() * &anc;
        let mut state = evolved[0].clone();
        state.amps.iter_mut().for_each(|z| *z = ZERO);
        for (ck, psi) in c.iter().zip(&evolved) {
            state
                .amps
                .iter_mut()
                .zip(&psi.amps)
                .for_each(|(z, a)| *z += ck * a);
        }
        match pes_fock(&state, &anc) {
            Ok(pes) => Ok(4.0 * pes.state.number_moments().var_jz()),
            Err(Error::ProjectionAnnihilated { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    let (best_phases, best_qfi, landscape, flat) =
        scan_phases(power.free_phases(), config, &evaluate)?;
    Ok(AncillaOptimization {
        best_phases,
        best_qfi,
        landscape,
        flat,
        periods,
        t_com: qm.t_com,
    })
}
