//! Mach–Zehnder parity readout: ⟨Π̂_θ̃⟩ = ⟨e^{2iĴzθ̃}Ŝ⟩ curves, the classical Fisher information
//! F_θ̃ = |∂⟨Π̂⟩|²/(1 − ⟨Π̂⟩²), power-law sensitivity fits, and the characteristic-function
//! critical-point classifier.

use crate::error::{Error, Result};
use crate::fit::{power_law, LineFit};
use crate::floquet::FloquetSpectrum;
use crate::lattice::{evolve_lattice, project_pes, FieldDistribution, LatticeState};
use crate::linalg::{I, ZERO};
use crate::opspace::{swap_kernel, TwoModeState};
use crate::{CMat, CVec, C64};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Samples with |⟨Π̂⟩| above this are flagged: the Fisher-information denominator is singular.
pub const PARITY_FLAG: f64 = 1.0 - 1e-8;

/// Default θ̃ grid: `n` points on [0, 2π).
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Parity signal, its exact derivative and the resulting Fisher information on a θ̃ grid.
#[derive(Clone, Debug)]
pub struct ParityCurve {
    pub theta: Vec<f64>,
    /// ⟨Π̂_θ̃⟩ (the imaginary part is a diagnostic and should vanish).
    pub parity: Vec<C64>,
    /// ∂_θ̃⟨Π̂_θ̃⟩ (real part).
    pub dparity: Vec<f64>,
    pub fisher: Vec<f64>,
    pub delta_theta: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl ParityCurve {
    fn from_kernel(kernel: &[(i64, C64)], thetas: &[f64]) -> Self {
        let rows: Vec<(C64, C64)> = thetas
            .par_iter()
            .map(|&t| {
                let (mut v, mut d) = (ZERO, ZERO);
                for &(k, w) in kernel {
                    let ph = C64::from_polar(1.0, t * k as f64);
                    v += w * ph;
                    d += w * ph * I * k as f64;
                }
                (v, d)
            })
            .collect();
        let mut c = ParityCurve {
            theta: thetas.to_vec(),
            parity: Vec::with_capacity(rows.len()),
            dparity: Vec::with_capacity(rows.len()),
            fisher: Vec::with_capacity(rows.len()),
            delta_theta: Vec::with_capacity(rows.len()),
            flagged: Vec::with_capacity(rows.len()),
        };
        for (v, d) in rows {
            let flag = v.norm() > PARITY_FLAG;
            let fi = if flag {
                f64::NAN
            } else {
                d.re * d.re / (1.0 - v.re * v.re)
            };
            c.parity.push(v);
            c.dparity.push(d.re);
            c.fisher.push(fi);
            c.delta_theta
                .push(if flag { f64::NAN } else { 1.0 / fi.sqrt() });
            c.flagged.push(flag);
        }
        c
    }

    /// Smallest Δθ̃ over unflagged samples and the θ̃ where it occurs.
    pub fn best(&self) -> Option<(f64, f64)> {
        (0..self.theta.len())
            .filter(|&k| !self.flagged[k] && self.delta_theta[k].is_finite())
            .min_by(|&a, &b| self.delta_theta[a].total_cmp(&self.delta_theta[b]))
            .map(|k| (self.theta[k], self.delta_theta[k]))
    }

    /// Fisher information averaged over the unflagged θ̃ samples (uniform prior on θ̃).
    pub fn mean_fisher(&self) -> f64 {
        let v: Vec<f64> = self
            .fisher
            .iter()
            .zip(&self.flagged)
            .filter(|(_, f)| !**f)
            .map(|(x, _)| *x)
            .collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn max_imaginary(&self) -> f64 {
        self.parity.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "theta_tilde,parity_re,parity_im,dparity,fisher,delta_theta,flag"
        )?;
        for k in 0..self.theta.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.theta[k],
                self.parity[k].re,
                self.parity[k].im,
                self.dparity[k],
                self.fisher[k],
                self.delta_theta[k],
                u8::from(self.flagged[k])
            )?;
        }
        Ok(())
    }
}

/// Parity curve of a normalised pure two-mode state.
pub fn parity_curve(state: &TwoModeState, thetas: &[f64]) -> Result<ParityCurve> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "state is not normalised (norm² = {norm:.12})"
        )));
    }
    Ok(ParityCurve::from_kernel(&swap_kernel(state)?, thetas))
}

/// Parity curve of a density matrix on the Fock window 0..=n_max (index n₁(n_max+1)+n₂):
/// ⟨Π̂_θ̃⟩ = Σ e^{iθ̃(n₂−n₁)} ρ[(n₁,n₂),(n₂,n₁)].
pub fn parity_curve_density(rho: &CMat, n_max: usize, thetas: &[f64]) -> Result<ParityCurve> {
    let s = n_max + 1;
    if rho.nrows() != s * s || rho.ncols() != s * s {
        return Err(Error::InvalidArgument(
            "density matrix does not match the Fock window".into(),
        ));
    }
    let mut w = vec![ZERO; 2 * s - 1];
    for n1 in 0..s {
        for n2 in 0..s {
            w[n2 + s - 1 - n1] += rho[(n1 * s + n2, n2 * s + n1)];
        }
    }
    let kernel: Vec<(i64, C64)> = w
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != ZERO)
        .map(|(k, v)| (k as i64 - (s as i64 - 1), v))
        .collect();
    Ok(ParityCurve::from_kernel(&kernel, thetas))
}

/// Parity curves of the lattice PES at several stroboscopic times.
pub fn lattice_parity_series(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    ancilla: &CVec,
    periods: &[u64],
    thetas: &[f64],
) -> Result<Vec<ParityCurve>> {
    let psi0 = LatticeState::product(f, ancilla)?;
    periods
        .iter()
        .map(|&k| {
            let pes = project_pes(&evolve_lattice(spectrum, &psi0, k)?, ancilla)?;
            parity_curve(&pes.number_state()?, thetas)
        })
        .collect()
}

/// How a single Δθ̃ value is extracted from each curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ThetaSelection {
    /// The sample closest to this θ̃.
    Fixed(f64),
    /// Minimum Δθ̃ over the grid.
    Best,
    /// Δθ̃ = 1/√F̄ with F̄ the θ̃-averaged Fisher information.
    Average,
}

/// Fitted Δθ̃ ∼ T^x.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub fit: LineFit,
    pub times: Vec<f64>,
    pub delta_theta: Vec<f64>,
    /// Times dropped because the selected sample was flagged or carried no information.
    pub excluded: Vec<f64>,
}

pub fn sensitivity_scaling(
    times: &[f64],
    curves: &[ParityCurve],
    selection: ThetaSelection,
) -> Result<ScalingFit> {
    if times.len() != curves.len() {
        return Err(Error::InvalidArgument(
            "one parity curve per time is required".into(),
        ));
    }
    let (mut ts, mut ds, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, c) in times.iter().zip(curves) {
        let d = match selection {
            ThetaSelection::Fixed(theta) => {
                let k = (0..c.theta.len()).min_by(|&a, &b| {
                    angle_distance(c.theta[a], theta).total_cmp(&angle_distance(c.theta[b], theta))
                });
                k.filter(|&k| !c.flagged[k]).map(|k| c.delta_theta[k])
            }
            ThetaSelection::Best => c.best().map(|b| b.1),
            ThetaSelection::Average => Some(1.0 / c.mean_fisher().sqrt()),
        };
        match d {
            Some(v) if v.is_finite() && v > 0.0 => {
                ts.push(t);
                ds.push(v);
            }
            _ => excluded.push(t),
        }
    }
    if ts.len() < 2 {
        return Err(Error::InvalidArgument(
            "fewer than two usable parity samples".into(),
        ));
    }
    let fit = power_law(&ts, &ds)?;
    Ok(ScalingFit {
        exponent: fit.slope,
        fit,
        times: ts,
        delta_theta: ds,
        excluded,
    })
}

fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

// ---------------------------------------------------------------------------
// Characteristic functions 𝒢_nm(x̃, θ̃) = ε_n(x̃) − ε_m(−x̃ + √2θ̃/ω)
// ---------------------------------------------------------------------------

/// Sensitivity class predicted from the critical points of 𝒢_nm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Verdict {
    /// ω₁ ≠ ω₂: parity readout cannot reach the SQL or the HL.
    NoSubSql,
    /// No sensitive critical point: Δθ̃ does not improve with T.
    Insensitive,
    /// Only non-degenerate sensitive critical points: Δθ̃ ∼ T^{−1/2}.
    NonDegenerate,
    /// A degenerate critical point with ∂_θ̃𝒢 ≠ 0: Δθ̃ ∼ T^{−1}.
    DegenerateSensitive,
}

impl Verdict {
    /// Whether a fitted exponent is consistent with the class.
    pub fn consistent_with(&self, exponent: f64) -> bool {
        match self {
            Verdict::DegenerateSensitive => exponent <= -0.8,
            Verdict::NonDegenerate => (-0.65..=-0.35).contains(&exponent),
            Verdict::Insensitive => exponent.abs() < 0.25,
            Verdict::NoSubSql => exponent > -0.35,
        }
    }
}

/// Tolerances in x̃ units (x̃ = Δφ/(√2ω)); both are exposed because only the conditions are fixed.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifierConfig {
    /// |∂²_x̃𝒢| below `degeneracy · ω_com² / (2π)²` counts as degenerate.
    pub degeneracy: f64,
    /// |∂_θ̃𝒢| above `sensitivity · ω_com` counts as sensitive.
    pub sensitivity: f64,
    /// |∂_x̃𝒢| below this fraction of max|∂_x̃ε| counts as zero (flat 𝒢 / continuum of roots).
    pub flatness: f64,
    /// Support threshold relative to the largest Δφ-marginal weight of f.
    pub support: f64,
    /// Observation horizon in units of T_com. When set, a critical point also counts as
    /// degenerate if the nonlinear phase of 𝒢 across the input, max |𝒢(x̃) − 𝒢(x̃₀)|·T over
    /// |Δφ − Δφ₀| ≤ σ, stays below one radian up to the horizon (σ: RMS width of the Δφ
    /// marginal of |f|²). Until then the stationary-phase window is wider than the input and
    /// the readout scales as for an exactly degenerate point.
    pub horizon: Option<f64>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            degeneracy: 1e-3,
            sensitivity: 1e-6,
            flatness: 1e-3,
            support: 1e-2,
            horizon: None,
        }
    }
}

/// A critical point x̃₀ of 𝒢_nm(·, θ̃).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalPoint {
    /// Δφ = φ₁ − φ₂ at the critical point.
    pub delta_phi: f64,
    pub x_tilde: f64,
    pub second_derivative: f64,
    pub theta_derivative: f64,
    pub degenerate: bool,
    pub sensitive: bool,
}

/// Classification of one band pair at one θ̃.
#[derive(Clone, Debug, Serialize)]
pub struct PairVerdict {
    pub n: usize,
    pub m: usize,
    /// 𝒢 is flat (∂_x̃𝒢 ≈ 0) over the whole overlapping support.
    pub flat: bool,
    pub critical_points: Vec<CriticalPoint>,
    pub verdict: Verdict,
}

/// One-dimensional band profile along Δφ and the classification at θ̃.
#[derive(Clone, Debug, Serialize)]
pub struct CharacteristicProfile {
    pub omega: f64,
    pub theta: f64,
    /// Δφ samples (grid line φ₂ = 0).
    pub delta_phi: Vec<f64>,
    /// dε_n/dΔφ per sample, band-major.
    pub slopes: Vec<Vec<f64>>,
    pub pairs: Vec<PairVerdict>,
    pub verdict: Verdict,
    pub note: String,
}

struct BandLine {
    m: usize,
    h: f64,
    omega: f64,
    /// slopes[n][i] = dε_n/dΔφ at Δφ = i·h.
    slopes: Vec<Vec<f64>>,
    curvature: Vec<Vec<f64>>,
    support: Vec<bool>,
    /// RMS width of the Δφ marginal (circular).
    spread: f64,
    scale: f64,
}

impl BandLine {
    fn new(spectrum: &FloquetSpectrum, f: &FieldDistribution, support_rel: f64) -> Result<Self> {
        let g = spectrum.grid;
        let m = g.m;
        let h = g.spacing();
        let d = spectrum.dim;
        let slopes: Vec<Vec<f64>> = (0..d)
            .map(|n| {
                (0..m)
                    .map(|i| spectrum.derivative(g.index(i as isize, 0), n, 1))
                    .collect()
            })
            .collect();
        let curvature = slopes
            .iter()
            .map(|s| {
                (0..m)
                    .map(|i| (s[(i + 1) % m] - s[(i + m - 1) % m]) / (2.0 * h))
                    .collect()
            })
            .collect();
        // Δφ marginal of |f|².
        let mut w = vec![0.0; m];
        for p in 0..g.len() {
            let (i1, i2) = g.coords(p);
            w[(i1 + m - i2) % m] += f.weight(p);
        }
        let wmax = w.iter().copied().fold(0.0, f64::max);
        let support = w.iter().map(|&x| x > support_rel * wmax).collect();
        let scale = slopes.iter().flatten().fold(0.0_f64, |a, b| a.max(b.abs()));
        let total: f64 = w.iter().sum();
        let centre = w
            .iter()
            .enumerate()
            .fold(C64::new(0.0, 0.0), |acc, (i, &x)| {
                acc + C64::from_polar(x, i as f64 * h)
            })
            .arg();
        let spread = (w
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let d = (i as f64 * h - centre + PI).rem_euclid(2.0 * PI) - PI;
                x * d * d
            })
            .sum::<f64>()
            / total.max(1e-300))
        .sqrt();
        Ok(Self {
            m,
            h,
            omega: spectrum.omega1,
            slopes,
            curvature,
            support,
            spread,
            scale,
        })
    }

    /// Pair (n, m) at 2θ̃ = k·h, in Δφ units: returns (flat, critical points).
    fn pair(
        &self,
        n: usize,
        mm: usize,
        k: usize,
        cfg: &ClassifierConfig,
        omega_com: f64,
    ) -> PairVerdict {
        let m = self.m;
        let partner = |i: usize| (k + m - i % m) % m;
        let g1 = |i: usize| self.slopes[n][i % m] + self.slopes[mm][partner(i)];
        let g2 = |i: usize| self.curvature[n][i % m] - self.curvature[mm][partner(i)];
        let gt = |i: usize| -2.0 * self.slopes[mm][partner(i)];
        let valid: Vec<usize> = (0..m)
            .filter(|&i| self.support[i] && self.support[partner(i)])
            .collect();
        // Unit conversions from x̃ to Δφ: ∂_x̃ = √2ω ∂_Δφ.
        let w2 = 2.0 * self.omega * self.omega;
        let deg_tol = cfg.degeneracy * omega_com * omega_com / (4.0 * PI * PI) / w2;
        let sens_tol = cfg.sensitivity * omega_com;
        let zero_tol = cfg.flatness * self.scale.max(1e-300);
        let t_com = 2.0 * PI / omega_com;
        // Largest |𝒢(x) − 𝒢(x₀)| within σ of a critical point at fractional index x0 (trapezoid
        // integral of ∂𝒢, which vanishes at x0).
        let excursion = |x0: f64| -> f64 {
            let reach = (self.spread / self.h).ceil() as i64;
            let base = x0.floor() as i64;
            let mut worst = 0.0_f64;
            for dir in [-1_i64, 1] {
                let (mut acc, mut prev, mut pos) = (0.0, 0.0, x0);
                for step in 1..=reach {
                    let idx = if dir == 1 {
                        base + step
                    } else {
                        base + 1 - step
                    };
                    let gi = g1(idx.rem_euclid(m as i64) as usize);
                    acc += 0.5 * (prev + gi) * (idx as f64 - pos).abs() * self.h;
                    prev = gi;
                    pos = idx as f64;
                    worst = worst.max(acc.abs());
                }
            }
            worst
        };
        let within_horizon = |x0: f64| {
            cfg.horizon
                .is_some_and(|th| excursion(x0) * th * t_com < 1.0)
        };
        // A continuum needs more than the isolated self-partner cells at the rim of the overlap.
        let flat = valid.len() >= 3 && valid.iter().all(|&i| g1(i).abs() < zero_tol);
        let mut cps = Vec::new();
        let mut push = |x0: f64, second: f64, theta_d: f64| {
            let dphi = x0 * self.h;
            cps.push(CriticalPoint {
                delta_phi: dphi,
                x_tilde: dphi / (2.0_f64.sqrt() * self.omega),
                second_derivative: second * w2,
                theta_derivative: theta_d,
                degenerate: second.abs() < deg_tol || within_horizon(x0),
                sensitive: theta_d.abs() > sens_tol,
            })
        };
        for &i in &valid {
            let a = g1(i);
            if a.abs() < zero_tol {
                push(i as f64, g2(i), gt(i));
                continue;
            }
            let j = (i + 1) % m;
            if !(self.support[j] && self.support[partner(j)]) {
                continue;
            }
            let b = g1(j);
            if b.abs() >= zero_tol && a.signum() != b.signum() {
                // Linear polish between the bracketing samples.
                let s = a / (a - b);
                let lerp = |fa: f64, fb: f64| fa + s * (fb - fa);
                push(i as f64 + s, lerp(g2(i), g2(j)), lerp(gt(i), gt(j)));
            }
        }
        let verdict = if flat {
            if cps.iter().any(|c| c.sensitive) {
                Verdict::DegenerateSensitive
            } else {
                Verdict::Insensitive
            }
        } else if cps.iter().any(|c| c.degenerate && c.sensitive) {
            Verdict::DegenerateSensitive
        } else if cps.iter().any(|c| c.sensitive) {
            Verdict::NonDegenerate
        } else {
            Verdict::Insensitive
        };
        PairVerdict {
            n,
            m: mm,
            flat,
            critical_points: cps,
            verdict,
        }
    }
}

fn require_resolved(spectrum: &FloquetSpectrum) -> Result<()> {
    let bad = spectrum.unresolved_points();
    if !bad.is_empty() {
        let worst = bad
            .iter()
            .map(|&p| spectrum.resolved_quality[p])
            .fold(f64::INFINITY, f64::min);
        return Err(Error::TrackingAmbiguity {
            count: bad.len(),
            worst,
        });
    }
    Ok(())
}

fn no_sub_sql(spectrum: &FloquetSpectrum, theta: f64) -> CharacteristicProfile {
    CharacteristicProfile {
        omega: spectrum.omega1,
        theta,
        delta_phi: vec![],
        slopes: vec![],
        pairs: vec![],
        verdict: Verdict::NoSubSql,
        note: format!(
            "ω₁ = {} ≠ ω₂ = {}: number conservation and energy conservation of the power operators are incompatible",
            spectrum.omega1, spectrum.omega2
        ),
    }
}

/// Classify all band pairs at θ̃. θ̃ is rounded to the nearest multiple of half the grid spacing
/// so that partner points −x̃ + √2θ̃/ω fall on the grid.
pub fn classify_critical_points(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    theta: f64,
    cfg: &ClassifierConfig,
) -> Result<CharacteristicProfile> {
    if (spectrum.omega1 - spectrum.omega2).abs() > 1e-12 * spectrum.omega1.abs() {
        return Ok(no_sub_sql(spectrum, theta));
    }
    require_resolved(spectrum)?;
    if spectrum.grid != f.grid {
        return Err(Error::InvalidArgument(
            "spectrum and field distribution use different grids".into(),
        ));
    }
    let line = BandLine::new(spectrum, f, cfg.support)?;
    let k = ((2.0 * theta / line.h).round() as i64).rem_euclid(line.m as i64) as usize;
    Ok(profile_at(&line, spectrum, k, cfg))
}

fn profile_at(
    line: &BandLine,
    spectrum: &FloquetSpectrum,
    k: usize,
    cfg: &ClassifierConfig,
) -> CharacteristicProfile {
    let d = line.slopes.len();
    let pairs: Vec<PairVerdict> = (0..d * d)
        .into_par_iter()
        .map(|q| line.pair(q / d, q % d, k, cfg, spectrum.omega_com))
        .collect();
    let verdict = pairs
        .iter()
        .map(|p| p.verdict)
        .max()
        .unwrap_or(Verdict::Insensitive);
    let n_support = line.support.iter().filter(|&&s| s).count();
    CharacteristicProfile {
        omega: line.omega,
        theta: 0.5 * k as f64 * line.h,
        delta_phi: (0..line.m).map(|i| i as f64 * line.h).collect(),
        slopes: line.slopes.clone(),
        pairs,
        verdict,
        note: if n_support <= 3 {
            "support is a few grid cells around the coherent centre".into()
        } else {
            format!("support covers {n_support} of {} Δφ samples", line.m)
        },
    }
}

/// Best verdict over θ̃ ∈ [0, π) for a field distribution (θ̃ and θ̃ + π share the same
/// characteristic functions).
pub fn classify_input(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    cfg: &ClassifierConfig,
) -> Result<CharacteristicProfile> {
    if (spectrum.omega1 - spectrum.omega2).abs() > 1e-12 * spectrum.omega1.abs() {
        return Ok(no_sub_sql(spectrum, 0.0));
    }
    require_resolved(spectrum)?;
    let line = BandLine::new(spectrum, f, cfg.support)?;
    let best = (0..line.m)
        .into_par_iter()
        .map(|k| profile_at(&line, spectrum, k, cfg))
        .max_by(|a, b| a.verdict.cmp(&b.verdict).then(b.theta.total_cmp(&a.theta)))
        .expect("grid is non-empty");
    Ok(best)
}

/// Verdict at every θ̃ = k·h/2 ∈ [0, π) of the grid.
pub fn verdict_scan(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    cfg: &ClassifierConfig,
) -> Result<Vec<(f64, Verdict)>> {
    if (spectrum.omega1 - spectrum.omega2).abs() > 1e-12 * spectrum.omega1.abs() {
        return Ok(vec![(0.0, Verdict::NoSubSql)]);
    }
    require_resolved(spectrum)?;
    let line = BandLine::new(spectrum, f, cfg.support)?;
    Ok((0..line.m)
        .into_par_iter()
        .map(|k| {
            let p = profile_at(&line, spectrum, k, cfg);
            (p.theta, p.verdict)
        })
        .collect())
}

/// The verdict predicted for a readout that averages the Fisher information over θ̃.
///
/// θ̃ values with a vanishing signal contribute nothing to the average, so the most common
/// class among the sensitive θ̃ decides; only when no θ̃ is sensitive does the overall
/// majority apply. Ties go to the stronger class.
pub fn typical_verdict(scan: &[(f64, Verdict)]) -> Option<Verdict> {
    let majority = |classes: &[Verdict]| {
        classes
            .iter()
            .map(|&v| (scan.iter().filter(|x| x.1 == v).count(), v))
            .filter(|(c, _)| *c > 0)
            .max()
            .map(|(_, v)| v)
    };
    majority(&[Verdict::NonDegenerate, Verdict::DegenerateSensitive])
        .or_else(|| majority(&[Verdict::NoSubSql, Verdict::Insensitive]))
}
