//! Classical two-tone Floquet engine.
//!
//! `H(t) = H₀ + H₁ₒ sin(ω₁t+φ₁) + H₁ₑ cos(ω₁t+φ₁) + H₂ₒ sin(ω₂t+φ₂) + H₂ₑ cos(ω₂t+φ₂)`
//! with commensurate ω₁/ω₂ = p/q. The common period is T_com = 2πp/ω₁ = 2πq/ω₂.
//!
//! Propagators are time-ordered products of exact exponentials of the step-averaged Hamiltonian.
//! Quasienergies are eigenphases of U(T_com), ε = −arg λ / T_com, folded into
//! [−ω_com/2, ω_com/2). Derivatives ∂_{φ_j}ε_n use central differences with step equal to
//! the grid spacing along locally matched (eigenvector-overlap) and unfolded bands.
//!
//! For equal frequencies a common phase shift is a time shift, so
//! `U_{φ+s}(T_com) = U_φ(s/ω) U_φ(T_com) U_φ(s/ω)†`; the spectrum on the full grid is then
//! built from one line of propagations and band data depend only on φ₁ − φ₂.
//! The Floquet gauge is fixed by the start time t₀ = 0.

pub mod models;

pub use models::{gallery, model_library, ModelInfo, ModelParams};

use crate::error::{Error, Result};
use crate::linalg;
use crate::opspace::PhaseGrid;
use crate::{CMat, CVec, C64};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Default number of midpoint steps per common period.
pub const DEFAULT_STEPS_PER_TCOM: usize = 2000;
/// Minimum accepted number of steps per common period.
pub const MIN_STEPS_PER_TCOM: usize = 100;

/// Driven-qudit Hamiltonian decomposed into static and drive parts.
#[derive(Clone, Debug)]
pub struct TwoToneModel {
    pub name: String,
    pub h0: CMat,
    pub h1_odd: CMat,
    pub h1_even: CMat,
    pub h2_odd: CMat,
    pub h2_even: CMat,
    pub omega1: f64,
    pub omega2: f64,
    /// Reduced integers (p, q) with ω₁/ω₂ = p/q.
    pub commensurability: (u64, u64),
}

impl TwoToneModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        h0: CMat,
        h1_odd: CMat,
        h1_even: CMat,
        h2_odd: CMat,
        h2_even: CMat,
        omega1: f64,
        omega2: f64,
    ) -> Result<Self> {
        let d = h0.nrows();
        for (label, m) in [
            ("h0", &h0),
            ("h1_odd", &h1_odd),
            ("h1_even", &h1_even),
            ("h2_odd", &h2_odd),
            ("h2_even", &h2_even),
        ] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidArgument(format!(
                    "{label} has shape {}×{}, expected {d}×{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let r = linalg::hermiticity_residual(m);
            if r >= 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "{label} is not Hermitian (residual {r:.3e})"
                )));
            }
        }
        if d < 2 {
            return Err(Error::InvalidArgument("qudit dimension must be ≥ 2".into()));
        }
        if !(omega1 > 0.0 && omega2 > 0.0 && omega1.is_finite() && omega2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "drive frequencies must be positive, got {omega1}, {omega2}"
            )));
        }
        let commensurability = commensurate(omega1, omega2)?;
        Ok(Self {
            name: name.into(),
            h0,
            h1_odd,
            h1_even,
            h2_odd,
            h2_even,
            omega1,
            omega2,
            commensurability,
        })
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn omega_com(&self) -> f64 {
        self.omega1 / self.commensurability.0 as f64
    }

    pub fn t_com(&self) -> f64 {
        2.0 * PI / self.omega_com()
    }

    pub fn omega(&self, j: usize) -> f64 {
        if j == 1 {
            self.omega1
        } else {
            self.omega2
        }
    }

    /// True when ω₁ = ω₂ (after reduction p = q = 1).
    pub fn equal_frequencies(&self) -> bool {
        self.commensurability == (1, 1)
    }

    /// H(t) at drive phases (φ₁, φ₂).
    pub fn hamiltonian(&self, t: f64, phases: (f64, f64)) -> CMat {
        let (s1, c1) = (self.omega1 * t + phases.0).sin_cos();
        let (s2, c2) = (self.omega2 * t + phases.1).sin_cos();
        let mut h = self.h0.clone();
        h += &self.h1_odd * C64::new(s1, 0.0);
        h += &self.h1_even * C64::new(c1, 0.0);
        h += &self.h2_odd * C64::new(s2, 0.0);
        h += &self.h2_even * C64::new(c2, 0.0);
        h
    }

    /// Drive part H_j(ω_j t + φ_j).
    pub fn drive_hamiltonian(&self, j: usize, t: f64, phases: (f64, f64)) -> CMat {
        let (odd, even, w, phi) = self.drive_parts(j, phases);
        let (s, c) = (w * t + phi).sin_cos();
        odd * C64::new(s, 0.0) + even * C64::new(c, 0.0)
    }

    /// Explicit time derivative dH_j/dt = ω_j [H_jₒ cos − H_jₑ sin].
    pub fn drive_rate(&self, j: usize, t: f64, phases: (f64, f64)) -> CMat {
        let (odd, even, w, phi) = self.drive_parts(j, phases);
        let (s, c) = (w * t + phi).sin_cos();
        (odd * C64::new(c, 0.0) - even * C64::new(s, 0.0)) * C64::new(w, 0.0)
    }

    fn drive_parts(&self, j: usize, phases: (f64, f64)) -> (&CMat, &CMat, f64, f64) {
        if j == 1 {
            (&self.h1_odd, &self.h1_even, self.omega1, phases.0)
        } else {
            (&self.h2_odd, &self.h2_even, self.omega2, phases.1)
        }
    }

    /// Same operators with new drive frequencies.
    pub fn with_frequencies(&self, omega1: f64, omega2: f64) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.h0.clone(),
            self.h1_odd.clone(),
            self.h1_even.clone(),
            self.h2_odd.clone(),
            self.h2_even.clone(),
            omega1,
            omega2,
        )
    }

    /// Same model with all drive operators scaled by `factor`.
    pub fn scaled_drives(&self, factor: f64) -> Self {
        let f = C64::new(factor, 0.0);
        Self {
            h1_odd: &self.h1_odd * f,
            h1_even: &self.h1_even * f,
            h2_odd: &self.h2_odd * f,
            h2_even: &self.h2_even * f,
            ..self.clone()
        }
    }

    /// Exact average of H(t) over [t₀, t₀ + dt]: the midpoint sample with each harmonic
    /// weighted by sinc(ω_j dt/2).
    pub fn interval_average(&self, t0: f64, dt: f64, phases: (f64, f64)) -> CMat {
        let tm = t0 + 0.5 * dt;
        let sinc = |x: f64| {
            if x.abs() < 1e-8 {
                1.0 - x * x / 6.0
            } else {
                x.sin() / x
            }
        };
        let w1 = sinc(0.5 * self.omega1 * dt);
        let w2 = sinc(0.5 * self.omega2 * dt);
        let (s1, c1) = (self.omega1 * tm + phases.0).sin_cos();
        let (s2, c2) = (self.omega2 * tm + phases.1).sin_cos();
        let mut h = self.h0.clone();
        h += &self.h1_odd * C64::new(w1 * s1, 0.0);
        h += &self.h1_even * C64::new(w1 * c1, 0.0);
        h += &self.h2_odd * C64::new(w2 * s2, 0.0);
        h += &self.h2_even * C64::new(w2 * c2, 0.0);
        h
    }

    /// Single step exp(−i H̄ dt) with H̄ the interval average. Second order in dt and exact
    /// whenever H(t) commutes with itself at all times.
    pub fn step(&self, t0: f64, dt: f64, phases: (f64, f64)) -> CMat {
        linalg::expm_herm(&self.interval_average(t0, dt, phases), dt)
    }
}

/// Reduce ω₁/ω₂ to p/q by continued fractions (denominators ≤ 10⁴, relative tolerance 1e−9).
pub fn commensurate(omega1: f64, omega2: f64) -> Result<(u64, u64)> {
    let r = omega1 / omega2;
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut x = r;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a_int = a as u64;
        let h2 = a_int.saturating_mul(h1).saturating_add(h0);
        let k2 = a_int.saturating_mul(k1).saturating_add(k0);
        if k2 > 10_000 {
            break;
        }
        if ((h2 as f64 / k2 as f64) - r).abs() <= 1e-9 * r {
            return Ok((h2, k2));
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = x - a;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    Err(Error::NonCommensurate { omega1, omega2 })
}

/// Time-ordered propagator U(duration, 0) at fixed drive phases.
pub fn propagate(
    model: &TwoToneModel,
    phases: (f64, f64),
    duration: f64,
    steps_per_tcom: usize,
) -> Result<CMat> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if steps_per_tcom < MIN_STEPS_PER_TCOM {
        return Err(Error::InvalidArgument(format!(
            "steps_per_tcom must be ≥ {MIN_STEPS_PER_TCOM}, got {steps_per_tcom}"
        )));
    }
    let n = ((duration / model.t_com()) * steps_per_tcom as f64)
        .ceil()
        .max(1.0) as usize;
    let dt = duration / n as f64;
    let d = model.dim();
    let mut u = CMat::identity(d, d);
    for k in 0..n {
        u = model.step(k as f64 * dt, dt, phases) * u;
    }
    Ok(u)
}

/// Options for building a [`FloquetSpectrum`].
#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    pub steps_per_tcom: usize,
    /// Eigenvalues of U(T_com) closer than this are treated as one degenerate cluster.
    pub degeneracy_tol: f64,
    /// Fourth-order (Richardson-type) five-point derivative instead of central differences.
    pub richardson: bool,
    /// Use the equal-frequency time-shift construction when ω₁ = ω₂.
    pub use_shift_symmetry: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            steps_per_tcom: DEFAULT_STEPS_PER_TCOM,
            degeneracy_tol: 1e-7,
            richardson: false,
            use_shift_symmetry: true,
        }
    }
}

/// Quasienergies and Floquet states over the phase grid.
#[derive(Clone, Debug)]
pub struct FloquetSpectrum {
    pub grid: PhaseGrid,
    pub dim: usize,
    pub omega1: f64,
    pub omega2: f64,
    pub t_com: f64,
    pub omega_com: f64,
    /// Folded quasienergies, `[point * dim + band]`.
    pub energies: Vec<f64>,
    /// (∂_{φ₁}ε, ∂_{φ₂}ε) per `[point * dim + band]`.
    pub derivatives: Vec<[f64; 2]>,
    /// Floquet states at t₀ = 0, one column per band.
    pub states: Vec<CMat>,
    /// Smallest raw eigenvector overlap |⟨n(φ)|n(φ')⟩|² to a grid neighbour.
    pub tracking_quality: Vec<f64>,
    /// Same after continuing degenerate clusters from a neighbour.
    pub resolved_quality: Vec<f64>,
    /// True where the spectrum was built from the equal-frequency time-shift construction.
    pub shift_symmetric: bool,
    /// Unitarity of the slowest-converging propagator (diagnostic).
    pub max_unitarity_residual: f64,
}

impl FloquetSpectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn energy(&self, p: usize, n: usize) -> f64 {
        self.energies[p * self.dim + n]
    }

    pub fn derivative(&self, p: usize, n: usize, j: usize) -> f64 {
        self.derivatives[p * self.dim + n][j - 1]
    }

    /// ∂_{Δφ}ε ≡ (∂_{φ₁} − ∂_{φ₂})ε.
    pub fn delta_derivative(&self, p: usize, n: usize) -> f64 {
        let d = self.derivatives[p * self.dim + n];
        d[0] - d[1]
    }

    /// Grid points whose raw band tracking is ambiguous (overlap < 0.5).
    pub fn flagged_points(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| self.tracking_quality[p] < 0.5)
            .collect()
    }

    /// Grid points whose tracking stays ambiguous after degenerate continuation.
    pub fn unresolved_points(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| self.resolved_quality[p] < 0.5)
            .collect()
    }

    /// U(k·T_com) at a grid point, reconstructed from the spectral data.
    pub fn stroboscopic_propagator(&self, p: usize, k: f64) -> CMat {
        let v = &self.states[p];
        let mut left = v.clone();
        for n in 0..self.dim {
            let ph = C64::from_polar(1.0, -self.energy(p, n) * k * self.t_com);
            let mut col = left.column_mut(n);
            col *= ph;
        }
        left * v.adjoint()
    }

    /// Apply U(k·T_com) at point p to a qudit state.
    pub fn evolve_point(&self, p: usize, k: f64, psi: &CVec) -> CVec {
        let v = &self.states[p];
        let mut c = v.adjoint() * psi;
        for n in 0..self.dim {
            c[n] *= C64::from_polar(1.0, -self.energy(p, n) * k * self.t_com);
        }
        v * c
    }

    /// P̂_j(φ) = Σ_n ∂_{φ_j}ε_n |n⟩⟨n| at a grid point.
    pub fn power_matrix(&self, p: usize, j: usize) -> CMat {
        let v = &self.states[p];
        let mut left = v.clone();
        for n in 0..self.dim {
            let mut col = left.column_mut(n);
            col *= C64::new(self.derivative(p, n, j), 0.0);
        }
        left * v.adjoint()
    }

    /// Export as CSV rows (phi1, phi2, band, eps_folded, deps_dphi1, deps_dphi2).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "phi1,phi2,band,eps_folded,deps_dphi1,deps_dphi2")?;
        for p in 0..self.len() {
            let (a, b) = self.grid.phases(p);
            for n in 0..self.dim {
                let d = self.derivatives[p * self.dim + n];
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    a,
                    b,
                    n,
                    self.energy(p, n),
                    d[0],
                    d[1]
                )?;
            }
        }
        Ok(())
    }
}

/// Fold ε into [−ω_com/2, ω_com/2).
pub fn fold(eps: f64, omega_com: f64) -> f64 {
    let x = (eps + 0.5 * omega_com).rem_euclid(omega_com) - 0.5 * omega_com;
    if x >= 0.5 * omega_com {
        x - omega_com
    } else {
        x
    }
}

/// Difference x − reference mapped to the branch of smallest magnitude modulo ω_com.
pub fn unfold_difference(x: f64, reference: f64, omega_com: f64) -> f64 {
    let d = x - reference;
    d - omega_com * (d / omega_com).round()
}

/// Eigen-data of one stroboscopic propagator.
#[derive(Clone, Debug)]
struct PointEig {
    eps: Vec<f64>,
    lambdas: Vec<C64>,
    vecs: CMat,
}

fn point_eig(u: &CMat, t_com: f64, omega_com: f64) -> PointEig {
    let (lambdas, vecs) = linalg::unitary_eig(u);
    let eps = lambdas
        .iter()
        .map(|l| fold(-l.arg() / t_com, omega_com))
        .collect();
    PointEig { eps, lambdas, vecs }
}

/// Groups of band indices whose eigenvalues coincide within `tol`.
fn clusters(lambdas: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let d = lambdas.len();
    let mut label: Vec<usize> = (0..d).collect();
    for a in 0..d {
        for b in (a + 1)..d {
            if (lambdas[a] - lambdas[b]).norm() < tol {
                let (la, lb) = (label[a], label[b]);
                for l in label.iter_mut() {
                    if *l == lb {
                        *l = la;
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for a in 0..d {
        if let Some(g) = groups.iter_mut().find(|g| label[g[0]] == label[a]) {
            g.push(a);
        } else {
            groups.push(vec![a]);
        }
    }
    groups
}

/// Replace eigenvectors inside degenerate clusters by the projection of a neighbour's
/// vectors onto the cluster subspace, orthonormalised. Returns true if anything changed.
fn continue_degenerate(target: &mut PointEig, neighbour: &PointEig, tol: f64) -> bool {
    let d = target.eps.len();
    let groups = clusters(&target.lambdas, tol);
    if groups.iter().all(|g| g.len() == 1) {
        return false;
    }
    for g in groups.iter().filter(|g| g.len() > 1) {
        let mut proj = CMat::zeros(d, d);
        for &a in g {
            let c = target.vecs.column(a).clone_owned();
            proj += &c * c.adjoint();
        }
        // Pick the neighbour vectors with the largest weight in the cluster subspace.
        let mut weights: Vec<(usize, f64)> = (0..d)
            .map(|b| (b, (&proj * neighbour.vecs.column(b)).norm_squared()))
            .collect();
        weights.sort_by(|x, y| y.1.total_cmp(&x.1));
        let mut block = CMat::zeros(d, g.len());
        for (col, &(b, _)) in weights.iter().take(g.len()).enumerate() {
            block.set_column(col, &(&proj * neighbour.vecs.column(b)));
        }
        linalg::gram_schmidt(&mut block);
        for (col, &a) in g.iter().enumerate() {
            target.vecs.set_column(a, &block.column(col));
        }
    }
    true
}

/// Band permutation π maximising Σ_a |⟨ref_a | cand_{π(a)}⟩|², with the smallest matched overlap.
fn match_bands(reference: &CMat, candidate: &CMat) -> (Vec<usize>, f64) {
    let d = reference.ncols();
    let ov = CMat::from_fn(d, d, |a, b| {
        C64::new(
            reference.column(a).dotc(&candidate.column(b)).norm_sqr(),
            0.0,
        )
    });
    let ov = |a: usize, b: usize| ov[(a, b)].re;
    let mut best: Option<(f64, Vec<usize>)> = None;
    if d <= 6 {
        let mut perm: Vec<usize> = (0..d).collect();
        permutations(&mut perm, 0, &mut |p| {
            let s: f64 = (0..d).map(|a| ov(a, p[a])).sum();
            if best.as_ref().map_or(true, |(b, _)| s > *b) {
                best = Some((s, p.to_vec()));
            }
        });
    } else {
        let mut used = vec![false; d];
        let mut perm = vec![0; d];
        for a in 0..d {
            let b = (0..d)
                .filter(|&b| !used[b])
                .max_by(|&x, &y| ov(a, x).total_cmp(&ov(a, y)))
                .unwrap();
            used[b] = true;
            perm[a] = b;
        }
        best = Some((0.0, perm));
    }
    let perm = best.unwrap().1;
    let worst = (0..d).map(|a| ov(a, perm[a])).fold(f64::INFINITY, f64::min);
    (perm, worst)
}

fn permutations(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Derivative data for a point given matched neighbours along one axis.
struct AxisDerivative {
    values: Vec<f64>,
    worst_overlap: f64,
}

fn axis_derivative(
    center: &PointEig,
    nb: &[&PointEig],
    h: f64,
    omega_com: f64,
    richardson: bool,
) -> AxisDerivative {
    // nb = [minus, plus] or [minus2, minus, plus, plus2].
    let d = center.eps.len();
    let mut worst = f64::INFINITY;
    let mut delta = |other: &PointEig, via: Option<(&PointEig, &Vec<usize>)>| -> Vec<f64> {
        let perm = match via {
            None => {
                let (p, w) = match_bands(&center.vecs, &other.vecs);
                worst = worst.min(w);
                p
            }
            Some((mid, pm)) => {
                let (p2, w) = match_bands(&mid.vecs, &other.vecs);
                worst = worst.min(w);
                (0..d).map(|a| p2[pm[a]]).collect()
            }
        };
        (0..d)
            .map(|a| unfold_difference(other.eps[perm[a]], center.eps[a], omega_com))
            .collect()
    };
    let values = if !richardson || nb.len() == 2 {
        let (m1, p1) = if nb.len() == 2 {
            (nb[0], nb[1])
        } else {
            (nb[1], nb[2])
        };
        let dm = delta(m1, None);
        let dp = delta(p1, None);
        (0..d).map(|a| (dp[a] - dm[a]) / (2.0 * h)).collect()
    } else {
        let (pm, _) = match_bands(&center.vecs, &nb[1].vecs);
        let (pp, _) = match_bands(&center.vecs, &nb[2].vecs);
        let dm = delta(nb[1], None);
        let dp = delta(nb[2], None);
        let dm2 = delta(nb[0], Some((nb[1], &pm)));
        let dp2 = delta(nb[3], Some((nb[2], &pp)));
        (0..d)
            .map(|a| (8.0 * (dp[a] - dm[a]) - (dp2[a] - dm2[a])) / (12.0 * h))
            .collect()
    };
    AxisDerivative {
        values,
        worst_overlap: worst,
    }
}

/// Diagonalise U(T_com) over the grid and compute tracked band derivatives.
pub fn quasienergies(model: &TwoToneModel, grid: &PhaseGrid) -> Result<FloquetSpectrum> {
    quasienergies_with(model, grid, &SpectrumOptions::default())
}

pub fn quasienergies_with(
    model: &TwoToneModel,
    grid: &PhaseGrid,
    opts: &SpectrumOptions,
) -> Result<FloquetSpectrum> {
    if opts.steps_per_tcom < MIN_STEPS_PER_TCOM {
        return Err(Error::InvalidArgument(format!(
            "steps_per_tcom must be ≥ {MIN_STEPS_PER_TCOM}"
        )));
    }
    if model.equal_frequencies() && opts.use_shift_symmetry {
        shift_symmetric_spectrum(model, grid, opts)
    } else {
        generic_spectrum(model, grid, opts)
    }
}

/// Raw (pre-continuation) worst overlap between a point and its neighbour.
fn raw_overlap(a: &PointEig, b: &PointEig) -> f64 {
    match_bands(&a.vecs, &b.vecs).1
}

fn shift_symmetric_spectrum(
    model: &TwoToneModel,
    grid: &PhaseGrid,
    opts: &SpectrumOptions,
) -> Result<FloquetSpectrum> {
    let m = grid.m;
    let d = model.dim();
    let t_com = model.t_com();
    let omega_com = model.omega_com();
    let sub = opts.steps_per_tcom.div_ceil(m);
    let steps = sub * m;
    let dt = t_com / steps as f64;
    let h = grid.spacing();

    // Line Δ_k = φ₁ − φ₂ = k·h, propagated from t₀ = 0 at phases (Δ_k, 0); record U(l·T_com/m).
    let line: Vec<(CMat, Vec<CMat>)> = (0..m)
        .into_par_iter()
        .map(|k| {
            let phases = (grid.phase(k), 0.0);
            let mut u = CMat::identity(d, d);
            let mut shifts = Vec::with_capacity(m);
            for s in 0..steps {
                if s % sub == 0 {
                    shifts.push(u.clone());
                }
                u = model.step(s as f64 * dt, dt, phases) * u;
            }
            (u, shifts)
        })
        .collect();
    let max_unitarity_residual = line
        .iter()
        .map(|(u, _)| linalg::unitarity_residual(u))
        .fold(0.0, f64::max);

    let raw: Vec<PointEig> = line
        .iter()
        .map(|(u, _)| point_eig(u, t_com, omega_com))
        .collect();
    let mut eig = raw.clone();
    let mut raw_quality = vec![f64::INFINITY; m];
    for k in 0..m {
        let kp = (k + 1) % m;
        let q = raw_overlap(&raw[k], &raw[kp]);
        raw_quality[k] = raw_quality[k].min(q);
        raw_quality[kp] = raw_quality[kp].min(q);
    }
    // Continue degenerate clusters from the nearest non-degenerate neighbour on the ring.
    for k in 0..m {
        let groups = clusters(&raw[k].lambdas, opts.degeneracy_tol);
        if groups.iter().all(|g| g.len() == 1) {
            continue;
        }
        let src = (1..m)
            .flat_map(|r| [(k + m - r) % m, (k + r) % m])
            .find(|&c| {
                clusters(&raw[c].lambdas, opts.degeneracy_tol)
                    .iter()
                    .all(|g| g.len() == 1)
            });
        if let Some(c) = src {
            let nb = raw[c].clone();
            continue_degenerate(&mut eig[k], &nb, opts.degeneracy_tol);
        }
    }

    let line_derivs: Vec<AxisDerivative> = (0..m)
        .map(|k| {
            let at = |o: isize| &eig[((k as isize + o).rem_euclid(m as isize)) as usize];
            if opts.richardson {
                axis_derivative(&eig[k], &[at(-2), at(-1), at(1), at(2)], h, omega_com, true)
            } else {
                axis_derivative(&eig[k], &[at(-1), at(1)], h, omega_com, false)
            }
        })
        .collect();

    let n = m * m;
    let mut energies = vec![0.0; n * d];
    let mut derivatives = vec![[0.0; 2]; n * d];
    let mut states = Vec::with_capacity(n);
    let mut tracking_quality = vec![0.0; n];
    let mut resolved_quality = vec![0.0; n];
    for i in 0..m {
        for j in 0..m {
            // (φ₁, φ₂) = (Δ_k + s_l, s_l) with s_l = l·h, i.e. k = i − j, l = j.
            let k = (i + m - j) % m;
            let l = j;
            let p = i * m + j;
            let ul = &line[k].1[l];
            states.push(ul * &eig[k].vecs);
            for b in 0..d {
                energies[p * d + b] = eig[k].eps[b];
                let v = line_derivs[k].values[b];
                derivatives[p * d + b] = [v, -v];
            }
            tracking_quality[p] = raw_quality[k];
            resolved_quality[p] = line_derivs[k].worst_overlap;
        }
    }
    Ok(FloquetSpectrum {
        grid: *grid,
        dim: d,
        omega1: model.omega1,
        omega2: model.omega2,
        t_com,
        omega_com,
        energies,
        derivatives,
        states,
        tracking_quality,
        resolved_quality,
        shift_symmetric: true,
        max_unitarity_residual,
    })
}

fn generic_spectrum(
    model: &TwoToneModel,
    grid: &PhaseGrid,
    opts: &SpectrumOptions,
) -> Result<FloquetSpectrum> {
    if opts.richardson {
        return Err(Error::Unsupported(
            "fourth-order derivatives are only available for equal drive frequencies".into(),
        ));
    }
    let d = model.dim();
    let t_com = model.t_com();
    let omega_com = model.omega_com();
    let h = grid.spacing();
    let us: Vec<CMat> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            propagate(model, grid.phases(p), t_com, opts.steps_per_tcom).expect("validated options")
        })
        .collect();
    let max_unitarity_residual = us
        .iter()
        .map(linalg::unitarity_residual)
        .fold(0.0, f64::max);
    let raw: Vec<PointEig> = us.iter().map(|u| point_eig(u, t_com, omega_com)).collect();
    let mut eig = raw.clone();
    let mut tracking_quality = vec![f64::INFINITY; grid.len()];
    for p in 0..grid.len() {
        let (i, j) = grid.coords(p);
        for q in [
            grid.index(i as isize + 1, j as isize),
            grid.index(i as isize, j as isize + 1),
        ] {
            let o = raw_overlap(&raw[p], &raw[q]);
            tracking_quality[p] = tracking_quality[p].min(o);
            tracking_quality[q] = tracking_quality[q].min(o);
        }
    }
    for p in 0..grid.len() {
        if clusters(&raw[p].lambdas, opts.degeneracy_tol)
            .iter()
            .all(|g| g.len() == 1)
        {
            continue;
        }
        let (i, j) = grid.coords(p);
        let candidates = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1)];
        if let Some(q) = candidates
            .iter()
            .map(|&(a, b)| grid.index(i as isize + a, j as isize + b))
            .find(|&q| {
                clusters(&raw[q].lambdas, opts.degeneracy_tol)
                    .iter()
                    .all(|g| g.len() == 1)
            })
        {
            let nb = raw[q].clone();
            continue_degenerate(&mut eig[p], &nb, opts.degeneracy_tol);
        }
    }
    let mut energies = vec![0.0; grid.len() * d];
    let mut derivatives = vec![[0.0; 2]; grid.len() * d];
    let mut resolved_quality = vec![0.0; grid.len()];
    for p in 0..grid.len() {
        let (i, j) = grid.coords(p);
        let (i, j) = (i as isize, j as isize);
        let a1 = axis_derivative(
            &eig[p],
            &[&eig[grid.index(i - 1, j)], &eig[grid.index(i + 1, j)]],
            h,
            omega_com,
            false,
        );
        let a2 = axis_derivative(
            &eig[p],
            &[&eig[grid.index(i, j - 1)], &eig[grid.index(i, j + 1)]],
            h,
            omega_com,
            false,
        );
        for b in 0..d {
            energies[p * d + b] = eig[p].eps[b];
            derivatives[p * d + b] = [a1.values[b], a2.values[b]];
        }
        resolved_quality[p] = a1.worst_overlap.min(a2.worst_overlap);
    }
    Ok(FloquetSpectrum {
        grid: *grid,
        dim: d,
        omega1: model.omega1,
        omega2: model.omega2,
        t_com,
        omega_com,
        energies,
        derivatives,
        states: eig.into_iter().map(|e| e.vecs).collect(),
        tracking_quality,
        resolved_quality,
        shift_symmetric: false,
        max_unitarity_residual,
    })
}

/// Per-point power operators of one drive.
#[derive(Clone, Debug)]
pub struct PowerOperator {
    pub drive: usize,
    pub matrix: CMat,
}

/// Power operators P̂_j(φ) over the grid, with the qubit states |P⟩, |−P⟩ where d = 2.
#[derive(Clone, Debug)]
pub struct PowerField {
    pub drive: usize,
    pub operators: Vec<PowerOperator>,
    /// Per point (|P⟩, |−P⟩) for qubits.
    pub qubit_states: Option<Vec<(CVec, CVec)>>,
    /// Points whose raw tracking was ambiguous but resolved by degenerate continuation.
    pub flagged: Vec<usize>,
}

pub fn power_operator(spectrum: &FloquetSpectrum, j: usize) -> Result<PowerField> {
    if j != 1 && j != 2 {
        return Err(Error::InvalidArgument(format!(
            "drive index must be 1 or 2, got {j}"
        )));
    }
    let unresolved = spectrum.unresolved_points();
    if !unresolved.is_empty() {
        let worst = unresolved
            .iter()
            .map(|&p| spectrum.resolved_quality[p])
            .fold(f64::INFINITY, f64::min);
        return Err(Error::TrackingAmbiguity {
            count: unresolved.len(),
            worst,
        });
    }
    let operators: Vec<PowerOperator> = (0..spectrum.len())
        .map(|p| PowerOperator {
            drive: j,
            matrix: spectrum.power_matrix(p, j),
        })
        .collect();
    let qubit_states = (spectrum.dim == 2).then(|| {
        operators
            .iter()
            .map(|op| qubit_power_states(&op.matrix))
            .collect()
    });
    Ok(PowerField {
        drive: j,
        operators,
        qubit_states,
        flagged: spectrum.flagged_points(),
    })
}

/// (|P⟩, |−P⟩): eigenvectors of a traceless qubit power operator with the positive
/// and negative eigenvalue respectively.
pub fn qubit_power_states(p: &CMat) -> (CVec, CVec) {
    let (_, vecs) = linalg::herm_eig(p);
    (vecs.column(1).clone_owned(), vecs.column(0).clone_owned())
}

/// Cumulative work trace of both drives.
#[derive(Clone, Debug)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// E_j(t) = ∫₀ᵗ ⟨ψ|dĤ_j/dτ|ψ⟩ dτ, absorbed from drive j.
    pub work: [Vec<f64>; 2],
    /// P̄_j(kT_com) = E_j(kT_com)/(kT_com) at each completed period.
    pub stroboscopic_power: [Vec<f64>; 2],
}

/// Integrate the absorbed work of both drives along a trajectory.
pub fn energy_transfer_trace(
    model: &TwoToneModel,
    phases: (f64, f64),
    psi0: &CVec,
    horizon: f64,
    steps_per_tcom: usize,
) -> Result<EnergyTrace> {
    let nrm = psi0.norm();
    if (nrm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "initial state not normalised (‖ψ‖ = {nrm})"
        )));
    }
    if steps_per_tcom < MIN_STEPS_PER_TCOM {
        return Err(Error::InvalidArgument(format!(
            "steps_per_tcom must be ≥ {MIN_STEPS_PER_TCOM}"
        )));
    }
    let t_com = model.t_com();
    let periods = (horizon / t_com).ceil().max(1.0) as usize;
    let dt = t_com / steps_per_tcom as f64;
    let mut psi = psi0.clone();
    let mut e = [0.0f64; 2];
    let mut trace = EnergyTrace {
        times: vec![0.0],
        work: [vec![0.0], vec![0.0]],
        stroboscopic_power: [vec![], vec![]],
    };
    for k in 0..periods * steps_per_tcom {
        let t0 = k as f64 * dt;
        let tm = t0 + 0.5 * dt;
        let h = model.hamiltonian(tm, phases);
        let half = linalg::expm_herm(&h, 0.5 * dt);
        let mid = &half * &psi;
        for j in 0..2 {
            e[j] += dt * linalg::expectation(&model.drive_rate(j + 1, tm, phases), &mid).re;
        }
        psi = &half * mid;
        trace.times.push(t0 + dt);
        trace.work[0].push(e[0]);
        trace.work[1].push(e[1]);
        if (k + 1) % steps_per_tcom == 0 {
            let t = t0 + dt;
            trace.stroboscopic_power[0].push(e[0] / t);
            trace.stroboscopic_power[1].push(e[1] / t);
        }
    }
    Ok(trace)
}

/// Closed-form quasienergies of the circular model (lab frame, unfolded).
pub fn circular_closed_form(omega0: f64, omega: f64, a: f64, delta_phi: f64) -> (f64, f64) {
    let r = ((omega0 - omega).powi(2) + 16.0 * a * a * (0.5 * delta_phi).cos().powi(2)).sqrt();
    (0.5 * (omega + r), 0.5 * (omega - r))
}

/// Analytic ∂_{Δφ}ε₁ of the circular model, Δφ = φ₁ − φ₂ as a single variable.
pub fn circular_slope(omega0: f64, omega: f64, a: f64, delta_phi: f64) -> f64 {
    let r = ((omega0 - omega).powi(2) + 16.0 * a * a * (0.5 * delta_phi).cos().powi(2)).sqrt();
    -2.0 * a * a * delta_phi.sin() / r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::{basis_vector, sigma_x};

    fn params(pairs: &[(&str, f64)]) -> ModelParams {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn circular() -> TwoToneModel {
        model_library(
            "circular",
            &params(&[("omega0", 1.0), ("omega", 0.25), ("A", 0.125)]),
        )
        .unwrap()
    }

    #[test]
    fn commensurability_reduces() {
        assert_eq!(commensurate(2.0, 3.0).unwrap(), (2, 3));
        assert_eq!(commensurate(0.25, 0.25).unwrap(), (1, 1));
        assert!(commensurate(1.0, std::f64::consts::PI).is_err());
        let m = circular().with_frequencies(0.5, 0.25).unwrap();
        assert!((m.t_com() - 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn zero_drive_propagator_is_static_exponential() {
        let m = circular().scaled_drives(0.0);
        let u = propagate(&m, (0.3, 1.1), 7.3, 500).unwrap();
        let exact = linalg::expm_herm(&m.h0, 7.3);
        assert!(linalg::max_abs(&(u - exact)) < 1e-12);
    }

    #[test]
    fn commuting_family_matches_scalar_integral() {
        let m = model_library(
            "zeeman",
            &params(&[
                ("g", 1.0),
                ("B0", 1.0),
                ("B1", 1.0),
                ("B2", 1.0),
                ("omega1", 1.0),
                ("omega2", 2.0),
            ]),
        )
        .unwrap();
        let (p1, p2) = (0.4, 2.2);
        let t = 9.0;
        let u = propagate(&m, (p1, p2), t, 2000).unwrap();
        // ∫H dt = −g Sz [B0 t + B1 (sin(ω₁t+φ₁) − sin φ₁)/ω₁ + B2 (sin(ω₂t+φ₂) − sin φ₂)/ω₂]
        let integral = t + ((t + p1).sin() - p1.sin()) + ((2.0 * t + p2).sin() - p2.sin()) / 2.0;
        let exact = linalg::expm_herm(&(crate::opspace::sigma_z() * C64::new(-0.5, 0.0)), integral);
        assert!(linalg::max_abs(&(u - exact)) < 1e-9);
    }

    #[test]
    fn propagator_is_unitary_and_second_order() {
        let m = circular();
        let t = m.t_com();
        let reference = propagate(&m, (0.7, 0.1), t, 16000).unwrap();
        let e1 = linalg::max_abs(&(propagate(&m, (0.7, 0.1), t, 200).unwrap() - &reference));
        let e2 = linalg::max_abs(&(propagate(&m, (0.7, 0.1), t, 400).unwrap() - &reference));
        assert!(e1 / e2 >= 3.0, "ratio {}", e1 / e2);
        assert!(linalg::unitarity_residual(&reference) < 1e-10);
        assert!(propagate(&m, (0.0, 0.0), t, 50).is_err());
        assert!(propagate(&m, (0.0, 0.0), 0.0, 200).is_err());
    }

    #[test]
    fn circular_eigenphases_match_closed_form() {
        let m = circular();
        let u = propagate(&m, (0.0, 0.0), m.t_com(), DEFAULT_STEPS_PER_TCOM).unwrap();
        let pe = point_eig(&u, m.t_com(), m.omega_com());
        let mut eps = pe.eps.clone();
        eps.sort_by(f64::total_cmp);
        let (e1, e2) = circular_closed_form(1.0, 0.25, 0.125, 0.0);
        assert!((e1 - 0.575694).abs() < 1e-6 && (e2 + 0.325694).abs() < 1e-6);
        let mut expect = [fold(e1, 0.25), fold(e2, 0.25)];
        expect.sort_by(f64::total_cmp);
        assert!((expect[1] - 0.075694).abs() < 1e-6);
        for k in 0..2 {
            assert!((eps[k] - expect[k]).abs() < 1e-6, "{eps:?} vs {expect:?}");
        }
    }

    #[test]
    fn spectrum_eigen_residuals() {
        let m = circular();
        let grid = PhaseGrid::new(8).unwrap();
        let s = quasienergies(&m, &grid).unwrap();
        for p in 0..grid.len() {
            let u = propagate(&m, grid.phases(p), m.t_com(), DEFAULT_STEPS_PER_TCOM).unwrap();
            let v = &s.states[p];
            assert!(linalg::unitarity_residual(v) < 1e-10);
            for n in 0..2 {
                let col = v.column(n).clone_owned();
                let r = &u * &col - col * C64::from_polar(1.0, -s.energy(p, n) * s.t_com);
                assert!(r.norm() < 1e-8, "point {p}: residual {}", r.norm());
            }
        }
    }

    #[test]
    fn power_eigenvalues_match_analytic_slope() {
        let m = circular();
        let grid = PhaseGrid::new(64).unwrap();
        let s = quasienergies(&m, &grid).unwrap();
        // Δφ = 0.6π sits on the grid at i − j = 19.2 cells; use the nearest cell exactly.
        let k = 19usize;
        let delta = grid.phase(k);
        let p = grid.index(k as isize, 0);
        let (vals, _) = linalg::herm_eig(&s.power_matrix(p, 1));
        let slope = circular_slope(1.0, 0.25, 0.125, delta).abs();
        assert!((vals[1] - slope).abs() < 2e-3 && (vals[0] + slope).abs() < 2e-3);
        let p_exact = circular_slope(1.0, 0.25, 0.125, 0.6 * PI).abs();
        assert!((p_exact - 0.036895).abs() < 1e-5);
    }

    #[test]
    fn shift_construction_agrees_with_direct_grid() {
        let m = circular();
        let grid = PhaseGrid::new(8).unwrap();
        let fast = quasienergies(&m, &grid).unwrap();
        let opts = SpectrumOptions {
            use_shift_symmetry: false,
            ..Default::default()
        };
        let slow = quasienergies_with(&m, &grid, &opts).unwrap();
        for p in 0..grid.len() {
            let mut a: Vec<f64> = (0..2).map(|n| fast.energy(p, n)).collect();
            let mut b: Vec<f64> = (0..2).map(|n| slow.energy(p, n)).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for n in 0..2 {
                assert!((a[n] - b[n]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn power_identities_hold() {
        let m = circular();
        let grid = PhaseGrid::new(16).unwrap();
        let s = quasienergies(&m, &grid).unwrap();
        let p1 = power_operator(&s, 1).unwrap();
        let p2 = power_operator(&s, 2).unwrap();
        for p in 0..grid.len() {
            assert!(linalg::trace(&p1.operators[p].matrix).norm() < 1e-8);
            let sum = &p1.operators[p].matrix * C64::new(m.omega1, 0.0)
                + &p2.operators[p].matrix * C64::new(m.omega2, 0.0);
            assert!(linalg::max_abs(&sum) < 1e-8);
        }
    }

    #[test]
    fn unequal_frequencies_use_direct_grid() {
        let m = circular().with_frequencies(0.25, 0.5).unwrap();
        let grid = PhaseGrid::new(8).unwrap();
        let s = quasienergies_with(
            &m,
            &grid,
            &SpectrumOptions {
                steps_per_tcom: 400,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!s.shift_symmetric);
        let p1 = power_operator(&s, 1).unwrap();
        for op in &p1.operators {
            assert!(linalg::trace(&op.matrix).norm() < 1e-8);
        }
    }

    #[test]
    fn folded_energy_depends_on_scaled_phase_difference() {
        // ε depends on φ₁/ω₁ − φ₂/ω₂ only: shifting (φ₁, φ₂) by (ω₁s, ω₂s) leaves the folded spectrum fixed.
        let m = circular().with_frequencies(0.25, 0.5).unwrap();
        let base = propagate(&m, (0.3, 0.9), m.t_com(), 2000).unwrap();
        let s = 0.77;
        let shifted = propagate(&m, (0.3 + 0.25 * s, 0.9 + 0.5 * s), m.t_com(), 2000).unwrap();
        let mut a = point_eig(&base, m.t_com(), m.omega_com()).eps;
        let mut b = point_eig(&shifted, m.t_com(), m.omega_com()).eps;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for k in 0..2 {
            // Equal up to the propagator's discretisation error.
            assert!((a[k] - b[k]).abs() < 1e-7, "{a:?} {b:?}");
        }
    }

    #[test]
    fn energy_transfer_reverses_with_power_states() {
        let m = circular();
        let phases = (0.6 * PI, 0.0);
        let u = propagate(&m, phases, m.t_com(), 2000).unwrap();
        // Power operator at this point from a small local spectrum around it.
        let h = 1e-3;
        let eps_at = |dphi: f64| {
            let u = propagate(&m, (0.6 * PI + dphi, 0.0), m.t_com(), 2000).unwrap();
            point_eig(&u, m.t_com(), m.omega_com())
        };
        let c = point_eig(&u, m.t_com(), m.omega_com());
        let d = axis_derivative(&c, &[&eps_at(-h), &eps_at(h)], h, m.omega_com(), false);
        let mut pmat = c.vecs.clone();
        for n in 0..2 {
            let mut col = pmat.column_mut(n);
            col *= C64::new(d.values[n], 0.0);
        }
        let pmat = pmat * c.vecs.adjoint();
        let (plus, minus) = qubit_power_states(&pmat);
        let horizon = 60.0 * m.t_com();
        let tp = energy_transfer_trace(&m, phases, &plus, horizon, 400).unwrap();
        let tm = energy_transfer_trace(&m, phases, &minus, horizon, 400).unwrap();
        let last_p = *tp.stroboscopic_power[0].last().unwrap();
        let last_m = *tm.stroboscopic_power[0].last().unwrap();
        let expect = m.omega1 * linalg::expectation(&pmat, &plus).re;
        assert!(last_p * last_m < 0.0);
        assert!(
            (last_p - expect).abs() < 0.1 * expect.abs(),
            "{last_p} vs {expect}"
        );
    }

    #[test]
    fn zeeman_power_vanishes() {
        let m = model_library(
            "zeeman",
            &gallery()
                .into_iter()
                .find(|g| g.name == "zeeman")
                .unwrap()
                .defaults(),
        )
        .unwrap();
        let grid = PhaseGrid::new(16).unwrap();
        let s = quasienergies(&m, &grid).unwrap();
        let pf = power_operator(&s, 1).unwrap();
        assert!(pf
            .operators
            .iter()
            .all(|o| linalg::max_abs(&o.matrix) < 1e-7));
        let e0: Vec<f64> = (0..2).map(|n| s.energy(0, n)).collect();
        // The defaults put both bands on the fold edge (U(T_com) = −I), so compare modulo ω_com.
        for p in 0..grid.len() {
            for n in 0..2 {
                let dev = (0..2)
                    .map(|k| unfold_difference(s.energy(p, k), e0[n], s.omega_com).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(dev < 1e-9);
            }
        }
        let tr = energy_transfer_trace(&m, (0.2, 1.0), &basis_vector(2, 0), 20.0 * m.t_com(), 400)
            .unwrap();
        assert!(tr.stroboscopic_power[0].last().unwrap().abs() < 1e-9);
    }

    #[test]
    fn polarization_bands_symmetric_under_phase_exchange() {
        let m = model_library(
            "polarization",
            &gallery()
                .into_iter()
                .find(|g| g.name == "polarization")
                .unwrap()
                .defaults(),
        )
        .unwrap();
        let grid = PhaseGrid::new(16).unwrap();
        let s = quasienergies(&m, &grid).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let p = grid.index(i, j);
                let q = grid.index(j, i);
                let mut a: Vec<f64> = (0..2).map(|n| s.energy(p, n)).collect();
                let mut b: Vec<f64> = (0..2).map(|n| s.energy(q, n)).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
            }
        }
        // σx maps the two drives onto each other.
        let sx = sigma_x();
        let h12 = m.hamiltonian(0.3, (0.2, 1.4));
        let h21 = m.hamiltonian(0.3, (1.4, 0.2));
        assert!(linalg::max_abs(&(&sx * h12 * &sx - h21)) < 1e-14);
    }

    #[test]
    fn folding_range() {
        assert!((fold(0.575694, 0.25) - 0.075694).abs() < 1e-12);
        assert!(fold(0.125, 0.25) < 0.125);
        assert!((fold(-0.125, 0.25) + 0.125).abs() < 1e-15);
    }
}
