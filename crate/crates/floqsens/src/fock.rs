//! Quantized-drives simulator on the truncated two-mode Fock space.
//!
//! The drives become bosonic modes with H_B = ω₁n̂₁ + ω₂n̂₂. A classical harmonic
//! e^{i(ω_j t+φ_j)} is replaced by â_j†/√n_jc, so the per-photon couplings are
//! H_jₒ(â_j† − â_j)/(2i√n_jc) + H_jₑ(â_j + â_j†)/(2√n_jc). The field phase of a quantized
//! mode is therefore −φ_j, and drive j loses photons at the rate ∂_{φ_j}ε.

use crate::error::{Error, Result};
use crate::floquet::TwoToneModel;
use crate::linalg::ZERO;
use crate::opspace::{coherent_amplitudes, NumberMoments, TwoModeState};
use crate::{CMat, CVec, C64};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use sprs::{CsMat, TriMat};
use std::io::Write;

/// Default truncation n_c + ⌈6√n_c⌉ + 8.
pub fn default_n_max(n_c: u64) -> usize {
    (n_c as f64 + (6.0 * (n_c as f64).sqrt()).ceil() + 8.0) as usize
}

/// Sparse time-independent Hamiltonian of qudit ⊗ two bosonic drive modes.
#[derive(Clone, Debug)]
pub struct QuantizedModel {
    pub name: String,
    pub dim: usize,
    pub n_max: usize,
    pub reference: (u64, u64),
    pub omega: [f64; 2],
    pub t_com: f64,
    pub h: CsMat<C64>,
    pub warnings: Vec<String>,
}

impl QuantizedModel {
    pub fn len(&self) -> usize {
        self.dim * (self.n_max + 1) * (self.n_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of |λ⟩|n₁⟩|n₂⟩.
    pub fn index(&self, lambda: usize, n1: usize, n2: usize) -> usize {
        let s = self.n_max + 1;
        (lambda * s + n1) * s + n2
    }

    /// Ĥ_q ψ, parallel over row blocks.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; x.len()];
        apply_into(&self.h, x, &mut y);
        y
    }

    /// ⟨ψ|Ĥ_q|ψ⟩.
    pub fn energy(&self, state: &FockState) -> f64 {
        let y = self.apply(&state.amps);
        state
            .amps
            .iter()
            .zip(&y)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (v, (i, j)) in self.h.iter() {
            let t = self.h.get(j, i).copied().unwrap_or(ZERO);
            r = r.max((v - t.conj()).norm());
        }
        r
    }
}

fn apply_into(h: &CsMat<C64>, x: &[C64], y: &mut [C64]) {
    let indptr = h.indptr();
    let indptr = indptr.raw_storage();
    let (idx, data) = (h.indices(), h.data());
    y.par_chunks_mut(1024).enumerate().for_each(|(c, out)| {
        for (k, yi) in out.iter_mut().enumerate() {
            let row = c * 1024 + k;
            let mut acc = ZERO;
            for p in indptr[row]..indptr[row + 1] {
                acc += data[p] * x[idx[p]];
            }
            *yi = acc;
        }
    });
}

/// Quantize a classical two-tone model around reference occupations (n₁c, n₂c).
pub fn quantize(model: &TwoToneModel, n1c: u64, n2c: u64, n_max: usize) -> Result<QuantizedModel> {
    if n1c == 0 || n2c == 0 {
        return Err(Error::InvalidArgument(
            "reference occupations must be positive".into(),
        ));
    }
    let mut warnings = Vec::new();
    for (j, n) in [(1, n1c), (2, n2c)] {
        if (n_max as u64) < n {
            return Err(Error::InvalidArgument(format!(
                "n_max = {n_max} below reference occupation of mode {j} ({n})"
            )));
        }
        let margin = n_max as f64 - n as f64;
        if margin < 4.0 * (n as f64).sqrt() {
            warnings.push(format!(
                "truncation margin {margin} for mode {j} is below 4√n_c = {:.1}",
                4.0 * (n as f64).sqrt()
            ));
        }
    }
    let d = model.dim();
    let s = n_max + 1;
    let total = d * s * s;
    let idx = |l: usize, n1: usize, n2: usize| (l * s + n1) * s + n2;
    let mut tri = TriMat::new((total, total));
    let push = |tri: &mut TriMat<C64>, r: usize, c: usize, v: C64| {
        if v.norm() > 0.0 {
            tri.add_triplet(r, c, v);
        }
    };
    let (w1, w2) = (model.omega1, model.omega2);
    for a in 0..d {
        for b in 0..d {
            let h0 = model.h0[(a, b)];
            for n1 in 0..s {
                for n2 in 0..s {
                    let mut v = h0;
                    if a == b {
                        v += C64::new(w1 * n1 as f64 + w2 * n2 as f64, 0.0);
                    }
                    push(&mut tri, idx(a, n1, n2), idx(b, n1, n2), v);
                }
            }
        }
    }
    // Raising part: ⟨a,n+1| (H_o/(2i) + H_e/2)/√n_c √(n+1) |b,n⟩, plus its Hermitian conjugate.
    let raise = [
        (&model.h1_odd * C64::new(0.0, -0.5) + model.h1_even.scale(0.5))
            .scale(1.0 / (n1c as f64).sqrt()),
        (&model.h2_odd * C64::new(0.0, -0.5) + model.h2_even.scale(0.5))
            .scale(1.0 / (n2c as f64).sqrt()),
    ];
    for a in 0..d {
        for b in 0..d {
            for n1 in 0..s {
                for n2 in 0..s {
                    if n1 + 1 < s {
                        let v = raise[0][(a, b)] * ((n1 + 1) as f64).sqrt();
                        push(&mut tri, idx(a, n1 + 1, n2), idx(b, n1, n2), v);
                        push(&mut tri, idx(b, n1, n2), idx(a, n1 + 1, n2), v.conj());
                    }
                    if n2 + 1 < s {
                        let v = raise[1][(a, b)] * ((n2 + 1) as f64).sqrt();
                        push(&mut tri, idx(a, n1, n2 + 1), idx(b, n1, n2), v);
                        push(&mut tri, idx(b, n1, n2), idx(a, n1, n2 + 1), v.conj());
                    }
                }
            }
        }
    }
    let qm = QuantizedModel {
        name: model.name.clone(),
        dim: d,
        n_max,
        reference: (n1c, n2c),
        omega: [w1, w2],
        t_com: model.t_com(),
        h: tri.to_csr(),
        warnings,
    };
    let r = qm.hermiticity_residual();
    if r > 1e-10 {
        return Err(Error::Numerical(format!(
            "quantized Hamiltonian not Hermitian (residual {r:.3e})"
        )));
    }
    Ok(qm)
}

/// Joint state ψ(λ, n₁, n₂) on the truncated space.
#[derive(Clone, Debug)]
pub struct FockState {
    pub dim: usize,
    pub n_max: usize,
    pub amps: Vec<C64>,
    /// Elapsed time (absolute units).
    pub time: f64,
}

impl FockState {
    /// |s⟩ ⊗ |drives⟩ for a drives state on the window 0..=n_max.
    pub fn product(ancilla: &CVec, drives: &TwoModeState) -> Result<Self> {
        if drives.origin != [0, 0] || drives.shape[0] != drives.shape[1] {
            return Err(Error::InvalidArgument(
                "drives state must live on a square Fock window".into(),
            ));
        }
        let nrm = ancilla.norm();
        if (nrm - 1.0).abs() > 1e-9 || (drives.norm_sqr() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "product factors must be normalised".into(),
            ));
        }
        let mut amps = Vec::with_capacity(ancilla.len() * drives.amps.len());
        for l in 0..ancilla.len() {
            amps.extend(drives.amps.iter().map(|a| a * ancilla[l]));
        }
        Ok(Self {
            dim: ancilla.len(),
            n_max: drives.shape[0] - 1,
            amps,
            time: 0.0,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Unnormalised drives state of qudit level λ.
    pub fn component(&self, lambda: usize) -> TwoModeState {
        let s = self.n_max + 1;
        let mut t = TwoModeState::fock_window(self.n_max);
        t.amps
            .copy_from_slice(&self.amps[lambda * s * s..(lambda + 1) * s * s]);
        t
    }

    /// Population with n₁ or n₂ in {n_max − 1, n_max}.
    pub fn boundary_population(&self) -> f64 {
        let s = self.n_max + 1;
        self.amps
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let r = k % (s * s);
                let (n1, n2) = (r / s, r % s);
                n1 + 1 >= self.n_max || n2 + 1 >= self.n_max
            })
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    pub fn number_moments(&self) -> NumberMoments {
        let mut m = NumberMoments::default();
        for l in 0..self.dim {
            m.merge(&self.component(l).number_moments());
        }
        m
    }

    pub fn reduced_ancilla(&self) -> CMat {
        let s2 = (self.n_max + 1).pow(2);
        CMat::from_fn(self.dim, self.dim, |a, b| {
            (0..s2)
                .map(|k| self.amps[a * s2 + k] * self.amps[b * s2 + k].conj())
                .sum()
        })
    }

    /// Snapshot CSV with columns lambda,n1,n2,re,im (non-zero amplitudes only).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,n1,n2,re,im")?;
        let s = self.n_max + 1;
        for (k, z) in self.amps.iter().enumerate() {
            if *z == ZERO {
                continue;
            }
            let (l, r) = (k / (s * s), k % (s * s));
            writeln!(w, "{},{},{},{},{}", l, r / s, r % s, z.re, z.im)?;
        }
        Ok(())
    }
}

/// Physical drive inputs in the number basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FockInput {
    /// |n₁, n₂⟩.
    Fock { n1: u64, n2: u64 },
    /// Coherent product with mean occupation n_c per mode and classical drive phases
    /// (φ₁₀, φ₂₀); the field amplitudes are √n_c e^{−iφ_j0}.
    Coherent { n_c: u64, phi10: f64, phi20: f64 },
}

/// Coherent product |α₁⟩|α₂⟩ with α_j = √n_c e^{iϑ_j} (field phases ϑ_j), truncated at n_max.
/// Errors when the truncation keeps less than 1 − 1e−9 of the Poisson mass.
pub fn coherent_field(n_c: u64, theta1: f64, theta2: f64, n_max: usize) -> Result<TwoModeState> {
    let r = (n_c as f64).sqrt();
    let (a1, a2) = (C64::from_polar(r, theta1), C64::from_polar(r, theta2));
    for a in [a1, a2] {
        let kept: f64 = coherent_amplitudes(a, n_max)
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        if kept < 1.0 - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "truncation n_max = {n_max} keeps only {kept:.12} of the coherent mass"
            )));
        }
    }
    Ok(TwoModeState::coherent_product(a1, a2, n_max))
}

/// Drives input on the window 0..=n_max.
pub fn coherent_or_fock_input(kind: FockInput, n_max: usize) -> Result<TwoModeState> {
    match kind {
        FockInput::Fock { n1, n2 } => {
            if n1.max(n2) as usize > n_max {
                return Err(Error::InvalidArgument(format!(
                    "|{n1},{n2}⟩ exceeds n_max = {n_max}"
                )));
            }
            Ok(TwoModeState::fock(n1 as usize, n2 as usize, n_max))
        }
        FockInput::Coherent { n_c, phi10, phi20 } => coherent_field(n_c, -phi10, -phi20, n_max),
    }
}

/// Krylov propagation settings.
#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Outer step as a fraction of T_com (the boundary shell is checked after each).
    pub steps_per_tcom: usize,
    /// Largest Krylov subspace.
    pub max_krylov: usize,
    /// Per-step error bound.
    pub tolerance: f64,
    /// Boundary-shell population that aborts propagation.
    pub breach: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            steps_per_tcom: 50,
            max_krylov: 40,
            tolerance: 1e-8,
            breach: 1e-6,
        }
    }
}

/// One Lanczos step ψ → e^{−iĤdt}ψ; `None` when the subspace cap is reached unconverged.
fn lanczos_step(h: &CsMat<C64>, psi: &[C64], dt: f64, max_m: usize, tol: f64) -> Option<Vec<C64>> {
    let n = psi.len();
    let beta0: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / beta0).collect()];
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut w = vec![ZERO; n];
    for j in 0..max_m.min(n) {
        apply_into(h, &basis[j], &mut w);
        let a: f64 = basis[j]
            .iter()
            .zip(&w)
            .map(|(v, x)| (v.conj() * x).re)
            .sum();
        alpha.push(a);
        // Full reorthogonalisation keeps the small basis numerically orthonormal.
        for v in &basis {
            let c: C64 = v.iter().zip(&w).map(|(p, q)| p.conj() * q).sum();
            w.par_iter_mut()
                .zip(v.par_iter())
                .for_each(|(x, p)| *x -= c * p);
        }
        let b: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let m = j + 1;
        let check = b < 1e-12 || m == max_m.min(n) || (m >= 4 && m % 2 == 0);
        if check {
            let t = DMatrix::<f64>::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let coef: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| {
                            C64::from_polar(
                                eig.eigenvectors[(0, k)] * eig.eigenvectors[(r, k)],
                                -eig.eigenvalues[k] * dt,
                            )
                        })
                        .sum()
                })
                .collect();
            let err = b * coef[m - 1].norm();
            if b < 1e-12 || err < tol {
                let mut out = vec![ZERO; n];
                for (v, c) in basis.iter().zip(&coef) {
                    let c = c * beta0;
                    out.par_iter_mut()
                        .zip(v.par_iter())
                        .for_each(|(o, p)| *o += c * p);
                }
                return Some(out);
            }
            if m == max_m.min(n) {
                return None;
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    None
}

/// Propagate by `duration` under the time-independent Ĥ_q with adaptive Krylov substeps.
pub fn evolve_fock(
    qm: &QuantizedModel,
    initial: &FockState,
    duration: f64,
    opts: &KrylovOptions,
) -> Result<FockState> {
    if initial.amps.len() != qm.len() {
        return Err(Error::InvalidArgument(
            "state does not match the quantized model".into(),
        ));
    }
    let nrm = initial.norm_sqr();
    if (nrm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "state not normalised (‖ψ‖² = {nrm})"
        )));
    }
    if duration < 0.0 {
        return Err(Error::InvalidArgument(
            "duration must be non-negative".into(),
        ));
    }
    let mut state = initial.clone();
    let outer = qm.t_com / opts.steps_per_tcom.max(1) as f64;
    let steps = (duration / outer - 1e-9).ceil().max(0.0) as usize;
    let mut sub = 1usize;
    for k in 0..steps {
        let dt = (duration - k as f64 * outer).min(outer);
        // Try the current substep count, refine on failure, coarsen again after success.
        let mut done = 0usize;
        let mut psi = state.amps.clone();
        while done < sub {
            let h = dt / sub as f64;
            match lanczos_step(&qm.h, &psi, h, opts.max_krylov, opts.tolerance / sub as f64) {
                Some(next) => {
                    psi = next;
                    done += 1;
                }
                None => {
                    if sub > 1 << 20 {
                        return Err(Error::Numerical(
                            "Krylov propagation failed to converge".into(),
                        ));
                    }
                    // restart this outer step with twice the substeps
                    sub *= 2;
                    done = 0;
                    psi = state.amps.clone();
                }
            }
        }
        state.amps = psi;
        state.time += dt;
        let drift = state.norm_sqr() - 1.0;
        if drift.abs() > 1e-8 {
            return Err(Error::Numerical(format!(
                "norm drift {drift:.2e} at t = {}",
                state.time
            )));
        }
        let edge = state.boundary_population();
        if edge > opts.breach {
            return Err(Error::TruncationBreach {
                time: state.time,
                population: edge,
            });
        }
        if sub > 1 {
            sub /= 2;
        }
    }
    Ok(state)
}

/// Projection of the qudit onto an ancilla: normalised drives state, success probability,
/// and the complementary probability.
#[derive(Clone, Debug)]
pub struct FockPes {
    pub state: TwoModeState,
    pub probability: f64,
    pub complement: f64,
}

pub fn pes_fock(state: &FockState, ancilla: &CVec) -> Result<FockPes> {
    if ancilla.len() != state.dim {
        return Err(Error::InvalidArgument("ancilla dimension mismatch".into()));
    }
    let mut out = TwoModeState::fock_window(state.n_max);
    for l in 0..state.dim {
        let c = ancilla[l].conj();
        let comp = state.component(l);
        out.amps
            .iter_mut()
            .zip(&comp.amps)
            .for_each(|(o, a)| *o += c * a);
    }
    let probability = out.norm_sqr();
    let complement = state.norm_sqr() - probability;
    if probability < 1e-12 {
        return Err(Error::ProjectionAnnihilated { probability });
    }
    out.normalize();
    Ok(FockPes {
        state: out,
        probability,
        complement,
    })
}
