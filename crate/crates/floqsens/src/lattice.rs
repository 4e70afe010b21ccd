//! Quantized drives in the phase-lattice approximation.
//!
//! With the bosonic ladder operators replaced by number translations, the drive modes are
//! diagonal in the drive-phase basis and every phase point evolves under its own classical
//! two-tone Floquet problem. A lattice state is a qudit spinor per grid point; number-basis
//! views are obtained by a unitary 2-D Fourier transform around the reference occupations.
//!
//! Drive phase φ and the number basis are related by |φ⟩ = Σ_n e^{−iφn}|n⟩ (the field phase
//! of the quantized mode is −φ). A drive that loses photons therefore transfers energy into
//! the qudit, and the number-space translation rate of band n is −∂_{φ_j}ε_n.

use crate::error::{Error, Result};
use crate::floquet::FloquetSpectrum;
use crate::linalg::{self, ZERO};
use crate::opspace::{number_to_phase, phase_to_number, NumberMoments, PhaseGrid, TwoModeState};
use crate::{CMat, CVec, C64};
use rayon::prelude::*;
use std::io::Write;

/// Which physical input a field distribution describes.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    /// All weight on the grid cell nearest to (φ₁₀, φ₂₀).
    CoherentDelta {
        phi10: f64,
        phi20: f64,
    },
    /// Product of coherent states: Poisson number profile of mean n_c with drive phases (φ₁₀, φ₂₀).
    Coherent {
        n_c: u64,
        phi10: f64,
        phi20: f64,
    },
    /// Product Fock state |n_c, n_c⟩: uniform |f|² = 1/4π².
    FockUniform,
    Custom,
}

/// Initial distribution f(φ₁, φ₂) of the drives over the phase grid, ∫|f|² = 1.
#[derive(Clone, Debug)]
pub struct FieldDistribution {
    pub grid: PhaseGrid,
    pub amplitudes: Vec<C64>,
    pub kind: FieldKind,
    /// Reference occupations (n₁c, n₂c) of the number window.
    pub occupancy: (u64, u64),
}

impl FieldDistribution {
    pub fn coherent_delta(grid: PhaseGrid, n_c: u64, phi10: f64, phi20: f64) -> Self {
        let mut amplitudes = vec![ZERO; grid.len()];
        let p = grid.index(grid.nearest(phi10) as isize, grid.nearest(phi20) as isize);
        amplitudes[p] = C64::new(1.0 / grid.cell_area().sqrt(), 0.0);
        Self {
            grid,
            amplitudes,
            kind: FieldKind::CoherentDelta { phi10, phi20 },
            occupancy: (n_c, n_c),
        }
    }

    /// Coherent product state with mean occupation n_c per mode, represented by its exact
    /// Poisson number profile on the lattice window.
    pub fn coherent(grid: PhaseGrid, n_c: u64, phi10: f64, phi20: f64) -> Result<Self> {
        let m = grid.m;
        let half = (m / 2) as i64;
        let profile = |phi0: f64| -> Vec<C64> {
            (0..m as i64)
                .map(|k| {
                    let rel = k - half;
                    let n = n_c as i64 + rel;
                    if n < 0 {
                        return ZERO;
                    }
                    C64::from_polar(
                        (0.5 * log_poisson(n as u64, n_c as f64)).exp(),
                        -phi0 * rel as f64,
                    )
                })
                .collect()
        };
        let c1 = profile(phi10);
        let c2 = profile(phi20);
        let captured: f64 = c1.iter().map(|z| z.norm_sqr()).sum::<f64>()
            * c2.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if captured < 1.0 - 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "phase grid of {m} points captures only {captured:.3e} of the coherent number profile; increase the grid size"
            )));
        }
        let mut state = TwoModeState::zeros([n_c as i64 - half, n_c as i64 - half], [m, m]);
        for i1 in 0..m {
            for i2 in 0..m {
                state.amps[i1 * m + i2] = c1[i1] * c2[i2];
            }
        }
        state.normalize();
        let field = number_to_drive_field(&grid, &state)?;
        let s = 1.0 / grid.cell_area().sqrt();
        Ok(Self {
            grid,
            amplitudes: field.into_iter().map(|z| z * s).collect(),
            kind: FieldKind::Coherent { n_c, phi10, phi20 },
            occupancy: (n_c, n_c),
        })
    }

    pub fn fock_uniform(grid: PhaseGrid, n_c: u64) -> Self {
        let v = C64::new(1.0 / (2.0 * std::f64::consts::PI), 0.0);
        Self {
            grid,
            amplitudes: vec![v; grid.len()],
            kind: FieldKind::FockUniform,
            occupancy: (n_c, n_c),
        }
    }

    /// Arbitrary amplitudes; normalised to ∫|f|² = 1.
    pub fn custom(
        grid: PhaseGrid,
        mut amplitudes: Vec<C64>,
        occupancy: (u64, u64),
    ) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                grid.len(),
                amplitudes.len()
            )));
        }
        let mass: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.cell_area();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidArgument(
                "field distribution has no weight".into(),
            ));
        }
        let s = C64::new(1.0 / mass.sqrt(), 0.0);
        amplitudes.iter_mut().for_each(|z| *z *= s);
        Ok(Self {
            grid,
            amplitudes,
            kind: FieldKind::Custom,
            occupancy,
        })
    }

    /// |f(φ_p)|².
    pub fn weight(&self, p: usize) -> f64 {
        self.amplitudes[p].norm_sqr()
    }

    /// Quadrature weight |f(φ_p)|² · (cell area); sums to one.
    pub fn quadrature_weight(&self, p: usize) -> f64 {
        self.weight(p) * self.grid.cell_area()
    }

    /// ∫|f|² (should be 1).
    pub fn total_weight(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| self.quadrature_weight(p))
            .sum()
    }

    /// Grid points carrying weight above `rel` of the maximum.
    pub fn support(&self, rel: f64) -> Vec<usize> {
        let max = (0..self.grid.len())
            .map(|p| self.weight(p))
            .fold(0.0, f64::max);
        (0..self.grid.len())
            .filter(|&p| self.weight(p) > rel * max)
            .collect()
    }

    /// Number-basis state of the drives alone.
    pub fn number_state(&self) -> Result<TwoModeState> {
        let s = C64::new(self.grid.cell_area().sqrt(), 0.0);
        let g: Vec<C64> = self.amplitudes.iter().map(|z| z * s).collect();
        drive_field_to_number(&self.grid, &g, self.occupancy)
    }
}

fn log_poisson(n: u64, lambda: f64) -> f64 {
    let mut l = -lambda;
    for k in 1..=n {
        l += lambda.ln() - (k as f64).ln();
    }
    l
}

/// Map index (i₁, i₂) → (−i₁, −i₂): drive phase ↔ field phase.
fn reflect(grid: &PhaseGrid, v: &[C64]) -> Vec<C64> {
    let m = grid.m as isize;
    (0..grid.len())
        .map(|p| {
            let (i, j) = grid.coords(p);
            v[grid.index(m - i as isize, m - j as isize)]
        })
        .collect()
}

/// Unit-norm drive-phase amplitudes → number amplitudes around the reference occupations.
pub fn drive_field_to_number(
    grid: &PhaseGrid,
    field: &[C64],
    occupancy: (u64, u64),
) -> Result<TwoModeState> {
    if field.len() != grid.len() {
        return Err(Error::InvalidArgument("field does not match grid".into()));
    }
    phase_to_number(grid, &reflect(grid, field), occupancy)
}

/// Inverse of [`drive_field_to_number`].
pub fn number_to_drive_field(grid: &PhaseGrid, state: &TwoModeState) -> Result<Vec<C64>> {
    Ok(reflect(grid, &number_to_phase(grid, state)?))
}

/// Functional power operator P̂_j[f] = ∫|f|² P̂_j(φ) with its eigen split.
#[derive(Clone, Debug)]
pub struct FunctionalPowerOperator {
    pub drive: usize,
    pub matrix: CMat,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    /// Indices into `eigenvalues` of W₊ (positive) and W₋ (negative), largest magnitude first.
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
    /// Eigenvalues that vanish within tolerance.
    pub null: Vec<usize>,
}

impl FunctionalPowerOperator {
    /// Qubit states (|0⟩_f, |1⟩_f) absorbing from / emitting into drive j.
    pub fn qubit_states(&self) -> Result<(CVec, CVec)> {
        if self.matrix.nrows() != 2 {
            return Err(Error::Unsupported(
                "qubit states requested for a qudit with d ≠ 2".into(),
            ));
        }
        Ok((
            self.eigenvectors.column(1).clone_owned(),
            self.eigenvectors.column(0).clone_owned(),
        ))
    }

    /// Number of free ancilla phases: one per eigenvector after the leading W₊ vector.
    pub fn free_phases(&self) -> usize {
        self.positive.len() + self.negative.len() + self.null.len() - 1
    }

    /// Residuals (|tr P|, ‖·‖) of tracelessness, for diagnostics.
    pub fn trace_residual(&self) -> f64 {
        linalg::trace(&self.matrix).norm()
    }
}

/// Weighted quadrature of the per-point power operators of drive j.
pub fn functional_power(
    spectrum: &FloquetSpectrum,
    f: &FieldDistribution,
    j: usize,
) -> Result<FunctionalPowerOperator> {
    if spectrum.grid != f.grid {
        return Err(Error::InvalidArgument(
            "spectrum and field distribution use different grids".into(),
        ));
    }
    if j != 1 && j != 2 {
        return Err(Error::InvalidArgument(format!(
            "drive index must be 1 or 2, got {j}"
        )));
    }
    let d = spectrum.dim;
    let support: Vec<usize> = (0..f.grid.len()).filter(|&p| f.weight(p) > 0.0).collect();
    let bad: Vec<usize> = support
        .iter()
        .copied()
        .filter(|&p| spectrum.resolved_quality[p] < 0.5)
        .collect();
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
    let mut matrix = CMat::zeros(d, d);
    let mut scale = 0.0;
    for &p in &support {
        let w = f.quadrature_weight(p);
        let pm = spectrum.power_matrix(p, j);
        scale += w * linalg::max_abs(&pm);
        matrix += pm * C64::new(w, 0.0);
    }
    let matrix = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
    let (eigenvalues, mut eigenvectors) = linalg::herm_eig(&matrix);
    fix_gauge(&mut eigenvectors);
    let max_abs = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 + 1e-7 * scale;
    if max_abs <= tol {
        return Err(Error::ZeroFunctionalPower { max_abs });
    }
    let mut positive: Vec<usize> = (0..d).filter(|&k| eigenvalues[k] > tol).collect();
    let mut negative: Vec<usize> = (0..d).filter(|&k| eigenvalues[k] < -tol).collect();
    positive.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
    negative.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
    let null: Vec<usize> = (0..d).filter(|&k| eigenvalues[k].abs() <= tol).collect();
    Ok(FunctionalPowerOperator {
        drive: j,
        matrix,
        eigenvalues,
        eigenvectors,
        positive,
        negative,
        null,
    })
}

/// Fix eigenvector phases: the overlap with the uniform superposition Σ_λ|λ⟩ is made real
/// and positive (falling back to the largest component when that overlap vanishes).
fn fix_gauge(vecs: &mut CMat) {
    for mut col in vecs.column_iter_mut() {
        let overlap: C64 = col.iter().map(|z| z.conj()).sum();
        let reference = if overlap.norm() > 1e-8 {
            overlap
        } else {
            col.iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap()
                .conj()
        };
        col *= C64::from_polar(1.0, reference.arg());
    }
}

/// Equal-weight superposition |β,±⟩_f over all eigenvectors. The leading W₊ vector carries
/// phase 1, the remaining vectors (rest of W₊, then W₋, then null vectors) carry e^{iβ_k};
/// `minus` flips the sign of W₋. Null vectors carry no power, so ⟨P̂_j[f]⟩ = tr P̂_j[f]/d = 0
/// for every choice of phases.
pub fn ancilla_state(p: &FunctionalPowerOperator, beta: &[f64], minus: bool) -> Result<CVec> {
    if p.positive.is_empty() {
        return Err(Error::EmptyEigenspace { which: "positive" });
    }
    if p.negative.is_empty() {
        return Err(Error::EmptyEigenspace { which: "negative" });
    }
    if beta.len() != p.free_phases() {
        return Err(Error::InvalidArgument(format!(
            "expected {} ancilla phases, got {}",
            p.free_phases(),
            beta.len()
        )));
    }
    let d = p.matrix.nrows();
    let total = (p.positive.len() + p.negative.len() + p.null.len()) as f64;
    let mut psi = CVec::zeros(d);
    let flip = if minus { -1.0 } else { 1.0 };
    let order: Vec<(usize, f64)> = p
        .positive
        .iter()
        .map(|&k| (k, 1.0))
        .chain(p.negative.iter().map(|&k| (k, flip)))
        .chain(p.null.iter().map(|&k| (k, flip)))
        .collect();
    for (slot, &(k, sign)) in order.iter().enumerate() {
        let phase = if slot == 0 { 0.0 } else { beta[slot - 1] };
        psi += p.eigenvectors.column(k) * C64::from_polar(sign / total.sqrt(), phase);
    }
    Ok(psi)
}

/// Joint drives ⊗ qudit state on the lattice: spinor `amps[p * dim + λ]`, unit norm.
#[derive(Clone, Debug)]
pub struct LatticeState {
    pub grid: PhaseGrid,
    pub dim: usize,
    pub amps: Vec<C64>,
    pub occupancy: (u64, u64),
    /// Elapsed time in units of T_com.
    pub periods: u64,
}

impl LatticeState {
    /// Product state f(φ) ⊗ |s⟩.
    pub fn product(f: &FieldDistribution, s: &CVec) -> Result<Self> {
        let nrm = s.norm();
        if (nrm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "qudit state not normalised (‖s‖ = {nrm})"
            )));
        }
        let d = s.len();
        let w = C64::new(f.grid.cell_area().sqrt(), 0.0);
        let mut amps = Vec::with_capacity(f.grid.len() * d);
        for a in &f.amplitudes {
            for l in 0..d {
                amps.push(a * w * s[l]);
            }
        }
        Ok(Self {
            grid: f.grid,
            dim: d,
            amps,
            occupancy: f.occupancy,
            periods: 0,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Drive-phase amplitudes of qudit level λ.
    pub fn component(&self, lambda: usize) -> Vec<C64> {
        self.amps
            .iter()
            .skip(lambda)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// Number-basis drives state of qudit level λ (not normalised).
    pub fn number_component(&self, lambda: usize) -> Result<TwoModeState> {
        drive_field_to_number(&self.grid, &self.component(lambda), self.occupancy)
    }

    /// Occupation moments of the full state, summed over qudit levels.
    pub fn number_moments(&self) -> Result<NumberMoments> {
        let mut total = NumberMoments::default();
        for l in 0..self.dim {
            total.merge(&self.number_component(l)?.number_moments());
        }
        Ok(total)
    }

    /// Reduced qudit density matrix (drives traced out).
    pub fn reduced_ancilla(&self) -> CMat {
        let d = self.dim;
        let mut rho = CMat::zeros(d, d);
        for chunk in self.amps.chunks(d) {
            for a in 0..d {
                for b in 0..d {
                    rho[(a, b)] += chunk[a] * chunk[b].conj();
                }
            }
        }
        rho
    }

    /// Probability within 1/16 of the number-window edges (wrap-around diagnostic).
    pub fn edge_mass(&self) -> Result<f64> {
        let mut total = 0.0;
        for l in 0..self.dim {
            total += edge_mass(&self.number_component(l)?);
        }
        Ok(total)
    }
}

/// Probability within 1/16 of the edges of a number window.
pub fn edge_mass(state: &TwoModeState) -> f64 {
    let band = |i: usize, n: usize| i < n / 16 || i >= n - n / 16;
    let mut m = 0.0;
    for i1 in 0..state.shape[0] {
        for i2 in 0..state.shape[1] {
            if band(i1, state.shape[0]) || band(i2, state.shape[1]) {
                m += state.amps[state.idx(i1, i2)].norm_sqr();
            }
        }
    }
    m
}

/// Stroboscopic evolution ψ(φ, kT_com) = U_φ(T_com)^k ψ(φ, 0) from the cached spectrum.
pub fn evolve_lattice(
    spectrum: &FloquetSpectrum,
    initial: &LatticeState,
    periods: u64,
) -> Result<LatticeState> {
    if spectrum.grid != initial.grid || spectrum.dim != initial.dim {
        return Err(Error::InvalidArgument(
            "lattice state does not match the spectrum grid or qudit dimension".into(),
        ));
    }
    let d = initial.dim;
    let k = periods as f64;
    let mut amps = initial.amps.clone();
    amps.par_chunks_mut(d).enumerate().for_each(|(p, chunk)| {
        let psi = CVec::from_column_slice(chunk);
        let out = spectrum.evolve_point(p, k, &psi);
        chunk.copy_from_slice(out.as_slice());
    });
    Ok(LatticeState {
        amps,
        periods: initial.periods + periods,
        ..initial.clone()
    })
}

/// Drives state after projecting the qudit onto an ancilla state.
#[derive(Clone, Debug)]
pub struct PesState {
    pub grid: PhaseGrid,
    /// Normalised drive-phase amplitudes.
    pub field: Vec<C64>,
    pub occupancy: (u64, u64),
    pub probability: f64,
    pub periods: u64,
}

impl PesState {
    pub fn number_state(&self) -> Result<TwoModeState> {
        drive_field_to_number(&self.grid, &self.field, self.occupancy)
    }
}

/// Project the qudit factor onto `ancilla`; returns the normalised drives state and N_T².
pub fn project_pes(state: &LatticeState, ancilla: &CVec) -> Result<PesState> {
    if ancilla.len() != state.dim {
        return Err(Error::InvalidArgument("ancilla dimension mismatch".into()));
    }
    let mut field: Vec<C64> = state
        .amps
        .chunks(state.dim)
        .map(|c| (0..state.dim).map(|l| ancilla[l].conj() * c[l]).sum())
        .collect();
    let probability: f64 = field.iter().map(|z| z.norm_sqr()).sum::<f64>() / ancilla.norm_squared();
    if probability < 1e-12 {
        return Err(Error::ProjectionAnnihilated { probability });
    }
    let s = C64::new(1.0 / (probability * ancilla.norm_squared()).sqrt(), 0.0);
    field.iter_mut().for_each(|z| *z *= s);
    Ok(PesState {
        grid: state.grid,
        field,
        occupancy: state.occupancy,
        probability,
        periods: state.periods,
    })
}

/// Uhlmann fidelity of the reduced qudit state to a pure reference.
pub fn reduced_ancilla_fidelity(state: &LatticeState, reference: &CVec) -> f64 {
    let sigma = reference * reference.adjoint();
    linalg::uhlmann_fidelity(&state.reduced_ancilla(), &sigma)
}

/// Mode-2 number profile rows (T, n2, probability) for a sequence of states.
pub fn write_profile_csv<W: Write>(mut w: W, rows: &[(f64, TwoModeState)]) -> std::io::Result<()> {
    writeln!(w, "T,n2,probability")?;
    for (t, state) in rows {
        let norm = state.norm_sqr();
        for (n2, p) in state.marginal(2) {
            writeln!(w, "{},{},{}", t, n2, p / norm)?;
        }
    }
    Ok(())
}
