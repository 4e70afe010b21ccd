//! Operator and state algebra shared by the whole pipeline.
//!
//! * Qudit operators are dense `d×d` complex matrices ([`QuditOperator`]).
//! * Two-mode bosonic operators act on the truncated product basis
//!   `|n₁, n₂⟩`, `0 ≤ n_j ≤ n_max`, flattened as `n₁·(n_max+1) + n₂` ([`TwoModeOperator`]).
//! * Two-mode states live on a rectangular window of absolute occupations that may start
//!   at negative values (the phase-lattice picture extends occupations to ±∞)
//!   ([`TwoModeState`]).
//!
//! Fourier convention: a field-phase ket is `|ϑ⟩ = Σ_n e^{iϑn}|n⟩`, so a phase-space
//! amplitude `a(ϑ)` maps to number amplitudes `c(m) = m⁻¹ᐟ² Σ_k a(ϑ_k) e^{iϑ_k m}` per axis
//! and the number operator acts on amplitudes as `i∂_ϑ`.

use crate::error::{Error, Result};
use crate::linalg::{self, I, ONE, ZERO};
use crate::{CMat, CVec, C64};
use rustfft::FftPlanner;
use sprs::{CsMat, TriMat};
use std::str::FromStr;

// ---------------------------------------------------------------------------
// Qudit operators
// ---------------------------------------------------------------------------

/// Dense qudit operator with an optional Hermiticity tag.
#[derive(Clone, Debug)]
pub struct QuditOperator {
    pub matrix: CMat,
    pub hermitian: bool,
}

impl QuditOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "qudit operator must be square with dim ≥ 2, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            matrix,
            hermitian: false,
        })
    }

    /// Build a Hermitian-tagged operator; fails if ‖A − A†‖_max ≥ 1e−12.
    pub fn hermitian(matrix: CMat) -> Result<Self> {
        let op = Self::new(matrix)?;
        let r = linalg::hermiticity_residual(&op.matrix);
        if r >= 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "operator is not Hermitian (residual {r:.3e})"
            )));
        }
        Ok(Self {
            hermitian: true,
            ..op
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// |a⟩⟨b| in dimension d.
pub fn ket_bra(d: usize, a: usize, b: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(a, b)] = ONE;
    m
}

/// Computational basis vector |k⟩ in dimension d.
pub fn basis_vector(d: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[k] = ONE;
    v
}

// ---------------------------------------------------------------------------
// Phase grid
// ---------------------------------------------------------------------------

/// Uniform grid over the drive-phase Brillouin zone [0, 2π)², m points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseGrid {
    pub m: usize,
}

impl PhaseGrid {
    pub const DEFAULT_POINTS: usize = 128;

    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "phase grid size must be a power of two ≥ 4, got {m}"
            )));
        }
        Ok(Self { m })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.m as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    pub fn phase(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of grid point (i₁, i₂), indices taken modulo m.
    pub fn index(&self, i1: isize, i2: isize) -> usize {
        let m = self.m as isize;
        (i1.rem_euclid(m) * m + i2.rem_euclid(m)) as usize
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p / self.m, p % self.m)
    }

    pub fn phases(&self, p: usize) -> (f64, f64) {
        let (i, j) = self.coords(p);
        (self.phase(i), self.phase(j))
    }

    /// Nearest grid index for an arbitrary phase.
    pub fn nearest(&self, phi: f64) -> usize {
        let k = (phi.rem_euclid(2.0 * std::f64::consts::PI) / self.spacing()).round() as usize;
        k % self.m
    }
}

// ---------------------------------------------------------------------------
// Two-mode states
// ---------------------------------------------------------------------------

/// Two-mode pure state on a rectangular window of absolute occupations
/// `n_j = origin_j + i_j`, `0 ≤ i_j < shape_j`, stored row-major in `(i₁, i₂)`.
#[derive(Clone, Debug)]
pub struct TwoModeState {
    pub origin: [i64; 2],
    pub shape: [usize; 2],
    pub amps: Vec<C64>,
}

impl TwoModeState {
    pub fn zeros(origin: [i64; 2], shape: [usize; 2]) -> Self {
        Self {
            origin,
            shape,
            amps: vec![ZERO; shape[0] * shape[1]],
        }
    }

    /// Window covering `0..=n_max` in both modes.
    pub fn fock_window(n_max: usize) -> Self {
        Self::zeros([0, 0], [n_max + 1, n_max + 1])
    }

    pub fn idx(&self, i1: usize, i2: usize) -> usize {
        i1 * self.shape[1] + i2
    }

    /// Amplitude at absolute occupations, zero outside the window.
    pub fn get(&self, n1: i64, n2: i64) -> C64 {
        let i1 = n1 - self.origin[0];
        let i2 = n2 - self.origin[1];
        if i1 < 0 || i2 < 0 || i1 as usize >= self.shape[0] || i2 as usize >= self.shape[1] {
            return ZERO;
        }
        self.amps[self.idx(i1 as usize, i2 as usize)]
    }

    pub fn set(&mut self, n1: i64, n2: i64, v: C64) {
        let i1 = (n1 - self.origin[0]) as usize;
        let i2 = (n2 - self.origin[1]) as usize;
        let k = self.idx(i1, i2);
        self.amps[k] = v;
    }

    /// |n₁, n₂⟩ on the window 0..=n_max.
    pub fn fock(n1: usize, n2: usize, n_max: usize) -> Self {
        let mut s = Self::fock_window(n_max);
        s.set(n1 as i64, n2 as i64, ONE);
        s
    }

    /// (|N,0⟩ + |0,N⟩)/√2.
    pub fn noon(n: usize, n_max: usize) -> Self {
        let mut s = Self::fock_window(n_max.max(n));
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        s.set(n as i64, 0, a);
        s.set(0, n as i64, a);
        s
    }

    /// Twin-Fock state after a balanced splitter: e^{iπ/4(a₁†a₂+a₂†a₁)}|N/2, N/2⟩.
    pub fn twin_fock_split(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "twin-Fock needs even N, got {n}"
            )));
        }
        let block = NumberBlock::new(n);
        let jx = block.jx();
        // a₁†a₂ + a₂†a₁ = 2Ĵx, so the splitter is exp(iπ/2 Ĵx) = exp(−i(−Ĵx)π/2).
        let u = linalg::expm_herm(&(-jx), std::f64::consts::FRAC_PI_2);
        let mut v = CVec::zeros(n + 1);
        v[n / 2] = ONE;
        let out = u * v;
        let mut s = Self::fock_window(n);
        for (k, &c) in out.iter().enumerate() {
            s.set(k as i64, (n - k) as i64, c);
        }
        Ok(s)
    }

    /// Product of two coherent states truncated at n_max and renormalised.
    pub fn coherent_product(alpha1: C64, alpha2: C64, n_max: usize) -> Self {
        let c1 = coherent_amplitudes(alpha1, n_max);
        let c2 = coherent_amplitudes(alpha2, n_max);
        let mut s = Self::fock_window(n_max);
        for i in 0..=n_max {
            for j in 0..=n_max {
                let k = s.idx(i, j);
                s.amps[k] = c1[i] * c2[j];
            }
        }
        s.normalize();
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for z in &mut self.amps {
                *z /= n;
            }
        }
        n
    }

    /// Iterate `(n₁, n₂, amplitude)`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        let (o1, o2, s2) = (self.origin[0], self.origin[1], self.shape[1]);
        self.amps
            .iter()
            .enumerate()
            .map(move |(k, &a)| (o1 + (k / s2) as i64, o2 + (k % s2) as i64, a))
    }

    /// Moments (⟨n₁⟩, ⟨n₂⟩, ⟨n₁²⟩, ⟨n₂²⟩, ⟨n₁n₂⟩) of a normalised state.
    pub fn number_moments(&self) -> NumberMoments {
        let mut m = NumberMoments::default();
        for (n1, n2, a) in self.iter() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let (x, y) = (n1 as f64, n2 as f64);
            m.n1 += p * x;
            m.n2 += p * y;
            m.n1_sq += p * x * x;
            m.n2_sq += p * y * y;
            m.n1n2 += p * x * y;
            m.norm += p;
        }
        m
    }

    /// Marginal number distribution of mode `mode` (1 or 2) as (n, probability) pairs.
    pub fn marginal(&self, mode: usize) -> Vec<(i64, f64)> {
        let (len, origin) = if mode == 1 {
            (self.shape[0], self.origin[0])
        } else {
            (self.shape[1], self.origin[1])
        };
        let mut out: Vec<(i64, f64)> = (0..len).map(|i| (origin + i as i64, 0.0)).collect();
        for i1 in 0..self.shape[0] {
            for i2 in 0..self.shape[1] {
                let p = self.amps[self.idx(i1, i2)].norm_sqr();
                let k = if mode == 1 { i1 } else { i2 };
                out[k].1 += p;
            }
        }
        out
    }

    /// Re-express on the 0..=n_max Fock window (entries outside must be negligible).
    pub fn to_fock_window(&self, n_max: usize) -> (Self, f64) {
        let mut out = Self::fock_window(n_max);
        let mut dropped = 0.0;
        for (n1, n2, a) in self.iter() {
            if n1 >= 0 && n2 >= 0 && n1 as usize <= n_max && n2 as usize <= n_max {
                out.set(n1, n2, a);
            } else {
                dropped += a.norm_sqr();
            }
        }
        (out, dropped)
    }

    /// Inner product ⟨self|other⟩ over the common window.
    pub fn inner(&self, other: &TwoModeState) -> C64 {
        self.iter()
            .map(|(n1, n2, a)| a.conj() * other.get(n1, n2))
            .sum()
    }
}

/// Moments of the two occupation numbers.
#[derive(Clone, Copy, Debug, Default)]
pub struct NumberMoments {
    pub norm: f64,
    pub n1: f64,
    pub n2: f64,
    pub n1_sq: f64,
    pub n2_sq: f64,
    pub n1n2: f64,
}

impl NumberMoments {
    /// Accumulate the (unnormalised) sums of another component.
    pub fn merge(&mut self, other: &NumberMoments) {
        self.norm += other.norm;
        self.n1 += other.n1;
        self.n2 += other.n2;
        self.n1_sq += other.n1_sq;
        self.n2_sq += other.n2_sq;
        self.n1n2 += other.n1n2;
    }

    pub fn mean_n(&self, mode: usize) -> f64 {
        if mode == 1 {
            self.n1 / self.norm
        } else {
            self.n2 / self.norm
        }
    }

    pub fn mean_jz(&self) -> f64 {
        0.5 * (self.n1 - self.n2) / self.norm
    }

    pub fn var_jz(&self) -> f64 {
        let n = self.norm;
        let e2 = 0.25 * (self.n1_sq + self.n2_sq - 2.0 * self.n1n2) / n;
        let e1 = self.mean_jz();
        (e2 - e1 * e1).max(0.0)
    }

    /// K = −2[⟨n₁n₂⟩ − ⟨n₁⟩⟨n₂⟩].
    pub fn covariance_k(&self) -> f64 {
        let n = self.norm;
        -2.0 * (self.n1n2 / n - (self.n1 / n) * (self.n2 / n))
    }
}

/// Truncated coherent-state amplitudes e^{−|α|²/2} αⁿ/√n! for n = 0..=n_max (not renormalised).
pub fn coherent_amplitudes(alpha: C64, n_max: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

// ---------------------------------------------------------------------------
// Fixed-N block (dense helper for oracles and reference states)
// ---------------------------------------------------------------------------

/// Dense operators on the fixed total-number block {|k, N−k⟩ : k = 0..=N}.
pub struct NumberBlock {
    pub n: usize,
}

impl NumberBlock {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    /// Ĵx = (a₁†a₂ + a₂†a₁)/2 with basis index k = n₁.
    pub fn jx(&self) -> CMat {
        let d = self.n + 1;
        let mut m = CMat::zeros(d, d);
        for k in 0..self.n {
            // a₁†a₂ |k, N−k⟩ = √((k+1)(N−k)) |k+1, N−k−1⟩
            let v = 0.5 * (((k + 1) * (self.n - k)) as f64).sqrt();
            m[(k + 1, k)] = C64::new(v, 0.0);
            m[(k, k + 1)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn jz(&self) -> CMat {
        let d = self.n + 1;
        CMat::from_diagonal(&CVec::from_iterator(
            d,
            (0..d).map(|k| C64::new(k as f64 - 0.5 * self.n as f64, 0.0)),
        ))
    }
}

// ---------------------------------------------------------------------------
// Two-mode operators
// ---------------------------------------------------------------------------

/// Component of the Schwinger angular momentum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidArgument(format!(
                "invalid angular-momentum kind '{other}' (expected x, y or z)"
            ))),
        }
    }
}

/// Operator on the truncated two-mode basis, either diagonal in number or sparse.
#[derive(Clone, Debug)]
pub enum TwoModeRepr {
    Diagonal(Vec<C64>),
    Sparse(CsMat<C64>),
}

#[derive(Clone, Debug)]
pub struct TwoModeOperator {
    pub n_max: usize,
    pub repr: TwoModeRepr,
}

impl TwoModeOperator {
    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n_max + 1) + n2
    }

    /// Diagonal operator from a closure of (n₁, n₂).
    pub fn diagonal(n_max: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut d = Vec::with_capacity((n_max + 1) * (n_max + 1));
        for n1 in 0..=n_max {
            for n2 in 0..=n_max {
                d.push(f(n1, n2));
            }
        }
        Self {
            n_max,
            repr: TwoModeRepr::Diagonal(d),
        }
    }

    fn sparse(n_max: usize, entries: Vec<(usize, usize, C64)>) -> Self {
        let dim = (n_max + 1) * (n_max + 1);
        let mut tri = TriMat::new((dim, dim));
        for (r, c, v) in entries {
            tri.add_triplet(r, c, v);
        }
        Self {
            n_max,
            repr: TwoModeRepr::Sparse(tri.to_csr()),
        }
    }

    /// y = A x on the flattened basis.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match &self.repr {
            TwoModeRepr::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            TwoModeRepr::Sparse(m) => {
                let mut y = vec![ZERO; m.rows()];
                for (r, row) in m.outer_iterator().enumerate() {
                    let mut acc = ZERO;
                    for (c, v) in row.iter() {
                        acc += v * x[c];
                    }
                    y[r] = acc;
                }
                y
            }
        }
    }

    pub fn to_dense(&self) -> CMat {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        match &self.repr {
            TwoModeRepr::Diagonal(d) => {
                for (k, v) in d.iter().enumerate() {
                    out[(k, k)] = *v;
                }
            }
            TwoModeRepr::Sparse(m) => {
                for (v, (r, c)) in m.iter() {
                    out[(r, c)] += *v;
                }
            }
        }
        out
    }

    /// ⟨ψ|A|ψ⟩ for a state on the 0..=n_max window.
    pub fn expectation(&self, psi: &TwoModeState) -> Result<C64> {
        let x = self.flatten(psi)?;
        let y = self.apply(&x);
        Ok(x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn flatten(&self, psi: &TwoModeState) -> Result<Vec<C64>> {
        if psi.origin != [0, 0] || psi.shape != [self.n_max + 1, self.n_max + 1] {
            return Err(Error::InvalidArgument(
                "state window does not match operator truncation".into(),
            ));
        }
        Ok(psi.amps.clone())
    }

    /// True if the operator never connects different total-number sectors.
    pub fn conserves_total_number(&self) -> bool {
        match &self.repr {
            TwoModeRepr::Diagonal(_) => true,
            TwoModeRepr::Sparse(m) => {
                let s = self.n_max + 1;
                m.iter()
                    .all(|(v, (r, c))| v.norm() == 0.0 || (r / s + r % s) == (c / s + c % s))
            }
        }
    }
}

/// Annihilation operator of mode 1 or 2 (the n_max → n_max+1 element is dropped).
pub fn annihilation(mode: usize, n_max: usize) -> Result<TwoModeOperator> {
    if mode != 1 && mode != 2 {
        return Err(Error::InvalidArgument(format!(
            "mode must be 1 or 2, got {mode}"
        )));
    }
    let s = n_max + 1;
    let mut e = Vec::new();
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            let (n, target) = if mode == 1 {
                (n1, (n1 as isize - 1, n2 as isize))
            } else {
                (n2, (n1 as isize, n2 as isize - 1))
            };
            if n == 0 {
                continue;
            }
            e.push((
                (target.0 as usize) * s + target.1 as usize,
                n1 * s + n2,
                C64::new((n as f64).sqrt(), 0.0),
            ));
        }
    }
    Ok(TwoModeOperator::sparse(n_max, e))
}

/// Number operator of mode 1 or 2.
pub fn number(mode: usize, n_max: usize) -> TwoModeOperator {
    TwoModeOperator::diagonal(n_max, move |n1, n2| {
        C64::new(if mode == 1 { n1 } else { n2 } as f64, 0.0)
    })
}

/// Truncated Schwinger operators Ĵx = (a₁†a₂+a₂†a₁)/2, Ĵy = (a₁†a₂−a₂†a₁)/(2i), Ĵz = (n₁−n₂)/2.
pub fn build_angular_momentum(kind: Axis, n_max: usize) -> Result<TwoModeOperator> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be ≥ 1".into()));
    }
    if kind == Axis::Z {
        return Ok(TwoModeOperator::diagonal(n_max, |n1, n2| {
            C64::new(0.5 * (n1 as f64 - n2 as f64), 0.0)
        }));
    }
    let s = n_max + 1;
    let mut e = Vec::new();
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            // a₁†a₂ |n₁,n₂⟩ = √((n₁+1)n₂) |n₁+1, n₂−1⟩
            if n2 > 0 && n1 < n_max {
                let v = (((n1 + 1) * n2) as f64).sqrt();
                let (from, to) = (n1 * s + n2, (n1 + 1) * s + n2 - 1);
                let (up, down) = match kind {
                    Axis::X => (C64::new(0.5 * v, 0.0), C64::new(0.5 * v, 0.0)),
                    // (a₁†a₂ − a₂†a₁)/(2i): a₁†a₂ carries −i/2, its adjoint +i/2.
                    Axis::Y => (C64::new(0.0, -0.5 * v), C64::new(0.0, 0.5 * v)),
                    Axis::Z => unreachable!(),
                };
                e.push((to, from, up));
                e.push((from, to, down));
            }
        }
    }
    Ok(TwoModeOperator::sparse(n_max, e))
}

/// Mode swap Ŝ|n₁,n₂⟩ = |n₂,n₁⟩.
pub fn swap(n_max: usize) -> TwoModeOperator {
    let s = n_max + 1;
    let mut e = Vec::new();
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            e.push((n2 * s + n1, n1 * s + n2, ONE));
        }
    }
    TwoModeOperator::sparse(n_max, e)
}

/// Output-port parity Π̂ = (−1)^{n₂}.
pub fn parity(n_max: usize) -> TwoModeOperator {
    TwoModeOperator::diagonal(n_max, |_, n2| {
        C64::new(if n2 % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    })
}

/// ⟨Π̂_θ̃⟩ = Σ ψ*(n₁,n₂) e^{iθ̃(n₁−n₂)} ψ(n₂,n₁).
pub fn parity_swap_expectation(state: &TwoModeState, theta: f64) -> Result<C64> {
    Ok(parity_swap_with_derivative(state, theta)?.0)
}

/// ⟨Π̂_θ̃⟩ together with its exact θ̃-derivative Σ ψ* i(n₁−n₂) e^{iθ̃(n₁−n₂)} ψ(n₂,n₁).
pub fn parity_swap_with_derivative(state: &TwoModeState, theta: f64) -> Result<(C64, C64)> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "state is not normalised (norm² = {norm:.12})"
        )));
    }
    let kernel = swap_kernel(state)?;
    let mut val = ZERO;
    let mut der = ZERO;
    for (d, w) in kernel {
        let ph = C64::from_polar(1.0, theta * d as f64);
        val += w * ph;
        der += w * ph * I * d as f64;
    }
    Ok((val, der))
}

/// Collapse Σ ψ*(n₁,n₂)ψ(n₂,n₁) by the difference d = n₁−n₂, so that
/// ⟨Π̂_θ̃⟩ = Σ_d w_d e^{iθ̃d}. Requires a swap-symmetric window.
pub fn swap_kernel(state: &TwoModeState) -> Result<Vec<(i64, C64)>> {
    if state.origin[0] != state.origin[1] || state.shape[0] != state.shape[1] {
        return Err(Error::InvalidArgument(
            "parity readout needs equal occupation windows for both modes".into(),
        ));
    }
    let s = state.shape[0];
    let mut w = vec![ZERO; 2 * s - 1];
    for i1 in 0..s {
        for i2 in 0..s {
            let a = state.amps[i1 * s + i2];
            if a == ZERO {
                continue;
            }
            let b = state.amps[i2 * s + i1];
            w[(i1 as isize - i2 as isize + s as isize - 1) as usize] += a.conj() * b;
        }
    }
    Ok(w.into_iter()
        .enumerate()
        .filter(|(_, v)| *v != ZERO)
        .map(|(k, v)| (k as i64 - (s as i64 - 1), v))
        .collect())
}

// ---------------------------------------------------------------------------
// Phase ↔ number transforms
// ---------------------------------------------------------------------------

/// Unitary 2-D transform from field-phase amplitudes on the grid to number amplitudes.
/// Relative occupations m ∈ [−m/2, m/2) per axis; absolute n_j = n_jc + m_j.
pub fn phase_to_number(
    grid: &PhaseGrid,
    field: &[C64],
    offsets: (u64, u64),
) -> Result<TwoModeState> {
    let m = grid.m;
    if field.len() != m * m {
        return Err(Error::InvalidArgument(format!(
            "field has {} samples, grid needs {}",
            field.len(),
            m * m
        )));
    }
    let mut data = field.to_vec();
    fft2(&mut data, m, true);
    let scale = 1.0 / m as f64;
    let half = m / 2;
    let mut out = TwoModeState::zeros(
        [
            offsets.0 as i64 - half as i64,
            offsets.1 as i64 - half as i64,
        ],
        [m, m],
    );
    for i1 in 0..m {
        for i2 in 0..m {
            // FFT bin k ↔ relative occupation k (k < m/2) or k − m.
            let o1 = (i1 + half) % m;
            let o2 = (i2 + half) % m;
            out.amps[o1 * m + o2] = data[i1 * m + i2] * scale;
        }
    }
    Ok(out)
}

/// Inverse of [`phase_to_number`].
pub fn number_to_phase(grid: &PhaseGrid, state: &TwoModeState) -> Result<Vec<C64>> {
    let m = grid.m;
    if state.shape != [m, m] {
        return Err(Error::InvalidArgument(
            "number window does not match grid".into(),
        ));
    }
    let half = m / 2;
    let mut data = vec![ZERO; m * m];
    for i1 in 0..m {
        for i2 in 0..m {
            data[i1 * m + i2] = state.amps[((i1 + half) % m) * m + (i2 + half) % m];
        }
    }
    fft2(&mut data, m, false);
    let scale = 1.0 / m as f64;
    data.iter_mut().for_each(|z| *z *= scale);
    Ok(data)
}

/// In-place 2-D FFT of an m×m row-major array. `inverse` selects the e^{+i} kernel.
fn fft2(data: &mut [C64], m: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![ZERO; m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_vec(s: &TwoModeState) -> CVec {
        CVec::from_vec(s.amps.clone())
    }

    #[test]
    fn jz_eigenvalue_on_single_excitation() {
        let jz = build_angular_momentum(Axis::Z, 2).unwrap();
        let s = TwoModeState::fock(1, 0, 2);
        assert!((jz.expectation(&s).unwrap().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jx_moves_excitation_between_modes() {
        let jx = build_angular_momentum(Axis::X, 2).unwrap();
        let s = TwoModeState::fock(1, 0, 2);
        let out = jx.apply(&s.amps);
        let expect = TwoModeState::fock(0, 1, 2);
        for (a, b) in out.iter().zip(&expect.amps) {
            assert!((a - b * 0.5).norm() < 1e-15);
        }
    }

    #[test]
    fn jy_squared_on_twin_number_state() {
        // Brute-force ⟨Jy²⟩ on |2,2⟩ from the dense matrix; the j = N/2, m = 0 value is N(N+2)/8 = 3.
        let n_max = 4;
        let jy = build_angular_momentum(Axis::Y, n_max).unwrap().to_dense();
        let v = dense_vec(&TwoModeState::fock(2, 2, n_max));
        let val = (v.adjoint() * &jy * &jy * &v)[(0, 0)].re;
        assert!((val - 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_kind_rejected() {
        assert!("w".parse::<Axis>().is_err());
        assert!(build_angular_momentum(Axis::X, 0).is_err());
    }

    #[test]
    fn su2_commutator_in_each_block() {
        let n_max = 6;
        let jx = build_angular_momentum(Axis::X, n_max).unwrap().to_dense();
        let jy = build_angular_momentum(Axis::Y, n_max).unwrap().to_dense();
        let jz = build_angular_momentum(Axis::Z, n_max).unwrap().to_dense();
        let comm = &jx * &jy - &jy * &jx;
        let s = n_max + 1;
        // Compare on states whose total number keeps the ladder inside the truncation.
        for n1 in 0..=n_max {
            for n2 in 0..=n_max {
                if n1 + n2 > n_max {
                    continue;
                }
                let k = n1 * s + n2;
                let r = comm.column(k) - jz.column(k) * I;
                assert!(r.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn number_conserving_operators_are_block_diagonal() {
        for kind in [Axis::X, Axis::Y, Axis::Z] {
            assert!(build_angular_momentum(kind, 5)
                .unwrap()
                .conserves_total_number());
        }
        assert!(swap(5).conserves_total_number());
        assert!(parity(5).conserves_total_number());
        assert!(!annihilation(1, 5).unwrap().conserves_total_number());
    }

    #[test]
    fn swap_squares_to_identity() {
        let s = swap(5).to_dense();
        let d = s.nrows();
        assert!(linalg::max_abs(&(&s * &s - CMat::identity(d, d))) < 1e-15);
    }

    #[test]
    fn ladder_modes_commute() {
        let n_max = 5;
        let a1 = annihilation(1, n_max).unwrap().to_dense();
        let a2d = annihilation(2, n_max).unwrap().to_dense().adjoint();
        assert!(linalg::max_abs(&(&a1 * &a2d - &a2d * &a1)) < 1e-14);
    }

    #[test]
    fn parity_after_splitter_is_phased_swap() {
        // U_θ† U_de† Π U_de U_θ = e^{2iĴz(θ−π/2)} Ŝ up to a global phase fixed by N, checked per N-block.
        for n in 0..=8usize {
            let block = NumberBlock::new(n);
            let jx = block.jx();
            let jz = block.jz();
            let u_de = linalg::expm_herm(&jx, std::f64::consts::FRAC_PI_2);
            let par = CMat::from_diagonal(&CVec::from_iterator(
                n + 1,
                (0..=n).map(|k| C64::new(if (n - k) % 2 == 0 { 1.0 } else { -1.0 }, 0.0)),
            ));
            let sw = CMat::from_fn(n + 1, n + 1, |r, c| if r + c == n { ONE } else { ZERO });
            for theta in [0.0, 0.37, 1.9] {
                let u_t = linalg::expm_herm(&jz, theta);
                let lhs = u_t.adjoint() * u_de.adjoint() * &par * &u_de * &u_t;
                let rhs_phase =
                    linalg::expm_herm(&jz, -2.0 * (theta - std::f64::consts::FRAC_PI_2));
                let rhs = rhs_phase * &sw;
                let mut rng = ChaCha8Rng::seed_from_u64(n as u64 + 17);
                let v = CVec::from_iterator(
                    n + 1,
                    (0..=n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
                )
                .normalize();
                let res = (&lhs * &v - &rhs * &v).norm();
                assert!(res < 1e-8, "N={n} θ={theta}: residual {res}");
            }
        }
    }

    #[test]
    fn noon_parity_oscillates_with_n() {
        let s = TwoModeState::noon(4, 4);
        let v = parity_swap_expectation(&s, std::f64::consts::PI / 8.0).unwrap();
        assert!(v.norm() < 1e-14);
        let w = parity_swap_expectation(&s, 0.3).unwrap();
        assert!((w.re - (4.0f64 * 0.3).cos()).abs() < 1e-14);
    }

    #[test]
    fn twin_number_state_has_unit_parity() {
        for n in 0..4 {
            let s = TwoModeState::fock(n, n, 4);
            for th in [0.0, 0.5, 2.0] {
                assert!((parity_swap_expectation(&s, th).unwrap() - ONE).norm() < 1e-14);
            }
        }
        let s = TwoModeState::fock(1, 0, 2);
        assert!(parity_swap_expectation(&s, 0.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn constant_phase_amplitude_maps_to_origin() {
        let grid = PhaseGrid::new(16).unwrap();
        let a = C64::new(1.0 / 16.0, 0.0);
        let field = vec![a; 256];
        let s = phase_to_number(&grid, &field, (10, 10)).unwrap();
        assert!((s.get(10, 10).norm() - 1.0).abs() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_fourier_mode_lands_on_minus_one() {
        let grid = PhaseGrid::new(16).unwrap();
        let mut field = vec![ZERO; 256];
        for p in 0..256 {
            let (t1, _) = grid.phases(p);
            field[p] = C64::from_polar(1.0 / 16.0, t1);
        }
        let s = phase_to_number(&grid, &field, (20, 20)).unwrap();
        assert!((s.get(19, 20).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trip_is_identity() {
        let grid = PhaseGrid::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = TwoModeState::zeros([-16, -16], [32, 32]);
        for a in &mut st.amps {
            *a = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        st.normalize();
        let phase = number_to_phase(&grid, &st).unwrap();
        let norm: f64 = phase.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let back = phase_to_number(&grid, &phase, (0, 0)).unwrap();
        for (a, b) in back.amps.iter().zip(&st.amps) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mean_jz_agrees_with_direct_phase_space_derivative() {
        // ⟨n_j⟩ relative to the offset is ⟨a| i∂_ϑ |a⟩; evaluate the derivative by the
        // explicit trigonometric-interpolation sum (no FFT) and compare.
        let m = 16;
        let grid = PhaseGrid::new(m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut field: Vec<C64> = (0..m * m)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let nrm: f64 = field.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        field.iter_mut().for_each(|z| *z /= nrm);
        let s = phase_to_number(&grid, &field, (0, 0)).unwrap();
        let direct = s.number_moments().mean_jz();
        let rel = |k: usize| {
            if k < m / 2 {
                k as f64
            } else {
                k as f64 - m as f64
            }
        };
        // D_{kl} = (1/m) Σ_q (−i q) e^{−iϑ_k q} e^{iϑ_l q} applied along one axis; amplitudes carry e^{−iϑ q}.
        let deriv = |axis: usize| -> f64 {
            let mut acc = 0.0;
            for k1 in 0..m {
                for k2 in 0..m {
                    let mut d = ZERO;
                    for l in 0..m {
                        let (src, kk) = if axis == 0 {
                            (l * m + k2, k1)
                        } else {
                            (k1 * m + l, k2)
                        };
                        let mut w = ZERO;
                        for q in 0..m {
                            let qq = rel(q);
                            w += C64::new(0.0, -qq)
                                * C64::from_polar(1.0, -grid.phase(kk) * qq + grid.phase(l) * qq);
                        }
                        d += w * field[src] / m as f64;
                    }
                    acc += (field[k1 * m + k2].conj() * I * d).re;
                }
            }
            acc
        };
        let spectral = 0.5 * (deriv(0) - deriv(1));
        assert!((spectral - direct).abs() < 1e-9, "{spectral} vs {direct}");
    }

    #[test]
    fn twin_fock_state_variance() {
        let s = TwoModeState::twin_fock_split(4).unwrap();
        let m = s.number_moments();
        assert!((4.0 * m.var_jz() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_moments() {
        let amps = coherent_amplitudes(C64::new(2.0, 0.0), 30);
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let mean: f64 = amps
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.norm_sqr())
            .sum::<f64>()
            / norm;
        assert!((mean - 4.0).abs() < 1e-6);
    }
}
