//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p floqsens --test acceptance`. Set
//! `FLOQSENS_ACCEPT=1,7,8` to run a subset. The report always exits with status 0 so that
//! the full table is printed; the verdicts are in the output.

use floqsens::channels::{
    bayesian_improvement, detuned_parity, loss_sweep, noisy_energy_transfer, NoiseKind, NoiseSpec,
    PriorModel, TwoModeDensity,
};
use floqsens::fit::ols;
use floqsens::floquet::{
    circular_closed_form, fold, gallery, model_library, power_operator, quasienergies,
    FloquetSpectrum, ModelParams, TwoToneModel,
};
use floqsens::fock::{evolve_fock, pes_fock, quantize, FockState, KrylovOptions};
use floqsens::lattice::{
    ancilla_state, evolve_lattice, functional_power, project_pes, reduced_ancilla_fidelity,
    FieldDistribution, LatticeState,
};
use floqsens::metrology::{
    lattice_sensing_report, optimize_ancilla_phases_fock, qfi_bound, qfi_pure_jz, OptimizerConfig,
};
use floqsens::opspace::{sigma_x, PhaseGrid, TwoModeState};
use floqsens::readout::{
    classify_critical_points, classify_input, lattice_parity_series, parity_curve,
    sensitivity_scaling, theta_grid, typical_verdict, verdict_scan, ClassifierConfig,
    ThetaSelection, Verdict,
};
use floqsens::{CVec, C64};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn params(name: &str) -> ModelParams {
    gallery()
        .into_iter()
        .find(|g| g.name == name)
        .expect("gallery model")
        .defaults()
}

fn model(name: &str) -> TwoToneModel {
    model_library(name, &params(name)).expect("gallery model builds")
}

fn spectrum(name: &str, m: usize) -> FloquetSpectrum {
    quasienergies(&model(name), &PhaseGrid::new(m).unwrap()).expect("spectrum")
}

/// |β=0,+⟩ for the drive-1 functional power, or the uniform superposition when it vanishes.
fn plus_ancilla(s: &FloquetSpectrum, f: &FieldDistribution) -> CVec {
    match functional_power(s, f, 1) {
        Ok(p) => ancilla_state(&p, &vec![0.0; p.free_phases()], false).unwrap(),
        Err(_) => CVec::from_element(s.dim, C64::new(1.0 / (s.dim as f64).sqrt(), 0.0)),
    }
}

fn input(kind: &str, g: PhaseGrid, n_c: u64, dphi0: f64) -> FieldDistribution {
    match kind {
        "fock" => FieldDistribution::fock_uniform(g, n_c),
        _ => FieldDistribution::coherent(g, n_c, 0.0, dphi0).unwrap(),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------

fn c1() -> Outcome {
    let mut p = params("circular");
    p.insert("omega0".into(), 1.0);
    p.insert("omega".into(), 0.25);
    p.insert("A".into(), 0.125);
    let m = model_library("circular", &p).map_err(err)?;
    let g = PhaseGrid::new(64).map_err(err)?;
    let s = quasienergies(&m, &g).map_err(err)?;
    let mut worst = 0.0f64;
    for pt in 0..g.len() {
        let (p1, p2) = g.phases(pt);
        let (a, b) = circular_closed_form(1.0, 0.25, 0.125, p1 - p2);
        let mut exact = [fold(a, s.omega_com), fold(b, s.omega_com)];
        exact.sort_by(f64::total_cmp);
        let mut num = [s.energy(pt, 0), s.energy(pt, 1)];
        num.sort_by(f64::total_cmp);
        for k in 0..2 {
            let d = (num[k] - exact[k]).rem_euclid(s.omega_com);
            worst = worst.max(d.min(s.omega_com - d));
        }
    }
    Ok((
        worst < 1e-6,
        format!("max |Δε| = {worst:.2e} over 64×64 (tol 1e-6)"),
    ))
}

fn c2() -> Outcome {
    let mut worst_tr = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut names = Vec::new();
    for info in gallery() {
        let s = spectrum(info.name, 32);
        let p1 = power_operator(&s, 1).map_err(err)?;
        let p2 = power_operator(&s, 2).map_err(err)?;
        for (a, b) in p1.operators.iter().zip(&p2.operators) {
            let (ta, tb) = (a.matrix.trace().norm(), b.matrix.trace().norm());
            worst_tr = worst_tr.max(ta).max(tb);
            let sum = &a.matrix * C64::new(s.omega1, 0.0) + &b.matrix * C64::new(s.omega2, 0.0);
            worst_sum = worst_sum.max(sum.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        names.push(info.name);
    }
    Ok((
        worst_tr < 1e-8 && worst_sum < 1e-8,
        format!(
            "{}: max |tr P_j| = {worst_tr:.1e}, max |ω₁P₁+ω₂P₂| = {worst_sum:.1e}",
            names.join("/")
        ),
    ))
}

fn c3() -> Outcome {
    let s = spectrum("zeeman", 64);
    let f = FieldDistribution::fock_uniform(s.grid, 50);
    let zero_power = match functional_power(&s, &f, 1) {
        Err(floqsens::Error::ZeroFunctionalPower { .. }) => true,
        Ok(p) => p.matrix.iter().all(|z| z.norm() < 1e-10),
        Err(e) => return Err(err(e)),
    };
    let anc = plus_ancilla(&s, &f);
    let periods: Vec<u64> = (1..=30).collect();
    let report = lattice_sensing_report("zeeman", &s, &f, &anc, &periods).map_err(err)?;
    let q0 = report.rows[0].qfi;
    let drift = report
        .rows
        .iter()
        .map(|r| (r.qfi - q0).abs())
        .fold(0.0, f64::max);
    let profile = classify_input(&s, &f, &ClassifierConfig::default()).map_err(err)?;
    let pass = zero_power && drift < 1e-6 && profile.verdict == Verdict::Insensitive;
    Ok((
        pass,
        format!(
            "P[f]=0: {zero_power}, QFI drift {drift:.1e} over 30 T_com, verdict {:?}",
            profile.verdict
        ),
    ))
}

fn c4() -> Outcome {
    let periods: Vec<u64> = (30..=40).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["polarization", "circular"] {
        let s = spectrum(name, 128);
        for kind in ["fock", "coherent"] {
            let f = input(kind, s.grid, 50, 0.6 * PI);
            let anc = plus_ancilla(&s, &f);
            let b = qfi_bound(&s, &f).map_err(err)?;
            let rep = lattice_sensing_report(name, &s, &f, &anc, &periods).map_err(err)?;
            let norm = rep.normalized_qfi();
            let (lo, hi) = norm
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            let ok = lo >= 0.75 * b.lower && hi <= 1.25 * b.upper;
            pass &= ok;
            parts.push(format!(
                "{name}/{kind} F/T²∈[{:.2},{:.2}]·P²",
                lo / b.p2,
                hi / b.p2
            ));
        }
    }
    Ok((pass, parts.join("; ") + " (window [0.375, 2.5]·P²)"))
}

/// √F_q of the Fock-model and lattice PES, polarization model, |n_c,n_c⟩ input.
fn fock_vs_lattice(n_c: u64, n_max: usize, periods: u64) -> Result<Vec<(f64, f64)>, String> {
    let m = model("polarization");
    let s = quasienergies(&m, &PhaseGrid::new(128).unwrap()).map_err(err)?;
    let f = FieldDistribution::fock_uniform(s.grid, n_c);
    let anc = plus_ancilla(&s, &f);
    let psi0 = LatticeState::product(&f, &anc).map_err(err)?;
    let qm = quantize(&m, n_c, n_c, n_max).map_err(err)?;
    let mut st = FockState::product(&anc, &TwoModeState::fock(n_c as usize, n_c as usize, n_max))
        .map_err(err)?;
    let mut out = Vec::new();
    for k in 1..=periods {
        let lat = project_pes(&evolve_lattice(&s, &psi0, k).map_err(err)?, &anc).map_err(err)?;
        let fl = 4.0 * lat.number_state().map_err(err)?.number_moments().var_jz();
        st = evolve_fock(&qm, &st, qm.t_com, &KrylovOptions::default()).map_err(err)?;
        let ff = 4.0
            * pes_fock(&st, &anc)
                .map_err(err)?
                .state
                .number_moments()
                .var_jz();
        out.push((fl.sqrt(), ff.sqrt()));
    }
    Ok(out)
}

fn c5() -> Outcome {
    let mut pass = true;
    let mut onsets = Vec::new();
    let mut parts = Vec::new();
    for n_c in [10u64, 20, 30] {
        let horizon = (0.6 * n_c as f64).ceil() as u64;
        let rows = fock_vs_lattice(n_c, floqsens::fock::default_n_max(n_c), horizon)?;
        let dev: Vec<f64> = rows.iter().map(|(l, f)| (f / l - 1.0).abs()).collect();
        let early = (0.3 * n_c as f64).floor() as usize;
        let early_max = dev[..early].iter().copied().fold(0.0, f64::max);
        let onset = dev.iter().position(|&d| d > 0.1).map(|i| i + 1);
        pass &= early_max < 0.1;
        onsets.push(onset.unwrap_or(usize::MAX));
        parts.push(format!(
            "n_c={n_c}: max dev {:.1}% for T≤{early}, onset {}",
            100.0 * early_max,
            onset.map_or(format!(">{horizon}"), |o| o.to_string())
        ));
    }
    let grows = onsets.windows(2).all(|w| w[1] > w[0]);
    pass &= grows;
    Ok((
        pass,
        parts.join("; ") + &format!("; onset grows with n_c: {grows}"),
    ))
}

fn c6() -> Outcome {
    let mut ns = Vec::new();
    let mut ts = Vec::new();
    for (n_c, n_max, periods) in [(10u64, 40usize, 30u64), (20, 70, 50), (30, 95, 70)] {
        let m = model("polarization");
        let g = PhaseGrid::new(64).unwrap();
        let s = quasienergies(&m, &g).map_err(err)?;
        let anc = plus_ancilla(&s, &FieldDistribution::fock_uniform(g, n_c));
        let qm = quantize(&m, n_c, n_c, n_max).map_err(err)?;
        let mut st =
            FockState::product(&anc, &TwoModeState::fock(n_c as usize, n_c as usize, n_max))
                .map_err(err)?;
        let mut root_f = Vec::new();
        for _ in 0..periods {
            st = evolve_fock(&qm, &st, qm.t_com, &KrylovOptions::default()).map_err(err)?;
            root_f.push(
                (4.0 * pes_fock(&st, &anc)
                    .map_err(err)?
                    .state
                    .number_moments()
                    .var_jz())
                .sqrt(),
            );
        }
        let smooth: Vec<f64> = root_f
            .windows(3)
            .map(|w| w.iter().sum::<f64>() / 3.0)
            .collect();
        let peak = smooth.iter().copied().fold(0.0, f64::max);
        // smooth[i] is centred on period i + 2
        let t_sat = smooth
            .iter()
            .position(|&x| x >= 0.9 * peak)
            .map(|i| i + 2)
            .unwrap() as f64;
        ns.push(2.0 * n_c as f64);
        ts.push(t_sat);
    }
    let fit = ols(&ns, &ts).map_err(err)?;
    Ok((
        fit.r2 > 0.9 && fit.slope > 0.0,
        format!(
            "N={ns:?}: T_sat={ts:?} T_com, slope {:.3} T_com/boson, R²={:.3}",
            fit.slope, fit.r2
        ),
    ))
}

/// One gallery cell of the parity-scaling study.
struct Cell {
    label: &'static str,
    model: &'static str,
    kind: &'static str,
    dphi0: f64,
    selection: ThetaSelection,
    target: (f64, f64),
}

fn cells() -> Vec<Cell> {
    vec![
        Cell {
            label: "circular/fock θ̃=0",
            model: "circular",
            kind: "fock",
            dphi0: 0.0,
            selection: ThetaSelection::Fixed(1e-3),
            target: (-0.98, 0.1),
        },
        Cell {
            label: "polarization/coherent Δφ₀=0.6π",
            model: "polarization",
            kind: "coherent",
            dphi0: 0.6 * PI,
            selection: ThetaSelection::Average,
            target: (-1.0, 0.1),
        },
        Cell {
            label: "specific/fock",
            model: "specific",
            kind: "fock",
            dphi0: 0.0,
            selection: ThetaSelection::Average,
            target: (-0.5, 0.15),
        },
        Cell {
            label: "specific/coherent",
            model: "specific",
            kind: "coherent",
            dphi0: 0.6 * PI,
            selection: ThetaSelection::Average,
            target: (-0.5, 0.15),
        },
        Cell {
            label: "circular/coherent Δφ₀=0.6π",
            model: "circular",
            kind: "coherent",
            dphi0: 0.6 * PI,
            selection: ThetaSelection::Average,
            target: (0.0, 0.25),
        },
    ]
}

const SCALING_PERIODS: [u64; 10] = [10, 12, 16, 20, 25, 30, 40, 50, 60, 80];

/// Lattice size: wide enough that the translated wave packets never reach the window edge.
const LATTICE_M: usize = 512;

fn cell_exponent(c: &Cell) -> Result<f64, String> {
    let s = spectrum(c.model, LATTICE_M);
    let f = input(c.kind, s.grid, 50, c.dphi0);
    let anc = plus_ancilla(&s, &f);
    let thetas = match c.selection {
        ThetaSelection::Fixed(t) => vec![t],
        _ => theta_grid(1024),
    };
    let curves = lattice_parity_series(&s, &f, &anc, &SCALING_PERIODS, &thetas).map_err(err)?;
    let times: Vec<f64> = SCALING_PERIODS.iter().map(|&k| k as f64).collect();
    Ok(sensitivity_scaling(&times, &curves, c.selection)
        .map_err(err)?
        .exponent)
}

fn c7(exponents: &[f64]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, &x) in cells().iter().zip(exponents) {
        let ok = (x - c.target.0).abs() <= c.target.1;
        pass &= ok;
        parts.push(format!(
            "{}: x={x:.3} (want {}±{}) {}",
            c.label,
            c.target.0,
            c.target.1,
            if ok { "ok" } else { "MISS" }
        ));
    }
    Ok((pass, format!("T∈{SCALING_PERIODS:?}: ") + &parts.join("; ")))
}

fn c8(exponents: &[f64]) -> Outcome {
    // Degeneracy is judged over the same time window as the fitted exponents.
    let horizon = *SCALING_PERIODS.last().unwrap() as f64;
    let cfg = ClassifierConfig {
        horizon: Some(horizon),
        ..ClassifierConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, &x) in cells().iter().zip(exponents) {
        let s = spectrum(c.model, 128);
        let f = input(c.kind, s.grid, 50, c.dphi0);
        let verdict = match c.selection {
            ThetaSelection::Fixed(t) => {
                classify_critical_points(&s, &f, t, &cfg)
                    .map_err(err)?
                    .verdict
            }
            _ => typical_verdict(&verdict_scan(&s, &f, &cfg).map_err(err)?).unwrap(),
        };
        let ok = verdict.consistent_with(x);
        pass &= ok;
        parts.push(format!(
            "{}: {verdict:?} vs x={x:.2} {}",
            c.label,
            if ok { "ok" } else { "MISS" }
        ));
    }
    // Flat bands: the parity signal of the Zeeman PES carries no θ̃ information at any time.
    let s = spectrum("zeeman", 64);
    let f = FieldDistribution::fock_uniform(s.grid, 50);
    let zv = classify_input(&s, &f, &cfg).map_err(err)?.verdict;
    let anc = plus_ancilla(&s, &f);
    let curves =
        lattice_parity_series(&s, &f, &anc, &[10, 20, 40], &theta_grid(256)).map_err(err)?;
    let no_info = curves.iter().all(|c| c.best().is_none());
    let ok = zv == Verdict::Insensitive && no_info;
    pass &= ok;
    parts.push(format!(
        "zeeman/fock: {zv:?}, parity uninformative {no_info} {}",
        if ok { "ok" } else { "MISS" }
    ));
    let mut p = params("zeeman");
    p.insert("omega2".into(), 2.0);
    let s2 = quasienergies(
        &model_library("zeeman", &p).map_err(err)?,
        &PhaseGrid::new(32).unwrap(),
    )
    .map_err(err)?;
    let f2 = FieldDistribution::fock_uniform(s2.grid, 50);
    let v2 = classify_input(&s2, &f2, &cfg).map_err(err)?.verdict;
    let ok = v2 == Verdict::NoSubSql;
    pass &= ok;
    parts.push(format!("ω₂=2ω₁: {v2:?} {}", if ok { "ok" } else { "MISS" }));
    Ok((
        pass,
        format!("horizon {horizon} T_com: ") + &parts.join("; "),
    ))
}

fn c9() -> Outcome {
    let mut worst = 0.0f64;
    for n in [1usize, 2, 5, 10, 20] {
        let noon = TwoModeState::noon(n, n);
        worst = worst.max((qfi_pure_jz(&noon) - (n * n) as f64).abs());
        let thetas = theta_grid(64);
        let c = parity_curve(&noon, &thetas).map_err(err)?;
        for k in 0..thetas.len() {
            worst = worst.max((c.parity[k] - C64::new((n as f64 * thetas[k]).cos(), 0.0)).norm());
            if !c.flagged[k] {
                worst = worst.max((c.fisher[k] - (n * n) as f64).abs() / (n * n) as f64);
            }
        }
    }
    let tf = qfi_pure_jz(&TwoModeState::twin_fock_split(4).map_err(err)?);
    worst = worst.max((tf - 12.0).abs());
    Ok((
        worst < 1e-9,
        format!("N00N F_q=N², ⟨Π⟩=cos Nθ̃, F_θ̃=N², twin-Fock(4) F_q={tf}; max error {worst:.1e}"),
    ))
}

/// Polarization PES from the full Fock model with n_c = 6 per mode, trimmed to its support.
fn fock_pes_12() -> Result<TwoModeState, String> {
    let m = model("polarization");
    let s = quasienergies(&m, &PhaseGrid::new(64).unwrap()).map_err(err)?;
    let anc = plus_ancilla(&s, &FieldDistribution::fock_uniform(s.grid, 6));
    let n_max = 20;
    let qm = quantize(&m, 6, 6, n_max).map_err(err)?;
    let st = FockState::product(&anc, &TwoModeState::fock(6, 6, n_max)).map_err(err)?;
    let st = evolve_fock(&qm, &st, 4.0 * qm.t_com, &KrylovOptions::default()).map_err(err)?;
    let mut pes = pes_fock(&st, &anc).map_err(err)?.state;
    pes.amps
        .iter_mut()
        .filter(|z| z.norm_sqr() < 1e-12)
        .for_each(|z| *z = C64::new(0.0, 0.0));
    pes.normalize();
    Ok(pes)
}

fn c10() -> Outcome {
    let etas = [1.0, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5];
    let thetas = theta_grid(512);
    let noon = loss_sweep(&TwoModeState::noon(12, 12), &etas, &thetas).map_err(err)?;
    let tf = loss_sweep(
        &TwoModeState::twin_fock_split(12).map_err(err)?,
        &etas,
        &thetas,
    )
    .map_err(err)?;
    let pes = loss_sweep(&fock_pes_12()?, &etas, &thetas).map_err(err)?;
    let last = etas.len() - 1;
    let starts_ahead = noon[0].qfi > tf[0].qfi;
    let falls_behind = noon[last].qfi < tf[last].qfi && noon[last].qfi < pes[last].qfi;
    let bound = [&noon, &tf, &pes].iter().all(|rows| {
        rows.iter()
            .all(|r| r.delta_theta_parity >= r.delta_theta_qfi * (1.0 - 1e-9))
    });
    let show = |rows: &[floqsens::channels::LossPoint], k: usize| format!("{:.1}", rows[k].qfi);
    Ok((
        starts_ahead && falls_behind && bound,
        format!(
            "F_q at η=1: N00N {} TF {} PES {}; η=0.5: N00N {} TF {} PES {}; parity Δθ ≥ QFI Δθ everywhere: {bound}",
            show(&noon, 0),
            show(&tf, 0),
            show(&pes, 0),
            show(&noon, last),
            show(&tf, last),
            show(&pes, last)
        ),
    ))
}

fn c11() -> Outcome {
    let s = spectrum("polarization", LATTICE_M);
    let thetas = theta_grid(256);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ["fock", "coherent"] {
        let f = input(kind, s.grid, 50, 0.6 * PI);
        let p = functional_power(&s, &f, 1).map_err(err)?;
        let plus = ancilla_state(&p, &[0.0], false).map_err(err)?;
        let minus = ancilla_state(&p, &[0.0], true).map_err(err)?;
        let psi =
            evolve_lattice(&s, &LatticeState::product(&f, &plus).map_err(err)?, 60).map_err(err)?;
        let pes_p = project_pes(&psi, &plus).map_err(err)?;
        let pes_m = project_pes(&psi, &minus).map_err(err)?;
        let fid = reduced_ancilla_fidelity(&psi, &plus);
        let cp = parity_curve(&pes_p.number_state().map_err(err)?, &thetas).map_err(err)?;
        let cm = parity_curve(&pes_m.number_state().map_err(err)?, &thetas).map_err(err)?;
        let flip = cp
            .parity
            .iter()
            .zip(&cm.parity)
            .map(|(a, b)| (a + b).norm())
            .fold(0.0, f64::max);
        let ok_stats = (pes_p.probability - 0.5).abs() <= 0.05 && (fid - 0.5).abs() <= 0.05;
        pass &= ok_stats && flip < 1e-8;
        parts.push(format!(
            "{kind}: N_T²={:.3}, fidelity {fid:.3}, max|Π₊+Π₋|={flip:.1e}",
            pes_p.probability
        ));
    }
    Ok((
        pass,
        format!("T=60 T_com: {} (tol 0.05 / 1e-8)", parts.join("; ")),
    ))
}

fn c12() -> Outcome {
    let noon = TwoModeDensity::from_pure(&TwoModeState::noon(12, 12)).map_err(err)?;
    let tf =
        TwoModeDensity::from_pure(&TwoModeState::twin_fock_split(12).map_err(err)?).map_err(err)?;
    let fock = TwoModeDensity::from_pure(&TwoModeState::fock(6, 6, 6)).map_err(err)?;
    let narrow = PriorModel::gaussian(1e-3, 40).map_err(err)?;
    let mut limit_ok = true;
    let mut ratios = Vec::new();
    for rho in [&noon, &tf] {
        let fq = rho.qfi_jz().map_err(err)?;
        let r = bayesian_improvement(rho, &narrow)
            .map_err(err)?
            .delta_theta_m
            * fq.sqrt();
        limit_ok &= (1.0 - 1e-9..1.05).contains(&r);
        ratios.push(r);
    }
    let insensitive = bayesian_improvement(&fock, &narrow)
        .map_err(err)?
        .delta_theta_m
        .is_infinite();
    let sql = 1.0 / 12f64.sqrt();
    let crossing = |rho: &TwoModeDensity| -> Result<Option<f64>, String> {
        for k in 0..=60 {
            let width = 10f64.powf(-2.0 + 2.5 * k as f64 / 60.0);
            let r = bayesian_improvement(rho, &PriorModel::gaussian(width, 80).map_err(err)?)
                .map_err(err)?;
            if r.delta_theta_m > sql {
                return Ok(Some(width));
            }
        }
        Ok(None)
    };
    let (xn, xt) = (crossing(&noon)?, crossing(&tf)?);
    let ordered = match (xn, xt) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let fmt = |x: Option<f64>| x.map_or("none ≤ 3.2".to_string(), |v| format!("{v:.3}"));
    Ok((
        limit_ok && insensitive && ordered,
        format!(
            "δθ=1e-3: Δθ_m·√F_q = {:.4} (N00N), {:.4} (TF); |6,6⟩ gives ∞: {insensitive}; SQL lost at δθ = {} (N00N) vs {} (TF)",
            ratios[0],
            ratios[1],
            fmt(xn),
            fmt(xt)
        ),
    ))
}

/// Floquet state of the polarization model at Δφ = π/2 that carries the larger drive-1 power.
fn transfer_setup() -> (TwoToneModel, (f64, f64), CVec) {
    let m = model("polarization");
    let g = PhaseGrid::new(16).unwrap();
    let s = quasienergies(&m, &g).unwrap();
    let p = g.index(4, 0);
    let n = if s.derivative(p, 0, 1).abs() > s.derivative(p, 1, 1).abs() {
        0
    } else {
        1
    };
    (m, g.phases(p), s.states[p].column(n).clone_owned())
}

fn c13() -> Outcome {
    let (m, phases, psi0) = transfer_setup();
    let t_com = m.t_com();
    let omega = m.omega(1);
    let samples = 10;
    let run = |kind: NoiseKind, strength: f64, periods: f64| {
        let spec = NoiseSpec {
            kind,
            strength,
            tau: 1e-3 * t_com,
            axis: sigma_x(),
            seed: 7,
        };
        noisy_energy_transfer(&m, phases, &psi0, &spec, 50, periods * t_com, samples)
    };
    let termination =
        |kind: NoiseKind, strengths: &[f64], periods: f64| -> Result<Vec<f64>, String> {
            strengths
                .iter()
                .map(|&x| {
                    let r = run(kind.clone(), x * omega, periods).map_err(err)?;
                    Ok(r.termination_time(0, samples, 0.5)
                        .map_or(f64::INFINITY, |t| t / t_com))
                })
                .collect()
        };
    let deph = termination(NoiseKind::Dephasing, &[1.3, 1.8, 2.4, 3.16], 20.0)?;
    let freq = termination(
        NoiseKind::Frequency { drive: 1 },
        &[0.5, 0.9, 1.4, 2.0],
        150.0,
    )?;
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let (md, mf) = (monotone(&deph), monotone(&freq));
    let spec = NoiseSpec {
        kind: NoiseKind::Frequency { drive: 1 },
        strength: omega,
        tau: 1e-3 * t_com,
        axis: sigma_x(),
        seed: 11,
    };
    let r =
        noisy_energy_transfer(&m, phases, &psi0, &spec, 400, 20.0 * t_com, samples).map_err(err)?;
    let fit = ols(&r.times, &r.phase_variance).map_err(err)?;
    // Detuning of both drives: the onset of the parity departure scales as 1/δω.
    let s = spectrum("polarization", LATTICE_M);
    let f = FieldDistribution::coherent(s.grid, 50, 0.0, 0.6 * PI).map_err(err)?;
    let anc = plus_ancilla(&s, &f);
    let periods: Vec<u64> = (1..=60).collect();
    let mut products = Vec::new();
    // δω/ω ≈ 0.01, 0.02, 0.04, 0.06 on the grid of multiples of 1/m
    for dw in [5.0, 10.0, 20.0, 31.0].map(|j| j / LATTICE_M as f64) {
        let series = detuned_parity(
            &m,
            &s.grid,
            &f,
            &anc,
            dw * omega,
            &periods,
            None,
            &theta_grid(256),
            0.1,
        )
        .map_err(err)?;
        products.push(series.onset.map_or(f64::INFINITY, |t| t * dw));
    }
    let (lo, hi) = products
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let const_ok = hi.is_finite() && hi / lo <= 2.0;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.1}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    Ok((
        md && mf && fit.r2 > 0.99 && const_ok,
        format!(
            "termination [T_com] dephasing δη/ω=1.3,1.8,2.4,3.16: {} ; frequency δω/ω=0.5,0.9,1.4,2: {} ; ⟨ΔΦ²⟩ ∝ t R²={:.4}; coherent-input detuning onset·δω/ω = {} (max/min {:.2})",
            fmt(&deph),
            fmt(&freq),
            fit.r2,
            products.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(","),
            hi / lo
        ),
    ))
}

fn c14() -> Outcome {
    // Full Fock model at reduced occupation; the ancilla family comes from P̂₂[f] of the
    // lattice Fock input.
    let n_c = 20;
    let m = model("qutrit");
    let s = quasienergies(&m, &PhaseGrid::new(128).unwrap()).map_err(err)?;
    let p = functional_power(&s, &FieldDistribution::fock_uniform(s.grid, n_c), 2).map_err(err)?;
    let n_max = floqsens::fock::default_n_max(n_c);
    let qm = quantize(&m, n_c, n_c, n_max).map_err(err)?;
    let drives = TwoModeState::fock(n_c as usize, n_c as usize, n_max);
    let cfg = OptimizerConfig {
        points: 24,
        refine_sweeps: 0,
    };
    let opt = optimize_ancilla_phases_fock(&qm, &p, &drives, 10, &KrylovOptions::default(), &cfg)
        .map_err(err)?;
    let t2 = (10.0 * qm.t_com).powi(2);
    let (lo, hi) = (opt.min_qfi() / t2, opt.best_qfi / t2);
    Ok((
        hi / lo > 3.0,
        format!(
            "Fock model n_c={n_c}, 24×24 (β₁⁻,β₂⁻) at T=10 T_com: F_q/T² min {lo:.4}, max {hi:.4} (×T_com²: {:.2} → {:.2}), spread ratio {:.2}",
            lo * qm.t_com.powi(2),
            hi * qm.t_com.powi(2),
            hi / lo
        ),
    ))
}

// ---------------------------------------------------------------------------

fn report(id: u32, budget_s: f64, run: impl FnOnce() -> Outcome) {
    report_after(id, budget_s, 0.0, run);
}

/// `report` for criteria whose shared inputs were computed beforehand in `prior_s` seconds.
fn report_after(id: u32, budget_s: f64, prior_s: f64, run: impl FnOnce() -> Outcome) {
    let t0 = Instant::now();
    let out = run();
    let secs = prior_s + t0.elapsed().as_secs_f64();
    let (pass, detail) = match out {
        Ok((p, d)) => (p, d),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_budget = secs <= budget_s;
    let verdict = if pass && in_budget { "PASS" } else { "FAIL" };
    let budget_note = if in_budget {
        String::new()
    } else {
        format!(" — over the {budget_s:.0} s budget")
    };
    println!("criterion {id:>2}: {verdict} [{secs:.1} s{budget_note}] {detail}");
}

fn main() {
    let selected: BTreeSet<u32> = std::env::var("FLOQSENS_ACCEPT")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_else(|| (1..=14).collect());
    let want = |k: u32| selected.contains(&k);
    if want(1) {
        report(1, 30.0, c1);
    }
    if want(2) {
        report(2, 60.0, c2);
    }
    if want(3) {
        report(3, 60.0, c3);
    }
    if want(4) {
        report(4, 300.0, c4);
    }
    if want(5) {
        report(5, 1200.0, c5);
    }
    if want(6) {
        report(6, 1800.0, c6);
    }
    if want(7) || want(8) {
        let t0 = Instant::now();
        let mut slowest = 0.0_f64;
        let exps: Result<Vec<f64>, String> = cells()
            .iter()
            .map(|c| {
                let t = Instant::now();
                let x = cell_exponent(c);
                slowest = slowest.max(t.elapsed().as_secs_f64());
                x
            })
            .collect();
        let secs = t0.elapsed().as_secs_f64();
        match exps {
            Ok(x) => {
                if want(7) {
                    // The budget is per cell: the slowest cell must finish within 10 minutes.
                    let budget = 600.0 + (secs - slowest);
                    report_after(7, budget, secs, || c7(&x));
                }
                if want(8) {
                    report(8, 120.0, || c8(&x));
                }
            }
            Err(e) => {
                for k in [7, 8].into_iter().filter(|&k| want(k)) {
                    println!("criterion {k:>2}: FAIL [{secs:.1} s] error: {e}");
                }
            }
        }
    }
    if want(9) {
        report(9, 10.0, c9);
    }
    if want(10) {
        report(10, 600.0, c10);
    }
    if want(11) {
        report(11, 300.0, c11);
    }
    if want(12) {
        report(12, 600.0, c12);
    }
    if want(13) {
        report(13, 900.0, c13);
    }
    if want(14) {
        report(14, 1200.0, c14);
    }
}
