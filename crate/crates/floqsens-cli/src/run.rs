//! Experiment pipelines: each turns a prepared configuration into CSV tables and a summary.

use crate::config::{Engine, InputKind, NoiseKindSpec, Prepared, ProbeState, RunConfig, Selection};
use crate::output::Artifacts;
use floqsens::channels::{
    bayesian_improvement, detuned_parity, loss_sweep, noisy_energy_transfer, NoiseKind, NoiseSpec,
    PriorModel, TwoModeDensity,
};
use floqsens::floquet::{power_operator, quasienergies, FloquetSpectrum, TwoToneModel};
use floqsens::fock::{
    coherent_or_fock_input, default_n_max, evolve_fock, pes_fock, quantize, FockInput, FockState,
    KrylovOptions,
};
use floqsens::lattice::{
    ancilla_state, edge_mass, evolve_lattice, functional_power, project_pes, FieldDistribution,
    LatticeState,
};
use floqsens::linalg::{herm_eig, trace};
use floqsens::metrology::{
    lattice_sensing_report, optimize_ancilla_phases, optimize_ancilla_phases_fock, OptimizerConfig,
};
use floqsens::opspace::{ket_bra, PhaseGrid, TwoModeState};
use floqsens::readout::{
    classify_critical_points, lattice_parity_series, sensitivity_scaling, theta_grid,
    typical_verdict, verdict_scan, ClassifierConfig, ThetaSelection,
};
use floqsens::{CVec, Error, Result, C64};
use serde_json::{json, Value};
use std::fmt::Write as _;

/// θ̃ = 0 is a parity extremum where the Fisher information is 0/0; it is sampled just beside.
const THETA_ZERO: f64 = 1e-3;

struct Context<'a> {
    cfg: &'a RunConfig,
    model: &'a TwoToneModel,
    periods: &'a [u64],
}

impl Context<'_> {
    fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.cfg.grid)
    }

    fn spectrum(&self) -> Result<FloquetSpectrum> {
        quasienergies(self.model, &self.grid()?)
    }

    fn field(&self, grid: PhaseGrid) -> Result<FieldDistribution> {
        let i = &self.cfg.input;
        match i.kind {
            InputKind::Fock => Ok(FieldDistribution::fock_uniform(grid, i.n_c)),
            InputKind::Coherent => FieldDistribution::coherent(grid, i.n_c, i.phi10, i.phi20),
        }
    }

    fn n_max(&self, n_c: u64) -> usize {
        self.cfg.n_max.unwrap_or_else(|| default_n_max(n_c))
    }

    fn fock_drives(&self) -> Result<TwoModeState> {
        let i = &self.cfg.input;
        let kind = match i.kind {
            InputKind::Fock => FockInput::Fock {
                n1: i.n_c,
                n2: i.n_c,
            },
            InputKind::Coherent => FockInput::Coherent {
                n_c: i.n_c,
                phi10: i.phi10,
                phi20: i.phi20,
            },
        };
        coherent_or_fock_input(kind, self.n_max(i.n_c))
    }

    /// |β, ±⟩ of the functional power operator, or the uniform superposition when it vanishes.
    fn ancilla(&self, s: &FloquetSpectrum, f: &FieldDistribution) -> Result<(CVec, &'static str)> {
        let a = &self.cfg.ancilla;
        match functional_power(s, f, a.drive) {
            Ok(p) => {
                let n = p.free_phases();
                if a.beta.len() > n {
                    return Err(Error::InvalidArgument(format!(
                        "ancilla.beta has {} phases but the model has {n} free phases",
                        a.beta.len()
                    )));
                }
                let mut beta = a.beta.clone();
                beta.resize(n, 0.0);
                Ok((ancilla_state(&p, &beta, a.minus)?, "power-eigenbasis"))
            }
            Err(Error::ZeroFunctionalPower { .. }) => {
                let d = s.dim;
                Ok((
                    CVec::from_element(d, C64::new(1.0 / (d as f64).sqrt(), 0.0)),
                    "uniform (functional power vanishes)",
                ))
            }
            Err(e) => Err(e),
        }
    }

    fn thetas(&self) -> Vec<f64> {
        theta_grid(self.cfg.theta_points)
    }
}

pub fn run(p: &Prepared, out: &mut Artifacts) -> Result<Value> {
    use crate::config::Experiment::*;
    let ctx = Context {
        cfg: &p.config,
        model: &p.model,
        periods: &p.periods,
    };
    match p.experiment {
        Bands => bands(&ctx, out),
        Power => power(&ctx, out),
        Evolve => evolve(&ctx, out),
        Qfi => qfi(&ctx, out),
        Parity => parity(&ctx, out),
        Scaling => scaling(&ctx, out),
        Loss => loss(&ctx, out),
        Bayes => bayes(&ctx, out),
        Noise => noise(&ctx, out),
        Detune => detune(&ctx, out),
        Optimize => optimize(&ctx, out),
        Validate => validate(&ctx, out),
    }
}

fn bands(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let s = ctx.spectrum()?;
    let mut buf = Vec::new();
    s.write_csv(&mut buf).expect("writing to memory");
    out.add("bands.csv", buf);
    let max_slope = s
        .derivatives
        .iter()
        .flat_map(|d| d.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(json!({
        "dim": s.dim,
        "grid": s.grid.m,
        "omega_com": s.omega_com,
        "flagged_points": s.flagged_points().len(),
        "max_abs_slope": max_slope,
    }))
}

fn power(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let s = ctx.spectrum()?;
    let d = s.dim;
    let mut csv = String::from("phi1,phi2,drive");
    for n in 0..d {
        write!(csv, ",eig{n}").unwrap();
    }
    csv.push_str(",trace_abs\n");
    let mut worst_trace = 0.0_f64;
    for j in 1..=2 {
        let field = power_operator(&s, j)?;
        for (pt, op) in field.operators.iter().enumerate() {
            let (a, b) = s.grid.phases(pt);
            let (eig, _) = herm_eig(&op.matrix);
            let tr = trace(&op.matrix).norm();
            worst_trace = worst_trace.max(tr);
            write!(csv, "{a},{b},{j}").unwrap();
            for e in eig {
                write!(csv, ",{e}").unwrap();
            }
            writeln!(csv, ",{tr}").unwrap();
        }
    }
    out.add("power.csv", csv.into_bytes());
    let f = ctx.field(s.grid)?;
    let mut func = String::from("drive,index,eigenvalue\n");
    let mut vanishing = Vec::new();
    for j in 1..=2 {
        match functional_power(&s, &f, j) {
            Ok(p) => {
                for (k, e) in p.eigenvalues.iter().enumerate() {
                    writeln!(func, "{j},{k},{e}").unwrap();
                }
            }
            Err(Error::ZeroFunctionalPower { .. }) => vanishing.push(j),
            Err(e) => return Err(e),
        }
    }
    out.add("functional_power.csv", func.into_bytes());
    Ok(json!({
        "max_abs_trace": worst_trace,
        "functional_power_vanishes_for_drives": vanishing,
    }))
}

fn evolve(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let engine = ctx.cfg.evolve.clone().unwrap_or_default().engine;
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let mut csv =
        String::from("T,success_probability,mean_n1,mean_n2,var_jz,qfi,edge_population\n");
    let mut profile = String::from("T,n2,probability\n");
    let mut row = |t: u64, prob: f64, pes: &TwoModeState, edge: f64| {
        let m = pes.number_moments();
        let v = m.var_jz();
        writeln!(
            csv,
            "{t},{prob},{},{},{v},{},{edge}",
            m.mean_n(1),
            m.mean_n(2),
            4.0 * v
        )
        .unwrap();
        let norm = pes.norm_sqr();
        for (n2, q) in pes.marginal(2) {
            writeln!(profile, "{t},{n2},{}", q / norm).unwrap();
        }
    };
    match engine {
        Engine::Lattice => {
            let psi0 = LatticeState::product(&f, &anc)?;
            for &t in ctx.periods {
                let st = evolve_lattice(&s, &psi0, t)?;
                let pes = project_pes(&st, &anc)?;
                let state = pes.number_state()?;
                row(t, pes.probability, &state, edge_mass(&state));
            }
        }
        Engine::Fock => {
            let n_c = ctx.cfg.input.n_c;
            let qm = quantize(ctx.model, n_c, n_c, ctx.n_max(n_c))?;
            let mut st = FockState::product(&anc, &ctx.fock_drives()?)?;
            let mut now = 0;
            for &t in ctx.periods {
                st = evolve_fock(
                    &qm,
                    &st,
                    (t - now) as f64 * qm.t_com,
                    &KrylovOptions::default(),
                )?;
                now = t;
                let pes = pes_fock(&st, &anc)?;
                row(t, pes.probability, &pes.state, st.boundary_population());
            }
        }
    }
    out.add("evolve.csv", csv.into_bytes());
    out.add("profile.csv", profile.into_bytes());
    Ok(json!({ "engine": engine, "ancilla": anc_kind }))
}

fn qfi(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let rep = lattice_sensing_report(&ctx.model.name, &s, &f, &anc, ctx.periods)?;
    let mut csv = String::from(
        "T,qfi,qfi_over_T2,bound_lo,bound_hi,mean_jz,K,Q,success_probability,edge_mass\n",
    );
    for r in &rep.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.periods,
            r.qfi,
            r.qfi / (r.periods as f64).powi(2),
            r.bound_lo,
            r.bound_hi,
            r.mean_jz,
            r.k,
            r.q,
            r.success_probability,
            r.edge_mass
        )
        .unwrap();
    }
    out.add("qfi.csv", csv.into_bytes());
    Ok(json!({
        "ancilla": anc_kind,
        "t_com": rep.t_com,
        "p2": rep.p2,
        "q": rep.q,
        "asymptotic": rep.asymptotic,
        "p2_per_T_com2": rep.p2.map(|p| p * rep.t_com * rep.t_com),
        "bound_window_per_T_com2": rep.p2.map(|p| [0.5 * p * rep.t_com * rep.t_com, 2.0 * p * rep.t_com * rep.t_com]),
        "qfi_over_T2_units": "T in T_com",
    }))
}

fn parity_rows(csv: &mut String, t: u64, c: &floqsens::readout::ParityCurve) {
    for k in 0..c.theta.len() {
        writeln!(
            csv,
            "{t},{},{},{},{},{},{},{}",
            c.theta[k],
            c.parity[k].re,
            c.parity[k].im,
            c.dparity[k],
            c.fisher[k],
            c.delta_theta[k],
            u8::from(c.flagged[k])
        )
        .unwrap();
    }
}

const PARITY_HEADER: &str = "T,theta_tilde,parity_re,parity_im,dparity,fisher,delta_theta,flag\n";

fn parity(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let curves = lattice_parity_series(&s, &f, &anc, ctx.periods, &ctx.thetas())?;
    let mut csv = String::from(PARITY_HEADER);
    let mut best = Vec::new();
    for (&t, c) in ctx.periods.iter().zip(&curves) {
        parity_rows(&mut csv, t, c);
        best.push(json!({ "T": t, "best": c.best(), "max_imaginary": c.max_imaginary() }));
    }
    out.add("parity.csv", csv.into_bytes());
    Ok(json!({ "ancilla": anc_kind, "best_per_time": best }))
}

fn scaling(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx.cfg.scaling.clone().unwrap_or_default();
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let (thetas, selection) = match spec.selection {
        Selection::Fixed => {
            let t = spec.theta.unwrap_or(0.0);
            let t = if t == 0.0 { THETA_ZERO } else { t };
            (vec![t], ThetaSelection::Fixed(t))
        }
        Selection::Best => (ctx.thetas(), ThetaSelection::Best),
        Selection::Average => (ctx.thetas(), ThetaSelection::Average),
    };
    let curves = lattice_parity_series(&s, &f, &anc, ctx.periods, &thetas)?;
    let times: Vec<f64> = ctx.periods.iter().map(|&t| t as f64).collect();
    let fit = sensitivity_scaling(&times, &curves, selection)?;
    let mut csv = String::from("T,delta_theta\n");
    for (t, d) in fit.times.iter().zip(&fit.delta_theta) {
        writeln!(csv, "{t},{d}").unwrap();
    }
    out.add("scaling.csv", csv.into_bytes());
    let cfg = ClassifierConfig {
        horizon: Some(spec.horizon.unwrap_or(*times.last().unwrap())),
        ..ClassifierConfig::default()
    };
    let verdict = match selection {
        ThetaSelection::Fixed(t) => classify_critical_points(&s, &f, t, &cfg)?.verdict,
        _ => typical_verdict(&verdict_scan(&s, &f, &cfg)?).expect("non-empty θ̃ scan"),
    };
    Ok(json!({
        "ancilla": anc_kind,
        "exponent": fit.exponent,
        "r2": fit.fit.r2,
        "excluded_times": fit.excluded,
        "verdict": verdict,
        "verdict_consistent": verdict.consistent_with(fit.exponent),
    }))
}

/// Probe states for the loss and Bayesian channels.
fn probe(ctx: &Context, kind: ProbeState, n: usize, pes_periods: u64) -> Result<TwoModeState> {
    match kind {
        ProbeState::Noon => Ok(TwoModeState::noon(n, n)),
        ProbeState::TwinFock => TwoModeState::twin_fock_split(n),
        ProbeState::Pes => {
            let n_c = (n / 2) as u64;
            let s = ctx.spectrum()?;
            let f = FieldDistribution::fock_uniform(s.grid, n_c);
            let (anc, _) = ctx.ancilla(&s, &f)?;
            let n_max = ctx.n_max(n_c);
            let qm = quantize(ctx.model, n_c, n_c, n_max)?;
            let st =
                FockState::product(&anc, &TwoModeState::fock(n_c as usize, n_c as usize, n_max))?;
            let st = evolve_fock(
                &qm,
                &st,
                pes_periods as f64 * qm.t_com,
                &KrylovOptions::default(),
            )?;
            let mut pes = pes_fock(&st, &anc)?.state;
            // Drop numerical dust so the density stays on its physical support.
            pes.amps
                .iter_mut()
                .filter(|z| z.norm_sqr() < 1e-12)
                .for_each(|z| *z = C64::new(0.0, 0.0));
            pes.normalize();
            Ok(pes)
        }
    }
}

fn probe_name(kind: ProbeState) -> &'static str {
    match kind {
        ProbeState::Noon => "noon",
        ProbeState::TwinFock => "twin-fock",
        ProbeState::Pes => "pes",
    }
}

fn loss(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx.cfg.loss.as_ref().expect("validated");
    let thetas = ctx.thetas();
    let mut csv = String::from(
        "state,eta,qfi,delta_theta_qfi,parity_fisher,delta_theta_parity,theta_tilde\n",
    );
    for &kind in &spec.states {
        let state = probe(ctx, kind, spec.n, spec.pes_periods)?;
        for r in loss_sweep(&state, &spec.etas, &thetas)? {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                probe_name(kind),
                r.eta,
                r.qfi,
                r.delta_theta_qfi,
                r.parity_fisher,
                r.delta_theta_parity,
                r.theta_tilde
            )
            .unwrap();
        }
    }
    out.add("loss.csv", csv.into_bytes());
    Ok(json!({ "n": spec.n, "sql_delta_theta": 1.0 / (spec.n as f64).sqrt() }))
}

fn bayes(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx.cfg.bayes.as_ref().expect("validated");
    let mut csv = String::from(
        "state,delta_theta_prior,prior_variance,posterior_variance,delta_theta_m,qfi_limit\n",
    );
    for &kind in &spec.states {
        let state = probe(ctx, kind, spec.n, spec.pes_periods)?;
        let rho = TwoModeDensity::from_pure(&state)?;
        let limit = 1.0 / rho.qfi_jz()?.sqrt();
        for &w in &spec.prior_widths {
            let r = bayesian_improvement(&rho, &PriorModel::gaussian(w, spec.nodes)?)?;
            writeln!(
                csv,
                "{},{w},{},{},{},{limit}",
                probe_name(kind),
                r.prior_variance,
                r.posterior_variance,
                r.delta_theta_m
            )
            .unwrap();
        }
    }
    out.add("bayes.csv", csv.into_bytes());
    Ok(json!({ "n": spec.n, "sql_delta_theta": 1.0 / (spec.n as f64).sqrt() }))
}

fn noise(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx.cfg.noise.as_ref().expect("validated");
    let s = ctx.spectrum()?;
    let g = s.grid;
    let p = g.index(
        g.nearest(spec.phases[0]) as isize,
        g.nearest(spec.phases[1]) as isize,
    );
    // Start in the Floquet state that transfers energy fastest from drive 1.
    let band = (0..s.dim)
        .max_by(|&a, &b| {
            s.derivative(p, a, 1)
                .abs()
                .total_cmp(&s.derivative(p, b, 1).abs())
                .then(b.cmp(&a))
        })
        .unwrap();
    let psi0 = s.states[p].column(band).clone_owned();
    let t_com = ctx.model.t_com();
    let omega = ctx.model.omega(spec.drive);
    let d = ctx.model.dim();
    let axis = ket_bra(d, 0, 1) + ket_bra(d, 1, 0);
    let mut series = String::from("strength,t,E1,E2,E1_err,E2_err,phase_variance\n");
    let mut term = String::from("strength,termination_T\n");
    for &strength in &spec.strengths {
        let noise = NoiseSpec {
            kind: match spec.kind {
                NoiseKindSpec::Dephasing => NoiseKind::Dephasing,
                NoiseKindSpec::Frequency => NoiseKind::Frequency { drive: spec.drive },
            },
            strength: strength * omega,
            tau: spec.tau * t_com,
            axis: axis.clone(),
            seed: ctx.cfg.seed,
        };
        let res = noisy_energy_transfer(
            ctx.model,
            g.phases(p),
            &psi0,
            &noise,
            spec.trajectories,
            spec.horizon * t_com,
            spec.samples_per_tcom,
        )?;
        for i in 0..res.times.len() {
            writeln!(
                series,
                "{strength},{},{},{},{},{},{}",
                res.times[i] / t_com,
                res.mean_work[0][i],
                res.mean_work[1][i],
                res.stderr[0][i],
                res.stderr[1][i],
                res.phase_variance[i]
            )
            .unwrap();
        }
        let stop = res
            .termination_time(0, spec.samples_per_tcom, spec.termination_fraction)
            .map_or(f64::INFINITY, |t| t / t_com);
        writeln!(term, "{strength},{stop}").unwrap();
    }
    out.add("noise.csv", series.into_bytes());
    out.add("termination.csv", term.into_bytes());
    let (phi1, phi2) = g.phases(p);
    Ok(json!({ "phases": [phi1, phi2], "band": band, "seed": ctx.cfg.seed, "time_units": "T_com" }))
}

fn detune(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx.cfg.detune.as_ref().expect("validated");
    let grid = ctx.grid()?;
    let s = quasienergies(ctx.model, &grid)?;
    let f = ctx.field(grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let omega = ctx.model.omega(1);
    let thetas = ctx.thetas();
    let theta = spec.theta.map(|t| if t == 0.0 { THETA_ZERO } else { t });
    let mut csv = String::from("delta_omega,T,delta_theta,baseline\n");
    let mut onsets = String::from("delta_omega,onset_T,onset_times_delta_omega\n");
    for &dw in &spec.delta_omegas {
        let series = detuned_parity(
            ctx.model,
            &grid,
            &f,
            &anc,
            dw * omega,
            ctx.periods,
            theta,
            &thetas,
            spec.threshold,
        )?;
        let rel = series.delta_omega / omega;
        for i in 0..series.periods.len() {
            writeln!(
                csv,
                "{rel},{},{},{}",
                series.periods[i], series.delta_theta[i], series.baseline[i]
            )
            .unwrap();
        }
        let onset = series.onset.unwrap_or(f64::INFINITY);
        writeln!(onsets, "{rel},{onset},{}", onset * rel).unwrap();
    }
    out.add("detune.csv", csv.into_bytes());
    out.add("onsets.csv", onsets.into_bytes());
    Ok(json!({ "ancilla": anc_kind, "delta_omega_units": "ω, rounded to multiples of ω/grid" }))
}

fn optimize(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let spec = ctx
        .cfg
        .optimize
        .clone()
        .unwrap_or(crate::config::OptimizeSpec {
            engine: Engine::Lattice,
            points: 24,
            refine_sweeps: 0,
        });
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let t = *ctx.periods.last().unwrap();
    let opt_cfg = OptimizerConfig {
        points: spec.points,
        refine_sweeps: spec.refine_sweeps,
    };
    let drive = ctx.cfg.ancilla.drive;
    let res = match spec.engine {
        Engine::Lattice => optimize_ancilla_phases(&s, &f, drive, t, &opt_cfg)?,
        Engine::Fock => {
            let n_c = ctx.cfg.input.n_c;
            let qm = quantize(ctx.model, n_c, n_c, ctx.n_max(n_c))?;
            let power = functional_power(&s, &f, drive)?;
            optimize_ancilla_phases_fock(
                &qm,
                &power,
                &ctx.fock_drives()?,
                t,
                &KrylovOptions::default(),
                &opt_cfg,
            )?
        }
    };
    let t2 = (t as f64).powi(2);
    let mut csv = String::new();
    for (k, _) in res.best_phases.iter().enumerate() {
        write!(csv, "beta{},", k + 1).unwrap();
    }
    csv.push_str("qfi,qfi_over_T2\n");
    for (b, q) in &res.landscape {
        for x in b {
            write!(csv, "{x},").unwrap();
        }
        writeln!(csv, "{q},{}", q / t2).unwrap();
    }
    out.add("optimize.csv", csv.into_bytes());
    let min = res.min_qfi();
    Ok(json!({
        "engine": spec.engine,
        "T": t,
        "best_phases": res.best_phases,
        "best_qfi_over_T2": res.best_qfi / t2,
        "min_qfi_over_T2": min / t2,
        "spread_ratio": if min > 0.0 { res.best_qfi / min } else { f64::INFINITY },
        "flat": res.flat,
        "qfi_over_T2_units": "T in T_com",
    }))
}

fn validate(ctx: &Context, out: &mut Artifacts) -> Result<Value> {
    let s = ctx.spectrum()?;
    let f = ctx.field(s.grid)?;
    let (anc, anc_kind) = ctx.ancilla(&s, &f)?;
    let psi0 = LatticeState::product(&f, &anc)?;
    let n_c = ctx.cfg.input.n_c;
    let qm = quantize(ctx.model, n_c, n_c, ctx.n_max(n_c))?;
    let mut st = FockState::product(&anc, &ctx.fock_drives()?)?;
    let mut csv =
        String::from("T,sqrt_qfi_lattice,sqrt_qfi_fock,rel_dev,max_rel_dev,boundary_population\n");
    let (mut now, mut worst) = (0, 0.0_f64);
    for &t in ctx.periods {
        let lat = project_pes(&evolve_lattice(&s, &psi0, t)?, &anc)?;
        let fl = (4.0 * lat.number_state()?.number_moments().var_jz()).sqrt();
        st = evolve_fock(
            &qm,
            &st,
            (t - now) as f64 * qm.t_com,
            &KrylovOptions::default(),
        )?;
        now = t;
        let ff = (4.0 * pes_fock(&st, &anc)?.state.number_moments().var_jz()).sqrt();
        let rel = if fl > 0.0 {
            (ff - fl).abs() / fl
        } else {
            (ff - fl).abs()
        };
        worst = worst.max(rel);
        writeln!(
            csv,
            "{t},{fl},{ff},{rel},{worst},{}",
            st.boundary_population()
        )
        .unwrap();
    }
    out.add("validate.csv", csv.into_bytes());
    Ok(json!({ "ancilla": anc_kind, "max_rel_dev": worst }))
}
