//! The four subcommands. Each writes its files into the output directory
//! before reporting failure, so a failed run still leaves a summary.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};
use thermodelay::constants::{certify as certify_at, find_beta0, ConditionReport};
use thermodelay::discretization::assemble_generator;
use thermodelay::integrate::simulate as run_trajectory;
use thermodelay::observables::{decay_rate_fit, DecayFit, Trajectory};
use thermodelay::spectral::{spectral_abscissa_with, Abscissa, Deflation};
use thermodelay::{Error, ThetaBc};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, sci, write_csv, write_json};

/// Print to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Relative tolerance of the damping threshold bisection.
const BETA0_TOL: f64 = 1e-6;

pub const NON_DECAYING: &str = "non-decaying energy";

fn config_echo(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg.to_sections()).expect("string maps serialize")
}

fn report_json(r: &ConditionReport) -> Value {
    json!({
        "lambda": num(r.lambda),
        "beta": num(r.beta),
        "verdict": r.verdict,
        "eps4": r.eps4.map_or(Value::Null, num),
        "conditions": r.records.iter().map(|c| json!({
            "name": c.name,
            "lhs": num(c.lhs),
            "rhs": num(c.rhs),
            "satisfied": c.satisfied,
        })).collect::<Vec<_>>(),
        "failed": failed_names(r),
    })
}

fn failed_names(r: &ConditionReport) -> Vec<String> {
    r.failed().map(|c| c.name.clone()).collect()
}

fn failure_message(r: &ConditionReport) -> String {
    failed_names(r).iter().map(|n| format!("{n} failed")).collect::<Vec<_>>().join(", ")
}

fn print_report(r: &ConditionReport) {
    say!("lambda = {}, beta = {}", r.lambda, r.beta);
    say!("{:<22} {:>24} {:>24}  ok", "condition", "lhs", "rhs");
    for c in &r.records {
        say!("{:<22} {:>24} {:>24}  {}", c.name, sci(c.lhs), sci(c.rhs), if c.satisfied { "yes" } else { "NO" });
    }
    say!("verdict: {}", if r.verdict { "certified" } else { "not certified" });
}

/// Certificate at the configured damping, or the damping threshold when
/// `model.beta` is omitted.
pub fn certify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let opts = cfg.sim.lyapunov;
    let p = cfg.sim.params;
    let summary = out.join("summary.json");
    let Some(beta) = cfg.beta else {
        let lambdas = cfg.search_lambdas();
        return match find_beta0(&p, &lambdas, opts, BETA0_TOL) {
            Ok(b0) => {
                let report = certify_at(&p.with_beta(b0.beta0), b0.lambda_star, opts)?;
                say!("beta0 = {} at lambda_star = {}", b0.beta0, b0.lambda_star);
                print_report(&report);
                write_json(
                    &summary,
                    json!({
                        "command": "certify",
                        "certified": true,
                        "beta0": num(b0.beta0),
                        "lambda_star": num(b0.lambda_star),
                        "lambda_grid": lambdas,
                        "report": report_json(&report),
                        "config": config_echo(cfg),
                    }),
                )
            }
            Err(Error::NoFeasibleLambda) => {
                write_json(
                    &summary,
                    json!({
                        "command": "certify",
                        "certified": false,
                        "beta0": Value::Null,
                        "lambda_star": Value::Null,
                        "lambda_grid": lambdas,
                        "error": Error::NoFeasibleLambda.to_string(),
                        "config": config_echo(cfg),
                    }),
                )?;
                Err(CliError::Certification(Error::NoFeasibleLambda.to_string()))
            }
            Err(e) => Err(e.into()),
        };
    };

    let mut scan = Vec::new();
    let mut chosen: Option<ConditionReport> = None;
    for lambda in cfg.certify_lambdas() {
        match certify_at(&p.with_beta(beta), lambda, opts) {
            Ok(r) => {
                scan.push(json!({ "lambda": num(lambda), "verdict": r.verdict }));
                let better = match &chosen {
                    None => true,
                    Some(c) => r.verdict && !c.verdict,
                };
                if better {
                    chosen = Some(r);
                }
            }
            Err(e @ Error::LambdaInfeasible { .. }) => {
                scan.push(json!({ "lambda": num(lambda), "verdict": false, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let certified = chosen.as_ref().is_some_and(|r| r.verdict);
    if let Some(r) = &chosen {
        print_report(r);
    }
    write_json(
        &summary,
        json!({
            "command": "certify",
            "certified": certified,
            "beta": num(beta),
            "report": chosen.as_ref().map_or(Value::Null, report_json),
            "lambda_scan": scan,
            "config": config_echo(cfg),
        }),
    )?;
    match chosen {
        Some(r) if r.verdict => Ok(()),
        Some(r) => Err(CliError::Certification(failure_message(&r))),
        None => Err(CliError::Certification("infeasible lambda grid: no lambda admits the constants".into())),
    }
}

/// Result of one trajectory plus its derived summary numbers.
pub struct SimOutcome {
    pub traj: Trajectory,
    pub fit: Result<DecayFit, Error>,
    pub certified: bool,
    pub failed_conditions: Vec<String>,
}

impl SimOutcome {
    pub fn final_energy(&self) -> f64 {
        self.traj.energy.last().copied().unwrap_or(f64::NAN)
    }

    /// Energy fails to decay: it grows overall or the fitted rate is not positive.
    pub fn non_decaying(&self) -> bool {
        let e0 = self.traj.energy.first().copied().unwrap_or(0.0);
        let grows = !(self.final_energy() <= e0);
        grows || self.fit.as_ref().is_ok_and(|f| !(f.a0 > 0.0))
    }

    /// Largest deviation of the heat content from its initial value.
    pub fn conservation_drift(&self) -> f64 {
        let m = &self.traj.theta_mass;
        m.iter().map(|x| (x - m[0]).abs()).fold(0.0, f64::max)
    }
}

pub fn run_simulation(cfg: &RunConfig) -> Result<SimOutcome, Error> {
    let traj = run_trajectory(&cfg.sim)?;
    let fit = decay_rate_fit(&traj.times, &traj.energy, cfg.fit_window());
    let (certified, failed_conditions) = match certify_at(&cfg.sim.params, cfg.sim.lambda, cfg.sim.lyapunov) {
        Ok(r) => (r.verdict, failed_names(&r)),
        Err(e) => (false, vec![e.to_string()]),
    };
    Ok(SimOutcome { traj, fit, certified, failed_conditions })
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.params_with_beta()?;
    let summary = out.join("summary.json");
    let o = match run_simulation(cfg) {
        Ok(o) => o,
        Err(Error::BlowUp { time, what }) => {
            write_json(
                &summary,
                json!({
                    "command": "simulate",
                    "status": "blow_up",
                    "blow_up_time": num(time),
                    "blow_up_field": what,
                    "non_decaying_energy": true,
                    "flags": [NON_DECAYING],
                    "config": config_echo(cfg),
                }),
            )?;
            return Err(Error::BlowUp { time, what }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let t = &o.traj;
    let rows = (0..t.len()).map(|k| {
        let mut row = vec![sci(t.times[k]), sci(t.energy[k]), sci(t.v[k]), sci(t.v_tilde[k])];
        row.extend(t.v_terms[k].iter().map(|x| sci(*x)));
        row.push(sci(t.theta_mass[k]));
        row
    });
    write_csv(
        &out.join("traj.csv"),
        &["t", "E", "V", "Vtilde", "V1", "V2", "V3", "V4", "V5", "V6", "theta_mass"],
        rows,
    )?;
    let (fit_start, fit_end) = cfg.fit_window();
    let non_decaying = o.non_decaying();
    let flags: Vec<&str> = if non_decaying { vec![NON_DECAYING] } else { vec![] };
    let (a0, c, r2, fit_error) = match &o.fit {
        Ok(f) => (num(f.a0), num(f.c), num(f.r2), Value::Null),
        Err(e) => (Value::Null, Value::Null, Value::Null, Value::String(e.to_string())),
    };
    let cfg_sim = &cfg.sim;
    write_json(
        &summary,
        json!({
            "command": "simulate",
            "status": "ok",
            "a0": a0,
            "C": c,
            "r2": r2,
            "fit_window": [num(fit_start), num(fit_end)],
            "fit_error": fit_error,
            "initial_energy": num(t.energy[0]),
            "final_energy": num(o.final_energy()),
            "final_time": num(*t.times.last().unwrap_or(&0.0)),
            "steps": cfg_sim.steps()?,
            "dt": num(cfg_sim.time_step()),
            "conservation_drift": num(o.conservation_drift()),
            "heat_conserved": cfg_sim.params.theta_bc == ThetaBc::Neumann,
            "certified": o.certified,
            "failed_conditions": o.failed_conditions,
            "non_decaying_energy": non_decaying,
            "flags": flags,
            "config": config_echo(cfg),
        }),
    )?;
    say!("final E = {}, samples = {}", sci(o.final_energy()), t.len());
    if let Ok(f) = &o.fit {
        say!("a0 = {}, C = {}, r2 = {}", sci(f.a0), sci(f.c), sci(f.r2));
    }
    if non_decaying {
        say!("warning: {NON_DECAYING}");
    }
    Ok(())
}

fn abscissa_of(cfg: &RunConfig) -> Result<Abscissa, Error> {
    let grid = cfg.sim.grid()?;
    let gen = assemble_generator(&grid, &cfg.sim.params)?;
    let deflation = if cfg.deflate { Deflation::default() } else { Deflation::NONE };
    spectral_abscissa_with(&gen, deflation, cfg.refine)
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.params_with_beta()?;
    let a = abscissa_of(cfg)?;
    write_csv(&out.join("spectrum.csv"), &["re", "im"], a.spectrum.iter().map(|z| vec![sci(z.re), sci(z.im)]))?;
    let converged = a.refined.iter().filter(|r| r.converged).count();
    write_json(
        &out.join("summary.json"),
        json!({
            "command": "spectrum",
            "abscissa": num(a.value),
            "eigenvalue": [num(a.eigenvalue.re), num(a.eigenvalue.im)],
            "residual": num(a.residual),
            "eigenvalues": a.spectrum.len(),
            "refined": a.refined.len(),
            "refined_converged": converged,
            "deflated": cfg.deflate,
            "config": config_echo(cfg),
        }),
    )?;
    say!(
        "abscissa = {} (eigenvalue {} {:+}i, residual {:.3e})",
        sci(a.value),
        a.eigenvalue.re,
        a.eigenvalue.im,
        a.residual
    );
    Ok(())
}

/// One sweep point: parameters and the per-row results.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub tau: f64,
    pub lambda: f64,
    pub nx: usize,
    pub nrho: usize,
    pub certified: bool,
    pub abscissa: Option<f64>,
    pub a0: Option<f64>,
    pub c: Option<f64>,
    pub r2: Option<f64>,
    pub final_energy: Option<f64>,
    pub errors: Vec<String>,
}

impl SweepRow {
    fn csv(&self, index: usize) -> Vec<String> {
        let o = |x: Option<f64>| x.map_or_else(String::new, sci);
        vec![
            index.to_string(),
            sci(self.beta),
            sci(self.tau),
            sci(self.lambda),
            self.nx.to_string(),
            self.nrho.to_string(),
            self.certified.to_string(),
            o(self.abscissa),
            o(self.a0),
            o(self.c),
            o(self.r2),
            o(self.final_energy),
            if self.errors.is_empty() { "ok".into() } else { self.errors.join("; ") },
        ]
    }
}

pub const SWEEP_HEADER: [&str; 13] =
    ["index", "beta", "tau", "lambda", "nx", "nrho", "certified", "abscissa", "a0", "C", "r2", "final_E", "status"];

/// Points of the sweep in row order: beta outermost, then tau, lambda, nx.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<RunConfig>, CliError> {
    let sw = &cfg.sweep;
    let betas = match (&sw.beta, cfg.beta) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => vec![b],
        (None, None) => return Err(CliError::Usage("sweep needs sweep.beta or model.beta".into())),
    };
    let taus = sw.tau.clone().unwrap_or_else(|| vec![cfg.sim.params.tau]);
    let lambdas = sw.lambda.clone().unwrap_or_else(|| vec![cfg.sim.lambda]);
    let nxs = sw.nx.clone().unwrap_or_else(|| vec![cfg.sim.nx]);
    let mut points = Vec::with_capacity(betas.len() * taus.len() * lambdas.len() * nxs.len());
    for &beta in &betas {
        for &tau in &taus {
            for &lambda in &lambdas {
                for &nx in &nxs {
                    let mut p = cfg.clone();
                    p.beta = Some(beta);
                    p.sim.params.beta = beta;
                    p.sim.params.tau = tau;
                    p.sim.lambda = lambda;
                    p.lambda_given = true;
                    p.sim.nx = nx;
                    points.push(p);
                }
            }
        }
    }
    Ok(points)
}

pub fn sweep_row(p: &RunConfig) -> SweepRow {
    let sim = &p.sim;
    let mut row = SweepRow {
        beta: sim.params.beta,
        tau: sim.params.tau,
        lambda: sim.lambda,
        nx: sim.nx,
        nrho: sim.nrho,
        certified: false,
        abscissa: None,
        a0: None,
        c: None,
        r2: None,
        final_energy: None,
        errors: Vec::new(),
    };
    match certify_at(&sim.params, sim.lambda, sim.lyapunov) {
        Ok(r) => row.certified = r.verdict,
        Err(e) => row.errors.push(format!("certify: {e}")),
    }
    if p.abscissa {
        match abscissa_of(p) {
            Ok(a) => row.abscissa = Some(a.value),
            Err(e) => row.errors.push(format!("spectrum: {e}")),
        }
    }
    if p.sweep.simulate {
        match run_simulation(p) {
            Ok(o) => {
                row.final_energy = Some(o.final_energy());
                match o.fit {
                    Ok(f) => (row.a0, row.c, row.r2) = (Some(f.a0), Some(f.c), Some(f.r2)),
                    Err(e) => row.errors.push(format!("fit: {e}")),
                }
            }
            Err(e) => row.errors.push(format!("simulate: {e}")),
        }
    }
    row
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let points = sweep_points(cfg)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.sweep.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    // Rows are computed independently and collected in point order.
    let rows: Vec<SweepRow> = pool.install(|| points.par_iter().map(sweep_row).collect());
    write_csv(&out.join("sweep.csv"), &SWEEP_HEADER, rows.iter().enumerate().map(|(i, r)| r.csv(i)))?;
    let certified = rows.iter().filter(|r| r.certified).count();
    let failed = rows.iter().filter(|r| !r.errors.is_empty()).count();
    write_json(
        &out.join("summary.json"),
        json!({
            "command": "sweep",
            "points": rows.len(),
            "certified_points": certified,
            "failed_points": failed,
            "config": config_echo(cfg),
        }),
    )?;
    say!("{} points, {certified} certified, {failed} with errors", rows.len());
    Ok(())
}
