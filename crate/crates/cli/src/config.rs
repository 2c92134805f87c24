//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [model]     alpha beta gamma kappa tau ell theta_bc
//! [grid]      nx nrho
//! [time]      t_end dt record_every theta_weight startup delay_mode
//! [lyapunov]  lambda lambda_grid xi_factor sharp_poincare
//! [initial]   u0 u1 theta0 f0
//! [output]    fit_start fit_end abscissa refine deflate
//! [sweep]     beta tau lambda nx workers simulate
//! ```
//!
//! Every key is optional except where a command needs it (`model.beta` for
//! `simulate` and `spectrum`). Lists are comma separated; `lin:a:b:n` and
//! `log:a:b:n` expand to `n` evenly (log-evenly) spaced points.
//!
//! [`RunConfig::to_sections`] emits every effective value in a form that
//! parses back to the same configuration, bit for bit.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use thermodelay::delay::DelayMode;
use thermodelay::integrate::{HistoryPreset, ProfilePreset, SimConfig, TemperaturePreset};
use thermodelay::{PhysParams, ThetaBc};

use crate::error::CliError;

/// Section name -> key -> raw value.
pub type Sections = BTreeMap<String, BTreeMap<String, String>>;

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["alpha", "beta", "gamma", "kappa", "tau", "ell", "theta_bc"]),
    ("grid", &["nx", "nrho"]),
    ("time", &["t_end", "dt", "record_every", "theta_weight", "startup", "delay_mode"]),
    ("lyapunov", &["lambda", "lambda_grid", "xi_factor", "sharp_poincare"]),
    ("initial", &["u0", "u1", "theta0", "f0"]),
    ("output", &["fit_start", "fit_end", "abscissa", "refine", "deflate"]),
    ("sweep", &["beta", "tau", "lambda", "nx", "workers", "simulate"]),
];

/// Time-stepping start-up scheme.
const STARTUP_BE: &str = "backward_euler";
const STARTUP_NONE: &str = "none";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSpec {
    pub beta: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub nx: Option<Vec<usize>>,
    /// Worker cap; `None` uses all cores.
    pub workers: Option<usize>,
    /// Run a trajectory per point to fit the decay rate.
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Simulation settings. `sim.params.beta` is only meaningful when
    /// [`RunConfig::beta`] is set.
    pub sim: SimConfig,
    pub beta: Option<f64>,
    /// Candidate `lambda` values for certification and the damping
    /// threshold search. `None` means "the configured lambda when given,
    /// otherwise the default grid".
    pub lambda_grid: Option<Vec<f64>>,
    /// Whether `lyapunov.lambda` was given explicitly.
    pub lambda_given: bool,
    /// Decay-fit window; defaults to `[t_end / 4, t_end]`.
    pub fit_start: Option<f64>,
    pub fit_end: Option<f64>,
    pub abscissa: bool,
    pub refine: usize,
    pub deflate: bool,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            beta: None,
            lambda_grid: None,
            lambda_given: false,
            fit_start: None,
            fit_end: None,
            abscissa: false,
            refine: 10,
            deflate: true,
            sweep: SweepSpec { simulate: true, ..SweepSpec::default() },
        }
    }
}

impl RunConfig {
    /// Load a config file and apply `section.key=value` overrides.
    ///
    /// A file whose first non-blank character is `{` is read as a JSON
    /// summary and its echoed `config` object is used.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut sections =
            if text.trim_start().starts_with('{') { sections_from_summary(&text)? } else { parse_sections(&text)? };
        apply_overrides(&mut sections, overrides)?;
        Self::from_sections(&sections)
    }

    pub fn from_sections(s: &Sections) -> Result<Self, CliError> {
        for (section, keys) in s {
            let known = KEYS
                .iter()
                .find(|(name, _)| name == section)
                .ok_or_else(|| CliError::Parse(format!("unknown section [{section}]")))?
                .1;
            if let Some(k) = keys.keys().find(|k| !known.contains(&k.as_str())) {
                return Err(CliError::Parse(format!("unknown key `{k}` in [{section}]")));
            }
        }
        let get = |sec: &str, key: &str| s.get(sec).and_then(|m| m.get(key)).map(String::as_str);
        let mut c = Self::default();
        let sim = &mut c.sim;
        let p = &mut sim.params;
        set(&mut p.alpha, get("model", "alpha"), "model.alpha")?;
        c.beta = opt(get("model", "beta"), "model.beta")?;
        p.beta = c.beta.unwrap_or(0.0);
        set(&mut p.gamma, get("model", "gamma"), "model.gamma")?;
        set(&mut p.kappa, get("model", "kappa"), "model.kappa")?;
        set(&mut p.tau, get("model", "tau"), "model.tau")?;
        set(&mut p.ell, get("model", "ell"), "model.ell")?;
        set::<ThetaBc>(&mut p.theta_bc, get("model", "theta_bc"), "model.theta_bc")?;

        set(&mut sim.nx, get("grid", "nx"), "grid.nx")?;
        set(&mut sim.nrho, get("grid", "nrho"), "grid.nrho")?;

        set(&mut sim.t_end, get("time", "t_end"), "time.t_end")?;
        sim.dt = opt(get("time", "dt"), "time.dt")?;
        set(&mut sim.record_every, get("time", "record_every"), "time.record_every")?;
        set(&mut sim.theta_weight, get("time", "theta_weight"), "time.theta_weight")?;
        if let Some(v) = get("time", "startup") {
            sim.startup_backward_euler = match v.trim() {
                STARTUP_BE => true,
                STARTUP_NONE => false,
                other => {
                    return Err(CliError::Parse(format!(
                        "time.startup: expected {STARTUP_BE} or {STARTUP_NONE}, got `{other}`"
                    )))
                }
            };
        }
        set::<DelayMode>(&mut sim.delay_mode, get("time", "delay_mode"), "time.delay_mode")?;

        c.lambda_given = get("lyapunov", "lambda").is_some();
        set(&mut sim.lambda, get("lyapunov", "lambda"), "lyapunov.lambda")?;
        c.lambda_grid = get("lyapunov", "lambda_grid").map(|v| parse_list(v, "lyapunov.lambda_grid")).transpose()?;
        set(&mut sim.lyapunov.xi_factor, get("lyapunov", "xi_factor"), "lyapunov.xi_factor")?;
        set(&mut sim.lyapunov.sharp_poincare, get("lyapunov", "sharp_poincare"), "lyapunov.sharp_poincare")?;

        let init = &mut sim.initial;
        set::<ProfilePreset>(&mut init.u0, get("initial", "u0"), "initial.u0")?;
        set::<ProfilePreset>(&mut init.u1, get("initial", "u1"), "initial.u1")?;
        set::<TemperaturePreset>(&mut init.theta0, get("initial", "theta0"), "initial.theta0")?;
        set::<HistoryPreset>(&mut init.f0, get("initial", "f0"), "initial.f0")?;

        c.fit_start = opt(get("output", "fit_start"), "output.fit_start")?;
        c.fit_end = opt(get("output", "fit_end"), "output.fit_end")?;
        set(&mut c.abscissa, get("output", "abscissa"), "output.abscissa")?;
        set(&mut c.refine, get("output", "refine"), "output.refine")?;
        set(&mut c.deflate, get("output", "deflate"), "output.deflate")?;

        let sw = &mut c.sweep;
        sw.beta = get("sweep", "beta").map(|v| parse_list(v, "sweep.beta")).transpose()?;
        sw.tau = get("sweep", "tau").map(|v| parse_list(v, "sweep.tau")).transpose()?;
        sw.lambda = get("sweep", "lambda").map(|v| parse_list(v, "sweep.lambda")).transpose()?;
        sw.nx = get("sweep", "nx").map(|v| parse_list(v, "sweep.nx")).transpose()?;
        sw.workers = opt(get("sweep", "workers"), "sweep.workers")?;
        set(&mut sw.simulate, get("sweep", "simulate"), "sweep.simulate")?;
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |what: String| Err(CliError::Parse(what));
        let sim = &self.sim;
        if sim.nx < 2 || sim.nrho < 1 {
            return bad(format!("grid too small: nx = {}, nrho = {}", sim.nx, sim.nrho));
        }
        if sim.record_every == 0 {
            return bad("time.record_every must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&sim.theta_weight) {
            return bad(format!("time.theta_weight must lie in [0, 1], got {}", sim.theta_weight));
        }
        if self.sweep.workers == Some(0) {
            return bad("sweep.workers must be >= 1".into());
        }
        for (name, list) in [("lyapunov.lambda_grid", &self.lambda_grid), ("sweep.lambda", &self.sweep.lambda)] {
            if list.as_ref().is_some_and(|l| l.iter().any(|x| !(*x > 0.0))) {
                return bad(format!("{name} entries must be > 0"));
            }
        }
        Ok(())
    }

    /// Physical parameters with the damping required to be present.
    pub fn params_with_beta(&self) -> Result<PhysParams, CliError> {
        match self.beta {
            Some(_) => Ok(self.sim.params),
            None => Err(CliError::Usage("model.beta is required for this command".into())),
        }
    }

    /// Candidate `lambda` values for certification.
    pub fn certify_lambdas(&self) -> Vec<f64> {
        match (&self.lambda_grid, self.lambda_given) {
            (Some(g), _) => g.clone(),
            (None, true) => vec![self.sim.lambda],
            (None, false) => thermodelay::constants::default_lambda_grid(),
        }
    }

    /// Candidate `lambda` values for the damping threshold search.
    pub fn search_lambdas(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(thermodelay::constants::default_lambda_grid)
    }

    pub fn fit_window(&self) -> (f64, f64) {
        let t_end = self.sim.t_end;
        (self.fit_start.unwrap_or(0.25 * t_end), self.fit_end.unwrap_or(t_end))
    }

    /// Every effective setting as strings that parse back to `self`.
    pub fn to_sections(&self) -> Sections {
        let mut s = Sections::new();
        let mut put = |sec: &str, key: &str, v: String| {
            s.entry(sec.to_string()).or_default().insert(key.to_string(), v);
        };
        let sim = &self.sim;
        let p = &sim.params;
        put("model", "alpha", p.alpha.to_string());
        if let Some(b) = self.beta {
            put("model", "beta", b.to_string());
        }
        put("model", "gamma", p.gamma.to_string());
        put("model", "kappa", p.kappa.to_string());
        put("model", "tau", p.tau.to_string());
        put("model", "ell", p.ell.to_string());
        put("model", "theta_bc", p.theta_bc.to_string());
        put("grid", "nx", sim.nx.to_string());
        put("grid", "nrho", sim.nrho.to_string());
        put("time", "t_end", sim.t_end.to_string());
        if let Some(dt) = sim.dt {
            put("time", "dt", dt.to_string());
        }
        put("time", "record_every", sim.record_every.to_string());
        put("time", "theta_weight", sim.theta_weight.to_string());
        put("time", "startup", if sim.startup_backward_euler { STARTUP_BE } else { STARTUP_NONE }.to_string());
        put("time", "delay_mode", sim.delay_mode.to_string());
        if self.lambda_given {
            put("lyapunov", "lambda", sim.lambda.to_string());
        }
        if let Some(g) = &self.lambda_grid {
            put("lyapunov", "lambda_grid", join(g));
        }
        put("lyapunov", "xi_factor", sim.lyapunov.xi_factor.to_string());
        put("lyapunov", "sharp_poincare", sim.lyapunov.sharp_poincare.to_string());
        put("initial", "u0", sim.initial.u0.to_string());
        put("initial", "u1", sim.initial.u1.to_string());
        put("initial", "theta0", sim.initial.theta0.to_string());
        put("initial", "f0", sim.initial.f0.to_string());
        if let Some(v) = self.fit_start {
            put("output", "fit_start", v.to_string());
        }
        if let Some(v) = self.fit_end {
            put("output", "fit_end", v.to_string());
        }
        put("output", "abscissa", self.abscissa.to_string());
        put("output", "refine", self.refine.to_string());
        put("output", "deflate", self.deflate.to_string());
        let sw = &self.sweep;
        for (key, list) in [("beta", &sw.beta), ("tau", &sw.tau), ("lambda", &sw.lambda)] {
            if let Some(l) = list {
                put("sweep", key, join(l));
            }
        }
        if let Some(l) = &sw.nx {
            put("sweep", "nx", join(l));
        }
        if let Some(w) = sw.workers {
            put("sweep", "workers", w.to_string());
        }
        put("sweep", "simulate", sw.simulate.to_string());
        s
    }
}

fn join<T: Display>(l: &[T]) -> String {
    l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn set<T>(slot: &mut T, raw: Option<&str>, name: &str) -> Result<(), CliError>
where
    T: FromStr,
    T::Err: Display,
{
    if let Some(v) = raw {
        *slot = parse_value(v, name)?;
    }
    Ok(())
}

fn opt<T>(raw: Option<&str>, name: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.map(|v| parse_value(v, name)).transpose()
}

fn parse_value<T>(v: &str, name: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    v.trim().parse().map_err(|e| CliError::Parse(format!("{name}: cannot parse `{}`: {e}", v.trim())))
}

/// Comma list, `lin:a:b:n` or `log:a:b:n`.
pub fn parse_list<T>(v: &str, name: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr + FromF64,
    T::Err: Display,
{
    let v = v.trim();
    let spaced = |spec: &str, log: bool| -> Result<Vec<T>, CliError> {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(CliError::Parse(format!("{name}: expected a:b:n, got `{spec}`")));
        };
        let (a, b): (f64, f64) = (parse_value(a, name)?, parse_value(b, name)?);
        let n: usize = parse_value(n, name)?;
        if n == 0 || (log && !(a > 0.0 && b > 0.0)) {
            return Err(CliError::Parse(format!("{name}: invalid range `{spec}`")));
        }
        (0..n)
            .map(|k| {
                let t = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                let x = if log { (a.ln() + t * (b.ln() - a.ln())).exp() } else { a + t * (b - a) };
                T::from_f64(x, name)
            })
            .collect()
    };
    let list = if let Some(spec) = v.strip_prefix("lin:") {
        spaced(spec, false)?
    } else if let Some(spec) = v.strip_prefix("log:") {
        spaced(spec, true)?
    } else {
        v.split(',').map(|x| parse_value(x, name)).collect::<Result<Vec<T>, _>>()?
    };
    if list.is_empty() {
        return Err(CliError::Parse(format!("{name}: empty list")));
    }
    Ok(list)
}

/// Conversion of generated range points into list elements.
pub trait FromF64: Sized {
    fn from_f64(x: f64, name: &str) -> Result<Self, CliError>;
}

impl FromF64 for f64 {
    fn from_f64(x: f64, _: &str) -> Result<Self, CliError> {
        Ok(x)
    }
}

impl FromF64 for usize {
    fn from_f64(x: f64, name: &str) -> Result<Self, CliError> {
        let r = x.round();
        if r >= 1.0 && r.is_finite() {
            Ok(r as usize)
        } else {
            Err(CliError::Parse(format!("{name}: range point {x} is not a positive integer")))
        }
    }
}

pub fn parse_sections(text: &str) -> Result<Sections, CliError> {
    let ini = Ini::load_from_str(text).map_err(|e| CliError::Parse(format!("config: {e}")))?;
    let mut out = Sections::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if props.iter().next().is_some() {
                return Err(CliError::Parse("config: keys must appear inside a [section]".into()));
            }
            continue;
        };
        let entry = out.entry(section.trim().to_string()).or_default();
        for (k, v) in props.iter() {
            if entry.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Parse(format!("config: duplicate key `{k}` in [{section}]")));
            }
        }
    }
    Ok(out)
}

fn sections_from_summary(text: &str) -> Result<Sections, CliError> {
    #[derive(serde::Deserialize)]
    struct Echo {
        config: Sections,
    }
    let echo: Echo = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("summary config: {e}")))?;
    Ok(echo.config)
}

/// Apply `section.key=value` overrides in order.
pub fn apply_overrides(s: &mut Sections, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        let (lhs, value) =
            o.split_once('=').ok_or_else(|| CliError::Parse(format!("override `{o}`: expected section.key=value")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| CliError::Parse(format!("override `{o}`: expected section.key=value")))?;
        s.entry(section.to_string()).or_default().insert(key.to_string(), value.trim().to_string());
    }
    Ok(())
}

/// Render sections as config text.
#[cfg(test)]
pub fn render_sections(s: &Sections) -> String {
    let mut out = String::new();
    for (section, keys) in s {
        out.push_str(&format!("[{section}]\n"));
        for (k, v) in keys {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push('\n');
    }
    out
}
