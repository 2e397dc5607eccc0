//! Error studies: reference surfaces, the relative L² error, error tables, and
//! the plain-text artifacts (surfaces, CSV tables, JSON manifests) they produce.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::assembly::SchemeSelector;
use crate::error::{PricerError, Result};
use crate::grid::{build_uniform_grid, Grid2D};
use crate::model::{BoundaryKind, OptionStyle, Payoff, PenaltyParams, ProblemSpec};
use crate::reference::{analytic_price, AnalyticInputs};
use crate::scalar::Real;
use crate::surface::PriceSurface;
use crate::timestepper::{solve, SolverSettings, TimeGrid};

/// `‖V − V_ref‖ / ‖V_ref‖` in the cell-measure weighted L² norm over interior cells.
pub fn l2_relative_error<S: Real>(numeric: &PriceSurface<S>, reference: &PriceSurface<S>, grid: &Grid2D<S>) -> Result<S> {
    numeric.ensure_grid(grid)?;
    reference.ensure_grid(grid)?;
    let n = grid.n();
    let (mut diff, mut norm) = (S::zero(), S::zero());
    for i in 1..=n {
        for j in 1..=n {
            let w = grid.measure(i, j);
            let r = reference.at(i, j);
            let d = numeric.at(i, j) - r;
            diff = diff + w * d * d;
            norm = norm + w * r * r;
        }
    }
    if norm <= S::zero() || !norm.is_finite() {
        return Err(PricerError::ZeroReference);
    }
    Ok((diff / norm).sqrt())
}

/// Closed-form call-on-max prices at every node of `grid` at `τ = T`.
pub fn analytic_surface(spec: &ProblemSpec<f64>, grid: &Grid2D<f64>) -> Result<PriceSurface<f64>> {
    if spec.payoff != Payoff::CallOnMax || spec.style != OptionStyle::European {
        return Err(PricerError::Config("the analytic reference exists only for the European call on the maximum".into()));
    }
    let m = &spec.market;
    let n = grid.n();
    let values: Vec<f64> = (0..(n + 2) * (n + 2))
        .into_par_iter()
        .map(|k| {
            let [x, y] = grid.node(k / (n + 2), k % (n + 2));
            analytic_price(&AnalyticInputs::new(x, y, m.strike, m.maturity, m.sigma1, m.sigma2, m.rho, m.rate))
        })
        .collect();
    Ok(PriceSurface::new(grid, values, m.maturity, spec.payoff.name()))
}

/// Where the reference surface of an error study comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceMode {
    Analytic,
    StoredSurface(PathBuf),
    /// Fitted L-MPFA with second-order upwinding on `n` interior nodes and `steps` time steps.
    SelfRefined { n: usize, steps: usize },
}

/// Scheme used to compute self-refined references.
pub const REFERENCE_SCHEME: SchemeSelector = SchemeSelector::FittedLmpfaUp2;

impl FromStr for ReferenceMode {
    type Err = PricerError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "analytic" {
            return Ok(ReferenceMode::Analytic);
        }
        if let Some(path) = s.strip_prefix("stored:") {
            if path.is_empty() {
                return Err(PricerError::Config("stored reference needs a path".into()));
            }
            return Ok(ReferenceMode::StoredSurface(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("self:") {
            let (n, m) = rest
                .split_once(',')
                .ok_or_else(|| PricerError::Config(format!("expected self:<Nref>,<Mref>, got {s:?}")))?;
            let n = parse_value::<usize>("reference", n)?;
            let steps = parse_value::<usize>("reference", m)?;
            return Ok(ReferenceMode::SelfRefined { n, steps });
        }
        Err(PricerError::Config(format!("unknown reference mode {s:?}")))
    }
}

impl std::fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReferenceMode::Analytic => write!(f, "analytic"),
            ReferenceMode::StoredSurface(p) => write!(f, "stored:{}", p.display()),
            ReferenceMode::SelfRefined { n, steps } => write!(f, "self:{n},{steps}"),
        }
    }
}

/// A fully resolved study or pricing run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ProblemSpec<f64>,
    pub schemes: Vec<SchemeSelector>,
    /// Interior node counts, one table row each.
    pub grids: Vec<usize>,
    /// Time steps: a single value for every row or one per grid.
    pub steps: Vec<usize>,
    pub settings: SolverSettings<f64>,
    pub reference: ReferenceMode,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() {
            return Err(PricerError::Config("grid list is empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(PricerError::Config("scheme list is empty".into()));
        }
        if self.steps.len() != 1 && self.steps.len() != self.grids.len() {
            return Err(PricerError::Config(format!(
                "{} step counts for {} grids; give one or one per grid",
                self.steps.len(),
                self.grids.len()
            )));
        }
        if self.steps.contains(&0) {
            return Err(PricerError::Config("steps must be positive".into()));
        }
        self.settings.validate()?;
        self.spec.validate()
    }

    /// Time steps used on row `row`.
    pub fn steps_for(&self, row: usize) -> usize {
        if self.steps.len() == 1 {
            self.steps[0]
        } else {
            self.steps[row]
        }
    }

    pub fn grid(&self, n: usize) -> Result<Grid2D<f64>> {
        build_uniform_grid(n, self.spec.x_max, self.spec.y_max)
    }

    pub fn time_grid(&self, steps: usize) -> Result<TimeGrid<f64>> {
        TimeGrid::new(steps, self.spec.market.maturity)
    }
}

/// Flag-level options, as read from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub grid: Option<Vec<usize>>,
    pub steps: Option<Vec<usize>>,
    pub theta: Option<f64>,
    pub scheme: Option<Vec<SchemeSelector>>,
    pub option: Option<OptionStyle>,
    pub beta: Option<f64>,
    pub kpow: Option<f64>,
    pub payoff: Option<String>,
    pub reference: Option<ReferenceMode>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Keys accepted in config files (the long flag names).
pub const CONFIG_KEYS: [&str; 11] =
    ["grid", "steps", "theta", "scheme", "option", "beta", "kpow", "payoff", "reference", "out", "seed"];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| PricerError::Config(format!("bad value {raw:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(|p| parse_value(key, p)).collect()
}

pub fn parse_schemes(raw: &str) -> Result<Vec<SchemeSelector>> {
    if raw.trim() == "all" {
        return Ok(SchemeSelector::ALL.to_vec());
    }
    raw.split(',').map(|p| p.trim().parse()).collect()
}

pub fn parse_option(raw: &str) -> Result<OptionStyle> {
    match raw.trim() {
        "european" => Ok(OptionStyle::European),
        "american" => Ok(OptionStyle::American),
        other => Err(PricerError::Config(format!("unknown option style {other:?}"))),
    }
}

/// Parses flat `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PricerError::Config(format!("line {}: expected key=value", lineno + 1)))?;
        let k = k.trim().trim_start_matches("--");
        if !CONFIG_KEYS.contains(&k) {
            return Err(PricerError::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunOptions {
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut o = RunOptions::default();
        for (k, v) in pairs {
            match k.as_str() {
                "grid" => o.grid = Some(parse_list(k, v)?),
                "steps" => o.steps = Some(parse_list(k, v)?),
                "theta" => o.theta = Some(parse_value(k, v)?),
                "scheme" => o.scheme = Some(parse_schemes(v)?),
                "option" => o.option = Some(parse_option(v)?),
                "beta" => o.beta = Some(parse_value(k, v)?),
                "kpow" => o.kpow = Some(parse_value(k, v)?),
                "payoff" => o.payoff = Some(v.clone()),
                "reference" => o.reference = Some(v.parse()?),
                "out" => o.out = Some(PathBuf::from(v)),
                "seed" => o.seed = Some(parse_value(k, v)?),
                other => return Err(PricerError::Config(format!("unknown key {other:?}"))),
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| PricerError::Io(format!("{}: {e}", path.display())))?;
        Self::from_pairs(&parse_config_text(&text)?)
    }

    /// Values set in `over` replace those in `self`.
    pub fn merged(self, over: RunOptions) -> RunOptions {
        RunOptions {
            grid: over.grid.or(self.grid),
            steps: over.steps.or(self.steps),
            theta: over.theta.or(self.theta),
            scheme: over.scheme.or(self.scheme),
            option: over.option.or(self.option),
            beta: over.beta.or(self.beta),
            kpow: over.kpow.or(self.kpow),
            payoff: over.payoff.or(self.payoff),
            reference: over.reference.or(self.reference),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
        }
    }

    /// Resolves the options against the table defaults.
    ///
    /// The option style picks the base problem (European call on the maximum or
    /// American basket put); `payoff` swaps the payoff and its far-field data.
    pub fn resolve(&self) -> Result<RunConfig> {
        let style = self.option.unwrap_or(OptionStyle::European);
        let mut spec = match style {
            OptionStyle::European => ProblemSpec::european_table(),
            OptionStyle::American => ProblemSpec::american_table(),
        };
        if let Some(p) = &self.payoff {
            match p.as_str() {
                "call-on-max" => {
                    spec.payoff = Payoff::CallOnMax;
                    spec.boundary = BoundaryKind::FarFieldEuropean;
                }
                "basket-put" => {
                    spec.payoff = Payoff::BasketPut { alpha1: 0.5, alpha2: 0.5 };
                    spec.boundary = BoundaryKind::FarFieldAmerican;
                }
                other => return Err(PricerError::Config(format!("unknown payoff {other:?}"))),
            }
        }
        if style == OptionStyle::American && spec.penalty.beta == 0.0 {
            spec.penalty = ProblemSpec::<f64>::american_table().penalty;
        }
        if let Some(b) = self.beta {
            spec.penalty.beta = b;
        }
        if let Some(k) = self.kpow {
            spec.penalty.k = k;
        }
        let default_ref = match (style, spec.payoff) {
            (OptionStyle::European, Payoff::CallOnMax) => ReferenceMode::Analytic,
            _ => ReferenceMode::SelfRefined { n: 79, steps: 256 },
        };
        let settings = SolverSettings { theta: self.theta.unwrap_or(0.5), ..Default::default() };
        let config = RunConfig {
            spec,
            schemes: self.scheme.clone().unwrap_or_else(|| vec![SchemeSelector::LmpfaUp1]),
            grids: self.grid.clone().unwrap_or_else(|| vec![49]),
            steps: self.steps.clone().unwrap_or_else(|| vec![64]),
            settings,
            reference: self.reference.clone().unwrap_or(default_ref),
            out: self.out.clone(),
            seed: self.seed.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Writes a surface in the plain-text surface format.
pub fn write_surface(surface: &PriceSurface<f64>, mut out: impl std::io::Write) -> Result<()> {
    let n = surface.n();
    let mut text = format!(
        "# lmpfa-surface N={} xmax={} ymax={} tau={} payoff={}\n",
        n,
        surface.x_max(),
        surface.y_max(),
        surface.tau,
        surface.payoff
    );
    for i in 0..n + 2 {
        for j in 0..n + 2 {
            if j > 0 {
                text.push(' ');
            }
            // `Display` for f64 prints the shortest string that parses back exactly
            let _ = write!(text, "{}", surface.at(i, j));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn dump_surface(surface: &PriceSurface<f64>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| PricerError::Io(format!("{}: {e}", path.display())))?;
    write_surface(surface, std::io::BufWriter::new(file))
}

/// Parses the surface format.
pub fn read_surface(text: &str) -> Result<PriceSurface<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| PricerError::Malformed("empty surface file".into()))?;
    let fields = header
        .strip_prefix("# lmpfa-surface ")
        .ok_or_else(|| PricerError::Malformed(format!("bad surface header {header:?}")))?;
    let mut meta = BTreeMap::new();
    for f in fields.split_whitespace() {
        let (k, v) = f.split_once('=').ok_or_else(|| PricerError::Malformed(format!("bad header field {f:?}")))?;
        meta.insert(k, v);
    }
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| PricerError::Malformed(format!("header lacks {k}")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| PricerError::Malformed(format!("bad header value for {k}")))
    };
    let n: usize = get("N")?.parse().map_err(|_| PricerError::Malformed("bad header value for N".into()))?;
    let (xmax, ymax, tau) = (num("xmax")?, num("ymax")?, num("tau")?);
    let payoff = get("payoff")?.to_string();
    let grid = build_uniform_grid(n, xmax, ymax).map_err(|e| PricerError::Malformed(e.to_string()))?;
    let mut values = Vec::with_capacity((n + 2) * (n + 2));
    let mut rows = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| PricerError::Malformed(format!("bad value {tok:?}")))?);
        }
        if values.len() - before != n + 2 {
            return Err(PricerError::Malformed(format!("row {rows} has {} values, expected {}", values.len() - before, n + 2)));
        }
        rows += 1;
    }
    if rows != n + 2 {
        return Err(PricerError::Malformed(format!("{rows} rows, expected {}", n + 2)));
    }
    Ok(PriceSurface::new(&grid, values, tau, &payoff))
}

pub fn load_surface(path: &Path) -> Result<PriceSurface<f64>> {
    let text = fs::read_to_string(path).map_err(|e| PricerError::Io(format!("{}: {e}", path.display())))?;
    read_surface(&text)
}

/// Loads a surface and checks that it lives on `grid`.
pub fn load_surface_for(path: &Path, grid: &Grid2D<f64>) -> Result<PriceSurface<f64>> {
    let s = load_surface(path)?;
    s.ensure_grid(grid)?;
    Ok(s)
}

/// One cell of an error table.
#[derive(Debug, Clone, PartialEq)]
pub enum TableEntry {
    Error(f64),
    Failed(String),
}

impl TableEntry {
    pub fn value(&self) -> Option<f64> {
        match self {
            TableEntry::Error(e) => Some(*e),
            TableEntry::Failed(_) => None,
        }
    }
}

/// Relative errors keyed by grid (rows) and scheme (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub grids: Vec<usize>,
    pub steps: Vec<usize>,
    pub schemes: Vec<SchemeSelector>,
    /// `entries[row][column]`
    pub entries: Vec<Vec<TableEntry>>,
    /// Wall-clock seconds per cell, excluding the reference.
    pub seconds: Vec<Vec<f64>>,
}

pub const FAILURE_MARKER: &str = "FAILED";

impl ErrorTable {
    pub fn get(&self, n: usize, scheme: SchemeSelector) -> Option<&TableEntry> {
        let r = self.grids.iter().position(|&g| g == n)?;
        let c = self.schemes.iter().position(|&s| s == scheme)?;
        Some(&self.entries[r][c])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,M");
        for sc in &self.schemes {
            s.push(',');
            s.push_str(sc.name());
        }
        s.push('\n');
        for (r, row) in self.entries.iter().enumerate() {
            let _ = write!(s, "{},{}", self.grids[r], self.steps[r]);
            for e in row {
                match e {
                    TableEntry::Error(v) => {
                        let _ = write!(s, ",{v:.10e}");
                    }
                    TableEntry::Failed(_) => {
                        let _ = write!(s, ",{FAILURE_MARKER}");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// A reference surface that can be evaluated on any study grid.
#[derive(Debug, Clone)]
pub enum Reference {
    Analytic,
    Surface(PriceSurface<f64>),
}

impl Reference {
    /// Reference values at the nodes of `grid`. Surfaces are sampled exactly when
    /// the grids are nested and interpolated bilinearly otherwise.
    pub fn on(&self, spec: &ProblemSpec<f64>, grid: &Grid2D<f64>) -> Result<PriceSurface<f64>> {
        match self {
            Reference::Analytic => analytic_surface(spec, grid),
            Reference::Surface(s) => {
                if (s.x_max() - grid.x.max()).abs() > 1e-9 * grid.x.max()
                    || (s.y_max() - grid.y.max()).abs() > 1e-9 * grid.y.max()
                {
                    return Err(PricerError::GridMismatch("reference surface covers a different domain".into()));
                }
                Ok(s.resample(grid))
            }
        }
    }
}

/// Computes (or loads) the reference selected by the configuration.
pub fn build_reference(config: &RunConfig) -> Result<Reference> {
    match &config.reference {
        ReferenceMode::Analytic => {
            analytic_surface(&config.spec, &config.grid(2)?)?;
            Ok(Reference::Analytic)
        }
        ReferenceMode::StoredSurface(path) => {
            let surface = Reference::Surface(load_surface(path)?);
            // a surface on another domain cannot serve any cell of the study
            surface.on(&config.spec, &config.grid(config.grids[0])?)?;
            Ok(surface)
        }
        ReferenceMode::SelfRefined { n, steps } => {
            let grid = config.grid(*n)?;
            let sol = solve(&config.spec, REFERENCE_SCHEME, &grid, &config.time_grid(*steps)?, &config.settings, None)?;
            Ok(Reference::Surface(sol.surface))
        }
    }
}

/// Solves every `(N, scheme)` cell and records its error against `reference`.
/// Failing cells are recorded with their error message; the study continues.
pub fn run_table_with(config: &RunConfig, reference: &Reference) -> Result<ErrorTable> {
    config.validate()?;
    let cells: Vec<(usize, usize)> =
        (0..config.grids.len()).flat_map(|r| (0..config.schemes.len()).map(move |c| (r, c))).collect();
    let results: Vec<(TableEntry, f64)> = cells
        .par_iter()
        .map(|&(r, c)| {
            let start = Instant::now();
            let entry = (|| -> Result<f64> {
                let grid = config.grid(config.grids[r])?;
                let time = config.time_grid(config.steps_for(r))?;
                let sol = solve(&config.spec, config.schemes[c], &grid, &time, &config.settings, None)?;
                let reference = reference.on(&config.spec, &grid)?;
                let err = l2_relative_error(&sol.surface, &reference, &grid)?;
                if !err.is_finite() {
                    return Err(PricerError::LinearSolver("non-finite solution".into()));
                }
                Ok(err)
            })();
            let entry = match entry {
                Ok(e) => TableEntry::Error(e),
                Err(e) => TableEntry::Failed(e.to_string()),
            };
            (entry, start.elapsed().as_secs_f64())
        })
        .collect();
    let cols = config.schemes.len();
    let mut entries = vec![Vec::with_capacity(cols); config.grids.len()];
    let mut seconds = vec![Vec::with_capacity(cols); config.grids.len()];
    for (&(r, _), (e, t)) in cells.iter().zip(results) {
        entries[r].push(e);
        seconds[r].push(t);
    }
    Ok(ErrorTable {
        grids: config.grids.clone(),
        steps: (0..config.grids.len()).map(|r| config.steps_for(r)).collect(),
        schemes: config.schemes.clone(),
        entries,
        seconds,
    })
}

pub fn run_table(config: &RunConfig) -> Result<ErrorTable> {
    let reference = build_reference(config)?;
    run_table_with(config, &reference)
}

fn penalty_json(p: &PenaltyParams<f64>) -> serde_json::Value {
    json!({ "beta": p.beta, "k": p.k, "exponent": p.exponent(), "epsilon": p.epsilon })
}

/// JSON record of every setting in effect for a run, plus its results.
pub fn manifest(config: &RunConfig, table: Option<&ErrorTable>) -> serde_json::Value {
    let spec = &config.spec;
    let m = &spec.market;
    let s = &config.settings;
    let payoff = match spec.payoff {
        Payoff::BasketPut { alpha1, alpha2 } => json!({ "name": "basket-put", "alpha1": alpha1, "alpha2": alpha2 }),
        Payoff::CallOnMax => json!({ "name": "call-on-max" }),
    };
    let mut v = json!({
        "tool": "lmpfa-pricer",
        "version": env!("CARGO_PKG_VERSION"),
        "problem": {
            "option": match spec.style { OptionStyle::European => "european", OptionStyle::American => "american" },
            "payoff": payoff,
            "boundary": spec.boundary.name(),
            "x_max": spec.x_max,
            "y_max": spec.y_max,
            "sigma1": m.sigma1,
            "sigma2": m.sigma2,
            "rho": m.rho,
            "rate": m.rate,
            "strike": m.strike,
            "maturity": m.maturity,
            "penalty": penalty_json(&spec.penalty),
            "penalty_applied": spec.style == OptionStyle::American,
        },
        "grid_reading": "N interior nodes per axis, N+1 intervals",
        "grids": config.grids,
        "steps": config.steps,
        "schemes": config.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "solver": {
            "theta": s.theta,
            "newton_tol": s.newton_tol,
            "newton_max_iter": s.newton_max_iter,
            "linear_tol": s.linear_tol,
            "linear_max_iter": s.linear_max_iter,
            "linear_solver": format!("{:?}", s.linear_solver),
        },
        "reference": config.reference.to_string(),
        "reference_scheme": REFERENCE_SCHEME.name(),
        "seed": config.seed,
    });
    if let Some(t) = table {
        let rows: Vec<_> = t
            .grids
            .iter()
            .enumerate()
            .map(|(r, n)| {
                let cells: serde_json::Map<String, serde_json::Value> = t
                    .schemes
                    .iter()
                    .enumerate()
                    .map(|(c, sc)| {
                        let cell = match &t.entries[r][c] {
                            TableEntry::Error(e) => json!({ "error": e, "seconds": t.seconds[r][c] }),
                            TableEntry::Failed(msg) => json!({ "failed": msg, "seconds": t.seconds[r][c] }),
                        };
                        (sc.name().to_string(), cell)
                    })
                    .collect();
                json!({ "N": n, "M": t.steps[r], "cells": cells })
            })
            .collect();
        v["results"] = json!(rows);
    }
    v
}

/// Writes `errors.csv` and `manifest.json` into `dir`.
pub fn write_table_outputs(config: &RunConfig, table: &ErrorTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("errors.csv"), table.to_csv())?;
    let text = serde_json::to_string_pretty(&manifest(config, Some(table))).map_err(|e| PricerError::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}
