//! Experiment files: `[section]` headers followed by `key = value` lines.
//! Lists are comma separated and `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{InitialData, InitialShape};
use crate::observation::TestFunction;
use crate::prior::{tensor_sine_basis, Basis, FieldPrior, Law, ParamPrior, ParamRole, PriorSpec};
use crate::solver::{LinearSolverKind, SolverConfig};

const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["id", "output"]),
    ("grid", &["bounds_x", "bounds_y", "cells"]),
    ("solver", &["m", "dt", "t_final", "tolerance", "max_linear_iterations", "linear_solver"]),
    ("initial", &["shape", "center", "amplitude", "radius2"]),
    ("truth", &["h", "c1", "c2", "g", "zeta"]),
    ("prior", &["h", "c1", "c2", "field_basis", "field_h0", "field_std", "field_modes", "field_decay"]),
    (
        "observation",
        &["mode", "times", "sigma", "centers_i", "centers_j", "centers_x", "centers_y", "width", "data_seed"],
    ),
    ("mcmc", &["iterations", "runs", "burn_in", "proposal_std", "seed", "paper_iterations", "paper_runs"]),
    ("sweep", &["parameter", "values"]),
    ("hellinger", &["samples", "bootstrap", "m"]),
];

const PARAM_NAMES: &[(&str, ParamRole)] =
    &[("h", ParamRole::Growth), ("c1", ParamRole::CenterX), ("c2", ParamRole::CenterY)];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped sections, in file order.
#[derive(Debug, Clone, Default)]
struct Raw {
    sections: BTreeMap<String, Vec<(String, Entry)>>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        let mut current: Option<String> = None;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header '{body}'")))?
                    .trim()
                    .to_string();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                if raw.sections.contains_key(&name) {
                    return Err(err(format!("duplicate section [{name}]")));
                }
                raw.sections.insert(name.clone(), Vec::new());
                current = Some(name);
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| err(format!("expected 'key = value', found '{body}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let section = current.as_ref().ok_or_else(|| err(format!("key '{key}' outside any section")))?;
            let allowed = SECTIONS.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(err(format!("unknown key '{section}.{key}'")));
            }
            if value.is_empty() {
                return Err(err(format!("empty value for '{section}.{key}'")));
            }
            let entries = raw.sections.get_mut(section).expect("section registered");
            if entries.iter().any(|(k, _)| k == key) {
                return Err(err(format!("duplicate key '{section}.{key}'")));
            }
            entries.push((key.to_string(), Entry { value: value.to_string(), line: line_no }));
        }
        Ok(raw)
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }
}

/// Typed access that records missing keys instead of failing on the first.
struct Reader<'a> {
    raw: &'a Raw,
    missing: Vec<String>,
}

trait FromValue: Sized {
    fn from_value(s: &str) -> std::result::Result<Self, String>;
}

impl FromValue for f64 {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|_| format!("expected a number, found '{s}'"))
    }
}

impl FromValue for usize {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|_| format!("expected a nonnegative integer, found '{s}'"))
    }
}

impl FromValue for u64 {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|_| format!("expected a nonnegative integer, found '{s}'"))
    }
}

impl FromValue for String {
    fn from_value(s: &str) -> std::result::Result<Self, String> {
        Ok(s.to_string())
    }
}

impl<'a> Reader<'a> {
    fn opt<T: FromValue>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw.get(section, key) {
            None => Ok(None),
            Some(e) => T::from_value(&e.value)
                .map(Some)
                .map_err(|m| Error::Parse { line: e.line, message: format!("{section}.{key}: {m}") }),
        }
    }

    fn req<T: FromValue>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        let v = self.opt(section, key)?;
        if v.is_none() {
            self.missing.push(format!("missing required key '{section}.{key}'"));
        }
        Ok(v)
    }

    fn opt_list<T: FromValue>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| T::from_value(s.trim()))
                .collect::<std::result::Result<Vec<T>, String>>()
                .map(Some)
                .map_err(|m| Error::Parse { line: e.line, message: format!("{section}.{key}: {m}") }),
        }
    }

    fn req_list<T: FromValue>(&mut self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let v = self.opt_list(section, key)?;
        if v.is_none() {
            self.missing.push(format!("missing required key '{section}.{key}'"));
        }
        Ok(v)
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.raw.get(section, key).map_or(0, |e| e.line)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpec {
    FullGrid,
    /// Gaussian bumps at explicit coordinates.
    Functionals {
        centers: Vec<(f64, f64)>,
        width: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSection {
    pub spec: ObservationSpec,
    pub times: Vec<f64>,
    pub sigma: f64,
    /// Seed of the noise realization; defaults to the master seed.
    pub data_seed: Option<u64>,
}

impl ObservationSection {
    pub fn test_functions(&self) -> Option<Vec<TestFunction>> {
        match &self.spec {
            ObservationSpec::FullGrid => None,
            ObservationSpec::Functionals { centers, width } => {
                Some(centers.iter().map(|&center| TestFunction::Gaussian { center, width: *width }).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSection {
    pub iterations: usize,
    pub runs: usize,
    pub burn_in: f64,
    /// Per-coordinate proposal deviations; `None` uses 0.1 x prior scale.
    pub proposal_std: Option<Vec<f64>>,
    pub seed: u64,
    pub paper_iterations: Option<usize>,
    pub paper_runs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Sigma,
    M,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Sigma => "sigma",
            SweepParameter::M => "m",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HellingerSection {
    pub samples: usize,
    pub bootstrap: usize,
    pub m_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub output: PathBuf,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub prior: PriorSpec,
    /// True parametric values in prior order, then field coefficients.
    pub truth: Vec<f64>,
    /// Growth rate used when neither a rate nor a field is inferred.
    pub fixed_growth: f64,
    pub observation: ObservationSection,
    pub mcmc: McmcSection,
    pub sweep: Option<Sweep>,
    pub hellinger: Option<HellingerSection>,
    /// Original file text, copied verbatim into the output directory.
    pub source: String,
}

fn parse_law(text: &str, line: usize, name: &str) -> Result<Law> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let err = |m: String| Error::Parse { line, message: format!("prior.{name}: {m}") };
    let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("expected a number, found '{s}'")));
    match parts.as_slice() {
        ["normal", a, b] => Ok(Law::Normal { mean: num(a)?, std: num(b)? }),
        ["uniform", a, b] => Ok(Law::Uniform { lo: num(a)?, hi: num(b)? }),
        _ => Err(err(format!("expected 'normal MEAN STD' or 'uniform LO HI', found '{text}'"))),
    }
}

fn pair(v: &[f64], what: &str, missing: &mut Vec<String>) -> Option<(f64, f64)> {
    if v.len() == 2 {
        Some((v[0], v[1]))
    } else {
        missing.push(format!("{what} needs exactly two values (got {})", v.len()));
        None
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses and validates. Syntax errors stop at the offending line;
    /// missing keys and semantic problems are collected and reported together.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = Raw::parse(text)?;
        let mut r = Reader { raw: &raw, missing: Vec::new() };
        let mut bad: Vec<String> = Vec::new();

        let id: Option<String> = r.req("experiment", "id")?;
        let output: Option<String> = r.opt("experiment", "output")?;

        // Grid.
        let bx: Option<Vec<f64>> = r.req_list("grid", "bounds_x")?;
        let by: Option<Vec<f64>> = r.opt_list("grid", "bounds_y")?;
        let cells: Option<Vec<usize>> = r.req_list("grid", "cells")?;
        let mut grid = None;
        if let (Some(bx), Some(cells)) = (&bx, &cells) {
            let mut bounds = Vec::new();
            bounds.extend(pair(bx, "grid.bounds_x", &mut bad));
            if let Some(by) = &by {
                bounds.extend(pair(by, "grid.bounds_y", &mut bad));
            }
            let cells = if cells.len() == 1 && bounds.len() == 2 { vec![cells[0]; 2] } else { cells.clone() };
            if bounds.len() == cells.len() {
                match Grid::new(&bounds, &cells) {
                    Ok(g) => grid = Some(g),
                    Err(e) => bad.push(e.to_string()),
                }
            } else if bad.is_empty() {
                bad.push(format!("grid.cells has {} entries for {} axes", cells.len(), bounds.len()));
            }
        }

        // Solver.
        let m: Option<f64> = r.req("solver", "m")?;
        let dt: Option<f64> = r.req("solver", "dt")?;
        let t_final: Option<f64> = r.req("solver", "t_final")?;
        let tolerance: Option<f64> = r.opt("solver", "tolerance")?;
        let max_iter: Option<usize> = r.opt("solver", "max_linear_iterations")?;
        let linear: Option<String> = r.opt("solver", "linear_solver")?;
        let mut solver = None;
        if let (Some(m), Some(dt), Some(t_final)) = (m, dt, t_final) {
            let mut cfg = SolverConfig {
                m,
                dt,
                t_final,
                tolerance: 1e-10,
                max_linear_iterations: 5000,
                check_growth_cap: true,
                clamp_negative: true,
                linear_solver: LinearSolverKind::Auto,
            };
            if let Some(t) = tolerance {
                cfg.tolerance = t;
            }
            if let Some(k) = max_iter {
                cfg.max_linear_iterations = k;
            }
            match linear.as_deref() {
                None | Some("auto") => {}
                Some("direct") => cfg.linear_solver = LinearSolverKind::Direct,
                Some("iterative") => cfg.linear_solver = LinearSolverKind::Iterative,
                Some(other) => {
                    return Err(Error::Parse {
                        line: r.line_of("solver", "linear_solver"),
                        message: format!("solver.linear_solver: expected auto, direct or iterative, found '{other}'"),
                    })
                }
            }
            match cfg.validate() {
                Ok(()) => solver = Some(cfg),
                Err(e) => bad.push(e.to_string()),
            }
        }

        // Initial data.
        let shape: Option<String> = r.req("initial", "shape")?;
        let center: Option<Vec<f64>> = r.opt_list("initial", "center")?;
        let amplitude: f64 = r.opt("initial", "amplitude")?.unwrap_or(0.9);
        let radius2: Option<f64> = r.opt("initial", "radius2")?;
        let center = match &center {
            Some(c) => pair(c, "initial.center", &mut bad).unwrap_or((0.0, 0.0)),
            None => (0.0, 0.0),
        };
        let initial = match shape.as_deref() {
            None => None,
            Some("flower") => Some(InitialData { shape: InitialShape::Flower { amplitude }, center }),
            Some("disk") => match radius2 {
                Some(radius2) => Some(InitialData { shape: InitialShape::Disk { radius2, amplitude }, center }),
                None => {
                    r.missing.push("missing required key 'initial.radius2' for a disk".into());
                    None
                }
            },
            Some(other) => {
                return Err(Error::Parse {
                    line: r.line_of("initial", "shape"),
                    message: format!("initial.shape: expected flower or disk, found '{other}'"),
                })
            }
        };
        if !(amplitude > 0.0) {
            bad.push(format!("initial.amplitude must be positive (got {amplitude})"));
        }
        if let Some(InitialData { shape: InitialShape::Disk { radius2, .. }, .. }) = initial {
            if !(radius2 > 0.0) {
                bad.push(format!("initial.radius2 must be positive (got {radius2})"));
            }
        }

        // Prior.
        let mut prior = PriorSpec::default();
        if let Some(entries) = raw.sections.get("prior") {
            for (key, e) in entries {
                if let Some((_, role)) = PARAM_NAMES.iter().find(|(n, _)| n == key) {
                    let law = parse_law(&e.value, e.line, key)?;
                    if let Err(err) = law.validate() {
                        bad.push(format!("prior.{key}: {err}"));
                    }
                    prior.parametric.push(ParamPrior { name: key.clone(), role: *role, law });
                }
            }
        }
        let basis_name: Option<String> = r.opt("prior", "field_basis")?;
        if let Some(basis_name) = basis_name {
            let h0: Option<f64> = r.req("prior", "field_h0")?;
            let std: Option<Vec<f64>> = r.opt_list("prior", "field_std")?;
            let basis = match basis_name.as_str() {
                "test3" => Some(Basis::test3()),
                "sine" => {
                    let modes: Option<usize> = r.req("prior", "field_modes")?;
                    let decay: Option<f64> = r.req("prior", "field_decay")?;
                    match (modes, decay, &grid) {
                        (Some(n), Some(s), Some(g)) => match tensor_sine_basis(g, n, s) {
                            Ok(b) => Some(b),
                            Err(e) => {
                                bad.push(e.to_string());
                                None
                            }
                        },
                        _ => None,
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line: r.line_of("prior", "field_basis"),
                        message: format!("prior.field_basis: expected test3 or sine, found '{other}'"),
                    })
                }
            };
            if let (Some(basis), Some(h0)) = (basis, h0) {
                let field = match std {
                    Some(std) => FieldPrior::new(h0, basis, std),
                    None => Ok(FieldPrior::spectral(h0, basis)),
                };
                match field {
                    Ok(f) => prior.field = Some(f),
                    Err(e) => bad.push(e.to_string()),
                }
            }
        } else {
            for key in ["field_h0", "field_std", "field_modes", "field_decay"] {
                if raw.get("prior", key).is_some() {
                    bad.push(format!("prior.{key} given without prior.field_basis"));
                }
            }
        }
        if prior.dim() == 0 {
            bad.push("the prior declares no unknowns".into());
        }
        if let Err(e) = prior.validate() {
            bad.push(e.to_string());
        }

        // Truth.
        let mut truth = Vec::new();
        for p in &prior.parametric {
            if let Some(v) = r.req::<f64>("truth", &p.name)? {
                if let Law::Uniform { lo, hi } = p.law {
                    if !(lo..=hi).contains(&v) {
                        bad.push(format!("truth.{} = {v} lies outside its uniform prior [{lo}, {hi}]", p.name));
                    }
                }
                truth.push(v);
            }
        }
        let fixed_growth = if prior.parametric.iter().any(|p| p.role == ParamRole::Growth) || prior.field.is_some() {
            if prior.field.is_some() && raw.get("truth", "h").is_some() {
                bad.push("truth.h conflicts with a growth-field prior".into());
            }
            0.0
        } else {
            r.req::<f64>("truth", "h")?.unwrap_or(0.0)
        };
        for (name, role) in PARAM_NAMES.iter().skip(1) {
            if raw.get("truth", name).is_some() && !prior.parametric.iter().any(|p| p.role == *role) {
                bad.push(format!("truth.{name} given but {name} is not inferred; set initial.center instead"));
            }
        }
        if let Some(f) = &prior.field {
            let g: Option<Vec<f64>> = r.opt_list("truth", "g")?;
            let zeta: Option<Vec<f64>> = r.opt_list("truth", "zeta")?;
            let coeffs = match (g, zeta) {
                (Some(_), Some(_)) => {
                    bad.push("give either truth.g or truth.zeta, not both".into());
                    None
                }
                (Some(g), None) => Some(g),
                (None, Some(z)) => Some(f.coefficients_from_zeta(&z)),
                (None, None) => {
                    r.missing.push("missing required key 'truth.g' (or 'truth.zeta')".into());
                    None
                }
            };
            if let Some(c) = coeffs {
                if c.len() != f.basis.len() {
                    bad.push(format!("truth has {} field coefficients for {} basis functions", c.len(), f.basis.len()));
                }
                truth.extend(c);
            }
        } else if raw.get("truth", "g").is_some() || raw.get("truth", "zeta").is_some() {
            bad.push("field coefficients given without a growth-field prior".into());
        }

        // Observation.
        let mode: Option<String> = r.req("observation", "mode")?;
        let times: Option<Vec<f64>> = r.req_list("observation", "times")?;
        let sigma: Option<f64> = r.opt("observation", "sigma")?;
        let data_seed: Option<u64> = r.opt("observation", "data_seed")?;
        let spec = match mode.as_deref() {
            None => None,
            Some("full_grid") => Some(ObservationSpec::FullGrid),
            Some("functionals") => {
                let width: Option<f64> = r.req("observation", "width")?;
                let ci: Option<Vec<usize>> = r.opt_list("observation", "centers_i")?;
                let cj: Option<Vec<usize>> = r.opt_list("observation", "centers_j")?;
                let cx: Option<Vec<f64>> = r.opt_list("observation", "centers_x")?;
                let cy: Option<Vec<f64>> = r.opt_list("observation", "centers_y")?;
                let centers = match (ci, cj, cx, cy) {
                    (Some(ci), Some(cj), None, None) => {
                        if ci.len() != cj.len() {
                            bad.push("observation.centers_i and centers_j differ in length".into());
                            None
                        } else {
                            grid.as_ref().and_then(|g| {
                                let mut out = Vec::new();
                                for (&i, &j) in ci.iter().zip(&cj) {
                                    if i >= g.nx() || j >= g.ny() {
                                        bad.push(format!("observation center cell ({i}, {j}) outside the grid"));
                                        return None;
                                    }
                                    out.push(g.cell_center(i, j));
                                }
                                Some(out)
                            })
                        }
                    }
                    (None, None, Some(cx), Some(cy)) => {
                        if cx.len() != cy.len() {
                            bad.push("observation.centers_x and centers_y differ in length".into());
                            None
                        } else {
                            Some(cx.into_iter().zip(cy).collect())
                        }
                    }
                    _ => {
                        bad.push("functionals need either centers_i/centers_j or centers_x/centers_y".into());
                        None
                    }
                };
                if let Some(w) = width {
                    if !(w > 0.0) {
                        bad.push(format!("observation.width must be positive (got {w})"));
                    }
                }
                match (centers, width) {
                    (Some(centers), Some(width)) if !centers.is_empty() => {
                        Some(ObservationSpec::Functionals { centers, width })
                    }
                    _ => None,
                }
            }
            Some(other) => {
                return Err(Error::Parse {
                    line: r.line_of("observation", "mode"),
                    message: format!("observation.mode: expected full_grid or functionals, found '{other}'"),
                })
            }
        };
        if let (Some(times), Some(t_final)) = (&times, t_final) {
            for (k, &t) in times.iter().enumerate() {
                if !(t > 0.0) || t > t_final + 1e-12 {
                    bad.push(format!("observation time {t} outside (0, {t_final}]"));
                }
                if k > 0 && t <= times[k - 1] {
                    bad.push("observation times must be strictly increasing".into());
                }
            }
        }

        // Sweep.
        let sweep = if raw.has_section("sweep") {
            let parameter: Option<String> = r.req("sweep", "parameter")?;
            let values: Option<Vec<f64>> = r.req_list("sweep", "values")?;
            let parameter = match parameter.as_deref() {
                None => None,
                Some("sigma") => Some(SweepParameter::Sigma),
                Some("m") => Some(SweepParameter::M),
                Some(other) => {
                    return Err(Error::Parse {
                        line: r.line_of("sweep", "parameter"),
                        message: format!("sweep.parameter: expected sigma or m, found '{other}'"),
                    })
                }
            };
            match (parameter, values) {
                (Some(parameter), Some(values)) => {
                    for &v in &values {
                        match parameter {
                            SweepParameter::Sigma if !(v > 0.0) => {
                                bad.push(format!("sweep sigma {v} must be positive"))
                            }
                            SweepParameter::M if !(v >= 2.0) => bad.push(format!("sweep m {v} must be >= 2")),
                            _ => {}
                        }
                    }
                    Some(Sweep { parameter, values })
                }
                _ => None,
            }
        } else {
            None
        };
        let sigma_needed = !matches!(&sweep, Some(s) if s.parameter == SweepParameter::Sigma);
        let sigma = match sigma {
            Some(s) => {
                if !(s > 0.0) {
                    bad.push(format!("observation.sigma must be positive (got {s})"));
                }
                s
            }
            None if sigma_needed => {
                r.missing.push("missing required key 'observation.sigma'".into());
                0.0
            }
            None => 0.0,
        };

        // MCMC.
        let iterations: Option<usize> = r.req("mcmc", "iterations")?;
        let runs: usize = r.opt("mcmc", "runs")?.unwrap_or(1);
        let burn_in: f64 = r.opt("mcmc", "burn_in")?.unwrap_or(0.25);
        let proposal_std: Option<Vec<f64>> = r.opt_list("mcmc", "proposal_std")?;
        let seed: u64 = r.opt("mcmc", "seed")?.unwrap_or(0);
        let paper_iterations: Option<usize> = r.opt("mcmc", "paper_iterations")?;
        let paper_runs: Option<usize> = r.opt("mcmc", "paper_runs")?;
        for (name, v) in [("iterations", iterations), ("paper_iterations", paper_iterations)] {
            if let Some(v) = v {
                if v < 10 {
                    bad.push(format!("mcmc.{name} must be >= 10 (got {v})"));
                }
            }
        }
        for (name, v) in [("runs", Some(runs)), ("paper_runs", paper_runs)] {
            if v == Some(0) {
                bad.push(format!("mcmc.{name} must be >= 1"));
            }
        }
        if !(0.0..1.0).contains(&burn_in) {
            bad.push(format!("mcmc.burn_in must lie in [0, 1) (got {burn_in})"));
        }
        let proposal_std = match proposal_std {
            Some(p) if p.len() == 1 => Some(vec![p[0]; prior.dim()]),
            Some(p) => {
                if p.len() != prior.dim() {
                    bad.push(format!("mcmc.proposal_std has {} entries for {} unknowns", p.len(), prior.dim()));
                }
                Some(p)
            }
            None => None,
        };
        if let Some(p) = &proposal_std {
            if p.iter().any(|s| !(*s > 0.0)) {
                bad.push("mcmc.proposal_std entries must be positive".into());
            }
        }

        // Hellinger study.
        let hellinger = if raw.has_section("hellinger") {
            let samples: Option<usize> = r.req("hellinger", "samples")?;
            let bootstrap: usize = r.opt("hellinger", "bootstrap")?.unwrap_or(200);
            let m_values: Option<Vec<f64>> = r.req_list("hellinger", "m")?;
            if let Some(n) = samples {
                if n < crate::posterior::MIN_HELLINGER_SAMPLES {
                    bad.push(format!(
                        "hellinger.samples must be >= {} (got {n})",
                        crate::posterior::MIN_HELLINGER_SAMPLES
                    ));
                }
            }
            if bootstrap < crate::posterior::MIN_BOOTSTRAP {
                bad.push(format!(
                    "hellinger.bootstrap must be >= {} (got {bootstrap})",
                    crate::posterior::MIN_BOOTSTRAP
                ));
            }
            if let Some(ms) = &m_values {
                if ms.len() < 2 {
                    bad.push("hellinger.m needs at least two values".into());
                }
                if ms.windows(2).any(|w| w[1] < w[0]) {
                    bad.push("hellinger.m must be ascending".into());
                }
                if ms.iter().any(|m| !(*m >= 2.0)) {
                    bad.push("hellinger.m values must be >= 2".into());
                }
            }
            match (samples, m_values) {
                (Some(samples), Some(m_values)) => Some(HellingerSection { samples, bootstrap, m_values }),
                _ => None,
            }
        } else {
            None
        };

        let mut violations = r.missing;
        violations.extend(bad);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let id = id.expect("checked");
        Ok(ExperimentConfig {
            output: PathBuf::from(output.unwrap_or_else(|| format!("out/{id}"))),
            id,
            grid: grid.expect("checked"),
            solver: solver.expect("checked"),
            initial: initial.expect("checked"),
            prior,
            truth,
            fixed_growth,
            observation: ObservationSection {
                spec: spec.expect("checked"),
                times: times.expect("checked"),
                sigma,
                data_seed,
            },
            mcmc: McmcSection {
                iterations: iterations.expect("checked"),
                runs,
                burn_in,
                proposal_std,
                seed,
                paper_iterations,
                paper_runs,
            },
            sweep,
            hellinger,
            source: text.to_string(),
        })
    }

    /// Sweep values, or a single cell with no sweep value.
    pub fn cells(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    /// `(m, sigma)` for a sweep cell.
    pub fn cell_settings(&self, cell: Option<f64>) -> (f64, f64) {
        match (&self.sweep, cell) {
            (Some(s), Some(v)) if s.parameter == SweepParameter::M => (v, self.observation.sigma),
            (Some(s), Some(v)) if s.parameter == SweepParameter::Sigma => (self.solver.m, v),
            _ => (self.solver.m, self.observation.sigma),
        }
    }

    /// Switches to the iteration and run counts of the full-size study.
    pub fn apply_paper_scale(&mut self) {
        if let Some(m) = self.mcmc.paper_iterations {
            self.mcmc.iterations = m;
        }
        if let Some(k) = self.mcmc.paper_runs {
            self.mcmc.runs = k;
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.observation.data_seed.unwrap_or(self.mcmc.seed)
    }

    pub fn proposal_std(&self) -> Vec<f64> {
        self.mcmc.proposal_std.clone().unwrap_or_else(|| self.prior.scales().iter().map(|s| 0.1 * s).collect())
    }
}
