//! INI-style run configuration: `[problem]`, `[mesh]`, `[time]`, `[output]`
//! sections with `key = value` lines. A scenario name expands to its full
//! configuration; every other key overrides one value.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::Variant;
use crate::error::{Error, Result};
use crate::harness::scenario::{scenario, Scenario};
use crate::linalg::SolverMode;

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_ini(text: &str) -> Result<Sections> {
    let mut sections = Sections::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |detail: String| Error::Parse {
            what: "config",
            detail: format!("line {}: {detail}", lineno + 1),
        };
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(format!("bad section header {line:?}")))?;
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                return Err(err(format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let section = current.as_ref().ok_or_else(|| err("key outside of a section".into()))?;
        let entries = sections.get_mut(section).expect("inserted with header");
        if entries.insert(key.trim().to_string(), value.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key {}", key.trim())));
        }
    }
    Ok(sections)
}

/// Fully expanded configuration of a `solve` run or a study.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Mesh level of a single solve.
    pub level: usize,
    /// Level range of a spatial study.
    pub levels: (usize, usize),
    pub tau: f64,
    pub final_time: f64,
    pub stages: usize,
    pub solver: SolverMode,
    pub output_dir: PathBuf,
    pub record_energy: bool,
    pub record_timing: bool,
}

impl RunConfig {
    /// Defaults of a named scenario.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let scenario = scenario(name)?;
        Ok(Self {
            tau: scenario.tau0,
            final_time: scenario.final_time,
            scenario,
            level: 3,
            levels: (2, 5),
            stages: 1,
            solver: SolverMode::DirectFactorization,
            output_dir: PathBuf::from("out"),
            record_energy: true,
            record_timing: true,
        })
    }
}

fn value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse {raw:?}")))
}

fn bool_value(section: &str, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("[{section}] {key}: expected a boolean, got {raw:?}"))),
    }
}

/// Parses `a..b` (inclusive) or a single level.
pub fn parse_level_range(raw: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad level range {raw:?}, expected a..b"));
    let (a, b) = match raw.split_once("..") {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().trim_start_matches('=').parse().map_err(|_| bad())?,
        ),
        None => {
            let l = raw.trim().parse().map_err(|_| bad())?;
            (l, l)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn parse_solver(raw: &str) -> Result<SolverMode> {
    match raw {
        "direct" => Ok(SolverMode::DirectFactorization),
        "iterative" => Ok(SolverMode::iterative_general()),
        other => Err(Error::Config(format!("unknown solver {other:?}, expected direct or iterative"))),
    }
}

fn parse_vector(section: &str, key: &str, raw: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("[{section}] {key}: expected two comma-separated numbers")));
    }
    Ok([value(section, key, parts[0])?, value(section, key, parts[1])?])
}

fn apply_problem_key(s: &mut Scenario, key: &str, raw: &str) -> Result<()> {
    let sec = "problem";
    let spec = &mut s.spec;
    let num = |raw: &str| value::<f64>(sec, key, raw);
    match key {
        "mu" => spec.mu = num(raw)?,
        "beta" => spec.beta = num(raw)?,
        "kappa" => spec.kappa = num(raw)?,
        "alpha_bulk" => spec.alpha_bulk = num(raw)?,
        "alpha_surf" => spec.alpha_surf = num(raw)?,
        "damping_bulk" => spec.damping_bulk = num(raw)?,
        "damping_surf" => spec.damping_surf = num(raw)?,
        "velocity_bulk" | "velocity_surf" => {
            if spec.variant != Variant::Advective {
                return Err(Error::Config(format!("{key} only applies to advective scenarios")));
            }
            let field: crate::assembly::VectorField = if raw == "rotation" {
                Arc::new(|x| [-x[1], x[0]])
            } else {
                let v = parse_vector(sec, key, raw)?;
                Arc::new(move |_| v)
            };
            if key == "velocity_bulk" {
                spec.velocity_bulk = Some(field);
            } else {
                spec.velocity_surf = Some(field);
            }
        }
        other => return Err(Error::Config(format!("unknown key [problem] {other}"))),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut sections = parse_ini(text)?;
    for name in sections.keys() {
        if !["problem", "mesh", "time", "output"].contains(&name.as_str()) {
            return Err(Error::Config(format!("unknown section [{name}]")));
        }
    }
    let mut problem = sections.remove("problem").unwrap_or_default();
    let name = problem
        .remove("scenario")
        .ok_or_else(|| Error::Config("[problem] scenario is required".into()))?;
    let mut cfg = RunConfig::for_scenario(&name)?;
    for (key, raw) in &problem {
        apply_problem_key(&mut cfg.scenario, key, raw)?;
    }
    cfg.scenario.spec.validate()?;

    for (key, raw) in sections.remove("mesh").unwrap_or_default() {
        match key.as_str() {
            "seed" => {
                cfg.scenario.seed_vertices = value("mesh", &key, &raw)?;
            }
            "level" => cfg.level = value("mesh", &key, &raw)?,
            "levels" => cfg.levels = parse_level_range(&raw)?,
            other => return Err(Error::Config(format!("unknown key [mesh] {other}"))),
        }
    }
    for (key, raw) in sections.remove("time").unwrap_or_default() {
        match key.as_str() {
            "tau" => cfg.tau = value("time", &key, &raw)?,
            "final_time" => cfg.final_time = value("time", &key, &raw)?,
            "stages" => cfg.stages = value("time", &key, &raw)?,
            "solver" => cfg.solver = parse_solver(&raw)?,
            other => return Err(Error::Config(format!("unknown key [time] {other}"))),
        }
    }
    for (key, raw) in sections.remove("output").unwrap_or_default() {
        match key.as_str() {
            "dir" => cfg.output_dir = PathBuf::from(raw),
            "energy" => cfg.record_energy = bool_value("output", &key, &raw)?,
            "timing" => cfg.record_timing = bool_value("output", &key, &raw)?,
            other => return Err(Error::Config(format!("unknown key [output] {other}"))),
        }
    }
    cfg.scenario.final_time = cfg.final_time;
    cfg.scenario.tau0 = cfg.tau;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
