//! Plain-text sectioned configuration:
//!
//! ```text
//! # comment
//! [space]
//! kind = shift
//! N = 2
//! lambda = 2
//! depth = 4
//!
//! [task]
//! t = 1.5, 2, 3
//! ```
//!
//! Keys are case-insensitive; values are trimmed strings. Lists are comma
//! separated.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::spaces::Space;

pub const SECTIONS: [&str; 5] = ["space", "task", "output", "tolerance", "run"];

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Section {
    /// Line of the `[name]` header.
    pub line: usize,
    pub entries: BTreeMap<String, Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn err(&self, entry: &Entry, message: String) -> Error {
        Error::Config { line: entry.line, message }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).map_or(default, |e| e.value.as_str())
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(e, format!("`{key}` must be a finite number, got `{}`", e.value)))
            })
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|_| self.err(e, format!("`{key}` must be a nonnegative integer, got `{}`", e.value)))
            })
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    pub fn bool_opt(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|e| match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                other => Err(self.err(e, format!("`{key}` must be a boolean, got `{other}`"))),
            })
            .transpose()
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key, |s| s.parse::<f64>().ok().filter(|v| v.is_finite()), "finite numbers")
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.list(key, |s| s.parse::<usize>().ok(), "nonnegative integers")
    }

    fn list<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let items: Option<Vec<T>> = e.value.split(',').map(|s| parse(s.trim())).collect();
        match items {
            Some(v) if !v.is_empty() => Ok(Some(v)),
            _ => Err(self.err(e, format!("`{key}` must be a comma-separated list of {what}"))),
        }
    }

    /// Fails on the first key outside `allowed`.
    pub fn only(&self, name: &str, allowed: &[&str]) -> Result<()> {
        for (key, e) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(
                    self.err(e, format!("unknown key `{key}` in [{name}] (expected one of: {})", allowed.join(", ")))
                );
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub sections: BTreeMap<String, Section>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Config { line, message };
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{s}`")))?
                    .trim()
                    .to_ascii_lowercase();
                let name = if name == "tolerances" { "tolerance".to_string() } else { name };
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(err(format!("unknown section [{name}] (expected one of: {})", SECTIONS.join(", "))));
                }
                if sections.contains_key(&name) {
                    return Err(err(format!("section [{name}] appears twice")));
                }
                sections.insert(name.clone(), Section { line, entries: BTreeMap::new() });
                current = Some(name);
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{s}`")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(err(format!("malformed key `{}`", key)));
            }
            let name = current.as_ref().ok_or_else(|| err(format!("`{key}` appears before any section")))?;
            let section = sections.get_mut(name).expect("section inserted at its header");
            if section.entries.contains_key(&key) {
                return Err(err(format!("duplicate key `{key}` in [{name}]")));
            }
            section.entries.insert(key, Entry { value: value.trim().to_string(), line });
        }
        Ok(ConfigFile { sections })
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }
}

/// Space description of the `[space]` section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceSpec {
    Shift { symbols: usize, lambda: f64, depth: usize },
    Interval { a: f64, b: f64, nodes: usize },
    Circle { nodes: usize },
}

impl SpaceSpec {
    pub fn from_section(s: &Section) -> Result<Self> {
        let kind = s.get("kind").ok_or(Error::Config {
            line: s.line,
            message: "[space] needs `kind` (shift | interval | circle)".into(),
        })?;
        let spec = match kind.value.to_ascii_lowercase().as_str() {
            "shift" => {
                s.only("space", &["kind", "n", "lambda", "depth"])?;
                SpaceSpec::Shift {
                    symbols: s.usize_or("n", 2)?,
                    lambda: s.f64_or("lambda", 2.0)?,
                    depth: s.usize_or("depth", 6)?,
                }
            }
            "interval" => {
                s.only("space", &["kind", "a", "b", "nodes"])?;
                SpaceSpec::Interval {
                    a: s.f64_or("a", -1.0)?,
                    b: s.f64_or("b", 1.0)?,
                    nodes: s.usize_or("nodes", 512)?,
                }
            }
            "circle" => {
                s.only("space", &["kind", "nodes"])?;
                SpaceSpec::Circle { nodes: s.usize_or("nodes", 512)? }
            }
            other => {
                return Err(Error::Config {
                    line: kind.line,
                    message: format!("unknown space kind `{other}` (expected shift | interval | circle)"),
                })
            }
        };
        spec.build().map_err(|e| Error::Config { line: s.line, message: e.to_string() })?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<Space> {
        match *self {
            SpaceSpec::Shift { symbols, lambda, depth } => Space::shift(symbols, lambda, depth),
            SpaceSpec::Interval { a, b, nodes } => Space::interval(a, b, nodes),
            SpaceSpec::Circle { nodes } => Space::circle(nodes),
        }
    }
}

/// Overridable tolerances of the `[tolerance]` section.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Tolerances {
    /// Relative gap below which eigenvalues are grouped.
    pub multiplicity: f64,
    /// Largest accepted deviation of a computed spectrum from its oracle.
    pub oracle: f64,
    /// Largest accepted commutator defect.
    pub commutator: f64,
    /// Largest accepted conformal identity defect.
    pub conformal: f64,
    /// Largest accepted unitarity defect.
    pub unitarity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            multiplicity: crate::form_engine::DEFAULT_MULTIPLICITY_TOL,
            oracle: 1e-6,
            commutator: 1e-3,
            conformal: 1e-10,
            unitarity: 1e-6,
        }
    }
}

impl Tolerances {
    fn from_section(s: &Section) -> Result<Self> {
        s.only("tolerance", &["multiplicity", "oracle", "commutator", "conformal", "unitarity"])?;
        let d = Tolerances::default();
        let t = Tolerances {
            multiplicity: s.f64_or("multiplicity", d.multiplicity)?,
            oracle: s.f64_or("oracle", d.oracle)?,
            commutator: s.f64_or("commutator", d.commutator)?,
            conformal: s.f64_or("conformal", d.conformal)?,
            unitarity: s.f64_or("unitarity", d.unitarity)?,
        };
        for (key, v) in [
            ("multiplicity", t.multiplicity),
            ("oracle", t.oracle),
            ("commutator", t.commutator),
            ("conformal", t.conformal),
            ("unitarity", t.unitarity),
        ] {
            if !(v > 0.0) {
                let line = s.get(key).map_or(s.line, |e| e.line);
                return Err(Error::Config { line, message: format!("tolerance `{key}` must be positive") });
            }
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Spectrum,
    HeatTrace,
    Threshold,
    Dini,
    Commutator,
    Conformal,
    VerifyAhlfors,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Spectrum,
        Task::HeatTrace,
        Task::Threshold,
        Task::Dini,
        Task::Commutator,
        Task::Conformal,
        Task::VerifyAhlfors,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::HeatTrace => "heat-trace",
            Task::Threshold => "threshold",
            Task::Dini => "dini",
            Task::Commutator => "commutator",
            Task::Conformal => "conformal",
            Task::VerifyAhlfors => "verify-ahlfors",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// One validated run: a space, one task with its parameters, outputs,
/// tolerances and a seed.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub space: Option<SpaceSpec>,
    pub task: Task,
    pub params: Section,
    pub out_dir: PathBuf,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub plot: bool,
}

impl ExperimentConfig {
    /// Validates `file` for `task`. `out_dir` and `seed` override the file.
    pub fn from_file(
        file: &ConfigFile,
        task: Task,
        out_dir: Option<PathBuf>,
        seed: Option<u64>,
        plot: bool,
    ) -> Result<Self> {
        let space = file.section("space").map(SpaceSpec::from_section).transpose()?;
        let mut params = file.section("task").cloned().unwrap_or_default();
        if let Some(e) = params.entries.remove("name") {
            if Task::from_name(&e.value) != Some(task) {
                return Err(Error::Config {
                    line: e.line,
                    message: format!("config names task `{}` but `{}` was requested", e.value, task.name()),
                });
            }
        }
        let output = file.section("output").cloned().unwrap_or_default();
        output.only("output", &["dir", "plot"])?;
        let out_dir = out_dir
            .or_else(|| output.get("dir").map(|e| PathBuf::from(&e.value)))
            .unwrap_or_else(|| PathBuf::from("out"));
        let plot = plot || output.bool_opt("plot")?.unwrap_or(false);
        let tolerances = file.section("tolerance").map(Tolerances::from_section).transpose()?.unwrap_or_default();
        let run = file.section("run").cloned().unwrap_or_default();
        run.only("run", &["seed"])?;
        let seed = match seed {
            Some(s) => s,
            None => match run.get("seed") {
                Some(e) => e.value.parse::<u64>().map_err(|_| Error::Config {
                    line: e.line,
                    message: format!("`seed` must be an unsigned integer, got `{}`", e.value),
                })?,
                None => DEFAULT_SEED,
            },
        };
        Ok(ExperimentConfig { space, task, params, out_dir, tolerances, seed, plot })
    }

    /// The configured space, or a config error when the task needs one.
    pub fn space(&self) -> Result<Space> {
        match self.space {
            Some(spec) => spec.build(),
            None => {
                Err(Error::Config { line: 0, message: format!("task `{}` needs a [space] section", self.task.name()) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_lists() {
        let text = "# demo\n[space]\nkind = shift\nN = 3\n\n[task]\nt = 1.5, 2\nlevels=1,2,3\n[run]\nseed = 9\n";
        let f = ConfigFile::parse(text).unwrap();
        let spec = SpaceSpec::from_section(f.section("space").unwrap()).unwrap();
        assert_eq!(spec, SpaceSpec::Shift { symbols: 3, lambda: 2.0, depth: 6 });
        let task = f.section("task").unwrap();
        assert_eq!(task.f64_list("t").unwrap(), Some(vec![1.5, 2.0]));
        assert_eq!(task.usize_list("levels").unwrap(), Some(vec![1, 2, 3]));
        let cfg = ExperimentConfig::from_file(&f, Task::HeatTrace, None, None, false).unwrap();
        assert_eq!(cfg.seed, 9);
        let cfg = ExperimentConfig::from_file(&f, Task::HeatTrace, None, Some(4), false).unwrap();
        assert_eq!(cfg.seed, 4);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let line_of = |text: &str| match ConfigFile::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("[space]\nkind shift\n"), 2);
        assert_eq!(line_of("\nkind = shift\n"), 2);
        assert_eq!(line_of("[space]\n[bogus]\n"), 2);
        assert_eq!(line_of("[space]\nkind = a\nkind = b\n"), 3);
        assert_eq!(line_of("[space\n"), 1);
        let f = ConfigFile::parse("[space]\nkind = shift\nN = two\n").unwrap();
        match SpaceSpec::from_section(f.section("space").unwrap()) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = ConfigFile::parse("[space]\nkind = shift\nN = 1\n").unwrap();
        assert!(matches!(SpaceSpec::from_section(f.section("space").unwrap()), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn task_name_must_match() {
        let f = ConfigFile::parse("[task]\nname = dini\n").unwrap();
        assert!(ExperimentConfig::from_file(&f, Task::Dini, None, None, false).is_ok());
        assert!(matches!(
            ExperimentConfig::from_file(&f, Task::Spectrum, None, None, false),
            Err(Error::Config { line: 2, .. })
        ));
        let cfg = ExperimentConfig::from_file(&ConfigFile::default(), Task::Dini, None, None, false).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }
}
