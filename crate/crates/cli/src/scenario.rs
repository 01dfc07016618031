use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ltg::config::{ConfigError, GameFile, InterventionFile, MechanismFile, Num};
use ltg::model::GameSpec;
use ltg::scalar::{Rational, Scalar};

use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    UniformizeCheck,
    MpeVerify,
    Inertia,
    Dominance,
    Monotonicity,
    Pivot,
    Impossibility,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::UniformizeCheck => "uniformize-check",
            Kind::MpeVerify => "mpe-verify",
            Kind::Inertia => "inertia",
            Kind::Dominance => "dominance",
            Kind::Monotonicity => "monotonicity",
            Kind::Pivot => "pivot",
            Kind::Impossibility => "impossibility",
        }
    }
}

/// The two-player status-quo family: `κ = budget + 1`, one edge.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub budget: f64,
    pub horizon: f64,
    #[serde(default)]
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetEntry {
    pub kappa_l: Num,
    pub kappa_h: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub kappa_l: Vec<Num>,
    pub kappa_h: Vec<Num>,
    #[serde(default = "yes")]
    pub participation: bool,
    #[serde(default)]
    pub state_flow: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub game: PathBuf,
    pub intervention: PathBuf,
    #[serde(default)]
    pub expect_strict: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub games: Vec<PathBuf>,
    #[serde(default)]
    pub game: Option<PathBuf>,
    #[serde(default)]
    pub intervention: Option<PathBuf>,
    #[serde(default)]
    pub mechanism: Option<PathBuf>,
    #[serde(default)]
    pub gamma: Option<Num>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub cap: Option<u64>,
    /// Status-quo controls (one per player) when a game file is used.
    #[serde(default)]
    pub status_quo: Option<Vec<usize>>,
    /// Expected verdict of `check_epic` on the mechanism file.
    #[serde(default)]
    pub expect_epic: Option<bool>,
    #[serde(default)]
    pub family: Option<FamilyEntry>,
    #[serde(default)]
    pub preset: Option<PresetEntry>,
    #[serde(default)]
    pub grid: Option<GridEntry>,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A list of scenarios run together.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunList {
    pub scenarios: Vec<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub gamma: Option<String>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// Failures that map to exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Missing(String),
}

pub fn read_input(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io { path: path.display().to_string(), source })
}

fn parse_err(path: &Path) -> impl FnOnce(ConfigError) -> InputError + '_ {
    move |source| InputError::Config { path: path.display().to_string(), source }
}

impl ScenarioConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), InputError> {
        let text = read_input(path)?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let cfg = Self::parse(&text, &dir).map_err(parse_err(path))?;
        Ok((cfg, text))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), InputError> {
        if let Some(g) = &o.gamma {
            self.gamma = Some(Num::Text(g.clone()));
        }
        if o.tol.is_some() {
            self.tol = o.tol;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-9)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn gamma_rational(&self, default: i64) -> Result<Rational, InputError> {
        match &self.gamma {
            Some(g) => g.rational().map_err(|source| InputError::Config { path: "gamma".into(), source }),
            None => Ok(Rational::from_integer(default.into())),
        }
    }

    pub fn gamma_f64(&self, default: i64) -> Result<f64, InputError> {
        Ok(self.gamma_rational(default)?.to_f64())
    }

    /// Reads, digests and parses a game file.
    pub fn game<S: Scalar>(&self, report: &mut Report, p: &Path) -> Result<GameSpec<S>, InputError> {
        let path = self.resolve(p);
        let text = read_input(&path)?;
        report.input(&p.display().to_string(), text.as_bytes());
        GameFile::parse(&text).and_then(|g| g.build()).map_err(parse_err(&path))
    }

    pub fn intervention(&self, report: &mut Report, p: &Path) -> Result<InterventionFile, InputError> {
        let path = self.resolve(p);
        let text = read_input(&path)?;
        report.input(&p.display().to_string(), text.as_bytes());
        InterventionFile::parse(&text).map_err(parse_err(&path))
    }

    pub fn mechanism(&self, report: &mut Report, p: &Path) -> Result<MechanismFile, InputError> {
        let path = self.resolve(p);
        let text = read_input(&path)?;
        report.input(&p.display().to_string(), text.as_bytes());
        MechanismFile::parse(&text).map_err(parse_err(&path))
    }

    pub fn require<'a, T>(&self, v: &'a Option<T>, what: &str) -> Result<&'a T, InputError> {
        v.as_ref().ok_or_else(|| InputError::Missing(format!("{} scenario needs `{what}`", self.kind.name())))
    }
}

impl RunList {
    pub fn load(path: &Path) -> Result<(Self, String), InputError> {
        let text = read_input(path)?;
        let list = toml::from_str(&text).map_err(|e| InputError::Config { path: path.display().to_string(), source: e.into() })?;
        Ok((list, text))
    }
}

/// Output directory: `--out`, then the config's `out`, then
/// `$LTG_OUT/<name>` (default root `ltg-out`).
pub fn output_dir(cli_out: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(o) = cli_out {
        return o.to_path_buf();
    }
    if let Some(o) = &cfg.out {
        return cfg.resolve(o);
    }
    let root = std::env::var_os("LTG_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("ltg-out"));
    root.join(cfg.name())
}
