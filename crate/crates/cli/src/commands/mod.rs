//! Subcommands. Each one maps a resolved [`Config`] to an [`Outcome`]
//! without touching the filesystem.

mod closure;
mod hierarchy;
mod rd;
mod selftest;
mod she;

use clap::ValueEnum;
use polylab::she::{Discards, SheConfig};
use polylab::{make_kernel, CovarianceKernel, Grid, InitialData, MollifierSpec};

use crate::config::{key, Config, KeySpec};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Subcommand {
    RdRun,
    RdScaling,
    SheRun,
    QnEstimate,
    HierarchyCheck,
    GeneratorCheck,
    ErrorForm,
    MsdTrend,
    ClosureCompare,
    Selftest,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Self::RdRun,
        Self::RdScaling,
        Self::SheRun,
        Self::QnEstimate,
        Self::HierarchyCheck,
        Self::GeneratorCheck,
        Self::ErrorForm,
        Self::MsdTrend,
        Self::ClosureCompare,
        Self::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RdRun => "rd-run",
            Self::RdScaling => "rd-scaling",
            Self::SheRun => "she-run",
            Self::QnEstimate => "qn-estimate",
            Self::HierarchyCheck => "hierarchy-check",
            Self::GeneratorCheck => "generator-check",
            Self::ErrorForm => "error-form",
            Self::MsdTrend => "msd-trend",
            Self::ClosureCompare => "closure-compare",
            Self::Selftest => "selftest",
        }
    }

    /// Every key the subcommand reads, with its default.
    pub fn keys(self) -> Vec<KeySpec> {
        let mut k = match self {
            Self::RdRun => rd::run_keys(),
            Self::RdScaling => rd::scaling_keys(),
            Self::SheRun => she::run_keys(),
            Self::QnEstimate => she::qn_keys(),
            Self::HierarchyCheck => hierarchy::weak_keys(),
            Self::GeneratorCheck => hierarchy::generator_keys(),
            Self::ErrorForm => hierarchy::error_keys(),
            Self::MsdTrend => hierarchy::msd_keys(),
            Self::ClosureCompare => closure::keys(),
            Self::Selftest => selftest::keys(),
        };
        k.extend_from_slice(COMMON_KEYS);
        k
    }

    pub fn uses_seed(self) -> bool {
        self.keys().iter().any(|k| k.key == "mc.seed")
    }
}

impl std::fmt::Display for Subcommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

const COMMON_KEYS: &[KeySpec] = &[
    key("out.dir", "runs", "directory under which run directories are created"),
    key("threads", "0", "worker threads; 0 uses every available core"),
];

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Files, scalar metrics and checks produced by one subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub metrics: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, pass, detail));
    }

    pub fn get_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn get_metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.0 == name).map(|m| m.1)
    }

    pub fn get_file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    fn discards(&mut self, what: &str, d: &Discards) {
        let detail = match d.0.first() {
            Some((i, why)) => format!("{} discarded, first #{i}: {why}", d.len()),
            None => "none".into(),
        };
        self.check(format!("{what}_no_discards"), d.is_empty(), detail);
    }

    pub fn checks_csv(&self) -> String {
        let mut s = String::from("name,pass,detail\n");
        for c in &self.checks {
            s.push_str(&format!("{},{},\"{}\"\n", c.name, c.pass, c.detail.replace('"', "'")));
        }
        s
    }
}

/// Runs `sub` on a resolved configuration.
pub fn execute(sub: Subcommand, cfg: &Config) -> Result<Outcome> {
    match sub {
        Subcommand::RdRun => rd::rd_run(cfg),
        Subcommand::RdScaling => rd::rd_scaling(cfg),
        Subcommand::SheRun => she::she_run(cfg),
        Subcommand::QnEstimate => she::qn_estimate(cfg),
        Subcommand::HierarchyCheck => hierarchy::hierarchy_check(cfg),
        Subcommand::GeneratorCheck => hierarchy::generator_check(cfg),
        Subcommand::ErrorForm => hierarchy::error_form(cfg),
        Subcommand::MsdTrend => hierarchy::msd_trend(cfg),
        Subcommand::ClosureCompare => closure::closure_compare(cfg),
        Subcommand::Selftest => selftest::selftest(cfg),
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn grid(c: &Config) -> Result<Grid> {
    Ok(Grid::new(c.usize("grid.d")?, c.f64("grid.L")?, c.usize("grid.N")?)?)
}

pub(crate) fn kernel(c: &Config, grid: &Grid) -> Result<CovarianceKernel> {
    let width = || c.f64("model.phi_width");
    match c.string("model.kernel")?.as_str() {
        "dirac" => Ok(CovarianceKernel::dirac(grid)?),
        "bump" => Ok(make_kernel(MollifierSpec::smooth(width()?), grid)?),
        "box" => Ok(make_kernel(MollifierSpec::boxcar(width()?), grid)?),
        other => Err(CliError::Config(format!("model.kernel = {other}: expected dirac, bump or box"))),
    }
}

pub(crate) fn initial(c: &Config) -> Result<InitialData> {
    Ok(InitialData::parse(&c.string("init.q0")?)?)
}

pub(crate) fn threads(c: &Config) -> Result<Option<usize>> {
    Ok(match c.usize("threads")? {
        0 => None,
        n => Some(n),
    })
}

/// `time.dt`, where `auto` means `Δx²/2`.
pub(crate) fn she_dt(c: &Config, grid: &Grid) -> Result<f64> {
    match c.string("time.dt")?.as_str() {
        "auto" => Ok(0.5 * grid.spacing().powi(2)),
        _ => c.f64("time.dt"),
    }
}

/// SHE configuration from the `grid`, `model`, `init`, `time` and `mc` keys.
pub(crate) fn she_config(c: &Config, t_final: f64) -> Result<SheConfig> {
    let grid = grid(c)?;
    let kernel = kernel(c, &grid)?;
    let dt = she_dt(c, &grid)?;
    let mut cfg =
        SheConfig::new(kernel, c.f64("model.beta")?, dt, t_final, c.usize("mc.realizations")?, c.u64("mc.seed")?);
    cfg.initial = initial(c)?;
    cfg.threads = threads(c)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Flat index of a point given by coordinates, which must lie on the grid.
pub(crate) fn grid_index(grid: &Grid, x: &[f64]) -> Result<usize> {
    grid.index_of(x)
        .ok_or_else(|| CliError::Config(format!("point {x:?} is not a grid point (spacing {})", grid.spacing())))
}

/// Points along the first axis, other coordinates zero.
pub(crate) fn axis_points(grid: &Grid, xs: &[f64]) -> Result<Vec<usize>> {
    let d = grid.dim();
    xs.iter()
        .map(|&x| {
            let mut p = [0.0; 3];
            p[0] = x;
            grid_index(grid, &p[..d])
        })
        .collect()
}
