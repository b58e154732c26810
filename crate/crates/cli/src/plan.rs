//! Experiment plans: which model, which methods, which resolutions.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use finapprox::config::{parse_key_values, parse_value, reject_unknown};
use finapprox::kernel::{DEFAULT_RESIDUE_GRID, MAX_LEVEL};
use finapprox::queue::QueueModel;
use finapprox::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Finite,
    Mcmc,
    Fluid,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Finite => "finite",
            Method::Mcmc => "mcmc",
            Method::Fluid => "fluid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "finite" => Ok(Method::Finite),
            "mcmc" => Ok(Method::Mcmc),
            "fluid" => Ok(Method::Fluid),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// A preset id (`a` or `b`) or a path to a model configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSource {
    Preset(String),
    File(PathBuf),
}

impl ModelSource {
    pub fn parse(s: &str) -> Self {
        match s.trim() {
            id @ ("a" | "b") => ModelSource::Preset(id.to_string()),
            path => ModelSource::File(PathBuf::from(path)),
        }
    }

    pub fn load(&self) -> Result<QueueModel> {
        match self {
            ModelSource::Preset(id) => QueueModel::preset(id),
            ModelSource::File(path) => QueueModel::from_config_file(path),
        }
    }
}

impl fmt::Display for ModelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSource::Preset(id) => f.write_str(id),
            ModelSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

pub const PLAN_KEYS: [&str; 9] =
    ["model", "methods", "ladder", "grid", "cert_max_r", "seeds", "out", "mcmc_burn_in", "mcmc_thinning"];

/// Smallest accepted residue grid.
pub const MIN_GRID: usize = 1000;

pub const DEFAULT_CERT_MAX_R: u32 = 7;
pub const DEFAULT_BURN_IN: u64 = 100_000;
pub const DEFAULT_THINNING: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub model: ModelSource,
    pub methods: BTreeSet<Method>,
    /// Resolutions `r`, strictly increasing.
    pub ladder: Vec<u32>,
    /// Residue evaluation grid `{k/grid}`.
    pub grid: usize,
    /// Certificates are computed for `r <= cert_max_r`.
    pub cert_max_r: u32,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub mcmc_burn_in: u64,
    pub mcmc_thinning: u64,
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| parse_value(key, v)).collect()
}

impl ExperimentPlan {
    /// Plan with the default grid, certificate limit and seeds `0..5`.
    pub fn new(model: ModelSource, methods: &[Method], ladder: Vec<u32>, out: impl Into<PathBuf>) -> Result<Self> {
        let plan = Self {
            model,
            methods: methods.iter().copied().collect(),
            ladder,
            grid: DEFAULT_RESIDUE_GRID,
            cert_max_r: DEFAULT_CERT_MAX_R,
            seeds: (0..5).collect(),
            out: out.into(),
            mcmc_burn_in: DEFAULT_BURN_IN,
            mcmc_thinning: DEFAULT_THINNING,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// `model`, `methods` and `ladder` are required. Relative model paths
    /// resolve against `base`.
    pub fn from_config_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let map = parse_key_values(text)?;
        reject_unknown(&map, &PLAN_KEYS)?;
        let need = |k: &str| map.get(k).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let model = match ModelSource::parse(need("model")?) {
            ModelSource::File(p) if p.is_relative() => ModelSource::File(base.map_or(p.clone(), |b| b.join(&p))),
            other => other,
        };
        let methods: Vec<Method> = parse_list("methods", need("methods")?)?;
        let plan = Self {
            model,
            methods: methods.into_iter().collect(),
            ladder: parse_list("ladder", need("ladder")?)?,
            grid: map.get("grid").map_or(Ok(DEFAULT_RESIDUE_GRID), |v| parse_value("grid", v))?,
            cert_max_r: map.get("cert_max_r").map_or(Ok(DEFAULT_CERT_MAX_R), |v| parse_value("cert_max_r", v))?,
            seeds: map.get("seeds").map_or(Ok((0..5).collect()), |v| parse_list("seeds", v))?,
            out: PathBuf::from(map.get("out").map_or("bench_out", String::as_str)),
            mcmc_burn_in: map.get("mcmc_burn_in").map_or(Ok(DEFAULT_BURN_IN), |v| parse_value("mcmc_burn_in", v))?,
            mcmc_thinning: map.get("mcmc_thinning").map_or(Ok(DEFAULT_THINNING), |v| parse_value("mcmc_thinning", v))?,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("method set is empty".into()));
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("ladder is empty".into()));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("ladder must be strictly ascending, got {:?}", self.ladder)));
        }
        if let Some(r) = self.ladder.iter().find(|&&r| r == 0 || r > MAX_LEVEL) {
            return Err(Error::Config(format!("level {r} outside 1..={MAX_LEVEL}")));
        }
        if self.grid < MIN_GRID {
            return Err(Error::Config(format!("residue grid {} below {MIN_GRID}", self.grid)));
        }
        if self.mcmc_burn_in == 0 || self.mcmc_thinning == 0 {
            return Err(Error::Config("mcmc burn-in and thinning must be positive".into()));
        }
        if self.methods.contains(&Method::Mcmc) && self.seeds.is_empty() {
            return Err(Error::Config("mcmc needs at least one seed".into()));
        }
        Ok(())
    }

    /// Canonical text; parsing it gives back the same plan.
    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        format!(
            "model = {}\nmethods = {}\nladder = {}\ngrid = {}\ncert_max_r = {}\nseeds = {}\nmcmc_burn_in = {}\nmcmc_thinning = {}\nout = {}\n",
            self.model,
            join(self.methods.iter().map(|m| m.to_string()).collect()),
            join(self.ladder.iter().map(|r| r.to_string()).collect()),
            self.grid,
            self.cert_max_r,
            join(self.seeds.iter().map(|s| s.to_string()).collect()),
            self.mcmc_burn_in,
            self.mcmc_thinning,
            self.out.display()
        )
    }
}
