//! Scenario configuration: a versioned TOML schema with bundled presets.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Bundled example configurations, resolvable by bare name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("toy_s6", include_str!("../configs/toy_s6.toml")),
    ("finite_dim_short", include_str!("../configs/finite_dim_short.toml")),
    ("lemma_suite", include_str!("../configs/lemma_suite.toml")),
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default = "default_kind")]
    pub kind: Kind,
    /// Seed for every randomized element; mandatory whenever one is present.
    pub seed: Option<u64>,
    pub grid: Option<GridSpec>,
    pub partition: Option<PartitionSpec>,
    pub state: Option<StateSpec>,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    pub time: TimeSpec,
    pub observable: Option<ObservableSpec>,
    pub povm: Option<PovmSpec>,
    #[serde(default)]
    pub lemmas: LemmaSpec,
    pub finite_dim: Option<FiniteDimSpec>,
    #[serde(default)]
    pub toy: ToySpec,
}

fn default_kind() -> Kind {
    Kind::Continuous
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Continuous,
    FiniteDim,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub support_lo: f64,
    pub support_hi: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub count: Option<usize>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "family")]
pub enum StateSpec {
    UniformCells { cells: Vec<usize> },
    GaussianProfile { center: f64, sigma: f64 },
    RandomSeeded {},
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "transform")]
pub enum DynamicsSpec {
    #[default]
    Identity,
    Power {
        exponent: f64,
    },
    Table {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub values: Vec<f64>,
    /// 0 requests the minimum admissible sample count.
    #[serde(default)]
    pub samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum ObservableSpec {
    Random {},
    Diagonal { values: Vec<f64> },
    File { path: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmSpec {
    /// Outcome count of each POVM in the family.
    pub outcomes: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSpec {
    #[serde(default)]
    pub lemma1: bool,
    #[serde(default)]
    pub lemma2: bool,
    #[serde(default)]
    pub lemma3: bool,
    #[serde(default = "default_dim_cap")]
    pub lemma3_dim_cap: usize,
}

fn default_dim_cap() -> usize {
    4096
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            lemma1: false,
            lemma2: false,
            lemma3: false,
            lemma3_dim_cap: default_dim_cap(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteDimSpec {
    pub dim: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {
    /// Evaluate the uniform-cell closed form and its envelope-substituted
    /// twin alongside the generic bound. Requires a uniform-cells state.
    #[serde(default)]
    pub closed_form: bool,
}

impl Config {
    /// Parse and validate a TOML scenario description.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config from a path, or fall back to a bundled preset name.
    pub fn load(name_or_path: &str) -> Result<Self> {
        let text = if std::path::Path::new(name_or_path).exists() {
            std::fs::read_to_string(name_or_path)
                .with_context(|| format!("reading config file {name_or_path}"))?
        } else if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name_or_path) {
            (*text).to_string()
        } else {
            bail!(
                "config '{name_or_path}' is neither a file nor a bundled preset \
                 (bundled: {})",
                BUNDLED
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        };
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (this build expects {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        match self.kind {
            Kind::Continuous => {
                if self.grid.is_none() || self.partition.is_none() || self.state.is_none() {
                    bail!("continuous scenarios need [grid], [partition] and [state] sections");
                }
                if self.observable.is_none() {
                    bail!("continuous scenarios need an [observable] section");
                }
                let part = self.partition.as_ref().unwrap();
                if part.count.is_none() == part.width.is_none() {
                    bail!("[partition] needs exactly one of `count` or `width`");
                }
            }
            Kind::FiniteDim => {
                if self.finite_dim.is_none() {
                    bail!("finite-dim scenarios need a [finite_dim] section");
                }
            }
        }
        if self.time.values.is_empty() {
            bail!("[time] values must not be empty");
        }
        if self.time.values.iter().any(|&t| !(t > 0.0)) {
            bail!("[time] values must be strictly positive");
        }
        if self.randomized() && self.seed.is_none() {
            bail!("a seed is mandatory when any randomized element is configured");
        }
        Ok(())
    }

    /// Re-run the cheap field checks after a sweep axis rewrote the config;
    /// structural errors (e.g. a width that no longer tiles the grid) surface
    /// when the scenario is built.
    pub fn revalidate(&self) -> Result<()> {
        if self.time.values.iter().any(|&t| !(t > 0.0)) {
            bail!("[time] values must be strictly positive");
        }
        Ok(())
    }

    /// Whether any element of the scenario draws random numbers.
    pub fn randomized(&self) -> bool {
        matches!(self.state, Some(StateSpec::RandomSeeded {}))
            || matches!(self.observable, Some(ObservableSpec::Random {}))
            || self.povm.is_some()
            || self.kind == Kind::FiniteDim
    }
}

/// One sweep axis: a scenario field name and the values it takes.
#[derive(Debug, Clone)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// Parse `NAME=v1,v2,v3`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, vals) = text
            .split_once('=')
            .ok_or_else(|| anyhow!("axis '{text}' is not of the form NAME=v1,v2,..."))?;
        let name = name.trim().to_string();
        if !matches!(name.as_str(), "T" | "delta" | "count" | "n_points" | "seed") {
            bail!("unknown axis '{name}' (known: T, delta, count, n_points, seed)");
        }
        let values = vals
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("axis value '{v}' is not a number"))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            bail!("axis '{name}' has no values");
        }
        Ok(Self { name, values })
    }

    /// Apply one value of this axis to a config.
    pub fn apply(&self, cfg: &mut Config, value: f64) -> Result<()> {
        match self.name.as_str() {
            "T" => cfg.time.values = vec![value],
            "delta" => {
                let part = cfg
                    .partition
                    .as_mut()
                    .ok_or_else(|| anyhow!("axis 'delta' needs a [partition] section"))?;
                part.width = Some(value);
                part.count = None;
            }
            "count" => {
                let part = cfg
                    .partition
                    .as_mut()
                    .ok_or_else(|| anyhow!("axis 'count' needs a [partition] section"))?;
                part.count = Some(value as usize);
                part.width = None;
            }
            "n_points" => {
                let grid = cfg
                    .grid
                    .as_mut()
                    .ok_or_else(|| anyhow!("axis 'n_points' needs a [grid] section"))?;
                grid.n_points = value as usize;
            }
            "seed" => cfg.seed = Some(value as u64),
            other => bail!("unknown axis '{other}'"),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        for (name, text) in BUNDLED {
            let cfg = Config::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.schema_version, SCHEMA_VERSION);
        }
    }

    #[test]
    fn malformed_configs_are_rejected() {
        assert!(Config::parse("schema_version = 1").is_err());
        assert!(Config::parse("not even toml [").is_err());
        // Unknown field.
        let text = r#"
schema_version = 1
bogus = 3
[time]
values = [1.0]
"#;
        assert!(Config::parse(text).is_err());
        // Missing seed with randomized observable.
        let text = r#"
schema_version = 1
[grid]
support_lo = 0.0
support_hi = 1.0
n_points = 16
[partition]
count = 4
[state]
family = "gaussian-profile"
center = 0.5
sigma = 0.2
[time]
values = [1.0]
[observable]
kind = "random"
"#;
        assert!(Config::parse(text).unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn axis_parsing() {
        let axis = Axis::parse("T=1,10,100").unwrap();
        assert_eq!(axis.name, "T");
        assert_eq!(axis.values, vec![1.0, 10.0, 100.0]);
        assert!(Axis::parse("bogus=1").is_err());
        assert!(Axis::parse("T").is_err());
        assert!(Axis::parse("T=a,b").is_err());
    }
}
