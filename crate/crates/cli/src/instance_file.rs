//! The versioned TOML instance format.
//!
//! ```toml
//! version = 1
//! name = "five_bus"
//! buses = 5
//! slack = 0
//! tau = 0.02
//! segments = 4
//! epsilon = 1e-4
//! inelastic = [0.0, 35.0, 25.0, 15.0, 0.0]
//!
//! [[lines]]
//! from = 0
//! to = 1
//! reactance = 0.0281
//! limit = 600.0
//!
//! [[parameters]]
//! name = "wind C"
//! lower = -20.0
//! upper = 30.0
//!
//! [[users]]
//! name = "A"
//! kind = "consumer"
//! bus = 0
//! demand = 230.0
//! lower = 200.0
//! upper = 300.0
//! alpha = 0.003
//! beta = 1.8
//! zeta = 255.3
//! ```
//!
//! Prosumers add `forecast` (kW) and `parameter`, the index into
//! `parameters`.

use std::fs;
use std::path::{Path, PathBuf};

use mpflex_core::market::{Line, MarketInstance, Network, User, UserKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SEGMENTS: usize = 6;
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub buses: usize,
    #[serde(default)]
    pub slack: usize,
    pub tau: f64,
    /// Breakpoints per user in the linearisation.
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Fixed load per bus, kW; all zero when omitted.
    #[serde(default)]
    pub inelastic: Vec<f64>,
    pub lines: Vec<LineEntry>,
    #[serde(default)]
    pub parameters: Vec<ParameterEntry>,
    pub users: Vec<UserEntry>,
}

fn default_segments() -> usize {
    DEFAULT_SEGMENTS
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterEntry {
    #[serde(default)]
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Consumer,
    Prosumer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub name: String,
    pub kind: Kind,
    pub bus: usize,
    pub demand: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<usize>,
}

/// A validated instance together with its analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInstance {
    pub name: String,
    pub market: MarketInstance,
    pub segments: usize,
    pub epsilon: f64,
    pub parameter_names: Vec<String>,
}

impl InstanceFile {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::Field {
                path: path.to_path_buf(),
                field: "version".into(),
                message: format!(
                    "unsupported format version {}, expected {FORMAT_VERSION}",
                    file.version
                ),
            });
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance files always serialise")
    }

    /// Checks every field that can be blamed on a single entry, then hands
    /// the rest to the market model.
    pub fn build(&self, path: &Path) -> CliResult<LoadedInstance> {
        let fail = |field: String, message: String| CliError::Field {
            path: path.to_path_buf(),
            field,
            message,
        };
        if self.buses == 0 {
            return Err(fail("buses".into(), "at least one bus is required".into()));
        }
        if self.slack >= self.buses {
            return Err(fail(
                "slack".into(),
                format!("bus {} does not exist", self.slack),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(fail("tau".into(), format!("must be positive, got {}", self.tau)));
        }
        if self.segments < 2 {
            return Err(fail(
                "segments".into(),
                format!("at least 2 breakpoints are required, got {}", self.segments),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(fail(
                "epsilon".into(),
                format!("must be positive, got {}", self.epsilon),
            ));
        }
        if !self.inelastic.is_empty() && self.inelastic.len() != self.buses {
            return Err(fail(
                "inelastic".into(),
                format!("{} entries for {} buses", self.inelastic.len(), self.buses),
            ));
        }
        for (i, l) in self.lines.iter().enumerate() {
            for (name, bus) in [("from", l.from), ("to", l.to)] {
                if bus >= self.buses {
                    return Err(fail(
                        format!("lines[{i}].{name}"),
                        format!("bus {bus} does not exist"),
                    ));
                }
            }
            if !(l.reactance > 0.0 && l.reactance.is_finite()) {
                return Err(fail(
                    format!("lines[{i}].reactance"),
                    format!("must be positive, got {}", l.reactance),
                ));
            }
            if !(l.limit > 0.0) {
                return Err(fail(
                    format!("lines[{i}].limit"),
                    format!("must be positive, got {}", l.limit),
                ));
            }
        }
        for (j, p) in self.parameters.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower <= p.upper) {
                return Err(fail(
                    format!("parameters[{j}]"),
                    format!("invalid range [{}, {}]", p.lower, p.upper),
                ));
            }
        }
        let mut users = Vec::with_capacity(self.users.len());
        for (k, u) in self.users.iter().enumerate() {
            let field = |name: &str| format!("users[{k}].{name}");
            if u.bus >= self.buses {
                return Err(fail(field("bus"), format!("bus {} does not exist", u.bus)));
            }
            if u.lower > u.demand {
                return Err(fail(
                    field("lower"),
                    format!("{} exceeds demand {}", u.lower, u.demand),
                ));
            }
            if u.upper < u.demand {
                return Err(fail(
                    field("upper"),
                    format!("{} is below demand {}", u.upper, u.demand),
                ));
            }
            if !(u.alpha > 0.0) {
                return Err(fail(field("alpha"), format!("must be positive, got {}", u.alpha)));
            }
            let user = match u.kind {
                Kind::Consumer => {
                    if u.forecast.is_some() || u.parameter.is_some() {
                        return Err(fail(
                            field("kind"),
                            "consumers take no forecast or parameter".into(),
                        ));
                    }
                    User::consumer(
                        u.name.clone(),
                        u.bus,
                        u.demand,
                        (u.lower, u.upper),
                        (u.alpha, u.beta, u.zeta),
                    )
                }
                Kind::Prosumer => {
                    let parameter = u
                        .parameter
                        .ok_or_else(|| fail(field("parameter"), "missing for a prosumer".into()))?;
                    if parameter >= self.parameters.len() {
                        return Err(fail(
                            field("parameter"),
                            format!(
                                "index {parameter} but only {} parameters are declared",
                                self.parameters.len()
                            ),
                        ));
                    }
                    User::prosumer(
                        u.name.clone(),
                        u.bus,
                        u.demand,
                        (u.lower, u.upper),
                        (u.alpha, u.beta, u.zeta),
                        u.forecast.unwrap_or(0.0),
                        parameter,
                    )
                }
            };
            users.push(user);
        }
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                from: l.from,
                to: l.to,
                reactance: l.reactance,
                limit: l.limit,
            })
            .collect();
        let network = Network::new(self.buses, lines, self.slack)?;
        let inelastic = if self.inelastic.is_empty() {
            vec![0.0; self.buses]
        } else {
            self.inelastic.clone()
        };
        let theta_box = self.parameters.iter().map(|p| (p.lower, p.upper)).collect();
        let market = MarketInstance::new(users, network, self.tau, theta_box, inelastic)?;
        Ok(LoadedInstance {
            name: self.name.clone(),
            market,
            segments: self.segments,
            epsilon: self.epsilon,
            parameter_names: self.parameters.iter().map(|p| p.name.clone()).collect(),
        })
    }

    /// The file describing `market`, with parameter names `p0, p1, ...`
    /// unless given.
    pub fn from_market(
        name: &str,
        market: &MarketInstance,
        segments: usize,
        epsilon: f64,
        parameter_names: &[String],
    ) -> Self {
        let net = market.network();
        InstanceFile {
            version: FORMAT_VERSION,
            name: name.to_string(),
            buses: net.num_buses(),
            slack: net.slack(),
            tau: market.tau(),
            segments,
            epsilon,
            inelastic: market.inelastic().to_vec(),
            lines: net
                .lines()
                .iter()
                .map(|l| LineEntry {
                    from: l.from,
                    to: l.to,
                    reactance: l.reactance,
                    limit: l.limit,
                })
                .collect(),
            parameters: market
                .theta_box()
                .into_iter()
                .enumerate()
                .map(|(j, (lower, upper))| ParameterEntry {
                    name: parameter_names
                        .get(j)
                        .cloned()
                        .unwrap_or_else(|| format!("p{j}")),
                    lower,
                    upper,
                })
                .collect(),
            users: market
                .users()
                .iter()
                .map(|u| UserEntry {
                    name: u.name.clone(),
                    kind: match u.kind {
                        UserKind::Consumer => Kind::Consumer,
                        UserKind::Prosumer => Kind::Prosumer,
                    },
                    bus: u.bus,
                    demand: u.demand,
                    lower: u.lower,
                    upper: u.upper,
                    alpha: u.alpha,
                    beta: u.beta,
                    zeta: u.zeta,
                    forecast: (u.kind == UserKind::Prosumer).then_some(u.forecast),
                    parameter: u.parameter,
                })
                .collect(),
        }
    }
}

impl LoadedInstance {
    pub fn to_file(&self) -> InstanceFile {
        InstanceFile::from_market(
            &self.name,
            &self.market,
            self.segments,
            self.epsilon,
            &self.parameter_names,
        )
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> CliResult<LoadedInstance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    InstanceFile::parse(&text, path)?.build(path)
}

/// Where bundled fixtures live in the source tree.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
