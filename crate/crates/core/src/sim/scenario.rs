//! Declarative scenario files.
//!
//! One `key = value` per line; `#` starts a comment. Unknown or repeated keys
//! are errors. See the README for the key reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopper::{HopperConfig, MeasurementMode};
use crate::instances;
use crate::overlay::{CapacityProfile, OverlayGraph, Pair};
use crate::ratecast::SolverConfig;

/// Capacity unit behind the proportional degree-bound rule: a node with
/// capacity `c` gets bound `2 c / PROPORTIONAL_UNIT`.
pub const PROPORTIONAL_UNIT: f64 = 64.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    File(PathBuf),
    Generator(Generator),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// The four-configuration instance with free pairs {1,2} and {1,4}.
    SettingThree,
    FiveNodeMesh,
    /// Every pair is a potential pair.
    Complete {
        nodes: usize,
    },
    /// Random spanning tree plus each other pair with probability `extra`.
    Random {
        nodes: usize,
        extra: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitySpec {
    /// Keep the capacities of the file or generator.
    Graph,
    Explicit(Vec<f64>),
    /// Receivers drawn from the internet-host profile; fixed source.
    Profile {
        source: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRule {
    Graph,
    Uniform(usize),
    /// `round(2 c / 64)`, at least 1.
    Proportional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Random maximal configuration drawn from the run seed.
    Random,
    /// Only the pinned pairs.
    Base,
    Pairs(Vec<Pair>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub graph: GraphSource,
    pub capacities: CapacitySpec,
    pub bounds: BoundRule,
    pub hopper: HopperConfig,
    /// Hop events to simulate.
    pub hops: usize,
    /// Events excluded from occupancy and time averages.
    pub burn_in: usize,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Seed of random graph and capacity draws; defaults to `seed`.
    pub graph_seed: u64,
    pub initial: Initial,
    pub compare_baseline: bool,
    /// Events between time-series samples; defaults to `hops / 1000`.
    pub sample_every: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Scenario {
    fn base(name: &str, graph: GraphSource, beta: f64, seed: u64) -> Self {
        Scenario {
            name: name.into(),
            graph,
            capacities: CapacitySpec::Graph,
            bounds: BoundRule::Graph,
            hopper: HopperConfig {
                beta,
                tau: 0.0,
                measurement: MeasurementMode::OracleExact,
            },
            hops: 10_000,
            burn_in: 0,
            solver: SolverConfig::default().quiet(),
            seed,
            graph_seed: seed,
            initial: Initial::Random,
            compare_baseline: false,
            sample_every: None,
            output: None,
        }
    }

    /// Unit-capacity four-configuration instance.
    pub fn setting_three(beta: f64, seed: u64) -> Self {
        let mut s = Self::base(
            "setting-three",
            GraphSource::Generator(Generator::SettingThree),
            beta,
            seed,
        );
        s.hops = 200_000;
        s.burn_in = 1_000;
        s.initial = Initial::Base;
        s
    }

    /// `nodes` peers on a complete potential graph, capacities from the
    /// internet-host profile and a 768 kbps source.
    pub fn profiled(name: &str, nodes: usize, bounds: BoundRule, beta: f64, seed: u64) -> Self {
        let mut s = Self::base(
            name,
            GraphSource::Generator(Generator::Complete { nodes }),
            beta,
            seed,
        );
        s.capacities = CapacitySpec::Profile { source: 768.0 };
        s.bounds = bounds;
        s
    }

    /// 100 peers.
    pub fn setting_one(bounds: BoundRule, beta: f64, seed: u64) -> Self {
        Self::profiled("setting-one", 100, bounds, beta, seed)
    }

    /// 10 peers.
    pub fn setting_two(bounds: BoundRule, beta: f64, seed: u64) -> Self {
        Self::profiled("setting-two", 10, bounds, beta, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.hopper.validate()?;
        if self.solver.max_iters == 0 {
            return Err(Error::InvalidScenario(
                "solver_iterations must be positive".into(),
            ));
        }
        if self.burn_in > self.hops {
            return Err(Error::InvalidScenario("burn_in exceeds hops".into()));
        }
        if let GraphSource::Generator(Generator::Random { extra, .. }) = &self.graph {
            if !(0.0..=1.0).contains(extra) {
                return Err(Error::InvalidScenario(
                    "extra_pairs must lie in [0, 1]".into(),
                ));
            }
        }
        if let GraphSource::Generator(
            Generator::Complete { nodes } | Generator::Random { nodes, .. },
        ) = &self.graph
        {
            if *nodes < 2 {
                return Err(Error::InvalidScenario("need at least two nodes".into()));
            }
        }
        if self.sample_every == Some(0) {
            return Err(Error::InvalidScenario(
                "sample_every must be positive".into(),
            ));
        }
        if let BoundRule::Uniform(0) = self.bounds {
            return Err(Error::InvalidScenario(
                "degree bound must be positive".into(),
            ));
        }
        self.solver.validate(2)?;
        Ok(())
    }

    /// Materializes the overlay graph. Relative file paths resolve against
    /// `base_dir`.
    pub fn build_graph(&self, base_dir: Option<&Path>) -> Result<OverlayGraph> {
        let g = match &self.graph {
            GraphSource::File(path) => {
                let path = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                std::fs::read_to_string(&path)?.parse()?
            }
            GraphSource::Generator(Generator::SettingThree) => instances::setting_three(),
            GraphSource::Generator(Generator::FiveNodeMesh) => instances::five_node_mesh(),
            GraphSource::Generator(Generator::Complete { nodes }) => {
                OverlayGraph::complete(0, vec![1.0; *nodes], vec![nodes - 1; *nodes])?
            }
            GraphSource::Generator(Generator::Random { nodes, extra }) => {
                instances::random_small(*nodes, *extra, self.graph_seed)
            }
        };
        let g = match &self.capacities {
            CapacitySpec::Graph => g,
            CapacitySpec::Explicit(c) => {
                if c.len() != g.node_count() {
                    return Err(Error::InvalidScenario(format!(
                        "{} capacities for {} nodes",
                        c.len(),
                        g.node_count()
                    )));
                }
                g.with_capacities(c.clone())?
            }
            CapacitySpec::Profile { source } => {
                let mut c =
                    CapacityProfile::internet_hosts().sample(g.node_count(), self.graph_seed);
                c[g.source()] = *source;
                g.with_capacities(c)?
            }
        };
        let n = g.node_count();
        match self.bounds {
            BoundRule::Graph => Ok(g),
            BoundRule::Uniform(b) => g.with_bounds(vec![b; n]),
            BoundRule::Proportional => {
                let b = g
                    .capacities()
                    .iter()
                    .map(|&c| proportional_bound(c))
                    .collect();
                g.with_bounds(b)
            }
        }
    }
}

/// `round(2 c / 64)`, never below 1.
pub fn proportional_bound(capacity: f64) -> usize {
    ((2.0 * capacity / PROPORTIONAL_UNIT).round() as usize).max(1)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse_err(line, format!("bad value for {key}: {v:?}")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|x| parse_num(line, key, x.trim()))
        .collect()
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, "expected key = value"))?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), (line, v.trim().to_string())).is_some() {
                return Err(parse_err(line, format!("repeated key {k}")));
            }
        }
        let mut take = |k: &str| kv.remove(k);

        let graph_kind = take("graph");
        let graph_file = take("graph_file");
        let nodes = take("nodes");
        let extra = take("extra_pairs");
        let nodes_line = nodes.as_ref().map(|(l, _)| *l);
        let num_nodes = |d: Option<(usize, String)>| -> Result<usize> {
            let (l, v) = d.ok_or_else(|| parse_err(0, "generator needs nodes"))?;
            parse_num(l, "nodes", &v)
        };
        let graph = match (graph_kind, graph_file) {
            (Some((_, kind)), None) if kind == "setting-three" => {
                GraphSource::Generator(Generator::SettingThree)
            }
            (Some((_, kind)), None) if kind == "five-node-mesh" => {
                GraphSource::Generator(Generator::FiveNodeMesh)
            }
            (Some((_, kind)), None) if kind == "complete" => {
                GraphSource::Generator(Generator::Complete {
                    nodes: num_nodes(nodes)?,
                })
            }
            (Some((_, kind)), None) if kind == "random" => {
                let extra = match extra {
                    Some((l, v)) => parse_num(l, "extra_pairs", &v)?,
                    None => 0.0,
                };
                GraphSource::Generator(Generator::Random {
                    nodes: num_nodes(nodes)?,
                    extra,
                })
            }
            (Some((l, kind)), None) if kind != "file" => {
                return Err(parse_err(l, format!("unknown graph kind {kind:?}")))
            }
            (Some((_, kind)), Some((_, path))) if kind == "file" => GraphSource::File(path.into()),
            (None, Some((_, path))) => GraphSource::File(path.into()),
            (Some((l, _)), Some(_)) => return Err(parse_err(l, "graph_file needs graph = file")),
            (Some((l, _)), None) => return Err(parse_err(l, "graph = file needs graph_file")),
            (None, None) => return Err(parse_err(0, "scenario needs a graph or graph_file")),
        };

        let seed: u64 = match take("seed") {
            Some((l, v)) => parse_num(l, "seed", &v)?,
            None => 0,
        };
        let mut s = Scenario::base("scenario", graph, 1.0, seed);
        if let Some((_, v)) = take("name") {
            s.name = v;
        }
        if let Some((l, v)) = take("graph_seed") {
            s.graph_seed = parse_num(l, "graph_seed", &v)?;
        }
        if let Some((l, v)) = take("capacities") {
            s.capacities = match v.as_str() {
                "graph" => CapacitySpec::Graph,
                "profile" => CapacitySpec::Profile { source: 768.0 },
                _ => CapacitySpec::Explicit(parse_list(l, "capacities", &v)?),
            };
        }
        if let Some((l, v)) = take("source_capacity") {
            let c = parse_num(l, "source_capacity", &v)?;
            match &mut s.capacities {
                CapacitySpec::Profile { source } => *source = c,
                _ => return Err(parse_err(l, "source_capacity needs capacities = profile")),
            }
        }
        if let Some((l, v)) = take("degree_bound") {
            let mut words = v.split_whitespace();
            s.bounds = match (words.next(), words.next(), words.next()) {
                (Some("graph"), None, _) => BoundRule::Graph,
                (Some("proportional"), None, _) => BoundRule::Proportional,
                (Some("uniform"), Some(b), None) => {
                    BoundRule::Uniform(parse_num(l, "degree_bound", b)?)
                }
                _ => return Err(parse_err(l, format!("bad degree_bound {v:?}"))),
            };
        }
        if let Some((l, v)) = take("beta") {
            s.hopper.beta = parse_num(l, "beta", &v)?;
        }
        if let Some((l, v)) = take("tau") {
            s.hopper.tau = parse_num(l, "tau", &v)?;
        }
        let delta = take("noise_delta");
        let eta = take("noise_eta");
        if let Some((l, v)) = take("measurement") {
            s.hopper.measurement = match v.as_str() {
                "oracle" => MeasurementMode::OracleExact,
                "solver" => MeasurementMode::SolverConverged,
                "noisy" => {
                    let (dl, dv) = delta
                        .clone()
                        .ok_or_else(|| parse_err(l, "noisy needs noise_delta"))?;
                    let (el, ev) = eta
                        .clone()
                        .ok_or_else(|| parse_err(l, "noisy needs noise_eta"))?;
                    MeasurementMode::Noisy {
                        delta: parse_num(dl, "noise_delta", &dv)?,
                        eta: parse_list(el, "noise_eta", &ev)?,
                    }
                }
                _ => return Err(parse_err(l, format!("unknown measurement {v:?}"))),
            };
        }
        if !matches!(s.hopper.measurement, MeasurementMode::Noisy { .. }) {
            if let Some((l, _)) = delta.or(eta) {
                return Err(parse_err(l, "noise keys need measurement = noisy"));
            }
        }
        if let Some((l, v)) = take("hops") {
            s.hops = parse_num(l, "hops", &v)?;
        }
        if let Some((l, v)) = take("burn_in") {
            s.burn_in = parse_num(l, "burn_in", &v)?;
        }
        if let Some((l, v)) = take("solver_iterations") {
            s.solver.max_iters = parse_num(l, "solver_iterations", &v)?;
        }
        if let Some((l, v)) = take("initial") {
            s.initial = match v.as_str() {
                "random" => Initial::Random,
                "base" => Initial::Base,
                _ => Initial::Pairs(
                    v.split(',')
                        .map(|p| {
                            let (a, b) = p
                                .trim()
                                .split_once('-')
                                .ok_or_else(|| parse_err(l, format!("pair {p:?} is not a-b")))?;
                            Ok(Pair::new(
                                parse_num(l, "initial", a)?,
                                parse_num(l, "initial", b)?,
                            ))
                        })
                        .collect::<Result<_>>()?,
                ),
            };
        }
        if let Some((l, v)) = take("compare_baseline") {
            s.compare_baseline = parse_num(l, "compare_baseline", &v)?;
        }
        if let Some((l, v)) = take("sample_every") {
            s.sample_every = Some(parse_num(l, "sample_every", &v)?);
        }
        if let Some((_, v)) = take("output") {
            s.output = Some(v.into());
        }
        if let (Some(l), true) = (nodes_line, nodes_unused(&s.graph)) {
            return Err(parse_err(
                l,
                "nodes only applies to complete and random graphs",
            ));
        }
        if let Some((k, (l, _))) = kv.into_iter().next() {
            return Err(parse_err(l, format!("unknown key {k}")));
        }
        s.validate()?;
        Ok(s)
    }
}

fn nodes_unused(g: &GraphSource) -> bool {
    !matches!(
        g,
        GraphSource::Generator(Generator::Complete { .. } | Generator::Random { .. })
    )
}

impl Scenario {
    pub fn sample_interval(&self) -> usize {
        self.sample_every.unwrap_or(self.hops / 1000).max(1)
    }

    /// Reads a scenario file; relative `graph_file` paths resolve against
    /// the scenario's directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let s: Scenario = std::fs::read_to_string(path)?.parse()?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((s, dir))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = "\
# Setting III at beta 5
name = s3
graph = setting-three
beta = 5
tau = 0.5
measurement = noisy
noise_delta = 0.05
noise_eta = 0.25, 0.5, 0.25
hops = 1000
burn_in = 10
seed = 7
initial = base
";
        let s: Scenario = text.parse().unwrap();
        assert_eq!(s.name, "s3");
        assert_eq!(s.hopper.beta, 5.0);
        assert_eq!(s.hopper.tau, 0.5);
        assert_eq!(
            s.hopper.measurement,
            MeasurementMode::Noisy {
                delta: 0.05,
                eta: vec![0.25, 0.5, 0.25]
            }
        );
        assert_eq!((s.hops, s.burn_in, s.seed, s.graph_seed), (1000, 10, 7, 7));
        assert_eq!(s.initial, Initial::Base);
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            "beta = 1",
            "graph = setting-three\nbeta = 1\nbeta = 2",
            "graph = setting-three\ncolour = red",
            "graph = setting-three\ngraph_file = x.txt",
            "graph = random",
            "graph = setting-three\nbeta = 0",
            "graph = setting-three\nnoise_delta = 0.1",
            "graph = setting-three\nhops = 5\nburn_in = 6",
            "graph = setting-three\ndegree_bound = uniform",
            "graph = setting-three\nnodes = 5",
        ] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
    }

    #[test]
    fn proportional_rule_on_profile_capacities() {
        let got: Vec<usize> = [64.0, 128.0, 256.0, 384.0, 768.0]
            .iter()
            .map(|&c| proportional_bound(c))
            .collect();
        assert_eq!(got, [2, 4, 8, 12, 24]);
    }

    #[test]
    fn profiled_graph_has_fixed_source() {
        let s = Scenario::setting_two(BoundRule::Proportional, 20.0, 3);
        let g = s.build_graph(None).unwrap();
        assert_eq!(g.node_count(), 10);
        assert_eq!(g.capacity(0), 768.0);
        for v in g.nodes() {
            assert_eq!(g.bound(v) as f64, 2.0 * g.capacity(v) / 64.0);
        }
    }
}
