//! Overlay graph, peering configurations and the capacity model.
//!
//! An [`OverlayGraph`] holds the potential-neighbor relation, the source, the
//! per-node upload capacities and degree bounds. A [`Configuration`] is the set
//! of node pairs currently in use. Pairs are unordered; an in-use pair enables
//! streaming in both directions.
//!
//! A graph may mark some potential pairs as *pinned*. Pinned pairs are in use
//! in every configuration and are never touched by topology hopping. A graph
//! without pinned pairs behaves exactly like the plain model.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 0-based node index.
pub type NodeId = usize;

/// Largest number of free pairs [`enumerate_configurations`] will expand.
pub const ENUMERATION_LIMIT: usize = 24;

/// Unordered node pair, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair(NodeId, NodeId);

impl Pair {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn lo(self) -> NodeId {
        self.0
    }

    pub fn hi(self) -> NodeId {
        self.1
    }

    pub fn contains(self, v: NodeId) -> bool {
        self.0 == v || self.1 == v
    }

    /// The endpoint that is not `v`.
    pub fn other(self, v: NodeId) -> Option<NodeId> {
        if self.0 == v {
            Some(self.1)
        } else if self.1 == v {
            Some(self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.0, self.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlayGraph {
    source: NodeId,
    capacity: Vec<f64>,
    bound: Vec<usize>,
    neighbors: Vec<BTreeSet<NodeId>>,
    pairs: Vec<Pair>,
    pinned: BTreeSet<Pair>,
}

impl OverlayGraph {
    /// Builds a graph from per-node capacities and degree bounds and a list of
    /// potential pairs. Rejects self-loops, duplicates, unknown nodes,
    /// negative capacities and zero bounds.
    pub fn new(
        source: NodeId,
        capacity: Vec<f64>,
        bound: Vec<usize>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let n = capacity.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no nodes".into()));
        }
        if bound.len() != n {
            return Err(Error::Dimension(format!(
                "{} capacities but {} degree bounds",
                n,
                bound.len()
            )));
        }
        if source >= n {
            return Err(Error::UnknownNode(source));
        }
        for (v, &c) in capacity.iter().enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidGraph(format!("node {v} has capacity {c}")));
            }
        }
        if let Some(v) = bound.iter().position(|&b| b == 0) {
            return Err(Error::InvalidGraph(format!("node {v} has degree bound 0")));
        }

        let mut neighbors = vec![BTreeSet::new(); n];
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            if a >= n {
                return Err(Error::UnknownNode(a));
            }
            if b >= n {
                return Err(Error::UnknownNode(b));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let p = Pair::new(a, b);
            if !seen.insert(p) {
                return Err(Error::DuplicateEdge(p));
            }
            neighbors[a].insert(b);
            neighbors[b].insert(a);
        }

        Ok(OverlayGraph {
            source,
            capacity,
            bound,
            neighbors,
            pairs: seen.into_iter().collect(),
            pinned: BTreeSet::new(),
        })
    }

    /// Complete potential graph over `capacity.len()` nodes.
    pub fn complete(source: NodeId, capacity: Vec<f64>, bound: Vec<usize>) -> Result<Self> {
        let n = capacity.len();
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Self::new(source, capacity, bound, edges)
    }

    /// Marks potential pairs as permanently in use.
    pub fn with_pinned(mut self, pinned: impl IntoIterator<Item = Pair>) -> Result<Self> {
        for p in pinned {
            if !self.is_potential(p) {
                return Err(Error::NotPotential(p));
            }
            self.pinned.insert(p);
        }
        let base = Configuration::from_pairs(self.node_count(), self.pinned.iter().copied());
        self.check_bounds(&base)?;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.capacity.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.node_count()
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    /// Receivers, i.e. every node except the source.
    pub fn receivers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(move |&v| v != self.source)
    }

    pub fn receiver_count(&self) -> usize {
        self.node_count() - 1
    }

    pub fn capacity(&self, v: NodeId) -> f64 {
        self.capacity[v]
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacity
    }

    pub fn bound(&self, v: NodeId) -> usize {
        self.bound[v]
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bound
    }

    /// Potential neighbors N_v.
    pub fn potential_neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.neighbors[v]
    }

    /// All potential pairs in sorted order.
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn pinned(&self) -> &BTreeSet<Pair> {
        &self.pinned
    }

    pub fn is_pinned(&self, p: Pair) -> bool {
        self.pinned.contains(&p)
    }

    /// Potential pairs that topology hopping may toggle.
    pub fn free_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        self.pairs
            .iter()
            .copied()
            .filter(move |p| !self.pinned.contains(p))
    }

    /// Potential neighbors of `v` reachable through non-pinned pairs.
    pub fn hoppable_neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors[v]
            .iter()
            .copied()
            .filter(move |&u| !self.pinned.contains(&Pair::new(v, u)))
    }

    pub fn is_potential(&self, p: Pair) -> bool {
        p.hi() < self.node_count() && self.neighbors[p.lo()].contains(&p.hi())
    }

    /// Same topology with different capacities.
    pub fn with_capacities(&self, capacity: Vec<f64>) -> Result<Self> {
        let mut g = Self::new(
            self.source,
            capacity,
            self.bound.clone(),
            self.pairs.iter().map(|p| (p.lo(), p.hi())),
        )?;
        g.pinned = self.pinned.clone();
        Ok(g)
    }

    /// Same topology with different degree bounds.
    pub fn with_bounds(&self, bound: Vec<usize>) -> Result<Self> {
        let g = Self::new(
            self.source,
            self.capacity.clone(),
            bound,
            self.pairs.iter().map(|p| (p.lo(), p.hi())),
        )?;
        g.with_pinned(self.pinned.iter().copied())
    }

    fn check_bounds(&self, f: &Configuration) -> Result<()> {
        for v in self.nodes() {
            let degree = f.degree(v);
            if degree > self.bound[v] {
                return Err(Error::DegreeBound {
                    node: v,
                    degree,
                    bound: self.bound[v],
                });
            }
        }
        Ok(())
    }

    /// Checks that every in-use pair is a potential pair, pinned pairs are
    /// present, and all degree bounds hold.
    pub fn check_configuration(&self, f: &Configuration) -> Result<()> {
        self.check_membership(f)?;
        self.check_bounds(f)
    }

    /// Like [`check_configuration`](Self::check_configuration) but ignores
    /// degree bounds.
    pub fn check_membership(&self, f: &Configuration) -> Result<()> {
        if f.node_count() != self.node_count() {
            return Err(Error::Dimension(format!(
                "configuration over {} nodes, graph has {}",
                f.node_count(),
                self.node_count()
            )));
        }
        if let Some(p) = f.pairs().iter().find(|p| !self.is_potential(**p)) {
            return Err(Error::NotPotential(*p));
        }
        if let Some(p) = self.pinned.iter().find(|p| !f.contains(**p)) {
            return Err(Error::InvalidGraph(format!(
                "pinned pair {p} is not in use"
            )));
        }
        Ok(())
    }

    /// Builds a validated configuration. Pinned pairs are added implicitly.
    pub fn configuration(&self, pairs: impl IntoIterator<Item = Pair>) -> Result<Configuration> {
        let f = Configuration::from_pairs(
            self.node_count(),
            pairs.into_iter().chain(self.pinned.iter().copied()),
        );
        self.check_configuration(&f)?;
        Ok(f)
    }

    /// The configuration holding only the pinned pairs.
    pub fn base_configuration(&self) -> Configuration {
        Configuration::from_pairs(self.node_count(), self.pinned.iter().copied())
    }

    /// Serializes to the line-oriented graph file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {} source {}\n", self.node_count(), self.source);
        for v in self.nodes() {
            out.push_str(&format!(
                "node {} cap {} bound {}\n",
                v, self.capacity[v], self.bound[v]
            ));
        }
        for p in &self.pairs {
            if self.pinned.contains(p) {
                out.push_str(&format!("edge {} {} pinned\n", p.lo(), p.hi()));
            } else {
                out.push_str(&format!("edge {} {}\n", p.lo(), p.hi()));
            }
        }
        out
    }
}

impl FromStr for OverlayGraph {
    type Err = Error;

    /// Parses the graph file format:
    ///
    /// ```text
    /// nodes <N> source <id>
    /// node <id> cap <kbps> bound <B>
    /// edge <u> <v> [pinned]
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self> {
        fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
            let tok = tok.ok_or_else(|| Error::Parse {
                line,
                msg: format!("missing {what}"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {what} `{tok}`"),
            })
        }
        fn keyword(tok: Option<&str>, want: &str, line: usize) -> Result<()> {
            match tok {
                Some(t) if t == want => Ok(()),
                other => Err(Error::Parse {
                    line,
                    msg: format!("expected `{want}`, found {other:?}"),
                }),
            }
        }

        let mut header: Option<(usize, NodeId)> = None;
        let mut caps: Vec<Option<(f64, usize)>> = Vec::new();
        let mut edges = Vec::new();
        let mut pinned = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            match toks.next() {
                Some("nodes") => {
                    if header.is_some() {
                        return Err(Error::Parse {
                            line,
                            msg: "duplicate header".into(),
                        });
                    }
                    let n: usize = num(toks.next(), line, "node count")?;
                    keyword(toks.next(), "source", line)?;
                    let s: NodeId = num(toks.next(), line, "source id")?;
                    header = Some((n, s));
                    caps = vec![None; n];
                }
                Some("node") => {
                    let Some((n, _)) = header else {
                        return Err(Error::Parse {
                            line,
                            msg: "node line before header".into(),
                        });
                    };
                    let v: NodeId = num(toks.next(), line, "node id")?;
                    if v >= n {
                        return Err(Error::UnknownNode(v));
                    }
                    keyword(toks.next(), "cap", line)?;
                    let c: f64 = num(toks.next(), line, "capacity")?;
                    keyword(toks.next(), "bound", line)?;
                    let b: usize = num(toks.next(), line, "degree bound")?;
                    if caps[v].replace((c, b)).is_some() {
                        return Err(Error::Parse {
                            line,
                            msg: format!("node {v} declared twice"),
                        });
                    }
                }
                Some("edge") => {
                    let u: NodeId = num(toks.next(), line, "edge endpoint")?;
                    let v: NodeId = num(toks.next(), line, "edge endpoint")?;
                    match toks.next() {
                        None => {}
                        Some("pinned") => pinned.push(Pair::new(u, v)),
                        Some(t) => {
                            return Err(Error::Parse {
                                line,
                                msg: format!("unexpected token `{t}`"),
                            })
                        }
                    }
                    edges.push((u, v));
                }
                Some(t) => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown directive `{t}`"),
                    })
                }
                None => unreachable!(),
            }
            if let Some(t) = toks.next() {
                return Err(Error::Parse {
                    line,
                    msg: format!("trailing token `{t}`"),
                });
            }
        }

        let (_, source) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing `nodes` header".into(),
        })?;
        let mut capacity = Vec::with_capacity(caps.len());
        let mut bound = Vec::with_capacity(caps.len());
        for (v, entry) in caps.into_iter().enumerate() {
            let (c, b) = entry.ok_or(Error::Parse {
                line: 0,
                msg: format!("node {v} never declared"),
            })?;
            capacity.push(c);
            bound.push(b);
        }
        OverlayGraph::new(source, capacity, bound, edges)?.with_pinned(pinned)
    }
}

/// A set of in-use node pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pairs: BTreeSet<Pair>,
    adjacency: Vec<BTreeSet<NodeId>>,
}

impl Configuration {
    /// Builds a configuration without consulting any graph.
    pub fn from_pairs(node_count: usize, pairs: impl IntoIterator<Item = Pair>) -> Self {
        let mut f = Configuration {
            pairs: BTreeSet::new(),
            adjacency: vec![BTreeSet::new(); node_count],
        };
        for p in pairs {
            f.insert(p);
        }
        f
    }

    pub fn empty(node_count: usize) -> Self {
        Self::from_pairs(node_count, [])
    }

    fn insert(&mut self, p: Pair) {
        assert!(p.hi() < self.adjacency.len(), "pair {p} outside node range");
        if self.pairs.insert(p) {
            self.adjacency[p.lo()].insert(p.hi());
            self.adjacency[p.hi()].insert(p.lo());
        }
    }

    fn remove(&mut self, p: Pair) {
        if self.pairs.remove(&p) {
            self.adjacency[p.lo()].remove(&p.hi());
            self.adjacency[p.hi()].remove(&p.lo());
        }
    }

    pub fn with_pair(&self, p: Pair) -> Self {
        let mut f = self.clone();
        f.insert(p);
        f
    }

    pub fn without_pair(&self, p: Pair) -> Self {
        let mut f = self.clone();
        f.remove(p);
        f
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn pairs(&self) -> &BTreeSet<Pair> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, p: Pair) -> bool {
        self.pairs.contains(&p)
    }

    /// In-use neighbors N_{v,f}.
    pub fn neighbors_in_use(&self, v: NodeId) -> Result<&BTreeSet<NodeId>> {
        self.adjacency.get(v).ok_or(Error::UnknownNode(v))
    }

    /// |N_{v,f}|; panics on an unknown node.
    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    /// Size of the symmetric difference of the pair sets.
    pub fn distance(&self, other: &Configuration) -> usize {
        self.pairs.symmetric_difference(&other.pairs).count()
    }

    /// `{a,b} {c,d}` style listing.
    pub fn label(&self) -> String {
        if self.pairs.is_empty() {
            return "{}".into();
        }
        self.pairs
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Every degree-feasible configuration, sorted lexicographically by pair
/// list. Pinned pairs are part of every configuration. Connectivity is not
/// required.
pub fn enumerate_configurations(g: &OverlayGraph) -> Result<Vec<Configuration>> {
    let free: Vec<Pair> = g.free_pairs().collect();
    if free.len() > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            free: free.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    let base = g.base_configuration();
    let mut degree: Vec<usize> = g.nodes().map(|v| base.degree(v)).collect();
    let mut chosen = Vec::new();
    let mut out: Vec<Vec<Pair>> = Vec::new();

    fn walk(
        g: &OverlayGraph,
        free: &[Pair],
        i: usize,
        degree: &mut [usize],
        chosen: &mut Vec<Pair>,
        out: &mut Vec<Vec<Pair>>,
    ) {
        if i == free.len() {
            out.push(chosen.clone());
            return;
        }
        walk(g, free, i + 1, degree, chosen, out);
        let p = free[i];
        if degree[p.lo()] < g.bound(p.lo()) && degree[p.hi()] < g.bound(p.hi()) {
            degree[p.lo()] += 1;
            degree[p.hi()] += 1;
            chosen.push(p);
            walk(g, free, i + 1, degree, chosen, out);
            chosen.pop();
            degree[p.lo()] -= 1;
            degree[p.hi()] -= 1;
        }
    }
    walk(g, &free, 0, &mut degree, &mut chosen, &mut out);

    let mut configs: Vec<(Vec<Pair>, Configuration)> = out
        .into_iter()
        .map(|extra| {
            let f = base.clone();
            let f = extra.iter().fold(f, |f, &p| f.with_pair(p));
            (f.pairs.iter().copied().collect(), f)
        })
        .collect();
    configs.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(configs.into_iter().map(|(_, f)| f).collect())
}

/// True iff every node is reachable from the source over in-use pairs.
pub fn is_connected_from_source(g: &OverlayGraph, f: &Configuration) -> bool {
    let n = g.node_count();
    if f.node_count() != n {
        return false;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([g.source()]);
    seen[g.source()] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in &f.adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count == n
}

/// Discrete upload-capacity distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityProfile {
    buckets: Vec<(f64, f64)>,
}

impl CapacityProfile {
    /// `(capacity kbps, fraction %)` buckets. Fractions must sum to 100 within
    /// 0.1 and capacities must be positive and strictly increasing.
    pub fn new(buckets: Vec<(f64, f64)>) -> Result<Self> {
        if buckets.is_empty() {
            return Err(Error::InvalidProfile("no buckets".into()));
        }
        let total: f64 = buckets.iter().map(|b| b.1).sum();
        if (total - 100.0).abs() > 0.1 {
            return Err(Error::InvalidProfile(format!(
                "fractions sum to {total}, expected 100"
            )));
        }
        if buckets.iter().any(|b| !(b.1 >= 0.0)) {
            return Err(Error::InvalidProfile("negative fraction".into()));
        }
        if buckets.iter().any(|b| !(b.0 > 0.0 && b.0.is_finite())) {
            return Err(Error::InvalidProfile("capacities must be positive".into()));
        }
        if buckets.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidProfile(
                "capacities must be strictly increasing".into(),
            ));
        }
        Ok(CapacityProfile { buckets })
    }

    /// Measured residential uplink distribution.
    pub fn internet_hosts() -> Self {
        CapacityProfile {
            buckets: vec![
                (64.0, 2.8),
                (128.0, 14.3),
                (256.0, 4.3),
                (384.0, 23.3),
                (768.0, 55.3),
            ],
        }
    }

    pub fn buckets(&self) -> &[(f64, f64)] {
        &self.buckets
    }

    /// Draws `n` i.i.d. capacities; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let total: f64 = self.buckets.iter().map(|b| b.1).sum();
        (0..n)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                for &(c, w) in &self.buckets {
                    if u < w {
                        return c;
                    }
                    u -= w;
                }
                self.buckets[self.buckets.len() - 1].0
            })
            .collect()
    }
}

/// Wrapper over [`CapacityProfile::sample`] that validates `n`.
pub fn sample_capacities(profile: &CapacityProfile, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidProfile(
            "sample size must be at least 1".into(),
        ));
    }
    Ok(profile.sample(n, seed))
}
