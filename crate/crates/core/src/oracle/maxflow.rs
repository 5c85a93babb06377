//! Dinic's maximum flow on real capacities.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::overlay::NodeId;

const EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
}

/// Flow value plus the source side of a minimum cut.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxFlow {
    pub value: f64,
    pub source_side: Vec<bool>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId, cap: f64) {
        let (rf, rt) = (self.adj[to].len(), self.adj[from].len());
        self.adj[from].push(Edge { to, rev: rf, cap });
        self.adj[to].push(Edge {
            to: from,
            rev: rt,
            cap: 0.0,
        });
    }

    fn levels(&self, s: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.adj[v] {
                if e.cap > EPS && level[e.to].is_none() {
                    level[e.to] = Some(level[v].unwrap() + 1);
                    queue.push_back(e.to);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        v: usize,
        t: usize,
        pushed: f64,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> f64 {
        if v == t {
            return pushed;
        }
        while next[v] < self.adj[v].len() {
            let i = next[v];
            let Edge { to, rev, cap } = self.adj[v][i];
            if cap > EPS && level[to] == level[v].map(|l| l + 1) {
                let got = self.augment(to, t, pushed.min(cap), level, next);
                if got > EPS {
                    self.adj[v][i].cap -= got;
                    self.adj[to][rev].cap += got;
                    return got;
                }
            }
            next[v] += 1;
        }
        0.0
    }

    /// Consumes residual capacity; call on a fresh network.
    pub fn run(&mut self, s: NodeId, t: NodeId) -> MaxFlow {
        let mut value = 0.0;
        loop {
            let level = self.levels(s);
            if level[t].is_none() {
                let source_side = level.iter().map(Option::is_some).collect();
                return MaxFlow { value, source_side };
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let got = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if got <= EPS {
                    break;
                }
                value += got;
            }
        }
    }
}

/// Maximum `s -> d` flow over directed capacitated links.
pub fn max_flow(n: usize, links: &[(NodeId, NodeId, f64)], s: NodeId, d: NodeId) -> Result<f64> {
    max_flow_cut(n, links, s, d).map(|m| m.value)
}

pub fn max_flow_cut(
    n: usize,
    links: &[(NodeId, NodeId, f64)],
    s: NodeId,
    d: NodeId,
) -> Result<MaxFlow> {
    if s == d {
        return Err(Error::SourceIsSink(s));
    }
    for &v in [s, d].iter().chain(links.iter().flat_map(|l| [&l.0, &l.1])) {
        if v >= n {
            return Err(Error::UnknownNode(v));
        }
    }
    let mut net = FlowNetwork::new(n);
    for &(a, b, c) in links {
        if !(c >= 0.0) {
            return Err(Error::InvalidGraph(format!(
                "link ({a},{b}) has capacity {c}"
            )));
        }
        net.add_edge(a, b, c);
    }
    Ok(net.run(s, d))
}
