//! Non-recombining binomial scenario trees.
//!
//! Nodes are stored in breadth-first order: the root is node 0 and the
//! children of node `k` are `b·k + 1 ..= b·k + b` for branching `b`, so depth
//! `t` occupies the contiguous range starting at `(b^t − 1)/(b − 1)`. Each node
//! carries a state and its conditional probability given its parent.
//!
//! [`build_tree`] grows a binary tree from a [`ProcessModel`]. At every node it
//! draws `S` successors, splits them at their empirical mean (`≤ mean` goes
//! left), and turns each half into a child whose state is the half's mean and
//! whose probability is the half's frequency.
//!
//! Two rules decide what the successors are conditioned on:
//!
//! * [`Conditioning::SetMembers`] (default): the draws that formed the node are
//!   kept, and successor `k` is drawn from the kernel at member `k mod |set|`.
//!   The spread within each set is carried forward, so the tree's marginal
//!   variance tracks the process.
//! * [`Conditioning::NodeState`]: all `S` successors are drawn from the kernel
//!   at the node's own state. Replacing a cell by its mean discards the
//!   within-cell spread at every level (a fraction `1 − 2/π` of the one-step
//!   variance for Gaussian steps), so values are biased low as `T` grows.
//!
//! Random draws at a node come from the stream labelled `(depth, position)`.
//! The tree is therefore independent of the build schedule, and a tree of
//! horizon `T` is the prefix of the tree of horizon `T + 1` built with the same
//! seed.

use std::fmt::Write as _;

use crate::process::{Path, ProcessModel};
use crate::rng::SeedTree;

/// Sibling probabilities must sum to one within this tolerance.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Largest horizon [`build_tree`] accepts (`2^{T+1}` nodes).
pub const MAX_TREE_HORIZON: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("at least 2 samples per node are required, got {0}")]
    TooFewSamples(usize),
    #[error("tree construction supports d = 1 only, model has d = {0}")]
    Dimension(usize),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("horizon {0} exceeds the limit of {MAX_TREE_HORIZON}")]
    HorizonTooLarge(usize),
    #[error("branching must be at least 2, got {0}")]
    Branching(usize),
    #[error("{got} node values do not form a complete tree with dimension {dim} and branching {branching}")]
    Shape { got: usize, dim: usize, branching: usize },
    #[error("node {node}: {reason}")]
    Probability { node: usize, reason: String },
    #[error("node {node}: non-finite state")]
    NonFinite { node: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// What the successors at a node are conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Conditioning {
    #[default]
    SetMembers,
    NodeState,
}

impl std::str::FromStr for Conditioning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "members" | "set-members" => Ok(Self::SetMembers),
            "node" | "node-state" => Ok(Self::NodeState),
            other => Err(format!("unknown conditioning rule {other:?} (expected members or node)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub samples_per_node: usize,
    pub conditioning: Conditioning,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            samples_per_node: 1000,
            conditioning: Conditioning::SetMembers,
        }
    }
}

/// A complete `b`-ary tree of states with conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    dim: usize,
    branching: usize,
    horizon: usize,
    /// `dim` coordinates per node, breadth-first.
    states: Vec<f64>,
    /// Probability of each node given its parent; 1 at the root.
    probs: Vec<f64>,
}

fn node_count(branching: usize, horizon: usize) -> usize {
    (0..=horizon).map(|t| branching.pow(t as u32)).sum()
}

impl ScenarioTree {
    /// Validates a breadth-first node list.
    ///
    /// `states` holds `dim` coordinates per node and `probs` the conditional
    /// probability of each node given its parent (the root's entry is ignored
    /// and stored as 1).
    pub fn new(dim: usize, branching: usize, states: Vec<f64>, mut probs: Vec<f64>) -> Result<Self, TreeError> {
        if branching < 2 {
            return Err(TreeError::Branching(branching));
        }
        let nodes = probs.len();
        if dim == 0 || states.len() != nodes * dim {
            return Err(TreeError::Shape { got: states.len(), dim, branching });
        }
        let mut horizon = 0;
        while node_count(branching, horizon) < nodes {
            horizon += 1;
        }
        if horizon == 0 || node_count(branching, horizon) != nodes {
            return Err(TreeError::Shape { got: nodes, dim, branching });
        }
        if let Some(k) = states.iter().position(|v| !v.is_finite()) {
            return Err(TreeError::NonFinite { node: k / dim });
        }
        probs[0] = 1.0;
        let internal = node_count(branching, horizon - 1);
        for node in 0..internal {
            let kids = &probs[branching * node + 1..branching * node + 1 + branching];
            if let Some(p) = kids.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
                return Err(TreeError::Probability {
                    node,
                    reason: format!("child probability {p} is not in (0, 1]"),
                });
            }
            let sum: f64 = kids.iter().sum();
            if (sum - 1.0).abs() > PROBABILITY_TOL {
                return Err(TreeError::Probability {
                    node,
                    reason: format!("child probabilities sum to {sum}"),
                });
            }
        }
        Ok(Self {
            dim,
            branching,
            horizon,
            states,
            probs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the first node at depth `t`.
    pub fn level_start(&self, t: usize) -> usize {
        node_count(self.branching, t) - self.level_len(t)
    }

    /// Number of nodes at depth `t`.
    pub fn level_len(&self, t: usize) -> usize {
        self.branching.pow(t as u32)
    }

    pub fn state(&self, node: usize) -> &[f64] {
        &self.states[node * self.dim..(node + 1) * self.dim]
    }

    /// Probability of `node` given its parent.
    pub fn prob(&self, node: usize) -> f64 {
        self.probs[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        (node > 0).then(|| (node - 1) / self.branching)
    }

    pub fn depth(&self, node: usize) -> usize {
        let mut t = 0;
        while node_count(self.branching, t) <= node {
            t += 1;
        }
        t
    }

    /// Child indices of `node` (empty for leaves).
    pub fn children(&self, node: usize) -> std::ops::Range<usize> {
        let first = self.branching * node + 1;
        if first >= self.len() {
            first..first
        } else {
            first..first + self.branching
        }
    }

    /// Root-to-node path of states.
    pub fn path_to(&self, node: usize) -> Path {
        let mut chain = vec![node];
        let mut k = node;
        while let Some(p) = self.parent(k) {
            chain.push(p);
            k = p;
        }
        let values = chain.iter().rev().flat_map(|&k| self.state(k).iter().copied()).collect();
        Path::from_flat(self.dim, values).expect("tree states are finite")
    }

    /// Product of conditional probabilities from the root to `node`.
    pub fn path_probability(&self, node: usize) -> f64 {
        let mut p = self.probs[node];
        let mut k = node;
        while let Some(parent) = self.parent(k) {
            p *= self.probs[parent];
            k = parent;
        }
        p
    }

    /// The first `horizon + 1` levels.
    pub fn truncate(&self, horizon: usize) -> Result<Self, TreeError> {
        if horizon == 0 {
            return Err(TreeError::ZeroHorizon);
        }
        let nodes = node_count(self.branching, horizon.min(self.horizon));
        Self::new(
            self.dim,
            self.branching,
            self.states[..nodes * self.dim].to_vec(),
            self.probs[..nodes].to_vec(),
        )
    }

    /// Line-oriented dump: `index depth parent state child:prob ...`, with
    /// `-` for the root's parent and coordinates separated by commas.
    pub fn to_text(&self) -> String {
        let mut out = format!("# scenario-tree dim={} branching={} horizon={}\n", self.dim, self.branching, self.horizon);
        for node in 0..self.len() {
            let parent = self.parent(node).map_or("-".to_string(), |p| p.to_string());
            let state: Vec<String> = self.state(node).iter().map(|v| format!("{v:e}")).collect();
            write!(out, "{node} {} {parent} {}", self.depth(node), state.join(",")).unwrap();
            for child in self.children(node) {
                write!(out, " {child}:{:e}", self.probs[child]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`ScenarioTree::to_text`].
    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let parse_err = |line: usize, reason: String| TreeError::Parse { line, reason };
        let mut dim = None;
        let mut branching = None;
        let mut states = Vec::new();
        let mut probs = vec![1.0];
        let mut count = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if let Some(header) = raw.strip_prefix('#') {
                for field in header.split_whitespace() {
                    if let Some(v) = field.strip_prefix("branching=") {
                        branching = Some(v.parse::<usize>().map_err(|e| parse_err(line, e.to_string()))?);
                    }
                }
                continue;
            }
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() < 4 {
                return Err(parse_err(line, "expected index, depth, parent and state".into()));
            }
            let index: usize = fields[0].parse().map_err(|_| parse_err(line, format!("bad index {:?}", fields[0])))?;
            if index != count {
                return Err(parse_err(line, format!("node {index} out of order")));
            }
            count += 1;
            let coords: Vec<f64> = fields[3]
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|_| parse_err(line, format!("bad coordinate {v:?}"))))
                .collect::<Result<_, _>>()?;
            match dim {
                None => dim = Some(coords.len()),
                Some(d) if d != coords.len() => return Err(parse_err(line, format!("expected {d} coordinates"))),
                _ => {}
            }
            states.extend(coords);
            for child in &fields[4..] {
                let (k, p) = child
                    .split_once(':')
                    .ok_or_else(|| parse_err(line, format!("bad child entry {child:?}")))?;
                let k: usize = k.parse().map_err(|_| parse_err(line, format!("bad child index {k:?}")))?;
                let p: f64 = p.parse().map_err(|_| parse_err(line, format!("bad probability {p:?}")))?;
                if k != probs.len() {
                    return Err(parse_err(line, format!("child {k} out of order")));
                }
                probs.push(p);
            }
        }
        let dim = dim.ok_or_else(|| parse_err(0, "no nodes".into()))?;
        if probs.len() != count {
            return Err(parse_err(0, "child list does not match node count".into()));
        }
        Self::new(dim, branching.unwrap_or(2), states, probs)
    }
}

/// `Σ_leaves P(leaf path) · f(leaf path)`.
pub fn tree_expectation(tree: &ScenarioTree, functional: impl Fn(&Path) -> f64) -> f64 {
    let start = tree.level_start(tree.horizon());
    (start..tree.len())
        .map(|leaf| tree.path_probability(leaf) * functional(&tree.path_to(leaf)))
        .sum()
}

/// One slot per node while building: state and conditional probability.
type Slot = (f64, f64);

/// Below this depth the two subtrees of a node are built in parallel.
const PARALLEL_DEPTH: usize = 6;

/// Grows a binary tree of depth `horizon` from a one-dimensional model.
pub fn build_tree(
    model: &dyn ProcessModel,
    horizon: usize,
    config: &TreeConfig,
    seeds: &SeedTree,
) -> Result<ScenarioTree, TreeError> {
    let d = model.dimension();
    if d != 1 {
        return Err(TreeError::Dimension(d));
    }
    if horizon == 0 {
        return Err(TreeError::ZeroHorizon);
    }
    if horizon > MAX_TREE_HORIZON {
        return Err(TreeError::HorizonTooLarge(horizon));
    }
    if config.samples_per_node < 2 {
        return Err(TreeError::TooFewSamples(config.samples_per_node));
    }
    let x0 = model.initial_state()[0];
    let mut levels: Vec<Vec<Slot>> = (1..=horizon).map(|t| vec![(0.0, 0.0); 1 << t]).collect();
    {
        let mut slices: Vec<&mut [Slot]> = levels.iter_mut().map(|v| v.as_mut_slice()).collect();
        let builder = Builder { model, config, seeds };
        builder.grow(0, 0, &mut vec![x0], &[x0], &mut slices);
    }
    let mut states = Vec::with_capacity(2 << horizon);
    let mut probs = Vec::with_capacity(2 << horizon);
    states.push(x0);
    probs.push(1.0);
    for level in levels {
        for (s, p) in level {
            states.push(s);
            probs.push(p);
        }
    }
    ScenarioTree::new(1, 2, states, probs)
}

struct Builder<'a> {
    model: &'a dyn ProcessModel,
    config: &'a TreeConfig,
    seeds: &'a SeedTree,
}

impl Builder<'_> {
    /// Fills the subtree below the node at (`depth`, `pos`). `history` holds
    /// the node's root path; `members` the draws that formed the node;
    /// `below[k]` the slots of this subtree at depth `depth + 1 + k`.
    fn grow(&self, depth: usize, pos: usize, history: &mut Vec<f64>, members: &[f64], below: &mut [&mut [Slot]]) {
        if below.is_empty() {
            return;
        }
        let draws = self.successors(depth, pos, history, members);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let (low, high): (Vec<f64>, Vec<f64>) = draws.iter().partition(|&&v| v <= mean);
        let total = draws.len() as f64;
        let (left, right) = if high.is_empty() {
            // Every draw coincides: keep the shape with two equal children.
            let v = low[0];
            (((v, 0.5), low.clone()), ((v, 0.5), low))
        } else {
            let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            (
                ((avg(&low), low.len() as f64 / total), low),
                ((avg(&high), high.len() as f64 / total), high),
            )
        };
        below[0][0] = left.0;
        below[0][1] = right.0;

        let parallel = depth < PARALLEL_DEPTH && below.len() > 2;
        let mut lower_left = Vec::with_capacity(below.len() - 1);
        let mut lower_right = Vec::with_capacity(below.len() - 1);
        for level in below[1..].iter_mut() {
            let half = level.len() / 2;
            let (a, b) = level.split_at_mut(half);
            lower_left.push(a);
            lower_right.push(b);
        }
        let (lm, rm) = (left.1, right.1);
        let (ls, rs) = (left.0 .0, right.0 .0);
        if parallel {
            let mut lh = history.clone();
            let mut rh = history.clone();
            lh.push(ls);
            rh.push(rs);
            rayon::join(
                || self.grow(depth + 1, 2 * pos, &mut lh, &lm, &mut lower_left),
                || self.grow(depth + 1, 2 * pos + 1, &mut rh, &rm, &mut lower_right),
            );
        } else {
            history.push(ls);
            self.grow(depth + 1, 2 * pos, history, &lm, &mut lower_left);
            history.pop();
            history.push(rs);
            self.grow(depth + 1, 2 * pos + 1, history, &rm, &mut lower_right);
            history.pop();
        }
    }

    fn successors(&self, depth: usize, pos: usize, history: &mut [f64], members: &[f64]) -> Vec<f64> {
        let s = self.config.samples_per_node;
        let mut rng = self.seeds.rng(&[depth as u64, pos as u64]);
        let mut out = Vec::with_capacity(s);
        match self.config.conditioning {
            Conditioning::NodeState => self.model.sample_next(history, s, &mut rng, &mut out),
            Conditioning::SetMembers => {
                let last = history.len() - 1;
                let node_state = history[last];
                for k in 0..s {
                    history[last] = members[k % members.len()];
                    self.model.sample_next(history, 1, &mut rng, &mut out);
                }
                history[last] = node_state;
            }
        }
        out
    }
}
