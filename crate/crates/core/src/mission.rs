//! Mission model: the task graph, the reward-function catalog, and the
//! reward propagation that everything else consumes.
//!
//! A mission is a DAG of tasks rooted at a virtual source node `0`. Each
//! real task carries a coalition function (effectiveness vs. fraction of
//! the fleet assigned), each task-to-task edge an influence function
//! (effect of the upstream reward on the downstream task), and each task
//! an aggregation operator over incoming influence values plus a
//! combination operator that merges coalition effectiveness with the
//! aggregated influence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node identifier. Id `0` is always the virtual source.
pub type NodeId = u32;

/// Directed edge, `(tail, head)`.
pub type EdgeKey = (NodeId, NodeId);

pub const SOURCE: NodeId = 0;

/// One task. The virtual source is a `TaskNode` with duration 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode<T> {
    pub id: NodeId,
    pub duration: T,
    #[serde(default)]
    pub label: String,
}

impl<T: Scalar> TaskNode<T> {
    pub fn new(id: NodeId, duration: T) -> Self {
        Self {
            id,
            duration,
            label: String::new(),
        }
    }
}

/// Inter-task travel times. Missing pairs default to zero; the diagonal is
/// always zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TravelTimes<T>(pub BTreeMap<EdgeKey, T>);

impl<T: Scalar> TravelTimes<T> {
    pub fn get(&self, from: NodeId, to: NodeId) -> T {
        if from == to {
            return T::zero();
        }
        self.0.get(&(from, to)).copied().unwrap_or_else(T::zero)
    }

    pub fn set(&mut self, from: NodeId, to: NodeId, seconds: T) {
        if from != to {
            self.0.insert((from, to), seconds);
        }
    }
}

/// Directed acyclic task graph with travel times and optional edge
/// capacities (fraction of the fleet allowed to traverse an edge).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph<T> {
    nodes: BTreeMap<NodeId, TaskNode<T>>,
    edges: Vec<EdgeKey>,
    out_adj: BTreeMap<NodeId, Vec<NodeId>>,
    in_adj: BTreeMap<NodeId, Vec<NodeId>>,
    pub travel: TravelTimes<T>,
    capacity: BTreeMap<EdgeKey, T>,
    sources: BTreeSet<NodeId>,
}

impl<T: Scalar> TaskGraph<T> {
    /// Build a graph from nodes and edges. Fails on structural problems
    /// (duplicate ids, dangling or duplicate edges); model-level rules are
    /// checked separately by [`validate_graph`].
    pub fn new(
        nodes: Vec<TaskNode<T>>,
        edges: Vec<EdgeKey>,
        travel: TravelTimes<T>,
        capacity: BTreeMap<EdgeKey, T>,
    ) -> Result<Self> {
        let mut node_map = BTreeMap::new();
        for n in nodes {
            let id = n.id;
            if node_map.insert(id, n).is_some() {
                return Err(Error::DuplicateNode(id));
            }
        }
        let mut edge_list: Vec<EdgeKey> = Vec::with_capacity(edges.len());
        let mut seen = BTreeSet::new();
        for (t, h) in edges {
            if !node_map.contains_key(&t) || !node_map.contains_key(&h) {
                return Err(Error::DanglingEdge(t, h));
            }
            if !seen.insert((t, h)) {
                return Err(Error::DuplicateEdge(t, h));
            }
            edge_list.push((t, h));
        }
        edge_list.sort_unstable();
        let mut out_adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut in_adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for id in node_map.keys() {
            out_adj.insert(*id, Vec::new());
            in_adj.insert(*id, Vec::new());
        }
        for &(t, h) in &edge_list {
            out_adj.get_mut(&t).unwrap().push(h);
            in_adj.get_mut(&h).unwrap().push(t);
        }
        for v in out_adj.values_mut().chain(in_adj.values_mut()) {
            v.sort_unstable();
        }
        let mut sources = BTreeSet::new();
        sources.insert(SOURCE);
        Ok(Self {
            nodes: node_map,
            edges: edge_list,
            out_adj,
            in_adj,
            travel,
            capacity,
            sources,
        })
    }

    /// Mark additional nodes as sources (used by the online solver for
    /// artificial in-progress source nodes).
    pub fn with_sources(mut self, extra: impl IntoIterator<Item = NodeId>) -> Self {
        self.sources.extend(extra);
        self
    }

    pub fn node(&self, id: NodeId) -> Result<&TaskNode<T>> {
        self.nodes.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    /// Ids of real tasks (everything that is not a source node).
    pub fn task_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied().filter(move |id| !self.is_source(*id))
    }

    pub fn num_tasks(&self) -> usize {
        self.task_ids().count()
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn has_edge(&self, tail: NodeId, head: NodeId) -> bool {
        self.edges.binary_search(&(tail, head)).is_ok()
    }

    pub fn out_neighbors(&self, id: NodeId) -> &[NodeId] {
        self.out_adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_neighbors(&self, id: NodeId) -> &[NodeId] {
        self.in_adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_source(&self, id: NodeId) -> bool {
        self.sources.contains(&id)
    }

    pub fn sources(&self) -> &BTreeSet<NodeId> {
        &self.sources
    }

    /// Edge capacity, defaulting to 1.
    pub fn capacity(&self, tail: NodeId, head: NodeId) -> T {
        self.capacity
            .get(&(tail, head))
            .copied()
            .unwrap_or_else(T::one)
    }

    pub fn capacities(&self) -> &BTreeMap<EdgeKey, T> {
        &self.capacity
    }

    pub fn duration(&self, id: NodeId) -> T {
        self.nodes
            .get(&id)
            .map(|n| n.duration)
            .unwrap_or_else(T::zero)
    }

    /// Copy of the graph without the given nodes (and their incident
    /// edges). Sources other than the removed ones are preserved.
    pub fn without_nodes(&self, removed: &BTreeSet<NodeId>) -> Self {
        let nodes = self
            .nodes
            .values()
            .filter(|n| !removed.contains(&n.id))
            .cloned()
            .collect();
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|(t, h)| !removed.contains(t) && !removed.contains(h))
            .collect();
        let capacity = self
            .capacity
            .iter()
            .filter(|((t, h), _)| !removed.contains(t) && !removed.contains(h))
            .map(|(k, v)| (*k, *v))
            .collect();
        let mut g = Self::new(nodes, edges, self.travel.clone(), capacity)
            .expect("subgraph of a valid graph is structurally valid");
        g.sources = self
            .sources
            .iter()
            .copied()
            .filter(|s| !removed.contains(s))
            .collect();
        g
    }
}

/// Closed-form scalar function catalog used for coalition and influence
/// functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "FunctionDescriptor<T>",
    into = "FunctionDescriptor<T>",
    bound = "T: Scalar"
)]
pub enum ScalarFunction<T> {
    /// `c[0] + c[1] x + c[2] x^2 + ...`, lowest degree first.
    Polynomial(Vec<T>),
    /// `scale * x^exponent` with exponent in (0, 1).
    PowerSublinear { scale: T, exponent: T },
    /// `c0 / (1 + exp(-c1 (x - c2)))`.
    Sigmoid { c0: T, c1: T, c2: T },
    /// `a0 + a1 x`.
    Linear { a0: T, a1: T },
    /// `a0 (1 - exp(-a1 x))`.
    ExpSaturation { a0: T, a1: T },
    Constant(T),
}

impl<T: Scalar> ScalarFunction<T> {
    /// Evaluate the closed form at `x`.
    pub fn eval(&self, x: T) -> T {
        match self {
            ScalarFunction::Polynomial(coeffs) => {
                let mut acc = T::zero();
                for &c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc
            }
            ScalarFunction::PowerSublinear { scale, exponent } => {
                if x <= T::zero() {
                    T::zero()
                } else {
                    *scale * x.powf(*exponent)
                }
            }
            ScalarFunction::Sigmoid { c0, c1, c2 } => {
                *c0 / (T::one() + (-(*c1) * (x - *c2)).exp())
            }
            ScalarFunction::Linear { a0, a1 } => *a0 + *a1 * x,
            ScalarFunction::ExpSaturation { a0, a1 } => {
                *a0 * (T::one() - (-(*a1) * x).exp())
            }
            ScalarFunction::Constant(v) => *v,
        }
    }

    /// Visit every parameter mutably (used by the model-perturbation error
    /// model).
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut T)) {
        match self {
            ScalarFunction::Polynomial(coeffs) => coeffs.iter_mut().for_each(&mut f),
            ScalarFunction::PowerSublinear { scale, exponent } => {
                f(scale);
                f(exponent);
            }
            ScalarFunction::Sigmoid { c0, c1, c2 } => {
                f(c0);
                f(c1);
                f(c2);
            }
            ScalarFunction::Linear { a0, a1 } => {
                f(a0);
                f(a1);
            }
            ScalarFunction::ExpSaturation { a0, a1 } => {
                f(a0);
                f(a1);
            }
            ScalarFunction::Constant(v) => f(v),
        }
    }

    /// Parameter sign/range constraints for this function kind.
    pub fn is_valid(&self) -> bool {
        match self {
            ScalarFunction::Polynomial(coeffs) => coeffs.iter().all(|c| *c >= T::zero()),
            ScalarFunction::PowerSublinear { scale, exponent } => {
                *scale >= T::zero() && *exponent > T::zero() && *exponent < T::one()
            }
            ScalarFunction::Sigmoid { c0, c1, .. } => *c0 >= T::zero() && *c1 > T::zero(),
            ScalarFunction::Linear { .. } => true,
            ScalarFunction::ExpSaturation { a0, a1 } => *a0 >= T::zero() && *a1 > T::zero(),
            ScalarFunction::Constant(v) => *v >= T::zero(),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ScalarFunction::Polynomial(_) => "polynomial",
            ScalarFunction::PowerSublinear { .. } => "sublinear",
            ScalarFunction::Sigmoid { .. } => "sigmoid",
            ScalarFunction::Linear { .. } => "linear",
            ScalarFunction::ExpSaturation { .. } => "exp_saturation",
            ScalarFunction::Constant(_) => "constant",
        }
    }
}

/// Wire format for scalar functions: `{"kind": "sigmoid", "params": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionDescriptor<T> {
    pub kind: String,
    pub params: Vec<T>,
}

impl<T: Scalar> From<ScalarFunction<T>> for FunctionDescriptor<T> {
    fn from(f: ScalarFunction<T>) -> Self {
        let kind = f.kind().to_string();
        let params = match f {
            ScalarFunction::Polynomial(coeffs) => coeffs,
            ScalarFunction::PowerSublinear { scale, exponent } => vec![scale, exponent],
            ScalarFunction::Sigmoid { c0, c1, c2 } => vec![c0, c1, c2],
            ScalarFunction::Linear { a0, a1 } => vec![a0, a1],
            ScalarFunction::ExpSaturation { a0, a1 } => vec![a0, a1],
            ScalarFunction::Constant(v) => vec![v],
        };
        Self { kind, params }
    }
}

impl<T: Scalar> TryFrom<FunctionDescriptor<T>> for ScalarFunction<T> {
    type Error = String;

    fn try_from(d: FunctionDescriptor<T>) -> std::result::Result<Self, String> {
        let need = |n: usize| -> std::result::Result<(), String> {
            if d.params.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "function kind '{}' expects {} params, got {}",
                    d.kind,
                    n,
                    d.params.len()
                ))
            }
        };
        let p = &d.params;
        let f = match d.kind.as_str() {
            "polynomial" => {
                if p.is_empty() {
                    return Err("polynomial needs at least one coefficient".into());
                }
                ScalarFunction::Polynomial(p.clone())
            }
            "sublinear" => {
                need(2)?;
                ScalarFunction::PowerSublinear {
                    scale: p[0],
                    exponent: p[1],
                }
            }
            "sigmoid" => {
                need(3)?;
                ScalarFunction::Sigmoid {
                    c0: p[0],
                    c1: p[1],
                    c2: p[2],
                }
            }
            "linear" => {
                need(2)?;
                ScalarFunction::Linear { a0: p[0], a1: p[1] }
            }
            "exp_saturation" => {
                need(2)?;
                ScalarFunction::ExpSaturation { a0: p[0], a1: p[1] }
            }
            "constant" => {
                need(1)?;
                ScalarFunction::Constant(p[0])
            }
            other => return Err(format!("unknown function kind '{other}'")),
        };
        Ok(f)
    }
}

/// Operator aggregating incoming influence values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Product,
}

impl Aggregation {
    pub fn fold<T: Scalar>(self, values: impl IntoIterator<Item = T>) -> T {
        match self {
            Aggregation::Sum => values.into_iter().fold(T::zero(), |a, v| a + v),
            Aggregation::Product => values.into_iter().fold(T::one(), |a, v| a * v),
        }
    }
}

/// Operator combining coalition effectiveness with aggregated influence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combination {
    Sum,
    Product,
    Min,
}

impl Combination {
    pub fn apply<T: Scalar>(self, coalition: T, influence: T) -> T {
        match self {
            Combination::Sum => coalition + influence,
            Combination::Product => coalition * influence,
            Combination::Min => coalition.min(influence),
        }
    }
}

/// Per-node and per-edge reward machinery.
///
/// `ghost_influence` holds observed-reward constants injected by the online
/// solver; `zeroed` marks tasks whose reward is forced to zero (used for
/// precedence-violated ancestors and clairvoyant task-failure models).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardModel<T> {
    pub coalition: BTreeMap<NodeId, ScalarFunction<T>>,
    pub influence: BTreeMap<EdgeKey, ScalarFunction<T>>,
    pub aggregation: BTreeMap<NodeId, Aggregation>,
    pub combination: BTreeMap<NodeId, Combination>,
    pub ghost_influence: BTreeMap<NodeId, Vec<T>>,
    pub zeroed: BTreeSet<NodeId>,
}

impl<T: Scalar> RewardModel<T> {
    pub fn new() -> Self {
        Self {
            coalition: BTreeMap::new(),
            influence: BTreeMap::new(),
            aggregation: BTreeMap::new(),
            combination: BTreeMap::new(),
            ghost_influence: BTreeMap::new(),
            zeroed: BTreeSet::new(),
        }
    }

    /// Restrict the model to the nodes and edges of `g`. Ghost constants
    /// and zero markers survive as long as their node does; they model
    /// history, not topology.
    pub fn restricted_to(&self, g: &TaskGraph<T>) -> Self {
        Self {
            coalition: self
                .coalition
                .iter()
                .filter(|(id, _)| g.contains(**id))
                .map(|(id, f)| (*id, f.clone()))
                .collect(),
            influence: self
                .influence
                .iter()
                .filter(|((t, h), _)| g.has_edge(*t, *h))
                .map(|(k, f)| (*k, f.clone()))
                .collect(),
            aggregation: self
                .aggregation
                .iter()
                .filter(|(id, _)| g.contains(**id))
                .map(|(id, a)| (*id, *a))
                .collect(),
            combination: self
                .combination
                .iter()
                .filter(|(id, _)| g.contains(**id))
                .map(|(id, c)| (*id, *c))
                .collect(),
            ghost_influence: self
                .ghost_influence
                .iter()
                .filter(|(id, _)| g.contains(**id))
                .map(|(id, v)| (*id, v.clone()))
                .collect(),
            zeroed: self
                .zeroed
                .iter()
                .copied()
                .filter(|id| g.contains(*id))
                .collect(),
        }
    }

    /// Model-level validation against a graph.
    pub fn validate(&self, g: &TaskGraph<T>) -> Vec<Violation> {
        let mut out = Vec::new();
        for id in g.task_ids() {
            if !self.coalition.contains_key(&id) {
                out.push(Violation::MissingCoalition(id));
            }
            if !self.aggregation.contains_key(&id) {
                out.push(Violation::MissingAggregation(id));
            }
            if !self.combination.contains_key(&id) {
                out.push(Violation::MissingCombination(id));
            }
        }
        for &(t, h) in g.edges() {
            if g.is_source(t) || g.is_source(h) {
                continue;
            }
            if !self.influence.contains_key(&(t, h)) {
                out.push(Violation::MissingInfluence(t, h));
            }
        }
        for (id, f) in &self.coalition {
            if !f.is_valid() {
                out.push(Violation::InvalidFunction(format!("coalition of task {id}")));
            }
        }
        for ((t, h), f) in &self.influence {
            if !f.is_valid() {
                out.push(Violation::InvalidFunction(format!("influence of edge ({t}, {h})")));
            }
        }
        out
    }
}

/// Per-task rewards. The source contributes zero by convention.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardVector<T>(pub BTreeMap<NodeId, T>);

impl<T: Scalar> RewardVector<T> {
    pub fn get(&self, id: NodeId) -> T {
        self.0.get(&id).copied().unwrap_or_else(T::zero)
    }

    /// Total reward over all real tasks.
    pub fn total(&self) -> T {
        self.0.values().copied().sum()
    }
}

/// Fleet of homogeneous robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fleet(u32);

impl Fleet {
    pub fn new(size: u32) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyFleet);
        }
        Ok(Self(size))
    }

    pub fn size(&self) -> u32 {
        self.0
    }

    /// `count / N` as a population fraction.
    pub fn fraction<T: Scalar>(&self, count: u32) -> T {
        T::from_u32(count).unwrap() / T::from_u32(self.0).unwrap()
    }
}

/// A complete mission: graph, reward model, fleet, and makespan budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Mission<T> {
    pub graph: TaskGraph<T>,
    pub reward: RewardModel<T>,
    pub fleet: Fleet,
    pub makespan: T,
}

impl<T: Scalar> Mission<T> {
    /// All graph- and model-level violations.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = validate_graph(&self.graph);
        v.extend(self.reward.validate(&self.graph));
        if self.makespan < T::zero() {
            v.push(Violation::NegativeMakespan);
        }
        v
    }
}

/// A single rule violation found by validation. Diagnostics, not errors.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Cycle(Vec<NodeId>),
    MissingSource,
    SourceHasIncoming(NodeId),
    Orphan(NodeId),
    NegativeDuration(NodeId),
    SourceDurationNonZero,
    SelfTravelNonZero(NodeId),
    NegativeTravel(NodeId, NodeId),
    CapacityOutOfRange(NodeId, NodeId),
    MissingCoalition(NodeId),
    MissingAggregation(NodeId),
    MissingCombination(NodeId),
    MissingInfluence(NodeId, NodeId),
    InvalidFunction(String),
    NegativeMakespan,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Cycle(nodes) => write!(f, "directed cycle among nodes {nodes:?}"),
            Violation::MissingSource => write!(f, "graph has no source node 0"),
            Violation::SourceHasIncoming(i) => {
                write!(f, "source node has an incoming edge from {i}")
            }
            Violation::Orphan(i) => write!(
                f,
                "task {i} has no incoming edge and no edge from the source"
            ),
            Violation::NegativeDuration(i) => write!(f, "task {i} has negative duration"),
            Violation::SourceDurationNonZero => write!(f, "source node duration must be 0"),
            Violation::SelfTravelNonZero(i) => write!(f, "travel time ({i}, {i}) must be 0"),
            Violation::NegativeTravel(i, j) => {
                write!(f, "travel time ({i}, {j}) is negative")
            }
            Violation::CapacityOutOfRange(i, j) => {
                write!(f, "capacity of edge ({i}, {j}) must lie in (0, 1]")
            }
            Violation::MissingCoalition(i) => write!(f, "task {i} has no coalition function"),
            Violation::MissingAggregation(i) => write!(f, "task {i} has no aggregation entry"),
            Violation::MissingCombination(i) => write!(f, "task {i} has no combination entry"),
            Violation::MissingInfluence(i, j) => {
                write!(f, "edge ({i}, {j}) has no influence function")
            }
            Violation::InvalidFunction(what) => write!(f, "invalid parameters for {what}"),
            Violation::NegativeMakespan => write!(f, "makespan must be non-negative"),
        }
    }
}

/// Check the task-graph invariants: acyclicity, source-edge rules, travel
/// times, and capacities. Returns an empty list iff the graph is valid.
pub fn validate_graph<T: Scalar>(g: &TaskGraph<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    if !g.contains(SOURCE) {
        out.push(Violation::MissingSource);
    }
    for &i in g.in_neighbors(SOURCE) {
        out.push(Violation::SourceHasIncoming(i));
    }
    if let Err(cycle) = crate::graph::try_topo_order(g) {
        out.push(Violation::Cycle(cycle));
    }
    for id in g.node_ids() {
        let d = g.duration(id);
        if g.is_source(id) {
            if d != T::zero() {
                out.push(Violation::SourceDurationNonZero);
            }
            continue;
        }
        if d < T::zero() {
            out.push(Violation::NegativeDuration(id));
        }
        if g.in_neighbors(id).is_empty() {
            out.push(Violation::Orphan(id));
        }
    }
    for (&(i, j), &dt) in &g.travel.0 {
        if i == j && dt != T::zero() {
            out.push(Violation::SelfTravelNonZero(i));
        } else if dt < T::zero() {
            out.push(Violation::NegativeTravel(i, j));
        }
    }
    for (&(i, j), &c) in g.capacities() {
        if c <= T::zero() || c > T::one() {
            out.push(Violation::CapacityOutOfRange(i, j));
        }
    }
    out
}

/// Coalition fractions assigned to tasks, `task id -> [0, 1]`.
pub type CoalitionFractions<T> = BTreeMap<NodeId, T>;

/// Propagate rewards through the graph in topological order.
///
/// For task `j` the influence values are `delta_ij(r_i)` over incoming
/// edges from real tasks, plus any ghost constants. Edges from source
/// nodes contribute nothing; a task with no influence values at all is
/// influence-neutral and earns its coalition value directly. Rewards are
/// clamped at zero from below, and tasks marked zeroed return zero.
pub fn eval_rewards<T: Scalar>(
    g: &TaskGraph<T>,
    rm: &RewardModel<T>,
    fractions: &CoalitionFractions<T>,
) -> Result<RewardVector<T>> {
    let order = crate::graph::topo_order(g)?;
    let mut rewards: BTreeMap<NodeId, T> = BTreeMap::new();
    let mut values: Vec<T> = Vec::new();
    for &j in &order {
        if g.is_source(j) {
            continue;
        }
        let x = *fractions.get(&j).ok_or(Error::MissingFraction(j))?;
        let rho = rm
            .coalition
            .get(&j)
            .ok_or(Error::MissingCoalition(j))?
            .eval(x);
        values.clear();
        for &i in g.in_neighbors(j) {
            if g.is_source(i) {
                continue;
            }
            let delta = rm
                .influence
                .get(&(i, j))
                .ok_or(Error::MissingInfluence((i, j)))?;
            values.push(delta.eval(rewards[&i]));
        }
        if let Some(ghosts) = rm.ghost_influence.get(&j) {
            values.extend(ghosts.iter().copied());
        }
        let mut r = if values.is_empty() {
            rho
        } else {
            let agg = *rm.aggregation.get(&j).ok_or(Error::MissingAggregation(j))?;
            let comb = *rm.combination.get(&j).ok_or(Error::MissingCombination(j))?;
            comb.apply(rho, agg.fold(values.iter().copied()))
        };
        if r < T::zero() {
            r = T::zero();
        }
        if rm.zeroed.contains(&j) {
            r = T::zero();
        }
        if !r.is_finite() {
            return Err(Error::NonFinite(j));
        }
        rewards.insert(j, r);
    }
    Ok(RewardVector(rewards))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chain_graph() -> TaskGraph<f64> {
        let nodes = vec![
            TaskNode::new(0, 0.0),
            TaskNode::new(1, 5.0),
            TaskNode::new(2, 5.0),
        ];
        TaskGraph::new(nodes, vec![(0, 1), (1, 2)], TravelTimes::default(), BTreeMap::new())
            .unwrap()
    }

    fn chain_reward() -> RewardModel<f64> {
        let mut rm = RewardModel::new();
        rm.coalition
            .insert(1, ScalarFunction::Linear { a0: 0.0, a1: 1.0 });
        rm.coalition
            .insert(2, ScalarFunction::Linear { a0: 0.0, a1: 1.0 });
        rm.influence
            .insert((1, 2), ScalarFunction::Linear { a0: 0.0, a1: 2.0 });
        for id in [1, 2] {
            rm.aggregation.insert(id, Aggregation::Sum);
            rm.combination.insert(id, Combination::Product);
        }
        rm
    }

    #[test]
    fn sigmoid_midpoint() {
        let f = ScalarFunction::Sigmoid {
            c0: 1.0,
            c1: 10.0,
            c2: 0.5,
        };
        assert_relative_eq!(f.eval(0.5), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn linear_affine() {
        let f = ScalarFunction::Linear { a0: 2.0, a1: 3.0 };
        assert_relative_eq!(f.eval(1.0), 5.0);
    }

    #[test]
    fn exp_saturation_closed_form() {
        let f = ScalarFunction::ExpSaturation { a0: 1.0, a1: 2.0 };
        // 1 - e^{-2}
        assert_relative_eq!(f.eval(1.0), 0.8646647167633873, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_horner() {
        let f = ScalarFunction::Polynomial(vec![1.0, 2.0, 3.0]);
        assert_relative_eq!(f.eval(2.0), 1.0 + 4.0 + 12.0);
    }

    #[test]
    fn validate_well_formed_chain() {
        assert!(validate_graph(&chain_graph()).is_empty());
    }

    #[test]
    fn validate_detects_cycle() {
        let nodes = vec![
            TaskNode::new(0, 0.0),
            TaskNode::new(1, 1.0),
            TaskNode::new(2, 1.0),
        ];
        let g = TaskGraph::new(
            nodes,
            vec![(0, 1), (1, 2), (2, 1)],
            TravelTimes::default(),
            BTreeMap::new(),
        )
        .unwrap();
        let violations = validate_graph(&g);
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle(nodes) if nodes.contains(&1) && nodes.contains(&2))));
    }

    #[test]
    fn validate_detects_orphan() {
        let nodes = vec![
            TaskNode::new(0, 0.0),
            TaskNode::new(1, 1.0),
            TaskNode::new(3, 1.0),
        ];
        let g = TaskGraph::new(nodes, vec![(0, 1)], TravelTimes::default(), BTreeMap::new())
            .unwrap();
        let violations = validate_graph(&g);
        assert!(violations.iter().any(|v| matches!(v, Violation::Orphan(3))));
    }

    #[test]
    fn chain_reward_propagation() {
        // Hand propagation: r1 = rho(1.0) = 1 (influence-neutral at the
        // source-adjacent node), r2 = rho(1.0) * delta(r1) = 1 * 2 = 2.
        let g = chain_graph();
        let rm = chain_reward();
        let fractions = BTreeMap::from([(1, 1.0), (2, 1.0)]);
        let r = eval_rewards(&g, &rm, &fractions).unwrap();
        assert_relative_eq!(r.get(1), 1.0);
        assert_relative_eq!(r.get(2), 2.0);
        assert_relative_eq!(r.total(), 3.0);
    }

    #[test]
    fn zero_fractions_zero_rewards() {
        let g = chain_graph();
        let rm = chain_reward();
        let fractions = BTreeMap::from([(1, 0.0), (2, 0.0)]);
        let r = eval_rewards(&g, &rm, &fractions).unwrap();
        assert_eq!(r.total(), 0.0);
    }

    #[test]
    fn min_combination_takes_influence() {
        // Transport-style model: rho = 2 + 5 x, Min combination, one
        // influence summing to 5 while rho evaluates to 7.
        let nodes = vec![
            TaskNode::new(0, 0.0),
            TaskNode::new(1, 1.0),
            TaskNode::new(2, 1.0),
        ];
        let g = TaskGraph::new(nodes, vec![(0, 1), (1, 2)], TravelTimes::default(), BTreeMap::new())
            .unwrap();
        let mut rm = RewardModel::new();
        rm.coalition
            .insert(1, ScalarFunction::Constant(5.0));
        rm.coalition
            .insert(2, ScalarFunction::Linear { a0: 2.0, a1: 5.0 });
        rm.influence
            .insert((1, 2), ScalarFunction::Linear { a0: 0.0, a1: 1.0 });
        for id in [1, 2] {
            rm.aggregation.insert(id, Aggregation::Sum);
        }
        rm.combination.insert(1, Combination::Product);
        rm.combination.insert(2, Combination::Min);
        let fractions = BTreeMap::from([(1, 1.0), (2, 1.0)]);
        let r = eval_rewards(&g, &rm, &fractions).unwrap();
        assert_relative_eq!(r.get(2), 5.0);
    }

    #[test]
    fn ghost_constants_feed_aggregation() {
        let g = chain_graph();
        let mut rm = chain_reward();
        rm.ghost_influence.insert(2, vec![3.0]);
        let fractions = BTreeMap::from([(1, 1.0), (2, 1.0)]);
        let r = eval_rewards(&g, &rm, &fractions).unwrap();
        // influence set at node 2: {2 * r1, 3.0} summed = 5.
        assert_relative_eq!(r.get(2), 5.0);
    }

    #[test]
    fn zeroed_tasks_return_zero_and_propagate() {
        let g = chain_graph();
        let mut rm = chain_reward();
        rm.zeroed.insert(1);
        let fractions = BTreeMap::from([(1, 1.0), (2, 1.0)]);
        let r = eval_rewards(&g, &rm, &fractions).unwrap();
        assert_eq!(r.get(1), 0.0);
        // delta12(0) = 0, product combination kills node 2.
        assert_eq!(r.get(2), 0.0);
    }

    #[test]
    fn missing_fraction_is_an_error() {
        let g = chain_graph();
        let rm = chain_reward();
        let fractions = BTreeMap::from([(1, 1.0)]);
        assert!(matches!(
            eval_rewards(&g, &rm, &fractions),
            Err(Error::MissingFraction(2))
        ));
    }

    #[test]
    fn function_descriptor_round_trip() {
        let f: ScalarFunction<f64> = ScalarFunction::Sigmoid {
            c0: 2.0,
            c1: 7.5,
            c2: 0.4,
        };
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"sigmoid\""));
        let back: ScalarFunction<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn fleet_rejects_zero() {
        assert!(Fleet::new(0).is_err());
        assert_eq!(Fleet::new(4).unwrap().fraction::<f64>(1), 0.25);
    }
}
