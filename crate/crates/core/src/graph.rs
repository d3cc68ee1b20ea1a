//! Graph operations: topological sorting, worst-case finish-time labeling,
//! and pruning of makespan-infeasible tasks.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::error::{Error, Result};
use crate::mission::{EdgeKey, NodeId, RewardModel, TaskGraph, SOURCE};
use crate::scalar::Scalar;

/// Topological order with ties broken by ascending node id. On a cycle,
/// returns the node ids stuck in it.
pub fn try_topo_order<T: Scalar>(g: &TaskGraph<T>) -> std::result::Result<Vec<NodeId>, Vec<NodeId>> {
    let mut in_deg: BTreeMap<NodeId, usize> =
        g.node_ids().map(|id| (id, g.in_neighbors(id).len())).collect();
    // Min-heap on node id.
    let mut ready: BinaryHeap<std::cmp::Reverse<NodeId>> = in_deg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| std::cmp::Reverse(*id))
        .collect();
    let mut order = Vec::with_capacity(in_deg.len());
    while let Some(std::cmp::Reverse(id)) = ready.pop() {
        order.push(id);
        for &next in g.out_neighbors(id) {
            let d = in_deg.get_mut(&next).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(std::cmp::Reverse(next));
            }
        }
    }
    if order.len() == in_deg.len() {
        Ok(order)
    } else {
        let placed: BTreeSet<NodeId> = order.into_iter().collect();
        Err(g.node_ids().filter(|id| !placed.contains(id)).collect())
    }
}

pub fn topo_order<T: Scalar>(g: &TaskGraph<T>) -> Result<Vec<NodeId>> {
    try_topo_order(g).map_err(|_| Error::Cycle)
}

/// Worst-case finish times: for each node, the duration of the longest
/// path from a source that terminates at it, travel times included.
#[derive(Debug, Clone, PartialEq)]
pub struct MakespanLabels<T> {
    pub worst_finish: BTreeMap<NodeId, T>,
}

impl<T: Scalar> MakespanLabels<T> {
    pub fn get(&self, id: NodeId) -> T {
        self.worst_finish.get(&id).copied().unwrap_or_else(T::zero)
    }
}

/// Label every node with its worst-case finish time by dynamic programming
/// in topological order.
pub fn label_makespan<T: Scalar>(g: &TaskGraph<T>) -> Result<MakespanLabels<T>> {
    let order = topo_order(g)?;
    let mut worst: BTreeMap<NodeId, T> = BTreeMap::new();
    for &j in &order {
        if g.is_source(j) {
            worst.insert(j, T::zero());
            continue;
        }
        let arrival = g
            .in_neighbors(j)
            .iter()
            .map(|&i| worst[&i] + g.travel.get(i, j))
            .fold(T::zero(), T::max);
        worst.insert(j, arrival + g.duration(j));
    }
    Ok(MakespanLabels { worst_finish: worst })
}

/// Result of pruning a graph against a makespan budget.
#[derive(Debug, Clone)]
pub struct PruneResult<T> {
    pub graph: TaskGraph<T>,
    pub reward: RewardModel<T>,
    pub removed: Vec<NodeId>,
}

/// Remove every task whose worst-case finish time exceeds the makespan.
///
/// Labels are recomputed and pruning repeated to a fixed point; surviving
/// tasks left without any incoming edge are re-attached to the source so
/// the source-edge rule keeps holding on the pruned graph. Source nodes
/// are never pruned.
pub fn prune_graph<T: Scalar>(
    g: &TaskGraph<T>,
    rm: &RewardModel<T>,
    makespan: T,
) -> Result<PruneResult<T>> {
    let mut graph = g.clone();
    let mut removed: Vec<NodeId> = Vec::new();
    loop {
        let labels = label_makespan(&graph)?;
        let doomed: BTreeSet<NodeId> = graph
            .task_ids()
            .filter(|&j| labels.get(j) > makespan)
            .collect();
        if doomed.is_empty() {
            break;
        }
        removed.extend(doomed.iter().copied());
        graph = graph.without_nodes(&doomed);
        let reattach: Vec<EdgeKey> = graph
            .task_ids()
            .filter(|&j| graph.in_neighbors(j).is_empty())
            .map(|j| (SOURCE, j))
            .collect();
        if !reattach.is_empty() {
            graph = add_edges(&graph, &reattach)?;
        }
    }
    removed.sort_unstable();
    let reward = rm.restricted_to(&graph);
    Ok(PruneResult {
        graph,
        reward,
        removed,
    })
}

/// Rebuild a graph with extra edges.
pub fn add_edges<T: Scalar>(g: &TaskGraph<T>, extra: &[EdgeKey]) -> Result<TaskGraph<T>> {
    let nodes = g.node_ids().map(|id| g.node(id).unwrap().clone()).collect();
    let mut edges: Vec<EdgeKey> = g.edges().to_vec();
    for &e in extra {
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    let sources: Vec<NodeId> = g.sources().iter().copied().collect();
    Ok(
        TaskGraph::new(nodes, edges, g.travel.clone(), g.capacities().clone())?
            .with_sources(sources),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{TaskNode, TravelTimes};

    fn graph(nodes: &[(NodeId, f64)], edges: &[EdgeKey], travel: &[(EdgeKey, f64)]) -> TaskGraph<f64> {
        let nodes = nodes
            .iter()
            .map(|&(id, d)| TaskNode::new(id, d))
            .collect();
        let mut tt = TravelTimes::default();
        for &((i, j), dt) in travel {
            tt.set(i, j, dt);
        }
        TaskGraph::new(nodes, edges.to_vec(), tt, BTreeMap::new()).unwrap()
    }

    #[test]
    fn topo_chain() {
        let g = graph(&[(0, 0.0), (1, 1.0), (2, 1.0)], &[(0, 1), (1, 2)], &[]);
        assert_eq!(topo_order(&g).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn topo_diamond_ties_by_id() {
        let g = graph(
            &[(0, 0.0), (1, 1.0), (2, 1.0), (3, 1.0)],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
            &[],
        );
        assert_eq!(topo_order(&g).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn topo_detects_cycle() {
        let g = graph(&[(0, 0.0), (1, 1.0), (2, 1.0)], &[(0, 1), (1, 2), (2, 1)], &[]);
        assert!(matches!(topo_order(&g), Err(Error::Cycle)));
    }

    #[test]
    fn labels_chain_with_travel() {
        let g = graph(
            &[(0, 0.0), (1, 5.0), (2, 5.0)],
            &[(0, 1), (1, 2)],
            &[((0, 1), 0.0), ((1, 2), 2.0)],
        );
        let labels = label_makespan(&g).unwrap();
        assert_eq!(labels.get(0), 0.0);
        assert_eq!(labels.get(1), 5.0);
        assert_eq!(labels.get(2), 12.0);
    }

    #[test]
    fn labels_single_task() {
        let g = graph(&[(0, 0.0), (1, 7.0)], &[(0, 1)], &[]);
        let labels = label_makespan(&g).unwrap();
        assert_eq!(labels.get(1), 7.0);
    }

    #[test]
    fn labels_diamond_takes_longest_branch() {
        // Branch durations 5 and 9 into node 3 with d3 = 1 and no travel.
        let g = graph(
            &[(0, 0.0), (1, 5.0), (2, 9.0), (3, 1.0)],
            &[(0, 1), (0, 2), (1, 3), (2, 3)],
            &[],
        );
        let labels = label_makespan(&g).unwrap();
        assert_eq!(labels.get(3), 10.0);
    }

    #[test]
    fn prune_removes_late_tail() {
        let g = graph(
            &[(0, 0.0), (1, 5.0), (2, 5.0)],
            &[(0, 1), (1, 2)],
            &[((1, 2), 2.0)],
        );
        let rm = RewardModel::new();
        let res = prune_graph(&g, &rm, 10.0).unwrap();
        assert_eq!(res.removed, vec![2]);
        assert!(res.graph.contains(1));
        assert!(!res.graph.contains(2));
    }

    #[test]
    fn prune_keeps_everything_under_total_budget() {
        let g = graph(
            &[(0, 0.0), (1, 5.0), (2, 5.0)],
            &[(0, 1), (1, 2)],
            &[((1, 2), 2.0)],
        );
        let rm = RewardModel::new();
        let res = prune_graph(&g, &rm, 12.0).unwrap();
        assert!(res.removed.is_empty());
    }

    #[test]
    fn prune_zero_budget_removes_all_tasks() {
        let g = graph(&[(0, 0.0), (1, 5.0), (2, 5.0)], &[(0, 1), (1, 2)], &[]);
        let rm = RewardModel::new();
        let res = prune_graph(&g, &rm, 0.0).unwrap();
        assert_eq!(res.removed, vec![1, 2]);
        assert_eq!(res.graph.num_tasks(), 0);
    }

    #[test]
    fn prune_is_idempotent() {
        let g = graph(
            &[(0, 0.0), (1, 5.0), (2, 5.0), (3, 2.0)],
            &[(0, 1), (1, 2), (0, 3)],
            &[((1, 2), 2.0)],
        );
        let rm = RewardModel::new();
        let once = prune_graph(&g, &rm, 10.0).unwrap();
        let twice = prune_graph(&once.graph, &once.reward, 10.0).unwrap();
        assert!(twice.removed.is_empty());
        assert_eq!(once.graph, twice.graph);
    }
}
