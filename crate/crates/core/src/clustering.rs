//! Cluster selection: partition nodes into m clusters with one head each so
//! that total normal-node transmission energy is minimized.
//!
//! The algorithm seeds m heads by distance-weighted sampling, then alternates
//! a cheapest-head assignment step with a head update step until the head set
//! stops changing. Several independent restarts are run and the cheapest
//! result kept.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::link_cost;
use crate::error::ClusterError;
use crate::scenario::{distance, NodeId, Scenario};

/// One cluster: a head and its normal nodes (head excluded from members).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub head_id: NodeId,
    pub member_ids: Vec<NodeId>,
}

/// A partition of the scenario's nodes into clusters, ordered by head id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn m(&self) -> usize {
        self.clusters.len()
    }

    pub fn head_ids(&self) -> Vec<NodeId> {
        self.clusters.iter().map(|c| c.head_id).collect()
    }

    /// Check the partition invariants against a scenario.
    pub fn validate(&self, scenario: &Scenario) -> Result<(), ClusterError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.clusters {
            if scenario.node(c.head_id).is_none() {
                return Err(ClusterError::Invalid(format!("head {} not in scenario", c.head_id)));
            }
            if !seen.insert(c.head_id) {
                return Err(ClusterError::Invalid(format!("node {} appears twice", c.head_id)));
            }
            for &m in &c.member_ids {
                if scenario.node(m).is_none() {
                    return Err(ClusterError::Invalid(format!("member {m} not in scenario")));
                }
                if !seen.insert(m) {
                    return Err(ClusterError::Invalid(format!("node {m} appears twice")));
                }
            }
        }
        if seen.len() != scenario.nodes.len() {
            return Err(ClusterError::Invalid(format!(
                "{} of {} nodes covered",
                seen.len(),
                scenario.nodes.len()
            )));
        }
        Ok(())
    }
}

/// Head update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// New head = cluster node nearest the cluster centroid.
    #[default]
    CentroidSnap,
    /// New head = cluster node minimizing the member transmission cost.
    ExactMedoid,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "centroid-snap" => Ok(Variant::CentroidSnap),
            "exact-medoid" => Ok(Variant::ExactMedoid),
            other => Err(format!("unknown variant `{other}` (expected centroid-snap or exact-medoid)")),
        }
    }
}

/// Assign every non-head node to the head with the cheapest link, ties to
/// the lowest head id.
pub fn assignment_step(scenario: &Scenario, heads: &[NodeId]) -> BTreeMap<NodeId, Vec<NodeId>> {
    assert!(!heads.is_empty(), "assignment needs at least one head");
    let mut members: BTreeMap<NodeId, Vec<NodeId>> = heads.iter().map(|&h| (h, Vec::new())).collect();
    let head_nodes: Vec<_> = {
        let mut hs: Vec<NodeId> = heads.to_vec();
        hs.sort_unstable();
        hs.iter().map(|&h| scenario.node(h).expect("head must exist")).collect()
    };
    for node in &scenario.nodes {
        if members.contains_key(&node.id) {
            continue;
        }
        let best = head_nodes
            .iter()
            .min_by(|a, b| {
                let ca = link_cost(distance(node.pos, a.pos), &scenario.params) * node.rate;
                let cb = link_cost(distance(node.pos, b.pos), &scenario.params) * node.rate;
                ca.partial_cmp(&cb).unwrap().then(a.id.cmp(&b.id))
            })
            .expect("non-empty head set");
        members.get_mut(&best.id).unwrap().push(node.id);
    }
    members
}

/// Pick each cluster's next head under the given variant.
pub fn head_update_step(scenario: &Scenario, clustering: &Clustering, variant: Variant) -> Vec<NodeId> {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let group: Vec<NodeId> = std::iter::once(c.head_id).chain(c.member_ids.iter().copied()).collect();
            match variant {
                Variant::CentroidSnap => {
                    let (mut cx, mut cy) = (0.0, 0.0);
                    for &id in &group {
                        let p = scenario.node(id).unwrap().pos;
                        cx += p.x;
                        cy += p.y;
                    }
                    let n = group.len() as f64;
                    let centroid = crate::scenario::Point::new(cx / n, cy / n);
                    best_by(&group, |id| distance(scenario.node(id).unwrap().pos, centroid))
                }
                Variant::ExactMedoid => best_by(&group, |cand| {
                    let cp = scenario.node(cand).unwrap().pos;
                    group
                        .iter()
                        .filter(|&&t| t != cand)
                        .map(|&t| {
                            let n = scenario.node(t).unwrap();
                            link_cost(distance(n.pos, cp), &scenario.params) * n.rate
                        })
                        .sum::<f64>()
                }),
            }
        })
        .collect()
}

fn best_by(ids: &[NodeId], score: impl Fn(NodeId) -> f64) -> NodeId {
    *ids.iter()
        .min_by(|&&a, &&b| score(a).partial_cmp(&score(b)).unwrap().then(a.cmp(&b)))
        .expect("non-empty candidate set")
}

/// Total transmission energy rate of all normal nodes.
pub fn comm_cost(scenario: &Scenario, clustering: &Clustering) -> f64 {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let head = scenario.node(c.head_id).unwrap().pos;
            c.member_ids
                .iter()
                .map(|&t| {
                    let n = scenario.node(t).unwrap();
                    link_cost(distance(n.pos, head), &scenario.params) * n.rate
                })
                .sum::<f64>()
        })
        .sum()
}

/// Run the full clustering: `restarts` independent seeded runs, keep the
/// cheapest. Deterministic for fixed arguments.
pub fn cluster(
    scenario: &Scenario,
    m: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    variant: Variant,
) -> Result<Clustering, ClusterError> {
    let n = scenario.nodes.len();
    if m == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if m > n {
        return Err(ClusterError::TooManyClusters { m, n });
    }
    let mut best: Option<(f64, Clustering)> = None;
    for run in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (run as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let heads = seed_heads(scenario, m, &mut rng);
        let clustering = run_to_fixpoint(scenario, heads, max_iter, variant);
        let cost = comm_cost(scenario, &clustering);
        if best.as_ref().map_or(true, |(bc, _)| cost < *bc) {
            best = Some((cost, clustering));
        }
    }
    let (_, clustering) = best.expect("at least one restart ran");
    debug_assert!(clustering.validate(scenario).is_ok());
    Ok(clustering)
}

/// Distance-weighted head seeding: first head uniform, then each next head
/// sampled proportionally to squared distance from the chosen set.
fn seed_heads(scenario: &Scenario, m: usize, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
    let nodes = &scenario.nodes;
    let mut heads: Vec<NodeId> = Vec::with_capacity(m);
    heads.push(nodes[rng.gen_range(0..nodes.len())].id);
    while heads.len() < m {
        let weights: Vec<f64> = nodes
            .iter()
            .map(|n| {
                if heads.contains(&n.id) {
                    0.0
                } else {
                    heads
                        .iter()
                        .map(|&h| {
                            let d = distance(n.pos, scenario.node(h).unwrap().pos);
                            d * d
                        })
                        .fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let x = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = None;
            for (k, &w) in weights.iter().enumerate() {
                acc += w;
                if x < acc {
                    chosen = Some(k);
                    break;
                }
            }
            chosen.unwrap_or_else(|| weights.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // All remaining candidates coincide with heads spatially; take the
            // lowest-id node not yet chosen.
            nodes.iter().position(|n| !heads.contains(&n.id)).expect("m <= n")
        };
        heads.push(nodes[pick].id);
    }
    heads
}

fn run_to_fixpoint(scenario: &Scenario, mut heads: Vec<NodeId>, max_iter: usize, variant: Variant) -> Clustering {
    let mut best: Option<(f64, Clustering)> = None;
    let mut prev_cost = f64::INFINITY;
    for _ in 0..max_iter.max(1) {
        let members = assignment_step(scenario, &heads);
        let clustering = to_clustering(&members);
        let cost = comm_cost(scenario, &clustering);
        if variant == Variant::ExactMedoid {
            // Each medoid step and assignment step can only lower the cost.
            debug_assert!(cost <= prev_cost + 1e-9, "medoid cost rose: {prev_cost} -> {cost}");
        }
        prev_cost = cost;
        if best.as_ref().map_or(true, |(bc, _)| cost < *bc) {
            best = Some((cost, clustering.clone()));
        }
        let new_heads = head_update_step(scenario, &clustering, variant);
        let mut old_sorted = heads.clone();
        let mut new_sorted = new_heads.clone();
        old_sorted.sort_unstable();
        new_sorted.sort_unstable();
        if old_sorted == new_sorted {
            return clustering;
        }
        heads = new_heads;
    }
    best.expect("loop ran at least once").1
}

fn to_clustering(members: &BTreeMap<NodeId, Vec<NodeId>>) -> Clustering {
    Clustering {
        clusters: members
            .iter()
            .map(|(&head_id, ids)| {
                let mut member_ids = ids.clone();
                member_ids.sort_unstable();
                Cluster { head_id, member_ids }
            })
            .collect(),
    }
}
