//! Closed-form energy and charging quantities: link costs, node consumption,
//! cluster ingress, charging rates, logical rates and head consumption.

use serde::{Deserialize, Serialize};

use crate::clustering::{Cluster, Clustering};
use crate::error::ScheduleError;
use crate::scenario::{distance, NetworkParams, NodeId, Point, Scenario};

/// Energy to push one bit over distance `d`: beta1 + beta2 * d^omega.
pub fn link_cost(d: f64, params: &NetworkParams) -> f64 {
    params.beta1 + params.beta2 * d.powf(params.path_loss_exp)
}

/// Consumption rate of a normal node sensing and sending at `rate` over
/// distance `d_to_head`.
pub fn node_consumption(rate: f64, d_to_head: f64, params: &NetworkParams) -> f64 {
    (params.alpha + link_cost(d_to_head, params)) * rate
}

/// Total data rate entering a cluster head: member rates plus its own.
pub fn cluster_ingress_rate(cluster: &Cluster, scenario: &Scenario) -> f64 {
    let head_rate = scenario.node(cluster.head_id).expect("head in scenario").rate;
    cluster
        .member_ids
        .iter()
        .map(|&t| scenario.node(t).expect("member in scenario").rate)
        .sum::<f64>()
        + head_rate
}

/// Total consumption rate of all normal nodes (sensing plus transmission).
pub fn sensor_layer_energy(scenario: &Scenario, clustering: &Clustering) -> f64 {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let head = scenario.node(c.head_id).unwrap().pos;
            c.member_ids
                .iter()
                .map(|&t| {
                    let n = scenario.node(t).unwrap();
                    node_consumption(n.rate, distance(n.pos, head), &scenario.params)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Power received by a node at distance `d` from the vehicle: mu(d) * Umax
/// inside the charging range, zero beyond it.
pub fn charge_rate(d: f64, params: &NetworkParams) -> f64 {
    if d <= params.d_delta {
        params.mu(d) * params.u_max
    } else {
        0.0
    }
}

/// Logical consumption rate: consumption divided by charging rate, i.e. the
/// fraction of charging time the node demands.
pub fn logical_rate(consumption: f64, charge: f64) -> Result<f64, ScheduleError> {
    if charge <= 0.0 {
        return Err(ScheduleError::ZeroConsumption);
    }
    Ok(consumption / charge)
}

/// Aggregate logical rate of a cluster, each member charged from its own
/// containing cell center. Reporting-only; the schedule LP handles
/// multi-center charging exactly.
pub fn cluster_logical_rate(
    scenario: &Scenario,
    cluster: &Cluster,
    plan: &crate::hexgrid::CellPlan,
) -> Result<f64, ScheduleError> {
    let head = scenario.node(cluster.head_id).expect("head in scenario").pos;
    let mut total = 0.0;
    for (cell, ids) in &plan.cells {
        let center = crate::hexgrid::cell_center(*cell, plan.side);
        for &t in ids {
            let n = scenario.node(t).unwrap();
            let c = node_consumption(n.rate, distance(n.pos, head), &scenario.params);
            let u = charge_rate(distance(n.pos, center), &scenario.params);
            if u <= 0.0 {
                return Err(ScheduleError::UnchargeableNode(t));
            }
            total += c / u;
        }
    }
    Ok(total)
}

/// Instantaneous flow routing out of the cluster heads: head-to-head rates
/// plus head-to-base rates, in bits per unit time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowPattern {
    /// (from head, to head, rate); absent pairs carry zero flow.
    pub head_flows: Vec<(NodeId, NodeId, f64)>,
    /// (head, rate to the mobile base station).
    pub base_flows: Vec<(NodeId, f64)>,
}

impl FlowPattern {
    pub fn flow_between(&self, from: NodeId, to: NodeId) -> f64 {
        self.head_flows
            .iter()
            .find(|&&(f, t, _)| f == from && t == to)
            .map_or(0.0, |&(_, _, v)| v)
    }

    pub fn flow_to_base(&self, from: NodeId) -> f64 {
        self.base_flows
            .iter()
            .find(|&&(f, _)| f == from)
            .map_or(0.0, |&(_, v)| v)
    }

    pub fn incoming(&self, to: NodeId) -> f64 {
        self.head_flows.iter().filter(|&&(_, t, _)| t == to).map(|&(_, _, v)| v).sum()
    }
}

/// Consumption rate of a cluster head under a flow pattern with the vehicle
/// at `vehicle_pos`: sensing, member reception, relay reception, head-to-head
/// transmission and transmission to the mobile base station.
pub fn head_consumption_rate(
    head_id: NodeId,
    vehicle_pos: Point,
    flows: &FlowPattern,
    clustering: &Clustering,
    scenario: &Scenario,
) -> f64 {
    let params = &scenario.params;
    let head = scenario.node(head_id).expect("head in scenario");
    let cluster = clustering
        .clusters
        .iter()
        .find(|c| c.head_id == head_id)
        .expect("head_id must be a cluster head");
    let member_rates: f64 = cluster.member_ids.iter().map(|&t| scenario.node(t).unwrap().rate).sum();
    let mut c = params.alpha * head.rate + params.rho * member_rates;
    c += params.rho * flows.incoming(head_id);
    for &(from, to, f) in &flows.head_flows {
        if from == head_id {
            let to_pos = scenario.node(to).unwrap().pos;
            c += link_cost(distance(head.pos, to_pos), params) * f;
        }
    }
    c += link_cost(distance(head.pos, vehicle_pos), params) * flows.flow_to_base(head_id);
    c
}

/// Head charging is by co-location only: full output when the vehicle sits
/// on the head, zero otherwise.
pub fn head_charge_rate(head_pos: Point, vehicle_pos: Point, params: &NetworkParams) -> f64 {
    if distance(head_pos, vehicle_pos) <= 1e-9 {
        params.u_max
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Cluster;
    use crate::scenario::{load_builtin_table1, NetworkParams};

    #[test]
    fn link_cost_examples() {
        let p = NetworkParams::defaults();
        assert_eq!(link_cost(0.0, &p), 1.0);
        assert!((link_cost(0.5, &p) - 1.0625).abs() < 1e-12);
        let s = load_builtin_table1();
        let d = distance(s.node(19).unwrap().pos, s.node(36).unwrap().pos);
        assert!((link_cost(d, &p) - 1.0000608).abs() < 1e-7);
    }

    #[test]
    fn node_consumption_examples() {
        let p = NetworkParams::defaults();
        assert_eq!(node_consumption(0.0, 0.3, &p), 0.0);
        assert!((node_consumption(1.0, 0.2, &p) - 1.0016).abs() < 1e-12);
        assert!((node_consumption(0.7, 0.16123, &p) - 0.700473).abs() < 1e-6);
    }

    #[test]
    fn ingress_rate_sums_members_and_head() {
        let s = load_builtin_table1();
        let lone = Cluster { head_id: 33, member_ids: vec![] };
        assert!((cluster_ingress_rate(&lone, &s) - 0.1).abs() < 1e-12);
        let pair = Cluster { head_id: 1, member_ids: vec![2] };
        assert!((cluster_ingress_rate(&pair, &s) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ingress_mass_matches_total_rate() {
        let s = load_builtin_table1();
        let clustering = crate::clustering::cluster(&s, 4, 42, 16, 100, Default::default()).unwrap();
        let total: f64 = s.nodes.iter().map(|n| n.rate).sum();
        let sum: f64 = clustering.clusters.iter().map(|c| cluster_ingress_rate(c, &s)).sum();
        assert!((sum - total).abs() < 1e-9);
    }

    #[test]
    fn sensor_layer_energy_equals_comm_cost_when_alpha_zero() {
        let s = load_builtin_table1();
        let clustering = crate::clustering::cluster(&s, 4, 42, 16, 100, Default::default()).unwrap();
        let cs = crate::clustering::comm_cost(&s, &clustering);
        assert!((sensor_layer_energy(&s, &clustering) - cs).abs() < 1e-12);
    }

    #[test]
    fn charge_rate_examples_both_presets() {
        let p = NetworkParams::defaults();
        assert_eq!(charge_rate(0.0, &p), 50.0);
        assert!((charge_rate(0.1, &p) - 47.8).abs() < 1e-9);
        assert_eq!(charge_rate(0.11, &p), 0.0);
        let mut q = NetworkParams::defaults();
        q.mu_coeffs = crate::scenario::MU_QUADRATIC.to_vec();
        assert!((charge_rate(0.1, &q) - 28.0).abs() < 1e-9);
    }

    #[test]
    fn charge_rate_non_increasing_within_range() {
        let p = NetworkParams::defaults();
        let mut prev = f64::INFINITY;
        for k in 0..=1000 {
            let d = p.d_delta * k as f64 / 1000.0;
            let u = charge_rate(d, &p);
            assert!(u <= prev + 1e-12);
            prev = u;
        }
        assert_eq!(charge_rate(p.d_delta + 1e-9, &p), 0.0);
    }

    #[test]
    fn logical_rate_examples() {
        assert_eq!(logical_rate(0.0, 50.0).unwrap(), 0.0);
        assert!((logical_rate(0.7, 28.0).unwrap() - 0.025).abs() < 1e-12);
        assert!(logical_rate(0.5, 0.0).is_err());
    }

    #[test]
    fn head_consumption_matches_hand_value() {
        let s = load_builtin_table1();
        // Cluster with head 1 and one member of rate 0.3 (node 49).
        let clustering = Clustering {
            clusters: vec![
                Cluster { head_id: 1, member_ids: vec![49] },
                Cluster {
                    head_id: 2,
                    member_ids: s.nodes.iter().map(|n| n.id).filter(|&i| i != 1 && i != 2 && i != 49).collect(),
                },
            ],
        };
        let flows = FlowPattern {
            head_flows: vec![(2, 1, 2.0)],
            base_flows: vec![(1, 2.3)],
        };
        // Vehicle 0.5 away from head 1.
        let head = s.node(1).unwrap().pos;
        let vehicle = Point::new(head.x + 0.5, head.y);
        let c = head_consumption_rate(1, vehicle, &flows, &clustering, &s);
        assert!((c - 4.74375).abs() < 1e-12, "got {c}");
        // All-zero flows leave only member reception.
        let quiet = FlowPattern::default();
        let c0 = head_consumption_rate(1, vehicle, &quiet, &clustering, &s);
        assert!((c0 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn head_consumption_is_linear_in_flows() {
        let s = load_builtin_table1();
        let clustering = crate::clustering::cluster(&s, 4, 42, 16, 100, Default::default()).unwrap();
        let head = clustering.clusters[0].head_id;
        let other = clustering.clusters[1].head_id;
        let vehicle = Point::new(0.4, 0.9);
        let base = FlowPattern::default();
        let f1 = FlowPattern {
            head_flows: vec![(head, other, 1.4), (other, head, 0.6)],
            base_flows: vec![(head, 2.2)],
        };
        let lambda = 3.5;
        let f2 = FlowPattern {
            head_flows: f1.head_flows.iter().map(|&(a, b, v)| (a, b, v * lambda)).collect(),
            base_flows: f1.base_flows.iter().map(|&(a, v)| (a, v * lambda)).collect(),
        };
        let c0 = head_consumption_rate(head, vehicle, &base, &clustering, &s);
        let c1 = head_consumption_rate(head, vehicle, &f1, &clustering, &s);
        let c2 = head_consumption_rate(head, vehicle, &f2, &clustering, &s);
        assert!((c2 - c0 - lambda * (c1 - c0)).abs() < 1e-9);
    }

    #[test]
    fn head_charging_requires_colocation() {
        let p = NetworkParams::defaults();
        let head = Point::new(0.3, 0.3);
        assert_eq!(head_charge_rate(head, head, &p), 50.0);
        assert_eq!(head_charge_rate(head, Point::new(0.35, 0.3), &p), 0.0);
        assert_eq!(head_charge_rate(head, Point::new(1.3, 0.3), &p), 0.0);
    }
}
