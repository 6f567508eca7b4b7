//! Timeline replay of a schedule against battery limits: the executable form
//! of the renewability claim. Batteries start full, charging saturates at
//! capacity, and the verdict checks both the floor and steady-state
//! period-end behavior.

use crate::clustering::Clustering;
use crate::energy::{charge_rate, head_consumption_rate, node_consumption};
use crate::error::SimError;
use crate::scenario::{distance, NodeId, Point, Scenario};
use crate::schedule::{ChargeModel, ClusterPlan, Epoch, EpochKind, HeadLayerPlan, JointPlan};

/// One interval with constant per-node consumption and charge rates.
#[derive(Debug, Clone)]
struct Phase {
    duration: f64,
    label: PhaseLabel,
    /// Consumption rate per node, aligned with the trace node order.
    consumption: Vec<f64>,
    /// Charge rate per node, aligned with the trace node order.
    charge: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhaseLabel {
    Stop(Point),
    Move,
    Vacation,
    DetourStop(Point),
    DetourMove,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Arrive { time: f64, pos: Point },
    Charge { time: f64, pos: Point, duration: f64, nodes: Vec<NodeId> },
    Depart { time: f64, pos: Point },
}

/// Per-period battery statistics for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePeriod {
    pub min_energy: f64,
    pub min_time: f64,
    pub end_energy: f64,
    pub start_energy: f64,
    /// Nominal energy delivered (saturation clip error bounded by one step).
    pub charged: f64,
    pub consumed: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub dt: f64,
    pub node_ids: Vec<NodeId>,
    /// periods x nodes.
    pub periods: Vec<Vec<NodePeriod>>,
    pub events: Vec<TraceEvent>,
    /// Decimated samples: (time, energy per node).
    pub samples: Vec<(f64, Vec<f64>)>,
    pub sample_stride: usize,
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub node: NodeId,
    pub time: f64,
    pub energy: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub failures: Vec<Failure>,
}

/// Floating-point dust allowance on exact-threshold comparisons.
const FLOAT_EPS: f64 = 1e-6;

/// Replay a composed layered schedule for `periods` periods. Each period
/// tiles complete head-layer cycles (floor of the plan's sub-period count),
/// with the cluster detour of sub-period j inserted at head j's stop.
pub fn simulate(
    scenario: &Scenario,
    clustering: &Clustering,
    joint: &JointPlan,
    head_plan: &HeadLayerPlan,
    cluster_plans: &[ClusterPlan],
    dt: f64,
    periods: usize,
) -> Result<Trace, SimError> {
    if dt <= 0.0 {
        return Err(SimError::Invalid("dt must be positive".into()));
    }
    if periods < 2 {
        return Err(SimError::Invalid("need at least 2 periods to judge steady state".into()));
    }
    let m = clustering.m();
    if joint.sub_period_assignment.len() != m {
        return Err(SimError::PlanMismatch(format!(
            "joint assigns {} clusters, clustering has {m}",
            joint.sub_period_assignment.len()
        )));
    }
    let mut head_ids = clustering.head_ids();
    head_ids.sort_unstable();
    if joint.sub_period_assignment != head_ids {
        return Err(SimError::PlanMismatch("joint assignment does not match clustering heads".into()));
    }
    for &hid in &head_ids {
        if !head_plan.participants.iter().any(|p| p.id == hid) {
            return Err(SimError::PlanMismatch(format!("head {hid} missing from head plan")));
        }
        if !cluster_plans.iter().any(|p| p.cluster_id == hid) {
            return Err(SimError::PlanMismatch(format!("cluster plan for head {hid} missing")));
        }
    }
    let sub_periods = joint.sub_periods.floor() as usize;
    if sub_periods < m {
        return Err(SimError::PlanMismatch(format!(
            "{sub_periods} whole sub-periods cannot host {m} cluster detours"
        )));
    }
    if sub_periods > 100_000 {
        return Err(SimError::Invalid(format!("{sub_periods} sub-periods per period is beyond replay scale")));
    }
    let node_ids: Vec<NodeId> = {
        let mut ids: Vec<NodeId> = scenario.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    };
    let index_of = |id: NodeId| node_ids.binary_search(&id).expect("node id in trace order");
    // Baseline consumption: normal nodes drain at a constant rate; heads vary
    // by epoch and are patched per phase.
    let mut normal_cons = vec![0.0; node_ids.len()];
    for c in &clustering.clusters {
        let head = scenario.node(c.head_id).unwrap();
        for &t in &c.member_ids {
            let n = scenario.node(t).unwrap();
            normal_cons[index_of(t)] = node_consumption(n.rate, distance(n.pos, head.pos), &scenario.params);
        }
    }
    let vacation_epoch = head_plan
        .epochs
        .iter()
        .position(|e| matches!(e.kind, EpochKind::Vacation))
        .ok_or_else(|| SimError::PlanMismatch("head plan lacks a vacation epoch".into()))?;
    let head_cons_for = |epoch: &Epoch, epoch_idx: usize, cons: &mut Vec<f64>| {
        for c in &clustering.clusters {
            cons[index_of(c.head_id)] = head_consumption_rate(
                c.head_id,
                epoch.position,
                &head_plan.flows[epoch_idx],
                clustering,
                scenario,
            );
        }
    };
    // Pre-build one period's phases; every period is identical.
    let mut phases: Vec<Phase> = Vec::new();
    let mut shortest_stop = f64::INFINITY;
    for sub in 0..sub_periods {
        let detour_cluster = if sub < m { Some(joint.sub_period_assignment[sub]) } else { None };
        let mut detour_time = 0.0;
        for (e, epoch) in head_plan.epochs.iter().enumerate() {
            let mut cons = normal_cons.clone();
            head_cons_for(epoch, e, &mut cons);
            match epoch.kind {
                EpochKind::Stop(s) => {
                    let duration = head_plan.stop_durations[s];
                    let mut charge = vec![0.0; node_ids.len()];
                    for p in &head_plan.participants {
                        if distance(p.pos, epoch.position) <= 1e-9 {
                            charge[index_of(p.id)] = scenario.params.u_max;
                        }
                    }
                    if duration > 0.0 {
                        shortest_stop = shortest_stop.min(duration);
                    }
                    phases.push(Phase {
                        duration,
                        label: PhaseLabel::Stop(epoch.position),
                        consumption: cons,
                        charge,
                    });
                    // Detour into the assigned cluster when this is its head.
                    if let Some(cid) = detour_cluster {
                        let head_pos = scenario.node(cid).unwrap().pos;
                        if distance(head_pos, epoch.position) <= 1e-9 {
                            let plan = cluster_plans.iter().find(|p| p.cluster_id == cid).unwrap();
                            let scaled = &joint
                                .scaled_stop_durations
                                .iter()
                                .find(|(id, _)| *id == cid)
                                .expect("scaled durations for visited cluster")
                                .1;
                            detour_time += push_detour_phases(
                                scenario,
                                clustering,
                                head_plan,
                                vacation_epoch,
                                plan,
                                scaled,
                                &normal_cons,
                                &node_ids,
                                &mut phases,
                                &mut shortest_stop,
                            );
                        }
                    }
                }
                EpochKind::Move { .. } => {
                    phases.push(Phase {
                        duration: epoch.fixed_duration.unwrap(),
                        label: PhaseLabel::Move,
                        consumption: cons,
                        charge: vec![0.0; node_ids.len()],
                    });
                }
                EpochKind::Vacation => {
                    let duration = head_plan.vacation - detour_time;
                    if duration < -1e-9 {
                        return Err(SimError::PlanMismatch(format!(
                            "detour of cluster {:?} ({detour_time:.3}) exceeds vacation {:.3}",
                            detour_cluster, head_plan.vacation
                        )));
                    }
                    phases.push(Phase {
                        duration: duration.max(0.0),
                        label: PhaseLabel::Vacation,
                        consumption: cons,
                        charge: vec![0.0; node_ids.len()],
                    });
                }
            }
        }
    }
    if dt > shortest_stop {
        return Err(SimError::DtTooLarge { dt, shortest: shortest_stop });
    }
    Ok(replay(scenario, &node_ids, &phases, dt, periods))
}

#[allow(clippy::too_many_arguments)]
fn push_detour_phases(
    scenario: &Scenario,
    clustering: &Clustering,
    head_plan: &HeadLayerPlan,
    vacation_epoch: usize,
    plan: &ClusterPlan,
    scaled: &[f64],
    normal_cons: &[f64],
    node_ids: &[NodeId],
    phases: &mut Vec<Phase>,
    shortest_stop: &mut f64,
) -> f64 {
    let index_of = |id: NodeId| node_ids.binary_search(&id).expect("node id in trace order");
    // During detours the heads run the vacation-epoch routing.
    let mut detour_cons = normal_cons.to_vec();
    for c in &clustering.clusters {
        detour_cons[index_of(c.head_id)] = head_consumption_rate(
            c.head_id,
            head_plan.epochs[vacation_epoch].position,
            &head_plan.flows[vacation_epoch],
            clustering,
            scenario,
        );
    }
    let speed = scenario.params.speed;
    let wps = &plan.tour.waypoints;
    let mut spent = 0.0;
    let mut emitted = vec![false; plan.stops.len()];
    for k in 0..wps.len() {
        if let Some(s) = (0..plan.stops.len()).find(|&s| !emitted[s] && plan.stops[s] == wps[k]) {
            emitted[s] = true;
            let duration = scaled[s];
            let mut charge = vec![0.0; node_ids.len()];
            for n in &scenario.nodes {
                let is_head = clustering.clusters.iter().any(|c| c.head_id == n.id);
                let d = distance(n.pos, plan.stops[s]);
                if is_head {
                    if d <= 1e-9 {
                        charge[index_of(n.id)] = scenario.params.u_max;
                    }
                } else {
                    charge[index_of(n.id)] = charge_rate(d, &scenario.params);
                }
            }
            if duration > 0.0 {
                *shortest_stop = shortest_stop.min(duration);
            }
            phases.push(Phase {
                duration,
                label: PhaseLabel::DetourStop(plan.stops[s]),
                consumption: detour_cons.clone(),
                charge,
            });
            spent += duration;
        }
        if wps.len() >= 2 {
            let len = distance(wps[k], wps[(k + 1) % wps.len()]);
            if len > 0.0 {
                phases.push(Phase {
                    duration: len / speed,
                    label: PhaseLabel::DetourMove,
                    consumption: detour_cons.clone(),
                    charge: vec![0.0; node_ids.len()],
                });
                spent += len / speed;
            }
        }
    }
    spent
}

/// Replay a head-layer plan on its own cycle (baseline mode): the epochs in
/// tour order, ranged or co-location charging at stops, per-epoch flow
/// consumption.
pub fn simulate_baseline(
    scenario: &Scenario,
    head_plan: &HeadLayerPlan,
    dt: f64,
    periods: usize,
) -> Result<Trace, SimError> {
    if dt <= 0.0 {
        return Err(SimError::Invalid("dt must be positive".into()));
    }
    if periods < 2 {
        return Err(SimError::Invalid("need at least 2 periods to judge steady state".into()));
    }
    // Every participant is its own one-node cluster for consumption purposes.
    let clustering = Clustering {
        clusters: head_plan
            .participants
            .iter()
            .map(|p| crate::clustering::Cluster { head_id: p.id, member_ids: vec![] })
            .collect(),
    };
    let node_ids: Vec<NodeId> = {
        let mut ids: Vec<NodeId> = head_plan.participants.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids
    };
    let index_of = |id: NodeId| node_ids.binary_search(&id).expect("participant in trace order");
    let mut phases = Vec::new();
    let mut shortest_stop = f64::INFINITY;
    for (e, epoch) in head_plan.epochs.iter().enumerate() {
        let mut cons = vec![0.0; node_ids.len()];
        for p in &head_plan.participants {
            cons[index_of(p.id)] =
                head_consumption_rate(p.id, epoch.position, &head_plan.flows[e], &clustering, scenario);
        }
        match epoch.kind {
            EpochKind::Stop(s) => {
                let duration = head_plan.stop_durations[s];
                let mut charge = vec![0.0; node_ids.len()];
                for p in &head_plan.participants {
                    let d = distance(p.pos, epoch.position);
                    charge[index_of(p.id)] = match head_plan.charge_model {
                        ChargeModel::Colocation => {
                            if d <= 1e-9 {
                                scenario.params.u_max
                            } else {
                                0.0
                            }
                        }
                        ChargeModel::Ranged => charge_rate(d, &scenario.params),
                    };
                }
                if duration > 0.0 {
                    shortest_stop = shortest_stop.min(duration);
                }
                phases.push(Phase {
                    duration,
                    label: PhaseLabel::Stop(epoch.position),
                    consumption: cons,
                    charge,
                });
            }
            EpochKind::Move { .. } => phases.push(Phase {
                duration: epoch.fixed_duration.unwrap(),
                label: PhaseLabel::Move,
                consumption: cons,
                charge: vec![0.0; node_ids.len()],
            }),
            EpochKind::Vacation => phases.push(Phase {
                duration: head_plan.vacation,
                label: PhaseLabel::Vacation,
                consumption: cons,
                charge: vec![0.0; node_ids.len()],
            }),
        }
    }
    if dt > shortest_stop {
        return Err(SimError::DtTooLarge { dt, shortest: shortest_stop });
    }
    Ok(replay(scenario, &node_ids, &phases, dt, periods))
}

fn replay(scenario: &Scenario, node_ids: &[NodeId], phases: &[Phase], dt: f64, periods: usize) -> Trace {
    let e_max = scenario.params.e_max;
    let e_min = scenario.params.e_min;
    let n = node_ids.len();
    let mut battery = vec![e_max; n];
    let mut time = 0.0f64;
    let mut events = Vec::new();
    let mut period_stats: Vec<Vec<NodePeriod>> = Vec::with_capacity(periods);
    let period_len: f64 = phases.iter().map(|p| p.duration).sum();
    let total_steps = (period_len * periods as f64 / dt).ceil();
    let stride = (total_steps / 20_000.0).ceil().max(1.0) as usize;
    let mut samples = Vec::new();
    let mut step_count = 0usize;
    for _ in 0..periods {
        let mut stats: Vec<NodePeriod> = battery
            .iter()
            .map(|&b| NodePeriod {
                min_energy: b,
                min_time: time,
                end_energy: b,
                start_energy: b,
                charged: 0.0,
                consumed: 0.0,
            })
            .collect();
        for phase in phases {
            if phase.duration <= 0.0 {
                continue;
            }
            if let PhaseLabel::Stop(pos) | PhaseLabel::DetourStop(pos) = phase.label {
                events.push(TraceEvent::Arrive { time, pos });
                let charged: Vec<NodeId> = node_ids
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| phase.charge[i] > 0.0)
                    .map(|(_, &id)| id)
                    .collect();
                events.push(TraceEvent::Charge { time, pos, duration: phase.duration, nodes: charged });
            }
            let mut remaining = phase.duration;
            while remaining > 1e-12 {
                let step = remaining.min(dt);
                for i in 0..n {
                    let net = phase.charge[i] - phase.consumption[i];
                    if battery[i] < e_max {
                        stats[i].charged += phase.charge[i] * step;
                    }
                    stats[i].consumed += phase.consumption[i] * step;
                    battery[i] = (battery[i] + net * step).min(e_max);
                    if battery[i] < stats[i].min_energy {
                        stats[i].min_energy = battery[i];
                        stats[i].min_time = time + step;
                    }
                }
                time += step;
                remaining -= step;
                step_count += 1;
                if step_count % stride == 0 {
                    samples.push((time, battery.clone()));
                }
            }
            if let PhaseLabel::Stop(pos) | PhaseLabel::DetourStop(pos) = phase.label {
                events.push(TraceEvent::Depart { time, pos });
            }
        }
        for (i, s) in stats.iter_mut().enumerate() {
            s.end_energy = battery[i];
        }
        period_stats.push(stats);
    }
    Trace {
        dt,
        node_ids: node_ids.to_vec(),
        periods: period_stats,
        events,
        samples,
        sample_stride: stride,
        e_min,
        e_max,
    }
}

/// Pass iff no sample dips below `E_min - margin_frac * E_max` and every
/// node's period-end energy is non-decreasing from period 2 onward.
pub fn check_renewable(trace: &Trace, margin_frac: f64) -> Verdict {
    let mut failures = Vec::new();
    let floor = trace.e_min - margin_frac * trace.e_max - FLOAT_EPS;
    for (p, stats) in trace.periods.iter().enumerate() {
        for (i, s) in stats.iter().enumerate() {
            if s.min_energy < floor {
                failures.push(Failure {
                    node: trace.node_ids[i],
                    time: s.min_time,
                    energy: s.min_energy,
                    reason: format!(
                        "dipped below floor {:.3} in period {} (margin {margin_frac})",
                        trace.e_min - margin_frac * trace.e_max,
                        p + 1
                    ),
                });
            }
        }
    }
    let steady_tol = 1e-6 * trace.e_max;
    for p in 1..trace.periods.len().saturating_sub(1) {
        for (i, (cur, next)) in trace.periods[p].iter().zip(&trace.periods[p + 1]).enumerate() {
            if next.end_energy < cur.end_energy - steady_tol {
                failures.push(Failure {
                    node: trace.node_ids[i],
                    time: 0.0,
                    energy: next.end_energy,
                    reason: format!(
                        "period-end energy fell from {:.6} to {:.6} between periods {} and {}",
                        cur.end_energy,
                        next.end_energy,
                        p + 1,
                        p + 2
                    ),
                });
            }
        }
    }
    Verdict { pass: failures.is_empty(), failures }
}

/// CSV export of the decimated samples: `time,node_id,energy`.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::from("time,node_id,energy\n");
    for (t, energies) in &trace.samples {
        for (i, e) in energies.iter().enumerate() {
            out.push_str(&format!("{t},{},{e}\n", trace.node_ids[i]));
        }
    }
    out
}
