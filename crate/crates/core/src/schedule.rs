//! Charging schedules: the per-cluster stop-duration program, the head-layer
//! charging/flow-routing program (also used for the single-layer baseline),
//! and their closed-form periodic composition.
//!
//! Both programs maximize the vacation fraction of a cycle. The fractional
//! objective is linearized by dividing every duration by the cycle time:
//! stop durations become fractions ŵ, the vacation fraction is the objective
//! η, and θ = 1/τ enters through the travel-time term. Flow-time products
//! are carried as per-epoch bit volumes, which keeps everything linear.

use serde::{Deserialize, Serialize};

use crate::energy::{charge_rate, link_cost, node_consumption, FlowPattern};
use crate::error::ScheduleError;
use crate::hexgrid::CellPlan;
use crate::lp::{solve, LpProblem, LpSolution, Relation, SolverPath};
use crate::scenario::{distance, NodeId, Point, Scenario};
use crate::tour::{exact_tour, heuristic_tour, Tour, EXACT_LIMIT};

/// Maximal interval with a constant vehicle position class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub kind: EpochKind,
    /// Representative point: the stop, the station, or a segment midpoint.
    pub position: Point,
    /// Travel time of the segment; move epochs only.
    pub fixed_duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochKind {
    /// Stop at `stops[index]`.
    Stop(usize),
    /// Rest at the service station.
    Vacation,
    /// Travel along one tour segment.
    Move { segment: usize },
}

/// Split a tour into epochs in timeline order: each waypoint's stop epoch
/// (when the waypoint is a designated stop) followed by the move epochs of
/// the outgoing edge, with the vacation epoch at the station last. Each edge
/// is cut into ceil(len / seg_max) equal segments with midpoint positions.
pub fn build_epochs(
    tour: &Tour,
    stops: &[Point],
    station: Point,
    seg_max: f64,
    speed: f64,
) -> Vec<Epoch> {
    assert!(seg_max > 0.0, "seg_max must be positive");
    assert!(speed > 0.0, "speed must be positive");
    let wps = &tour.waypoints;
    let n = wps.len();
    let mut epochs = Vec::new();
    let mut segment = 0usize;
    let mut emitted = vec![false; stops.len()];
    for k in 0..n {
        if let Some(s) = (0..stops.len()).find(|&s| !emitted[s] && stops[s] == wps[k]) {
            emitted[s] = true;
            epochs.push(Epoch {
                kind: EpochKind::Stop(s),
                position: stops[s],
                fixed_duration: None,
            });
        }
        if n < 2 {
            break;
        }
        let a = wps[k];
        let b = wps[(k + 1) % n];
        let len = distance(a, b);
        if len <= 0.0 {
            continue;
        }
        let pieces = (len / seg_max).ceil() as usize;
        for p in 0..pieces {
            let t = (p as f64 + 0.5) / pieces as f64;
            epochs.push(Epoch {
                kind: EpochKind::Move { segment },
                position: Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t),
                fixed_duration: Some(len / pieces as f64 / speed),
            });
            segment += 1;
        }
    }
    epochs.push(Epoch {
        kind: EpochKind::Vacation,
        position: station,
        fixed_duration: None,
    });
    debug_assert!(emitted.iter().all(|&e| e), "every stop must lie on the tour");
    debug_assert!({
        let moved: f64 = epochs
            .iter()
            .filter_map(|e| e.fixed_duration)
            .sum::<f64>()
            * speed;
        (moved - tour.length).abs() <= 1e-9
    });
    epochs
}

/// One cluster's charging schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    /// Head id; doubles as the cluster identifier.
    pub cluster_id: NodeId,
    /// Cycle through the head and the occupied cell centers.
    pub tour: Tour,
    /// Charging stops (occupied cell centers), aligned with `stop_durations`.
    pub stops: Vec<Point>,
    /// Stop durations per cell center (time units).
    pub stop_durations: Vec<f64>,
    /// Travel time per cycle (tour length / vehicle speed).
    pub travel_time: f64,
    /// Cycle time τ.
    pub cycle_time: f64,
    /// Vacation time per cycle.
    pub vacation: f64,
    /// Σ stop durations / τ.
    pub charge_fraction: f64,
    /// Longest admissible cycle; equals τ at the optimum.
    pub max_cycle: f64,
    /// Objective η = vacation / τ.
    pub objective: f64,
    /// Aggregate logical rate, each node charged from its own cell center.
    pub gamma_star: f64,
    pub lp_iterations: usize,
    pub lp_residual: f64,
}

/// Solve the per-cluster program: maximize the vacation fraction subject to
/// per-node charge balance and battery-dip limits.
pub fn solve_cluster_plan(
    scenario: &Scenario,
    cluster: &crate::clustering::Cluster,
    cell_plan: &CellPlan,
    seed: u64,
) -> Result<ClusterPlan, ScheduleError> {
    let params = &scenario.params;
    let head = scenario
        .node(cluster.head_id)
        .ok_or_else(|| ScheduleError::Infeasible(format!("head {} missing", cluster.head_id)))?;
    let centers = cell_plan.centers();
    let members: Vec<_> = cluster
        .member_ids
        .iter()
        .map(|&id| scenario.node(id).expect("member in scenario"))
        .collect();
    let consumption: Vec<f64> = members
        .iter()
        .map(|n| node_consumption(n.rate, distance(n.pos, head.pos), params))
        .collect();
    if members.is_empty() || consumption.iter().all(|&c| c <= 0.0) {
        return Err(ScheduleError::ZeroConsumption);
    }
    // Charging reach per member: centers that actually deliver power.
    let reach: Vec<Vec<(usize, f64)>> = members
        .iter()
        .map(|n| {
            centers
                .iter()
                .enumerate()
                .map(|(q, &c)| (q, charge_rate(distance(n.pos, c), params)))
                .filter(|&(_, u)| u > 0.0)
                .collect()
        })
        .collect();
    for (t, r) in reach.iter().enumerate() {
        if r.is_empty() && consumption[t] > 0.0 {
            return Err(ScheduleError::UnchargeableNode(members[t].id));
        }
    }
    let tour = cycle_through(head.pos, &centers, seed)?;
    let nq = centers.len();
    let (eta_col, theta_col) = (nq, nq + 1);
    let mut lp = LpProblem::new(nq + 2);
    lp.set_objective(eta_col, 1.0);
    let mut time_row: Vec<(usize, f64)> = (0..nq).map(|q| (q, 1.0)).collect();
    time_row.push((eta_col, 1.0));
    time_row.push((theta_col, tour.length / params.speed));
    lp.add_constraint(time_row, Relation::Eq, 1.0);
    let dip_budget = params.e_max - params.e_min;
    for (t, node) in members.iter().enumerate() {
        let c = consumption[t];
        if c <= 0.0 {
            continue;
        }
        let balance: Vec<(usize, f64)> = reach[t].iter().map(|&(q, u)| (q, u)).collect();
        lp.add_constraint(balance, Relation::Ge, c);
        let mut dip: Vec<(usize, f64)> = reach[t].iter().map(|&(q, _)| (q, -c)).collect();
        dip.push((theta_col, -dip_budget));
        lp.add_constraint(dip, Relation::Le, -c);
        let _ = node;
    }
    maybe_dump_lp(&lp, &format!("cluster-{}", cluster.head_id));
    let solution = solve(&lp).into_optimal(&cluster_infeasibility_hint(
        cluster.head_id,
        &members.iter().map(|n| n.id).collect::<Vec<_>>(),
        &consumption,
        &reach,
    ))?;
    // Clamp solver dust so zero-duration stops are exactly zero.
    let w: Vec<f64> = solution.values[..nq].iter().map(|&v| if v < 1e-12 { 0.0 } else { v }).collect();
    let eta = solution.values[eta_col];
    let mut theta = solution.values[theta_col];
    if tour.length / params.speed <= 1e-15 {
        // Travel-free cycle: θ is not pinned by the time identity, so take
        // the longest admissible cycle from the dip rows directly.
        theta = members
            .iter()
            .enumerate()
            .map(|(t, _)| {
                let charged: f64 = reach[t].iter().map(|&(q, _)| w[q]).sum();
                consumption[t] * (1.0 - charged) / dip_budget
            })
            .fold(0.0, f64::max);
        if theta <= 0.0 {
            return Err(ScheduleError::ZeroConsumption);
        }
    }
    let tau = 1.0 / theta;
    let residual = crate::lp::verify(&lp, &solution).max_violation;
    let plan = ClusterPlan {
        cluster_id: cluster.head_id,
        stops: centers,
        stop_durations: w.iter().map(|&v| v * tau).collect::<Vec<_>>(),
        travel_time: tour.length / params.speed,
        cycle_time: tau,
        vacation: eta * tau,
        charge_fraction: w.iter().sum(),
        max_cycle: tau,
        objective: eta,
        gamma_star: crate::energy::cluster_logical_rate(scenario, cluster, cell_plan)?,
        lp_iterations: solution.iterations,
        lp_residual: residual,
        tour,
    };
    Ok(plan)
}

/// Write the program in the line-oriented dump format when TLFW_LP_DUMP
/// names a directory.
fn maybe_dump_lp(lp: &LpProblem, name: &str) {
    if let Ok(dir) = std::env::var("TLFW_LP_DUMP") {
        let path = std::path::Path::new(&dir).join(format!("{name}.lp"));
        if let Err(e) = std::fs::write(&path, lp.dump()) {
            log::warn!("could not dump lp to {}: {e}", path.display());
        }
    }
}

fn cluster_infeasibility_hint(
    head: NodeId,
    member_ids: &[NodeId],
    consumption: &[f64],
    reach: &[Vec<(usize, f64)>],
) -> String {
    let mut demand: Vec<(f64, NodeId)> = member_ids
        .iter()
        .zip(consumption)
        .zip(reach)
        .map(|((&id, &c), r)| {
            let umax = r.iter().map(|&(_, u)| u).fold(0.0, f64::max);
            (if umax > 0.0 { c / umax } else { f64::INFINITY }, id)
        })
        .collect();
    demand.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let names: Vec<String> = demand.iter().take(3).map(|(g, id)| format!("node {id} (gamma {g:.3})")).collect();
    format!("cluster {head} charging program; most demanding: {}", names.join(", "))
}

fn cycle_through(anchor: Point, stops: &[Point], seed: u64) -> Result<Tour, ScheduleError> {
    let mut points = vec![anchor];
    for &s in stops {
        if !points.contains(&s) {
            points.push(s);
        }
    }
    let tour = if points.len() <= EXACT_LIMIT {
        exact_tour(&points)?
    } else {
        heuristic_tour(&points, seed)
    };
    Ok(tour)
}

/// How stops charge participants in the head-layer program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeModel {
    /// Full output only when the vehicle sits on the participant.
    Colocation,
    /// Efficiency-scaled output within the charging range.
    Ranged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    TlfwHeads,
    MsirsnBaseline,
}

/// A node served directly by the vehicle tour: a cluster head (layered mode)
/// or any sensor node (baseline mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: NodeId,
    pub pos: Point,
    /// Data rate the node must push out (own plus aggregated member data).
    pub ingress: f64,
    /// Sum of member rates received over single-hop links.
    pub member_rate_sum: f64,
    pub own_rate: f64,
}

/// The head-layer (or baseline) schedule with per-epoch flow routing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadLayerPlan {
    pub mode: PlanMode,
    pub charge_model: ChargeModel,
    pub participants: Vec<Participant>,
    pub stops: Vec<Point>,
    pub tour: Tour,
    pub epochs: Vec<Epoch>,
    /// Stop durations aligned with `stops`.
    pub stop_durations: Vec<f64>,
    /// Travel time per cycle (tour length / vehicle speed).
    pub travel_time: f64,
    pub vacation: f64,
    pub cycle_time: f64,
    /// Objective η = vacation / τ.
    pub objective: f64,
    /// Flow rates per epoch, aligned with `epochs`.
    pub flows: Vec<FlowPattern>,
    pub prune_k: usize,
    pub lp_iterations: usize,
    pub lp_residual: f64,
    pub lp_sparse: bool,
}

impl HeadLayerPlan {
    pub fn total_stop_time(&self) -> f64 {
        self.stop_durations.iter().sum()
    }

    /// Normalized duration of an epoch in the plan (fraction of the cycle).
    pub fn epoch_duration(&self, e: usize) -> f64 {
        match self.epochs[e].kind {
            EpochKind::Stop(s) => self.stop_durations[s],
            EpochKind::Vacation => self.vacation,
            EpochKind::Move { .. } => self.epochs[e].fixed_duration.unwrap(),
        }
    }
}

/// Solve the head-layer program: tour the stops, route every participant's
/// data to the mobile base station per epoch, keep every participant charge-
/// balanced and within its battery dip, maximize the vacation fraction.
#[allow(clippy::too_many_arguments)]
pub fn solve_head_plan(
    scenario: &Scenario,
    participants: &[Participant],
    stops: &[Point],
    charge_model: ChargeModel,
    mode: PlanMode,
    prune_k: usize,
    seg_max: f64,
    seed: u64,
) -> Result<HeadLayerPlan, ScheduleError> {
    let params = &scenario.params;
    let station = params.station;
    if participants.is_empty() {
        return Err(ScheduleError::ZeroConsumption);
    }
    let base_load: Vec<f64> = participants
        .iter()
        .map(|p| params.alpha * p.own_rate + params.rho * p.member_rate_sum)
        .collect();
    if participants.iter().all(|p| p.ingress <= 0.0) && base_load.iter().all(|&b| b <= 0.0) {
        return Err(ScheduleError::ZeroConsumption);
    }
    // Every participant needs at least one stop that can charge it.
    let charge_u = |p: &Participant, stop: Point| -> f64 {
        match charge_model {
            ChargeModel::Colocation => {
                if distance(p.pos, stop) <= 1e-9 {
                    params.u_max
                } else {
                    0.0
                }
            }
            ChargeModel::Ranged => charge_rate(distance(p.pos, stop), params),
        }
    };
    for p in participants {
        if !stops.iter().any(|&s| charge_u(p, s) > 0.0) {
            return Err(ScheduleError::UnchargeableNode(p.id));
        }
    }
    let tour = cycle_through(station, stops, seed)?;
    let epochs = build_epochs(&tour, stops, station, seg_max, params.speed);
    let np = participants.len();
    let ne = epochs.len();
    let ns = stops.len();
    // Flow targets per participant: the prune_k nearest peers (all peers when
    // prune_k is 0), plus the base station.
    let neighbors: Vec<Vec<usize>> = participants
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<usize> = (0..np).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                let da = distance(p.pos, participants[a].pos);
                let db = distance(p.pos, participants[b].pos);
                da.partial_cmp(&db).unwrap().then(participants[a].id.cmp(&participants[b].id))
            });
            if prune_k > 0 {
                others.truncate(prune_k);
            }
            others.sort_unstable();
            others
        })
        .collect();
    let incoming: Vec<Vec<usize>> = (0..np)
        .map(|i| (0..np).filter(|&k| neighbors[k].contains(&i)).collect())
        .collect();
    // Variable layout: stop fractions, eta, theta, then per-epoch blocks of
    // peer flow volumes. The base-station volume is not a variable: flow
    // balance pins it to incoming + generated - outgoing, so it is
    // substituted away and only its non-negativity remains as a row. That
    // keeps decoded flows conservative by construction.
    let (eta_col, theta_col) = (ns, ns + 1);
    let mut offsets = vec![0usize; np];
    let mut block = 0usize;
    for i in 0..np {
        offsets[i] = block;
        block += neighbors[i].len();
    }
    let flow_base = ns + 2;
    let n_vars = flow_base + ne * block;
    let col_flow_to = |e: usize, i: usize, j: usize| {
        let slot = neighbors[i].binary_search(&j).expect("flow target must be a neighbor");
        flow_base + e * block + offsets[i] + slot
    };
    let dur_term = |e: usize| -> (usize, f64) {
        match epochs[e].kind {
            EpochKind::Stop(s) => (s, 1.0),
            EpochKind::Vacation => (eta_col, 1.0),
            EpochKind::Move { .. } => (theta_col, epochs[e].fixed_duration.unwrap()),
        }
    };
    let mut lp = LpProblem::new(n_vars);
    lp.set_objective(eta_col, 1.0);
    let mut time_row: Vec<(usize, f64)> = (0..ns).map(|s| (s, 1.0)).collect();
    time_row.push((eta_col, 1.0));
    time_row.push((theta_col, tour.length / params.speed));
    lp.add_constraint(time_row, Relation::Eq, 1.0);
    // Base-station volume non-negativity per epoch and participant
    // (outgoing peer volume cannot exceed incoming plus generated).
    for e in 0..ne {
        let (dcol, dcoef) = dur_term(e);
        for i in 0..np {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(incoming[i].len() + neighbors[i].len() + 1);
            for &j in &neighbors[i] {
                row.push((col_flow_to(e, i, j), 1.0));
            }
            for &k in &incoming[i] {
                row.push((col_flow_to(e, k, i), -1.0));
            }
            row.push((dcol, -participants[i].ingress * dcoef));
            lp.add_constraint(row, Relation::Le, 0.0);
        }
    }
    // Per-cycle charge balance and battery dip per participant.
    let dip_budget = params.e_max - params.e_min;
    for i in 0..np {
        let mut charge_row: Vec<(usize, f64)> = Vec::new();
        let mut dip_row: Vec<(usize, f64)> = Vec::new();
        for e in 0..ne {
            let (dcol, dcoef) = dur_term(e);
            let u = match epochs[e].kind {
                EpochKind::Stop(_) => charge_u(&participants[i], epochs[e].position),
                _ => 0.0,
            };
            // Consumption with the base-station volume substituted:
            // incoming peers cost reception plus forwarding to the base,
            // peer transmissions cost their link less the avoided base link.
            let c_ib = link_cost(distance(participants[i].pos, epochs[e].position), params);
            let mut cons: Vec<(usize, f64)> = Vec::new();
            cons.push((dcol, (base_load[i] + c_ib * participants[i].ingress) * dcoef));
            for &k in &incoming[i] {
                cons.push((col_flow_to(e, k, i), params.rho + c_ib));
            }
            for &j in &neighbors[i] {
                let c_ij = link_cost(distance(participants[i].pos, participants[j].pos), params);
                cons.push((col_flow_to(e, i, j), c_ij - c_ib));
            }
            charge_row.extend(cons.iter().copied());
            if u > 0.0 {
                charge_row.push((dcol, -u * dcoef));
            } else {
                dip_row.extend(cons);
            }
        }
        dip_row.push((theta_col, -dip_budget));
        lp.add_constraint(charge_row, Relation::Le, 0.0);
        lp.add_constraint(dip_row, Relation::Le, 0.0);
    }
    maybe_dump_lp(
        &lp,
        match mode {
            PlanMode::TlfwHeads => "head-layer",
            PlanMode::MsirsnBaseline => "baseline",
        },
    );
    let solution = solve(&lp).into_optimal(&format!(
        "head-layer program with {np} participants and {ns} stops"
    ))?;
    let residual = crate::lp::verify(&lp, &solution).max_violation;
    decode_head_plan(
        scenario, participants, stops, charge_model, mode, prune_k, tour, epochs, &neighbors,
        &incoming, &base_load, solution, residual, col_flow_to, eta_col, theta_col,
    )
}

#[allow(clippy::too_many_arguments)]
fn decode_head_plan(
    scenario: &Scenario,
    participants: &[Participant],
    stops: &[Point],
    charge_model: ChargeModel,
    mode: PlanMode,
    prune_k: usize,
    tour: Tour,
    epochs: Vec<Epoch>,
    neighbors: &[Vec<usize>],
    incoming: &[Vec<usize>],
    base_load: &[f64],
    solution: LpSolution,
    residual: f64,
    col_flow_to: impl Fn(usize, usize, usize) -> usize,
    eta_col: usize,
    theta_col: usize,
) -> Result<HeadLayerPlan, ScheduleError> {
    let params = &scenario.params;
    let np = participants.len();
    let ne = epochs.len();
    let ns = stops.len();
    let x = &solution.values;
    let eta = x[eta_col];
    let mut theta = x[theta_col];
    let norm_dur = |e: usize, theta: f64| -> f64 {
        match epochs[e].kind {
            EpochKind::Stop(s) => x[s],
            EpochKind::Vacation => eta,
            EpochKind::Move { .. } => epochs[e].fixed_duration.unwrap() * theta,
        }
    };
    if tour.length / params.speed <= 1e-15 {
        // No travel: θ is free in the LP, so pin the cycle at the longest
        // admissible value from the dip rows.
        let dip_budget = params.e_max - params.e_min;
        let mut max_rate = 0.0f64;
        for i in 0..np {
            let mut dip = 0.0;
            for e in 0..ne {
                let u = match epochs[e].kind {
                    EpochKind::Stop(_) => match charge_model {
                        ChargeModel::Colocation => {
                            if distance(participants[i].pos, epochs[e].position) <= 1e-9 {
                                params.u_max
                            } else {
                                0.0
                            }
                        }
                        ChargeModel::Ranged => charge_rate(distance(participants[i].pos, epochs[e].position), params),
                    },
                    _ => 0.0,
                };
                if u > 0.0 {
                    continue;
                }
                let c_ib = link_cost(distance(participants[i].pos, epochs[e].position), params);
                let mut cons = (base_load[i] + c_ib * participants[i].ingress) * norm_dur(e, theta);
                for &k in &incoming[i] {
                    cons += (params.rho + c_ib) * x[col_flow_to(e, k, i)];
                }
                for &j in &neighbors[i] {
                    let c_ij = link_cost(distance(participants[i].pos, participants[j].pos), params);
                    cons += (c_ij - c_ib) * x[col_flow_to(e, i, j)];
                }
                dip += cons;
            }
            max_rate = max_rate.max(dip / dip_budget);
        }
        if max_rate <= 0.0 {
            return Err(ScheduleError::ZeroConsumption);
        }
        theta = max_rate;
    }
    let tau = 1.0 / theta;
    let mut flows = Vec::with_capacity(ne);
    for e in 0..ne {
        let d = norm_dur(e, theta);
        let mut pattern = FlowPattern::default();
        if d > 1e-15 {
            let rate: Vec<Vec<f64>> = (0..np)
                .map(|i| neighbors[i].iter().map(|&j| (x[col_flow_to(e, i, j)] / d).max(0.0)).collect())
                .collect();
            for i in 0..np {
                for (slot, &j) in neighbors[i].iter().enumerate() {
                    if rate[i][slot] > 1e-12 {
                        pattern.head_flows.push((participants[i].id, participants[j].id, rate[i][slot]));
                    }
                }
                // Conservation pins the base-station rate exactly.
                let inflow: f64 = incoming[i]
                    .iter()
                    .map(|&k| {
                        let slot = neighbors[k].binary_search(&i).unwrap();
                        rate[k][slot]
                    })
                    .sum();
                let outflow: f64 = rate[i].iter().sum();
                let fb = inflow + participants[i].ingress - outflow;
                if fb > 1e-12 {
                    pattern.base_flows.push((participants[i].id, fb));
                }
            }
        }
        flows.push(pattern);
    }
    let travel_time = tour.length / params.speed;
    Ok(HeadLayerPlan {
        mode,
        charge_model,
        participants: participants.to_vec(),
        stops: stops.to_vec(),
        tour,
        epochs,
        stop_durations: (0..ns)
            .map(|s| if x[s] < 1e-12 { 0.0 } else { x[s] * tau })
            .collect(),
        travel_time,
        vacation: eta * tau,
        cycle_time: tau,
        objective: eta,
        flows,
        prune_k,
        lp_iterations: solution.iterations,
        lp_residual: residual,
        lp_sparse: solution.path == SolverPath::SparseRevised,
    })
}

/// Participants for the layered mode: one per cluster head.
pub fn head_participants(scenario: &Scenario, clustering: &crate::clustering::Clustering) -> Vec<Participant> {
    clustering
        .clusters
        .iter()
        .map(|c| {
            let head = scenario.node(c.head_id).expect("head in scenario");
            let member_rate_sum: f64 = c.member_ids.iter().map(|&t| scenario.node(t).unwrap().rate).sum();
            Participant {
                id: c.head_id,
                pos: head.pos,
                ingress: member_rate_sum + head.rate,
                member_rate_sum,
                own_rate: head.rate,
            }
        })
        .collect()
}

/// Participants for the baseline: every node routes only its own data.
pub fn baseline_participants(scenario: &Scenario) -> Vec<Participant> {
    scenario
        .nodes
        .iter()
        .map(|n| Participant {
            id: n.id,
            pos: n.pos,
            ingress: n.rate,
            member_rate_sum: 0.0,
            own_rate: n.rate,
        })
        .collect()
}

/// Per-period time budget split of a joint plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBreakdown {
    pub head_charge_time: f64,
    pub head_travel_time: f64,
    pub normal_charge_time: f64,
    pub normal_travel_time: f64,
}

/// The composed periodic schedule: h head-layer cycles per period, one
/// cluster detour in each of the first m sub-periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPlan {
    /// Period length T.
    pub period: f64,
    /// Sub-periods per period, h = T / τ (fractional allowed).
    pub sub_periods: f64,
    /// Cluster visited in sub-period j (j = 1..m), by head id.
    pub sub_period_assignment: Vec<NodeId>,
    /// Per cluster: stop durations scaled to one visit per period.
    pub scaled_stop_durations: Vec<(NodeId, Vec<f64>)>,
    /// Vacation time per period.
    pub vacation_total: f64,
    /// Objective T_vac / T.
    pub objective: f64,
    pub breakdown: JointBreakdown,
}

/// Compose cluster plans and the head plan into one period.
pub fn solve_joint(
    cluster_plans: &[ClusterPlan],
    head_plan: &HeadLayerPlan,
    m: usize,
) -> Result<JointPlan, ScheduleError> {
    if cluster_plans.len() != m || m == 0 {
        return Err(ScheduleError::JointInfeasible(format!(
            "expected {m} cluster plans, got {}",
            cluster_plans.len()
        )));
    }
    let tau = head_plan.cycle_time;
    let tau_vac = head_plan.vacation;
    // Period cap from the clusters' own cycles.
    let t_max = cluster_plans.iter().map(|p| p.max_cycle).fold(f64::INFINITY, f64::min);
    // Period cap from fitting each detour inside one head-layer vacation.
    let mut t_cap = t_max;
    for p in cluster_plans {
        if tau_vac <= p.travel_time {
            return Err(ScheduleError::JointInfeasible(format!(
                "cluster {} detour travel {:.3} exceeds head-layer vacation {:.3}",
                p.cluster_id, p.travel_time, tau_vac
            )));
        }
        if p.charge_fraction > 0.0 {
            t_cap = t_cap.min((tau_vac - p.travel_time) / p.charge_fraction);
        }
    }
    let period = t_cap;
    let h = period / tau;
    if h < m as f64 {
        return Err(ScheduleError::JointInfeasible(format!(
            "h = {h:.3} sub-periods fit in the period but {m} clusters need one each"
        )));
    }
    let mut assignment: Vec<NodeId> = cluster_plans.iter().map(|p| p.cluster_id).collect();
    assignment.sort_unstable();
    let scaled: Vec<(NodeId, Vec<f64>)> = cluster_plans
        .iter()
        .map(|p| {
            let f = period / p.cycle_time;
            (p.cluster_id, p.stop_durations.iter().map(|&w| w * f).collect())
        })
        .collect();
    let normal_charge_time: f64 = cluster_plans.iter().map(|p| p.charge_fraction * period).sum();
    let normal_travel_time: f64 = cluster_plans.iter().map(|p| p.travel_time).sum();
    let head_charge_time = h * head_plan.total_stop_time();
    let head_travel_time = h * head_plan.travel_time;
    let vacation_total = h * tau_vac - (normal_charge_time + normal_travel_time);
    let objective = vacation_total / period;
    Ok(JointPlan {
        period,
        sub_periods: h,
        sub_period_assignment: assignment,
        scaled_stop_durations: scaled,
        vacation_total,
        objective,
        breakdown: JointBreakdown {
            head_charge_time,
            head_travel_time,
            normal_charge_time,
            normal_travel_time,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Cluster;
    use crate::hexgrid::{cell_center, occupied_cells, HexCell};
    use crate::scenario::{NetworkParams, Scenario, SensorNode};

    fn scenario_with(nodes: Vec<SensorNode>) -> Scenario {
        let s = Scenario { area: (1.0, 1.0), nodes, params: NetworkParams::defaults() };
        s.validate().unwrap();
        s
    }

    /// Head 0.2 from a member that sits exactly on a cell center.
    fn single_member_cluster() -> (Scenario, Cluster) {
        let center = cell_center(HexCell { q: 2, r: 2 }, 0.1);
        let head_pos = Point::new(center.x, center.y + 0.2);
        let s = scenario_with(vec![
            SensorNode { id: 1, pos: head_pos, rate: 0.1 },
            SensorNode { id: 2, pos: center, rate: 1.0 },
        ]);
        let cluster = Cluster { head_id: 1, member_ids: vec![2] };
        (s, cluster)
    }

    #[test]
    fn build_epochs_ceiling_arithmetic() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(0.4, 0.0);
        let tour = Tour { waypoints: vec![a, b], length: 0.8 };
        let eps = build_epochs(&tour, &[b], a, 0.25, 0.1);
        let moves = eps.iter().filter(|e| matches!(e.kind, EpochKind::Move { .. })).count();
        assert_eq!(moves, 4); // two edges of 0.4, ceil(0.4/0.25) = 2 each
        let coarse = build_epochs(&tour, &[b], a, 0.5, 0.1);
        let moves_coarse = coarse.iter().filter(|e| matches!(e.kind, EpochKind::Move { .. })).count();
        assert_eq!(moves_coarse, 2);
        let total: f64 = eps.iter().filter_map(|e| e.fixed_duration).sum();
        assert!((total - tour.length / 0.1).abs() < 1e-9);
        assert_eq!(eps.iter().filter(|e| matches!(e.kind, EpochKind::Stop(_))).count(), 1);
        assert_eq!(eps.iter().filter(|e| matches!(e.kind, EpochKind::Vacation)).count(), 1);
    }

    #[test]
    fn cluster_plan_matches_hand_solution() {
        let (s, cluster) = single_member_cluster();
        let cells = occupied_cells(&s, &cluster, s.params.d_delta);
        assert_eq!(cells.cells.len(), 1);
        let plan = solve_cluster_plan(&s, &cluster, &cells, 42).unwrap();
        // Balance binds: w = c / Umax; dip binds: theta = c (1 - w) / 9500.
        let c = 1.0016;
        let w = c / 50.0;
        let theta = c * (1.0 - w) / 9500.0;
        let tau = 1.0 / theta;
        assert!((plan.charge_fraction - w).abs() < 1e-9, "rate {}", plan.charge_fraction);
        assert!((plan.cycle_time - tau).abs() / tau < 1e-6, "tau {}", plan.cycle_time);
        assert!((plan.cycle_time - 9678.7).abs() < 1.0);
        let eta = 1.0 - w - (0.4 / 0.1) * theta;
        assert!((plan.objective - eta).abs() < 1e-9);
        assert!((plan.objective - 0.97955).abs() < 1e-4);
        // Cycle identity.
        let lhs = plan.travel_time + plan.stop_durations.iter().sum::<f64>() + plan.vacation;
        assert!((lhs - plan.cycle_time).abs() / plan.cycle_time < 1e-6);
        // Reporting-only aggregate equals the LP fraction here: single node at
        // its own center.
        assert!((plan.gamma_star - plan.charge_fraction).abs() < 1e-9);
    }

    #[test]
    fn zero_rate_cluster_is_degenerate() {
        let center = cell_center(HexCell { q: 1, r: 1 }, 0.1);
        let s = scenario_with(vec![
            SensorNode { id: 1, pos: Point::new(0.5, 0.5), rate: 0.0 },
            SensorNode { id: 2, pos: center, rate: 0.0 },
        ]);
        let cluster = Cluster { head_id: 1, member_ids: vec![2] };
        let cells = occupied_cells(&s, &cluster, 0.1);
        assert!(matches!(
            solve_cluster_plan(&s, &cluster, &cells, 1),
            Err(ScheduleError::ZeroConsumption)
        ));
    }

    #[test]
    fn raising_battery_capacity_lengthens_the_cycle() {
        let (mut s, cluster) = single_member_cluster();
        let cells = occupied_cells(&s, &cluster, s.params.d_delta);
        let base = solve_cluster_plan(&s, &cluster, &cells, 42).unwrap();
        s.params.e_max = 20_000.0;
        let bigger = solve_cluster_plan(&s, &cluster, &cells, 42).unwrap();
        assert!(bigger.cycle_time > base.cycle_time * 1.5);
    }

    #[test]
    fn dip_constraint_binds_at_cluster_optimum() {
        let (s, cluster) = single_member_cluster();
        let cells = occupied_cells(&s, &cluster, s.params.d_delta);
        let plan = solve_cluster_plan(&s, &cluster, &cells, 42).unwrap();
        // Reconstruct the member's dip at the returned plan.
        let member = s.node(2).unwrap();
        let c = node_consumption(member.rate, 0.2, &s.params);
        let charged_time: f64 = plan.stop_durations.iter().sum();
        let dip = c * (plan.cycle_time - charged_time);
        assert!((dip - (s.params.e_max - s.params.e_min)).abs() < 1e-3, "dip {dip}");
    }

    #[test]
    fn head_plan_single_colocated_head() {
        let s = scenario_with(vec![SensorNode { id: 1, pos: Point::new(0.5, 0.5), rate: 1.0 }]);
        let participants = vec![Participant { id: 1, pos: Point::new(0.5, 0.5), ingress: 1.0, member_rate_sum: 0.0, own_rate: 1.0 }];
        let plan = solve_head_plan(
            &s, &participants, &[Point::new(0.5, 0.5)], ChargeModel::Colocation, PlanMode::TlfwHeads, 0, 0.25, 42,
        )
        .unwrap();
        assert!((plan.objective - 0.98).abs() < 1e-9, "eta {}", plan.objective);
        let w_frac = plan.stop_durations[0] / plan.cycle_time;
        assert!((w_frac - 0.02).abs() < 1e-9);
        assert!(plan.cycle_time <= 9693.9);
        assert!((plan.cycle_time - 9693.877).abs() < 1e-2);
    }

    #[test]
    fn head_plan_flow_conservation_per_epoch() {
        let s = crate::scenario::load_builtin_table1();
        let clustering = crate::clustering::cluster(&s, 4, 42, 16, 100, Default::default()).unwrap();
        let participants = head_participants(&s, &clustering);
        let stops: Vec<Point> = participants.iter().map(|p| p.pos).collect();
        let plan = solve_head_plan(
            &s, &participants, &stops, ChargeModel::Colocation, PlanMode::TlfwHeads, 0, 0.25, 42,
        )
        .unwrap();
        for (e, pattern) in plan.flows.iter().enumerate() {
            let d = plan.epoch_duration(e);
            if d <= 1e-12 {
                continue;
            }
            for p in &plan.participants {
                let inflow: f64 = pattern.incoming(p.id);
                let out: f64 = pattern
                    .head_flows
                    .iter()
                    .filter(|&&(f, _, _)| f == p.id)
                    .map(|&(_, _, v)| v)
                    .sum::<f64>()
                    + pattern.flow_to_base(p.id);
                let scale = (inflow + p.ingress).abs().max(1.0);
                assert!(
                    ((inflow + p.ingress) - out).abs() / scale < 1e-9,
                    "epoch {e} node {}: in {} out {}",
                    p.id,
                    inflow + p.ingress,
                    out
                );
            }
        }
        // Cycle identity (time constraint scaled by tau).
        let lhs = plan.travel_time + plan.total_stop_time() + plan.vacation;
        assert!((lhs - plan.cycle_time).abs() / plan.cycle_time < 1e-6);
    }

    #[test]
    fn baseline_pruning_exact_when_k_covers_all_peers() {
        let s = scenario_with(vec![
            SensorNode { id: 1, pos: Point::new(0.30, 0.30), rate: 0.4 },
            SensorNode { id: 2, pos: Point::new(0.62, 0.34), rate: 0.7 },
            SensorNode { id: 3, pos: Point::new(0.51, 0.66), rate: 0.2 },
            SensorNode { id: 4, pos: Point::new(0.36, 0.58), rate: 0.9 },
            SensorNode { id: 5, pos: Point::new(0.68, 0.58), rate: 0.5 },
        ]);
        let participants = baseline_participants(&s);
        let cells: std::collections::BTreeSet<HexCell> =
            s.nodes.iter().map(|n| crate::hexgrid::cell_index(n.pos, 0.1)).collect();
        let stops: Vec<Point> = cells.iter().map(|&c| cell_center(c, 0.1)).collect();
        let full = solve_head_plan(
            &s, &participants, &stops, ChargeModel::Ranged, PlanMode::MsirsnBaseline, 0, 0.25, 42,
        )
        .unwrap();
        let pruned = solve_head_plan(
            &s, &participants, &stops, ChargeModel::Ranged, PlanMode::MsirsnBaseline, 4, 0.25, 42,
        )
        .unwrap();
        assert!((full.objective - pruned.objective).abs() < 1e-9);
    }

    #[test]
    fn joint_reproduces_reference_arithmetic() {
        // Feed the composition the published per-layer solution values.
        let head = HeadLayerPlan {
            mode: PlanMode::TlfwHeads,
            charge_model: ChargeModel::Colocation,
            participants: vec![],
            stops: vec![],
            tour: Tour { waypoints: vec![], length: 2.5425 },
            epochs: vec![],
            stop_durations: vec![52.3],
            travel_time: 25.425,
            vacation: 209.1,
            cycle_time: 286.8,
            objective: 209.1 / 286.8,
            flows: vec![],
            prune_k: 0,
            lp_iterations: 0,
            lp_residual: 0.0,
            lp_sparse: false,
        };
        let refs = [
            (1u32, 10717.0, 30.0, 1.3196),
            (2, 8771.3, 56.0, 1.239),
            (3, 8520.0, 89.0, 1.5124),
            (4, 6134.0, 171.0, 1.732),
        ];
        let cluster_plans: Vec<ClusterPlan> = refs
            .iter()
            .map(|&(id, tau, charge, dist)| ClusterPlan {
                cluster_id: id,
                tour: Tour { waypoints: vec![], length: dist },
                stops: vec![Point::new(0.0, 0.0)],
                stop_durations: vec![charge],
                travel_time: dist / 0.1,
                cycle_time: tau,
                vacation: tau - charge - dist / 0.1,
                charge_fraction: charge / tau,
                max_cycle: tau,
                objective: (tau - charge - dist / 0.1) / tau,
                gamma_star: charge / tau,
                lp_iterations: 0,
                lp_residual: 0.0,
            })
            .collect();
        let joint = solve_joint(&cluster_plans, &head, 4).unwrap();
        assert!((joint.period - 6134.0).abs() < 1e-9, "T {}", joint.period);
        assert!((joint.sub_periods - 21.388).abs() < 1e-3, "h {}", joint.sub_periods);
        let scaled: Vec<f64> = joint.scaled_stop_durations.iter().map(|(_, w)| w.iter().sum()).collect();
        let expect = [17.2, 39.2, 64.1, 171.0];
        for (got, want) in scaled.iter().zip(expect) {
            assert!((got - want).abs() <= 0.2, "scaled {got} vs {want}");
        }
        assert!((joint.breakdown.normal_charge_time - 291.0).abs() < 1.0);
        assert!((joint.breakdown.head_charge_time - 1118.6).abs() < 0.5);
        assert!((joint.breakdown.head_travel_time - 543.7).abs() < 0.5);
        assert!((joint.breakdown.normal_travel_time - 58.03).abs() < 0.01);
        // Vacation formula holds exactly.
        let recomputed = joint.sub_periods * head.vacation
            - (joint.breakdown.normal_charge_time + joint.breakdown.normal_travel_time);
        assert!((joint.vacation_total - recomputed).abs() / recomputed.abs() < 1e-9);
        assert!((joint.objective - 0.672).abs() < 5e-4, "eta_total {}", joint.objective);
        assert_eq!(joint.sub_period_assignment, vec![1, 2, 3, 4]);
    }

    #[test]
    fn joint_rejects_oversized_detours() {
        let head = HeadLayerPlan {
            mode: PlanMode::TlfwHeads,
            charge_model: ChargeModel::Colocation,
            participants: vec![],
            stops: vec![],
            tour: Tour { waypoints: vec![], length: 2.0 },
            epochs: vec![],
            stop_durations: vec![10.0],
            travel_time: 20.0,
            vacation: 50.0,
            cycle_time: 80.0,
            objective: 50.0 / 80.0,
            flows: vec![],
            prune_k: 0,
            lp_iterations: 0,
            lp_residual: 0.0,
            lp_sparse: false,
        };
        let plan = ClusterPlan {
            cluster_id: 1,
            tour: Tour { waypoints: vec![], length: 6.0 },
            stops: vec![Point::new(0.0, 0.0)],
            stop_durations: vec![5.0],
            travel_time: 60.0, // exceeds the 50-unit vacation
            cycle_time: 1000.0,
            vacation: 935.0,
            charge_fraction: 0.005,
            max_cycle: 1000.0,
            objective: 0.935,
            gamma_star: 0.005,
            lp_iterations: 0,
            lp_residual: 0.0,
        };
        assert!(matches!(
            solve_joint(&[plan], &head, 1),
            Err(ScheduleError::JointInfeasible(_))
        ));
    }

    #[test]
    fn singleton_cells_make_lp_rate_equal_gamma_star() {
        // Three members, each alone in its cell and exactly at the center.
        let centers = [
            cell_center(HexCell { q: 2, r: 2 }, 0.1),
            cell_center(HexCell { q: 3, r: 2 }, 0.1),
            cell_center(HexCell { q: 2, r: 3 }, 0.1),
        ];
        let head_pos = Point::new(centers[0].x - 0.15, centers[0].y);
        let mut nodes = vec![SensorNode { id: 1, pos: head_pos, rate: 0.2 }];
        for (k, &c) in centers.iter().enumerate() {
            nodes.push(SensorNode { id: 2 + k as NodeId, pos: c, rate: 0.3 + 0.2 * k as f64 });
        }
        let s = scenario_with(nodes);
        let cluster = Cluster { head_id: 1, member_ids: vec![2, 3, 4] };
        let cells = occupied_cells(&s, &cluster, 0.1);
        let plan = solve_cluster_plan(&s, &cluster, &cells, 7).unwrap();
        assert!((plan.charge_fraction - plan.gamma_star).abs() < 1e-9);
    }
}
