//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per clause at its stated tolerance. Clauses that depend on published
//! values the model provably cannot reproduce are asserted as stated and
//! fail with the measured value and the blocking analysis printed alongside.

use std::sync::OnceLock;
use std::time::Instant;

use tlfw::clustering::{assignment_step, comm_cost, head_update_step, Clustering, Variant};
use tlfw::hexgrid::{cell_center, cell_index, occupied_cells};
use tlfw::pipeline::{run_msirsn, run_tlfw, BaselineOutcome, Mode, PipelineConfig, TlfwOutcome};
use tlfw::scenario::{distance, load_builtin_table1, NetworkParams, Point, Scenario, SensorNode};
use tlfw::schedule::{
    solve_joint, ChargeModel, ClusterPlan, EpochKind, HeadLayerPlan, PlanMode,
};
use tlfw::sim::{check_renewable, simulate, simulate_baseline};
use tlfw::tour::{exact_tour, heuristic_tour, two_opt_stable, Tour};

struct Gate {
    lines: Vec<(bool, String)>,
}

impl Gate {
    fn new() -> Self {
        Gate { lines: Vec::new() }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        let line = format!(
            "{} {label}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        self.lines.push((pass, line));
    }

    fn finish(self, criterion: &str) {
        let failed: Vec<&String> = self.lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
        println!(
            "{} {criterion} ({} clauses)",
            if failed.is_empty() { "PASS" } else { "FAIL" },
            self.lines.len()
        );
        assert!(failed.is_empty(), "failed clauses:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
    }
}

fn table1_baseline() -> &'static (BaselineOutcome, f64) {
    static BASELINE: OnceLock<(BaselineOutcome, f64)> = OnceLock::new();
    BASELINE.get_or_init(|| {
        let s = load_builtin_table1();
        let cfg = PipelineConfig { prune_k: Some(6), ..Default::default() };
        let t0 = Instant::now();
        let out = run_msirsn(&s, &cfg).expect("baseline solves");
        let secs = t0.elapsed().as_secs_f64();
        println!("baseline solved in {secs:.1}s: eta {:.4}", out.plan.objective);
        (out, secs)
    })
}

fn table1_tlfw() -> &'static (TlfwOutcome, f64) {
    static TLFW: OnceLock<(TlfwOutcome, f64)> = OnceLock::new();
    TLFW.get_or_init(|| {
        let s = load_builtin_table1();
        let t0 = Instant::now();
        let out = run_tlfw(&s, &PipelineConfig::default()).expect("layered pipeline solves");
        (out, t0.elapsed().as_secs_f64())
    })
}

/// Held-Karp 1-tree lower bound with subgradient ascent: an independent
/// certificate for tour quality.
fn held_karp_lower_bound(points: &[Point], upper_bound: f64) -> f64 {
    let n = points.len();
    let mut pi = vec![0.0f64; n];
    let mut best = 0.0f64;
    for _ in 0..300 {
        let d = |i: usize, j: usize| distance(points[i], points[j]) + pi[i] + pi[j];
        // Minimum spanning tree over 1..n, plus the two cheapest edges at 0.
        let mut degree = vec![0usize; n];
        let mut in_tree = vec![false; n];
        in_tree[1] = true;
        let mut best_edge: Vec<(f64, usize)> = (0..n).map(|j| (d(1, j), 1)).collect();
        let mut length = 0.0;
        for _ in 2..n {
            let j = (2..n)
                .filter(|&j| !in_tree[j])
                .min_by(|&a, &b| best_edge[a].0.partial_cmp(&best_edge[b].0).unwrap())
                .unwrap();
            in_tree[j] = true;
            length += best_edge[j].0;
            degree[j] += 1;
            degree[best_edge[j].1] += 1;
            for k in 2..n {
                if !in_tree[k] && d(j, k) < best_edge[k].0 {
                    best_edge[k] = (d(j, k), j);
                }
            }
        }
        let mut at_root: Vec<(f64, usize)> = (1..n).map(|j| (d(0, j), j)).collect();
        at_root.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        length += at_root[0].0 + at_root[1].0;
        degree[0] += 2;
        degree[at_root[0].1] += 1;
        degree[at_root[1].1] += 1;
        let bound = length - 2.0 * pi.iter().sum::<f64>();
        best = best.max(bound);
        let gradient: Vec<f64> = degree.iter().map(|&g| g as f64 - 2.0).collect();
        let norm: f64 = gradient.iter().map(|g| g * g).sum();
        if norm == 0.0 {
            break;
        }
        let step = 0.9 * (upper_bound - bound) / norm;
        for (p, g) in pi.iter_mut().zip(&gradient) {
            *p += step * g;
        }
    }
    best
}

/// Small low-rate deployment whose layered composition is feasible: two
/// spatial groups, a 100 J usable battery band and gentle data rates.
fn feasible_layered_scenario() -> Scenario {
    let offsets = [
        (0.00, 0.00),
        (0.06, 0.03),
        (-0.05, 0.06),
        (0.03, -0.07),
        (-0.06, -0.04),
        (0.08, 0.08),
    ];
    let mut nodes = Vec::new();
    for (g, &(cx, cy)) in [(0.30f64, 0.38f64), (0.72, 0.60)].iter().enumerate() {
        for (k, &(dx, dy)) in offsets.iter().enumerate() {
            nodes.push(SensorNode {
                id: (g * offsets.len() + k) as u32 + 1,
                pos: Point::new(cx + dx, cy + dy),
                rate: 0.01 + 0.004 * k as f64,
            });
        }
    }
    let mut params = NetworkParams::defaults();
    params.e_max = 600.0;
    let s = Scenario { area: (1.0, 1.0), nodes, params };
    s.validate().expect("synthetic scenario is valid");
    s
}

#[test]
fn criterion_1_baseline_reproduction() {
    let mut gate = Gate::new();
    // The stated command, end to end through the CLI.
    let bin = env!("CARGO_BIN_EXE_tlfw");
    let out_path = std::env::temp_dir().join("tlfw_acceptance_baseline.json");
    let t0 = Instant::now();
    let cmd = std::process::Command::new(bin)
        .args([
            "run", "--builtin", "table1", "--mode", "msirsn", "--prune-k", "6", "--seed", "42",
            "--out", out_path.to_str().unwrap(),
        ])
        .output()
        .expect("binary runs");
    let secs = &t0.elapsed().as_secs_f64();
    assert!(cmd.status.success(), "{}", String::from_utf8_lossy(&cmd.stderr));
    let report = tlfw::report::RunReport::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let eta = report.baseline.as_ref().expect("baseline section").plan.objective;
    gate.check(
        "criterion 1a (baseline objective in [0.63, 0.73])",
        (0.63..=0.73).contains(&eta),
        format!("eta = {eta:.4} against the published 68%"),
    );
    // Tour-quality clause, stated threshold 1.10 x 4.89 = 5.379. The
    // Held-Karp bound for the published coordinates certifies that no tour
    // of this instance can reach it; both facts are printed.
    let s = load_builtin_table1();
    let mut pts = vec![s.params.station];
    pts.extend(s.nodes.iter().map(|n| n.pos));
    let tour = heuristic_tour(&pts, tlfw::pipeline::sub_seed(42, "tour-reference"));
    let hk = held_karp_lower_bound(&pts, tour.length);
    println!(
        "note: Held-Karp bound for the 50-node+station instance is {hk:.4}; \
         every tour is at least that long, so the 5.379 threshold is unattainable \
         for the published coordinates (heuristic/bound = {:.4})",
        tour.length / hk
    );
    gate.check(
        "criterion 1b (heuristic node tour <= 1.10 x 4.89 = 5.379)",
        tour.length <= 1.10 * 4.89,
        format!("length = {:.4}, certified lower bound = {hk:.4}", tour.length),
    );
    gate.check(
        "criterion 1c (heuristic within 1.10 of its own certified bound)",
        tour.length <= 1.10 * hk,
        format!("ratio = {:.4}", tour.length / hk),
    );
    gate.check(
        "criterion 1d (baseline runtime <= 120 s)",
        *secs <= 120.0,
        format!("full command took {secs:.1} s"),
    );
    gate.finish("criterion 1 (baseline reproduction)");
}

#[test]
fn criterion_2_head_layer() {
    let mut gate = Gate::new();
    let (out, secs) = table1_tlfw();
    let d_p = out.head_plan.tour.length;
    gate.check(
        "criterion 2a (head tour D_P = 2.54 +/- 0.6)",
        (d_p - 2.54).abs() <= 0.6,
        format!("D_P = {d_p:.4}"),
    );
    let eta = out.head_plan.objective;
    let total_load: f64 = out
        .head_plan
        .participants
        .iter()
        .map(|p| p.member_rate_sum * s_rho() + p.ingress)
        .sum();
    println!(
        "note: the four heads consume >= {total_load:.1} J/s combined (reception plus >= 1 J/bit \
         transmission) while one vehicle delivers at most 50 J/s to a single co-located head, \
         forcing a charge duty near {:.2}; the published 0.729 vacation share violates that \
         energy balance by several times",
        total_load / 50.0
    );
    gate.check(
        "criterion 2b (vacation share 0.729 +/- 0.08)",
        (eta - 0.729).abs() <= 0.08,
        format!("vacation/cycle = {eta:.4}"),
    );
    gate.check(
        "criterion 2c (layered pipeline runtime <= 10 s)",
        *secs <= 10.0,
        format!("pipeline took {secs:.2} s"),
    );
    gate.finish("criterion 2 (head layer)");
}

fn s_rho() -> f64 {
    load_builtin_table1().params.rho
}

#[test]
fn criterion_3_joint_period() {
    let mut gate = Gate::new();
    let (out, _) = table1_tlfw();
    let min_tau = out
        .cluster_plans
        .iter()
        .map(|p| p.cycle_time)
        .fold(f64::INFINITY, f64::min);
    println!(
        "note: the longest admissible cluster cycle is (E_max - E_min) / max node drain; Table-1 \
         rates cap node drain near 1.0 J/s for any sane 4-clustering, so min cycle lands near \
         9.5e3, not the published 6134 (which would need a node draining ~1.55 J/s)"
    );
    gate.check(
        "criterion 3a (T = min cluster cycle in [5000, 7500])",
        (5000.0..=7500.0).contains(&min_tau),
        format!("min cycle = {min_tau:.1}"),
    );
    match &out.joint {
        Ok(j) => {
            gate.check(
                "criterion 3b (head charge time within 25% of 1115)",
                (j.breakdown.head_charge_time - 1115.0).abs() <= 0.25 * 1115.0,
                format!("head charge time = {:.1}", j.breakdown.head_charge_time),
            );
            gate.check(
                "criterion 3c (head travel time within 25% of 543)",
                (j.breakdown.head_travel_time - 543.0).abs() <= 0.25 * 543.0,
                format!("head travel time = {:.1}", j.breakdown.head_travel_time),
            );
            gate.check(
                "criterion 3d (normal charge time within 30% of 291)",
                (j.breakdown.normal_charge_time - 291.0).abs() <= 0.30 * 291.0,
                format!("normal charge time = {:.1}", j.breakdown.normal_charge_time),
            );
            let (baseline, _) = table1_baseline();
            gate.check(
                "criterion 3e (layered objective >= baseline - 0.05)",
                j.objective >= baseline.plan.objective - 0.05,
                format!("eta_total = {:.4} vs baseline {:.4}", j.objective, baseline.plan.objective),
            );
        }
        Err(e) => {
            let (baseline, _) = table1_baseline();
            for label in ["3b (head charge time within 25% of 1115)",
                          "3c (head travel time within 25% of 543)",
                          "3d (normal charge time within 30% of 291)"] {
                gate.check(
                    &format!("criterion {label}"),
                    false,
                    format!("no joint plan on Table 1: {e}"),
                );
            }
            gate.check(
                "criterion 3e (layered objective >= baseline - 0.05)",
                false,
                format!(
                    "no joint objective on Table 1 (baseline eta = {:.4}): {e}",
                    baseline.plan.objective
                ),
            );
        }
    }
    // Vacation identity, checked on every joint plan this suite produces.
    let mut identity_checked = 0;
    let mut identity_ok = true;
    for (joint, head_vac) in joint_plans_for_identity() {
        let recomputed = joint.sub_periods * head_vac
            - (joint.breakdown.normal_charge_time + joint.breakdown.normal_travel_time);
        let rel = (joint.vacation_total - recomputed).abs() / recomputed.abs().max(1e-12);
        identity_ok &= rel <= 1e-6;
        identity_checked += 1;
    }
    gate.check(
        "criterion 3f (T_vac = h*tau_vac - sum(rate_i*T + D_i/V) to 1e-6 relative)",
        identity_ok && identity_checked >= 2,
        format!("verified on {identity_checked} joint plans (reference arithmetic + feasible synthetic)"),
    );
    gate.finish("criterion 3 (joint period)");
}

/// Joint plans available to check the vacation identity on: the reference
/// arithmetic of criterion 4 and the feasible synthetic pipeline.
fn joint_plans_for_identity() -> Vec<(tlfw::schedule::JointPlan, f64)> {
    let mut plans = Vec::new();
    let (head, clusters) = reference_layer_solutions();
    if let Ok(j) = solve_joint(&clusters, &head, 4) {
        plans.push((j, head.vacation));
    }
    let s = feasible_layered_scenario();
    let cfg = PipelineConfig { clusters: 2, restarts: 8, ..Default::default() };
    if let Ok(out) = run_tlfw(&s, &cfg) {
        if let Ok(j) = out.joint {
            plans.push((j, out.head_plan.vacation));
        }
    }
    plans
}

/// The published per-layer solution values, as plan structures.
fn reference_layer_solutions() -> (HeadLayerPlan, Vec<ClusterPlan>) {
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
    let clusters = refs
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
    (head, clusters)
}

#[test]
fn criterion_4_reference_joint_arithmetic() {
    let mut gate = Gate::new();
    let (head, clusters) = reference_layer_solutions();
    let joint = solve_joint(&clusters, &head, 4).expect("reference inputs compose");
    gate.check(
        "criterion 4a (T = 6134)",
        (joint.period - 6134.0).abs() < 1e-9,
        format!("T = {}", joint.period),
    );
    gate.check(
        "criterion 4b (h = 21.388 +/- 0.001)",
        (joint.sub_periods - 21.388).abs() <= 1e-3,
        format!("h = {:.6}", joint.sub_periods),
    );
    let scaled: Vec<f64> = joint
        .scaled_stop_durations
        .iter()
        .map(|(_, w)| w.iter().sum())
        .collect();
    let expect = [17.2, 39.2, 64.1, 171.0];
    let all = scaled.iter().zip(expect).all(|(got, want)| (got - want).abs() <= 0.2);
    gate.check(
        "criterion 4c (scaled charge times {17.2, 39.2, 64.1, 171.0} +/- 0.2)",
        all,
        format!("got {:?}", scaled.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()),
    );
    gate.finish("criterion 4 (reference joint arithmetic)");
}

#[test]
fn criterion_5_renewability() {
    let mut gate = Gate::new();
    // Analytic single-node cluster at zero margin.
    let center = cell_center(cell_index(Point::new(0.52, 0.30), 0.1), 0.1);
    let head_pos = Point::new(center.x, center.y + 0.2);
    let s = Scenario {
        area: (1.0, 1.0),
        nodes: vec![
            SensorNode { id: 1, pos: head_pos, rate: 0.1 },
            SensorNode { id: 2, pos: center, rate: 1.0 },
        ],
        params: NetworkParams::defaults(),
    };
    s.validate().unwrap();
    let cfg = PipelineConfig { clusters: 1, restarts: 4, ..Default::default() };
    let out = run_tlfw(&s, &cfg).expect("single-cluster pipeline solves");
    let joint = out.joint.as_ref().expect("single-cluster composition is feasible");
    let trace = simulate(&s, &out.clustering, joint, &out.head_plan, &out.cluster_plans, 0.05, 3).unwrap();
    let verdict = check_renewable(&trace, 0.0);
    gate.check(
        "criterion 5a (analytic single-node cluster at zero margin)",
        verdict.pass,
        format!(
            "{} violations across 3 periods",
            verdict.failures.len()
        ),
    );
    // Feasible synthetic layered deployment at the stated 2% margin.
    let s2 = feasible_layered_scenario();
    let cfg2 = PipelineConfig { clusters: 2, restarts: 8, ..Default::default() };
    let out2 = run_tlfw(&s2, &cfg2).expect("synthetic pipeline solves");
    let joint2 = out2.joint.as_ref().expect("synthetic composition is feasible");
    let trace2 = simulate(&s2, &out2.clustering, joint2, &out2.head_plan, &out2.cluster_plans, 0.05, 3).unwrap();
    let verdict2 = check_renewable(&trace2, 0.02);
    gate.check(
        "criterion 5b (layered plan: floor E_min - 0.02 E_max, steady period ends)",
        verdict2.pass,
        format!(
            "h = {:.2}, {} violations",
            joint2.sub_periods,
            verdict2.failures.len()
        ),
    );
    // Accepted baseline plan on Table 1.
    let (baseline, _) = table1_baseline();
    let s3 = load_builtin_table1();
    let trace3 = simulate_baseline(&s3, &baseline.plan, 0.05, 3).unwrap();
    let verdict3 = check_renewable(&trace3, 0.02);
    gate.check(
        "criterion 5c (accepted baseline plan over 3 periods)",
        verdict3.pass,
        format!("{} violations", verdict3.failures.len()),
    );
    gate.finish("criterion 5 (renewability)");
}

#[test]
fn criterion_6_lp_oracle_equivalence() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tlfw::lp::{solve, verify, LpProblem, LpStatus, Relation};

    let mut gate = Gate::new();
    let mut rng = ChaCha8Rng::seed_from_u64(60_024);
    let mut max_gap = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut all_match = true;
    for _ in 0..200 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=5);
        let mut p = LpProblem::new(n);
        for j in 0..n {
            p.set_objective(j, rng.gen_range(-2.0..2.0));
        }
        for _ in 0..m {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..2.0))).collect();
            p.add_constraint(coeffs, Relation::Le, rng.gen_range(0.0..4.0));
        }
        p.add_constraint((0..n).map(|j| (j, 1.0)).collect(), Relation::Le, rng.gen_range(1.0..8.0));
        let sol = solve(&p);
        assert_eq!(sol.status, LpStatus::Optimal);
        let oracle = vertex_enumeration_opt(&p).expect("bounded feasible by construction");
        max_gap = max_gap.max((sol.objective_value - oracle).abs());
        all_match &= (sol.objective_value - oracle).abs() <= 1e-6;
        let report = verify(&p, &sol);
        max_residual = max_residual
            .max(report.max_violation)
            .max(report.max_negativity)
            .max(report.objective_delta.abs());
    }
    gate.check(
        "criterion 6a (200 random LPs match vertex enumeration within 1e-6)",
        all_match,
        format!("max objective gap = {max_gap:.2e}"),
    );
    gate.check(
        "criterion 6b (all solutions pass verify at 1e-9)",
        max_residual <= 1e-9,
        format!("max residual = {max_residual:.2e}"),
    );
    gate.finish("criterion 6 (LP oracle equivalence)");
}

/// Enumerate basic points of small LPs by solving all square subsystems.
fn vertex_enumeration_opt(p: &tlfw::lp::LpProblem) -> Option<f64> {
    use tlfw::lp::Relation;
    let n = p.n_vars;
    let m = p.constraints.len();
    let total = m + n;
    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..n).collect();
    loop {
        // Solve the tight system for this combination.
        let mut a = vec![vec![0.0f64; n + 1]; n];
        for (r, &k) in combo.iter().enumerate() {
            if k < m {
                for &(j, v) in &p.constraints[k].coeffs {
                    a[r][j] = v;
                }
                a[r][n] = p.constraints[k].rhs;
            } else {
                a[r][k - m] = 1.0;
            }
        }
        if let Some(x) = gauss_solve(&mut a, n) {
            let feasible = x.iter().all(|&v| v >= -1e-7)
                && p.constraints.iter().all(|c| {
                    let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
                    match c.relation {
                        Relation::Le => lhs <= c.rhs + 1e-7,
                        Relation::Ge => lhs >= c.rhs - 1e-7,
                        Relation::Eq => (lhs - c.rhs).abs() <= 1e-7,
                    }
                });
            if feasible {
                let val: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.map_or(true, |b| val > b) {
                    best = Some(val);
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] + 1 <= total - (n - i) {
                combo[i] += 1;
                for k in i + 1..n {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn gauss_solve(a: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        let inv = 1.0 / a[col][col];
        for j in col..=n {
            a[col][j] *= inv;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for j in col..=n {
                    a[r][j] -= f * a[col][j];
                }
            }
        }
    }
    Some((0..n).map(|r| a[r][n]).collect())
}

#[test]
fn criterion_7_structural_properties() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut gate = Gate::new();
    // Flow conservation per epoch on both plan families.
    let (tlfw_out, _) = table1_tlfw();
    let (baseline, _) = table1_baseline();
    let mut worst_flow = 0.0f64;
    for plan in [&tlfw_out.head_plan, &baseline.plan] {
        for (e, pattern) in plan.flows.iter().enumerate() {
            if plan.epoch_duration(e) <= 1e-12 {
                continue;
            }
            for p in &plan.participants {
                let inflow = pattern.incoming(p.id) + p.ingress;
                let out: f64 = pattern
                    .head_flows
                    .iter()
                    .filter(|&&(f, _, _)| f == p.id)
                    .map(|&(_, _, v)| v)
                    .sum::<f64>()
                    + pattern.flow_to_base(p.id);
                worst_flow = worst_flow.max((inflow - out).abs() / inflow.abs().max(1.0));
            }
        }
    }
    gate.check(
        "criterion 7a (per-epoch flow conservation <= 1e-9 relative)",
        worst_flow <= 1e-9,
        format!("worst relative imbalance = {worst_flow:.2e}"),
    );
    // Cycle identities on every plan.
    let mut worst_identity = 0.0f64;
    for p in &tlfw_out.cluster_plans {
        let lhs = p.travel_time + p.stop_durations.iter().sum::<f64>() + p.vacation;
        worst_identity = worst_identity.max((lhs - p.cycle_time).abs() / p.cycle_time);
    }
    for p in [&tlfw_out.head_plan, &baseline.plan] {
        let lhs = p.travel_time + p.total_stop_time() + p.vacation;
        worst_identity = worst_identity.max((lhs - p.cycle_time).abs() / p.cycle_time);
    }
    gate.check(
        "criterion 7b (cycle time identities <= 1e-6 relative)",
        worst_identity <= 1e-6,
        format!("worst relative error = {worst_identity:.2e}"),
    );
    // Tour properties on 50 random instances of up to 8 points.
    let mut rng = ChaCha8Rng::seed_from_u64(70_001);
    let mut heuristic_ok = true;
    let mut exact_matches_brute = true;
    for case in 0..50 {
        let n = rng.gen_range(4..=8);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        let exact = exact_tour(&pts).unwrap();
        let brute = brute_force_cycle(&pts);
        exact_matches_brute &= (exact.length - brute).abs() <= 1e-9;
        let heur = heuristic_tour(&pts, case);
        heuristic_ok &= heur.length >= exact.length - 1e-9 && two_opt_stable(&heur);
    }
    gate.check(
        "criterion 7c (heuristic >= exact and 2-opt stable on 50 instances, n <= 8)",
        heuristic_ok && exact_matches_brute,
        "exact matches factorial enumeration; heuristic never undercuts it".into(),
    );
    // Hexagon circumradius bound on 10^4 random points.
    let mut rng = ChaCha8Rng::seed_from_u64(70_002);
    let mut worst_d = 0.0f64;
    for _ in 0..10_000 {
        let p = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = distance(p, cell_center(cell_index(p, 0.1), 0.1));
        worst_d = worst_d.max(d);
    }
    gate.check(
        "criterion 7d (hex circumradius bound on 1e4 points)",
        worst_d <= 0.1 + 1e-12,
        format!("max point-to-center distance = {worst_d:.6}"),
    );
    // Medoid-variant cost monotonicity, iterated by hand.
    let s = load_builtin_table1();
    let mut heads: Vec<u32> = vec![5, 17, 29, 41];
    let mut costs = Vec::new();
    for _ in 0..20 {
        let members = assignment_step(&s, &heads);
        let clustering = Clustering {
            clusters: members
                .iter()
                .map(|(&h, ms)| tlfw::clustering::Cluster { head_id: h, member_ids: ms.clone() })
                .collect(),
        };
        costs.push(comm_cost(&s, &clustering));
        let next = head_update_step(&s, &clustering, Variant::ExactMedoid);
        if {
            let mut a = next.clone();
            let mut b = heads.clone();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        } {
            break;
        }
        heads = next;
    }
    let monotone = costs.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    gate.check(
        "criterion 7e (exact-medoid cost monotone per iteration)",
        monotone,
        format!("cost sequence {:?}", costs.iter().map(|c| (c * 1e3).round() / 1e3).collect::<Vec<_>>()),
    );
    gate.finish("criterion 7 (structural properties)");
}

fn brute_force_cycle(points: &[Point]) -> f64 {
    fn go(rest: &mut Vec<usize>, prefix: &mut Vec<usize>, pts: &[Point], best: &mut f64) {
        if rest.is_empty() {
            let len: f64 = (0..prefix.len())
                .map(|k| distance(pts[prefix[k]], pts[prefix[(k + 1) % prefix.len()]]))
                .sum();
            if len < *best {
                *best = len;
            }
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(rest, prefix, pts, best);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut best = f64::INFINITY;
    go(&mut (1..points.len()).collect(), &mut vec![0], points, &mut best);
    best
}

#[test]
fn criterion_8_determinism() {
    let mut gate = Gate::new();
    let bin = env!("CARGO_BIN_EXE_tlfw");
    let dir = std::env::temp_dir();
    let out_a = dir.join("tlfw_acceptance_a.json");
    let out_b = dir.join("tlfw_acceptance_b.json");
    for out in [&out_a, &out_b] {
        let status = std::process::Command::new(bin)
            .args([
                "run",
                "--builtin",
                "table1",
                "--clusters",
                "4",
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        // The Table-1 composition is infeasible, so the run reports exit 2
        // while still writing the full report.
        assert_eq!(status.status.code(), Some(2), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let strip = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(&std::fs::read_to_string(&out_a).unwrap());
    let b = strip(&std::fs::read_to_string(&out_b).unwrap());
    gate.check(
        "criterion 8 (byte-identical reports modulo timestamp)",
        a == b,
        format!("{} bytes compared", a.len()),
    );
    gate.finish("criterion 8 (determinism)");
}
