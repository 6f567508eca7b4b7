//! Run reports: a self-contained JSON document carrying the scenario, every
//! plan and the verdict, so a run can be re-checked or re-rendered without
//! the original inputs. Keys are stable snake_case; two runs with the same
//! flags serialize byte-identically except for `generated_at`.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::pipeline::{BaselineOutcome, Mode, PipelineConfig, TlfwOutcome};
use crate::scenario::{load_scenario, serialize_scenario, Scenario};
use crate::schedule::{ClusterPlan, HeadLayerPlan, JointPlan};
use crate::sim::{Trace, Verdict};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    /// Unix timestamp of report creation; the only non-reproducible field.
    pub generated_at: u64,
    pub settings: SettingsEcho,
    pub scenario: ScenarioEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layered: Option<LayeredSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSection>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsEcho {
    pub mode: Mode,
    pub seed: u64,
    pub clusters: usize,
    pub restarts: usize,
    pub variant: String,
    pub seg_max: f64,
    pub prune_k: usize,
    pub jobs: usize,
    pub dt: f64,
    pub periods: usize,
    pub mu_coeffs: Vec<f64>,
    pub source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEcho {
    pub node_count: usize,
    /// Full scenario document (the same schema `--scenario` accepts).
    pub document: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayeredSection {
    pub clustering: Clustering,
    pub comm_cost: f64,
    pub cluster_plans: Vec<ClusterPlan>,
    pub head_plan: HeadLayerPlan,
    pub joint: JointSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JointSection {
    Solved { plan: JointPlan },
    Infeasible { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub plan: HeadLayerPlan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub periods: usize,
    pub pass: bool,
    pub failures: Vec<SimFailure>,
    pub per_node: Vec<NodeSimSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFailure {
    pub node: u32,
    pub time: f64,
    pub energy: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSimSummary {
    pub node: u32,
    pub min_energy: f64,
    pub period_end_energy: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    /// Heuristic cycle through every node plus the station; the quantity the
    /// published baseline length refers to.
    pub node_tour_length: f64,
    pub lp_notes: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<RunReport, String> {
        serde_json::from_str(text).map_err(|e| format!("report parse error: {e}"))
    }

    pub fn scenario(&self) -> Result<Scenario, String> {
        let doc = serde_json::to_string(&self.scenario.document).map_err(|e| e.to_string())?;
        load_scenario(&doc).map_err(|e| e.to_string())
    }
}

pub fn sim_section(trace: &Trace, verdict: &Verdict, dt: f64, periods: usize) -> SimSection {
    let per_node = trace
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| NodeSimSummary {
            node: id,
            min_energy: trace
                .periods
                .iter()
                .map(|p| p[i].min_energy)
                .fold(f64::INFINITY, f64::min),
            period_end_energy: trace.periods.iter().map(|p| p[i].end_energy).collect(),
        })
        .collect();
    SimSection {
        dt,
        periods,
        pass: verdict.pass,
        failures: verdict
            .failures
            .iter()
            .map(|f| SimFailure { node: f.node, time: f.time, energy: f.energy, reason: f.reason.clone() })
            .collect(),
        per_node,
    }
}

pub struct ReportInputs<'a> {
    pub scenario: &'a Scenario,
    pub cfg: &'a PipelineConfig,
    pub mode: Mode,
    pub dt: f64,
    pub periods: usize,
    pub source: String,
    pub tlfw: Option<&'a TlfwOutcome>,
    pub baseline: Option<&'a BaselineOutcome>,
    pub simulation: Option<SimSection>,
}

pub fn build_report(inputs: ReportInputs<'_>) -> RunReport {
    let ReportInputs { scenario, cfg, mode, dt, periods, source, tlfw, baseline, simulation } = inputs;
    let document: serde_json::Value =
        serde_json::from_str(&serialize_scenario(scenario)).expect("scenario echo is valid json");
    let node_tour_length = {
        let mut pts = vec![scenario.params.station];
        pts.extend(scenario.nodes.iter().map(|n| n.pos));
        crate::tour::heuristic_tour(&pts, crate::pipeline::sub_seed(cfg.seed, "tour-reference")).length
    };
    let mut lp_notes = Vec::new();
    if let Some(t) = tlfw {
        for p in &t.cluster_plans {
            lp_notes.push(format!(
                "cluster {}: {} pivots, residual {:.2e}",
                p.cluster_id, p.lp_iterations, p.lp_residual
            ));
        }
        lp_notes.push(format!(
            "head layer: {} pivots, residual {:.2e}{}",
            t.head_plan.lp_iterations,
            t.head_plan.lp_residual,
            if t.head_plan.lp_sparse { " (sparse path)" } else { "" }
        ));
    }
    if let Some(b) = baseline {
        lp_notes.push(format!(
            "baseline: {} pivots, residual {:.2e}{}",
            b.plan.lp_iterations,
            b.plan.lp_residual,
            if b.plan.lp_sparse { " (sparse path)" } else { "" }
        ));
    }
    RunReport {
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        settings: SettingsEcho {
            mode,
            seed: cfg.seed,
            clusters: cfg.clusters,
            restarts: cfg.restarts,
            variant: match cfg.variant {
                crate::clustering::Variant::CentroidSnap => "centroid-snap".into(),
                crate::clustering::Variant::ExactMedoid => "exact-medoid".into(),
            },
            seg_max: cfg.seg_max,
            prune_k: cfg.effective_prune_k(mode),
            jobs: cfg.jobs,
            dt,
            periods,
            mu_coeffs: scenario.params.mu_coeffs.clone(),
            source,
        },
        scenario: ScenarioEcho { node_count: scenario.nodes.len(), document },
        layered: tlfw.map(|t| LayeredSection {
            clustering: t.clustering.clone(),
            comm_cost: t.comm_cost,
            cluster_plans: t.cluster_plans.clone(),
            head_plan: t.head_plan.clone(),
            joint: match &t.joint {
                Ok(plan) => JointSection::Solved { plan: plan.clone() },
                Err(e) => JointSection::Infeasible { reason: e.to_string() },
            },
        }),
        baseline: baseline.map(|b| BaselineSection { plan: b.plan.clone() }),
        simulation,
        diagnostics: Diagnostics { node_tour_length, lp_notes },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_msirsn, PipelineConfig};
    use crate::scenario::generate_scenario;

    #[test]
    fn report_round_trips_and_is_stable_modulo_timestamp() {
        let s = generate_scenario(3, 8, (1.0, 1.0), (0.05, 0.2)).unwrap();
        let cfg = PipelineConfig { clusters: 2, ..Default::default() };
        let out = run_msirsn(&s, &cfg).unwrap();
        let make = || {
            build_report(ReportInputs {
                scenario: &s,
                cfg: &cfg,
                mode: Mode::Msirsn,
                dt: 0.05,
                periods: 0,
                source: "generated".into(),
                tlfw: None,
                baseline: Some(&out),
                simulation: None,
            })
        };
        let mut a = make();
        let mut b = make();
        a.generated_at = 0;
        b.generated_at = 0;
        assert_eq!(a.to_json(), b.to_json());
        let parsed = RunReport::from_json(&a.to_json()).unwrap();
        let sc = parsed.scenario().unwrap();
        assert_eq!(sc, s);
        assert!(parsed.baseline.is_some());
    }
}

/// Outcome of a full planning run, ready for serialization or rendering.
pub struct RunArtifacts {
    pub report: RunReport,
    pub trace: Option<Trace>,
    /// Composition failure captured in the report, if any.
    pub infeasible: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
}

/// Run the selected mode end to end: plan, optionally simulate, and build
/// the report. Mirrors the CLI `run` command.
pub fn execute_run(
    scenario: &Scenario,
    cfg: &PipelineConfig,
    mode: Mode,
    dt: f64,
    periods: usize,
    source: String,
) -> Result<RunArtifacts, RunError> {
    use crate::pipeline::PipelineError;
    use crate::sim::{check_renewable, simulate, simulate_baseline};

    let map_err = |e: PipelineError| match e {
        PipelineError::Cluster(c) => RunError::Invalid(c.to_string()),
        PipelineError::Schedule(s) => match s {
            crate::error::ScheduleError::Infeasible(_)
            | crate::error::ScheduleError::JointInfeasible(_)
            | crate::error::ScheduleError::UnchargeableNode(_)
            | crate::error::ScheduleError::ZeroConsumption => RunError::Infeasible(s.to_string()),
            other => RunError::Invalid(other.to_string()),
        },
    };
    let mut simulation = None;
    let mut trace_out = None;
    let mut infeasible = None;
    let report = match mode {
        Mode::Tlfw => {
            let out = crate::pipeline::run_tlfw(scenario, cfg).map_err(map_err)?;
            match &out.joint {
                Ok(joint) => {
                    if periods >= 2 {
                        let trace = simulate(
                            scenario,
                            &out.clustering,
                            joint,
                            &out.head_plan,
                            &out.cluster_plans,
                            dt,
                            periods,
                        )
                        .map_err(|e| RunError::Invalid(e.to_string()))?;
                        let verdict = check_renewable(&trace, 0.02);
                        simulation = Some(sim_section(&trace, &verdict, dt, periods));
                        trace_out = Some(trace);
                    }
                }
                Err(e) => infeasible = Some(e.to_string()),
            }
            build_report(ReportInputs {
                scenario,
                cfg,
                mode,
                dt,
                periods,
                source,
                tlfw: Some(&out),
                baseline: None,
                simulation: simulation.clone(),
            })
        }
        Mode::Msirsn => {
            let out = crate::pipeline::run_msirsn(scenario, cfg).map_err(map_err)?;
            if periods >= 2 {
                let trace = simulate_baseline(scenario, &out.plan, dt, periods)
                    .map_err(|e| RunError::Invalid(e.to_string()))?;
                let verdict = check_renewable(&trace, 0.02);
                simulation = Some(sim_section(&trace, &verdict, dt, periods));
                trace_out = Some(trace);
            }
            build_report(ReportInputs {
                scenario,
                cfg,
                mode,
                dt,
                periods,
                source,
                tlfw: None,
                baseline: Some(&out),
                simulation: simulation.clone(),
            })
        }
    };
    Ok(RunArtifacts { report, trace: trace_out, infeasible })
}
