//! Network data model: nodes, physical parameters, the built-in 50-node
//! dataset, random scenario generation and basic plane geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

pub type NodeId = u32;

/// A point in the plane, in normalized area units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// A sensor node: position plus data generation rate (bits per unit time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNode {
    pub id: NodeId,
    pub pos: Point,
    pub rate: f64,
}

/// Physical and network constants of a deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Transmission cost constant term (Joule/bit).
    pub beta1: f64,
    /// Transmission cost distance term (Joule/(bit·length^omega)).
    pub beta2: f64,
    /// Path loss index, in [2, 4].
    pub path_loss_exp: f64,
    /// Reception cost per bit (Joule/bit).
    pub rho: f64,
    /// Sensing cost per bit (Joule/bit).
    pub alpha: f64,
    /// Vehicle travel speed (length/time).
    pub speed: f64,
    /// Battery capacity (Joule).
    pub e_max: f64,
    /// Operational battery floor (Joule).
    pub e_min: f64,
    /// Maximum charge output (Joule/time).
    pub u_max: f64,
    /// Wireless charging range (length).
    pub d_delta: f64,
    /// Charging-efficiency polynomial coefficients, lowest degree first.
    pub mu_coeffs: Vec<f64>,
    /// Home service station of the vehicle.
    pub station: Point,
}

/// Charging-efficiency presets for `mu_coeffs`.
///
/// `MU_QUARTIC` (1 − 4D² − 40D⁴) is the default; `MU_QUADRATIC`
/// (1 − 44D²) is the alternative literal reading of the same source
/// constants. Both are positive and non-increasing on [0, 0.1].
pub const MU_QUARTIC: [f64; 5] = [1.0, 0.0, -4.0, 0.0, -40.0];
pub const MU_QUADRATIC: [f64; 3] = [1.0, 0.0, -44.0];

impl NetworkParams {
    /// Default parameter set used by the built-in dataset and the generator.
    pub fn defaults() -> Self {
        NetworkParams {
            beta1: 1.0,
            beta2: 1.0,
            path_loss_exp: 4.0,
            rho: 1.0,
            alpha: 0.0,
            speed: 0.1,
            e_max: 10_000.0,
            e_min: 500.0,
            u_max: 50.0,
            d_delta: 0.1,
            mu_coeffs: MU_QUARTIC.to_vec(),
            station: Point::new(0.5, 0.5),
        }
    }

    /// Charging efficiency μ(d), evaluated by Horner's rule.
    pub fn mu(&self, d: f64) -> f64 {
        self.mu_coeffs.iter().rev().fold(0.0, |acc, &c| acc * d + c)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let inv = |field, reason: String| Err(ScenarioError::Invariant { field, reason });
        if !(self.e_max > self.e_min && self.e_min >= 0.0) {
            return inv("Emax/Emin", format!("need Emax > Emin >= 0, got {} / {}", self.e_max, self.e_min));
        }
        if !(self.speed > 0.0) {
            return inv("V", format!("speed must be positive, got {}", self.speed));
        }
        if !(self.d_delta > 0.0) {
            return inv("Ddelta", format!("charging range must be positive, got {}", self.d_delta));
        }
        if !(self.u_max > 0.0) {
            return inv("Umax", format!("charge output must be positive, got {}", self.u_max));
        }
        if !(2.0..=4.0).contains(&self.path_loss_exp) {
            return inv("omega", format!("path loss index must lie in [2, 4], got {}", self.path_loss_exp));
        }
        for v in [self.beta1, self.beta2, self.rho, self.alpha] {
            if !v.is_finite() || v < 0.0 {
                return inv("beta1/beta2/rho/alpha", format!("cost constants must be finite and non-negative, got {v}"));
            }
        }
        // μ is only trusted inside the charging range: sample a 1000-point
        // grid on [0, Ddelta] and require 0 <= μ <= 1, non-increasing.
        let mut prev = f64::INFINITY;
        for k in 0..=1000 {
            let d = self.d_delta * k as f64 / 1000.0;
            let m = self.mu(d);
            if !(0.0..=1.0).contains(&m) {
                return inv("mu", format!("mu({d}) = {m} outside [0, 1]"));
            }
            if m > prev + 1e-12 {
                return inv("mu", format!("mu increases at d = {d}"));
            }
            prev = m;
        }
        Ok(())
    }
}

/// A deployment: rectangular area, nodes and physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Area rectangle (width, height), anchored at the origin.
    pub area: (f64, f64),
    pub nodes: Vec<SensorNode>,
    pub params: NetworkParams,
}

impl Scenario {
    pub fn node(&self, id: NodeId) -> Option<&SensorNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.nodes.is_empty() {
            return Err(ScenarioError::Empty);
        }
        self.params.validate()?;
        let (w, h) = self.area;
        if !(w > 0.0 && h > 0.0) {
            return Err(ScenarioError::Invariant {
                field: "area",
                reason: format!("area must be positive, got {w} x {h}"),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                return Err(ScenarioError::DuplicateId(n.id));
            }
            if !(n.rate.is_finite() && n.rate >= 0.0) {
                return Err(ScenarioError::Invariant {
                    field: "r",
                    reason: format!("node {} has rate {}", n.id, n.rate),
                });
            }
            if !(0.0..=w).contains(&n.pos.x) || !(0.0..=h).contains(&n.pos.y) {
                return Err(ScenarioError::Invariant {
                    field: "x/y",
                    reason: format!("node {} at ({}, {}) outside {w} x {h}", n.id, n.pos.x, n.pos.y),
                });
            }
        }
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                if a.pos == b.pos {
                    return Err(ScenarioError::DuplicateCoordinates(a.id, b.id, a.pos.x, a.pos.y));
                }
            }
        }
        Ok(())
    }
}

/// 50-node reference dataset: (x, y, rate) per node, ids 1..=50.
const TABLE1: [(f64, f64, f64); 50] = [
    (0.547, 0.644, 0.1),
    (0.662, 0.757, 0.7),
    (0.037, 0.859, 0.4),
    (0.723, 0.741, 1.0),
    (0.529, 0.778, 0.9),
    (0.316, 0.035, 0.4),
    (0.190, 0.842, 0.8),
    (0.288, 0.106, 0.8),
    (0.040, 0.942, 0.2),
    (0.264, 0.648, 0.4),
    (0.446, 0.805, 0.5),
    (0.890, 0.729, 0.5),
    (0.370, 0.350, 0.1),
    (0.006, 0.101, 0.7),
    (0.393, 0.548, 0.1),
    (0.629, 0.623, 0.1),
    (0.084, 0.954, 0.5),
    (0.756, 0.840, 0.2),
    (0.966, 0.376, 0.7),
    (0.931, 0.308, 0.6),
    (0.944, 0.439, 0.1),
    (0.626, 0.323, 0.4),
    (0.537, 0.538, 0.2),
    (0.118, 0.082, 0.3),
    (0.929, 0.541, 0.2),
    (0.833, 0.115, 0.2),
    (0.639, 0.658, 0.1),
    (0.704, 0.930, 0.6),
    (0.977, 0.306, 0.8),
    (0.673, 0.386, 0.5),
    (0.021, 0.745, 0.7),
    (0.924, 0.072, 0.6),
    (0.270, 0.829, 0.1),
    (0.777, 0.573, 0.8),
    (0.097, 0.512, 0.9),
    (0.986, 0.290, 0.2),
    (0.161, 0.636, 0.7),
    (0.355, 0.767, 0.9),
    (0.655, 0.574, 0.5),
    (0.031, 0.052, 0.4),
    (0.350, 0.150, 0.3),
    (0.941, 0.724, 0.1),
    (0.966, 0.430, 0.2),
    (0.107, 0.191, 0.3),
    (0.007, 0.337, 0.3),
    (0.457, 0.287, 0.4),
    (0.753, 0.383, 0.1),
    (0.945, 0.909, 0.1),
    (0.209, 0.758, 0.3),
    (0.221, 0.588, 0.8),
];

/// The built-in 50-node scenario on the unit square with default parameters.
pub fn load_builtin_table1() -> Scenario {
    let nodes = TABLE1
        .iter()
        .enumerate()
        .map(|(i, &(x, y, r))| SensorNode {
            id: i as NodeId + 1,
            pos: Point::new(x, y),
            rate: r,
        })
        .collect();
    let s = Scenario {
        area: (1.0, 1.0),
        nodes,
        params: NetworkParams::defaults(),
    };
    debug_assert!(s.validate().is_ok());
    s
}

/// Random scenario: `n` nodes uniform in `area`, rates uniform in
/// `rate_range`, default parameters. A pure function of its arguments.
pub fn generate_scenario(
    seed: u64,
    n: usize,
    area: (f64, f64),
    rate_range: (f64, f64),
) -> Result<Scenario, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Empty);
    }
    if !(rate_range.0 >= 0.0 && rate_range.1 >= rate_range.0) {
        return Err(ScenarioError::Invariant {
            field: "r",
            reason: format!("rate range [{}, {}] invalid", rate_range.0, rate_range.1),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n)
        .map(|i| SensorNode {
            id: i as NodeId + 1,
            pos: Point::new(rng.gen_range(0.0..area.0), rng.gen_range(0.0..area.1)),
            rate: if rate_range.0 == rate_range.1 {
                rate_range.0
            } else {
                rng.gen_range(rate_range.0..rate_range.1)
            },
        })
        .collect();
    let s = Scenario {
        area,
        nodes,
        params: NetworkParams::defaults(),
    };
    s.validate()?;
    Ok(s)
}

// On-disk schema. Field names are part of the file format; unknown fields
// are rejected.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    area: [f64; 2],
    station: [f64; 2],
    params: ParamsFile,
    nodes: Vec<NodeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    beta1: f64,
    beta2: f64,
    omega: f64,
    rho: f64,
    alpha: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "Emax")]
    e_max: f64,
    #[serde(rename = "Emin")]
    e_min: f64,
    #[serde(rename = "Umax")]
    u_max: f64,
    #[serde(rename = "Ddelta")]
    d_delta: f64,
    mu: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeId,
    x: f64,
    y: f64,
    r: f64,
}

/// Parse a scenario document (UTF-8 JSON) and validate all invariants.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let s = Scenario {
        area: (file.area[0], file.area[1]),
        nodes: file
            .nodes
            .iter()
            .map(|n| SensorNode {
                id: n.id,
                pos: Point::new(n.x, n.y),
                rate: n.r,
            })
            .collect(),
        params: NetworkParams {
            beta1: file.params.beta1,
            beta2: file.params.beta2,
            path_loss_exp: file.params.omega,
            rho: file.params.rho,
            alpha: file.params.alpha,
            speed: file.params.v,
            e_max: file.params.e_max,
            e_min: file.params.e_min,
            u_max: file.params.u_max,
            d_delta: file.params.d_delta,
            mu_coeffs: file.params.mu.clone(),
            station: Point::new(file.station[0], file.station[1]),
        },
    };
    s.validate()?;
    Ok(s)
}

/// Serialize a scenario in the same schema `load_scenario` accepts.
pub fn serialize_scenario(s: &Scenario) -> String {
    let file = ScenarioFile {
        area: [s.area.0, s.area.1],
        station: [s.params.station.x, s.params.station.y],
        params: ParamsFile {
            beta1: s.params.beta1,
            beta2: s.params.beta2,
            omega: s.params.path_loss_exp,
            rho: s.params.rho,
            alpha: s.params.alpha,
            v: s.params.speed,
            e_max: s.params.e_max,
            e_min: s.params.e_min,
            u_max: s.params.u_max,
            d_delta: s.params.d_delta,
            mu: s.params.mu_coeffs.clone(),
        },
        nodes: s
            .nodes
            .iter()
            .map(|n| NodeFile {
                id: n.id,
                x: n.pos.x,
                y: n.pos.y,
                r: n.rate,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("scenario serialization cannot fail")
}
