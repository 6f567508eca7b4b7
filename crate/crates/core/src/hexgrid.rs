//! Hexagonal cell partition of the plane: charging stops are the centers of
//! cells that contain at least one normal node.
//!
//! Pointy-top hexagons with a configurable side length, anchored with a cell
//! center at the origin. Axial coordinates follow the usual (q, r) scheme
//! with cube rounding for point-to-cell mapping.

use serde::{Deserialize, Serialize};

use crate::clustering::Cluster;
use crate::scenario::{distance, NodeId, Point, Scenario};

/// Axial coordinates of one hexagonal cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HexCell {
    pub q: i32,
    pub r: i32,
}

/// Center of a cell in the plane for the given side length.
pub fn cell_center(cell: HexCell, side: f64) -> Point {
    let sqrt3 = 3.0f64.sqrt();
    Point::new(
        sqrt3 * side * (cell.q as f64 + cell.r as f64 / 2.0),
        1.5 * side * cell.r as f64,
    )
}

/// Cell containing a point. Boundary points resolve by cube rounding.
pub fn cell_index(p: Point, side: f64) -> HexCell {
    assert!(side > 0.0, "cell side must be positive");
    let sqrt3 = 3.0f64.sqrt();
    let qf = (sqrt3 / 3.0 * p.x - p.y / 3.0) / side;
    let rf = (2.0 / 3.0 * p.y) / side;
    cube_round(qf, rf)
}

fn cube_round(qf: f64, rf: f64) -> HexCell {
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    // Reset the axis with the largest rounding error; the fixed precedence
    // q > r > s is the deterministic tie-break.
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    HexCell { q: q as i32, r: r as i32 }
}

/// One cluster's occupied cells with their member nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPlan {
    pub side: f64,
    /// Occupied cells in (q, r) order, each with its member ids sorted.
    pub cells: Vec<(HexCell, Vec<NodeId>)>,
}

impl CellPlan {
    pub fn centers(&self) -> Vec<Point> {
        self.cells.iter().map(|(c, _)| cell_center(*c, self.side)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Cells occupied by the cluster's normal nodes (the head is not a member).
pub fn occupied_cells(scenario: &Scenario, cluster: &Cluster, side: f64) -> CellPlan {
    occupied_cells_for_nodes(scenario, &cluster.member_ids, side)
}

/// Cells occupied by the given nodes.
pub fn occupied_cells_for_nodes(scenario: &Scenario, ids: &[NodeId], side: f64) -> CellPlan {
    let mut map: std::collections::BTreeMap<HexCell, Vec<NodeId>> = Default::default();
    for &id in ids {
        let node = scenario.node(id).expect("node must exist in scenario");
        map.entry(cell_index(node.pos, side)).or_default().push(id);
    }
    let cells = map
        .into_iter()
        .map(|(c, mut ids)| {
            ids.sort_unstable();
            (c, ids)
        })
        .collect();
    CellPlan { side, cells }
}

/// Stops within charging range of the node (closed inequality).
pub fn reachable_stops(node: Point, stops: &[Point], d_delta: f64) -> Vec<usize> {
    assert!(d_delta > 0.0, "charging range must be positive");
    stops
        .iter()
        .enumerate()
        .filter(|(_, &s)| distance(node, s) <= d_delta)
        .map(|(k, _)| k)
        .collect()
}
