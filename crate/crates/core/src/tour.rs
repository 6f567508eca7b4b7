//! Hamiltonian cycles through waypoint sets: exact dynamic programming for
//! small inputs, nearest-neighbor construction with 2-opt / Or-opt local
//! search beyond that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TourError;
use crate::scenario::{distance, Point};

/// Largest input the exact subset-DP solver accepts.
pub const EXACT_LIMIT: usize = 15;

/// A closed tour. The first waypoint is the start anchor; the cycle closes
/// back to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub waypoints: Vec<Point>,
    pub length: f64,
}

/// Cycle length of a waypoint sequence, closing edge included.
pub fn cycle_length(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    (0..points.len())
        .map(|k| distance(points[k], points[(k + 1) % points.len()]))
        .sum()
}

/// Recompute a tour's length from its waypoints.
pub fn tour_length(tour: &Tour) -> f64 {
    cycle_length(&tour.waypoints)
}

/// Optimal cycle by dynamic programming over subsets. Limited to
/// `EXACT_LIMIT` points; ties resolve to the lexicographically smallest
/// successor sequence.
pub fn exact_tour(points: &[Point]) -> Result<Tour, TourError> {
    let n = points.len();
    if n == 0 {
        return Err(TourError::NoPoints);
    }
    if n > EXACT_LIMIT {
        return Err(TourError::TooManyPoints(n));
    }
    if n == 1 {
        return Ok(Tour { waypoints: points.to_vec(), length: 0.0 });
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|&a| points.iter().map(|&b| distance(a, b)).collect())
        .collect();
    let full: usize = (1 << n) - 1;
    // g[mask][last]: cheapest completion back to point 0 after visiting
    // `mask` and standing at `last`.
    let mut g = vec![vec![f64::INFINITY; n]; 1 << n];
    for last in 0..n {
        g[full][last] = d[last][0];
    }
    for mask in (1..full).rev() {
        if mask & 1 == 0 {
            continue;
        }
        for last in 0..n {
            if mask >> last & 1 == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for next in 1..n {
                if mask >> next & 1 == 1 {
                    continue;
                }
                let cand = d[last][next] + g[mask | 1 << next][next];
                if cand < best {
                    best = cand;
                }
            }
            g[mask][last] = best;
        }
    }
    let mut order = vec![0usize];
    let mut mask = 1usize;
    let mut last = 0usize;
    while mask != full {
        let target = g[mask][last];
        let next = (1..n)
            .find(|&j| mask >> j & 1 == 0 && d[last][j] + g[mask | 1 << j][j] == target)
            .expect("DP reconstruction must find a successor");
        order.push(next);
        mask |= 1 << next;
        last = next;
    }
    let waypoints: Vec<Point> = order.into_iter().map(|k| points[k]).collect();
    let length = g[1][0];
    Ok(Tour { waypoints, length })
}

/// Near-optimal cycle: nearest-neighbor tours from several deterministically
/// chosen starts, each improved by alternating 2-opt and Or-opt sweeps until
/// neither finds an exchange. Deterministic for a fixed seed and never
/// shorter than the exact optimum.
pub fn heuristic_tour(points: &[Point], seed: u64) -> Tour {
    let n = points.len();
    assert!(n >= 1, "heuristic tour needs at least one point");
    if n <= 2 {
        return Tour { waypoints: points.to_vec(), length: cycle_length(points) };
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|&a| points.iter().map(|&b| distance(a, b)).collect())
        .collect();
    const MAX_STARTS: usize = 24;
    let starts: Vec<usize> = if n <= MAX_STARTS {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<usize> = (0..MAX_STARTS).map(|_| rng.gen_range(0..n)).collect();
        s.sort_unstable();
        s.dedup();
        if !s.contains(&0) {
            s.insert(0, 0);
        }
        s
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &start in &starts {
        let mut order = nearest_neighbor(&d, start);
        local_search(&d, &mut order);
        let len = order_length(&d, &order);
        if best.as_ref().map_or(true, |(bl, _)| len < *bl - 1e-12) {
            best = Some((len, order));
        }
    }
    let (_, order) = best.expect("at least one start");
    // Rotate so the anchor point leads.
    let at = order.iter().position(|&k| k == 0).unwrap();
    let order: Vec<usize> = order[at..].iter().chain(order[..at].iter()).copied().collect();
    let waypoints: Vec<Point> = order.iter().map(|&k| points[k]).collect();
    let length = cycle_length(&waypoints);
    Tour { waypoints, length }
}

fn nearest_neighbor(d: &[Vec<f64>], start: usize) -> Vec<usize> {
    let n = d.len();
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    order.push(start);
    used[start] = true;
    for _ in 1..n {
        let last = *order.last().unwrap();
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| d[last][a].partial_cmp(&d[last][b]).unwrap().then(a.cmp(&b)))
            .unwrap();
        order.push(next);
        used[next] = true;
    }
    order
}

fn order_length(d: &[Vec<f64>], order: &[usize]) -> f64 {
    (0..order.len())
        .map(|k| d[order[k]][order[(k + 1) % order.len()]])
        .sum()
}

fn local_search(d: &[Vec<f64>], order: &mut Vec<usize>) {
    loop {
        let improved_2opt = two_opt_sweep(d, order);
        let improved_oropt = or_opt_sweep(d, order);
        if !improved_2opt && !improved_oropt {
            break;
        }
    }
}

fn two_opt_sweep(d: &[Vec<f64>], order: &mut [usize]) -> bool {
    let n = order.len();
    let mut improved_any = false;
    let mut improved = true;
    while improved {
        improved = false;
        for a in 0..n - 1 {
            for b in a + 2..n {
                if a == 0 && b == n - 1 {
                    continue;
                }
                let (i, j) = (order[a], order[a + 1]);
                let (k, l) = (order[b], order[(b + 1) % n]);
                if d[i][k] + d[j][l] < d[i][j] + d[k][l] - 1e-12 {
                    order[a + 1..=b].reverse();
                    improved = true;
                    improved_any = true;
                }
            }
        }
    }
    improved_any
}

/// Relocate segments of length 1..=3, optionally reversed, wherever the move
/// shortens the cycle.
fn or_opt_sweep(d: &[Vec<f64>], order: &mut Vec<usize>) -> bool {
    let mut improved_any = false;
    let mut improved = true;
    while improved {
        improved = false;
        'outer: for seg_len in 1..=3usize {
            let n = order.len();
            if n < seg_len + 3 {
                continue;
            }
            for a in 0..n {
                let before = order[(a + n - 1) % n];
                let after = order[(a + seg_len) % n];
                if (a + seg_len) % n == (a + n - 1) % n {
                    continue;
                }
                let seg: Vec<usize> = (0..seg_len).map(|t| order[(a + t) % n]).collect();
                let first = seg[0];
                let last = *seg.last().unwrap();
                let removal_gain = d[before][first] + d[last][after] - d[before][after];
                if removal_gain <= 1e-12 {
                    continue;
                }
                let rest: Vec<usize> = order.iter().copied().filter(|x| !seg.contains(x)).collect();
                let m = rest.len();
                for bpos in 0..m {
                    let u = rest[bpos];
                    let v = rest[(bpos + 1) % m];
                    if u == before && v == after {
                        continue;
                    }
                    for reversed in [false, true] {
                        let (s0, s1) = if reversed { (last, first) } else { (first, last) };
                        let add = d[u][s0] + d[s1][v] - d[u][v];
                        if add < removal_gain - 1e-12 {
                            let mut new_order = Vec::with_capacity(order.len());
                            new_order.extend_from_slice(&rest[..=bpos]);
                            if reversed {
                                new_order.extend(seg.iter().rev());
                            } else {
                                new_order.extend(seg.iter());
                            }
                            new_order.extend_from_slice(&rest[bpos + 1..]);
                            *order = new_order;
                            improved = true;
                            improved_any = true;
                            continue 'outer;
                        }
                    }
                }
            }
        }
    }
    improved_any
}

/// Whether no single 2-opt exchange shortens the tour (full sweep).
pub fn two_opt_stable(tour: &Tour) -> bool {
    let pts = &tour.waypoints;
    let n = pts.len();
    if n < 4 {
        return true;
    }
    for a in 0..n - 1 {
        for b in a + 2..n {
            if a == 0 && b == n - 1 {
                continue;
            }
            let (i, j) = (pts[a], pts[a + 1]);
            let (k, l) = (pts[b], pts[(b + 1) % n]);
            if distance(i, k) + distance(j, l) < distance(i, j) + distance(k, l) - 1e-12 {
                return false;
            }
        }
    }
    true
}
