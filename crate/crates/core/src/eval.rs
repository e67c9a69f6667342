//! Island extraction and the island-minimizing fitness.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::genopt::handle_count;
use crate::model::{cell_center, centroid_of, check_feasible, Island, LabelGrid, NetId, Partition, Problem};

/// Splits a label grid into the 8-connected components of each net.
///
/// Islands of a net are ordered by their first cell in raster order.
/// Labels must lie in `1..=net_count`.
pub fn extract_islands(grid: &LabelGrid, net_count: usize) -> Vec<Vec<Island>> {
    let r = grid.resolution;
    let n = r * r;
    let mut uf = UnionFind::<u32>::new(n);
    for row in 0..r {
        for col in 0..r {
            let idx = row * r + col;
            let label = grid.labels[idx];
            debug_assert!(label >= 1 && (label as usize) <= net_count, "label {label} out of range");
            if col > 0 && grid.labels[idx - 1] == label {
                uf.union(idx as u32, (idx - 1) as u32);
            }
            if row > 0 {
                let up = idx - r;
                if grid.labels[up] == label {
                    uf.union(idx as u32, up as u32);
                }
                if col > 0 && grid.labels[up - 1] == label {
                    uf.union(idx as u32, (up - 1) as u32);
                }
                if col + 1 < r && grid.labels[up + 1] == label {
                    uf.union(idx as u32, (up + 1) as u32);
                }
            }
        }
    }
    let roots = uf.into_labeling();

    // component slot per root, in order of first appearance
    let mut slot_of_root = vec![u32::MAX; n];
    let mut comps: Vec<(NetId, Vec<(u32, u32)>, Vec<(u32, u32)>)> = Vec::new();
    for row in 0..r {
        for col in 0..r {
            let idx = row * r + col;
            let root = roots[idx] as usize;
            if slot_of_root[root] == u32::MAX {
                slot_of_root[root] = comps.len() as u32;
                comps.push((grid.labels[idx], Vec::new(), Vec::new()));
            }
            let comp = &mut comps[slot_of_root[root] as usize];
            let cell = (row as u32, col as u32);
            comp.1.push(cell);
            let on_border = row == 0 || col == 0 || row + 1 == r || col + 1 == r;
            let exposed = on_border || {
                let (ri, ci) = (row as i64, col as i64);
                crate::model::neighbors8(ri, ci).any(|(nr, nc)| roots[nr as usize * r + nc as usize] != roots[idx])
            };
            if exposed {
                comp.2.push(cell);
            }
        }
    }

    let mut islands: Vec<Vec<Island>> = vec![Vec::new(); net_count];
    for (net_id, cells, boundary) in comps {
        let centroid = centroid_of(&cells, r);
        islands[net_id as usize - 1].push(Island {
            net_id,
            resolution: r,
            cells,
            centroid,
            boundary,
        });
    }
    islands
}

/// Minimum Euclidean distance between any two cell centers of the islands,
/// in normalized board units.
pub fn island_min_distance(a: &Island, b: &Island) -> f64 {
    let res = a.resolution;
    debug_assert_eq!(res, b.resolution);
    // nearest cells between disjoint sets lie on their boundaries; fall back
    // to all cells for islands built without boundary information
    let pa = if a.boundary.is_empty() { &a.cells } else { &a.boundary };
    let pb = if b.boundary.is_empty() { &b.cells } else { &b.boundary };
    let mut best = i64::MAX;
    for &(ra, ca) in pa {
        for &(rb, cb) in pb {
            let dr = ra as i64 - rb as i64;
            let dc = ca as i64 - cb as i64;
            let d2 = dr * dr + dc * dc;
            if d2 < best {
                best = d2;
            }
        }
    }
    (best as f64).sqrt() / res as f64
}

pub fn island_centroid_distance(a: &Island, b: &Island) -> f64 {
    (a.centroid.0 - b.centroid.0).hypot(a.centroid.1 - b.centroid.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessOptions {
    /// When false the total omits both distance terms.
    pub distance_terms: bool,
    pub min_distance_weight: f64,
    pub centroid_distance_weight: f64,
}

impl Default for FitnessOptions {
    fn default() -> Self {
        Self {
            distance_terms: true,
            min_distance_weight: 1.0,
            centroid_distance_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub f_island: f64,
    pub f_dmin: f64,
    pub f_dcent: f64,
    pub feasibility_penalty: f64,
    pub total: f64,
    pub misclassified_pins: usize,
}

/// Penalty charged per misclassified pin: `10 * (m + sqrt(2) * m * k)`.
pub fn feasibility_penalty_per_pin(problem: &Problem) -> f64 {
    let m = problem.net_count() as f64;
    let k = handle_count(problem) as f64;
    10.0 * (m + std::f64::consts::SQRT_2 * m * k)
}

/// Scores a partition; higher is better and `-m` is the best attainable.
pub fn fitness(problem: &Problem, partition: &Partition, options: &FitnessOptions) -> FitnessBreakdown {
    let f_island = -(partition.islands.iter().map(Vec::len).sum::<usize>() as f64);

    let (mut dmin, mut dcent) = (0.0, 0.0);
    if options.distance_terms {
        for net_islands in &partition.islands {
            for (a_idx, a) in net_islands.iter().enumerate() {
                for b in &net_islands[a_idx + 1..] {
                    dmin += island_min_distance(a, b);
                    dcent += island_centroid_distance(a, b);
                }
            }
        }
    }
    let f_dmin = -options.min_distance_weight * dmin;
    let f_dcent = -options.centroid_distance_weight * dcent;

    let misclassified_pins = check_feasible(problem, &partition.grid)
        .map(|r| r.misclassified_count())
        .unwrap_or_else(|_| problem.total_pins());
    let feasibility_penalty = -feasibility_penalty_per_pin(problem) * misclassified_pins as f64;

    FitnessBreakdown {
        f_island,
        f_dmin,
        f_dcent,
        feasibility_penalty,
        total: f_island + f_dmin + f_dcent + feasibility_penalty,
        misclassified_pins,
    }
}

/// Cell-center coordinates `(x, y)` of a `(row, col)` cell.
pub fn cell_point(cell: (u32, u32), resolution: usize) -> (f64, f64) {
    (cell_center(cell.1 as usize, resolution), cell_center(cell.0 as usize, resolution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_problem, BoardExtent, RawNet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn bfs_island_counts(grid: &LabelGrid, m: usize) -> Vec<usize> {
        let r = grid.resolution;
        let mut seen = vec![false; r * r];
        let mut counts = vec![0; m];
        for start in 0..r * r {
            if seen[start] {
                continue;
            }
            let label = grid.labels[start];
            counts[label as usize - 1] += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(cur) = queue.pop_front() {
                let (row, col) = ((cur / r) as i64, (cur % r) as i64);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (row + dr, col + dc);
                        if nr < 0 || nc < 0 || nr >= r as i64 || nc >= r as i64 {
                            continue;
                        }
                        let n = nr as usize * r + nc as usize;
                        if !seen[n] && grid.labels[n] == label {
                            seen[n] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        counts
    }

    fn brute_min_distance(a: &Island, b: &Island) -> f64 {
        let res = a.resolution;
        a.cells
            .iter()
            .flat_map(|&ca| b.cells.iter().map(move |&cb| (ca, cb)))
            .map(|(ca, cb)| {
                let (xa, ya) = cell_point(ca, res);
                let (xb, yb) = cell_point(cb, res);
                (xa - xb).hypot(ya - yb)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn uniform_grid_is_one_island() {
        let islands = extract_islands(&LabelGrid::uniform(10, 1), 1);
        assert_eq!(islands[0].len(), 1);
        assert_eq!(islands[0][0].len(), 100);
        assert_relative_eq!(islands[0][0].centroid.0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn strips_split_one_net() {
        let grid = LabelGrid::from_fn(10, |_, c| if c <= 1 || c >= 8 { 1 } else { 2 });
        let islands = extract_islands(&grid, 2);
        assert_eq!(islands.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn diagonal_touch_is_connected() {
        // checkerboard: every cell diagonally touches its own label
        let grid = LabelGrid::from_fn(6, |r, c| ((r + c) % 2) as NetId + 1);
        let islands = extract_islands(&grid, 2);
        assert_eq!(islands.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 1]);
    }

    #[test]
    fn matches_bfs_oracle_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = rng.gen_range(1..=32);
            let m = rng.gen_range(1..=4);
            let grid = LabelGrid::from_fn(r, |_, _| rng.gen_range(1..=m as NetId));
            let islands = extract_islands(&grid, m);
            let counts: Vec<usize> = islands.iter().map(Vec::len).collect();
            assert_eq!(counts, bfs_island_counts(&grid, m));
            let total: usize = islands.iter().flatten().map(Island::len).sum();
            assert_eq!(total, r * r);
            for island in islands.iter().flatten() {
                let rebuilt = Island::from_cells(island.net_id, island.cells.clone(), r);
                assert_eq!(rebuilt.boundary, island.boundary);
            }
        }
    }

    #[test]
    fn min_distance_examples() {
        let a = Island::from_cells(1, vec![(5, 5)], 100);
        let b = Island::from_cells(1, vec![(5, 6)], 100);
        assert_relative_eq!(island_min_distance(&a, &b), 0.01, epsilon = 1e-12);
        let c = Island::from_cells(1, vec![(0, 0)], 100);
        let d = Island::from_cells(1, vec![(3, 4)], 100);
        assert_relative_eq!(island_min_distance(&c, &d), 0.05, epsilon = 1e-12);
        assert_relative_eq!(island_centroid_distance(&c, &d), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn min_distance_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let r = rng.gen_range(8..=24);
            let m = rng.gen_range(2..=3);
            let grid = LabelGrid::from_fn(r, |_, _| rng.gen_range(1..=m as NetId));
            let islands: Vec<Island> = extract_islands(&grid, m).into_iter().flatten().collect();
            for i in 0..islands.len().min(6) {
                for j in (i + 1)..islands.len().min(6) {
                    let fast = island_min_distance(&islands[i], &islands[j]);
                    assert_relative_eq!(fast, brute_min_distance(&islands[i], &islands[j]), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn centroid_distance_identity_and_l_shape() {
        let l = vec![(0, 0), (1, 0), (2, 0), (2, 1)];
        let mirror = vec![(0, 9), (1, 9), (2, 9), (2, 8)];
        let a = Island::from_cells(1, l.clone(), 10);
        let b = Island::from_cells(1, mirror.clone(), 10);
        assert_eq!(island_centroid_distance(&a, &a), 0.0);
        // direct mean of cell centers
        let mean = |cells: &[(u32, u32)]| {
            let n = cells.len() as f64;
            let x: f64 = cells.iter().map(|&(_, c)| (c as f64 + 0.5) / 10.0).sum::<f64>() / n;
            let y: f64 = cells.iter().map(|&(r, _)| (r as f64 + 0.5) / 10.0).sum::<f64>() / n;
            (x, y)
        };
        let (ma, mb) = (mean(&l), mean(&mirror));
        assert_relative_eq!(island_centroid_distance(&a, &b), (ma.0 - mb.0).hypot(ma.1 - mb.1), epsilon = 1e-12);
        assert_relative_eq!(island_centroid_distance(&a, &b), 0.85, epsilon = 1e-12);
    }

    fn problem_from(nets: &[&[[f64; 2]]], res: usize) -> Problem {
        let raw: Vec<RawNet> = nets
            .iter()
            .enumerate()
            .map(|(i, p)| RawNet {
                label: format!("N{}", i + 1),
                pins: p.to_vec(),
            })
            .collect();
        normalize_problem(&raw, BoardExtent { width: 1.0, height: 1.0 }, res).unwrap()
    }

    #[test]
    fn feasible_single_islands_score_minus_m() {
        let p = problem_from(&[&[[0.1, 0.5]], &[[0.3, 0.5]], &[[0.5, 0.5]], &[[0.7, 0.5]], &[[0.9, 0.5]]], 20);
        let grid = LabelGrid::from_fn(20, |_, c| (c / 4) as NetId + 1);
        let f = fitness(&p, &Partition::new(grid, 5), &FitnessOptions::default());
        assert_eq!(f.total, -5.0);
        assert_eq!((f.f_dmin, f.f_dcent, f.feasibility_penalty), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_island_single_net_formula() {
        // a single-net grid is always uniform, so hand-build the islands
        let p = problem_from(&[&[[0.05, 0.05]]], 20);
        let a = Island::from_cells(1, vec![(0, 0)], 20);
        let b = Island::from_cells(1, vec![(0, 2)], 20);
        let dmin = island_min_distance(&a, &b);
        let dcent = island_centroid_distance(&a, &b);
        assert_relative_eq!(dmin, 0.1, epsilon = 1e-12);
        let part = Partition {
            grid: LabelGrid::uniform(20, 1),
            islands: vec![vec![a, b]],
        };
        let f = fitness(&p, &part, &FitnessOptions::default());
        assert_eq!(f.f_island, -2.0);
        assert_relative_eq!(f.f_dmin, -0.1, epsilon = 1e-12);
        assert_relative_eq!(f.f_dcent, -dcent, epsilon = 1e-12);
        assert_relative_eq!(f.total, -2.0 - 0.1 - dcent, epsilon = 1e-12);
    }

    #[test]
    fn min_and_centroid_terms_sum_like_the_formula() {
        // islands 0.1 apart at nearest, centroids 0.3 apart
        let p = problem_from(&[&[[0.025, 0.025]]], 20);
        // a: columns 0..=1 (centroid x = 0.05); b: columns 3..=10 (centroid x = 0.35)
        let a = Island::from_cells(1, vec![(0, 0), (0, 1)], 20);
        let b = Island::from_cells(1, (3..=10).map(|c| (0, c)).collect(), 20);
        assert_relative_eq!(island_min_distance(&a, &b), 0.1, epsilon = 1e-12);
        assert_relative_eq!(island_centroid_distance(&a, &b), 0.3, epsilon = 1e-12);
        let part = Partition {
            grid: LabelGrid::uniform(20, 1),
            islands: vec![vec![a, b]],
        };
        let f = fitness(&p, &part, &FitnessOptions::default());
        assert_eq!(f.f_island, -2.0);
        assert_relative_eq!(f.f_dmin, -0.1, epsilon = 1e-12);
        assert_relative_eq!(f.f_dcent, -0.3, epsilon = 1e-12);
        assert_relative_eq!(f.total, -2.4, epsilon = 1e-12);
    }

    #[test]
    fn disabled_distance_terms_are_exactly_zero() {
        let p = problem_from(&[&[[0.05, 0.5], [0.95, 0.5]], &[[0.5, 0.5]]], 20);
        let grid = LabelGrid::from_fn(20, |_, c| if (8..12).contains(&c) { 2 } else { 1 });
        let opts = FitnessOptions {
            distance_terms: false,
            ..Default::default()
        };
        let f = fitness(&p, &Partition::new(grid, 2), &opts);
        assert_eq!((f.f_dmin, f.f_dcent), (0.0, 0.0));
        assert_eq!(f.total, -3.0);
    }

    #[test]
    fn infeasible_ranks_below_feasible() {
        let p = problem_from(&[&[[0.1, 0.5]], &[[0.9, 0.5]]], 20);
        let good = LabelGrid::from_fn(20, |_, c| if c < 10 { 1 } else { 2 });
        let bad = LabelGrid::from_fn(20, |_, c| if c < 10 { 2 } else { 1 });
        let fg = fitness(&p, &Partition::new(good, 2), &FitnessOptions::default());
        let fb = fitness(&p, &Partition::new(bad, 2), &FitnessOptions::default());
        assert_eq!(fb.misclassified_pins, 2);
        assert!(fb.total < fg.total);
        assert_relative_eq!(fb.feasibility_penalty, -2.0 * feasibility_penalty_per_pin(&p));
    }

    #[test]
    fn connected_u_beats_split_plane() {
        // Net 1 pins at the two top corners of a U; net 2 fills the inside.
        let p = problem_from(&[&[[0.1, 0.9], [0.9, 0.9]], &[[0.5, 0.7]]], 20);
        let u = LabelGrid::from_fn(20, |r, c| if r >= 4 && (4..16).contains(&c) { 2 } else { 1 });
        let split = LabelGrid::from_fn(20, |_, c| if (4..16).contains(&c) { 2 } else { 1 });
        let opts = FitnessOptions::default();
        let fu = fitness(&p, &Partition::new(u, 2), &opts);
        let fs = fitness(&p, &Partition::new(split, 2), &opts);
        assert_eq!(fu.misclassified_pins, 0);
        assert_eq!(fs.misclassified_pins, 0);
        assert!(fu.total > fs.total);
    }
}
