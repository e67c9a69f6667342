//! MST + A* baseline.
//!
//! 1. Each net's pins are spanned by a Euclidean minimum spanning tree.
//! 2. Any tree edge touching an edge of another net's tree is pruned; the
//!    surviving forest gives each net one or more pin trees (islands).
//! 3. Nets are visited in a fixed order and their islands are joined by A*
//!    over a lattice of routing nodes. Routed paths block the lattice for
//!    every later net, so success depends on the visiting order.
//! 4. The final trees are sampled densely and every grid cell takes the net
//!    of its nearest sample (1-nearest-neighbor inflation).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{cell_center, cell_index, check_feasible, extra_islands, LabelGrid, NetId, Partition, Pin, Problem};

/// Integer lattice step costs. The diagonal cost rounds `1000 * sqrt(2)` up
/// so a straight-line heuristic in the same units stays admissible.
pub const ORTHOGONAL_COST: u64 = 1000;
pub const DIAGONAL_COST: u64 = 1415;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Segment {
    pub fn new(a: (f64, f64), b: (f64, f64)) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.a.0 - self.b.0).hypot(self.a.1 - self.b.1)
    }
}

/// An MST edge between two pins of the same net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub from: usize,
    pub to: usize,
    pub segment: Segment,
}

fn pin_point(p: &Pin) -> (f64, f64) {
    (p.x, p.y)
}

/// Kruskal's algorithm over the complete Euclidean graph on the pins.
/// Equal-length edges are taken in `(from, to)` order.
pub fn kruskal_mst(pins: &[Pin]) -> Vec<TreeEdge> {
    let n = pins.len();
    let mut candidates: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (pins[i].distance(&pins[j]), i, j))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut uf = UnionFind::<usize>::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            edges.push(TreeEdge {
                from: i,
                to: j,
                segment: Segment::new(pin_point(&pins[i]), pin_point(&pins[j])),
            });
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    edges
}

fn orientation(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> i8 {
    let v = (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0);
    match v.partial_cmp(&0.0) {
        Some(Ordering::Greater) => 1,
        Some(Ordering::Less) => -1,
        _ => 0,
    }
}

/// `r` lies within the bounding box of `p..q` (used once collinearity is known).
fn within_box(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> bool {
    r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
}

/// True iff the closed segments share a point: a proper crossing, a touching
/// endpoint, or a collinear overlap.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> bool {
    let (a, b, c, d) = (s1.a, s1.b, s2.a, s2.b);
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && within_box(a, b, c))
        || (o2 == 0 && within_box(a, b, d))
        || (o3 == 0 && within_box(c, d, a))
        || (o4 == 0 && within_box(c, d, b))
}

/// A connected group of one net's pins with the MST edges that join them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinTree {
    pub pins: Vec<usize>,
    pub edges: Vec<TreeEdge>,
}

/// Removes every MST edge that meets an edge of another net, judged against
/// the unpruned trees, and splits each net's forest into its components.
/// Trees are ordered by their smallest pin index.
pub fn prune_and_group(pin_counts: &[usize], msts: &[Vec<TreeEdge>]) -> Vec<Vec<PinTree>> {
    let keep: Vec<Vec<bool>> = msts
        .iter()
        .enumerate()
        .map(|(i, edges)| {
            edges
                .iter()
                .map(|e| {
                    !msts
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .any(|(_, other)| other.iter().any(|f| segments_intersect(&e.segment, &f.segment)))
                })
                .collect()
        })
        .collect();

    msts.iter()
        .zip(&keep)
        .zip(pin_counts)
        .map(|((edges, keep), &n)| {
            let mut uf = UnionFind::<usize>::new(n);
            for (e, &k) in edges.iter().zip(keep) {
                if k {
                    uf.union(e.from, e.to);
                }
            }
            let mut trees: Vec<PinTree> = Vec::new();
            let mut slot = vec![usize::MAX; n];
            for pin in 0..n {
                let root = uf.find(pin);
                if slot[root] == usize::MAX {
                    slot[root] = trees.len();
                    trees.push(PinTree {
                        pins: Vec::new(),
                        edges: Vec::new(),
                    });
                }
                trees[slot[root]].pins.push(pin);
            }
            for (e, &k) in edges.iter().zip(keep) {
                if k {
                    trees[slot[uf.find(e.from)]].edges.push(*e);
                }
            }
            trees
        })
        .collect()
}

/// Square lattice of routing nodes at cell centers with 8-neighbor moves.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingGraph {
    pub resolution: usize,
    pub blocked: Vec<bool>,
}

impl RoutingGraph {
    pub fn open(resolution: usize) -> Self {
        Self {
            resolution,
            blocked: vec![false; resolution * resolution],
        }
    }

    pub fn node(&self, row: usize, col: usize) -> usize {
        row * self.resolution + col
    }

    pub fn node_at(&self, x: f64, y: f64) -> usize {
        self.node(cell_index(y, self.resolution), cell_index(x, self.resolution))
    }

    pub fn position(&self, node: usize) -> (f64, f64) {
        let r = self.resolution;
        (cell_center(node % r, r), cell_center(node / r, r))
    }

    /// Traversable neighbors of an unblocked node with their step costs.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        let r = self.resolution as i64;
        let (row, col) = ((node as i64) / r, (node as i64) % r);
        let blocked_here = self.blocked[node];
        crate::model::neighbors8(row, col).filter_map(move |(nr, nc)| {
            if blocked_here || nr < 0 || nc < 0 || nr >= r || nc >= r {
                return None;
            }
            let n = (nr * r + nc) as usize;
            if self.blocked[n] {
                return None;
            }
            let cost = if nr != row && nc != col { DIAGONAL_COST } else { ORTHOGONAL_COST };
            Some((n, cost))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath {
    pub nodes: Vec<usize>,
    /// Sum of integer step costs.
    pub cost: u64,
}

/// Multi-source, multi-target A*. The heuristic is the straight-line distance
/// to the targets' bounding box in cost units, floored, which never exceeds
/// the true remaining cost. Blocked sources and targets are ignored.
pub fn astar(graph: &RoutingGraph, sources: &[usize], targets: &[usize]) -> Option<LatticePath> {
    let n = graph.resolution * graph.resolution;
    let mut is_target = vec![false; n];
    let (mut min_c, mut max_c, mut min_r, mut max_r) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &t in targets.iter().filter(|&&t| !graph.blocked[t]) {
        is_target[t] = true;
        let (c, row) = ((t % graph.resolution) as f64, (t / graph.resolution) as f64);
        min_c = min_c.min(c);
        max_c = max_c.max(c);
        min_r = min_r.min(row);
        max_r = max_r.max(row);
    }
    if !min_c.is_finite() {
        return None;
    }
    let heuristic = |node: usize| -> u64 {
        let (c, row) = ((node % graph.resolution) as f64, (node / graph.resolution) as f64);
        let dx = (min_c - c).max(c - max_c).max(0.0);
        let dy = (min_r - row).max(row - max_r).max(0.0);
        (dx.hypot(dy) * ORTHOGONAL_COST as f64).floor() as u64
    };

    let mut g = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    for &s in sources.iter().filter(|&&s| !graph.blocked[s]) {
        if g[s] != 0 {
            g[s] = 0;
            open.push(Reverse((heuristic(s), 0u64, s)));
        }
    }

    while let Some(Reverse((_, cost, node))) = open.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        if is_target[node] {
            let mut nodes = vec![node];
            let mut cur = node;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                nodes.push(cur);
            }
            nodes.reverse();
            return Some(LatticePath { nodes, cost });
        }
        for (next, step) in graph.neighbors(node) {
            let candidate = cost + step;
            if !closed[next] && candidate < g[next] {
                g[next] = candidate;
                parent[next] = node;
                open.push(Reverse((candidate + heuristic(next), candidate, next)));
            }
        }
    }
    None
}

/// Points sampled along a segment at no more than `spacing` apart, endpoints included.
fn sample_segment(s: &Segment, spacing: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    let steps = ((s.length() / spacing).ceil() as usize).max(1);
    (0..=steps).map(move |i| {
        let t = i as f64 / steps as f64;
        (s.a.0 + t * (s.b.0 - s.a.0), s.a.1 + t * (s.b.1 - s.a.1))
    })
}

/// A finished tree: pins plus every segment (MST edges and routed paths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedTree {
    pub pins: Vec<(f64, f64)>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRouting {
    pub net_id: NetId,
    pub initial_islands: usize,
    pub connected_pairs: usize,
    pub failed_pairs: usize,
    pub trees: Vec<RoutedTree>,
}

/// Net order for island connection: most pins first, then lowest id.
pub fn net_order(problem: &Problem) -> Vec<NetId> {
    let mut ids: Vec<NetId> = problem.nets.iter().map(|n| n.id).collect();
    ids.sort_by_key(|&id| (Reverse(problem.net(id).pin_count()), id));
    ids
}

fn rasterize(graph: &RoutingGraph, pins: &[(f64, f64)], segments: &[Segment], occupied: &mut [bool]) -> Vec<usize> {
    let spacing = 0.5 / graph.resolution as f64;
    let mut nodes: Vec<usize> = pins.iter().map(|&(x, y)| graph.node_at(x, y)).collect();
    for s in segments {
        nodes.extend(sample_segment(s, spacing).map(|(x, y)| graph.node_at(x, y)));
    }
    nodes.sort_unstable();
    nodes.dedup();
    for &n in &nodes {
        occupied[n] = true;
    }
    nodes
}

/// Blocks every node within one lattice step of another net's copper,
/// except the routing net's own nodes.
fn blocked_for(graph_res: usize, net: usize, occupancy: &[Vec<bool>]) -> Vec<bool> {
    let n = graph_res * graph_res;
    let mut other = vec![false; n];
    for (j, occ) in occupancy.iter().enumerate() {
        if j != net {
            for (o, &v) in other.iter_mut().zip(occ) {
                *o |= v;
            }
        }
    }
    let r = graph_res as i64;
    let mut blocked = vec![false; n];
    for node in 0..n {
        if !other[node] {
            continue;
        }
        let (row, col) = (node as i64 / r, node as i64 % r);
        blocked[node] = true;
        for (nr, nc) in crate::model::neighbors8(row, col) {
            if nr >= 0 && nc >= 0 && nr < r && nc < r {
                blocked[(nr * r + nc) as usize] = true;
            }
        }
    }
    for (b, &own) in blocked.iter_mut().zip(&occupancy[net]) {
        if own {
            *b = false;
        }
    }
    blocked
}

fn min_node_distance(graph: &RoutingGraph, a: &[usize], b: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for &x in a {
        let pa = graph.position(x);
        for &y in b {
            let pb = graph.position(y);
            best = best.min((pa.0 - pb.0).hypot(pa.1 - pb.1));
        }
    }
    best
}

/// Joins each net's pin trees with A* paths, nets in [`net_order`], island
/// pairs by nearest remaining tree to the growing component (which starts at
/// the tree with the most pins). Pairs that cannot be routed stay split.
pub fn connect_islands(problem: &Problem, trees: &[Vec<PinTree>], graph_resolution: usize) -> Vec<NetRouting> {
    let m = problem.net_count();
    let graph_template = RoutingGraph::open(graph_resolution);
    let mut occupancy = vec![vec![false; graph_resolution * graph_resolution]; m];

    // geometry and lattice footprint of every initial tree
    let mut geometry: Vec<Vec<RoutedTree>> = Vec::with_capacity(m);
    let mut footprints: Vec<Vec<Vec<usize>>> = Vec::with_capacity(m);
    for (net, net_trees) in problem.nets.iter().zip(trees) {
        let mut geo = Vec::new();
        let mut fps = Vec::new();
        for t in net_trees {
            let tree = RoutedTree {
                pins: t.pins.iter().map(|&p| pin_point(&net.pins[p])).collect(),
                segments: t.edges.iter().map(|e| e.segment).collect(),
            };
            fps.push(rasterize(&graph_template, &tree.pins, &tree.segments, &mut occupancy[net.id as usize - 1]));
            geo.push(tree);
        }
        geometry.push(geo);
        footprints.push(fps);
    }

    let mut routings: Vec<Option<NetRouting>> = vec![None; m];
    for id in net_order(problem) {
        let ni = id as usize - 1;
        let net_trees = &geometry[ni];
        let initial_islands = net_trees.len();
        let mut graph = RoutingGraph {
            resolution: graph_resolution,
            blocked: blocked_for(graph_resolution, ni, &occupancy),
        };

        let start = (0..initial_islands)
            .max_by_key(|&t| (net_trees[t].pins.len(), Reverse(t)))
            .expect("every net has at least one tree");
        let mut component_nodes = footprints[ni][start].clone();
        let mut component = net_trees[start].clone();
        let mut remaining: Vec<usize> = (0..initial_islands).filter(|&t| t != start).collect();
        let mut unconnected = Vec::new();
        let (mut connected_pairs, mut failed_pairs) = (0, 0);

        while !remaining.is_empty() {
            let (pos, &next) = remaining
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = min_node_distance(&graph, &component_nodes, &footprints[ni][*a.1]);
                    let db = min_node_distance(&graph, &component_nodes, &footprints[ni][*b.1]);
                    da.total_cmp(&db).then(a.1.cmp(b.1))
                })
                .expect("non-empty");
            remaining.remove(pos);

            match astar(&graph, &component_nodes, &footprints[ni][next]) {
                Some(path) => {
                    connected_pairs += 1;
                    let points: Vec<(f64, f64)> = path.nodes.iter().map(|&n| graph.position(n)).collect();
                    for w in points.windows(2) {
                        component.segments.push(Segment::new(w[0], w[1]));
                    }
                    if points.len() == 1 {
                        component.pins.push(points[0]);
                    }
                    for &n in &path.nodes {
                        occupancy[ni][n] = true;
                        graph.blocked[n] = false;
                    }
                    component_nodes.extend(path.nodes.iter().copied());
                    component_nodes.extend(footprints[ni][next].iter().copied());
                    component_nodes.sort_unstable();
                    component_nodes.dedup();
                    component.pins.extend(net_trees[next].pins.iter().copied());
                    component.segments.extend(net_trees[next].segments.iter().copied());
                }
                None => {
                    failed_pairs += 1;
                    unconnected.push(net_trees[next].clone());
                }
            }
        }

        let mut final_trees = vec![component];
        final_trees.extend(unconnected);
        routings[ni] = Some(NetRouting {
            net_id: id,
            initial_islands,
            connected_pairs,
            failed_pairs,
            trees: final_trees,
        });
    }
    routings.into_iter().map(|r| r.expect("every net routed")).collect()
}

/// Labels every cell center with the net of its nearest tree sample; samples
/// sit at most half a cell apart along every segment and at every pin.
/// Ties go to the lowest net id.
pub fn inflate_knn(trees: &[Vec<RoutedTree>], resolution: usize) -> LabelGrid {
    let samples = tree_samples(trees, resolution);
    let res = resolution;
    // bucket samples by grid cell for ring search
    let mut buckets: Vec<Vec<(f64, f64, NetId)>> = vec![Vec::new(); res * res];
    for &(x, y, net) in &samples {
        buckets[cell_index(y, res) * res + cell_index(x, res)].push((x, y, net));
    }
    let cell = 1.0 / res as f64;

    LabelGrid::from_fn(res, |row, col| {
        let (cx, cy) = (cell_center(col, res), cell_center(row, res));
        let mut best: Option<(f64, NetId)> = None;
        for ring in 0..=res {
            let (r0, r1) = (row as i64 - ring as i64, row as i64 + ring as i64);
            let (c0, c1) = (col as i64 - ring as i64, col as i64 + ring as i64);
            for br in r0.max(0)..=r1.min(res as i64 - 1) {
                for bc in c0.max(0)..=c1.min(res as i64 - 1) {
                    let on_ring = br == r0 || br == r1 || bc == c0 || bc == c1;
                    if !on_ring {
                        continue;
                    }
                    for &(x, y, net) in &buckets[br as usize * res + bc as usize] {
                        let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                        let better = match best {
                            None => true,
                            Some((bd, bn)) => d2 < bd || (d2 == bd && net < bn),
                        };
                        if better {
                            best = Some((d2, net));
                        }
                    }
                }
            }
            // anything outside this ring is at least (ring + 0.5) cells away
            if let Some((bd, _)) = best {
                let bound = (ring as f64 + 0.5) * cell;
                if bd < bound * bound {
                    break;
                }
            }
        }
        best.map_or(1, |(_, net)| net)
    })
}

/// Every sample point used by [`inflate_knn`], tagged with its net.
pub fn tree_samples(trees: &[Vec<RoutedTree>], resolution: usize) -> Vec<(f64, f64, NetId)> {
    let spacing = 0.5 / resolution as f64;
    let mut samples = Vec::new();
    for (i, net_trees) in trees.iter().enumerate() {
        let net = (i + 1) as NetId;
        for t in net_trees {
            samples.extend(t.pins.iter().map(|&(x, y)| (x, y, net)));
            for s in &t.segments {
                samples.extend(sample_segment(s, spacing).map(|(x, y)| (x, y, net)));
            }
        }
    }
    samples
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AstarOptions {
    /// Routing lattice resolution; `None` uses the problem grid.
    pub graph_resolution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstarResult {
    pub partition: Partition,
    pub routing: Vec<NetRouting>,
    pub ei: Option<usize>,
    pub feasible: bool,
    pub wall_time: f64,
}

/// Runs the full baseline pipeline on a problem.
pub fn solve_astar(problem: &Problem, options: &AstarOptions) -> Result<AstarResult> {
    let start = Instant::now();
    let graph_resolution = options.graph_resolution.unwrap_or(problem.grid_resolution);
    let msts: Vec<Vec<TreeEdge>> = problem.nets.iter().map(|n| kruskal_mst(&n.pins)).collect();
    let counts: Vec<usize> = problem.nets.iter().map(|n| n.pin_count()).collect();
    let trees = prune_and_group(&counts, &msts);
    let routing = connect_islands(problem, &trees, graph_resolution);
    let final_trees: Vec<Vec<RoutedTree>> = routing.iter().map(|r| r.trees.clone()).collect();
    let grid = inflate_knn(&final_trees, problem.grid_resolution);
    let partition = Partition::new(grid, problem.net_count());
    let feasible = check_feasible(problem, &partition.grid)?.is_feasible();
    let ei = extra_islands(&partition, problem.net_count()).ok();
    Ok(AstarResult {
        partition,
        routing,
        ei,
        feasible,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
