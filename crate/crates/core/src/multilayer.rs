//! Layer assignment for boards with more nets than one plane layer can hold.
//!
//! Nets are compared pairwise by Hausdorff or earth mover's distance over
//! their pins, then clustered agglomeratively on the *inverse* distance, so
//! the nets farthest apart (least likely to fight over space) share a layer
//! first. Cutting the dendrogram at `K` clusters gives a `K`-layer
//! assignment; each layer is then solved independently with GOMLP. Without
//! a fixed `K`, the search climbs `K = 1, 2, ...` until every layer is free
//! of extra islands and reports that `K` as the minimum close design layer
//! count (MCDL).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genopt::{derive_seed, GaConfig};
use crate::gomlp::{self, GomlpResult, SolveOptions};
use crate::model::{NetId, Pin, Problem};
use crate::neural::TrainConfig;

const STREAM_LAYER: u64 = 0x1a7e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Hausdorff,
    EarthMover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Average,
    Single,
    Complete,
}

/// Symmetric Hausdorff distance between two pin sets.
pub fn hausdorff_distance(a: &[Pin], b: &[Pin]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(from: &[Pin], to: &[Pin]) -> f64 {
    from.iter()
        .map(|p| to.iter().map(|q| p.distance(q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Earth mover's distance between two pin sets.
///
/// Each pin of a set carries mass `1/|set|` and the optimal transport cost is
/// scaled by `max(|a|, |b|)`, so for equal sizes the result is exactly the
/// cost of the cheapest one-to-one matching.
pub fn earth_mover_distance(a: &[Pin], b: &[Pin]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (n, p) = (a.len(), b.len());
    let cost: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| x.distance(y)).collect()).collect();
    // Integer masses: every pin of `a` supplies |b| units, every pin of `b`
    // absorbs |a| units; the total |a|·|b| corresponds to unit mass.
    let total = transport(&cost, p as u64, n as u64);
    total / (n * p) as f64 * n.max(p) as f64
}

/// Min-cost transportation on a complete bipartite graph where every source
/// supplies `supply` units and every sink demands `demand` units, solved by
/// successive shortest augmenting paths with Bellman-Ford on the residual.
fn transport(cost: &[Vec<f64>], supply: u64, demand: u64) -> f64 {
    let n = cost.len();
    let p = cost[0].len();
    let mut flow = vec![vec![0u64; p]; n];
    let mut left = vec![supply; n];
    let mut need = vec![demand; p];
    let nodes = n + p;
    loop {
        // Shortest path from any source with supply left to any sink with
        // demand left. Forward arcs i -> n+j cost c; backward arcs with flow
        // cost -c.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        for i in 0..n {
            if left[i] > 0 {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..n {
                for j in 0..p {
                    let (u, v) = (i, n + j);
                    if dist[u].is_finite() && dist[u] + cost[i][j] < dist[v] - 1e-15 {
                        dist[v] = dist[u] + cost[i][j];
                        prev[v] = u;
                        changed = true;
                    }
                    if flow[i][j] > 0 && dist[v].is_finite() && dist[v] - cost[i][j] < dist[u] - 1e-15 {
                        dist[u] = dist[v] - cost[i][j];
                        prev[u] = v;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let Some(sink) = (0..p)
            .filter(|&j| need[j] > 0 && dist[n + j].is_finite())
            .min_by(|&x, &y| dist[n + x].total_cmp(&dist[n + y]).then(x.cmp(&y)))
            .map(|j| n + j)
        else {
            break;
        };

        let mut path = vec![sink];
        let mut v = sink;
        while prev[v] != usize::MAX {
            v = prev[v];
            path.push(v);
        }
        path.reverse();
        let source = path[0];
        let mut amount = left[source].min(need[sink - n]);
        for w in path.windows(2) {
            if w[0] >= n {
                amount = amount.min(flow[w[1]][w[0] - n]);
            }
        }
        for w in path.windows(2) {
            if w[0] < n {
                flow[w[0]][w[1] - n] += amount;
            } else {
                flow[w[1]][w[0] - n] -= amount;
            }
        }
        left[source] -= amount;
        need[sink - n] -= amount;
    }
    flow.iter()
        .zip(cost)
        .flat_map(|(f, c)| f.iter().zip(c).map(|(&f, &c)| f as f64 * c))
        .sum()
}

/// Pairwise net distances, indexed by zero-based net position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDistanceMatrix {
    pub metric: DistanceMetric,
    pub net_ids: Vec<NetId>,
    pub values: Vec<Vec<f64>>,
}

impl NetDistanceMatrix {
    pub fn compute(problem: &Problem, metric: DistanceMetric) -> Self {
        let m = problem.net_count();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
        let distances: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&problem.nets[i].pins, &problem.nets[j].pins);
                match metric {
                    DistanceMetric::Hausdorff => hausdorff_distance(a, b),
                    DistanceMetric::EarthMover => earth_mover_distance(a, b),
                }
            })
            .collect();
        let mut values = vec![vec![0.0; m]; m];
        for (&(i, j), d) in pairs.iter().zip(distances) {
            values[i][j] = d;
            values[j][i] = d;
        }
        Self {
            metric,
            net_ids: problem.nets.iter().map(|n| n.id).collect(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let m = self.values.len();
        if self.net_ids.len() != m || self.values.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidDistanceMatrix("matrix must be square with one id per row".into()));
        }
        for i in 0..m {
            if self.values[i][i] != 0.0 {
                return Err(Error::InvalidDistanceMatrix(format!("diagonal entry {i} is not zero")));
            }
            for j in (i + 1)..m {
                let d = self.values[i][j];
                if d != self.values[j][i] || !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidDistanceMatrix(format!("entry ({i}, {j}) is not a finite symmetric distance")));
                }
                if d == 0.0 {
                    return Err(Error::CoincidentNets(self.net_ids[i], self.net_ids[j]));
                }
            }
        }
        Ok(())
    }
}

/// One agglomeration step. Clusters are numbered like the leaves `0..m`
/// followed by `m + step` for the cluster created at each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Linkage dissimilarity (inverse-distance space) at which the merge happened.
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<NetId>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
}

impl Dendrogram {
    /// Net ids under each cluster id (leaves first, then merged clusters).
    pub fn cluster_members(&self) -> Vec<Vec<NetId>> {
        let mut members: Vec<Vec<NetId>> = self.leaves.iter().map(|&id| vec![id]).collect();
        for merge in &self.merges {
            let mut joined = members[merge.a].clone();
            joined.extend_from_slice(&members[merge.b]);
            joined.sort_unstable();
            members.push(joined);
        }
        members
    }
}

/// Agglomerative clustering on `1 / distance`. The pair with the smallest
/// linkage dissimilarity merges first; ties go to the lowest cluster ids.
pub fn cluster(distances: &NetDistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    distances.validate()?;
    let m = distances.len();
    if m == 0 {
        return Err(Error::NoNets);
    }
    let inverse: Vec<Vec<f64>> = distances
        .values
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, &d)| if i == j { 0.0 } else { 1.0 / d }).collect())
        .collect();

    // Active clusters: id -> member leaf indices.
    let mut active: BTreeMap<usize, Vec<usize>> = (0..m).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(m.saturating_sub(1));
    let mut last_height = f64::NEG_INFINITY;
    for step in 0..m.saturating_sub(1) {
        let ids: Vec<usize> = active.keys().copied().collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in ids.iter().enumerate() {
            for &b in &ids[x + 1..] {
                let h = linkage_distance(&inverse, &active[&a], &active[&b], linkage);
                if best.map_or(true, |(bh, _, _)| h < bh) {
                    best = Some((h, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        let mut members = active.remove(&a).expect("active cluster");
        members.extend(active.remove(&b).expect("active cluster"));
        // Guard the non-decreasing height contract against rounding.
        let height = height.max(last_height);
        last_height = height;
        merges.push(Merge {
            a,
            b,
            height,
            size: members.len(),
        });
        active.insert(m + step, members);
    }
    Ok(Dendrogram {
        leaves: distances.net_ids.clone(),
        merges,
        linkage,
    })
}

fn linkage_distance(d: &[Vec<f64>], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| d[i][j]));
    match linkage {
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAssignment {
    /// `layers[l]` holds the net ids of layer `l + 1`, ascending.
    pub layers: Vec<Vec<NetId>>,
}

impl LayerAssignment {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// 1-based layer of a net.
    pub fn layer_of(&self, net: NetId) -> Option<usize> {
        self.layers.iter().position(|l| l.contains(&net)).map(|i| i + 1)
    }
}

/// Cuts the dendrogram into exactly `k` clusters by replaying only the first
/// `m - k` merges. Layers are ordered by their smallest net id.
pub fn assign_layers(dendrogram: &Dendrogram, k: usize) -> Result<LayerAssignment> {
    let m = dendrogram.leaves.len();
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!("layer count must lie in 1..={m}, got {k}")));
    }
    let members = dendrogram.cluster_members();
    let mut alive: Vec<bool> = vec![true; m];
    for merge in &dendrogram.merges[..m - k] {
        alive[merge.a] = false;
        alive[merge.b] = false;
        alive.push(true);
    }
    let mut layers: Vec<Vec<NetId>> = alive
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(id, _)| members[id].clone())
        .collect();
    layers.sort_by_key(|l| l[0]);
    Ok(LayerAssignment { layers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilayerOptions {
    pub metric: DistanceMetric,
    pub linkage: Linkage,
    /// Fixed layer count; `None` searches for the MCDL.
    pub layers: Option<usize>,
    /// Wall-clock cap on the whole MCDL search (per-layer budgets still apply).
    pub search_budget: Option<Duration>,
}

impl Default for MultilayerOptions {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::Hausdorff,
            linkage: Linkage::Average,
            layers: None,
            search_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer: usize,
    /// Original net ids; net `i + 1` of the layer's subproblem is `nets[i]`.
    pub nets: Vec<NetId>,
    pub rng_seed: u64,
    pub result: GomlpResult,
}

impl LayerResult {
    pub fn is_desirable(&self) -> bool {
        self.result.feasible && self.result.ei == Some(0)
    }
}

/// Every layer of one `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAttempt {
    pub layer_count: usize,
    pub assignment: LayerAssignment,
    pub layers: Vec<LayerResult>,
}

impl LayerAttempt {
    pub fn all_desirable(&self) -> bool {
        self.layers.iter().all(LayerResult::is_desirable)
    }

    /// Sum of per-layer extra islands; a vanished net counts as `usize::MAX`.
    pub fn total_ei(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.result.ei.unwrap_or(usize::MAX))
            .fold(0usize, usize::saturating_add)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilayerResult {
    pub distances: NetDistanceMatrix,
    pub dendrogram: Dendrogram,
    /// Attempts in the order run: one for a fixed `K`, ascending `K` otherwise.
    pub attempts: Vec<LayerAttempt>,
    /// Smallest `K` whose layers all reached zero extra islands; `None` when a
    /// fixed `K` was requested or the search ran out of budget first.
    pub mcdl: Option<usize>,
    /// The attempt with the fewest total extra islands (earliest on ties).
    pub best_layer_count: usize,
    pub wall_time: f64,
}

/// Solves every layer of one assignment concurrently.
pub fn solve_layers(
    problem: &Problem,
    assignment: &LayerAssignment,
    ga: &GaConfig,
    train: &TrainConfig,
    options: &SolveOptions,
) -> Result<Vec<LayerResult>> {
    let k = assignment.layer_count() as u64;
    let inner = SolveOptions {
        workers: 0,
        ..options.clone()
    };
    assignment
        .layers
        .par_iter()
        .enumerate()
        .map(|(l, nets)| {
            let sub = problem.subproblem(nets);
            let seed = derive_seed(ga.rng_seed, &[STREAM_LAYER, k, l as u64]);
            let layer_ga = GaConfig {
                rng_seed: seed,
                ..ga.clone()
            };
            gomlp::solve(&sub, &layer_ga, train, &inner).map(|result| LayerResult {
                layer: l + 1,
                nets: nets.clone(),
                rng_seed: seed,
                result,
            })
        })
        .collect()
}

pub fn solve_multilayer(
    problem: &Problem,
    options: &MultilayerOptions,
    ga: &GaConfig,
    train: &TrainConfig,
    solve_options: &SolveOptions,
) -> Result<MultilayerResult> {
    ga.validate()?;
    train.validate()?;
    let start = Instant::now();
    let m = problem.net_count();
    if let Some(k) = options.layers {
        if k == 0 || k > m {
            return Err(Error::InvalidConfig(format!("layer count must lie in 1..={m}, got {k}")));
        }
    }
    let body = || -> Result<MultilayerResult> {
        let distances = NetDistanceMatrix::compute(problem, options.metric);
        let dendrogram = cluster(&distances, options.linkage)?;
        let mut attempts = Vec::new();
        let mut mcdl = None;
        let ks: Vec<usize> = match options.layers {
            Some(k) => vec![k],
            None => (1..=m).collect(),
        };
        for k in ks {
            if let (Some(budget), false) = (options.search_budget, attempts.is_empty()) {
                if start.elapsed() >= budget {
                    break;
                }
            }
            let assignment = assign_layers(&dendrogram, k)?;
            let layers = solve_layers(problem, &assignment, ga, train, solve_options)?;
            let attempt = LayerAttempt {
                layer_count: k,
                assignment,
                layers,
            };
            let done = attempt.all_desirable();
            attempts.push(attempt);
            if done && options.layers.is_none() {
                mcdl = Some(k);
                break;
            }
        }
        let best_layer_count = attempts
            .iter()
            .min_by_key(|a| (a.total_ei(), a.layer_count))
            .map(|a| a.layer_count)
            .expect("at least one attempt runs");
        Ok(MultilayerResult {
            distances,
            dendrogram,
            attempts,
            mcdl,
            best_layer_count,
            wall_time: start.elapsed().as_secs_f64(),
        })
    };
    if solve_options.workers == 0 {
        return body();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(solve_options.workers).build() {
        Ok(pool) => pool.install(body),
        Err(_) => body(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_problem, BoardExtent, RawNet};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pins(points: &[(f64, f64)]) -> Vec<Pin> {
        points.iter().map(|&(x, y)| Pin { x, y }).collect()
    }

    fn random_pins(rng: &mut impl Rng, n: usize) -> Vec<Pin> {
        (0..n).map(|_| Pin { x: rng.gen(), y: rng.gen() }).collect()
    }

    fn matrix(values: Vec<Vec<f64>>) -> NetDistanceMatrix {
        NetDistanceMatrix {
            metric: DistanceMetric::Hausdorff,
            net_ids: (1..=values.len() as NetId).collect(),
            values,
        }
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_distance(&pins(&[(0.0, 0.0)]), &pins(&[(3.0, 4.0)])), 5.0);
        let a = pins(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = pins(&[(0.0, 0.0)]);
        assert_eq!(directed_hausdorff(&a, &b), 1.0);
        assert_eq!(directed_hausdorff(&b, &a), 0.0);
        assert_eq!(hausdorff_distance(&a, &b), 1.0);
    }

    #[test]
    fn emd_examples() {
        let a = pins(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = pins(&[(0.0, 1.0), (1.0, 1.0)]);
        assert_relative_eq!(earth_mover_distance(&a, &b), 2.0, max_relative = 1e-12);
        assert_eq!(earth_mover_distance(&a, &a), 0.0);
    }

    #[test]
    fn emd_unequal_sizes_spreads_mass() {
        // one pin against two: half of the mass goes to each, scaled by 2
        let a = pins(&[(0.0, 0.0)]);
        let b = pins(&[(1.0, 0.0), (0.0, 2.0)]);
        assert_relative_eq!(earth_mover_distance(&a, &b), 3.0, max_relative = 1e-12);
        assert_relative_eq!(earth_mover_distance(&b, &a), 3.0, max_relative = 1e-12);
    }

    fn brute_force_matching(a: &[Pin], b: &[Pin]) -> f64 {
        fn go(a: &[Pin], b: &[Pin], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
            if i == a.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    go(a, b, used, i + 1, acc + a[i].distance(&b[j]), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
        best
    }

    #[test]
    fn emd_matches_brute_force_on_equal_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.gen_range(1..=6);
            let a = random_pins(&mut rng, n);
            let b = random_pins(&mut rng, n);
            let want = brute_force_matching(&a, &b);
            assert_relative_eq!(earth_mover_distance(&a, &b), want, max_relative = 1e-9);
            assert_relative_eq!(earth_mover_distance(&b, &a), want, max_relative = 1e-9);
        }
    }

    #[test]
    fn hausdorff_is_a_metric_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let sets: Vec<Vec<Pin>> = (0..3)
                .map(|_| {
                    let n = rng.gen_range(1..=8);
                    random_pins(&mut rng, n)
                })
                .collect();
            let d = |i: usize, j: usize| hausdorff_distance(&sets[i], &sets[j]);
            assert_eq!(d(0, 1), d(1, 0));
            assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        }
    }

    #[test]
    fn three_net_example_merges_farthest_pair_first() {
        // AB = 10, AC = 5, BC = 2
        let d = matrix(vec![vec![0.0, 10.0, 5.0], vec![10.0, 0.0, 2.0], vec![5.0, 2.0, 0.0]]);
        let dendro = cluster(&d, Linkage::Average).unwrap();
        assert_eq!((dendro.merges[0].a, dendro.merges[0].b), (0, 1));
        assert_relative_eq!(dendro.merges[0].height, 0.1);
        // then {A,B} with C: mean(1/5, 1/2)
        assert_eq!((dendro.merges[1].a, dendro.merges[1].b), (2, 3));
        assert_relative_eq!(dendro.merges[1].height, 0.35);
    }

    #[test]
    fn linkages_differ_only_after_the_first_merge() {
        let d = matrix(vec![vec![0.0, 10.0, 5.0], vec![10.0, 0.0, 2.0], vec![5.0, 2.0, 0.0]]);
        let single = cluster(&d, Linkage::Single).unwrap();
        let complete = cluster(&d, Linkage::Complete).unwrap();
        assert_relative_eq!(single.merges[1].height, 0.2);
        assert_relative_eq!(complete.merges[1].height, 0.5);
    }

    #[test]
    fn coincident_nets_are_rejected() {
        let d = matrix(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(cluster(&d, Linkage::Average), Err(Error::CoincidentNets(1, 2))));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let d = matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        assert!(matches!(cluster(&d, Linkage::Average), Err(Error::InvalidDistanceMatrix(_))));
    }

    fn random_matrix(rng: &mut impl Rng, m: usize) -> NetDistanceMatrix {
        let mut values = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = rng.gen_range(0.01..2.0);
                values[i][j] = d;
                values[j][i] = d;
            }
        }
        matrix(values)
    }

    #[test]
    fn heights_are_monotone_and_merge_count_is_m_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for linkage in [Linkage::Average, Linkage::Single, Linkage::Complete] {
            for _ in 0..50 {
                let m = rng.gen_range(1..10);
                let dendro = cluster(&random_matrix(&mut rng, m), linkage).unwrap();
                assert_eq!(dendro.merges.len(), m - 1);
                assert!(dendro.merges.windows(2).all(|w| w[0].height <= w[1].height));
                if let Some(last) = dendro.merges.last() {
                    assert_eq!(last.size, m);
                }
            }
        }
    }

    #[test]
    fn layer_cuts_partition_and_nest() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let m = rng.gen_range(1..9);
            let dendro = cluster(&random_matrix(&mut rng, m), Linkage::Average).unwrap();
            let mut coarser: Option<LayerAssignment> = None;
            for k in 1..=m {
                let a = assign_layers(&dendro, k).unwrap();
                assert_eq!(a.layer_count(), k);
                let mut all: Vec<NetId> = a.layers.iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, (1..=m as NetId).collect::<Vec<_>>());
                assert!(a.layers.windows(2).all(|w| w[0][0] < w[1][0]));
                if let Some(c) = &coarser {
                    // every finer layer sits inside one coarser layer
                    for layer in &a.layers {
                        let parent = c.layer_of(layer[0]).unwrap();
                        assert!(layer.iter().all(|&n| c.layer_of(n) == Some(parent)));
                    }
                }
                coarser = Some(a);
            }
        }
    }

    #[test]
    fn extreme_cuts() {
        let d = matrix(vec![vec![0.0, 10.0, 5.0], vec![10.0, 0.0, 2.0], vec![5.0, 2.0, 0.0]]);
        let dendro = cluster(&d, Linkage::Average).unwrap();
        assert_eq!(assign_layers(&dendro, 3).unwrap().layers, vec![vec![1], vec![2], vec![3]]);
        assert_eq!(assign_layers(&dendro, 1).unwrap().layers, vec![vec![1, 2, 3]]);
        assert_eq!(assign_layers(&dendro, 2).unwrap().layers, vec![vec![1, 2], vec![3]]);
        assert!(assign_layers(&dendro, 0).is_err());
        assert!(assign_layers(&dendro, 4).is_err());
    }

    fn problem(nets: &[&[(f64, f64)]]) -> Problem {
        let raw: Vec<RawNet> = nets
            .iter()
            .enumerate()
            .map(|(i, p)| RawNet {
                label: format!("N{i}"),
                pins: p.iter().map(|&(x, y)| [x, y]).collect(),
            })
            .collect();
        normalize_problem(&raw, BoardExtent { width: 1.0, height: 1.0 }, 16).unwrap()
    }

    #[test]
    fn distance_matrix_is_symmetric_with_zero_diagonal() {
        let p = problem(&[&[(0.1, 0.1), (0.2, 0.1)], &[(0.9, 0.9)], &[(0.5, 0.5), (0.6, 0.4), (0.4, 0.6)]]);
        for metric in [DistanceMetric::Hausdorff, DistanceMetric::EarthMover] {
            let d = NetDistanceMatrix::compute(&p, metric);
            for i in 0..3 {
                assert_eq!(d.values[i][i], 0.0);
                for j in 0..3 {
                    assert_eq!(d.values[i][j], d.values[j][i]);
                }
            }
        }
    }

    #[test]
    fn one_layer_per_net_is_always_clean() {
        let p = problem(&[&[(0.1, 0.1), (0.9, 0.9)], &[(0.9, 0.1), (0.1, 0.9)], &[(0.5, 0.5)]]);
        let options = MultilayerOptions {
            layers: Some(3),
            ..Default::default()
        };
        let ga = GaConfig {
            population_size: 4,
            elite_size: 1,
            generations: 1,
            ..Default::default()
        };
        let r = solve_multilayer(&p, &options, &ga, &TrainConfig::default(), &SolveOptions::default()).unwrap();
        assert_eq!(r.attempts.len(), 1);
        assert!(r.attempts[0].all_desirable());
        assert_eq!(r.mcdl, None);
        for layer in &r.attempts[0].layers {
            assert_eq!(layer.nets.len(), 1);
            assert!(layer.result.early_success);
            assert_eq!(layer.result.generations_run, 0);
        }
    }

    #[test]
    fn fixed_layer_count_is_deterministic() {
        let p = problem(&[&[(0.1, 0.1), (0.3, 0.2)], &[(0.9, 0.1), (0.7, 0.2)], &[(0.5, 0.9), (0.5, 0.7)], &[(0.5, 0.5)]]);
        let options = MultilayerOptions {
            layers: Some(2),
            ..Default::default()
        };
        let ga = GaConfig {
            population_size: 4,
            elite_size: 1,
            generations: 1,
            ..Default::default()
        };
        let run = || solve_multilayer(&p, &options, &ga, &TrainConfig::default(), &SolveOptions::default()).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.attempts[0].assignment, b.attempts[0].assignment);
        for (x, y) in a.attempts[0].layers.iter().zip(&b.attempts[0].layers) {
            assert_eq!(x.result.best_partition, y.result.best_partition);
        }
    }
}
