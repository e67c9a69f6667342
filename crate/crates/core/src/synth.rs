//! Synthetic benchmark problems.
//!
//! Every net gets a home cluster of pins. With probability
//! `interleave_factor` a net is split: part of its pins move to a second
//! cluster placed on the far side of another net's home cluster, so any
//! single connected plane for it has to squeeze past that net.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genopt::derive_seed;
use crate::model::{normalize_problem, BoardExtent, Problem, RawNet};

/// Rejection-sampling attempts per problem before giving up.
pub const MAX_ATTEMPTS: usize = 200;

/// Keep-out margin from the board edge, as a fraction of the board.
const EDGE_MARGIN: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub net_count: usize,
    /// Inclusive pin-count range per net.
    pub pins_per_net: (usize, usize),
    /// Standard deviation of pins around their cluster center (unit board).
    pub cluster_spread: f64,
    pub interleave_factor: f64,
    pub board: BoardExtent,
    pub grid_resolution: usize,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            net_count: 5,
            pins_per_net: (2, 5),
            cluster_spread: 0.04,
            interleave_factor: 0.3,
            board: BoardExtent {
                width: 100.0,
                height: 100.0,
            },
            grid_resolution: 64,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=20).contains(&self.net_count) {
            return Err(Error::InvalidConfig(format!("net_count must lie in 2..=20, got {}", self.net_count)));
        }
        let (lo, hi) = self.pins_per_net;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig(format!("invalid pins_per_net range {lo}..={hi}")));
        }
        if !(0.0..=1.0).contains(&self.interleave_factor) {
            return Err(Error::InvalidConfig(format!(
                "interleave_factor must lie in [0, 1], got {}",
                self.interleave_factor
            )));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::InvalidConfig("cluster_spread must be positive".into()));
        }
        Ok(())
    }

    /// Two pins of different nets must sit at least this far apart so they
    /// never share (or touch) a grid cell.
    fn pin_separation(&self) -> f64 {
        2.0 / self.grid_resolution as f64
    }

    /// Minimum spacing between cluster centers.
    fn center_separation(&self) -> f64 {
        (0.6 / (self.net_count as f64).sqrt()).max(4.0 * self.cluster_spread)
    }
}

/// `count` problems, each drawn from its own seed stream.
pub fn generate_problems(spec: &SyntheticSpec, count: usize) -> Result<Vec<Problem>> {
    spec.validate()?;
    (0..count).map(|i| generate_one(spec, derive_seed(spec.rng_seed, &[i as u64]))).collect()
}

fn generate_one(spec: &SyntheticSpec, seed: u64) -> Result<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(nets) = try_layout(spec, &mut rng) {
            let raw: Vec<RawNet> = nets
                .into_iter()
                .enumerate()
                .map(|(i, pins)| RawNet {
                    label: net_label(i),
                    pins: pins
                        .into_iter()
                        .map(|(x, y)| [round_coord(x * spec.board.width), round_coord(y * spec.board.height)])
                        .collect(),
                })
                .collect();
            return normalize_problem(&raw, spec.board, spec.grid_resolution);
        }
    }
    Err(Error::GenerationStuck(MAX_ATTEMPTS))
}

/// `A`..`Z`, then `N27`, `N28`, ...
fn net_label(i: usize) -> String {
    if i < 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("N{}", i + 1)
    }
}

/// Physical coordinates are kept to 1e-3 units so files stay readable.
fn round_coord(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn inside(p: (f64, f64)) -> bool {
    (EDGE_MARGIN..=1.0 - EDGE_MARGIN).contains(&p.0) && (EDGE_MARGIN..=1.0 - EDGE_MARGIN).contains(&p.1)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn try_layout(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<(f64, f64)>>> {
    let m = spec.net_count;
    let sep = spec.center_separation();
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(m);
    for _ in 0..m {
        let c = (0..100)
            .map(|_| (rng.gen_range(0.12..0.88), rng.gen_range(0.12..0.88)))
            .find(|&c| centers.iter().all(|&o| dist(c, o) >= sep))?;
        centers.push(c);
    }

    // Split nets get a second center beyond some other net's home cluster.
    let mut secondary: Vec<Option<(f64, f64)>> = vec![None; m];
    for i in 0..m {
        if rng.gen::<f64>() >= spec.interleave_factor {
            continue;
        }
        let j = (i + rng.gen_range(1..m)) % m;
        let (a, b) = (centers[i], centers[j]);
        let reach = rng.gen_range(0.6..1.0);
        let s = (b.0 + (b.0 - a.0) * reach, b.1 + (b.1 - a.1) * reach);
        let s = (s.0.clamp(0.1, 0.9), s.1.clamp(0.1, 0.9));
        let crowded = centers
            .iter()
            .enumerate()
            .any(|(o, &c)| o != i && o != j && dist(c, s) < 0.5 * sep);
        if dist(s, b) >= 0.5 * sep && !crowded {
            secondary[i] = Some(s);
        }
    }

    let spread = Normal::new(0.0, spec.cluster_spread).expect("positive spread");
    let pin_sep = spec.pin_separation();
    let mut nets: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
    for i in 0..m {
        let (lo, hi) = spec.pins_per_net;
        let mut q = rng.gen_range(lo..=hi);
        if secondary[i].is_some() {
            q = q.max(2);
        }
        let split_at = secondary[i].map(|_| rng.gen_range(1..q));
        for p in 0..q {
            let center = match (split_at, secondary[i]) {
                (Some(cut), Some(s)) if p >= cut => s,
                _ => centers[i],
            };
            let pin = (0..50)
                .map(|_| (center.0 + spread.sample(rng), center.1 + spread.sample(rng)))
                .find(|&pin| {
                    inside(pin)
                        && nets
                            .iter()
                            .enumerate()
                            .all(|(o, pins)| pins.iter().all(|&q| dist(pin, q) >= if o == i { 1e-9 } else { pin_sep }))
                })?;
            nets[i].push(pin);
        }
    }
    Some(nets)
}
