//! Boards, nets, pins and the partitions every solver produces.
//!
//! Pins are stored both in physical board units (as ingested) and normalized
//! to the unit square. All geometry inside the solvers works on the
//! normalized coordinates; the physical ones are kept for output only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;

/// Net ids run from 1 to m within a problem.
pub type NetId = u32;

pub const MIN_GRID_RESOLUTION: usize = 16;
pub const DEFAULT_GRID_RESOLUTION: usize = 100;

/// A pin position normalized to `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub x: f64,
    pub y: f64,
}

impl Pin {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Pin) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Grid cell `(row, col)` containing this pin.
    pub fn cell(&self, resolution: usize) -> (usize, usize) {
        (cell_index(self.y, resolution), cell_index(self.x, resolution))
    }
}

/// Maps a normalized coordinate to its cell index; `1.0` lands in the last cell.
pub fn cell_index(coord: f64, resolution: usize) -> usize {
    let idx = (coord * resolution as f64).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(resolution - 1)
    }
}

/// Normalized coordinate of a cell center along one axis.
pub fn cell_center(index: usize, resolution: usize) -> f64 {
    (index as f64 + 0.5) / resolution as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub id: NetId,
    pub label: String,
    pub pins: Vec<Pin>,
    /// The same pins in physical board units.
    pub physical_pins: Vec<[f64; 2]>,
}

impl Net {
    pub fn pin_count(&self) -> usize {
        self.pins.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoardExtent {
    pub width: f64,
    pub height: f64,
}

/// A single-layer plane generation problem: a board plus m nets of fixed pins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub nets: Vec<Net>,
    pub board: BoardExtent,
    pub grid_resolution: usize,
}

/// One net's pins as ingested, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNet {
    pub label: String,
    pub pins: Vec<[f64; 2]>,
}

/// Validates raw nets and maps every pin affinely into the unit square.
///
/// Net ids are assigned 1..m in input order.
pub fn normalize_problem(
    raw: &[RawNet],
    board: BoardExtent,
    grid_resolution: usize,
) -> Result<Problem> {
    if !(board.width > 0.0 && board.height > 0.0) || !board.width.is_finite() || !board.height.is_finite() {
        return Err(Error::InvalidBoard {
            width: board.width,
            height: board.height,
        });
    }
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(Error::GridTooSmall(grid_resolution));
    }
    if raw.is_empty() {
        return Err(Error::NoNets);
    }

    let mut nets = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        let id = (i + 1) as NetId;
        if r.pins.is_empty() {
            return Err(Error::EmptyNet(id));
        }
        let mut pins = Vec::with_capacity(r.pins.len());
        for &[px, py] in &r.pins {
            let inside = px.is_finite()
                && py.is_finite()
                && (0.0..=board.width).contains(&px)
                && (0.0..=board.height).contains(&py);
            if !inside {
                return Err(Error::PinOutsideBoard { net: id, x: px, y: py });
            }
            pins.push(Pin::new(px / board.width, py / board.height));
        }
        nets.push(Net {
            id,
            label: r.label.clone(),
            pins,
            physical_pins: r.pins.clone(),
        });
    }

    check_cross_net_duplicates(&nets)?;

    Ok(Problem {
        nets,
        board,
        grid_resolution,
    })
}

fn check_cross_net_duplicates(nets: &[Net]) -> Result<()> {
    let mut all: Vec<(u64, u64, NetId)> = nets
        .iter()
        .flat_map(|n| n.pins.iter().map(move |p| (p.x.to_bits(), p.y.to_bits(), n.id)))
        .collect();
    all.sort_unstable();
    for w in all.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.0 == b.0 && a.1 == b.1 && a.2 != b.2 {
            return Err(Error::DuplicateCrossNetPin {
                first: a.2.min(b.2),
                second: a.2.max(b.2),
                x: f64::from_bits(a.0),
                y: f64::from_bits(a.1),
            });
        }
    }
    Ok(())
}

impl Problem {
    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn total_pins(&self) -> usize {
        self.nets.iter().map(Net::pin_count).sum()
    }

    pub fn net(&self, id: NetId) -> &Net {
        &self.nets[id as usize - 1]
    }

    /// The raw nets this problem was built from.
    pub fn raw_nets(&self) -> Vec<RawNet> {
        self.nets
            .iter()
            .map(|n| RawNet {
                label: n.label.clone(),
                pins: n.physical_pins.clone(),
            })
            .collect()
    }

    /// Same nets on a different raster.
    pub fn with_grid_resolution(&self, grid_resolution: usize) -> Result<Problem> {
        if grid_resolution < MIN_GRID_RESOLUTION {
            return Err(Error::GridTooSmall(grid_resolution));
        }
        Ok(Problem {
            grid_resolution,
            ..self.clone()
        })
    }

    /// Sub-problem over the given nets, renumbered 1..z in the given order.
    pub fn subproblem(&self, ids: &[NetId]) -> Problem {
        let nets = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| Net {
                id: (i + 1) as NetId,
                ..self.net(id).clone()
            })
            .collect();
        Problem {
            nets,
            board: self.board,
            grid_resolution: self.grid_resolution,
        }
    }
}

/// Dense per-cell net assignment, row-major with rows along y.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrid {
    pub resolution: usize,
    pub labels: Vec<NetId>,
}

impl LabelGrid {
    pub fn uniform(resolution: usize, net: NetId) -> Self {
        Self {
            resolution,
            labels: vec![net; resolution * resolution],
        }
    }

    pub fn from_fn(resolution: usize, mut f: impl FnMut(usize, usize) -> NetId) -> Self {
        let mut labels = Vec::with_capacity(resolution * resolution);
        for r in 0..resolution {
            for c in 0..resolution {
                labels.push(f(r, c));
            }
        }
        Self { resolution, labels }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> NetId {
        self.labels[row * self.resolution + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, net: NetId) {
        self.labels[row * self.resolution + col] = net;
    }

    pub fn label_at(&self, pin: &Pin) -> NetId {
        let (r, c) = pin.cell(self.resolution);
        self.get(r, c)
    }
}

/// A maximal 8-connected set of cells sharing one net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub net_id: NetId,
    pub resolution: usize,
    /// `(row, col)` cells in raster order.
    pub cells: Vec<(u32, u32)>,
    pub centroid: (f64, f64),
    /// Cells with at least one in-grid 8-neighbor outside the island, or on the
    /// grid border. Nearest points between disjoint islands lie among these.
    #[serde(skip)]
    pub(crate) boundary: Vec<(u32, u32)>,
}

impl Island {
    /// Builds an island from an explicit cell set, deriving centroid and boundary.
    pub fn from_cells(net_id: NetId, mut cells: Vec<(u32, u32)>, resolution: usize) -> Self {
        cells.sort_unstable();
        cells.dedup();
        let members: std::collections::HashSet<(u32, u32)> = cells.iter().copied().collect();
        let r = resolution as i64;
        let boundary = cells
            .iter()
            .copied()
            .filter(|&(row, col)| {
                neighbors8(row as i64, col as i64).any(|(nr, nc)| {
                    nr < 0 || nc < 0 || nr >= r || nc >= r || !members.contains(&(nr as u32, nc as u32))
                })
            })
            .collect();
        let centroid = centroid_of(&cells, resolution);
        Self {
            net_id,
            resolution,
            cells,
            centroid,
            boundary,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn boundary(&self) -> &[(u32, u32)] {
        &self.boundary
    }
}

pub(crate) fn neighbors8(row: i64, col: i64) -> impl Iterator<Item = (i64, i64)> {
    const D: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
    D.into_iter().map(move |(dr, dc)| (row + dr, col + dc))
}

pub(crate) fn centroid_of(cells: &[(u32, u32)], resolution: usize) -> (f64, f64) {
    let n = cells.len() as f64;
    let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), &(r, c)| {
        (sx + cell_center(c as usize, resolution), sy + cell_center(r as usize, resolution))
    });
    (sx / n, sy / n)
}

/// A label grid together with its per-net islands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub grid: LabelGrid,
    /// `islands[i]` holds the islands of net `i + 1`.
    pub islands: Vec<Vec<Island>>,
}

impl Partition {
    pub fn new(grid: LabelGrid, net_count: usize) -> Self {
        let islands = eval::extract_islands(&grid, net_count);
        Self { grid, islands }
    }

    pub fn resolution(&self) -> usize {
        self.grid.resolution
    }

    pub fn net_count(&self) -> usize {
        self.islands.len()
    }

    pub fn island_counts(&self) -> Vec<usize> {
        self.islands.iter().map(Vec::len).collect()
    }
}

/// Pins that fall in a cell labeled with another net.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `(net, pin indices)` for every net with at least one misclassified pin.
    pub misclassified: Vec<(NetId, Vec<usize>)>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.misclassified.is_empty()
    }

    pub fn misclassified_count(&self) -> usize {
        self.misclassified.iter().map(|(_, p)| p.len()).sum()
    }
}

pub fn check_feasible(problem: &Problem, grid: &LabelGrid) -> Result<FeasibilityReport> {
    if grid.resolution != problem.grid_resolution {
        return Err(Error::GridMismatch {
            expected: problem.grid_resolution,
            got: grid.resolution,
        });
    }
    let misclassified = problem
        .nets
        .iter()
        .filter_map(|net| {
            let bad: Vec<usize> = net
                .pins
                .iter()
                .enumerate()
                .filter(|(_, p)| grid.label_at(p) != net.id)
                .map(|(i, _)| i)
                .collect();
            (!bad.is_empty()).then_some((net.id, bad))
        })
        .collect();
    Ok(FeasibilityReport { misclassified })
}

/// Extra islands: total island count minus the net count.
pub fn extra_islands(partition: &Partition, net_count: usize) -> Result<usize> {
    let mut total = 0;
    for i in 0..net_count {
        let s = partition.islands.get(i).map_or(0, Vec::len);
        if s == 0 {
            return Err(Error::NetVanished((i + 1) as NetId));
        }
        total += s;
    }
    Ok(total - net_count)
}
