//! Hexagonal partitioning of the network area.
//!
//! The arena is tiled with flat-top hexagonal cells of center-to-vertex
//! radius `r_g`, one coordinator per cell center. Cells are grouped into
//! seven reuse groups so that no two cells within two lattice hops share
//! a group; scheduling slots are assigned per group.

use std::fmt;

/// A point in the arena, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.2}, {:.2})", self.x, self.y)
    }
}

/// Identifier of a hexagonal cell within a [`HexCellMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// Number of scheduling groups (hex 7-coloring, reuse factor 7).
pub const NUM_GROUPS: usize = 7;

/// Axial hex coordinates on the flat-top lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Axial {
    q: i32,
    r: i32,
}

impl Axial {
    /// Hex (lattice) distance between two cells.
    fn hex_distance(self, other: Axial) -> u32 {
        let dq = self.q - other.q;
        let dr = self.r - other.r;
        let ds = -dq - dr;
        (dq.abs().max(dr.abs()).max(ds.abs())) as u32
    }

    const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
}

/// One cell of the tiling.
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: CellId,
    pub center: Position,
    pub group: u8,
    axial: Axial,
}

/// Hexagonal tiling of a rectangular arena.
///
/// Every arena point belongs to exactly one cell (the one whose center is
/// nearest; boundary ties go to the lowest cell id). The lattice is anchored
/// so that one coordinator sits at the arena center.
#[derive(Debug, Clone)]
pub struct HexCellMap {
    pub r_g: f64,
    pub arena_width: f64,
    pub arena_height: f64,
    cells: Vec<Cell>,
    adjacency: Vec<Vec<CellId>>,
}

/// Errors from geometry lookups.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({0}, {1}) lies outside the arena")]
    OutsideArena(f64, f64),
    #[error("invalid tiling parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Seven-coloring of the hex lattice: no two cells within two hops share a
/// color. `(q + 3r) mod 7` maps all 18 offsets at hex distance 1 and 2 to
/// nonzero residues.
fn group_of(axial: Axial) -> u8 {
    (((axial.q + 3 * axial.r) % 7 + 7) % 7) as u8
}

/// Vertices of the flat-top hexagon centered at `c` with center-to-vertex
/// radius `r`.
fn hex_vertices(c: Position, r: f64) -> [Position; 6] {
    let h = r * 3f64.sqrt() / 2.0;
    [
        Position::new(c.x + r, c.y),
        Position::new(c.x + r / 2.0, c.y + h),
        Position::new(c.x - r / 2.0, c.y + h),
        Position::new(c.x - r, c.y),
        Position::new(c.x - r / 2.0, c.y - h),
        Position::new(c.x + r / 2.0, c.y - h),
    ]
}

/// Separating-axis test between a hexagon and an axis-aligned rectangle.
fn hex_intersects_rect(center: Position, r: f64, w: f64, h: f64) -> bool {
    let verts = hex_vertices(center, r);
    let rect = [
        Position::new(0.0, 0.0),
        Position::new(w, 0.0),
        Position::new(w, h),
        Position::new(0.0, h),
    ];
    // Candidate separating axes: rect normals (x, y) and hexagon edge normals.
    let mut axes: Vec<(f64, f64)> = vec![(1.0, 0.0), (0.0, 1.0)];
    for i in 0..6 {
        let a = verts[i];
        let b = verts[(i + 1) % 6];
        axes.push((-(b.y - a.y), b.x - a.x));
    }
    for (ax, ay) in axes {
        let project = |pts: &[Position]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in pts {
                let d = p.x * ax + p.y * ay;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(&verts);
        let (blo, bhi) = project(&rect);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

/// Builds the hexagonal tiling covering an `arena_width` x `arena_height`
/// rectangle with cell radius `r_g`.
///
/// A degenerate arena smaller than one cell yields a single cell.
pub fn build_hex_tiling(arena_width: f64, arena_height: f64, r_g: f64) -> HexCellMap {
    assert!(
        arena_width > 0.0 && arena_height > 0.0,
        "arena dimensions must be positive"
    );
    assert!(r_g > 0.0, "r_g must be positive");

    let cx = arena_width / 2.0;
    let cy = arena_height / 2.0;
    let col_step = 1.5 * r_g;
    let row_step = 3f64.sqrt() * r_g;

    let center_of = |a: Axial| -> Position {
        Position::new(
            cx + col_step * a.q as f64,
            cy + row_step * (a.r as f64 + a.q as f64 / 2.0),
        )
    };

    // Generous axial bounds, then exact hex/rect intersection filter.
    let q_span = (arena_width / col_step).ceil() as i32 + 2;
    let r_span = (arena_height / (row_step / 2.0)).ceil() as i32 + 2;

    let mut kept: Vec<Axial> = Vec::new();
    for r in -r_span..=r_span {
        for q in -q_span..=q_span {
            let a = Axial { q, r };
            if hex_intersects_rect(center_of(a), r_g, arena_width, arena_height) {
                kept.push(a);
            }
        }
    }
    // Deterministic ids: row-major over (r, q).
    kept.sort();
    kept.sort_by_key(|a| (a.r, a.q));

    let cells: Vec<Cell> = kept
        .iter()
        .enumerate()
        .map(|(i, &axial)| Cell {
            id: CellId(i as u32),
            center: center_of(axial),
            group: group_of(axial),
            axial,
        })
        .collect();

    let mut adjacency = vec![Vec::new(); cells.len()];
    for cell in &cells {
        for (dq, dr) in Axial::NEIGHBOR_OFFSETS {
            let n = Axial {
                q: cell.axial.q + dq,
                r: cell.axial.r + dr,
            };
            if let Some(other) = cells.iter().find(|c| c.axial == n) {
                adjacency[cell.id.index()].push(other.id);
            }
        }
        adjacency[cell.id.index()].sort();
    }

    HexCellMap {
        r_g,
        arena_width,
        arena_height,
        cells,
        adjacency,
    }
}

impl HexCellMap {
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.index()]
    }

    pub fn center(&self, id: CellId) -> Position {
        self.cells[id.index()].center
    }

    pub fn group(&self, id: CellId) -> u8 {
        self.cells[id.index()].group
    }

    /// Hex-adjacent neighbors of a cell (boundary cells have fewer than six).
    pub fn neighbors(&self, id: CellId) -> &[CellId] {
        &self.adjacency[id.index()]
    }

    /// Lattice distance between two cells in hops.
    pub fn hex_distance(&self, a: CellId, b: CellId) -> u32 {
        self.cells[a.index()]
            .axial
            .hex_distance(self.cells[b.index()].axial)
    }

    fn in_arena(&self, p: Position) -> bool {
        p.x >= 0.0 && p.x <= self.arena_width && p.y >= 0.0 && p.y <= self.arena_height
    }

    /// Maps an arena point to its cell.
    ///
    /// Hexagons are the Voronoi cells of the lattice, so this is a
    /// nearest-center lookup. Near-exact ties (relative 1e-12 on squared
    /// distance) resolve to the lowest cell id.
    pub fn assign_cell(&self, p: Position) -> Result<CellId, GeometryError> {
        if !p.x.is_finite() || !p.y.is_finite() || !self.in_arena(p) {
            return Err(GeometryError::OutsideArena(p.x, p.y));
        }
        let best_d = self
            .cells
            .iter()
            .map(|c| p.distance_sq(&c.center))
            .fold(f64::INFINITY, f64::min);
        let tol = best_d * 1e-9;
        // Cells iterate in id order, so the first within tolerance is the
        // lowest-id candidate.
        let best = self
            .cells
            .iter()
            .find(|c| p.distance_sq(&c.center) <= best_d + tol)
            .expect("tiling is never empty");
        Ok(best.id)
    }

    /// Checks that no two cells within two lattice hops share a group.
    pub fn coloring_is_valid(&self) -> bool {
        for a in &self.cells {
            for b in &self.cells {
                if a.id != b.id && a.axial.hex_distance(b.axial) <= 2 && a.group == b.group {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arena_120_by_120_has_valid_two_hop_coloring() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        assert!(map.num_cells() > 1);
        assert!(map.coloring_is_valid());
        // Every cell's one- and two-hop neighbors differ in group.
        for a in map.cells() {
            for b in map.cells() {
                if a.id != b.id && map.hex_distance(a.id, b.id) <= 2 {
                    assert_ne!(a.group, b.group, "{} vs {}", a.id, b.id);
                }
            }
        }
    }

    #[test]
    fn tiny_arena_yields_single_cell() {
        let map = build_hex_tiling(1.0, 1.0, 20.0);
        assert_eq!(map.num_cells(), 1);
        assert!(map.neighbors(CellId(0)).is_empty());
        let id = map.assign_cell(Position::new(0.5, 0.5)).unwrap();
        assert_eq!(id, CellId(0));
    }

    #[test]
    fn arena_240_by_240_exhaustive_pairwise_check() {
        let map = build_hex_tiling(240.0, 240.0, 20.0);
        // Brute force over all cell pairs.
        for a in map.cells() {
            for b in map.cells() {
                if a.id == b.id {
                    continue;
                }
                let d = map.hex_distance(a.id, b.id);
                if d <= 2 {
                    assert_ne!(a.group, b.group);
                }
            }
        }
    }

    #[test]
    fn cell_center_maps_to_its_cell() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        for cell in map.cells() {
            if map.in_arena(cell.center) {
                assert_eq!(map.assign_cell(cell.center).unwrap(), cell.id);
            }
        }
    }

    #[test]
    fn assignment_agrees_with_nearest_center_brute_force() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p = Position::new(rng.random_range(0.0..120.0), rng.random_range(0.0..120.0));
            let assigned = map.assign_cell(p).unwrap();
            // Independent oracle: plain argmin over centers.
            let oracle = map
                .cells()
                .iter()
                .min_by(|a, b| {
                    p.distance_sq(&a.center)
                        .partial_cmp(&p.distance_sq(&b.center))
                        .unwrap()
                })
                .unwrap()
                .id;
            let d_assigned = p.distance_sq(&map.center(assigned));
            let d_oracle = p.distance_sq(&map.center(oracle));
            // Equal up to the declared tie tolerance.
            assert!(
                (d_assigned - d_oracle).abs() <= d_oracle * 1e-9,
                "point {p}: got {assigned} (d2={d_assigned}), oracle {oracle} (d2={d_oracle})"
            );
        }
    }

    #[test]
    fn boundary_tie_resolves_to_lowest_cell_id() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        // Midpoint between two adjacent cell centers is equidistant from both.
        let a = map.cell(CellId(0));
        let b_id = map.neighbors(a.id)[0];
        let b = map.cell(b_id);
        let mid = Position::new(
            (a.center.x + b.center.x) / 2.0,
            (a.center.y + b.center.y) / 2.0,
        );
        if map.in_arena(mid) {
            let got = map.assign_cell(mid).unwrap();
            assert_eq!(got, a.id.min(b_id));
        }
    }

    #[test]
    fn outside_arena_is_rejected() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        assert!(map.assign_cell(Position::new(-1.0, 5.0)).is_err());
        assert!(map.assign_cell(Position::new(5.0, 121.0)).is_err());
        assert!(map.assign_cell(Position::new(f64::NAN, 5.0)).is_err());
    }

    #[test]
    fn coordinator_sits_at_arena_center() {
        let map = build_hex_tiling(120.0, 120.0, 20.0);
        let center = Position::new(60.0, 60.0);
        let id = map.assign_cell(center).unwrap();
        assert!(map.center(id).distance(&center) < 1e-9);
    }

    #[test]
    fn groups_cover_all_seven_on_large_arena() {
        let map = build_hex_tiling(240.0, 240.0, 20.0);
        let mut seen = [false; NUM_GROUPS];
        for c in map.cells() {
            seen[c.group as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
