//! Domain discretization.
//!
//! Two families of grids are supported:
//!
//! * planar grids on the unit square `[0,1]^2` or the unit disk `|x| < 1`,
//!   both uniform Cartesian lattices with spacing `h = 1/resolution`; the disk
//!   is obtained by masking lattice nodes outside the open disk;
//! * radial grids `r_i = i h` on `[0, 1]` representing radially symmetric
//!   functions on the unit ball of `R^N`.
//!
//! Every node is either interior (an unknown) or boundary (value pinned to 0).
//! Each node carries a cell measure used for quadrature and the exact
//! Euclidean distance to the analytic boundary.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Smallest accepted resolution.
pub const MIN_RESOLUTION: usize = 8;

/// Surface area of the unit sphere in `R^n` (`2π^{n/2} / Γ(n/2)`).
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    // Γ(n/2) by the recursion Γ(x + 1) = x Γ(x), seeded at Γ(1) or Γ(1/2).
    let (mut x, mut gamma) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, PI.sqrt())
    };
    let half = n as f64 / 2.0;
    while x < half - 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(half) / gamma
}

/// Domain descriptor accepted by [`build_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    UnitSquare,
    UnitDisk,
    /// Radial profile on the unit ball of `R^dim`, `dim >= 2`.
    UnitBallRadial {
        dim: usize,
    },
}

impl Domain {
    pub fn half_diameter(&self) -> f64 {
        match self {
            Domain::UnitSquare => 0.5 * 2f64.sqrt(),
            Domain::UnitDisk | Domain::UnitBallRadial { .. } => 1.0,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::UnitSquare => write!(f, "unit-square"),
            Domain::UnitDisk => write!(f, "unit-disk"),
            Domain::UnitBallRadial { dim } => write!(f, "unit-ball-radial({dim})"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit-square" => return Ok(Domain::UnitSquare),
            "unit-disk" => return Ok(Domain::UnitDisk),
            _ => {}
        }
        if let Some(rest) = s
            .strip_prefix("unit-ball-radial(")
            .and_then(|r| r.strip_suffix(')'))
        {
            if let Ok(dim) = rest.trim().parse::<usize>() {
                if dim >= 2 {
                    return Ok(Domain::UnitBallRadial { dim });
                }
            }
        }
        Err(Error::UnsupportedDomain(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Planar,
    Radial,
}

/// An immutable discretized domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    resolution: usize,
    h: f64,
    dim: usize,
    /// Nodes per row and number of rows (radial: `(n, 1)`).
    shape: (usize, usize),
    coords: Vec<[f64; 2]>,
    interior: Vec<bool>,
    measure: Vec<f64>,
    distance: Vec<f64>,
    unknown: Vec<Option<usize>>,
    unknown_nodes: Vec<usize>,
}

/// Builds the grid for `domain` with spacing `1 / resolution`.
pub fn build_grid(domain: Domain, resolution: usize) -> Result<Grid> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    let h = 1.0 / resolution as f64;
    let (shape, dim) = match domain {
        Domain::UnitSquare => ((resolution + 1, resolution + 1), 2),
        Domain::UnitDisk => ((2 * resolution + 1, 2 * resolution + 1), 2),
        Domain::UnitBallRadial { dim } => {
            if dim < 2 {
                return Err(Error::UnsupportedDomain(domain.to_string()));
            }
            ((resolution + 1, 1), dim)
        }
    };
    let len = shape.0 * shape.1;
    let mut coords = Vec::with_capacity(len);
    let mut interior = Vec::with_capacity(len);
    let mut measure = Vec::with_capacity(len);
    let mut distance = Vec::with_capacity(len);

    match domain {
        Domain::UnitSquare => {
            for j in 0..shape.1 {
                for i in 0..shape.0 {
                    let (x, y) = (i as f64 * h, j as f64 * h);
                    let inside = i > 0 && j > 0 && i < resolution && j < resolution;
                    coords.push([x, y]);
                    interior.push(inside);
                    measure.push(if inside { h * h } else { 0.0 });
                    distance.push(if inside {
                        x.min(1.0 - x).min(y).min(1.0 - y)
                    } else {
                        0.0
                    });
                }
            }
        }
        Domain::UnitDisk => {
            let offset = resolution as f64;
            for j in 0..shape.1 {
                for i in 0..shape.0 {
                    let x = (i as f64 - offset) * h;
                    let y = (j as f64 - offset) * h;
                    let rho = x.hypot(y);
                    let inside = rho < 1.0 - 1e-12;
                    coords.push([x, y]);
                    interior.push(inside);
                    measure.push(if inside { h * h } else { 0.0 });
                    distance.push(if inside { 1.0 - rho } else { 0.0 });
                }
            }
        }
        Domain::UnitBallRadial { dim } => {
            let area = unit_sphere_area(dim);
            let n = dim as i32;
            for i in 0..shape.0 {
                let r = i as f64 * h;
                let inside = i < resolution;
                coords.push([r, 0.0]);
                interior.push(inside);
                // Control volume [r - h/2, r + h/2] ∩ [0, 1).
                let lo = (r - 0.5 * h).max(0.0);
                let hi = r + 0.5 * h;
                let vol = area / dim as f64 * (hi.powi(n) - lo.powi(n));
                measure.push(if inside { vol } else { 0.0 });
                distance.push(if inside { 1.0 - r } else { 0.0 });
            }
        }
    }

    let mut unknown = vec![None; len];
    let mut unknown_nodes = Vec::new();
    for (node, &inside) in interior.iter().enumerate() {
        if inside {
            unknown[node] = Some(unknown_nodes.len());
            unknown_nodes.push(node);
        }
    }

    Ok(Grid {
        domain,
        resolution,
        h,
        dim,
        shape,
        coords,
        interior,
        measure,
        distance,
        unknown,
        unknown_nodes,
    })
}

impl Grid {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kind(&self) -> GridKind {
        match self.domain {
            Domain::UnitBallRadial { .. } => GridKind::Radial,
            _ => GridKind::Planar,
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Ambient dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(nodes per row, rows)`; radial grids report `(n, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Node coordinates; radial grids store `[r, 0]`.
    pub fn coord(&self, node: usize) -> [f64; 2] {
        self.coords[node]
    }

    /// Point that radial-power data are centred on.
    pub fn center(&self) -> [f64; 2] {
        match self.domain {
            Domain::UnitSquare => [0.5, 0.5],
            _ => [0.0, 0.0],
        }
    }

    /// Distance from the node to [`Grid::center`].
    pub fn radius(&self, node: usize) -> f64 {
        let [x, y] = self.coords[node];
        match self.kind() {
            GridKind::Radial => x,
            GridKind::Planar => {
                let [cx, cy] = self.center();
                (x - cx).hypot(y - cy)
            }
        }
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.interior[node]
    }

    pub fn measure(&self, node: usize) -> f64 {
        self.measure[node]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    /// Exact distance to the analytic boundary (0 on boundary nodes).
    pub fn distance(&self, node: usize) -> f64 {
        self.distance[node]
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.unknown_nodes
    }

    pub fn unknowns(&self) -> usize {
        self.unknown_nodes.len()
    }

    pub fn unknown_index(&self, node: usize) -> Option<usize> {
        self.unknown[node]
    }

    /// Total measure of the interior cells.
    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Exact measure of the continuous domain.
    pub fn domain_measure(&self) -> f64 {
        match self.domain {
            Domain::UnitSquare => 1.0,
            Domain::UnitDisk => PI,
            Domain::UnitBallRadial { dim } => unit_sphere_area(dim) / dim as f64,
        }
    }

    /// Node at lattice position `(i, j)` for planar grids.
    pub fn planar_node(&self, i: usize, j: usize) -> usize {
        j * self.shape.0 + i
    }

    /// Lattice position of a planar node.
    pub fn planar_position(&self, node: usize) -> (usize, usize) {
        (node % self.shape.0, node / self.shape.0)
    }

    /// Node nearest to `point` (radial grids use `|point|`).
    pub fn nearest_node(&self, point: [f64; 2]) -> usize {
        match self.kind() {
            GridKind::Radial => {
                let r = point[0].hypot(point[1]);
                ((r / self.h).round() as usize).min(self.shape.0 - 1)
            }
            GridKind::Planar => {
                let [x0, y0] = self.coords[0];
                let i = ((point[0] - x0) / self.h)
                    .round()
                    .clamp(0.0, (self.shape.0 - 1) as f64) as usize;
                let j = ((point[1] - y0) / self.h)
                    .round()
                    .clamp(0.0, (self.shape.1 - 1) as f64) as usize;
                self.planar_node(i, j)
            }
        }
    }

    /// Interior nodes at distance at least `delta` from the boundary: the
    /// discrete stand-in for a compactly contained subset.
    pub fn compact_subset(&self, delta: f64) -> Result<NodeSet> {
        self.check_margin(delta)?;
        let nodes: Vec<usize> = self
            .unknown_nodes
            .iter()
            .copied()
            .filter(|&n| self.distance[n] >= delta - 1e-12)
            .collect();
        if nodes.is_empty() {
            return Err(Error::EmptySubset { delta });
        }
        Ok(NodeSet { nodes })
    }

    /// Interior nodes closer than `delta` to the boundary.
    pub fn boundary_band(&self, delta: f64) -> Result<NodeSet> {
        self.check_margin(delta)?;
        let nodes = self
            .unknown_nodes
            .iter()
            .copied()
            .filter(|&n| self.distance[n] < delta - 1e-12)
            .collect();
        Ok(NodeSet { nodes })
    }

    fn check_margin(&self, delta: f64) -> Result<()> {
        if !(delta > 0.0 && delta < self.domain.half_diameter()) {
            return Err(Error::InvalidParameter(format!(
                "margin {delta} must lie in (0, {})",
                self.domain.half_diameter()
            )));
        }
        Ok(())
    }

    /// All interior nodes as a set.
    pub fn all_interior(&self) -> NodeSet {
        NodeSet {
            nodes: self.unknown_nodes.clone(),
        }
    }
}

/// A sorted set of node indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSet {
    nodes: Vec<usize>,
}

impl NodeSet {
    pub fn from_nodes(mut nodes: Vec<usize>) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        NodeSet { nodes }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    pub fn is_subset_of(&self, other: &NodeSet) -> bool {
        self.nodes.iter().all(|&n| other.contains(n))
    }

    /// Removes every node within `radius` of one of `points`.
    pub fn without_collar(&self, grid: &Grid, points: &[[f64; 2]], radius: f64) -> NodeSet {
        let nodes = self
            .nodes
            .iter()
            .copied()
            .filter(|&n| {
                let [x, y] = grid.coord(n);
                points.iter().all(|p| match grid.kind() {
                    GridKind::Radial => (x - p[0].hypot(p[1])).abs() > radius,
                    GridKind::Planar => (x - p[0]).hypot(y - p[1]) > radius,
                })
            })
            .collect();
        NodeSet { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn square_counts() {
        let g = build_grid(Domain::UnitSquare, 8).unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(g.unknowns(), 49);
    }

    #[test]
    fn radial_cell_measure() {
        let g = build_grid(Domain::UnitBallRadial { dim: 3 }, 100).unwrap();
        assert_eq!(g.len(), 101);
        let expected = 4.0 * PI * 0.25 * g.h();
        assert_relative_eq!(g.measure(50), expected, max_relative = 1e-3);
    }

    #[test]
    fn disk_area() {
        let g = build_grid(Domain::UnitDisk, 64).unwrap();
        let area = g.total_measure();
        assert!((0.98 * PI..=1.02 * PI).contains(&area), "area {area}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            build_grid(Domain::UnitSquare, 7),
            Err(Error::ResolutionTooSmall { .. })
        ));
        assert!(matches!(
            "unit-cube".parse::<Domain>(),
            Err(Error::UnsupportedDomain(_))
        ));
        assert!("unit-ball-radial(1)".parse::<Domain>().is_err());
        assert_eq!(
            "unit-ball-radial(3)".parse::<Domain>().unwrap(),
            Domain::UnitBallRadial { dim: 3 }
        );
    }

    #[test]
    fn distance_vanishes_exactly_on_boundary() {
        for domain in [
            Domain::UnitSquare,
            Domain::UnitDisk,
            Domain::UnitBallRadial { dim: 3 },
        ] {
            let g = build_grid(domain, 16).unwrap();
            for n in 0..g.len() {
                if g.is_interior(n) {
                    assert!(g.distance(n) > 0.0 && g.measure(n) > 0.0);
                } else {
                    assert_eq!(g.distance(n), 0.0);
                }
            }
        }
    }

    #[test]
    fn square_compact_subset() {
        let g = build_grid(Domain::UnitSquare, 8).unwrap();
        let set = g.compact_subset(0.25).unwrap();
        // Nodes with x, y in {2/8, ..., 6/8}.
        assert_eq!(set.len(), 25);
        assert!(set.contains(g.planar_node(4, 4)));
        assert!(!set.contains(g.planar_node(1, 4)));
        assert!(matches!(
            g.compact_subset(0.6),
            Err(Error::EmptySubset { .. })
        ));
        assert!(g.compact_subset(0.8).is_err());
    }

    #[test]
    fn radial_compact_subset() {
        let g = build_grid(Domain::UnitBallRadial { dim: 3 }, 100).unwrap();
        let set = g.compact_subset(0.5).unwrap();
        assert_eq!(set.len(), 51);
        assert!(set.nodes().iter().all(|&n| g.coord(n)[0] <= 0.5 + 1e-12));
    }

    #[test]
    fn compact_subsets_are_nested() {
        let g = build_grid(Domain::UnitDisk, 32).unwrap();
        let outer = g.compact_subset(0.1).unwrap();
        let inner = g.compact_subset(0.3).unwrap();
        assert!(inner.is_subset_of(&outer));
        let band = g.boundary_band(0.1).unwrap();
        assert_eq!(band.len() + outer.len(), g.unknowns());
    }

    #[test]
    fn volume_converges_first_order() {
        for domain in [
            Domain::UnitSquare,
            Domain::UnitDisk,
            Domain::UnitBallRadial { dim: 3 },
        ] {
            let errs: Vec<f64> = [16, 32, 64, 128]
                .iter()
                .map(|&res| {
                    let g = build_grid(domain, res).unwrap();
                    (g.total_measure() - g.domain_measure()).abs()
                })
                .collect();
            // Lattice counting on the disk is noisy; compare across two doublings.
            assert!(errs[3] <= 0.5 * errs[1] + 1e-12, "{domain}: {errs:?}");
        }
    }
}
