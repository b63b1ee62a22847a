//! Exact geometry of the hexagonal lattice and of the hexagonal
//! parallelogram domains used by the forward and inverse solvers.
//!
//! Points are stored as integer pairs `(p, q)` standing for the planar
//! point `(p/2, q·√3/2)`.  Every honeycomb vertex, every hexagon centre and
//! every power of `ω = e^{iπ/3}` lives in this ring, so vertex identity,
//! rotations by multiples of 60° and the line test `x₁ + √3 x₂ = a` are all
//! decided in integer arithmetic.
//!
//! Hexagon centres form the triangular lattice spanned by `v₁ = 1 + ω` and
//! `v₂ = √3 i`.  The two sublattices are `ω⁵ + L₀` and `1 + L₀`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact planar point `(p/2, q·√3/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub p: i64,
    pub q: i64,
}

/// `ω^j` for `j = 0..6`.
pub const OMEGA: [Point; 6] = [
    Point { p: 2, q: 0 },
    Point { p: 1, q: 1 },
    Point { p: -1, q: 1 },
    Point { p: -2, q: 0 },
    Point { p: -1, q: -1 },
    Point { p: 1, q: -1 },
];

/// Step `1 + ω⁵` between consecutive points of a diagonal line.
pub const LINE_STEP: Point = Point { p: 3, q: -1 };

impl Point {
    pub const ORIGIN: Point = Point { p: 0, q: 0 };

    pub const fn new(p: i64, q: i64) -> Self {
        Point { p, q }
    }

    /// Rotation by `r · 60°` about the origin (a hexagon centre).
    pub fn rotate(self, r: i32) -> Point {
        let mut pt = self;
        for _ in 0..r.rem_euclid(6) {
            pt = Point::new((pt.p - 3 * pt.q) / 2, (pt.p + pt.q) / 2);
        }
        pt
    }

    /// `x₁ + √3 x₂`, always an integer on the lattice.
    pub fn level(self) -> i64 {
        (self.p + 3 * self.q).div_euclid(2)
    }

    pub fn to_f64(self) -> (f64, f64) {
        (self.p as f64 / 2.0, self.q as f64 * 3f64.sqrt() / 2.0)
    }

    pub fn is_center(self) -> bool {
        self.p.rem_euclid(3) == 0 && (self.q - self.p.div_euclid(3)).rem_euclid(2) == 0
    }

    pub fn sublattice(self) -> Option<Sublattice> {
        if (self - OMEGA[5]).is_center() {
            Some(Sublattice::One)
        } else if (self - OMEGA[0]).is_center() {
            Some(Sublattice::Two)
        } else {
            None
        }
    }

    pub fn is_vertex(self) -> bool {
        self.sublattice().is_some()
    }

    /// The three nearest neighbours of a honeycomb vertex.
    pub fn neighbors(self) -> Option<[Point; 3]> {
        match self.sublattice()? {
            Sublattice::One => Some([self + OMEGA[1], self + OMEGA[3], self + OMEGA[5]]),
            Sublattice::Two => Some([self + OMEGA[0], self + OMEGA[2], self + OMEGA[4]]),
        }
    }

    pub fn is_adjacent(self, other: Point) -> bool {
        self.neighbors().is_some_and(|n| n.contains(&other))
    }

    /// Index `j` with `other - self = ω^j`, if the two points are at unit distance
    /// along a lattice direction.
    pub fn direction_to(self, other: Point) -> Option<usize> {
        OMEGA.iter().position(|w| *w == other - self)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.p + o.p, self.q + o.q)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.p - o.p, self.q - o.q)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.p, -self.q)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.p, self.q)
    }
}

/// Centre of the hexagon at `v(n) = n₁v₁ + n₂v₂`.
pub fn cell_center(n1: i64, n2: i64) -> Point {
    Point::new(3 * n1, n1 + 2 * n2)
}

/// Inverse of [`cell_center`].
pub fn cell_of_center(c: Point) -> Option<(i64, i64)> {
    if !c.is_center() {
        return None;
    }
    let n1 = c.p / 3;
    Some((n1, (c.q - n1) / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    One,
    Two,
}

/// Vertex `p_i + v(n)` in the sublattice/translation parametrisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeVertex {
    pub sublattice: Sublattice,
    pub n1: i64,
    pub n2: i64,
}

impl LatticeVertex {
    pub fn position(&self) -> Point {
        let base = match self.sublattice {
            Sublattice::One => OMEGA[5],
            Sublattice::Two => OMEGA[0],
        };
        base + cell_center(self.n1, self.n2)
    }

    pub fn from_point(pt: Point) -> Option<Self> {
        let sublattice = pt.sublattice()?;
        let base = match sublattice {
            Sublattice::One => OMEGA[5],
            Sublattice::Two => OMEGA[0],
        };
        let (n1, n2) = cell_of_center(pt - base)?;
        Some(LatticeVertex { sublattice, n1, n2 })
    }
}

/// Orientation-free edge identifier: endpoints in sorted order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    pub a: Point,
    pub b: Point,
}

impl EdgeKey {
    pub fn new(x: Point, y: Point) -> Self {
        if x <= y {
            EdgeKey { a: x, b: y }
        } else {
            EdgeKey { a: y, b: x }
        }
    }

    /// Edge of the hexagon at cell `(n1, n2)` joining corners `ω^side` and `ω^(side+1)`.
    pub fn of_cell(n1: i64, n2: i64, side: usize) -> Self {
        let c = cell_center(n1, n2);
        EdgeKey::new(c + OMEGA[side % 6], c + OMEGA[(side + 1) % 6])
    }

    pub fn contains(&self, pt: Point) -> bool {
        self.a == pt || self.b == pt
    }

    pub fn other(&self, pt: Point) -> Option<Point> {
        if self.a == pt {
            Some(self.b)
        } else if self.b == pt {
            Some(self.a)
        } else {
            None
        }
    }

    pub fn shared_vertex(&self, o: &EdgeKey) -> Option<Point> {
        if *self == *o {
            return None;
        }
        [self.a, self.b].into_iter().find(|v| o.contains(*v))
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> EdgeKey {
        EdgeKey::new(f(self.a), f(self.b))
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// Placement of a congruent copy of the standard parallelogram:
/// rotation by `orientation · 60°` about the origin followed by the lattice
/// translation `v(shift)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frame {
    pub orientation: u8,
    pub shift: [i64; 2],
}

impl Frame {
    pub const IDENTITY: Frame = Frame { orientation: 0, shift: [0, 0] };

    pub fn new(orientation: u8, shift: [i64; 2]) -> Self {
        Frame { orientation: orientation % 6, shift }
    }

    pub fn translated(shift: [i64; 2]) -> Self {
        Frame::new(0, shift)
    }

    fn offset(&self) -> Point {
        cell_center(self.shift[0], self.shift[1])
    }

    pub fn to_global(&self, local: Point) -> Point {
        local.rotate(self.orientation as i32) + self.offset()
    }

    pub fn to_local(&self, global: Point) -> Point {
        (global - self.offset()).rotate(-(self.orientation as i32))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}@[{},{}]", self.orientation, self.shift[0], self.shift[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Top,
    Bottom,
    Right,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Bottom, Side::Right, Side::Left];
}

/// Boundary vertex attached by a new edge to a periphery vertex of interior
/// angle 2π/3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendantVertex {
    pub position: Point,
    pub anchor: Point,
    /// Lattice direction index (in the domain's local frame) from anchor to pendant.
    pub direction: usize,
    pub side: Side,
}

/// Scenario-level description of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(default)]
    pub shift: [i64; 2],
    #[serde(default)]
    pub orientation: u8,
}

impl DomainSpec {
    pub fn frame(&self) -> Frame {
        Frame::new(self.orientation, self.shift)
    }

    pub fn build(&self) -> Result<HexDomain> {
        build_parallelogram(self.n, self.frame())
    }
}

/// Finite hexagonal parallelogram `𝒟_N` placed by a [`Frame`].
#[derive(Debug, Clone)]
pub struct HexDomain {
    n: usize,
    frame: Frame,
    interior: Vec<Point>,
    interior_index: HashMap<Point, usize>,
    boundary: Vec<PendantVertex>,
    boundary_index: HashMap<Point, usize>,
    side_ranges: [(usize, usize); 4],
    edges: Vec<EdgeKey>,
    adjacency: HashMap<Point, Vec<Point>>,
}

/// Build the parallelogram of `(N+1)²` hexagons with pendant boundary vertices.
pub fn build_parallelogram(n: i64, frame: Frame) -> Result<HexDomain> {
    if n < 0 {
        return Err(Error::InvalidArgument(format!("N must be >= 0, got {n}")));
    }
    let nn = n as usize;

    let mut local_interior = Vec::new();
    for n1 in 0..=n {
        for n2 in 0..=n {
            let c = cell_center(n1, n2);
            for w in OMEGA {
                local_interior.push(c + w);
            }
        }
    }
    local_interior.sort_by_key(|pt| (pt.level(), pt.p));
    local_interior.dedup();
    let local_set: std::collections::HashSet<Point> = local_interior.iter().copied().collect();

    let mut pendants_by_dir: BTreeMap<usize, Vec<(Point, Point)>> = BTreeMap::new();
    let mut edges = Vec::new();
    for &v in &local_interior {
        let nb = v.neighbors().expect("interior points are lattice vertices");
        for w in nb {
            if local_set.contains(&w) {
                if v < w {
                    edges.push((v, w));
                }
            } else {
                let dir = v.direction_to(w).expect("neighbour at unit distance");
                pendants_by_dir.entry(dir).or_default().push((w, v));
            }
        }
    }

    let take = |dir: usize, key: &dyn Fn(&Point) -> i64| -> Vec<(Point, Point, usize)> {
        let mut v: Vec<(Point, Point, usize)> = pendants_by_dir
            .get(&dir)
            .map(|x| x.iter().map(|&(p, a)| (p, a, dir)).collect())
            .unwrap_or_default();
        v.sort_by_key(|(p, _, _)| key(p));
        v
    };
    let by_p = |pt: &Point| pt.p;
    let by_q = |pt: &Point| pt.q;
    let top = take(2, &by_p);
    let bottom = take(5, &by_p);
    let mut right = take(0, &by_q);
    right.extend(take(1, &by_q));
    let mut left = take(4, &by_q);
    left.extend(take(3, &by_q));

    let mut boundary = Vec::new();
    let mut side_ranges = [(0, 0); 4];
    for (i, (side, list)) in [
        (Side::Top, top),
        (Side::Bottom, bottom),
        (Side::Right, right),
        (Side::Left, left),
    ]
    .into_iter()
    .enumerate()
    {
        let start = boundary.len();
        for (p, a, dir) in list {
            boundary.push(PendantVertex {
                position: frame.to_global(p),
                anchor: frame.to_global(a),
                direction: dir,
                side,
            });
        }
        side_ranges[i] = (start, boundary.len());
    }

    let interior: Vec<Point> = local_interior.iter().map(|&p| frame.to_global(p)).collect();
    let interior_index = interior.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let boundary_index = boundary.iter().enumerate().map(|(i, b)| (b.position, i)).collect();

    let mut edge_keys: Vec<EdgeKey> = edges
        .into_iter()
        .map(|(a, b)| EdgeKey::new(frame.to_global(a), frame.to_global(b)))
        .collect();
    edge_keys.extend(boundary.iter().map(|b| EdgeKey::new(b.position, b.anchor)));
    edge_keys.sort();

    let mut adjacency: HashMap<Point, Vec<Point>> = HashMap::new();
    for e in &edge_keys {
        adjacency.entry(e.a).or_default().push(e.b);
        adjacency.entry(e.b).or_default().push(e.a);
    }
    for list in adjacency.values_mut() {
        list.sort();
    }

    Ok(HexDomain {
        n: nn,
        frame,
        interior,
        interior_index,
        boundary,
        boundary_index,
        side_ranges,
        edges: edge_keys,
        adjacency,
    })
}

impl HexDomain {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn spec(&self) -> DomainSpec {
        DomainSpec {
            n: self.n as i64,
            shift: self.frame.shift,
            orientation: self.frame.orientation,
        }
    }

    pub fn interior(&self) -> &[Point] {
        &self.interior
    }

    pub fn interior_index(&self, pt: Point) -> Option<usize> {
        self.interior_index.get(&pt).copied()
    }

    /// Boundary vertices in canonical order: T, B, R, L, each in index order.
    pub fn boundary(&self) -> &[PendantVertex] {
        &self.boundary
    }

    pub fn boundary_index(&self, pt: Point) -> Option<usize> {
        self.boundary_index.get(&pt).copied()
    }

    pub fn side_range(&self, side: Side) -> std::ops::Range<usize> {
        let i = Side::ALL.iter().position(|s| *s == side).unwrap();
        self.side_ranges[i].0..self.side_ranges[i].1
    }

    pub fn side(&self, side: Side) -> &[PendantVertex] {
        &self.boundary[self.side_range(side)]
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn has_edge(&self, e: &EdgeKey) -> bool {
        self.edges.binary_search(e).is_ok()
    }

    pub fn neighbors(&self, pt: Point) -> &[Point] {
        self.adjacency.get(&pt).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn degree(&self, pt: Point) -> usize {
        self.neighbors(pt).len()
    }

    pub fn contains_vertex(&self, pt: Point) -> bool {
        self.interior_index.contains_key(&pt) || self.boundary_index.contains_key(&pt)
    }

    pub fn is_pendant_edge(&self, e: &EdgeKey) -> bool {
        self.boundary_index.contains_key(&e.a) || self.boundary_index.contains_key(&e.b)
    }

    /// Is `pt` an interior vertex carrying a pendant edge?
    pub fn is_anchor(&self, pt: Point) -> bool {
        self.boundary.iter().any(|b| b.anchor == pt)
    }

    /// Edges away from the boundary layer: neither endpoint is a pendant or
    /// the anchor of a pendant.
    pub fn is_strictly_inside(&self, e: &EdgeKey) -> bool {
        self.has_edge(e)
            && self.interior_index.contains_key(&e.a)
            && self.interior_index.contains_key(&e.b)
            && !self.is_anchor(e.a)
            && !self.is_anchor(e.b)
    }

    /// `x₁ + √3 x₂` measured in this domain's own frame.
    pub fn local_level(&self, pt: Point) -> i64 {
        self.frame.to_local(pt).level()
    }

    /// Centre of the parallelogram, doubled so it stays on the integer grid.
    pub fn twice_center(&self) -> Point {
        let n = self.n as i64;
        cell_center(n, n).rotate(self.frame.orientation as i32)
            + cell_center(2 * self.frame.shift[0], 2 * self.frame.shift[1])
    }

    /// Boundary sides as ordered position lists.
    pub fn classify_boundary(&self) -> [Vec<Point>; 4] {
        Side::ALL.map(|s| self.side(s).iter().map(|b| b.position).collect())
    }
}

/// Which parallelogram a diagonal line is drawn in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Original,
    Rotated,
}

/// Points of `A_k ∩ Ω̄`, from the top-side vertex to the exit boundary vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    pub k: usize,
    pub family: Family,
    pub frame: Frame,
    /// `a_k` in the frame of the parallelogram the line is drawn in.
    pub level: i64,
    pub points: Vec<Point>,
    /// `below[ℓ]` is the vertex just below the line adjacent to `points[ℓ]` and `points[ℓ+1]`.
    pub below: Vec<Point>,
    pub exit_side: Side,
}

impl LineSpec {
    pub fn entry(&self) -> Point {
        self.points[0]
    }

    pub fn exit(&self) -> Point {
        *self.points.last().unwrap()
    }
}

/// Diagonal line `A_k` through the `k`-th top boundary vertex.
pub fn diagonal_line(domain: &HexDomain, k: usize, family: Family) -> Result<LineSpec> {
    match family {
        Family::Original => line_in(domain, k, family),
        Family::Rotated => {
            let (rot, _) = rotate_pi(domain);
            line_in(&rot, k, family)
        }
    }
}

fn line_in(domain: &HexDomain, k: usize, family: Family) -> Result<LineSpec> {
    let top = domain.side(Side::Top);
    if k >= top.len() {
        return Err(Error::InvalidArgument(format!(
            "line index {k} out of range 0..={}",
            top.len().saturating_sub(1)
        )));
    }
    let frame = domain.frame();
    let start = frame.to_local(top[k].position);
    let mut points = Vec::new();
    let mut cur = start;
    loop {
        let g = frame.to_global(cur);
        if !domain.contains_vertex(g) {
            break;
        }
        points.push(g);
        cur = cur + LINE_STEP;
    }
    let exit = *points.last().unwrap();
    let exit_idx = domain.boundary_index(exit).ok_or_else(|| {
        Error::NumericFailure(format!("line {k} does not end on a boundary vertex"))
    })?;
    let mut below = Vec::with_capacity(points.len().saturating_sub(1));
    for w in points.windows(2) {
        let common: Vec<Point> = domain
            .neighbors(w[0])
            .iter()
            .copied()
            .filter(|x| domain.neighbors(w[1]).contains(x))
            .collect();
        if common.len() != 1 {
            return Err(Error::NumericFailure(format!(
                "line {k}: {} common neighbours between {} and {}",
                common.len(),
                w[0],
                w[1]
            )));
        }
        below.push(common[0]);
    }
    Ok(LineSpec {
        k,
        family,
        frame,
        level: start.level(),
        points,
        below,
        exit_side: domain.boundary()[exit_idx].side,
    })
}

/// How two consecutive strip edges meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adjacency {
    /// Shared vertex lies on the line `A_k` itself.
    OnLine,
    /// Shared vertex lies on the next vertex level below `A_k`.
    Below,
}

/// Zigzag of edges just below `A_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSpec {
    pub k: usize,
    pub edges: Vec<EdgeKey>,
    /// `labels[i]` describes the pair `(edges[i], edges[i+1])`.
    pub labels: Vec<Adjacency>,
}

pub fn strip_from_line(line: &LineSpec) -> StripSpec {
    let mut edges = Vec::with_capacity(2 * line.below.len());
    let mut labels = Vec::new();
    for (l, &a) in line.below.iter().enumerate() {
        if l > 0 {
            labels.push(Adjacency::OnLine);
        }
        edges.push(EdgeKey::new(line.points[l], a));
        edges.push(EdgeKey::new(a, line.points[l + 1]));
        labels.push(Adjacency::Below);
    }
    StripSpec { k: line.k, edges, labels }
}

pub fn strip_edges(domain: &HexDomain, k: usize) -> Result<StripSpec> {
    Ok(strip_from_line(&line_in(domain, k, Family::Original)?))
}

/// One step of a zigzag chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub from: EdgeKey,
    pub to: EdgeKey,
    pub shared: Point,
    pub adjacency: Adjacency,
}

/// Chain of consecutive strip edges from `e` to `e2`.
pub fn zigzag_path(strip: &StripSpec, e: &EdgeKey, e2: &EdgeKey) -> Result<Vec<Link>> {
    let i = strip.edges.iter().position(|x| x == e);
    let j = strip.edges.iter().position(|x| x == e2);
    let (i, j) = match (i, j) {
        (Some(i), Some(j)) => (i, j),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "edges {e} and {e2} are not in the same strip"
            )))
        }
    };
    let step: isize = if j >= i { 1 } else { -1 };
    let mut out = Vec::new();
    let mut cur = i as isize;
    while cur != j as isize {
        let nxt = cur + step;
        let (lo, hi) = (cur.min(nxt) as usize, cur.max(nxt) as usize);
        let from = strip.edges[cur as usize];
        let to = strip.edges[nxt as usize];
        out.push(Link {
            from,
            to,
            shared: from.shared_vertex(&to).expect("consecutive strip edges meet"),
            adjacency: strip.labels[lo.min(hi)],
        });
        cur = nxt;
    }
    Ok(out)
}

/// Point reflection through the parallelogram centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointReflection {
    pub twice_center: Point,
}

impl PointReflection {
    pub fn apply(&self, pt: Point) -> Point {
        self.twice_center - pt
    }

    pub fn apply_edge(&self, e: &EdgeKey) -> EdgeKey {
        e.map(|x| self.apply(x))
    }
}

/// Rotate the domain by π about its own centre.
///
/// The parallelogram is centrally symmetric, so the image occupies the same
/// vertices; what changes is the frame, and with it the side labels
/// (top ↔ bottom, right ↔ left).
pub fn rotate_pi(domain: &HexDomain) -> (HexDomain, PointReflection) {
    let f = domain.frame();
    let n = domain.n() as i64;
    let offset = cell_center(n, n).rotate(f.orientation as i32) + cell_center(f.shift[0], f.shift[1]);
    let (s1, s2) = cell_of_center(offset).expect("lattice translation");
    let rotated_frame = Frame::new(f.orientation + 3, [s1, s2]);
    let rotated = build_parallelogram(n, rotated_frame).expect("N >= 0 already checked");
    (
        rotated,
        PointReflection {
            twice_center: domain.twice_center(),
        },
    )
}
