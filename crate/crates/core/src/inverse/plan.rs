//! Which line families resolve which support edges, and in what order.
//!
//! Every line of a placed parallelogram yields multiplicative relations
//! between the characteristics of the edges hanging below it.  An unknown
//! edge is resolved once a relation involves it and otherwise only known or
//! already resolved edges.  Edges resolved at one stage become known for the
//! next (their potentials are reconstructed in between).  Identifiability of
//! line points is structural, so it is decided with generic coefficients.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descent::identifiable_points;
use crate::error::{Error, Result};
use crate::lattice::{build_parallelogram, diagonal_line, EdgeKey, Family, Frame, HexDomain, LineSpec, Side};

/// Translations tried around the base placement, per axis.
pub const SHIFT_RADIUS: i64 = 8;

/// One edge given by its cell and side in base-domain coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRef {
    pub cell: [i64; 2],
    pub side: usize,
}

/// Support hypothesis: whole cells and/or single edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSpec {
    #[serde(default)]
    pub cells: Vec<[i64; 2]>,
    #[serde(default)]
    pub edges: Vec<EdgeRef>,
}

impl SupportSpec {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.edges.is_empty()
    }

    /// Global edge keys; every edge must lie strictly inside `base`.
    pub fn resolve(&self, base: &HexDomain) -> Result<BTreeSet<EdgeKey>> {
        let frame = base.frame();
        let mut out = BTreeSet::new();
        let mut local = Vec::new();
        for c in &self.cells {
            local.extend((0..6).map(|j| EdgeKey::of_cell(c[0], c[1], j)));
        }
        for e in &self.edges {
            if e.side > 5 {
                return Err(Error::Validation(format!("edge side {} out of range 0..=5", e.side)));
            }
            local.push(EdgeKey::of_cell(e.cell[0], e.cell[1], e.side));
        }
        for e in local {
            let g = e.map(|p| frame.to_global(p));
            if !base.is_strictly_inside(&g) {
                return Err(Error::Validation(format!(
                    "support edge {e} touches the boundary layer or leaves the domain"
                )));
            }
            out.insert(g);
        }
        Ok(out)
    }
}

/// Edges resolved at one stage and the placements whose lines are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub frames: Vec<Frame>,
    pub resolved: Vec<EdgeKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub n: usize,
    pub base: Frame,
    pub stages: Vec<StagePlan>,
}

impl Plan {
    /// All placements needed, base first.
    pub fn frames(&self) -> Vec<Frame> {
        let mut out = vec![self.base];
        for st in &self.stages {
            for f in &st.frames {
                if !out.contains(f) {
                    out.push(*f);
                }
            }
        }
        out
    }

    pub fn support(&self) -> BTreeSet<EdgeKey> {
        self.stages.iter().flat_map(|s| s.resolved.iter().copied()).collect()
    }
}

/// Lines of a placement drawn in its own frame.
pub fn frame_lines(domain: &HexDomain) -> Result<Vec<LineSpec>> {
    (0..domain.side(Side::Top).len())
        .map(|k| diagonal_line(domain, k, Family::Original))
        .collect()
}

/// Deterministic, well-spread stand-ins for `(s_e, a_e)`.
fn generic_coeff(e: &EdgeKey) -> (f64, f64) {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for v in [e.a.p, e.a.q, e.b.p, e.b.q] {
        h ^= v as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    let u1 = (h >> 11) as f64 / (1u64 << 53) as f64;
    let h2 = h.wrapping_mul(0x94d0_49bb_1331_11eb) ^ (h >> 29);
    let u2 = (h2 >> 11) as f64 / (1u64 << 53) as f64;
    (1.0 + 0.3 * u1, u2)
}

/// Unknown-edge content of one relation: `(numerator, denominator)` edges.
type Shape = (Vec<EdgeKey>, Vec<EdgeKey>);

/// Relation shapes a placement offers, restricted to `unknown` edges.
fn frame_shapes(domain: &HexDomain, unknown: &BTreeSet<EdgeKey>) -> Result<Vec<Shape>> {
    let coeff = |e: &EdgeKey| -> Result<Option<(f64, f64)>> {
        Ok(if unknown.contains(e) { None } else { Some(generic_coeff(e)) })
    };
    let mut out = Vec::new();
    for line in frame_lines(domain)? {
        let ok = identifiable_points(domain, &line, &coeff)?;
        let idx: Vec<usize> = (0..ok.len()).filter(|&i| ok[i]).collect();
        for w in idx.windows(2) {
            let num: Vec<EdgeKey> = (w[0]..w[1])
                .map(|l| EdgeKey::new(line.below[l], line.points[l + 1]))
                .filter(|e| unknown.contains(e))
                .collect();
            let den: Vec<EdgeKey> = (w[0]..w[1])
                .map(|l| EdgeKey::new(line.below[l], line.points[l]))
                .filter(|e| unknown.contains(e))
                .collect();
            if !num.is_empty() || !den.is_empty() {
                out.push((num, den));
            }
        }
    }
    Ok(out)
}

/// Closure of single-unknown substitution over `shapes`.
fn substitution_closure<'a>(shapes: impl Iterator<Item = &'a Shape> + Clone, unknown: &BTreeSet<EdgeKey>) -> BTreeSet<EdgeKey> {
    let mut resolved = BTreeSet::new();
    loop {
        let mut grew = false;
        for (num, den) in shapes.clone() {
            let open: Vec<&EdgeKey> = num
                .iter()
                .chain(den)
                .filter(|e| unknown.contains(e) && !resolved.contains(*e))
                .collect();
            if open.len() == 1 {
                resolved.insert(*open[0]);
                grew = true;
            }
        }
        if !grew {
            return resolved;
        }
    }
}

/// Candidate placements: the base one, then every rotation and nearby
/// translation that meets `unknown` without hanging a pendant edge on it.
/// Edges outside a placement do not influence its D-N map.
pub fn candidate_frames(n: usize, base: Frame, unknown: &BTreeSet<EdgeKey>) -> Result<Vec<HexDomain>> {
    let mut frames = vec![base];
    for r in 0..6u8 {
        for t1 in -SHIFT_RADIUS..=SHIFT_RADIUS {
            for t2 in -SHIFT_RADIUS..=SHIFT_RADIUS {
                let f = Frame::new(r, [base.shift[0] + t1, base.shift[1] + t2]);
                if f != base {
                    frames.push(f);
                }
            }
        }
    }
    let built: Vec<Option<HexDomain>> = frames
        .par_iter()
        .map(|f| {
            let d = build_parallelogram(n as i64, *f).ok()?;
            let usable = (d.frame() == base || unknown.iter().any(|e| d.has_edge(e)))
                && !unknown.iter().any(|e| d.has_edge(e) && d.is_pendant_edge(e));
            usable.then_some(d)
        })
        .collect();
    Ok(built.into_iter().flatten().collect())
}

/// Greedy staged plan.  Fails with `SupportUnresolvable` when a stage
/// resolves nothing.
pub fn plan_support(n: usize, base: Frame, support: &BTreeSet<EdgeKey>) -> Result<Plan> {
    let mut stages = Vec::new();
    if support.is_empty() {
        return Ok(Plan { n, base, stages });
    }
    let mut unknown = support.clone();
    while !unknown.is_empty() {
        let cands = candidate_frames(n, base, &unknown)?;
        if cands.first().map(|d| d.frame()) != Some(base) {
            return Err(Error::Validation(format!("support does not fit the base placement {base}")));
        }
        let shapes: Vec<Result<Vec<Shape>>> = cands.par_iter().map(|d| frame_shapes(d, &unknown)).collect();
        let shapes: Vec<Vec<Shape>> = shapes.into_iter().collect::<Result<_>>()?;
        let mut chosen = vec![0usize];
        let mut resolved = substitution_closure(shapes[0].iter(), &unknown);
        loop {
            let best = (1..cands.len())
                .filter(|i| !chosen.contains(i) && !shapes[*i].is_empty())
                .map(|i| {
                    let r = substitution_closure(
                        chosen.iter().chain(std::iter::once(&i)).flat_map(|&c| shapes[c].iter()),
                        &unknown,
                    );
                    (r.len(), i, r)
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            match best {
                Some((len, i, r)) if len > resolved.len() => {
                    chosen.push(i);
                    resolved = r;
                }
                _ => break,
            }
        }
        if resolved.is_empty() {
            return Err(Error::SupportUnresolvable(unknown.len()));
        }
        let frames = chosen
            .iter()
            .filter(|&&c| c == 0 || shapes[c].iter().any(|(a, b)| a.iter().chain(b).any(|e| resolved.contains(e))))
            .map(|&c| cands[c].frame())
            .collect();
        for e in &resolved {
            unknown.remove(e);
        }
        stages.push(StagePlan {
            frames,
            resolved: resolved.into_iter().collect(),
        });
    }
    Ok(Plan { n, base, stages })
}

/// Map from edges to their stage index.
pub fn stage_of(plan: &Plan) -> BTreeMap<EdgeKey, usize> {
    let mut m = BTreeMap::new();
    for (i, s) in plan.stages.iter().enumerate() {
        for e in &s.resolved {
            m.insert(*e, i);
        }
    }
    m
}

