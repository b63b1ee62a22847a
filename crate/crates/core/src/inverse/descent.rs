//! Reading the special solution on a diagonal line from its Cauchy data.
//!
//! Unknowns are the values at every vertex on or above the line.  Equations
//! are the Dirichlet data, the anchor values carried by the vertex-model D-N
//! map, and the vertex equations whose coefficients are known; values
//! strictly below the line vanish, so the equations just below it only
//! involve line values.  The system is
//! solved by least squares and a line value is accepted only if it does not
//! move along the numerical nullspace.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::partial::CauchyData;
use crate::error::{Error, Result};
use crate::lattice::{EdgeKey, HexDomain, LineSpec, Point};
use crate::linalg;
use crate::vertex::PotentialMap;

/// Singular values below `RCOND · σ_max` span the nullspace.
pub const RCOND: f64 = 1e-10;
/// A line value is identifiable when its nullspace component is below this.
pub const NULL_TOL: f64 = 1e-8;
/// Line values below this are too small to divide by.
pub const UNDERFLOW: f64 = 1e-12;

/// Edge coefficients `(s_e, a_e)`; `None` marks an edge whose potential is not known.
pub type CoeffFn<'a> = dyn Fn(&EdgeKey) -> Result<Option<(f64, f64)>> + 'a;

/// Values of the special solution along one line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineTrace {
    pub line: LineSpec,
    pub lambda: f64,
    /// `û(α_{k,ℓ})`
    pub values: Vec<f64>,
    pub identifiable: Vec<bool>,
    /// `max |Ax − b|` of the descent system (rows normalised).
    pub residual: f64,
}

impl LineTrace {
    pub fn fully_identified(&self) -> bool {
        self.identifiable.iter().all(|x| *x)
    }
}

/// Tolerances for the descent system.
#[derive(Debug, Clone, Copy)]
pub struct DescentTol {
    pub residual: f64,
}

impl Default for DescentTol {
    fn default() -> Self {
        DescentTol { residual: 1e-7 }
    }
}

struct System {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    ix: HashMap<Point, usize>,
}

/// Rows of the descent system; with `cauchy == None` the right-hand side is zero.
fn system(domain: &HexDomain, line: &LineSpec, cauchy: Option<&CauchyData>, coeff: &CoeffFn<'_>) -> Result<System> {
    let level = line.level;
    let mut vars: Vec<Point> = domain
        .interior()
        .iter()
        .copied()
        .chain(domain.boundary().iter().map(|b| b.position))
        .filter(|p| domain.local_level(*p) >= level)
        .collect();
    vars.sort();
    let ix: HashMap<Point, usize> = vars.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let nv = vars.len();
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();

    for (p, b) in domain.boundary().iter().enumerate() {
        if let Some(&i) = ix.get(&b.position) {
            rows.push((vec![(i, 1.0)], cauchy.map_or(0.0, |c| c.f[p])));
        }
        if let Some(&i) = ix.get(&b.anchor) {
            rows.push((vec![(i, 1.0)], cauchy.map_or(0.0, |c| -c.lambda_f[p])));
        }
    }
    'vertex: for &v in domain.interior() {
        let iv = ix.get(&v).copied();
        // below the line u(v) = 0; its equation still ties the neighbours above
        if iv.is_none() && !domain.neighbors(v).iter().any(|w| ix.contains_key(w)) {
            continue;
        }
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut diag = 0.0;
        for &w in domain.neighbors(v) {
            let iw = ix.get(&w).copied();
            if iv.is_none() && iw.is_none() {
                continue;
            }
            let Some((s, a)) = coeff(&EdgeKey::new(v, w))? else {
                continue 'vertex;
            };
            diag -= a / s;
            if let Some(iw) = iw {
                row.push((iw, 1.0 / s));
            }
        }
        if let Some(iv) = iv {
            row.push((iv, diag));
        }
        let mx = row.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs()));
        for (_, c) in row.iter_mut() {
            *c /= mx;
        }
        rows.push((row, 0.0));
    }

    let mut a = DMatrix::zeros(rows.len(), nv);
    let mut b = DMatrix::zeros(rows.len(), 1);
    for (r, (row, rhs)) in rows.iter().enumerate() {
        for (i, c) in row {
            a[(r, *i)] += c;
        }
        b[(r, 0)] = *rhs;
    }
    Ok(System { a, b, ix })
}

fn null_component(sol: &linalg::LstSq, i: usize) -> f64 {
    if sol.nullspace.ncols() == 0 {
        0.0
    } else {
        sol.nullspace.row(i).amax()
    }
}

/// Which line points the descent system pins down, independent of the data.
pub fn identifiable_points(domain: &HexDomain, line: &LineSpec, coeff: &CoeffFn<'_>) -> Result<Vec<bool>> {
    let System { a, b, ix } = system(domain, line, None, coeff)?;
    let sol = linalg::lstsq(&a, &b, RCOND);
    Ok(line.points.iter().map(|p| null_component(&sol, ix[p]) < NULL_TOL).collect())
}

/// Least-squares descent allowing some unknown edges; reports per-point
/// identifiability instead of failing.
pub fn descend(
    domain: &HexDomain,
    line: &LineSpec,
    cauchy: &CauchyData,
    coeff: &CoeffFn<'_>,
    lambda: f64,
    tol: &DescentTol,
) -> Result<LineTrace> {
    let System { a, b, ix } = system(domain, line, Some(cauchy), coeff)?;
    let sol = linalg::lstsq(&a, &b, RCOND);
    let x = sol.x.column(0).clone_owned();
    let resid = (&a * &x - b.column(0)).amax();
    let scale = x.amax().max(1.0);
    if resid > tol.residual * scale {
        return Err(Error::Inconsistency {
            lambda,
            residual: resid / scale,
        });
    }
    let mut values = Vec::with_capacity(line.points.len());
    let mut identifiable = Vec::with_capacity(line.points.len());
    for p in &line.points {
        let i = ix[p];
        values.push(x[i]);
        identifiable.push(null_component(&sol, i) < NULL_TOL);
    }
    Ok(LineTrace {
        line: line.clone(),
        lambda,
        values,
        identifiable,
        residual: resid / scale,
    })
}

/// Descent with every edge on or above the line known: all line values must
/// be identifiable.
pub fn cauchy_descend(
    domain: &HexDomain,
    known: &PotentialMap,
    lambda: f64,
    cauchy: &CauchyData,
    line: &LineSpec,
) -> Result<LineTrace> {
    let coeff = |e: &EdgeKey| -> Result<Option<(f64, f64)>> {
        let t = known.transfer(e, lambda)?;
        Ok(Some((t.s, t.a)))
    };
    let trace = descend(domain, line, cauchy, &coeff, lambda, &DescentTol::default())?;
    if let Some(point) = trace.identifiable.iter().position(|x| !x) {
        return Err(Error::DescentUnderdetermined { lambda, point });
    }
    Ok(trace)
}

/// `f_{k,ℓ+1} = û(α_{k,ℓ+1}) / û(α_{k,ℓ})`.
pub fn extract_strip_ratios(trace: &LineTrace) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(trace.values.len().saturating_sub(1));
    for (l, w) in trace.values.windows(2).enumerate() {
        if w[0].abs() < UNDERFLOW || !trace.identifiable[l] || !trace.identifiable[l + 1] {
            return Err(Error::RatioSingular {
                lambda: trace.lambda,
                position: l,
                value: w[0].abs(),
            });
        }
        out.push(w[1] / w[0]);
    }
    Ok(out)
}

/// Multiplicative relation `Π s(num) / Π s(den) = value` between edge
/// characteristics, read off a line between two identified points.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub num: Vec<EdgeKey>,
    pub den: Vec<EdgeKey>,
    pub value: f64,
}

/// Relations between consecutive identified line values.
///
/// Between `α_i` and `α_j` the vertex equations at the vertices just below
/// the line give `û(α_j)/û(α_i) = Π_{l=i}^{j−1} (−s(a_l, α_{l+1}) / s(a_l, α_l))`.
pub fn line_relations(trace: &LineTrace) -> Vec<Relation> {
    let idx: Vec<usize> = (0..trace.values.len())
        .filter(|&i| trace.identifiable[i] && trace.values[i].abs() >= UNDERFLOW)
        .collect();
    let line = &trace.line;
    let mut out = Vec::new();
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
        out.push(Relation {
            num: (i..j).map(|l| EdgeKey::new(line.below[l], line.points[l + 1])).collect(),
            den: (i..j).map(|l| EdgeKey::new(line.below[l], line.points[l])).collect(),
            value: sign * trace.values[j] / trace.values[i],
        });
    }
    out
}
