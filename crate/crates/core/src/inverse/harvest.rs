//! Sampling the unknown edge characteristics `s_e(λ)` through the whole
//! pipeline and locating their zeros, which are the edge Dirichlet
//! eigenvalues.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::descent::{descend, line_relations, DescentTol, Relation};
use super::oracle::DNOracle;
use super::partial::{check_order, special_solution_from_dn};
use super::plan::frame_lines;
use crate::error::{Error, Result};
use crate::lattice::{EdgeKey, HexDomain, LineSpec};
use crate::sturm::refine_root;
use crate::vertex::{cos_sqrt, PotentialMap, Tolerances, EXCLUDED_COS, HARVEST_SQRT_STEP};

/// Relative exclusion radius around known-edge eigenvalues.
pub const KNOWN_EIG_REL: f64 = 5e-5;
/// Samples on each side of a bracket used by the continuation fit.
pub const FIT_HALF_WIDTH: usize = 6;
pub const FIT_MAX_DEGREE: usize = 9;

/// Largest energy harvested for `m_modes` cosine modes: room for `2M + 2`
/// eigenvalues with a margin.
pub fn lambda_max(m_modes: usize) -> f64 {
    let k = (2 * m_modes + 3) as f64;
    k * k * PI * PI * 1.1
}

/// Harvest nodes in `√λ`: `(j + phase)·π/40`, `phase ∈ (0, 1)`.
pub fn harvest_sqrt_grid(m_modes: usize, phase: f64) -> Vec<f64> {
    let tmax = lambda_max(m_modes).sqrt();
    (0..)
        .map(|j| (j as f64 + phase) * HARVEST_SQRT_STEP)
        .take_while(|t| *t <= tmax)
        .collect()
}

/// Why an energy is skipped, or `None` if it may be used.
pub fn exclusion_reason(lambda: f64, known_eigs: &[f64], tol: &Tolerances) -> Option<String> {
    let c = cos_sqrt(lambda);
    if let Some(t) = EXCLUDED_COS.iter().find(|t| (c - **t).abs() <= tol.tol_t) {
        return Some(format!("cos(sqrt(lambda)) within {} of {t:.6}", tol.tol_t));
    }
    known_eigs
        .iter()
        .find(|e| (lambda - **e).abs() <= tol.tol_edge.max(KNOWN_EIG_REL * e.abs()))
        .map(|e| format!("next to known edge eigenvalue {e}"))
}

/// A placement with its lines.
#[derive(Debug, Clone)]
pub struct FrameLines {
    pub domain: Arc<HexDomain>,
    pub lines: Vec<LineSpec>,
}

impl FrameLines {
    pub fn new(domain: Arc<HexDomain>) -> Result<Self> {
        let lines = frame_lines(&domain)?;
        Ok(FrameLines { domain, lines })
    }
}

/// Everything one stage needs to evaluate `s_e(λ)` for its target edges.
pub struct StageContext {
    pub stage: usize,
    pub frames: Vec<FrameLines>,
    /// Background plus potentials recovered at earlier stages.
    pub known: PotentialMap,
    /// Every edge not known yet, including those of later stages.
    pub unknown: BTreeSet<EdgeKey>,
    pub targets: Vec<EdgeKey>,
    pub descent: DescentTol,
}

/// Characteristics recovered at one energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub lambda: f64,
    pub s: BTreeMap<EdgeKey, f64>,
    /// Largest relative disagreement among relations not used for
    /// substitution (redundant ones and those between known edges).
    pub gauge: f64,
}

/// Evaluate the target characteristics at `lambda`.
pub fn sample_stage(oracle: &dyn DNOracle, ctx: &StageContext, lambda: f64) -> Result<Sample> {
    let memo: RefCell<HashMap<EdgeKey, (f64, f64)>> = RefCell::new(HashMap::new());
    let known = |e: &EdgeKey| -> Result<(f64, f64)> {
        if let Some(v) = memo.borrow().get(e) {
            return Ok(*v);
        }
        let t = ctx.known.transfer(e, lambda)?;
        memo.borrow_mut().insert(*e, (t.s, t.a));
        Ok((t.s, t.a))
    };
    let coeff = |e: &EdgeKey| -> Result<Option<(f64, f64)>> {
        if ctx.unknown.contains(e) {
            Ok(None)
        } else {
            known(e).map(Some)
        }
    };
    let mut relations: Vec<Relation> = Vec::new();
    for fl in &ctx.frames {
        let dn = oracle.dn(fl.domain.frame(), lambda)?;
        check_order(&dn, &fl.domain, fl.domain.frame())?;
        for line in &fl.lines {
            let cd = special_solution_from_dn(&dn, &fl.domain, line)?;
            let trace = descend(&fl.domain, line, &cd, &coeff, lambda, &ctx.descent)?;
            // relations among known edges only feed the consistency residual
            relations.extend(line_relations(&trace));
        }
    }
    let mut s: BTreeMap<EdgeKey, f64> = BTreeMap::new();
    let value_of = |e: &EdgeKey, s: &BTreeMap<EdgeKey, f64>| -> Result<Option<f64>> {
        if ctx.unknown.contains(e) {
            Ok(s.get(e).copied())
        } else {
            Ok(Some(known(e)?.0))
        }
    };
    let mut used = vec![false; relations.len()];
    loop {
        let mut grew = false;
        for (ri, rel) in relations.iter().enumerate() {
            if used[ri] {
                continue;
            }
            let mut open = None;
            let mut n_open = 0;
            let (mut pn, mut pd) = (1.0, 1.0);
            for (e, num) in rel.num.iter().map(|e| (e, true)).chain(rel.den.iter().map(|e| (e, false))) {
                match value_of(e, &s)? {
                    Some(v) if num => pn *= v,
                    Some(v) => pd *= v,
                    None => {
                        n_open += 1;
                        open = Some((*e, num));
                    }
                }
            }
            if n_open != 1 {
                continue;
            }
            let (e, num) = open.unwrap();
            let v = if num { rel.value * pd / pn } else { pn / (rel.value * pd) };
            if v.is_finite() {
                s.insert(e, v);
                used[ri] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let mut gauge = 0.0f64;
    for (ri, rel) in relations.iter().enumerate() {
        if used[ri] {
            continue;
        }
        let mut lhs = 1.0;
        let mut complete = true;
        for e in &rel.num {
            match value_of(e, &s)? {
                Some(v) => lhs *= v,
                None => complete = false,
            }
        }
        for e in &rel.den {
            match value_of(e, &s)? {
                Some(v) => lhs /= v,
                None => complete = false,
            }
        }
        if complete {
            gauge = gauge.max((lhs - rel.value).abs() / (lhs.abs() + rel.value.abs()).max(1e-300));
        }
    }
    s.retain(|e, _| ctx.targets.contains(e));
    Ok(Sample { lambda, s, gauge })
}

/// `t·s(t²)` on the harvest grid for one edge: `(t, value)` pairs, sorted.
pub fn edge_series(samples: &[Sample], e: &EdgeKey) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = samples
        .iter()
        .filter_map(|smp| {
            let t = smp.lambda.sqrt();
            smp.s.get(e).map(|v| (t, t * v))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Sign-change brackets `(t_lo, t_hi, g_lo, g_hi)` of a series.
pub fn brackets(series: &[(f64, f64)]) -> Vec<(f64, f64, f64, f64)> {
    series
        .windows(2)
        .filter(|w| w[0].1 != 0.0 && (w[0].1 > 0.0) != (w[1].1 > 0.0))
        .map(|w| (w[0].0, w[1].0, w[0].1, w[1].1))
        .collect()
}

/// Least-squares polynomial through the points nearest `center`; returns the
/// root inside `[lo, hi]`.
pub fn continuation_root(points: &[(f64, f64)], center: f64, lo: f64, hi: f64) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| (a.0 - center).abs().total_cmp(&(b.0 - center).abs()));
    pts.truncate(2 * FIT_HALF_WIDTH);
    if pts.len() < 4 {
        return Err(Error::NumericFailure(format!(
            "only {} samples around sqrt(lambda) = {center:.6} for the continuation fit",
            pts.len()
        )));
    }
    let width = pts.iter().map(|p| (p.0 - center).abs()).fold(0.0, f64::max).max(1e-12);
    let deg = FIT_MAX_DEGREE.min(pts.len() - 2);
    let a = DMatrix::from_fn(pts.len(), deg + 1, |i, j| ((pts[i].0 - center) / width).powi(j as i32));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::NumericFailure(format!("continuation fit failed: {e}")))?;
    let poly = |t: f64| -> Result<f64> {
        let x = (t - center) / width;
        Ok(coef.iter().rev().fold(0.0, |acc, c| acc * x + c))
    };
    let (plo, phi) = (poly(lo)?, poly(hi)?);
    if plo.signum() == phi.signum() {
        return Err(Error::NumericFailure(format!(
            "continuation fit lost the sign change in [{lo:.6}, {hi:.6}]"
        )));
    }
    refine_root(poly, lo, hi, plo, phi, 1e-14 * hi.abs().max(1.0))
}
