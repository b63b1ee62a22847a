//! λ-dependent vertex systems on a parallelogram domain: assembly of the
//! reduced vertex operator, interior Dirichlet solves, interior D-N maps in
//! the vertex and edge models, admissibility of λ and the free dispersion
//! relation.
//!
//! Two independent solution routes exist.  The reduced vertex operator
//! divides by `s_e = φ_e(1, λ)` and is what the theory is phrased in; the
//! edge-variable system keeps one derivative unknown per edge and stays well
//! conditioned when some `s_e` is small.  D-N maps are produced by the edge
//! route; the vertex route is kept for cross-checks and for the descent in
//! the inverse engine.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{EdgeKey, HexDomain, Point};
use crate::linalg;
use crate::sturm::{self, BackgroundCache, Potential, TransferData};

/// Values of `cos√λ` at which the free lattice is exceptional.  `±1/2` is
/// included on purpose (see the admissibility notes in the README).
pub const EXCLUDED_COS: [f64; 7] = [0.0, 1.0 / 3.0, -1.0 / 3.0, 0.5, -0.5, 1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Margin on `cos√λ` around the exceptional values.
    pub tol_t: f64,
    /// Margin in λ around edge Dirichlet eigenvalues.
    pub tol_edge: f64,
    /// Condition threshold signalling an interior eigenvalue.
    pub cond_max: f64,
    /// `|s_e|` below this is treated as an edge eigenvalue hit.
    pub singular_s: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_t: 1e-6,
            tol_edge: 1e-6,
            cond_max: 1e12,
            singular_s: 1e-13,
        }
    }
}

/// Edge potentials: a background `q₀` on every edge plus explicit overrides.
#[derive(Debug, Clone)]
pub struct PotentialMap {
    background: Potential,
    edges: BTreeMap<EdgeKey, Potential>,
    cache: Arc<BackgroundCache>,
}

impl Default for PotentialMap {
    fn default() -> Self {
        PotentialMap::free()
    }
}

impl PotentialMap {
    pub fn free() -> Self {
        PotentialMap::with_background(Potential::zero())
    }

    pub fn with_background(q0: Potential) -> Self {
        PotentialMap {
            cache: Arc::new(BackgroundCache::new(q0.clone())),
            background: q0,
            edges: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, e: EdgeKey, q: Potential) {
        self.edges.insert(e, q);
    }

    pub fn remove(&mut self, e: &EdgeKey) -> Option<Potential> {
        self.edges.remove(e)
    }

    pub fn background(&self) -> &Potential {
        &self.background
    }

    pub fn get(&self, e: &EdgeKey) -> &Potential {
        self.edges.get(e).unwrap_or(&self.background)
    }

    pub fn is_overridden(&self, e: &EdgeKey) -> bool {
        self.edges.contains_key(e)
    }

    /// Explicitly assigned edges (which may coincide with the background).
    pub fn overrides(&self) -> impl Iterator<Item = (&EdgeKey, &Potential)> {
        self.edges.iter()
    }

    /// Edges whose potential differs from the background.
    pub fn perturbed(&self) -> Vec<EdgeKey> {
        self.edges
            .iter()
            .filter(|(_, q)| !q.same_as(&self.background))
            .map(|(e, _)| *e)
            .collect()
    }

    pub fn transfer(&self, e: &EdgeKey, lambda: f64) -> Result<TransferData> {
        match self.edges.get(e) {
            Some(q) => sturm::integrate_ivp(q, lambda),
            None => self.cache.get(lambda),
        }
    }

    pub fn background_transfer(&self, lambda: f64) -> Result<TransferData> {
        self.cache.get(lambda)
    }

    /// Distinct potentials present on the given edges.
    pub fn distinct_potentials<'a>(&'a self, edges: impl Iterator<Item = &'a EdgeKey>) -> Vec<&'a Potential> {
        let mut out: Vec<&Potential> = Vec::new();
        for e in edges {
            let q = self.get(e);
            if !out.iter().any(|p| p.same_as(q)) {
                out.push(q);
            }
        }
        out
    }
}

/// `(s_e, a_e) = (φ_e(1, λ), φ_e'(1, λ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCharacteristic {
    pub edge: EdgeKey,
    pub lambda: f64,
    pub s: f64,
    pub a: f64,
}

pub fn edge_characteristics(potmap: &PotentialMap, edge: &EdgeKey, lambda: f64) -> Result<EdgeCharacteristic> {
    edge_characteristics_tol(potmap, edge, lambda, Tolerances::default().singular_s)
}

pub fn edge_characteristics_tol(
    potmap: &PotentialMap,
    edge: &EdgeKey,
    lambda: f64,
    singular_s: f64,
) -> Result<EdgeCharacteristic> {
    let t = potmap.transfer(edge, lambda)?;
    if t.s.abs() < singular_s {
        return Err(Error::EdgeSpectrumHit {
            edge: edge.to_string(),
            lambda,
            s: t.s.abs(),
        });
    }
    Ok(EdgeCharacteristic {
        edge: *edge,
        lambda,
        s: t.s,
        a: t.a,
    })
}

/// Blocks of `−Δ̂_{𝒱,λ} + Q̂_{𝒱,λ}` restricted to the interior vertices.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub lambda: f64,
    /// interior × interior
    pub a_ii: DMatrix<f64>,
    /// interior × boundary
    pub a_ib: DMatrix<f64>,
    pub deg: Vec<f64>,
    /// `min |s_e|` over the edges at each interior vertex.
    pub row_scale: Vec<f64>,
}

pub fn assemble(domain: &HexDomain, potmap: &PotentialMap, lambda: f64) -> Result<AssembledSystem> {
    let tol = Tolerances::default();
    let chars = domain
        .edges()
        .iter()
        .map(|e| edge_characteristics_tol(potmap, e, lambda, tol.singular_s).map(|c| (*e, c)))
        .collect::<Result<HashMap<_, _>>>()?;
    assemble_from(domain, lambda, |e| {
        let c = chars[e];
        Ok((c.s, c.a))
    })
}

/// Assemble with caller-supplied `(s_e, a_e)`.
pub fn assemble_from(
    domain: &HexDomain,
    lambda: f64,
    mut coeff: impl FnMut(&EdgeKey) -> Result<(f64, f64)>,
) -> Result<AssembledSystem> {
    let n = domain.interior().len();
    let m = domain.boundary().len();
    let mut a_ii = DMatrix::zeros(n, n);
    let mut a_ib = DMatrix::zeros(n, m);
    let mut deg = vec![0.0; n];
    let mut row_scale = vec![f64::INFINITY; n];
    for (i, &v) in domain.interior().iter().enumerate() {
        let nb = domain.neighbors(v);
        let d = nb.len() as f64;
        deg[i] = d;
        for &w in nb {
            let (s, a) = coeff(&EdgeKey::new(v, w))?;
            row_scale[i] = row_scale[i].min(s.abs());
            a_ii[(i, i)] += a / s / d;
            if let Some(j) = domain.interior_index(w) {
                a_ii[(i, j)] -= 1.0 / s / d;
            } else if let Some(j) = domain.boundary_index(w) {
                a_ib[(i, j)] -= 1.0 / s / d;
            }
        }
    }
    Ok(AssembledSystem {
        lambda,
        a_ii,
        a_ib,
        deg,
        row_scale,
    })
}

impl AssembledSystem {
    /// Solve `A_II U = −A_IB F` for a block of boundary data (columns of `f`).
    pub fn solve(&self, f: &DMatrix<f64>, cond_max: f64) -> Result<DMatrix<f64>> {
        let mut a = self.a_ii.clone();
        let mut rhs = -(&self.a_ib * f);
        for i in 0..a.nrows() {
            let sc = self.row_scale[i] * self.deg[i];
            a.row_mut(i).scale_mut(sc);
            rhs.row_mut(i).scale_mut(sc);
        }
        let fac = linalg::factor(&a).ok_or(Error::InteriorSpectrumHit {
            lambda: self.lambda,
            condition: f64::INFINITY,
        })?;
        if fac.cond > cond_max {
            return Err(Error::InteriorSpectrumHit {
                lambda: self.lambda,
                condition: fac.cond,
            });
        }
        fac.solve(&rhs).ok_or(Error::InteriorSpectrumHit {
            lambda: self.lambda,
            condition: f64::INFINITY,
        })
    }

    /// `max |D·A − (D·A)ᵀ|` on the interior block.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.a_ii.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let x = self.deg[i] * self.a_ii[(i, j)] - self.deg[j] * self.a_ii[(j, i)];
                worst = worst.max(x.abs());
            }
        }
        worst
    }
}

/// Interior values of the solution with boundary values `f` (canonical order).
pub fn solve_interior_dirichlet(
    domain: &HexDomain,
    potmap: &PotentialMap,
    lambda: f64,
    f: &[f64],
) -> Result<Vec<f64>> {
    if f.len() != domain.boundary().len() {
        return Err(Error::InvalidArgument(format!(
            "boundary data has {} entries, domain has {} boundary vertices",
            f.len(),
            domain.boundary().len()
        )));
    }
    let sys = assemble(domain, potmap, lambda)?;
    let fm = DMatrix::from_column_slice(f.len(), 1, f);
    let u = sys.solve(&fm, Tolerances::default().cond_max)?;
    Ok(u.column(0).iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DnModel {
    Vertex,
    Edge,
}

/// Dense interior D-N map at one λ.
#[derive(Debug, Clone, PartialEq)]
pub struct DNMatrix {
    pub lambda: f64,
    pub model: DnModel,
    pub boundary_order: Vec<Point>,
    pub matrix: DMatrix<f64>,
}

impl DNMatrix {
    pub fn dim(&self) -> usize {
        self.boundary_order.len()
    }

    /// `max |Λ − Λᵀ|` (boundary vertices all have degree one).
    pub fn reciprocity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }
}

enum Node {
    Interior(usize),
    Boundary(usize),
}

/// Edge-variable formulation: unknowns are interior vertex values and the
/// derivative `d_e` at the tail of every edge.
struct EdgeSystem {
    n: usize,
    /// (tail, head) per edge; pendant edges have the pendant as tail
    orient: Vec<(Node, Node)>,
    fac: linalg::Factored,
    /// row scale factors already applied to the matrix
    row_scale: Vec<f64>,
    transfer: Vec<TransferData>,
    m: usize,
}

impl EdgeSystem {
    fn build(domain: &HexDomain, potmap: &PotentialMap, lambda: f64, tol: &Tolerances) -> Result<Self> {
        let n = domain.interior().len();
        let m = domain.boundary().len();
        let edges = domain.edges();
        let ne = edges.len();
        let node = |p: Point| -> Node {
            match domain.interior_index(p) {
                Some(i) => Node::Interior(i),
                None => Node::Boundary(domain.boundary_index(p).expect("edge endpoint in domain")),
            }
        };
        let mut orient = Vec::with_capacity(ne);
        let mut transfer = Vec::with_capacity(ne);
        for e in edges {
            let t = potmap.transfer(e, lambda)?;
            transfer.push(t);
            let (tail, head) = if domain.boundary_index(e.b).is_some() {
                (e.b, e.a)
            } else {
                (e.a, e.b)
            };
            orient.push((node(tail), node(head)));
        }
        let dim = n + ne;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        for (k, ((t, h), tr)) in orient.iter().zip(&transfer).enumerate() {
            // u(h) − c u(t) − s d = 0
            if let Node::Interior(j) = h {
                a[(k, *j)] += 1.0;
            }
            if let Node::Interior(i) = t {
                a[(k, *i)] -= tr.c;
            }
            a[(k, n + k)] -= tr.s;
            // Kirchhoff: outgoing derivatives
            if let Node::Interior(i) = t {
                a[(ne + i, n + k)] += 1.0;
            }
            if let Node::Interior(j) = h {
                a[(ne + j, n + k)] -= tr.a;
                if let Node::Interior(i) = t {
                    a[(ne + j, *i)] -= tr.c_prime;
                }
            }
        }
        let mut row_scale = vec![1.0; dim];
        for (i, sc) in row_scale.iter_mut().enumerate() {
            let mx = a.row(i).iter().fold(0.0f64, |m, v: &f64| m.max(v.abs()));
            if mx > 0.0 {
                *sc = 1.0 / mx;
                a.row_mut(i).scale_mut(*sc);
            }
        }
        let fac = linalg::factor(&a).ok_or(Error::InteriorSpectrumHit {
            lambda,
            condition: f64::INFINITY,
        })?;
        if fac.cond > tol.cond_max {
            return Err(Error::InteriorSpectrumHit {
                lambda,
                condition: fac.cond,
            });
        }
        Ok(EdgeSystem {
            n,
            orient,
            fac,
            row_scale,
            transfer,
            m,
        })
    }

    /// Solve for boundary data columns `f` (m × k).  Returns (values, derivatives).
    fn solve(&self, f: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let ne = self.orient.len();
        let mut rhs = DMatrix::zeros(self.n + ne, f.ncols());
        for (k, ((t, h), tr)) in self.orient.iter().zip(&self.transfer).enumerate() {
            if let Node::Boundary(p) = t {
                for col in 0..f.ncols() {
                    rhs[(k, col)] += tr.c * f[(*p, col)];
                    if let Node::Interior(j) = h {
                        rhs[(ne + j, col)] += tr.c_prime * f[(*p, col)];
                    }
                }
            }
            if let Node::Boundary(p) = h {
                for col in 0..f.ncols() {
                    rhs[(k, col)] -= f[(*p, col)];
                }
            }
        }
        for (i, sc) in self.row_scale.iter().enumerate() {
            rhs.row_mut(i).scale_mut(*sc);
        }
        let x = self.fac.solve(&rhs).ok_or_else(|| Error::NumericFailure("edge system solve failed".into()))?;
        let u = x.rows(0, self.n).into_owned();
        let d = x.rows(self.n, ne).into_owned();
        Ok((u, d))
    }
}

/// Interior D-N map.  Vertex model: `Λ̂ f(p) = −û(anchor(p))`.  Edge model:
/// the derivative at `p` along its pendant edge, parametrised from `p`.
pub fn dn_map(domain: &HexDomain, potmap: &PotentialMap, lambda: f64, model: DnModel) -> Result<DNMatrix> {
    dn_map_tol(domain, potmap, lambda, model, &Tolerances::default())
}

pub fn dn_map_tol(
    domain: &HexDomain,
    potmap: &PotentialMap,
    lambda: f64,
    model: DnModel,
    tol: &Tolerances,
) -> Result<DNMatrix> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite lambda {lambda}")));
    }
    let sys = EdgeSystem::build(domain, potmap, lambda, tol)?;
    let m = sys.m;
    let (u, d) = sys.solve(&DMatrix::identity(m, m))?;
    let mut out = DMatrix::zeros(m, m);
    for (p, b) in domain.boundary().iter().enumerate() {
        match model {
            DnModel::Vertex => {
                let ai = domain.interior_index(b.anchor).unwrap();
                for j in 0..m {
                    out[(p, j)] = -u[(ai, j)];
                }
            }
            DnModel::Edge => {
                let k = domain.edges().binary_search(&EdgeKey::new(b.position, b.anchor)).unwrap();
                for j in 0..m {
                    out[(p, j)] = d[(k, j)];
                }
            }
        }
    }
    Ok(DNMatrix {
        lambda,
        model,
        boundary_order: domain.boundary().iter().map(|b| b.position).collect(),
        matrix: out,
    })
}

/// Vertex-model D-N map through the reduced vertex operator.
pub fn dn_map_reduced(domain: &HexDomain, potmap: &PotentialMap, lambda: f64) -> Result<DNMatrix> {
    let sys = assemble(domain, potmap, lambda)?;
    let m = domain.boundary().len();
    let u = sys.solve(&DMatrix::identity(m, m), Tolerances::default().cond_max)?;
    let mut out = DMatrix::zeros(m, m);
    for (p, b) in domain.boundary().iter().enumerate() {
        let ai = domain.interior_index(b.anchor).unwrap();
        for j in 0..m {
            out[(p, j)] = -u[(ai, j)];
        }
    }
    Ok(DNMatrix {
        lambda,
        model: DnModel::Vertex,
        boundary_order: domain.boundary().iter().map(|b| b.position).collect(),
        matrix: out,
    })
}

/// Condition estimate of the interior problem at λ (no threshold applied).
pub fn interior_condition(domain: &HexDomain, potmap: &PotentialMap, lambda: f64) -> Result<f64> {
    let tol = Tolerances {
        cond_max: f64::INFINITY,
        ..Tolerances::default()
    };
    match EdgeSystem::build(domain, potmap, lambda, &tol) {
        Ok(sys) => Ok(sys.fac.cond),
        Err(Error::InteriorSpectrumHit { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Interior values for several boundary data columns (edge-variable route).
pub fn solve_edge_system(
    domain: &HexDomain,
    potmap: &PotentialMap,
    lambda: f64,
    f: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let sys = EdgeSystem::build(domain, potmap, lambda, &Tolerances::default())?;
    Ok(sys.solve(f)?.0)
}

/// Convert between the vertex and edge models, assuming potential-free
/// pendant edges: `Λ̂_V = −cos√λ − (sin√λ/√λ) Λ_E`.
pub fn convert_dn(dn: &DNMatrix, lambda: f64) -> Result<DNMatrix> {
    let (s, c) = sturm::sinc_cos(lambda);
    if s.abs() < 1e-12 {
        return Err(Error::ConversionDegenerate(lambda));
    }
    convert_dn_with(dn, s, c)
}

/// Same conversion with the pendant edge data `(s_p, c_p) = (φ(1), θ(1))`.
pub fn convert_dn_with(dn: &DNMatrix, s: f64, c: f64) -> Result<DNMatrix> {
    if s.abs() < 1e-12 {
        return Err(Error::ConversionDegenerate(dn.lambda));
    }
    let m = dn.dim();
    let id = DMatrix::<f64>::identity(m, m);
    let (model, matrix) = match dn.model {
        DnModel::Edge => (DnModel::Vertex, -(id * c) - &dn.matrix * s),
        DnModel::Vertex => (DnModel::Edge, -(&dn.matrix + id * c) / s),
    };
    Ok(DNMatrix {
        lambda: dn.lambda,
        model,
        boundary_order: dn.boundary_order.clone(),
        matrix,
    })
}

/// `cos√λ`, continued as `cosh√(−λ)` for λ < 0.
pub fn cos_sqrt(lambda: f64) -> f64 {
    sturm::sinc_cos(lambda).1
}

/// Distance of `cos√λ` to the exceptional values.
pub fn cos_exclusion_distance(lambda: f64) -> f64 {
    let c = cos_sqrt(lambda);
    EXCLUDED_COS.iter().map(|t| (c - t).abs()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub admissible: bool,
    pub reason: Option<String>,
}

impl Verdict {
    fn ok() -> Self {
        Verdict { admissible: true, reason: None }
    }

    fn no(reason: String) -> Self {
        Verdict {
            admissible: false,
            reason: Some(reason),
        }
    }
}

/// Dirichlet eigenvalues of a set of edge potentials, computed lazily up to a bound.
#[derive(Debug, Default)]
pub struct EdgeSpectra {
    cache: Mutex<HashMap<Vec<u64>, (f64, Vec<f64>)>>,
}

impl EdgeSpectra {
    pub fn new() -> Self {
        Self::default()
    }

    /// Eigenvalues of `q` not exceeding `bound`.
    pub fn below(&self, q: &Potential, bound: f64) -> Result<Vec<f64>> {
        let key = q.key();
        if let Some((b, eigs)) = self.cache.lock().unwrap().get(&key) {
            if *b >= bound {
                return Ok(eigs.iter().copied().filter(|l| *l <= bound).collect());
            }
        }
        let target = bound.max(10.0) * 1.5;
        let count = sturm::oscillation_count(q, target)?;
        let eigs = if count == 0 {
            vec![]
        } else {
            sturm::dirichlet_spectrum(q, count)?.eigenvalues
        };
        let out = eigs.iter().copied().filter(|l| *l <= bound).collect();
        self.cache.lock().unwrap().insert(key, (target, eigs));
        Ok(out)
    }

    /// Distance from λ to the nearest eigenvalue of `q`.
    pub fn distance(&self, q: &Potential, lambda: f64) -> Result<f64> {
        let eigs = self.below(q, lambda.abs() + 200.0)?;
        Ok(eigs.iter().map(|l| (l - lambda).abs()).fold(f64::INFINITY, f64::min))
    }
}

pub fn admissible(lambda: f64, potmap: &PotentialMap, domain: &HexDomain) -> Verdict {
    admissible_with(lambda, potmap, domain, &Tolerances::default(), &EdgeSpectra::new())
}

pub fn admissible_with(
    lambda: f64,
    potmap: &PotentialMap,
    domain: &HexDomain,
    tol: &Tolerances,
    spectra: &EdgeSpectra,
) -> Verdict {
    if !lambda.is_finite() {
        return Verdict::no(format!("lambda {lambda} is not finite"));
    }
    let c = cos_sqrt(lambda);
    for t in EXCLUDED_COS {
        if (c - t).abs() <= tol.tol_t {
            return Verdict::no(format!("cos(sqrt(lambda)) = {c:.9} is within {} of {t:.6}", tol.tol_t));
        }
    }
    for q in potmap.distinct_potentials(domain.edges().iter()) {
        match spectra.distance(q, lambda) {
            Ok(d) if d <= tol.tol_edge => {
                return Verdict::no(format!(
                    "lambda is within {d:e} of a Dirichlet eigenvalue of edge potential {:?}",
                    q.modes
                ))
            }
            Ok(_) => {}
            Err(e) => return Verdict::no(format!("edge spectrum unavailable: {e}")),
        }
    }
    match EdgeSystem::build(domain, potmap, lambda, tol) {
        Ok(_) => Verdict::ok(),
        Err(e) => Verdict::no(e.to_string()),
    }
}

/// Uniform λ grid `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![self.start],
            n => (0..n)
                .map(|i| self.start + (self.end - self.start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.count == 0 || self.end < self.start {
            return Err(Error::Validation(format!(
                "lambda grid {}:{}:{} must have finite start <= end and count >= 1",
                self.start, self.end, self.count
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Validation(format!("lambda grid '{s}' is not of the form a:b:n")));
        }
        let bad = |what: &str| Error::Validation(format!("lambda grid '{s}': bad {what}"));
        let g = GridSpec {
            start: parts[0].trim().parse().map_err(|_| bad("start"))?,
            end: parts[1].trim().parse().map_err(|_| bad("end"))?,
            count: parts[2].trim().parse().map_err(|_| bad("count"))?,
        };
        g.validate()?;
        Ok(g)
    }
}

/// Grid points split into admissible ones and rejected ones with reasons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub accepted: Vec<f64>,
    pub rejected: Vec<(f64, String)>,
}

/// Screen the candidate energies against the exceptional set (cheap tests
/// only: `cos√λ` margins and the listed edge eigenvalues).
pub fn screen_lambdas(candidates: &[f64], edge_eigenvalues: &[f64], tol: &Tolerances) -> GridReport {
    let mut rep = GridReport::default();
    for &l in candidates {
        let c = cos_sqrt(l);
        if let Some(t) = EXCLUDED_COS.iter().find(|t| (c - **t).abs() <= tol.tol_t) {
            rep.rejected.push((l, format!("cos(sqrt(lambda)) within {} of {t:.6}", tol.tol_t)));
        } else if let Some(e) = edge_eigenvalues.iter().find(|e| (l - **e).abs() <= tol.tol_edge) {
            rep.rejected.push((l, format!("within {} of edge Dirichlet eigenvalue {e}", tol.tol_edge)));
        } else {
            rep.accepted.push(l);
        }
    }
    rep
}

/// Admissible points of `spec` for the given domain and potentials; the
/// interior-conditioning test is applied as well.
pub fn generate_grid(spec: &GridSpec, potmap: &PotentialMap, domain: &HexDomain, tol: &Tolerances) -> Result<GridReport> {
    spec.validate()?;
    let pts = spec.points();
    let top = pts.iter().fold(0.0f64, |m, l| m.max(l.abs())) + 1.0;
    let spectra = EdgeSpectra::new();
    let mut eigs = Vec::new();
    for q in potmap.distinct_potentials(domain.edges().iter()) {
        eigs.extend(spectra.below(q, top)?);
    }
    let mut rep = screen_lambdas(&pts, &eigs, tol);
    let mut keep = Vec::new();
    for l in rep.accepted.drain(..) {
        match EdgeSystem::build(domain, potmap, l, tol) {
            Ok(_) => keep.push(l),
            Err(e) => rep.rejected.push((l, e.to_string())),
        }
    }
    rep.accepted = keep;
    rep.rejected.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rep)
}

/// Eigenvalues `∓|1 + e^{ix₁} + e^{ix₂}|/3` of the free symbol on the torus.
pub fn dispersion_eigenvalues(x1: f64, x2: f64) -> (f64, f64) {
    let re = 1.0 + x1.cos() + x2.cos();
    let im = x1.sin() + x2.sin();
    let r = re.hypot(im) / 3.0;
    (-r, r)
}

/// `√λ` spacing used by harvesting grids: forty samples per unit-π gap.
pub const HARVEST_SQRT_STEP: f64 = PI / 40.0;
