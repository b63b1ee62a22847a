//! One-dimensional Schrödinger problems `−φ'' + q φ = λ φ` on `(0, 1)`.
//!
//! Potentials are truncated cosine series, so `q(z) = q(1 − z)` holds by
//! construction.  The initial-value problem is integrated with 8-stage
//! Gauss–Legendre collocation (order 16, symplectic — the propagator keeps
//! unit determinant to roundoff) under global step doubling.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default integrator tolerance per unit interval.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Symmetric edge potential `q(z) = Σ a_m cos(2π m z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub modes: Vec<f64>,
}

impl Potential {
    pub fn new(modes: Vec<f64>) -> Result<Self> {
        if modes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("potential coefficients must be finite".into()));
        }
        Ok(Potential { modes })
    }

    pub fn zero() -> Self {
        Potential { modes: vec![] }
    }

    pub fn constant(c: f64) -> Self {
        Potential { modes: vec![c] }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(m, a)| if m == 0 { *a } else { a * (2.0 * PI * m as f64 * z).cos() })
            .sum()
    }

    /// Mean value `a₀`.
    pub fn mean(&self) -> f64 {
        self.modes.first().copied().unwrap_or(0.0)
    }

    /// Coefficient `a_m` (zero beyond the stored length).
    pub fn mode(&self, m: usize) -> f64 {
        self.modes.get(m).copied().unwrap_or(0.0)
    }

    /// Upper bound for `sup |q|`.
    pub fn bound(&self) -> f64 {
        self.modes.iter().map(|a| a.abs()).sum()
    }

    /// Lower bound for `inf q`.
    pub fn lower_bound(&self) -> f64 {
        self.mean() - self.modes.iter().skip(1).map(|a| a.abs()).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().skip(1).all(|a| *a == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|a| *a == 0.0)
    }

    /// Highest mode index with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.modes.iter().rposition(|a| *a != 0.0).unwrap_or(0)
    }

    /// Values on the uniform grid `z_j = j/(n−1)`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let d = (n.max(2) - 1) as f64;
        (0..n).map(|j| self.eval(j as f64 / d)).collect()
    }

    /// Coefficients padded or truncated to `len` entries.
    pub fn padded(&self, len: usize) -> Vec<f64> {
        (0..len).map(|m| self.mode(m)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|a| a.is_finite())
    }

    /// Equality of the represented functions (trailing zero modes ignored).
    pub fn same_as(&self, other: &Potential) -> bool {
        let n = self.modes.len().max(other.modes.len());
        self.padded(n) == other.padded(n)
    }

    /// Bit pattern key for caches.
    pub fn key(&self) -> Vec<u64> {
        let d = self.degree();
        self.modes.iter().take(d + 1).map(|a| a.to_bits()).collect()
    }
}

/// Endpoint data of the fundamental system at `z = 1`.
///
/// `φ` has `φ(0) = 0, φ'(0) = 1`; `θ` has `θ(0) = 1, θ'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferData {
    pub lambda: f64,
    /// `φ(1)`
    pub s: f64,
    /// `φ'(1)`
    pub a: f64,
    /// `θ(1)`
    pub c: f64,
    /// `θ'(1)`
    pub c_prime: f64,
}

impl TransferData {
    pub fn det(&self) -> f64 {
        self.c * self.a - self.s * self.c_prime
    }

    /// `|θ(1) − φ'(1)|`, zero for symmetric potentials.
    pub fn diagonal_defect(&self) -> f64 {
        (self.c - self.a).abs()
    }
}

/// Closed form for a constant potential, `μ = λ − c`.
pub fn constant_transfer(c: f64, lambda: f64) -> TransferData {
    let mu = lambda - c;
    let (s, cs) = sinc_cos(mu);
    TransferData {
        lambda,
        s,
        a: cs,
        c: cs,
        c_prime: -mu * s,
    }
}

/// `(sin√μ/√μ, cos√μ)` with the hyperbolic branch for `μ < 0` and a
/// series near `μ = 0`.
pub fn sinc_cos(mu: f64) -> (f64, f64) {
    if mu.abs() < 1e-3 {
        // Taylor in μ; truncation error < 1e-18
        let s = 1.0 - mu / 6.0 + mu * mu / 120.0 - mu.powi(3) / 5040.0 + mu.powi(4) / 362_880.0
            - mu.powi(5) / 39_916_800.0;
        let c = 1.0 - mu / 2.0 + mu * mu / 24.0 - mu.powi(3) / 720.0 + mu.powi(4) / 40_320.0
            - mu.powi(5) / 3_628_800.0;
        (s, c)
    } else if mu > 0.0 {
        let r = mu.sqrt();
        (r.sin() / r, r.cos())
    } else {
        let r = (-mu).sqrt();
        (r.sinh() / r, r.cosh())
    }
}

const S: usize = 8;

struct Tableau {
    c: [f64; S],
    b: [f64; S],
    a: [[f64; S]; S],
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn tableau() -> &'static Tableau {
    static T: OnceLock<Tableau> = OnceLock::new();
    T.get_or_init(|| {
        let mut x = [0.0; S];
        let mut w = [0.0; S];
        for i in 0..S {
            let mut t = (PI * (i as f64 + 0.75) / (S as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(S, t);
                let dt = p / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(S, t);
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        let mut c = [0.0; S];
        let mut b = [0.0; S];
        // ascending nodes on [0, 1]
        for i in 0..S {
            c[i] = (1.0 - x[i]) / 2.0;
            b[i] = w[i] / 2.0;
        }
        let lagrange = |j: usize, t: f64| -> f64 {
            (0..S)
                .filter(|&m| m != j)
                .map(|m| (t - c[m]) / (c[j] - c[m]))
                .product()
        };
        let mut a = [[0.0; S]; S];
        for i in 0..S {
            for j in 0..S {
                // ∫₀^{c_i} ℓ_j exactly: degree 7 integrand, 8-point rule
                a[i][j] = (0..S).map(|m| c[i] * b[m] * lagrange(j, c[i] * c[m])).sum();
            }
        }
        Tableau { c, b, a }
    })
}

type Mat2 = [[f64; 2]; 2];

/// Sample of `φ` at a quadrature node of the integration mesh.
#[derive(Debug, Clone, Copy)]
struct StageSample {
    z: f64,
    weight: f64,
    phi: f64,
}

struct Run {
    y: Mat2,
    stages: Vec<StageSample>,
    /// `(z, φ(z))` at step boundaries.
    mesh: Vec<(f64, f64)>,
}

fn propagate(q: &Potential, lambda: f64, n: usize, record: bool) -> Run {
    let tab = tableau();
    let h = 1.0 / n as f64;
    let mut y: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let mut stages = Vec::new();
    let mut mesh = Vec::new();
    if record {
        stages.reserve(n * S);
        mesh.push((0.0, 0.0));
    }
    let mut m = SMatrix::<f64, 16, 16>::zeros();
    let mut rhs = SMatrix::<f64, 16, 2>::zeros();
    let mut g = [0.0; S];
    for step in 0..n {
        let z0 = step as f64 * h;
        for i in 0..S {
            g[i] = q.eval(z0 + tab.c[i] * h) - lambda;
        }
        // U_i − h Σ_j A_ij F_j U_j = Y0,  F_j = [[0, 1], [g_j, 0]]
        m.fill(0.0);
        for i in 0..S {
            m[(2 * i, 2 * i)] = 1.0;
            m[(2 * i + 1, 2 * i + 1)] = 1.0;
            for j in 0..S {
                let ha = h * tab.a[i][j];
                m[(2 * i, 2 * j + 1)] -= ha;
                m[(2 * i + 1, 2 * j)] -= ha * g[j];
            }
            for col in 0..2 {
                rhs[(2 * i, col)] = y[0][col];
                rhs[(2 * i + 1, col)] = y[1][col];
            }
        }
        let u = m.lu().solve(&rhs).expect("collocation matrix is a small perturbation of I");
        let mut next = y;
        for i in 0..S {
            let hb = h * tab.b[i];
            for col in 0..2 {
                next[0][col] += hb * u[(2 * i + 1, col)];
                next[1][col] += hb * g[i] * u[(2 * i, col)];
            }
            if record {
                stages.push(StageSample {
                    z: z0 + tab.c[i] * h,
                    weight: hb,
                    phi: u[(2 * i, 1)],
                });
            }
        }
        y = next;
        if record {
            mesh.push((z0 + h, y[0][1]));
        }
    }
    Run { y, stages, mesh }
}

fn initial_steps(q: &Potential, lambda: f64) -> usize {
    let w = (lambda.abs() + q.bound()).sqrt() + 2.0 * PI * q.degree() as f64;
    let n = (w / 3.0).ceil().max(2.0) as usize;
    n + n % 2
}

fn validate(q: &Potential, lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite lambda {lambda}")));
    }
    if !q.is_finite() {
        return Err(Error::InvalidArgument("non-finite potential coefficient".into()));
    }
    Ok(())
}

fn to_transfer(lambda: f64, y: Mat2) -> TransferData {
    TransferData {
        lambda,
        s: y[0][1],
        a: y[1][1],
        c: y[0][0],
        c_prime: y[1][0],
    }
}

/// Adaptive numerical integration, never using the closed form.
pub fn integrate_numeric(q: &Potential, lambda: f64, tol: f64) -> Result<TransferData> {
    validate(q, lambda)?;
    Ok(to_transfer(lambda, converged_run(q, lambda, tol, false)?.0.y))
}

fn converged_run(q: &Potential, lambda: f64, tol: f64, record: bool) -> Result<(Run, usize)> {
    let mut n = initial_steps(q, lambda);
    let mut prev = propagate(q, lambda, n, false).y;
    loop {
        n *= 2;
        let cur = propagate(q, lambda, n, record);
        let scale = cur.y.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (cur.y[i][j] - prev[i][j]).abs())
            .fold(0.0, f64::max);
        if diff <= tol * scale {
            return Ok((cur, n));
        }
        if n > 1 << 16 {
            return Err(Error::NumericFailure(format!(
                "integrator did not reach tolerance {tol:e} at lambda = {lambda} (last change {diff:e})"
            )));
        }
        prev = cur.y;
    }
}

/// Endpoint data `φ(1), φ'(1), θ(1), θ'(1)` at energy `λ`.
pub fn integrate_ivp(q: &Potential, lambda: f64) -> Result<TransferData> {
    integrate_ivp_tol(q, lambda, DEFAULT_TOL)
}

pub fn integrate_ivp_tol(q: &Potential, lambda: f64, tol: f64) -> Result<TransferData> {
    validate(q, lambda)?;
    if q.is_constant() {
        return Ok(constant_transfer(q.mean(), lambda));
    }
    integrate_numeric(q, lambda, tol)
}

/// `φ(1, λ)`.
pub fn s_value(q: &Potential, lambda: f64) -> Result<f64> {
    Ok(integrate_ivp(q, lambda)?.s)
}

/// Same contract as [`integrate_ivp`]; named for background edges.
pub fn background_solutions(q0: &Potential, lambda: f64) -> Result<TransferData> {
    integrate_ivp(q0, lambda)
}

/// Per-λ cache of background transfer data.  Safe for concurrent reads;
/// inserts take the write lock briefly.
#[derive(Debug)]
pub struct BackgroundCache {
    q0: Potential,
    map: RwLock<HashMap<u64, TransferData>>,
}

impl BackgroundCache {
    pub fn new(q0: Potential) -> Self {
        BackgroundCache {
            q0,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.q0
    }

    pub fn get(&self, lambda: f64) -> Result<TransferData> {
        let key = lambda.to_bits();
        if let Some(t) = self.map.read().unwrap().get(&key) {
            return Ok(*t);
        }
        let t = background_solutions(&self.q0, lambda)?;
        self.map.write().unwrap().entry(key).or_insert(t);
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ascending Dirichlet eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SpectrumList {
    pub eigenvalues: Vec<f64>,
}

impl SpectrumList {
    pub fn new(eigenvalues: Vec<f64>) -> Self {
        SpectrumList { eigenvalues }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn truncated(&self, m: usize) -> SpectrumList {
        SpectrumList::new(self.eigenvalues.iter().take(m).copied().collect())
    }
}

/// Number of zeros of `φ(·, λ)` in `(0, 1)`, equal to the number of Dirichlet
/// eigenvalues below `λ`.
pub fn oscillation_count(q: &Potential, lambda: f64) -> Result<usize> {
    validate(q, lambda)?;
    let n = fine_steps(q, lambda);
    let run = propagate(q, lambda, n, true);
    let mut seq: Vec<(f64, f64)> = run.stages.iter().map(|s| (s.z, s.phi)).collect();
    seq.extend(run.mesh.iter().copied());
    seq.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vals: Vec<f64> = seq
        .iter()
        .filter(|(z, _)| *z > 0.0 && *z <= 1.0)
        .map(|(_, v)| *v)
        .filter(|v| *v != 0.0)
        .collect();
    Ok(vals.windows(2).filter(|w| w[0].signum() != w[1].signum()).count())
}

fn fine_steps(q: &Potential, lambda: f64) -> usize {
    // h·√(|λ| + |q|) ≤ 1/4 keeps stage values (order 8) accurate to ~1e-12
    let w = (lambda.abs() + q.bound()).sqrt() + 2.0 * PI * q.degree() as f64;
    let n = (4.0 * w).ceil().max(16.0) as usize;
    n + n % 2
}

/// Root of `f` in `[lo, hi]` with `f(lo)·f(hi) < 0` (Illinois regula falsi,
/// falling back to bisection when progress stalls).
pub fn refine_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    xtol: f64,
) -> Result<f64> {
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NumericFailure(format!("no sign change in [{lo}, {hi}]")));
    }
    let mut side = 0i32;
    for it in 0..200 {
        if (hi - lo).abs() <= xtol {
            break;
        }
        // every 4th step bisects, bounding the cost of a stalled endpoint
        let mut x = if it % 4 == 3 {
            0.5 * (lo + hi)
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First `m` Dirichlet eigenvalues of `−d²/dz² + q` on `(0, 1)`.
pub fn dirichlet_spectrum(q: &Potential, m: usize) -> Result<SpectrumList> {
    if m == 0 {
        return Err(Error::InvalidArgument("eigenvalue count must be >= 1".into()));
    }
    if !q.is_finite() {
        return Err(Error::InvalidArgument("non-finite potential coefficient".into()));
    }
    if q.is_constant() {
        let c = q.mean();
        return Ok(SpectrumList::new(
            (1..=m).map(|n| (n as f64 * PI).powi(2) + c).collect(),
        ));
    }
    let base = PI * PI + q.lower_bound() - 1.0;
    let dt = PI / 32.0;
    let t_max = (((m + 2) as f64 * PI).powi(2) + q.bound() - q.lower_bound() + 1.0).sqrt() + 4.0 * PI;
    let sv = |lam: f64| -> Result<f64> { s_value(q, lam) };
    let mut eigs = Vec::with_capacity(m);
    let mut t = 0.0;
    let mut lam_prev = base;
    let mut s_prev = sv(base)?;
    while eigs.len() < m {
        t += dt;
        if t > t_max {
            return Err(Error::NumericFailure(format!(
                "bracketed only {} of {m} Dirichlet eigenvalues below {}",
                eigs.len(),
                base + t_max * t_max
            )));
        }
        let lam = base + t * t;
        let s = sv(lam)?;
        if s == 0.0 {
            eigs.push(lam);
        } else if s_prev != 0.0 && s.signum() != s_prev.signum() {
            let xtol = 1e-13 * lam.abs().max(1.0);
            eigs.push(refine_root(sv, lam_prev, lam, s_prev, s, xtol)?);
        }
        lam_prev = lam;
        s_prev = s;
    }
    // Sturm oscillation check: exactly n−1 zeros of φ strictly between λ_{n−1} and λ_n
    let mut below = base;
    for (n, &l) in eigs.iter().enumerate() {
        let mid = 0.5 * (below + l);
        let count = oscillation_count(q, mid)?;
        if count != n {
            return Err(Error::NumericFailure(format!(
                "oscillation count {count} at lambda = {mid} does not match eigenvalue index {n}"
            )));
        }
        below = l;
    }
    Ok(SpectrumList::new(eigs))
}

/// Normalised Dirichlet eigenfunction with quadrature data for integrals.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub lambda: f64,
    /// `‖φ(·, λ)‖_{L²}` before normalisation.
    pub norm: f64,
    /// `(z, φ(z)/norm)` on the step mesh (always contains `z = 1/2`).
    pub mesh: Vec<(f64, f64)>,
    nodes: Vec<StageSample>,
}

impl Eigenfunction {
    /// `∫₀¹ φ² g dz` for the normalised eigenfunction.
    pub fn weighted_square_integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|s| s.weight * s.phi * s.phi * g(s.z)).sum()
    }

    pub fn value_at_mesh(&self, z: f64) -> Option<f64> {
        self.mesh
            .iter()
            .find(|(x, _)| (x - z).abs() < 1e-14)
            .map(|(_, v)| *v)
    }

    /// Node samples `(z, φ(z))` of the normalised eigenfunction.
    pub fn node_values(&self) -> Vec<(f64, f64)> {
        self.nodes.iter().map(|s| (s.z, s.phi)).collect()
    }
}

pub fn normalized_eigenfunction(q: &Potential, lambda_n: f64) -> Result<Eigenfunction> {
    validate(q, lambda_n)?;
    let n = fine_steps(q, lambda_n);
    let n = n + (4 - n % 4) % 4;
    let run = propagate(q, lambda_n, n, true);
    let norm2: f64 = run.stages.iter().map(|s| s.weight * s.phi * s.phi).sum();
    let norm = norm2.sqrt();
    let peak = run.mesh.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let end = run.y[0][1];
    if end.abs() > 1e-6 * peak.max(1e-300) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda_n} is not a Dirichlet eigenvalue (phi(1) = {end:e})"
        )));
    }
    Ok(Eigenfunction {
        lambda: lambda_n,
        norm,
        mesh: run.mesh.iter().map(|(z, v)| (*z, v / norm)).collect(),
        nodes: run
            .stages
            .iter()
            .map(|s| StageSample {
                z: s.z,
                weight: s.weight,
                phi: s.phi / norm,
            })
            .collect(),
    })
}

/// `∂λ_n/∂a_m = ∫ φ_n² cos(2π m z)` for `m = 0..modes`.
pub fn eigenvalue_gradient(q: &Potential, lambda_n: f64, modes: usize) -> Result<Vec<f64>> {
    let ef = normalized_eigenfunction(q, lambda_n)?;
    Ok((0..modes)
        .map(|m| ef.weighted_square_integral(|z| (2.0 * PI * m as f64 * z).cos()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorgOptions {
    pub max_iter: usize,
    /// Stop once every relative eigenvalue residual is below this.
    pub tol: f64,
    /// A stagnated fit with residual above this is a model mismatch.
    pub mismatch_tol: f64,
}

impl Default for BorgOptions {
    fn default() -> Self {
        BorgOptions {
            max_iter: 60,
            tol: 1e-12,
            mismatch_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorgResult {
    pub potential: Potential,
    pub iterations: usize,
    /// `max_n |λ_n(a) − λ_n^{data}| / max(1, |λ_n^{data}|)`
    pub misfit: f64,
}

/// Symmetric potential band-limited to modes `0..=m_modes` with the given
/// Dirichlet spectrum.
pub fn borg_reconstruct(eigs: &SpectrumList, m_modes: usize) -> Result<Potential> {
    Ok(borg_reconstruct_with(eigs, m_modes, &BorgOptions::default())?.potential)
}

fn misfit_of(model: &[f64], data: &[f64]) -> f64 {
    model
        .iter()
        .zip(data)
        .map(|(l, d)| (l - d).abs() / d.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn borg_reconstruct_with(eigs: &SpectrumList, m_modes: usize, opts: &BorgOptions) -> Result<BorgResult> {
    let data = &eigs.eigenvalues;
    let k = data.len();
    let p = m_modes + 1;
    if k < p {
        return Err(Error::InvalidArgument(format!(
            "{k} eigenvalues cannot determine {p} cosine coefficients"
        )));
    }
    if data.iter().any(|l| !l.is_finite()) || data.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("spectrum must be finite and strictly increasing".into()));
    }
    let a0 = data
        .iter()
        .enumerate()
        .map(|(i, l)| l - ((i + 1) as f64 * PI).powi(2))
        .sum::<f64>()
        / k as f64;
    let mut coeffs = vec![0.0; p];
    coeffs[0] = a0;
    let mut q = Potential::new(coeffs.clone())?;
    let mut model = dirichlet_spectrum(&q, k)?.eigenvalues;
    let mut misfit = misfit_of(&model, data);
    for it in 0..opts.max_iter {
        if misfit < opts.tol {
            return Ok(BorgResult { potential: q, iterations: it, misfit });
        }
        let mut jac = DMatrix::<f64>::zeros(k, p);
        for (n, &l) in model.iter().enumerate() {
            let g = eigenvalue_gradient(&q, l, p)?;
            for m in 0..p {
                jac[(n, m)] = g[m];
            }
        }
        let r = DVector::from_iterator(k, model.iter().zip(data).map(|(l, d)| d - l));
        let delta = jac
            .clone()
            .svd(true, true)
            .solve(&r, 1e-14)
            .map_err(|e| Error::NumericFailure(format!("Gauss-Newton step: {e}")))?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = coeffs.iter().zip(delta.iter()).map(|(c, d)| c + step * d).collect();
            let tq = Potential::new(trial.clone())?;
            if let Ok(spec) = dirichlet_spectrum(&tq, k) {
                let tm = misfit_of(&spec.eigenvalues, data);
                if tm < misfit {
                    coeffs = trial;
                    q = tq;
                    model = spec.eigenvalues;
                    misfit = tm;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        let tiny = delta.norm() * step <= 1e-14 * (1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>());
        if !accepted || tiny {
            if misfit < opts.mismatch_tol {
                return Ok(BorgResult { potential: q, iterations: it + 1, misfit });
            }
            return Err(Error::ModelMismatch { misfit });
        }
    }
    if misfit < opts.tol {
        return Ok(BorgResult { potential: q, iterations: opts.max_iter, misfit });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: misfit,
    })
}
