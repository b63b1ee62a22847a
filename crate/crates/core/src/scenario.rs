//! Scenario files: the domain, the true potentials, the λ policy and the
//! inverse-run configuration.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inverse::descent::DescentTol;
use crate::inverse::plan::SupportSpec;
use crate::inverse::reconstruct::ReconstructConfig;
use crate::lattice::{DomainSpec, EdgeKey, HexDomain};
use crate::sturm::{BorgOptions, Potential};
use crate::vertex::{GridSpec, PotentialMap, Tolerances};

/// Potential on one edge, addressed by cell and side in domain coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePotential {
    pub cell: [i64; 2],
    pub side: usize,
    pub modes: Vec<f64>,
}

/// Seeded random perturbations drawn inside the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPerturbations {
    pub edges: usize,
    /// Each coefficient is drawn uniformly from `[−amplitude, amplitude]`.
    pub amplitude: f64,
    /// Modes `1..=modes` are populated; the mean is left at zero.
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaPolicy {
    /// `"a:b:n"`
    pub grid: String,
    #[serde(default = "default_tol")]
    pub tol_t: f64,
    #[serde(default = "default_tol")]
    pub tol_edge: f64,
    #[serde(default = "default_cond")]
    pub cond_max: f64,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_cond() -> f64 {
    1e12
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy {
            grid: "0.5:60:24".into(),
            tol_t: default_tol(),
            tol_edge: default_tol(),
            cond_max: default_cond(),
        }
    }
}

impl LambdaPolicy {
    pub fn grid(&self) -> Result<GridSpec> {
        self.grid.parse()
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_t: self.tol_t,
            tol_edge: self.tol_edge,
            cond_max: self.cond_max,
            ..Tolerances::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseTolerances {
    #[serde(default = "InverseTolerances::d_descent")]
    pub descent: f64,
    #[serde(default = "InverseTolerances::d_root")]
    pub root: f64,
    #[serde(default = "InverseTolerances::d_mismatch")]
    pub mismatch: f64,
    #[serde(default = "InverseTolerances::d_failed")]
    pub max_failed_fraction: f64,
}

impl InverseTolerances {
    fn d_descent() -> f64 {
        1e-7
    }
    fn d_root() -> f64 {
        1e-10
    }
    fn d_mismatch() -> f64 {
        1e-6
    }
    fn d_failed() -> f64 {
        0.25
    }
}

impl Default for InverseTolerances {
    fn default() -> Self {
        InverseTolerances {
            descent: Self::d_descent(),
            root: Self::d_root(),
            mismatch: Self::d_mismatch(),
            max_failed_fraction: Self::d_failed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSpec {
    pub support: SupportSpec,
    #[serde(default = "default_modes")]
    pub m_modes: usize,
    #[serde(default)]
    pub tolerances: InverseTolerances,
}

fn default_modes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub domain: DomainSpec,
    #[serde(default)]
    pub potentials: Vec<EdgePotential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomPerturbations>,
    #[serde(default)]
    pub background: Vec<f64>,
    #[serde(default)]
    pub lambda_policy: LambdaPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<InverseSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn minimal(n: i64) -> Self {
        Scenario {
            domain: DomainSpec {
                n,
                shift: [0, 0],
                orientation: 0,
            },
            potentials: vec![],
            random: None,
            background: vec![],
            lambda_policy: LambdaPolicy::default(),
            inverse: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| {
            let msg = format!("scenario, line {} column {}: {e}", e.line(), e.column());
            if e.is_data() {
                Error::Validation(msg)
            } else {
                Error::Parse(msg)
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    /// Canonical JSON (field order fixed by the type).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn domain(&self) -> Result<HexDomain> {
        if self.domain.n < 0 {
            return Err(Error::Validation(format!("domain.N must be >= 0, got {}", self.domain.n)));
        }
        self.domain.build()
    }

    pub fn background(&self) -> Result<Potential> {
        Potential::new(self.background.clone()).map_err(|e| Error::Validation(format!("background: {e}")))
    }

    fn edge_key(&self, domain: &HexDomain, cell: [i64; 2], side: usize) -> Result<EdgeKey> {
        if side > 5 {
            return Err(Error::Validation(format!("edge side {side} out of range 0..=5")));
        }
        let frame = domain.frame();
        let e = EdgeKey::of_cell(cell[0], cell[1], side).map(|p| frame.to_global(p));
        if !domain.has_edge(&e) {
            return Err(Error::Validation(format!(
                "edge (cell [{}, {}], side {side}) is not an edge of the domain",
                cell[0], cell[1]
            )));
        }
        Ok(e)
    }

    /// Explicit plus seeded random potentials, keyed globally.
    pub fn perturbations(&self, domain: &HexDomain) -> Result<Vec<(EdgeKey, Potential)>> {
        let mut out = Vec::new();
        for (i, p) in self.potentials.iter().enumerate() {
            let e = self.edge_key(domain, p.cell, p.side)?;
            let q = Potential::new(p.modes.clone()).map_err(|err| Error::Validation(format!("potentials[{i}]: {err}")))?;
            if out.iter().any(|(x, _)| *x == e) {
                return Err(Error::Validation(format!("potentials[{i}]: edge {e} listed twice")));
            }
            out.push((e, q));
        }
        if let Some(r) = &self.random {
            let inv = self.inverse.as_ref().ok_or_else(|| {
                Error::Validation("random perturbations are drawn inside inverse.support, which is missing".into())
            })?;
            let mut pool: Vec<EdgeKey> = inv
                .support
                .resolve(domain)?
                .into_iter()
                .filter(|e| !out.iter().any(|(x, _)| x == e))
                .collect();
            if r.edges > pool.len() {
                return Err(Error::Validation(format!(
                    "random: {} edges requested, support offers {}",
                    r.edges,
                    pool.len()
                )));
            }
            if !(r.amplitude.is_finite() && r.amplitude >= 0.0) {
                return Err(Error::Validation("random: amplitude must be finite and >= 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            pool.shuffle(&mut rng);
            for e in pool.into_iter().take(r.edges) {
                let mut modes = vec![0.0];
                for _ in 0..r.modes {
                    modes.push(rng.gen_range(-r.amplitude..=r.amplitude));
                }
                out.push((e, Potential::new(modes)?));
            }
        }
        Ok(out)
    }

    pub fn potential_map(&self) -> Result<PotentialMap> {
        let domain = self.domain()?;
        let mut pm = PotentialMap::with_background(self.background()?);
        for (e, q) in self.perturbations(&domain)? {
            pm.insert(e, q);
        }
        Ok(pm)
    }

    /// Reconstruction settings; `None` without an inverse section.
    pub fn reconstruct_config(&self) -> Result<Option<ReconstructConfig>> {
        let Some(inv) = &self.inverse else { return Ok(None) };
        let mut cfg = ReconstructConfig::new(self.domain.n as usize, inv.support.clone());
        cfg.base = self.domain.frame();
        cfg.background = self.background()?;
        cfg.m_modes = inv.m_modes;
        cfg.tol = self.lambda_policy.tolerances();
        cfg.descent = DescentTol {
            residual: inv.tolerances.descent,
        };
        cfg.borg = BorgOptions {
            mismatch_tol: inv.tolerances.mismatch,
            ..BorgOptions::default()
        };
        cfg.root_tol = inv.tolerances.root;
        cfg.max_failed_fraction = inv.tolerances.max_failed_fraction;
        Ok(Some(cfg))
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        self.background()?;
        self.lambda_policy.grid()?;
        for (name, v) in [
            ("tol_t", self.lambda_policy.tol_t),
            ("tol_edge", self.lambda_policy.tol_edge),
            ("cond_max", self.lambda_policy.cond_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("lambda_policy.{name} must be positive, got {v}")));
            }
        }
        self.perturbations(&domain)?;
        if let Some(inv) = &self.inverse {
            if inv.support.is_empty() {
                return Err(Error::Validation("inverse.support is empty".into()));
            }
            if inv.m_modes == 0 {
                return Err(Error::Validation("inverse.m_modes must be >= 1".into()));
            }
            let t = &inv.tolerances;
            for (name, v) in [("descent", t.descent), ("root", t.root), ("mismatch", t.mismatch)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Validation(format!("inverse.tolerances.{name} must be positive, got {v}")));
                }
            }
            if !(0.0..1.0).contains(&t.max_failed_fraction) {
                return Err(Error::Validation("inverse.tolerances.max_failed_fraction must lie in [0, 1)".into()));
            }
            inv.support.resolve(&domain)?;
        }
        Ok(())
    }

    /// Non-fatal findings for `check`.
    pub fn warnings(&self) -> Result<Vec<String>> {
        let domain = self.domain()?;
        let mut out = Vec::new();
        let pert = self.perturbations(&domain)?;
        if let Some(inv) = &self.inverse {
            let sup = inv.support.resolve(&domain)?;
            for (e, _) in &pert {
                if !sup.contains(e) {
                    out.push(format!("perturbed edge {e} lies outside the support; the inversion assumes it is background"));
                }
            }
            if let Some(m) = pert.iter().map(|(_, q)| q.degree()).max() {
                if m > inv.m_modes {
                    out.push(format!(
                        "a true potential uses mode {m}, above the fitted band limit {}",
                        inv.m_modes
                    ));
                }
            }
        }
        Ok(out)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text)
}
