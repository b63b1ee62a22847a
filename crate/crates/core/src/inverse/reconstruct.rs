//! Staged reconstruction: plan, harvest, locate zeros, fit potentials.

use std::collections::BTreeSet;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::descent::DescentTol;
use super::harvest::{
    brackets, continuation_root, edge_series, exclusion_reason, harvest_sqrt_grid, lambda_max, sample_stage, FrameLines,
    Sample, StageContext,
};
use super::oracle::{DNOracle, DomainCache};
use super::plan::{plan_support, Plan, SupportSpec};
use crate::error::{Error, Result};
use crate::lattice::{build_parallelogram, EdgeKey, Frame};
use crate::sturm::{borg_reconstruct_with, refine_root, BorgOptions, Potential, SpectrumList};
use crate::vertex::{EdgeSpectra, PotentialMap, Tolerances};

/// Recovered potentials closer than this to the background count as unperturbed.
pub const DETECTION_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct ReconstructConfig {
    pub n: usize,
    pub base: Frame,
    pub support: SupportSpec,
    pub background: Potential,
    /// Highest cosine mode fitted (modes `0..=m_modes`).
    pub m_modes: usize,
    pub tol: Tolerances,
    pub descent: DescentTol,
    pub borg: BorgOptions,
    /// Root tolerance in `√λ` for live refinement.
    pub root_tol: f64,
    /// Give up if more than this fraction of harvest energies fail.
    pub max_failed_fraction: f64,
    /// Offset of the harvest nodes within each `√λ` step.
    pub grid_phase: f64,
}

impl ReconstructConfig {
    pub fn new(n: usize, support: SupportSpec) -> Self {
        ReconstructConfig {
            n,
            base: Frame::IDENTITY,
            support,
            background: Potential::zero(),
            m_modes: 3,
            tol: Tolerances::default(),
            descent: DescentTol::default(),
            borg: BorgOptions::default(),
            root_tol: 1e-10,
            max_failed_fraction: 0.25,
            grid_phase: 0.5,
        }
    }

    /// Eigenvalues fed to the potential fit per edge.
    pub fn eigenvalues_needed(&self) -> usize {
        2 * self.m_modes + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeResult {
    pub edge: EdgeKey,
    pub stage: usize,
    pub potential: Potential,
    pub eigenvalues: Vec<f64>,
    /// How each eigenvalue was refined: `"bisection"` or `"continuation"`.
    pub refinement: Vec<String>,
    pub misfit: f64,
    pub iterations: usize,
    /// Harvested `(λ, s_e(λ))`.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub plan: Plan,
    pub edges: Vec<EdgeResult>,
    /// Energies that produced a sample, per stage.
    pub stage_lambdas: Vec<Vec<f64>>,
    pub skipped: Vec<(f64, String)>,
    pub gauge_residual: f64,
    pub perturbation_detected: bool,
}

impl Reconstruction {
    pub fn potential_map(&self, background: Potential) -> PotentialMap {
        let mut pm = PotentialMap::with_background(background);
        for e in &self.edges {
            pm.insert(e.edge, e.potential.clone());
        }
        pm
    }
}

/// Harvest energies that survive the static exclusions.
pub fn harvest_lambdas(
    m_modes: usize,
    phase: f64,
    known_eigs: &[f64],
    tol: &Tolerances,
) -> (Vec<f64>, Vec<(f64, String)>) {
    let mut keep = Vec::new();
    let mut skip = Vec::new();
    for t in harvest_sqrt_grid(m_modes, phase) {
        let l = t * t;
        match exclusion_reason(l, known_eigs, tol) {
            None => keep.push(l),
            Some(r) => skip.push((l, r)),
        }
    }
    (keep, skip)
}

/// Dirichlet eigenvalues of the background up to the harvest ceiling.
pub fn background_eigenvalues(q0: &Potential, m_modes: usize) -> Result<Vec<f64>> {
    EdgeSpectra::new().below(q0, lambda_max(m_modes) * 1.01)
}

/// Reconstruction together with the error that stopped it, if any; the
/// edges finished before the failure are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub reconstruction: Reconstruction,
    pub error: Option<Error>,
}

pub fn reconstruct(oracle: &dyn DNOracle, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    let out = reconstruct_partial(oracle, cfg)?;
    match out.error {
        Some(e) => Err(e),
        None => Ok(out.reconstruction),
    }
}

/// Preconditions (geometry, support, plan) fail outright; failures during
/// the stages are returned alongside the partial reconstruction.
pub fn reconstruct_partial(oracle: &dyn DNOracle, cfg: &ReconstructConfig) -> Result<Outcome> {
    if oracle.n() != cfg.n {
        return Err(Error::Validation(format!(
            "oracle answers for N = {}, reconstruction asked for N = {}",
            oracle.n(),
            cfg.n
        )));
    }
    let base = build_parallelogram(cfg.n as i64, cfg.base)?;
    let support = cfg.support.resolve(&base)?;
    let plan = plan_support(cfg.n, cfg.base, &support)?;
    info!(
        "plan: {} stage(s), {} placement(s) for {} edge(s)",
        plan.stages.len(),
        plan.frames().len(),
        support.len()
    );
    let mut rec = Reconstruction {
        plan,
        edges: vec![],
        stage_lambdas: vec![],
        skipped: vec![],
        gauge_residual: 0.0,
        perturbation_detected: false,
    };
    let error = run_stages(oracle, cfg, &support, &mut rec).err();
    rec.skipped.sort_by(|a, b| a.0.total_cmp(&b.0));
    rec.skipped.dedup_by(|a, b| a.0 == b.0);
    rec.perturbation_detected = rec.edges.iter().any(|r| {
        let len = r.potential.modes.len().max(cfg.background.modes.len());
        r.potential
            .padded(len)
            .iter()
            .zip(cfg.background.padded(len))
            .any(|(a, b)| (a - b).abs() > DETECTION_THRESHOLD)
    });
    Ok(Outcome {
        reconstruction: rec,
        error,
    })
}

fn run_stages(
    oracle: &dyn DNOracle,
    cfg: &ReconstructConfig,
    support: &BTreeSet<EdgeKey>,
    rec: &mut Reconstruction,
) -> Result<()> {
    let domains = DomainCache::default();
    let spectra = EdgeSpectra::new();
    let mut known = PotentialMap::with_background(cfg.background.clone());
    let mut known_eigs = background_eigenvalues(&cfg.background, cfg.m_modes)?;
    let mut unknown: BTreeSet<EdgeKey> = support.clone();
    let stages = rec.plan.stages.clone();

    for (si, st) in stages.iter().enumerate() {
        let wrap = |e: Error, l: Option<f64>| e.at_stage("harvest", si, l);
        let frames = st
            .frames
            .iter()
            .map(|f| FrameLines::new(domains.get(cfg.n, *f)))
            .collect::<Result<Vec<_>>>()?;
        let ctx = StageContext {
            stage: si,
            frames,
            known: known.clone(),
            unknown: unknown.clone(),
            targets: st.resolved.clone(),
            descent: cfg.descent,
        };
        let (mut lambdas, skipped) = harvest_lambdas(cfg.m_modes, cfg.grid_phase, &known_eigs, &cfg.tol);
        rec.skipped.extend(skipped);
        let declared: Vec<f64> = st.frames.iter().flat_map(|f| oracle.declared_skips(*f)).collect();
        lambdas.retain(|l| {
            let d = declared.iter().any(|x| x.to_bits() == l.to_bits());
            if d {
                rec.skipped.push((*l, "declared inadmissible by the data producer".into()));
            }
            !d
        });
        let outcomes: Vec<(f64, Result<Sample>)> =
            lambdas.par_iter().map(|&l| (l, sample_stage(oracle, &ctx, l))).collect();
        let mut samples = Vec::new();
        let mut first_err = None;
        let mut missing = Vec::new();
        for (l, r) in outcomes {
            match r {
                Ok(s) => samples.push(s),
                Err(Error::Coverage { missing: m }) => missing.extend(m),
                Err(e) => {
                    debug!("stage {si}: lambda {l} skipped: {e}");
                    rec.skipped.push((l, e.to_string()));
                    first_err.get_or_insert((l, e));
                }
            }
        }
        if !missing.is_empty() {
            missing.sort_by(f64::total_cmp);
            missing.dedup();
            return Err(wrap(Error::Coverage { missing }, None));
        }
        let failed = lambdas.len() - samples.len();
        if samples.is_empty() || failed as f64 > cfg.max_failed_fraction * lambdas.len() as f64 {
            return Err(match first_err {
                Some((l, e)) => wrap(e, Some(l)),
                None => wrap(Error::EmptyDataset, None),
            });
        }
        rec.stage_lambdas.push(samples.iter().map(|s| s.lambda).collect());
        rec.gauge_residual = samples.iter().fold(rec.gauge_residual, |g, s| g.max(s.gauge));
        info!("stage {si}: {} samples, {failed} failed", samples.len());

        for e in &st.resolved {
            let r = recover_edge(oracle, &ctx, cfg, &samples, &known_eigs, e, si).map_err(|err| match err {
                Error::Stage { .. } => err,
                other => other.at_stage("edge", si, None),
            })?;
            rec.edges.push(r);
        }
        for r in rec.edges.iter().filter(|r| r.stage == si) {
            known.insert(r.edge, r.potential.clone());
            known_eigs.extend(spectra.below(&r.potential, lambda_max(cfg.m_modes) * 1.01)?);
            unknown.remove(&r.edge);
        }
        known_eigs.sort_by(f64::total_cmp);
    }
    Ok(())
}

fn recover_edge(
    oracle: &dyn DNOracle,
    ctx: &StageContext,
    cfg: &ReconstructConfig,
    samples: &[Sample],
    known_eigs: &[f64],
    e: &EdgeKey,
    si: usize,
) -> Result<EdgeResult> {
    let series = edge_series(samples, e);
    let need = cfg.eigenvalues_needed();
    if series.is_empty() {
        return Err(Error::NumericFailure(format!("no samples of s for edge {e}")));
    }
    if series[0].1 < 0.0 {
        return Err(Error::NumericFailure(format!(
            "edge {e} has a Dirichlet eigenvalue below the harvest window"
        )));
    }
    let br = brackets(&series);
    if br.len() < need {
        return Err(Error::NumericFailure(format!(
            "edge {e}: {} sign changes found, {need} needed",
            br.len()
        )));
    }
    let mut eigs = Vec::with_capacity(need);
    let mut how = Vec::with_capacity(need);
    for &(lo, hi, glo, ghi) in br.iter().take(need) {
        let live = if oracle.is_live() {
            let f = |t: f64| -> Result<f64> {
                let l = t * t;
                if let Some(r) = exclusion_reason(l, known_eigs, &cfg.tol) {
                    return Err(Error::NumericFailure(r));
                }
                let smp = sample_stage(oracle, ctx, l)?;
                smp.s
                    .get(e)
                    .map(|v| v * t)
                    .ok_or_else(|| Error::NumericFailure(format!("edge {e} unresolved at lambda {l}")))
            };
            match refine_root(f, lo, hi, glo, ghi, cfg.root_tol) {
                Ok(t) => Some(t),
                Err(err) => {
                    debug!("edge {e}: live refinement in [{lo}, {hi}] failed: {err}");
                    None
                }
            }
        } else {
            None
        };
        let t = match live {
            Some(t) => {
                how.push("bisection".to_string());
                t
            }
            None => {
                how.push("continuation".to_string());
                continuation_root(&series, 0.5 * (lo + hi), lo, hi)
                    .map_err(|err| err.at_stage("refine", si, Some(lo * lo)))?
            }
        };
        eigs.push(t * t);
    }
    let fit = borg_reconstruct_with(&SpectrumList::new(eigs.clone()), cfg.m_modes, &cfg.borg)
        .map_err(|err| err.at_stage("borg", si, None))?;
    info!("edge {e}: modes {:?} (misfit {:.2e})", fit.potential.modes, fit.misfit);
    Ok(EdgeResult {
        edge: *e,
        stage: si,
        potential: fit.potential,
        eigenvalues: eigs,
        refinement: how,
        misfit: fit.misfit,
        iterations: fit.iterations,
        samples: series.iter().map(|(t, g)| (t * t, g / t)).collect(),
    })
}

