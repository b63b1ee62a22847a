//! JSON-lines D-N datasets: a header line followed by one record per
//! (placement, λ).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::oracle::DatasetOracle;
use crate::inverse::plan::plan_support;
use crate::inverse::reconstruct::{background_eigenvalues, harvest_lambdas};
use crate::lattice::{build_parallelogram, Frame, HexDomain, Point};
use crate::scenario::Scenario;
use crate::vertex::{dn_map_tol, generate_grid, DNMatrix, DnModel, GridSpec, PotentialMap, Tolerances};

pub const FORMAT: &str = "hexqg-dn-dataset/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipEntry {
    pub frame: Frame,
    pub lambda: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameInfo {
    pub frame: Frame,
    pub boundary_order: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub scenario_hash: String,
    pub scenario: Scenario,
    pub model: DnModel,
    pub frames: Vec<FrameInfo>,
    pub skipped: Vec<SkipEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnRecord {
    pub frame: Frame,
    pub lambda: f64,
    pub model: DnModel,
    pub boundary_order: Vec<Point>,
    /// Row-major.
    pub matrix: Vec<f64>,
}

impl DnRecord {
    pub fn from_dn(frame: Frame, dn: &DNMatrix) -> Self {
        let m = dn.dim();
        DnRecord {
            frame,
            lambda: dn.lambda,
            model: dn.model,
            boundary_order: dn.boundary_order.clone(),
            matrix: (0..m * m).map(|k| dn.matrix[(k / m, k % m)]).collect(),
        }
    }

    pub fn to_dn(&self) -> Result<DNMatrix> {
        let m = self.boundary_order.len();
        if self.matrix.len() != m * m {
            return Err(Error::Validation(format!(
                "record at lambda {}: {} matrix entries for {m} boundary vertices",
                self.lambda,
                self.matrix.len()
            )));
        }
        Ok(DNMatrix {
            lambda: self.lambda,
            model: self.model,
            boundary_order: self.boundary_order.clone(),
            matrix: DMatrix::from_row_slice(m, m, &self.matrix),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DnRecord>,
}

/// Energies required per placement: the policy grid on the base placement
/// and, with an inverse section, the harvest grid on every planned placement.
pub fn required_lambdas(scenario: &Scenario, grid: &GridSpec, tol: &Tolerances) -> Result<Vec<(Frame, Vec<f64>, Vec<SkipEntry>)>> {
    let base = scenario.domain()?;
    let pm = scenario.potential_map()?;
    let frame = base.frame();
    let rep = generate_grid(grid, &pm, &base, tol)?;
    let mut per: BTreeMap<Frame, (Vec<f64>, Vec<SkipEntry>)> = BTreeMap::new();
    let mut order = vec![frame];
    {
        let slot = per.entry(frame).or_default();
        slot.0.extend(rep.accepted);
        slot.1.extend(rep.rejected.into_iter().map(|(lambda, reason)| SkipEntry { frame, lambda, reason }));
    }
    if let Some(cfg) = scenario.reconstruct_config()? {
        let support = cfg.support.resolve(&base)?;
        let plan = plan_support(cfg.n, cfg.base, &support)?;
        let eigs = background_eigenvalues(&cfg.background, cfg.m_modes)?;
        let (keep, skip) = harvest_lambdas(cfg.m_modes, cfg.grid_phase, &eigs, tol);
        for f in plan.frames() {
            if !order.contains(&f) {
                order.push(f);
            }
            let slot = per.entry(f).or_default();
            slot.0.extend(keep.iter().copied());
            slot.1.extend(skip.iter().map(|(lambda, reason)| SkipEntry {
                frame: f,
                lambda: *lambda,
                reason: reason.clone(),
            }));
        }
    }
    Ok(order
        .into_iter()
        .map(|f| {
            let (mut l, mut s) = per.remove(&f).unwrap();
            l.sort_by(f64::total_cmp);
            l.dedup();
            s.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
            s.dedup_by(|a, b| a.lambda == b.lambda);
            (f, l, s)
        })
        .collect())
}

/// Forward-generate the dataset of a scenario.
pub fn run_forward(scenario: &Scenario, grid: Option<GridSpec>, tol: Option<Tolerances>) -> Result<Dataset> {
    scenario.validate()?;
    let grid = match grid {
        Some(g) => g,
        None => scenario.lambda_policy.grid()?,
    };
    let tol = tol.unwrap_or_else(|| scenario.lambda_policy.tolerances());
    let pm: PotentialMap = scenario.potential_map()?;
    let n = scenario.domain.n;
    let plan = required_lambdas(scenario, &grid, &tol)?;
    let mut frames = Vec::new();
    let mut skipped = Vec::new();
    let mut jobs: Vec<(usize, Frame, f64)> = Vec::new();
    let mut domains: Vec<HexDomain> = Vec::new();
    for (i, (f, lams, skips)) in plan.into_iter().enumerate() {
        let d = build_parallelogram(n, f)?;
        frames.push(FrameInfo {
            frame: f,
            boundary_order: d.boundary().iter().map(|b| b.position).collect(),
        });
        domains.push(d);
        skipped.extend(skips);
        jobs.extend(lams.into_iter().map(|l| (i, f, l)));
    }
    let out: Vec<(Frame, f64, Result<DNMatrix>)> = jobs
        .par_iter()
        .map(|&(i, f, l)| (f, l, dn_map_tol(&domains[i], &pm, l, DnModel::Vertex, &tol)))
        .collect();
    let mut records = Vec::new();
    for (f, l, r) in out {
        match r {
            Ok(dn) => records.push(DnRecord::from_dn(f, &dn)),
            Err(e) => {
                warn!("skipping lambda {l} on placement {f}: {e}");
                skipped.push(SkipEntry {
                    frame: f,
                    lambda: l,
                    reason: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    skipped.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.lambda.total_cmp(&b.lambda)));
    info!("{} records, {} skipped energies", records.len(), skipped.len());
    Ok(Dataset {
        header: DatasetHeader {
            format: FORMAT.into(),
            scenario_hash: scenario.hash(),
            scenario: scenario.clone(),
            model: DnModel::Vertex,
            frames,
            skipped,
        },
        records,
    })
}

impl Dataset {
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        serde_json::to_writer(&mut *w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse("dataset is empty".into()))?;
        let header: DatasetHeader =
            serde_json::from_str(&first?).map_err(|e| Error::Parse(format!("dataset header: {e}")))?;
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DnRecord =
                serde_json::from_str(&line).map_err(|e| Error::Parse(format!("dataset line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        let ds = Dataset { header, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read(BufReader::new(f))
    }

    /// Format, scenario hash and per-placement invariants.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.format != FORMAT {
            return Err(Error::Validation(format!("unknown dataset format '{}'", h.format)));
        }
        h.scenario.validate()?;
        if h.scenario.hash() != h.scenario_hash {
            return Err(Error::Validation(
                "dataset header hash does not match its embedded scenario".into(),
            ));
        }
        let n = h.scenario.domain.n;
        let mut last: BTreeMap<Frame, f64> = BTreeMap::new();
        for fi in &h.frames {
            let d = build_parallelogram(n, fi.frame)?;
            let expect: Vec<Point> = d.boundary().iter().map(|b| b.position).collect();
            if expect != fi.boundary_order {
                return Err(Error::Validation(format!(
                    "boundary order for placement {} does not match the domain",
                    fi.frame
                )));
            }
        }
        for r in &self.records {
            let fi = h
                .frames
                .iter()
                .find(|f| f.frame == r.frame)
                .ok_or_else(|| Error::Validation(format!("record for undeclared placement {}", r.frame)))?;
            if r.boundary_order != fi.boundary_order {
                return Err(Error::Validation(format!(
                    "record at lambda {} changes the boundary order of placement {}",
                    r.lambda, r.frame
                )));
            }
            if r.model != h.model {
                return Err(Error::Validation(format!("record at lambda {} has a different model", r.lambda)));
            }
            if !r.lambda.is_finite() || r.matrix.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("record at lambda {} is not finite", r.lambda)));
            }
            if let Some(prev) = last.get(&r.frame) {
                if r.lambda <= *prev {
                    return Err(Error::Validation(format!(
                        "lambda values of placement {} are not strictly increasing at {}",
                        r.frame, r.lambda
                    )));
                }
            }
            last.insert(r.frame, r.lambda);
            r.to_dn()?;
        }
        Ok(())
    }

    pub fn oracle(&self) -> Result<DatasetOracle> {
        let mut o = DatasetOracle::new(self.header.scenario.domain.n as usize);
        for r in &self.records {
            o.insert(r.frame, r.to_dn()?)?;
        }
        for s in &self.header.skipped {
            o.declare_skip(s.frame, s.lambda);
        }
        Ok(o)
    }
}
