//! Reconstruction reports: JSON, CSV tables and SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::plan::Plan;
use crate::inverse::reconstruct::Outcome;
use crate::lattice::{EdgeKey, Frame};
use crate::scenario::Scenario;
use crate::sturm::{dirichlet_spectrum, Potential};

pub const REPORT_FORMAT: &str = "hexqg-report/1";
pub const NO_PERTURBATION: &str = "no in-support perturbation detected";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeReport {
    pub edge: EdgeKey,
    pub stage: usize,
    pub recovered: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    /// `max_m |a_m − a_m^true|`
    pub max_error: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub true_eigenvalues: Option<Vec<f64>>,
    pub refinement: Vec<String>,
    pub misfit: f64,
    pub iterations: usize,
    /// `(λ, s_e(λ))` as harvested.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub gauge_residual: f64,
    pub skipped: Vec<(f64, String)>,
    pub frames: Vec<Frame>,
    pub perturbation_detected: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub scenario_hash: String,
    /// `"live"` or `"dataset"`.
    pub mode: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub m_modes: usize,
    pub background: Vec<f64>,
    pub plan: Plan,
    pub edges: Vec<EdgeReport>,
    pub stage_lambdas: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub max_error: Option<f64>,
    /// Error that stopped the run; the edges above were finished before it.
    pub error: Option<String>,
    pub exit_code: i32,
}

fn mode_error(a: &Potential, b: &Potential) -> f64 {
    let len = a.modes.len().max(b.modes.len());
    a.padded(len)
        .iter()
        .zip(b.padded(len))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Assemble a report; ground truth is taken from the scenario's potentials.
pub fn build_report(scenario: &Scenario, outcome: &Outcome, mode: &str) -> Result<Report> {
    let rec = &outcome.reconstruction;
    let truth = scenario.potential_map()?;
    let m_modes = scenario.inverse.as_ref().map_or(3, |i| i.m_modes);
    let mut edges = Vec::new();
    for e in &rec.edges {
        let q = truth.get(&e.edge);
        let true_eigs = dirichlet_spectrum(q, e.eigenvalues.len())?.eigenvalues;
        edges.push(EdgeReport {
            edge: e.edge,
            stage: e.stage,
            recovered: e.potential.modes.clone(),
            truth: Some(q.modes.clone()),
            max_error: Some(mode_error(&e.potential, q)),
            eigenvalues: e.eigenvalues.clone(),
            true_eigenvalues: Some(true_eigs),
            refinement: e.refinement.clone(),
            misfit: e.misfit,
            iterations: e.iterations,
            samples: e.samples.clone(),
        });
    }
    let max_error = edges
        .iter()
        .filter_map(|e| e.max_error)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let mut notes = Vec::new();
    if outcome.error.is_none() && !rec.perturbation_detected {
        notes.push(NO_PERTURBATION.to_string());
    }
    Ok(Report {
        format: REPORT_FORMAT.into(),
        scenario_hash: scenario.hash(),
        mode: mode.into(),
        n: scenario.domain.n as usize,
        m_modes,
        background: scenario.background.clone(),
        plan: rec.plan.clone(),
        edges,
        stage_lambdas: rec.stage_lambdas.clone(),
        diagnostics: Diagnostics {
            gauge_residual: rec.gauge_residual,
            skipped: rec.skipped.clone(),
            frames: rec.plan.frames(),
            perturbation_detected: rec.perturbation_detected,
            notes,
        },
        max_error,
        error: outcome.error.as_ref().map(|e| e.to_string()),
        exit_code: outcome.error.as_ref().map_or(0, |e| e.exit_code()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Validation(format!("unknown report format '{other}'"))),
        }
    }
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<PathBuf> {
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    Ok(p)
}

/// Write `report.json` (always) plus the requested CSV/SVG files into `dir`.
pub fn emit_report(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    out.push(write_file(dir, "report.json", json.as_bytes())?);
    if formats.contains(&Format::Csv) {
        out.push(write_file(dir, "samples.csv", &samples_csv(report)?)?);
        out.push(write_file(dir, "spectra.csv", &spectra_csv(report)?)?);
    }
    if formats.contains(&Format::Svg) {
        out.extend(emit_plots(report, dir)?);
    }
    Ok(out)
}

pub fn emit_plots(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(vec![
        write_file(dir, "s_samples.svg", s_plot(report).as_bytes())?,
        write_file(dir, "potentials.svg", potential_plot(report).as_bytes())?,
    ])
}

pub fn load_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let r: Report = serde_json::from_str(&text)?;
    if r.format != REPORT_FORMAT {
        return Err(Error::Validation(format!("unknown report format '{}'", r.format)));
    }
    Ok(r)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One row per (stage energy, tracked edge); `s` is empty where the edge
/// was not resolved at that energy.
pub fn samples_csv(report: &Report) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario_hash", "edge", "stage", "lambda", "s"]).map_err(csv_err)?;
    for (si, lams) in report.stage_lambdas.iter().enumerate() {
        for e in report.edges.iter().filter(|e| e.stage == si) {
            for l in lams {
                let s = e
                    .samples
                    .iter()
                    .find(|(x, _)| x.to_bits() == l.to_bits())
                    .map(|(_, s)| format!("{s:e}"))
                    .unwrap_or_default();
                w.write_record([
                    report.scenario_hash.as_str(),
                    &e.edge.to_string(),
                    &si.to_string(),
                    &format!("{l:e}"),
                    &s,
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn spectra_csv(report: &Report) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario_hash", "edge", "n", "recovered", "true"]).map_err(csv_err)?;
    for e in &report.edges {
        for (i, l) in e.eigenvalues.iter().enumerate() {
            let t = e
                .true_eigenvalues
                .as_ref()
                .and_then(|v| v.get(i))
                .map(|x| format!("{x:e}"))
                .unwrap_or_default();
            w.write_record([
                report.scenario_hash.as_str(),
                &e.edge.to_string(),
                &(i + 1).to_string(),
                &format!("{l:e}"),
                &t,
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let lo = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
        let hi = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
        let (mut x0, mut x1) = (lo(&mut xs.clone()), hi(&mut xs.clone()));
        let (mut y0, mut y1) = (lo(&mut ys.clone()), hi(&mut ys.clone()));
        if !(x0.is_finite() && x1.is_finite()) || x1 <= x0 {
            x0 = 0.0;
            x1 = 1.0;
        }
        if !(y0.is_finite() && y1.is_finite()) || y1 <= y0 {
            y0 -= 1.0;
            y1 = y0 + 2.0;
        }
        let m = 0.05 * (y1 - y0);
        Axes { x0, x1, y0: y0 - m, y1: y1 + m }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_open(title: &str, hash: &str, ax: &Axes, xl: &str, yl: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, "<!-- scenario {} -->", esc(hash));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    if ax.y0 < 0.0 && ax.y1 > 0.0 {
        let y = ax.py(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#aaa" stroke-dasharray="3,3"/>"##,
            W - PAD
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-size="11">{:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text>"#,
        H - PAD + 16.0,
        ax.x0,
        W - PAD,
        H - PAD + 16.0,
        ax.x1
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{:.3}</text>"#,
        PAD - 4.0,
        PAD + 4.0,
        ax.y1,
        PAD - 4.0,
        H - PAD,
        ax.y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        esc(xl)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(yl)
    );
    s
}

fn polyline(ax: &Axes, pts: &[(f64, f64)], color: &str, dash: bool) -> String {
    let coords: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", ax.px(*x), ax.py(*y)))
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.4"{} points="{}"/>"#,
        if dash { r#" stroke-dasharray="6,4""# } else { "" },
        coords.join(" ")
    )
}

fn legend(s: &mut String, i: usize, label: &str, color: &str) {
    let y = PAD + 14.0 + 14.0 * i as f64;
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
        W - PAD - 190.0,
        y - 9.0,
        W - PAD - 175.0,
        y,
        esc(label)
    );
}

/// `√λ·s_e(λ)` against λ with the located zeros marked.
pub fn s_plot(report: &Report) -> String {
    let scaled: Vec<Vec<(f64, f64)>> = report
        .edges
        .iter()
        .map(|e| e.samples.iter().map(|(l, s)| (*l, l.sqrt() * s)).collect())
        .collect();
    let ax = Axes::fit(
        scaled.iter().flatten().map(|p| p.0),
        scaled.iter().flatten().map(|p| p.1),
    );
    let mut s = svg_open("edge characteristics", &report.scenario_hash, &ax, "lambda", "sqrt(lambda) * s_e(lambda)");
    for (i, (e, pts)) in report.edges.iter().zip(&scaled).enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        s.push_str(&polyline(&ax, pts, c, false));
        s.push('\n');
        for l in &e.eigenvalues {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{c}"/>"#,
                ax.px(*l),
                ax.py(0.0)
            );
        }
        legend(&mut s, i, &e.edge.to_string(), c);
    }
    s.push_str("</svg>\n");
    s
}

/// Recovered (solid) against true (dashed) potentials on `[0, 1]`.
pub fn potential_plot(report: &Report) -> String {
    let zs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let curves: Vec<(Vec<(f64, f64)>, Option<Vec<(f64, f64)>>)> = report
        .edges
        .iter()
        .map(|e| {
            let rec = Potential { modes: e.recovered.clone() };
            let r = zs.iter().map(|z| (*z, rec.eval(*z))).collect();
            let t = e.truth.as_ref().map(|m| {
                let q = Potential { modes: m.clone() };
                zs.iter().map(|z| (*z, q.eval(*z))).collect()
            });
            (r, t)
        })
        .collect();
    let all = curves
        .iter()
        .flat_map(|(r, t)| r.iter().chain(t.iter().flatten()))
        .copied()
        .collect::<Vec<_>>();
    let ax = Axes::fit(all.iter().map(|p| p.0), all.iter().map(|p| p.1));
    let mut s = svg_open("recovered (solid) vs true (dashed) potentials", &report.scenario_hash, &ax, "z", "q(z)");
    for (i, (e, (r, t))) in report.edges.iter().zip(&curves).enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        s.push_str(&polyline(&ax, r, c, false));
        s.push('\n');
        if let Some(t) = t {
            s.push_str(&polyline(&ax, t, c, true));
            s.push('\n');
        }
        legend(&mut s, i, &e.edge.to_string(), c);
    }
    s.push_str("</svg>\n");
    s
}
