//! Perturb two edges of one cell, then recover them from D-N maps alone.
//!
//! `cargo run --release --example live_roundtrip [background_amplitude]`

use hexqg::inverse::{reconstruct, LiveOracle, ReconstructConfig, SupportSpec};
use hexqg::lattice::EdgeKey;
use hexqg::sturm::Potential;
use hexqg::vertex::PotentialMap;

fn main() -> hexqg::Result<()> {
    let bg: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let q0 = Potential::new(vec![0.0, bg])?;
    let mut pm = PotentialMap::with_background(q0.clone());
    pm.insert(EdgeKey::of_cell(1, 1, 0), Potential::new(vec![0.0, 0.3, 0.0, 0.1])?);
    pm.insert(EdgeKey::of_cell(1, 1, 3), Potential::new(vec![0.0, -0.2, 0.4, 0.0])?);

    let mut cfg = ReconstructConfig::new(3, SupportSpec { cells: vec![[1, 1]], edges: vec![] });
    cfg.background = q0;
    let oracle = LiveOracle::new(3, pm.clone());
    let start = std::time::Instant::now();
    let rec = reconstruct(&oracle, &cfg)?;
    println!("{} frames, {:.1?}", rec.plan.frames().len(), start.elapsed());
    for e in &rec.edges {
        let truth = pm.get(&e.edge);
        let err = (0..=cfg.m_modes)
            .map(|m| (e.potential.mode(m) - truth.mode(m)).abs())
            .fold(0.0, f64::max);
        println!("{}  {:?}  error {err:.1e}", e.edge, e.potential.padded(cfg.m_modes + 1));
    }
    Ok(())
}
