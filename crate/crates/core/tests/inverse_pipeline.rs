use std::f64::consts::PI;

use hexqg::inverse::{reconstruct, reconstruct_partial, LiveOracle, ReconstructConfig, Reconstruction, SupportSpec};
use hexqg::lattice::EdgeKey;
use hexqg::sturm::{borg_reconstruct, dirichlet_spectrum, s_value, Potential, SpectrumList};
use hexqg::vertex::PotentialMap;
use hexqg::Error;

fn cell_support(cells: &[[i64; 2]]) -> SupportSpec {
    SupportSpec { cells: cells.to_vec(), edges: vec![] }
}

fn perturbed(q0: Potential) -> PotentialMap {
    let mut pm = PotentialMap::with_background(q0);
    pm.insert(EdgeKey::of_cell(1, 1, 0), Potential::new(vec![0.0, 0.3, 0.0, 0.1]).unwrap());
    pm.insert(EdgeKey::of_cell(1, 1, 4), Potential::new(vec![0.1, 0.0, -0.25, 0.2]).unwrap());
    pm
}

fn run(pm: &PotentialMap, cfg: &ReconstructConfig) -> Reconstruction {
    reconstruct(&LiveOracle::new(cfg.n, pm.clone()), cfg).unwrap()
}

fn config(q0: &Potential) -> ReconstructConfig {
    let mut cfg = ReconstructConfig::new(3, cell_support(&[[1, 1]]));
    cfg.background = q0.clone();
    cfg
}

#[test]
fn harvested_spectra_match_direct_edge_spectra() {
    let pm = perturbed(Potential::zero());
    let cfg = config(&Potential::zero());
    let rec = run(&pm, &cfg);
    assert_eq!(rec.edges.len(), 6);
    for e in &rec.edges {
        let q = pm.get(&e.edge);
        let want = dirichlet_spectrum(q, cfg.eigenvalues_needed()).unwrap().eigenvalues;
        for (got, w) in e.eigenvalues.iter().zip(&want) {
            assert!((got - w).abs() < 1e-6, "{:?}: {got} vs {w}", e.edge);
        }
        // the sampled characteristic agrees with the direct one
        for &(l, s) in &e.samples {
            let d = s_value(q, l).unwrap();
            assert!((s - d).abs() < 1e-7 * d.abs().max(1.0), "{:?} at {l}: {s} vs {d}", e.edge);
        }
        assert!(rec.gauge_residual < 2e-7, "gauge residual {}", rec.gauge_residual);
    }
}

#[test]
fn unperturbed_edges_show_background_zeros() {
    for c in [0.0, 2.0] {
        let q0 = Potential::constant(c);
        let cfg = config(&q0);
        let rec = run(&PotentialMap::with_background(q0.clone()), &cfg);
        assert!(!rec.perturbation_detected);
        for e in &rec.edges {
            for (n, l) in e.eigenvalues.iter().enumerate() {
                let want = ((n + 1) as f64 * PI).powi(2) + c;
                assert!((l - want).abs() < 1e-6, "c={c} n={n}: {l}");
            }
            assert!((e.potential.mode(0) - c).abs() < 1e-6);
            for m in 1..=cfg.m_modes {
                assert!(e.potential.mode(m).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn disjoint_harvest_grids_agree() {
    let q0 = Potential::new(vec![0.0, 0.2]).unwrap();
    let pm = perturbed(q0.clone());
    let mut a = config(&q0);
    a.grid_phase = 0.5;
    let mut b = config(&q0);
    b.grid_phase = 0.25;
    let ra = run(&pm, &a);
    let rb = run(&pm, &b);
    for la in ra.stage_lambdas.iter().flatten() {
        assert!(rb.stage_lambdas.iter().flatten().all(|lb| lb != la));
    }
    for (ea, eb) in ra.edges.iter().zip(&rb.edges) {
        assert_eq!(ea.edge, eb.edge);
        for (x, y) in ea.eigenvalues.iter().zip(&eb.eigenvalues) {
            assert!((x - y).abs() < 1e-6, "{:?}: {x} vs {y}", ea.edge);
        }
    }
}

#[test]
fn error_contracts_as_more_eigenvalues_are_used() {
    let pm = perturbed(Potential::zero());
    let cfg = config(&Potential::zero());
    let rec = run(&pm, &cfg);
    let m = cfg.m_modes;
    for e in &rec.edges {
        let truth = pm.get(&e.edge);
        let err = |k: usize| {
            let eigs = SpectrumList::new(e.eigenvalues[..k].to_vec());
            let q = borg_reconstruct(&eigs, m).unwrap();
            (0..=m).map(|i| (q.mode(i) - truth.mode(i)).abs()).fold(0.0, f64::max)
        };
        let first = err(m + 1);
        let last = err(2 * m + 2);
        assert!(last < 1e-6, "{:?}: {last}", e.edge);
        assert!(last <= first + 1e-9, "{:?}: {first} -> {last}", e.edge);
    }
}

#[test]
fn boundary_support_is_a_precondition_error() {
    let cfg = ReconstructConfig::new(3, cell_support(&[[0, 1]]));
    let oracle = LiveOracle::new(3, PotentialMap::free());
    let e = reconstruct_partial(&oracle, &cfg).unwrap_err();
    assert!(matches!(e, Error::Validation(_)), "{e}");
}

#[test]
fn two_separate_cells_are_resolved() {
    let mut pm = PotentialMap::free();
    pm.insert(EdgeKey::of_cell(1, 1, 1), Potential::new(vec![0.0, 0.2, 0.1, 0.0]).unwrap());
    pm.insert(EdgeKey::of_cell(2, 2, 3), Potential::new(vec![0.0, 0.0, 0.3, -0.1]).unwrap());
    let cfg = ReconstructConfig::new(4, cell_support(&[[1, 1], [2, 2]]));
    let rec = run(&pm, &cfg);
    assert!(rec.edges.len() >= 11);
    for e in &rec.edges {
        let t = pm.get(&e.edge);
        for i in 0..4 {
            assert!((e.potential.mode(i) - t.mode(i)).abs() < 1e-6, "{:?}", e.edge);
        }
    }
}
