use std::f64::consts::PI;

use hexqg::lattice::{build_parallelogram, EdgeKey, Frame, Side};
use hexqg::sturm::Potential;
use hexqg::vertex::*;
use nalgebra::DMatrix;

fn one_perturbed() -> PotentialMap {
    let mut pm = PotentialMap::free();
    pm.insert(EdgeKey::of_cell(1, 1, 2), Potential::new(vec![0.0, 0.4, -0.2]).unwrap());
    pm
}

fn admissible_lambdas() -> Vec<f64> {
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    let pm = one_perturbed();
    [0.7, 2.0, 3.3, 5.1, 12.5, 18.0, 27.0, 33.3, 47.0, 61.0]
        .into_iter()
        .filter(|l| admissible(*l, &pm, &d).admissible)
        .collect()
}

#[test]
fn free_reduction_matches_closed_form() {
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    for lam in admissible_lambdas() {
        let sys = assemble(&d, &PotentialMap::free(), lam).unwrap();
        let r = lam.sqrt();
        let k = r / r.sin();
        for (i, &v) in d.interior().iter().enumerate() {
            for (j, &w) in d.interior().iter().enumerate() {
                // −Δ⁽⁰⁾ has −1/3 on neighbours; cos√λ on the diagonal
                let expect = if i == j {
                    k * r.cos()
                } else if d.neighbors(v).contains(&w) {
                    -k / 3.0
                } else {
                    0.0
                };
                assert!((sys.a_ii[(i, j)] - expect).abs() < 1e-12, "lambda {lam}");
            }
        }
    }
}

#[test]
fn degree_weighted_symmetry_of_assembly() {
    let d = build_parallelogram(3, Frame::IDENTITY).unwrap();
    let mut pm = PotentialMap::with_background(Potential::new(vec![0.0, 0.2]).unwrap());
    pm.insert(EdgeKey::of_cell(1, 2, 0), Potential::new(vec![0.3, 0.1, 0.2]).unwrap());
    pm.insert(EdgeKey::of_cell(2, 1, 4), Potential::new(vec![-0.2, 0.0, 0.3]).unwrap());
    let sys = assemble(&d, &pm, 2.0).unwrap();
    assert!(sys.symmetry_defect() < 1e-12);
}

#[test]
fn two_routes_agree_and_are_reciprocal() {
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    for pm in [PotentialMap::free(), one_perturbed()] {
        for lam in admissible_lambdas() {
            let v = dn_map(&d, &pm, lam, DnModel::Vertex).unwrap();
            let r = dn_map_reduced(&d, &pm, lam).unwrap();
            let scale = v.matrix.abs().max().max(1.0);
            assert!((&v.matrix - &r.matrix).abs().max() < 1e-10 * scale, "lambda {lam}");
            assert!(v.reciprocity_defect() < 1e-10 * scale);
            let e = dn_map(&d, &pm, lam, DnModel::Edge).unwrap();
            assert!(e.reciprocity_defect() < 1e-10 * e.matrix.abs().max().max(1.0));
        }
    }
}

#[test]
fn conversion_identity_between_independent_routes() {
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    for pm in [PotentialMap::free(), one_perturbed()] {
        for lam in admissible_lambdas() {
            let vertex = dn_map_reduced(&d, &pm, lam).unwrap();
            let edge = dn_map(&d, &pm, lam, DnModel::Edge).unwrap();
            let r = lam.sqrt();
            let m = edge.dim();
            let rhs = -DMatrix::<f64>::identity(m, m) * r.cos() - &edge.matrix * (r.sin() / r);
            assert!((&vertex.matrix - rhs).abs().max() < 1e-10, "lambda {lam}");
            let back = convert_dn(&convert_dn(&edge, lam).unwrap(), lam).unwrap();
            assert!((&back.matrix - &edge.matrix).abs().max() < 1e-12 * edge.matrix.abs().max().max(1.0));
        }
    }
}

#[test]
fn solve_matches_independent_dense_assembly() {
    // dense system built directly from the closed forms, no shared code path
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    let lam = 2.0f64;
    let s0 = lam.sqrt().sin() / lam.sqrt();
    let c0 = lam.sqrt().cos();
    let n = d.interior().len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, 1);
    let f: Vec<f64> = (0..d.boundary().len()).map(|i| (i as f64 * 0.7).sin()).collect();
    for (i, &v) in d.interior().iter().enumerate() {
        for &w in d.neighbors(v) {
            a[(i, i)] += c0 / s0;
            match d.interior_index(w) {
                Some(j) => a[(i, j)] -= 1.0 / s0,
                None => b[(i, 0)] += f[d.boundary_index(w).unwrap()] / s0,
            }
        }
    }
    let u_ref = a.lu().solve(&b).unwrap();
    let u = solve_interior_dirichlet(&d, &PotentialMap::free(), lam, &f).unwrap();
    for i in 0..n {
        assert!((u[i] - u_ref[(i, 0)]).abs() < 1e-10);
    }
}

#[test]
fn interior_eigenvalue_is_detected_by_condition_scan() {
    let d = build_parallelogram(1, Frame::IDENTITY).unwrap();
    let pm = PotentialMap::free();
    let cond = |l: f64| interior_condition(&d, &pm, l).unwrap();
    // coarse scan for a local maximum of the condition estimate
    let grid: Vec<f64> = (0..800).map(|i| 0.5 + i as f64 * 0.01).collect();
    let vals: Vec<f64> = grid.iter().map(|l| cond(*l)).collect();
    let k = (1..grid.len() - 1)
        .filter(|&k| cos_exclusion_distance(grid[k]) > 1e-2)
        .find(|&k| vals[k] > vals[k - 1] && vals[k] > vals[k + 1] && vals[k] > 1e3)
        .expect("an interior eigenvalue below 8.5");
    // golden-section refinement of the peak
    let (mut lo, mut hi) = (grid[k - 1], grid[k + 1]);
    for _ in 0..80 {
        let m1 = lo + 0.382 * (hi - lo);
        let m2 = lo + 0.618 * (hi - lo);
        if cond(m1) > cond(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let pole = 0.5 * (lo + hi);
    assert!(matches!(
        dn_map(&d, &pm, pole, DnModel::Vertex),
        Err(hexqg::Error::InteriorSpectrumHit { .. })
    ));
    assert!(matches!(
        solve_interior_dirichlet(&d, &pm, pole, &vec![1.0; d.boundary().len()]),
        Err(hexqg::Error::InteriorSpectrumHit { .. })
    ));
    assert!(!admissible(pole, &pm, &d).admissible);
    // away from the peak everything is fine
    assert!(dn_map(&d, &pm, pole + 0.05, DnModel::Vertex).is_ok());
}

#[test]
fn response_decays_away_from_source() {
    let d = build_parallelogram(3, Frame::IDENTITY).unwrap();
    // below the band edge (cos√λ > 1 ⇒ λ < 0) the free solution decays
    let lam = -4.0;
    let dn = dn_map(&d, &PotentialMap::free(), lam, DnModel::Vertex).unwrap();
    let src = d.side_range(Side::Top).start;
    let col: Vec<f64> = (0..dn.dim()).map(|i| dn.matrix[(i, src)].abs()).collect();
    let p0 = d.boundary()[src].position;
    let dist = |i: usize| {
        let (x, y) = (d.boundary()[i].position - p0).to_f64();
        x.hypot(y)
    };
    let mut order: Vec<usize> = (0..col.len()).filter(|&i| i != src).collect();
    order.sort_by(|a, b| dist(*a).total_cmp(&dist(*b)));
    let near = col[order[0]];
    let far = col[*order.last().unwrap()];
    assert!(far < 1e-2 * near, "near {near:e} far {far:e}");
}

#[test]
fn grid_generator_respects_margins() {
    let d = build_parallelogram(2, Frame::IDENTITY).unwrap();
    let pm = one_perturbed();
    let g = GridSpec { start: 0.05, end: 60.0, count: 400 };
    let rep = generate_grid(&g, &pm, &d, &Tolerances::default()).unwrap();
    assert!(rep.accepted.len() + rep.rejected.len() == 400);
    for l in &rep.accepted {
        assert!(cos_exclusion_distance(*l) > 1e-6);
    }
    // (π/2)² itself is rejected with the cos√λ = 0 reason
    let g = GridSpec { start: (PI / 2.0).powi(2), end: 2.0 * (PI / 2.0).powi(2), count: 2 };
    let rep = generate_grid(&g, &pm, &d, &Tolerances::default()).unwrap();
    assert_eq!(rep.rejected.len(), 1);
    assert!(rep.rejected[0].1.contains("0.000000"));
}
