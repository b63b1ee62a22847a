use std::f64::consts::PI;

use hexqg::sturm::*;
use proptest::prelude::*;

/// Independent reference: classical RK4 on a fine uniform mesh for
/// `y'' = (q − λ) y`, returning `(φ(1), φ'(1), θ(1), θ'(1))`.
fn rk4(modes: &[f64], lambda: f64, steps: usize) -> [f64; 4] {
    let q = |z: f64| -> f64 {
        modes
            .iter()
            .enumerate()
            .map(|(m, a)| a * (2.0 * PI * m as f64 * z).cos())
            .sum()
    };
    let h = 1.0 / steps as f64;
    let f = |z: f64, y: [f64; 4]| {
        let w = q(z) - lambda;
        [y[1], w * y[0], y[3], w * y[2]]
    };
    let mut y = [0.0, 1.0, 1.0, 0.0];
    for i in 0..steps {
        let z = i as f64 * h;
        let k1 = f(z, y);
        let y2: [f64; 4] = std::array::from_fn(|j| y[j] + 0.5 * h * k1[j]);
        let k2 = f(z + 0.5 * h, y2);
        let y3: [f64; 4] = std::array::from_fn(|j| y[j] + 0.5 * h * k2[j]);
        let k3 = f(z + 0.5 * h, y3);
        let y4: [f64; 4] = std::array::from_fn(|j| y[j] + h * k3[j]);
        let k4 = f(z + h, y4);
        y = std::array::from_fn(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
    }
    [y[0], y[1], y[2], y[3]]
}

fn free_s(lambda: f64) -> f64 {
    if lambda > 0.0 {
        lambda.sqrt().sin() / lambda.sqrt()
    } else if lambda < 0.0 {
        (-lambda).sqrt().sinh() / (-lambda).sqrt()
    } else {
        1.0
    }
}

#[test]
fn free_s_matches_closed_form_across_branches() {
    let q = Potential::zero();
    let mut lams: Vec<f64> = (0..97).map(|i| -5.0 + 105.0 * (i as f64 + 0.5) / 97.0).collect();
    lams.extend([1e-9, -1e-7, 5e-4]);
    for lam in lams {
        let s = s_value(&q, lam).unwrap();
        assert!((s - free_s(lam)).abs() < 1e-10, "lambda {lam}: {s}");
    }
}

#[test]
fn perturbed_transfer_matches_rk4_reference() {
    let q = Potential::new(vec![0.3, 0.5, -0.4, 0.2]).unwrap();
    for lam in [-3.0, 0.0, 4.4, 25.0, 90.0] {
        let t = integrate_ivp(&q, lam).unwrap();
        let r = rk4(&[0.3, 0.5, -0.4, 0.2], lam, 20_000);
        for (got, want) in [t.s, t.a, t.c, t.c_prime].iter().zip(r) {
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "lambda {lam}: {got} vs {want}");
        }
    }
}

#[test]
fn spectrum_of_constant_potentials_is_shifted() {
    for c in [0.0, -1.0, 2.0] {
        let eigs = dirichlet_spectrum(&Potential::constant(c), 5).unwrap();
        for (n, e) in eigs.eigenvalues.iter().enumerate() {
            let want = ((n + 1) as f64 * PI).powi(2) + c;
            assert!((e - want).abs() < 1e-9, "c={c}: {e} vs {want}");
        }
    }
}

#[test]
fn eigenvalues_are_zeros_of_s() {
    let q = Potential::new(vec![0.0, 0.4, 0.1]).unwrap();
    let eigs = dirichlet_spectrum(&q, 6).unwrap();
    for (n, &e) in eigs.eigenvalues.iter().enumerate() {
        // s changes sign across each eigenvalue, and the count below matches
        let s_lo = s_value(&q, e - 1e-4).unwrap();
        let s_hi = s_value(&q, e + 1e-4).unwrap();
        assert!(s_lo * s_hi < 0.0);
        assert_eq!(oscillation_count(&q, e + 1e-4).unwrap(), n + 1);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let base = vec![0.1, 0.3, -0.2, 0.15];
    let q = Potential::new(base.clone()).unwrap();
    let eigs = dirichlet_spectrum(&q, 4).unwrap();
    let h = 1e-6;
    for (n, &lam) in eigs.eigenvalues.iter().enumerate() {
        let g = eigenvalue_gradient(&q, lam, 4).unwrap();
        for m in 0..4 {
            let mut up = base.clone();
            up[m] += h;
            let mut dn = base.clone();
            dn[m] -= h;
            let lu = dirichlet_spectrum(&Potential::new(up).unwrap(), 4).unwrap().eigenvalues[n];
            let ld = dirichlet_spectrum(&Potential::new(dn).unwrap(), 4).unwrap().eigenvalues[n];
            let fd = (lu - ld) / (2.0 * h);
            assert!((g[m] - fd).abs() < 1e-5, "n={n} m={m}: {} vs {fd}", g[m]);
        }
    }
}

#[test]
fn borg_recovers_band_limited_potential() {
    let truth = vec![0.0, 0.4, -0.25, 0.1];
    let eigs = dirichlet_spectrum(&Potential::new(truth.clone()).unwrap(), 8).unwrap();
    let rec = borg_reconstruct(&eigs, 3).unwrap();
    for (m, t) in truth.iter().enumerate() {
        assert!((rec.mode(m) - t).abs() < 1e-8, "mode {m}");
    }
}

#[test]
fn borg_rejects_spectrum_outside_the_model() {
    // a genuinely non-band-limited spectrum: step potential approximated by many modes
    let modes: Vec<f64> = (0..12).map(|m| if m % 2 == 1 { 0.8 / m as f64 } else { 0.0 }).collect();
    let eigs = dirichlet_spectrum(&Potential::new(modes).unwrap(), 4).unwrap();
    let opts = BorgOptions { mismatch_tol: 1e-9, ..Default::default() };
    assert!(borg_reconstruct_with(&eigs, 1, &opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn wronskian_is_one_and_symmetric_diagonal_agrees(
        modes in proptest::collection::vec(-2.0f64..2.0, 1..6),
        lam in -10.0f64..150.0,
    ) {
        let t = integrate_ivp(&Potential::new(modes).unwrap(), lam).unwrap();
        prop_assert!((t.det() - 1.0).abs() < 1e-10);
        prop_assert!(t.diagonal_defect() < 1e-10 * t.c.abs().max(1.0));
    }

    #[test]
    fn spectrum_is_strictly_increasing_and_bounded_by_potential(
        modes in proptest::collection::vec(-1.0f64..1.0, 1..5),
    ) {
        let q = Potential::new(modes).unwrap();
        let eigs = dirichlet_spectrum(&q, 5).unwrap().eigenvalues;
        for w in eigs.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        // min-max: (nπ)² + min q ≤ λ_n ≤ (nπ)² + max q
        for (n, e) in eigs.iter().enumerate() {
            let free = ((n + 1) as f64 * PI).powi(2);
            prop_assert!(*e >= free - q.bound() - 1e-9 && *e <= free + q.bound() + 1e-9);
        }
    }
}
