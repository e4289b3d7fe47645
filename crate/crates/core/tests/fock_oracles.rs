use proptest::prelude::*;
use qgs_core::fock::{
    classical_g2, classical_g2_isserlis, coeffs, joint_pnd, joint_pnd_truncated, joint_pnd_with,
    moment_integral_closed, rho_element, rho_element_quadrature, single_mode_pnd, vacuum_identity_check,
    wavepacket_g2, CoeffSet, Component, DensityMatrix, FockIndex, PndOptions,
};
use qgs_core::mc::{empirical_g2, empirical_pnd, poisson_mixing_element, poisson_mixing_single_mode, SamplerConfig};
use qgs_core::source::joint_pdf;
use qgs_core::{Complex64, QgsError, TwoPointParams};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn idx(n: usize, m: usize, k: usize, l: usize) -> FockIndex {
    FockIndex::new(n, m, k, l).unwrap()
}

/// All indices with N + M + K + L <= `order`.
fn indices_up_to(order: usize) -> Vec<FockIndex> {
    let mut out = Vec::new();
    for n in 0..=order {
        for m in 0..=order - n {
            for k in 0..=order - n - m {
                for l in 0..=order - n - m - k {
                    out.push(idx(n, m, k, l));
                }
            }
        }
    }
    out
}

/// Trapezoid rule over `[-40, 40]²`; the integrand is entire and decays as
/// a Gaussian, so the rule converges geometrically in the step.
fn moment_integral_trapezoid(cs: &CoeffSet, n: i32, m: i32) -> f64 {
    let points = 4001;
    let h = 80.0 / (points - 1) as f64;
    let mut total = 0.0;
    for i in 0..points {
        let p = -40.0 + i as f64 * h;
        for j in 0..points {
            let q = -40.0 + j as f64 * h;
            let e = -cs.x * p * p - cs.y * q * q + 2.0 * cs.z * p * q + cs.u * p + cs.v * q + cs.w;
            total += p.powi(n) * q.powi(m) * e.exp();
        }
    }
    total * h * h
}

#[test]
fn closed_moment_integral_matches_planar_quadrature() {
    let cases = [
        (CoeffSet::new(2.0, 2.0, 0.5, 0.3, -0.1, 0.0).unwrap(), 2, 3),
        (CoeffSet::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0, 0),
        (CoeffSet::new(1.5, 3.0, -1.2, 0.7, 0.4, -0.2).unwrap(), 4, 1),
        (CoeffSet::new(2.2, 1.3, 1.6, -0.5, 1.1, 0.3).unwrap(), 3, 3),
    ];
    for (cs, n, m) in cases {
        let closed = moment_integral_closed(&cs, n, m).unwrap();
        let quad = moment_integral_trapezoid(&cs, n as i32, m as i32);
        assert!((closed - quad).abs() <= 1e-10 * quad.abs().max(1.0), "({n},{m}): {closed} vs {quad}");
    }
    let pi = moment_integral_closed(&CoeffSet::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0, 0).unwrap();
    assert!((pi - std::f64::consts::PI).abs() < 1e-15);
    let odd = moment_integral_closed(&CoeffSet::new(1.5, 2.0, 0.4, 0.0, 0.0, 0.0).unwrap(), 1, 0).unwrap();
    assert_eq!(odd, 0.0);
}

#[test]
fn coefficient_set_reproduces_the_amplitude_exponent() {
    // The exponent of each quadrature, including the coherent-state damping
    // e^{-p²-q²}, read off the amplitude density itself.
    let p = TwoPointParams::new(2.0, 0.5, 0.6, c(1.0, 0.0), c(0.0, 0.0)).unwrap();
    let cs = coeffs(&p, Component::Real).unwrap();
    let peak = joint_pdf(&p, p.mu1, p.mu2).unwrap().ln();
    for &(a, b) in &[(0.0, 0.0), (0.5, -0.3), (-1.2, 0.8), (2.0, 1.0)] {
        let density = joint_pdf(&p, c(a, p.mu1.im), c(b, p.mu2.im)).unwrap().ln() - peak;
        let exponent = density - a * a - b * b;
        let form = -cs.x * a * a - cs.y * b * b + 2.0 * cs.z * a * b + cs.u * a + cs.v * b + cs.w;
        assert!((exponent - form).abs() < 1e-12, "({a},{b}): {exponent} vs {form}");
    }
    assert!(cs.discriminant() > 0.0);
}

#[test]
fn hermiticity_and_diagonal_positivity() {
    for p in [
        TwoPointParams::new(0.8, 0.5, 0.6, c(0.6, 0.2), c(0.3, -0.1)).unwrap(),
        TwoPointParams::new(1.5, 0.4, 0.95, c(-0.2, 0.9), c(0.5, 0.5)).unwrap(),
    ] {
        let dm = DensityMatrix::new(&p, 12, 12).unwrap();
        for i in indices_up_to(12) {
            let a = dm.element(i).unwrap();
            let b = dm.element(i.adjoint()).unwrap();
            assert!((a - b.conj()).norm() < 1e-10, "{i:?}");
            if i.n == i.k && i.m == i.l {
                assert!(a.re >= -1e-10 && a.im.abs() < 1e-10, "{i:?}: {a}");
            }
        }
    }
}

#[test]
fn zero_mean_selection_rules() {
    let z = c(0.0, 0.0);
    let independent = TwoPointParams::new(0.7, 1.1, 0.0, z, z).unwrap();
    let correlated = TwoPointParams::new(0.7, 1.1, 0.6, z, z).unwrap();
    for i in indices_up_to(8) {
        let diagonal = i.n == i.k && i.m == i.l;
        let a = rho_element(&independent, i).unwrap();
        if !diagonal {
            assert!(a.norm() < 1e-14, "g = 0, {i:?}: {a}");
        }
        // With correlated phases only the total photon number is conserved.
        let b = rho_element(&correlated, i).unwrap();
        if i.n + i.m != i.k + i.l {
            assert!(b.norm() < 1e-14, "g > 0, {i:?}: {b}");
        }
    }
    for i in [idx(1, 0, 0, 1), idx(2, 1, 1, 2), idx(0, 2, 1, 1)] {
        let closed = rho_element(&correlated, i).unwrap();
        let oracle = rho_element_quadrature(&correlated, i).unwrap();
        assert!(closed.norm() > 1e-3);
        assert!((closed - oracle).norm() <= 1e-8 * oracle.norm(), "{i:?}");
    }
    assert!(rho_element(&correlated, idx(1, 0, 0, 0)).unwrap().norm() < 1e-15);
}

#[test]
fn vacuum_element_examples() {
    let z = c(0.0, 0.0);
    for nbar in [0.3, 1.0, 2.5] {
        let p = TwoPointParams::new(nbar, nbar, 0.0, z, z).unwrap();
        let v = rho_element(&p, idx(0, 0, 0, 0)).unwrap();
        assert!((v.re - (1.0 + nbar).powi(-2)).abs() < 1e-15);
    }
}

#[test]
fn element_matches_poisson_mixing_estimate() {
    let p = TwoPointParams::new(1.0, 1.0, 0.5, c(0.5, 0.0), c(0.0, 0.5)).unwrap();
    let exact = rho_element(&p, idx(1, 1, 1, 1)).unwrap();
    let est = poisson_mixing_element(&SamplerConfig::new(p, 10_000_000, 99, 8).unwrap(), idx(1, 1, 1, 1)).unwrap();
    assert!((est.value.re - exact.re).abs() < 4.0 * est.std_error.0);
    assert!((est.value.im - exact.im).abs() < 4.0 * est.std_error.1 + 1e-15);
}

#[test]
fn independent_detectors_factorize() {
    for (mu1, mu2) in [(c(0.0, 0.0), c(0.0, 0.0)), (c(0.8, -0.3), c(0.1, 1.2))] {
        let p = TwoPointParams::new(0.9, 1.4, 0.0, mu1, mu2).unwrap();
        let pnd = joint_pnd_truncated(&p, 40).unwrap();
        let m1 = single_mode_pnd(p.n1, p.mu1, 40).unwrap();
        let m2 = single_mode_pnd(p.n2, p.mu2, 40).unwrap();
        for n in 0..=40 {
            for m in 0..=40 {
                assert!((pnd.get(n, m) - m1[n] * m2[m]).abs() < 1e-9, "({n},{m})");
            }
        }
    }
}

#[test]
fn unit_thermal_product_distribution() {
    let z = c(0.0, 0.0);
    let p = TwoPointParams::new(1.0, 1.0, 0.0, z, z).unwrap();
    let pnd = joint_pnd_truncated(&p, 30).unwrap();
    for n in 0..=30 {
        for m in 0..=30 {
            let expected = 0.5f64.powi((n + m + 2) as i32);
            assert!((pnd.get(n, m) - expected).abs() <= 1e-13 * expected, "({n},{m})");
        }
    }
}

#[test]
fn nearly_coherent_detectors_split_a_thermal_mode() {
    let z = c(0.0, 0.0);
    let (n1, n2) = (0.8, 0.5);
    let p = TwoPointParams::new(n1, n2, 1.0 - 1e-6, z, z).unwrap();
    let pnd = joint_pnd_with(
        &p,
        60,
        &PndOptions {
            tail_tolerance: 1e-12,
            ..PndOptions::default()
        },
    )
    .unwrap();
    let total = n1 + n2;
    let share = n1 / total;
    let mut tv = pnd.tail_mass.abs();
    for n in 0..=pnd.n_max {
        for m in 0..=pnd.n_max {
            let t = (n + m) as i32;
            let be = total.powi(t) / (1.0 + total).powi(t + 1);
            let ln_choose = qgs_core::specfun::ln_factorial(n + m)
                - qgs_core::specfun::ln_factorial(n)
                - qgs_core::specfun::ln_factorial(m);
            let split = ln_choose.exp() * share.powi(n as i32) * (1.0 - share).powi(m as i32);
            tv += (pnd.get(n, m) - be * split).abs();
        }
    }
    assert!(0.5 * tv < 1e-3, "TV = {}", 0.5 * tv);
}

#[test]
fn zero_mean_marginals_are_bose_einstein() {
    let z = c(0.0, 0.0);
    for g in [0.0, 0.5, 0.99, 1.0] {
        let p = TwoPointParams::new(0.7, 1.3, g, z, z).unwrap();
        let pnd = joint_pnd_with(
            &p,
            60,
            &PndOptions {
                tail_tolerance: 1e-13,
                ..PndOptions::default()
            },
        )
        .unwrap();
        for n in 0..=20 {
            let be1 = 0.7f64.powi(n as i32) / 1.7f64.powi(n as i32 + 1);
            let be2 = 1.3f64.powi(n as i32) / 2.3f64.powi(n as i32 + 1);
            assert!((pnd.row_sum(n) - be1).abs() < 1e-10, "g={g} row {n}");
            assert!((pnd.col_sum(n) - be2).abs() < 1e-10, "g={g} col {n}");
        }
    }
}

#[test]
fn marginals_do_not_depend_on_coherence() {
    for g in [0.0, 0.3, 0.9, 0.999, 1.0] {
        let p = TwoPointParams::new(0.6, 0.9, g, c(0.7, 0.2), c(-0.3, 0.6)).unwrap();
        let pnd = joint_pnd_with(
            &p,
            50,
            &PndOptions {
                tail_tolerance: 1e-10,
                ..PndOptions::default()
            },
        )
        .unwrap();
        let m1 = single_mode_pnd(p.n1, p.mu1, pnd.n_max).unwrap();
        let m2 = single_mode_pnd(p.n2, p.mu2, pnd.n_max).unwrap();
        for n in 0..=25 {
            assert!((pnd.row_sum(n) - m1[n]).abs() < 1e-8, "g={g} row {n}");
            assert!((pnd.col_sum(n) - m2[n]).abs() < 1e-8, "g={g} col {n}");
        }
    }
}

#[test]
fn adaptive_truncation_normalizes() {
    for p in [
        TwoPointParams::new(2.0, 0.5, 0.8, c(1.5, 0.0), c(0.2, 0.4)).unwrap(),
        TwoPointParams::new(4.0, 4.0, 1.0, c(0.0, 0.0), c(0.0, 0.0)).unwrap(),
    ] {
        let pnd = joint_pnd(&p, 8).unwrap();
        let total: f64 = pnd.p.iter().sum();
        assert!(total >= 1.0 - 1e-6, "{total}");
        assert!((total + pnd.tail_mass - 1.0).abs() < 1e-9);
        assert!(pnd.p.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn vacuum_identity_holds_to_order_64() {
    assert!(vacuum_identity_check(64));
}

#[test]
fn single_mode_distribution_matches_poisson_mixing() {
    let est = poisson_mixing_single_mode(0.5, c(1.0, 0.0), 12, 10_000_000, 5, 8).unwrap();
    let exact = single_mode_pnd(0.5, c(1.0, 0.0), 12).unwrap();
    for (n, ((m, se), e)) in est.iter().zip(&exact).enumerate() {
        assert!((m - e).abs() < 4.0 * se, "N={n}: {m} ± {se} vs {e}");
    }
}

#[test]
fn bunched_source_correlates_equal_and_anticorrelates_unequal_counts() {
    let p = TwoPointParams::new(1.0, 1.0, 0.9, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
    let opts = PndOptions {
        tail_tolerance: 1e-12,
        ..PndOptions::default()
    };
    let pnd = joint_pnd_with(&p, 40, &opts).unwrap();
    for n in [1, 3, 5, 8] {
        assert!(wavepacket_g2(&pnd, n, n).unwrap() > 1.0, "({n},{n})");
    }
    let g51 = wavepacket_g2(&pnd, 5, 1).unwrap();
    assert!(g51 < 1.0);
    let e = empirical_pnd(&SamplerConfig::new(p, 10_000_000, 31, 8).unwrap()).unwrap();
    let est = empirical_g2(&e, 5, 1).unwrap();
    assert!(est.reliable);
    assert!((est.estimate - g51).abs() < 4.0 * est.std_error, "{est:?} vs {g51}");
}

#[test]
fn symmetric_detectors_give_symmetric_correlations() {
    let p = TwoPointParams::new(0.9, 0.9, 0.8, c(0.7, 0.3), c(0.7, 0.3)).unwrap();
    let pnd = joint_pnd_with(
        &p,
        40,
        &PndOptions {
            tail_tolerance: 1e-12,
            ..PndOptions::default()
        },
    )
    .unwrap();
    for n in 0..10 {
        for m in 0..10 {
            let a = wavepacket_g2(&pnd, n, m).unwrap();
            let b = wavepacket_g2(&pnd, m, n).unwrap();
            assert!((a - b).abs() <= 1e-9 * a, "({n},{m})");
        }
    }
}

#[test]
fn classical_g2_limits() {
    let z = c(0.0, 0.0);
    let thermal = TwoPointParams::new(1.2, 1.2, 1.0, z, z).unwrap();
    let opts = PndOptions {
        tail_tolerance: 1e-12,
        ..PndOptions::default()
    };
    let g = classical_g2(&joint_pnd_with(&thermal, 40, &opts).unwrap()).unwrap();
    assert!((g - 2.0).abs() < 1e-6, "{g}");
    let coherent = TwoPointParams::new(1e-12, 1e-12, 0.5, c(1.0, 0.0), c(0.6, 0.2)).unwrap();
    let g = classical_g2(&joint_pnd_with(&coherent, 20, &opts).unwrap()).unwrap();
    assert!((g - 1.0).abs() < 1e-6, "{g}");
}

#[test]
fn degenerate_elements_are_refused() {
    let z = c(0.0, 0.0);
    let p = TwoPointParams::new(1.0, 1.0, 1.0, z, z).unwrap();
    assert!(matches!(rho_element(&p, idx(1, 0, 1, 0)), Err(QgsError::Degenerate(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classical_g2_paths_agree(
        n1 in 0.05f64..2.0,
        n2 in 0.05f64..2.0,
        g in 0.0f64..1.0,
        m in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let p = TwoPointParams::new(n1, n2, g, c(m[0], m[1]), c(m[2], m[3])).unwrap();
        let pnd = joint_pnd_with(&p, 30, &PndOptions { tail_tolerance: 1e-12, ..PndOptions::default() }).unwrap();
        let from_pnd = classical_g2(&pnd).unwrap();
        let isserlis = classical_g2_isserlis(&p);
        prop_assert!((from_pnd - isserlis).abs() < 1e-6, "{from_pnd} vs {isserlis}");
    }

    #[test]
    fn closed_form_matches_quadrature_at_random_parameters(
        n1 in 0.1f64..2.0,
        n2 in 0.1f64..2.0,
        g in 0.0f64..0.95,
        m in prop::array::uniform4(-1.0f64..1.0),
        ix in prop::array::uniform4(0usize..4),
    ) {
        let p = TwoPointParams::new(n1, n2, g, c(m[0], m[1]), c(m[2], m[3])).unwrap();
        let i = idx(ix[0], ix[1], ix[2], ix[3]);
        let closed = rho_element(&p, i).unwrap();
        let oracle = rho_element_quadrature(&p, i).unwrap();
        let scale = closed.norm().max(1e-12);
        prop_assert!((closed - oracle).norm() <= 1e-6 * scale, "{i:?}: {closed} vs {oracle}");
    }
}
