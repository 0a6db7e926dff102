use proptest::prelude::*;
use scaledecay::scattering::{c2_at, find_minima, fit_resonance, integrate_state, FitOptions, RescaledPotential};
use scaledecay::transfer::{exterior_c2, Interface};
use scaledecay::{BarrierModel, DeltaModel, PhysicalConstants, ScaleLaw};

fn nat() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn barrier_ifs(m: &BarrierModel) -> [Interface; 2] {
    [
        Interface { x: m.abar(), delta_strength: 0.0, v_right: m.height() },
        Interface { x: m.bbar(), delta_strength: 0.0, v_right: 0.0 },
    ]
}

proptest! {
    #[test]
    fn delta_closed_form_matches_transfer_matrix(
        strength in 0.0f64..300.0, abar in 0.3f64..3.0, kfrac in 0.005f64..1.0,
        hbar in 0.5f64..2.0, mass in 0.5f64..2.0,
    ) {
        let c = PhysicalConstants::new(hbar, mass).unwrap();
        let m = DeltaModel::new(c, strength, abar).unwrap();
        let k = 15.0 * kfrac / abar;
        let ifs = [Interface { x: abar, delta_strength: strength, v_right: 0.0 }];
        prop_assert!(rel(m.c2(k).unwrap(), exterior_c2(&c, k, &ifs).unwrap()) < 1e-10);
    }

    #[test]
    fn barrier_closed_form_matches_transfer_matrix(
        s in 5.0f64..80.0, abar in 0.5f64..2.0, width in 0.2f64..1.5, kfrac in 0.01f64..0.99,
    ) {
        let m = BarrierModel::from_dimensionless(nat(), s, abar, abar * (1.0 + width)).unwrap();
        let k = kfrac * m.k_cut();
        prop_assert!(rel(m.c2(k).unwrap(), exterior_c2(&nat(), k, &barrier_ifs(&m)).unwrap()) < 1e-9);
    }

    #[test]
    fn numerical_c2_matches_closed_forms(
        strength in 1.0f64..150.0, abar in 0.5f64..2.0, kfrac in 0.05f64..0.95,
    ) {
        let dm = DeltaModel::new(nat(), strength, abar).unwrap();
        let k = 12.0 * kfrac / abar;
        let num = c2_at(&RescaledPotential::from(&dm), &nat(), k, 1e-4).unwrap();
        prop_assert!(rel(num, dm.c2(k).unwrap()) < 1e-7);

        let bm = BarrierModel::from_dimensionless(nat(), 40.0, abar, 2.0 * abar).unwrap();
        let kb = kfrac * bm.k_cut();
        let num = c2_at(&RescaledPotential::from(&bm), &nat(), kb, 1e-4).unwrap();
        prop_assert!(rel(num, bm.c2(kb).unwrap()) < 1e-7);
    }

    #[test]
    fn barrier_rate_is_the_printed_prefactor(s in 20.0f64..120.0, abar in 0.5f64..2.0, l0 in 0.5f64..3.0) {
        let m = BarrierModel::from_dimensionless(nat(), s, abar, 2.0 * abar).unwrap();
        let law = ScaleLaw::new(l0, 0.0).unwrap();
        for n in 1..=m.roots().len() {
            let res = m.resonance(n).unwrap().value;
            prop_assert!(rel(res.rate_per_tau(&nat()), m.gamma_prefactor(n).unwrap()) < 1e-10);
            prop_assert!(rel(res.rate_per_tau(&nat()) / (l0 * l0), m.static_rate_full(&law, n).unwrap()) < 1e-10);
        }
    }
}

#[test]
fn delta_large_strength_levels_scale_as_n_cubed() {
    let m = DeltaModel::new(nat(), 500.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 0.0).unwrap();
    let g1 = m.static_rate(&law, 1).unwrap().value;
    let g2 = m.static_rate(&law, 2).unwrap().value;
    assert!((g2 / g1 - 8.0).abs() < 1e-12);
}

#[test]
fn weak_delta_carries_a_regime_warning() {
    let m = DeltaModel::new(nat(), 3.0, 1.0).unwrap();
    assert!(m.resonance(1).unwrap().warning.is_some());
    let strong = DeltaModel::new(nat(), 300.0, 1.0).unwrap();
    assert!(strong.resonance(1).unwrap().warning.is_none());
}

#[test]
fn barrier_index_past_the_roots_is_rejected() {
    let m = BarrierModel::from_dimensionless(nat(), 40.0, 1.0, 2.0).unwrap();
    assert_eq!(m.roots().len(), 2);
    assert!(m.resonance(3).is_err());
}

#[test]
fn numerov_c2_converges_at_fourth_order() {
    let m = DeltaModel::new(nat(), 40.0, 1.0).unwrap();
    let pot = RescaledPotential::from(&m);
    let k = 2.7;
    let exact = m.c2(k).unwrap();
    let err: Vec<f64> = [8e-3, 4e-3, 2e-3]
        .iter()
        .map(|&h| (c2_at(&pot, &nat(), k, h).unwrap() - exact).abs())
        .collect();
    let order = (err[0] / err[1]).log2().min((err[1] / err[2]).log2());
    assert!(order > 3.5, "errors {err:?}");
}

#[test]
fn interior_solution_is_the_wall_sine() {
    let m = DeltaModel::new(nat(), 60.0, 1.3).unwrap();
    let s = integrate_state(&RescaledPotential::from(&m), &nat(), 2.2, 1e-4).unwrap();
    for (&x, &v) in s.x.iter().zip(&s.interior).filter(|(&x, _)| x < 1.3) {
        assert!((v - (2.2 * x).sin()).abs() < 1e-9, "x = {x}");
    }
    assert!(rel(s.c2(), m.c2(2.2).unwrap()) < 1e-8);
}

#[test]
fn fit_is_insensitive_to_the_window() {
    for pot in [
        RescaledPotential::from(&DeltaModel::new(nat(), 100.0, 1.0).unwrap()),
        RescaledPotential::from(&BarrierModel::from_dimensionless(nat(), 40.0, 1.0, 2.0).unwrap()),
    ] {
        let mins = find_minima(&pot, &nat(), (2.0, 4.0), 400, 1e-4).unwrap();
        let opts = FitOptions::default();
        let wide = fit_resonance(&pot, &nat(), &mins[0], None, &opts).unwrap();
        let narrow = fit_resonance(
            &pot,
            &nat(),
            &mins[0],
            None,
            &FitOptions { window_widths: 0.5, ..opts },
        )
        .unwrap();
        let (a, b) = (&wide.resonance, &narrow.resonance);
        assert!(rel(a.f, b.f) < 1e-3, "F {} vs {}", a.f, b.f);
        assert!(rel(a.g, b.g) < 1e-3, "G {} vs {}", a.g, b.g);
        assert!(rel(wide.k_argmin, narrow.k_argmin) < 1e-8);
    }
}
