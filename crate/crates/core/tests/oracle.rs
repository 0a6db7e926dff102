use std::f64::consts::PI;

use scaledecay::cli::checks::{convergence_study, ConvergenceSetup, Refine};
use scaledecay::oracle::{
    evolve, frame_consistency_check, initial_state, Boundary, EvolutionConfig, Grading, InitialPhase,
};
use scaledecay::scattering::RescaledPotential;
use scaledecay::{Error, PhysicalConstants, ScaleLaw};

fn nat() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn small_cfg(tf: f64) -> EvolutionConfig {
    let mut cfg = EvolutionConfig::new(60.0, 3001, 0.01, tf);
    cfg.grading = Grading::Graded { fine_end: 0.5, coarse_from: 20.0 };
    cfg.output_samples = 11;
    cfg
}

#[test]
fn static_frames_agree_exactly() {
    let pot = RescaledPotential::delta(30.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 0.0).unwrap();
    let cfg = small_cfg(3.0);
    let x = cfg.grid().unwrap();
    let psi0 = initial_state(&pot, &law, &nat(), PI, &x, InitialPhase::Lifted).unwrap();
    let rep = frame_consistency_check(&pot, &law, &nat(), &psi0, &cfg).unwrap();
    assert!(rep.max_p_discrepancy < 1e-12);
    assert!(rep.max_amplitude_discrepancy < 1e-12);
}

#[test]
fn survival_starts_at_one_and_decays() {
    let pot = RescaledPotential::delta(30.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 0.1).unwrap();
    let cfg = small_cfg(5.0);
    let x = cfg.grid().unwrap();
    let psi0 = initial_state(&pot, &law, &nat(), PI, &x, InitialPhase::Lifted).unwrap();
    let res = evolve(&pot, &law, &nat(), &psi0, &cfg).unwrap();
    assert_eq!(res.curve.p[0], 1.0);
    assert!(res.norm_drift < 1e-10);
    assert!(res.curve.p.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    assert!(res.final_p() < 0.99);
}

#[test]
fn domain_must_contain_the_expanded_well() {
    let pot = RescaledPotential::delta(30.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 1.0).unwrap();
    let cfg = small_cfg(30.0);
    let x = cfg.grid().unwrap();
    let psi0 = initial_state(&pot, &law, &nat(), PI, &x, InitialPhase::Lifted).unwrap();
    assert!(matches!(evolve(&pot, &law, &nat(), &psi0, &cfg), Err(Error::DomainError(_))));
}

#[test]
fn escaping_flux_on_a_small_domain_is_reported() {
    let pot = RescaledPotential::delta(2.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 0.0).unwrap();
    let mut cfg = EvolutionConfig::new(6.0, 1201, 0.01, 8.0);
    cfg.output_samples = 9;
    let x = cfg.grid().unwrap();
    let psi0 = initial_state(&pot, &law, &nat(), PI, &x, InitialPhase::Lifted).unwrap();
    assert!(matches!(
        evolve(&pot, &law, &nat(), &psi0, &cfg),
        Err(Error::DomainTooSmall { .. })
    ));
    cfg.boundary = Boundary::AbsorbingLayer { width: 0.3, strength: 5.0 };
    cfg.leak_threshold = 1.0;
    let res = evolve(&pot, &law, &nat(), &psi0, &cfg).unwrap();
    assert!(res.final_p() < 0.9);
}

#[test]
fn second_order_in_time_and_space() {
    let pot = RescaledPotential::delta(30.0, 1.0).unwrap();
    let law = ScaleLaw::new(1.0, 0.1).unwrap();
    let setup = ConvergenceSetup {
        domain_end: 60.0,
        base_points: 2501,
        base_step: 0.005,
        total_time: 2.0,
        fine_end: 0.5,
        coarse_from: 20.0,
        kbar: PI,
    };
    for refine in [Refine::Time, Refine::Grid] {
        let r = convergence_study(&pot, &law, &nat(), &setup, refine).unwrap();
        assert!(r.order > 1.7, "{refine:?}: {r:?}");
        assert!(r.max_norm_drift < 1e-10);
    }
}
