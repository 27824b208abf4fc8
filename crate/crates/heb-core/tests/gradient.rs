//! Gradient-equivalence checks: the echo update (theta_old - theta_new)/eta
//! against central finite differences of the cost, on copies of the same
//! discrete dynamics. These are the working-size versions of the acceptance
//! gradient criteria.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use heb_core::engine::{heb_gradient_estimate, HebModel};
use heb_core::experiments::cavity_xor::{CavitySample, CavityXorConfig, CavityXorModel};
use heb_core::experiments::mechanical::{LaunchSample, MechanicalConfig, MechanicalModel};
use heb_core::experiments::xor::{XorConfig, XorModel, XOR_SAMPLES};
use heb_core::oracle::fd_gradient;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn nlse_echo_gradient_matches_finite_differences() {
    let mut cfg = XorConfig::reduced(8, 12);
    cfg.lattice.dt = 1.0 / 500.0;
    let model = XorModel::new(cfg.clone()).unwrap();
    let mut field = model.make_field();
    model.init_theta(&mut field, 11).unwrap();
    let sample = XOR_SAMPLES[1];

    // probe the middle of the evolution domain
    let probe = (12 / 2) * 8 + 4;
    let fd = fd_gradient(&model, &field, &sample, &[probe], 1e-5).unwrap()[0];
    assert!(fd.abs() > 1e-9, "probed gradient too small: {fd}");

    let cf = model.cost_function(&sample).unwrap();
    let c_max = cf.cost_scale();
    for (eps_cmax, tol) in [(1e-3, 1e-2), (1e-5, 1e-3)] {
        let mut c = cfg.clone();
        c.heb.epsilon = eps_cmax / c_max;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let est = heb_gradient_estimate(&model, &field, &sample, &c.heb, &mut rng).unwrap()[probe];
        let err = rel_err(est, fd);
        assert!(err < tol, "eps*Cmax {eps_cmax}: est {est} vs fd {fd} (rel {err})");
    }
}

#[test]
fn mechanical_echo_gradient_matches_finite_differences() {
    let cfg = MechanicalConfig::default_demo();
    let model = MechanicalModel::new(cfg.clone()).unwrap();
    let field = model.make_field().unwrap();
    let sample = LaunchSample { v: [1.1, -0.8] };

    let fd = fd_gradient(&model, &field, &sample, &[0], 1e-6).unwrap()[0];
    assert!(fd.abs() > 1e-9, "rail gradient too small: {fd}");

    let mut c = cfg.clone();
    c.heb.epsilon = 1e-5;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let est = heb_gradient_estimate(&model, &field, &sample, &c.heb, &mut rng).unwrap()[0];
    let err = rel_err(est, fd);
    assert!(err < 1e-2, "est {est} vs fd {fd} (rel {err})");
}

#[test]
fn cavity_echo_gradient_matches_finite_differences() {
    let mut cfg = CavityXorConfig::reference(0.1, 3);
    cfg.cavity.dt = 1.0 / 2000.0;
    // lattice amplitudes swap quadratures at rate J during the pass, so the
    // dC/dpi contamination is only suppressed by the decay ratio; make it big
    cfg.heb.decay =
        heb_core::engine::DecayMode::FreeParticleDamping { omega: 0.5, gamma: 1e-3 };
    let model = CavityXorModel::new(cfg.clone()).unwrap();
    let mut field = model.make_field();
    model.init_theta(&mut field, 17).unwrap();
    let sample = CavitySample::clean(0, 1);

    let probe = 5;
    let fd = fd_gradient(&model, &field, &sample, &[probe], 1e-6).unwrap()[0];
    assert!(fd.abs() > 1e-9, "probed gradient too small: {fd}");

    let mut c = cfg.clone();
    c.heb.epsilon = 1e-5;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let est = heb_gradient_estimate(&model, &field, &sample, &c.heb, &mut rng).unwrap()[probe];
    let err = rel_err(est, fd);
    assert!(err < 1e-2, "est {est} vs fd {fd} (rel {err})");
}

#[test]
fn linear_lattice_gradient_is_exact_to_integrator_precision() {
    // with g = 0 the psi dynamics is linear in psi and the echo estimate at
    // small eps agrees with finite differences to much better than a percent
    let mut cfg = XorConfig::reduced(8, 12);
    cfg.lattice.g = 0.0;
    cfg.lattice.dt = 1.0 / 500.0;
    let model = XorModel::new(cfg.clone()).unwrap();
    let mut field = model.make_field();
    model.init_theta(&mut field, 23).unwrap();
    let sample = XOR_SAMPLES[2];
    let probe = (12 / 2) * 8 + 3;
    let fd = fd_gradient(&model, &field, &sample, &[probe], 1e-6).unwrap()[0];
    assert!(fd.abs() > 1e-9);
    let mut c = cfg.clone();
    c.heb.epsilon = 1e-7;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let est = heb_gradient_estimate(&model, &field, &sample, &c.heb, &mut rng).unwrap()[probe];
    assert!(rel_err(est, fd) < 1e-4, "est {est} vs fd {fd}");
}
