//! The echo training step and SGD loop.
//!
//! One step: load the sample into the evaluation region, evolve forward,
//! kick the output with the cost-function Hamiltonian for a duration epsilon,
//! phase-conjugate everything, evolve backward, phase-conjugate the learning
//! region again, then run the decay step that converts the returned momentum
//! kick into a coordinate update and quenches the momentum. The backward pass
//! runs the identical propagator: time reversal is realized purely by
//! conjugation, there is no adjoint code path.
//!
//! After the echo the learning region carries pi = -eps dC/dtheta + O(eps^2),
//! so the decay step theta' = theta + kappa pi realizes gradient descent with
//! learning rate eta = eps * kappa (times the model's kick scale, see
//! [`HebModel::kick_scale`]).

use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cost::{cost_value, inject_error, CostFunction};
use crate::dynamics::{Direction, Propagator};
use crate::field::{CanonicalField, RegionKind};
use crate::{HebError, Result};

/// A trainable system: a reversible propagator plus the wiring that loads a
/// sample into the evaluation region and builds its cost function.
pub trait HebModel {
    type Sample;

    fn propagator(&self) -> &dyn Propagator;

    /// Write the sample into the evaluation (and ancilla) modes, leaving the
    /// learning region untouched.
    fn load_input(&self, field: &mut CanonicalField, sample: &Self::Sample) -> Result<()>;

    fn cost_function(&self, sample: &Self::Sample) -> Result<CostFunction>;

    /// Ratio between the momentum actually imparted to the learning region
    /// and eps dC/dtheta. It is 1 where the learning modes are stored as
    /// coordinate/momentum pairs of a real canonical pair (lattice theta
    /// fields, phase masks, the mechanical rail) and 1/2 where they are wave
    /// modes kicked through the complex Wirtinger convention (cavity arrays).
    fn kick_scale(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DecayMode {
    /// theta' = theta + (Omega/Gamma) pi, pi' = 0 — the closed-form limit of
    /// free-particle evolution with damping for T_D >> 1/Gamma.
    FreeParticleDamping { omega: f64, gamma: f64 },
    /// Phase shift, parametric gain, attenuation:
    /// theta' = sqrt(AG)(cos phi theta + sin phi pi),
    /// pi'    = sqrt(A/G)(cos phi pi - sin phi theta),
    /// constrained to cos(phi) sqrt(AG) = 1.
    PhaseGainAttenuation { phi: f64, gain: f64, attenuation: f64 },
}

impl DecayMode {
    /// Build the three-step transform from the phase angle and the residual
    /// ratio sqrt(A/G), satisfying the constraint exactly.
    pub fn phase_gain(phi: f64, residual: f64) -> Self {
        let c = phi.cos();
        DecayMode::PhaseGainAttenuation {
            phi,
            gain: 1.0 / (residual * c),
            attenuation: residual / c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecayMode::FreeParticleDamping { omega, gamma } => {
                if *gamma <= 0.0 || *omega < 0.0 {
                    return Err(HebError::Constraint("need gamma > 0, omega >= 0".into()));
                }
            }
            DecayMode::PhaseGainAttenuation { phi, gain, attenuation } => {
                if *gain <= 0.0 || *attenuation <= 0.0 {
                    return Err(HebError::Constraint("gain and attenuation must be positive".into()));
                }
                let prod = phi.cos() * (gain * attenuation).sqrt();
                if (prod - 1.0).abs() > 1e-12 {
                    return Err(HebError::Constraint(format!(
                        "cos(phi) sqrt(AG) = {prod}, must be 1"
                    )));
                }
                let residual = (attenuation / gain).sqrt();
                if residual > 1e-3 {
                    eprintln!(
                        "warning: decay residual sqrt(A/G) = {residual:.3e} above 1e-3; \
                         leftover learning-field momentum will not be negligible"
                    );
                }
            }
        }
        Ok(())
    }

    /// The free parameter converting momentum into coordinate shift:
    /// Omega/Gamma or tan(phi). The learning rate is eta = eps * ratio.
    pub fn ratio(&self) -> f64 {
        match self {
            DecayMode::FreeParticleDamping { omega, gamma } => omega / gamma,
            DecayMode::PhaseGainAttenuation { phi, .. } => phi.tan(),
        }
    }

    /// Residual momentum bound sqrt(A/G); exactly zero for the damping mode.
    pub fn residual(&self) -> f64 {
        match self {
            DecayMode::FreeParticleDamping { .. } => 0.0,
            DecayMode::PhaseGainAttenuation { gain, attenuation, .. } => {
                (attenuation / gain).sqrt()
            }
        }
    }

    /// Apply the decay transform to one learning value, with the ratio
    /// rescaled by the schedule factor `scale`.
    fn apply_one(&self, v: C64, scale: f64) -> Result<C64> {
        let (theta, pi) = (v.re, v.im);
        match self {
            DecayMode::FreeParticleDamping { .. } => {
                Ok(C64::new(theta + self.ratio() * scale * pi, 0.0))
            }
            DecayMode::PhaseGainAttenuation { .. } => {
                let phi_s = (self.ratio() * scale).atan();
                let r = self.residual();
                let (c, s) = (phi_s.cos(), phi_s.sin());
                let root_ag = 1.0 / c;
                let theta_new = root_ag * (c * theta + s * pi);
                let pi_new = r * (c * pi - s * theta);
                if pi_new.abs() > r * (pi.abs() + theta.abs()) + 1e-300 {
                    return Err(HebError::Constraint(
                        "decay residual exceeded sqrt(A/G) (|pi| + |theta|)".into(),
                    ));
                }
                Ok(C64::new(theta_new, pi_new))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant,
    /// multiply the rate by `factor` every `every` steps
    StepDecay { factor: f64, every: usize },
    /// eta(n) = eta0 / (1 + n / n0)
    InverseTime { n0: f64 },
}

impl Schedule {
    pub fn factor(&self, n: usize) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::StepDecay { factor, every } => factor.powi((n / (*every).max(1)) as i32),
            Schedule::InverseTime { n0 } => 1.0 / (1.0 + n as f64 / n0),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HebConfig {
    /// duration of the cost-function Hamiltonian kick
    pub epsilon: f64,
    pub decay: DecayMode,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    /// std of the additive complex Gaussian applied per mode at each
    /// conjugation event (0 = ideal time reversal)
    #[serde(default)]
    pub noise_std: f64,
    /// whether the second, learning-region-only conjugation is also noisy
    #[serde(default = "default_true")]
    pub noise_on_second_conjugation: bool,
    pub seed: u64,
    pub steps: usize,
}

fn default_schedule() -> Schedule {
    Schedule::Constant
}

fn default_true() -> bool {
    true
}

impl HebConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < 0.0 {
            return Err(HebError::Constraint("epsilon must be >= 0".into()));
        }
        self.decay.validate()
    }

    /// eta(n) before the model's kick scale.
    pub fn learning_rate(&self, n: usize) -> f64 {
        self.epsilon * self.decay.ratio() * self.schedule.factor(n)
    }
}

/// Per-step diagnostics. `wall_ms` is kept out of the records CSV so that
/// identical seeds produce byte-identical record files.
#[derive(Clone, Debug, Serialize)]
pub struct TrainRecord {
    pub step: usize,
    pub sample_id: usize,
    pub cost_before: f64,
    pub cost_after: f64,
    pub delta_theta_norm: f64,
    pub echo_residual: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub wall_ms: f64,
}

fn add_conjugation_noise(
    field: &mut CanonicalField,
    kind: Option<RegionKind>,
    std: f64,
    rng: &mut ChaCha12Rng,
) {
    if std <= 0.0 {
        return;
    }
    let comp = Normal::new(0.0, std / std::f64::consts::SQRT_2).expect("std checked");
    match kind {
        None => {
            for v in field.values_mut() {
                *v += C64::new(comp.sample(rng), comp.sample(rng));
            }
        }
        Some(k) => {
            let ranges: Vec<_> = field.regions_of(k).map(|r| r.range()).collect();
            for range in ranges {
                for v in &mut field.values_mut()[range] {
                    *v += C64::new(comp.sample(rng), comp.sample(rng));
                }
            }
        }
    }
}

/// Apply the decay step to every learning region; returns ||delta theta||.
pub fn decay_step(field: &mut CanonicalField, decay: &DecayMode, scale: f64) -> Result<f64> {
    let ranges: Vec<_> = field.regions_of(RegionKind::Learning).map(|r| r.range()).collect();
    let mut delta2 = 0.0;
    for range in ranges {
        for v in &mut field.values_mut()[range] {
            let new = decay.apply_one(*v, scale)?;
            let d = new.re - v.re;
            delta2 += d * d;
            *v = new;
        }
    }
    Ok(delta2.sqrt())
}

/// One full echo + decay step on `field` (the learning region persists across
/// steps; the evaluation region is overwritten by the next sample).
pub fn heb_step<M: HebModel>(
    model: &M,
    field: &mut CanonicalField,
    sample: &M::Sample,
    cfg: &HebConfig,
    step_index: usize,
    rng: &mut ChaCha12Rng,
) -> Result<TrainRecord> {
    let t0 = std::time::Instant::now();
    let cf = model.cost_function(sample)?;
    let prop = model.propagator();

    model.load_input(field, sample)?;
    let theta_before: Vec<C64> = learning_values(field);
    let psi_in = evaluation_values(field);
    let norm0 = field.norm2(None)?;
    let energy0 = prop.energy(field);

    prop.propagate(field, Direction::Forward)?;
    if !field.all_finite() {
        return Err(HebError::NonFinite(format!("forward pass at step {step_index}")));
    }
    let norm1 = field.norm2(None)?;
    let energy1 = prop.energy(field);
    let cost_before = cost_value(field, &cf)?;

    inject_error(field, &cf, cfg.epsilon)?;
    let cost_after = cost_value(field, &cf)?;

    field.conjugate();
    add_conjugation_noise(field, None, cfg.noise_std, rng);

    prop.propagate(field, Direction::Backward)?;
    if !field.all_finite() {
        return Err(HebError::NonFinite(format!("backward pass at step {step_index}")));
    }

    field.conjugate_kind(RegionKind::Learning);
    if cfg.noise_on_second_conjugation {
        add_conjugation_noise(field, Some(RegionKind::Learning), cfg.noise_std, rng);
    }

    let echo_residual = {
        let now = evaluation_values(field);
        let num: f64 = now
            .iter()
            .zip(&psi_in)
            .map(|(a, b)| (a - b.conj()).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = psi_in.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };

    let scale = cfg.schedule.factor(step_index);
    decay_step(field, &cfg.decay, scale)?;
    let theta_after = learning_values(field);
    let delta_theta_norm = theta_before
        .iter()
        .zip(&theta_after)
        .map(|(a, b)| (a.re - b.re) * (a.re - b.re))
        .sum::<f64>()
        .sqrt();

    let energy_drift = match (energy0, energy1) {
        (Some(a), Some(b)) if a.abs() > 0.0 => ((b - a) / a.abs()).abs(),
        _ => f64::NAN,
    };
    Ok(TrainRecord {
        step: step_index,
        sample_id: usize::MAX, // filled by the caller when drawing from a set
        cost_before,
        cost_after,
        delta_theta_norm,
        echo_residual,
        norm_drift: ((norm1 - norm0) / norm0.max(1e-300)).abs(),
        energy_drift,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
    })
}

fn learning_values(field: &CanonicalField) -> Vec<C64> {
    field
        .regions_of(RegionKind::Learning)
        .flat_map(|r| field.values()[r.range()].to_vec())
        .collect()
}

fn evaluation_values(field: &CanonicalField) -> Vec<C64> {
    field
        .regions_of(RegionKind::Evaluation)
        .flat_map(|r| field.values()[r.range()].to_vec())
        .collect()
}

/// Sequential single-sample SGD: draw a sample uniformly at random (seeded),
/// run one echo + decay step, repeat.
pub fn train<M: HebModel>(
    model: &M,
    field: &mut CanonicalField,
    dataset: &[M::Sample],
    cfg: &HebConfig,
) -> Result<Vec<TrainRecord>> {
    if dataset.is_empty() {
        return Err(HebError::Config("dataset must not be empty".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.steps);
    for n in 0..cfg.steps {
        let id = rng.random_range(0..dataset.len());
        let mut rec = heb_step(model, field, &dataset[id], cfg, n, &mut rng)?;
        rec.sample_id = id;
        records.push(rec);
    }
    Ok(records)
}

/// Per-parameter gradient estimate (theta_old - theta_new) / eta from a
/// single echo step run on a copy; the persistent state is untouched.
pub fn heb_gradient_estimate<M: HebModel>(
    model: &M,
    field: &CanonicalField,
    sample: &M::Sample,
    cfg: &HebConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>> {
    let mut work = field.clone();
    let theta_before = learning_values(&work);
    heb_step(model, &mut work, sample, cfg, 0, rng)?;
    let theta_after = learning_values(&work);
    let eta = cfg.learning_rate(0) * model.kick_scale();
    if eta == 0.0 {
        return Err(HebError::Config("learning rate is zero; cannot normalize".into()));
    }
    Ok(theta_before
        .iter()
        .zip(&theta_after)
        .map(|(a, b)| (a.re - b.re) / eta)
        .collect())
}
