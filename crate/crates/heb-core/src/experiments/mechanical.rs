//! Mechanical pinball demo: the rail particle's resting position is trained
//! so that the launched ball arrives at a target point, optionally through an
//! unknown static background force field.

use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::dynamics::mechanical::MechanicalParams;
use crate::dynamics::{Direction, MechanicalToy, Propagator, BALL_REGION, RAIL_REGION};
use crate::engine::{heb_step, HebConfig, HebModel, TrainRecord};
use crate::field::CanonicalField;
use crate::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanicalConfig {
    pub toy: MechanicalParams,
    /// fixed launch position of the ball
    pub launch_pos: [f64; 2],
    /// initial rail coordinate
    pub rail_init: f64,
    /// target arrival point of the ball at t = 0
    pub target: [f64; 2],
    pub cost_weight: f64,
    /// launch velocities forming the training set
    #[serde(default = "default_launches")]
    pub launches: Vec<[f64; 2]>,
    pub heb: HebConfig,
}

fn default_launches() -> Vec<[f64; 2]> {
    vec![[1.1, -0.8]]
}

impl MechanicalConfig {
    pub fn default_demo() -> Self {
        // the rail is heavy and the decay ratio large, so the parasitic
        // dC/dpi term (the rail's drift during a pass) stays well below the
        // dC/dtheta signal: bias ~ (T / rail_mass) / (Omega/Gamma)
        Self {
            toy: MechanicalParams {
                ball_mass: 1.0,
                rail_mass: 50.0,
                coupling: 1.2,
                softening: 0.25,
                rail_y: 0.0,
                background: Vec::new(),
                dt: 1e-3,
                duration: 2.0,
            },
            launch_pos: [-2.0, 1.4],
            rail_init: 0.2,
            target: [1.6, -0.4],
            cost_weight: 1.0,
            launches: default_launches(),
            heb: HebConfig {
                epsilon: 1e-4,
                decay: crate::engine::DecayMode::FreeParticleDamping { omega: 2e-2, gamma: 1e-3 },
                schedule: crate::engine::Schedule::Constant,
                noise_std: 0.0,
                noise_on_second_conjugation: true,
                seed: 1,
                steps: 200,
            },
        }
    }
}

/// The sample is the launch velocity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaunchSample {
    pub v: [f64; 2],
}

pub struct MechanicalModel {
    pub cfg: MechanicalConfig,
    pub toy: MechanicalToy,
}

impl MechanicalModel {
    pub fn new(cfg: MechanicalConfig) -> Result<Self> {
        let toy = MechanicalToy::new(cfg.toy.clone())?;
        Ok(Self { cfg, toy })
    }

    pub fn make_field(&self) -> Result<CanonicalField> {
        let mut f = self.toy.make_field();
        f.region_values_mut(RAIL_REGION)?[0] = C64::new(self.cfg.rail_init, 0.0);
        Ok(f)
    }

    /// Ball position at t = 0 for the current rail position.
    pub fn final_position(&self, field: &CanonicalField, s: &LaunchSample) -> Result<[f64; 2]> {
        let mut f = field.clone();
        self.load_input(&mut f, s)?;
        self.toy.propagate(&mut f, Direction::Forward)?;
        let b = f.region_values(BALL_REGION)?;
        Ok([b[0].re, b[1].re])
    }
}

impl HebModel for MechanicalModel {
    type Sample = LaunchSample;

    fn propagator(&self) -> &dyn Propagator {
        &self.toy
    }

    fn load_input(&self, field: &mut CanonicalField, s: &LaunchSample) -> Result<()> {
        let m = self.cfg.toy.ball_mass;
        let ball = field.region_values_mut(BALL_REGION)?;
        ball[0] = C64::new(self.cfg.launch_pos[0], m * s.v[0]);
        ball[1] = C64::new(self.cfg.launch_pos[1], m * s.v[1]);
        // the rail is the learning pair; its momentum is quenched by decay
        Ok(())
    }

    fn cost_function(&self, _s: &LaunchSample) -> Result<CostFunction> {
        CostFunction::mse_position(
            BALL_REGION,
            vec![self.cfg.cost_weight; 2],
            self.cfg.target.to_vec(),
        )
    }
}

#[derive(Debug, Serialize)]
pub struct MechanicalReport {
    pub records: Vec<TrainRecord>,
    pub theta_trace: Vec<f64>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_position: [f64; 2],
    pub final_theta: f64,
}

pub fn run_mechanical_demo(
    cfg: &MechanicalConfig,
    samples: &[LaunchSample],
) -> Result<(MechanicalModel, CanonicalField, MechanicalReport)> {
    cfg.heb.validate()?;
    let model = MechanicalModel::new(cfg.clone())?;
    let mut field = model.make_field()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.heb.seed);
    let mut records = Vec::with_capacity(cfg.heb.steps);
    let mut theta_trace = Vec::with_capacity(cfg.heb.steps + 1);
    theta_trace.push(field.region_values(RAIL_REGION)?[0].re);
    for n in 0..cfg.heb.steps {
        let id = rng.random_range(0..samples.len());
        let mut rec = heb_step(&model, &mut field, &samples[id], &cfg.heb, n, &mut rng)?;
        rec.sample_id = id;
        records.push(rec);
        theta_trace.push(field.region_values(RAIL_REGION)?[0].re);
    }
    let initial_cost = records.first().map(|r| r.cost_before).unwrap_or(f64::NAN);
    let final_cost = records.last().map(|r| r.cost_before).unwrap_or(f64::NAN);
    let final_position = model.final_position(&field, &samples[0])?;
    let report = MechanicalReport {
        theta_trace,
        initial_cost,
        final_cost,
        final_position,
        final_theta: field.region_values(RAIL_REGION)?[0].re,
        records,
    };
    Ok((model, field, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_at_untrained_output_gives_zero_update() {
        let mut cfg = MechanicalConfig::default_demo();
        let sample = LaunchSample { v: [1.1, -0.8] };
        // aim the cost exactly at where the untrained machine already lands
        let model = MechanicalModel::new(cfg.clone()).unwrap();
        let field = model.make_field().unwrap();
        let landing = model.final_position(&field, &sample).unwrap();
        cfg.target = landing;
        cfg.heb.steps = 3;
        let (_, field, report) = run_mechanical_demo(&cfg, &[sample]).unwrap();
        let theta = field.region_values(RAIL_REGION).unwrap()[0].re;
        assert!((theta - cfg.rail_init).abs() < 1e-7, "theta moved to {theta}");
        assert!(report.final_cost < 1e-10);
    }

    #[test]
    fn training_reduces_cost_with_unknown_background() {
        let mut cfg = MechanicalConfig::default_demo();
        cfg.toy.background = vec![
            crate::dynamics::mechanical::GaussianBump { center: [0.3, 0.6], amp: 0.5, width: 0.8 },
            crate::dynamics::mechanical::GaussianBump { center: [-0.9, 0.1], amp: -0.4, width: 0.6 },
        ];
        cfg.heb.epsilon = 1e-3;
        cfg.heb.decay = crate::engine::DecayMode::FreeParticleDamping { omega: 0.5, gamma: 1e-3 };
        cfg.heb.steps = 300;
        let (_, _, report) = run_mechanical_demo(&cfg, &[LaunchSample { v: [1.1, -0.8] }]).unwrap();
        assert!(
            report.final_cost < 0.7 * report.initial_cost,
            "{} -> {}",
            report.initial_cost,
            report.final_cost
        );
    }
}
