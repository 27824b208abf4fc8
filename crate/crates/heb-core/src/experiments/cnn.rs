//! Photonic convolutional network on a square mode grid.
//!
//! Convolutional stages are DFT - phase mask - inverse DFT sandwiches whose
//! mask (and second DFT) act only on the innermost M x M frequency window;
//! the outer modes drop out of the interacting set and ride along as
//! pseudo-dissipation ancillas. Dense stages follow the singular-value
//! decomposition: phase-mask/DFT products for the unitaries and a
//! beamsplitter - phase - beamsplitter gadget against a fresh ancilla for the
//! bounded singular values. All trainable parameters are phase-mask learning
//! pairs; the saturable chi^(2) activation supplies the nonlinearity
//! (chi1 in the convolutional part, chi2 in the dense part). The cost is the
//! intensity MSE against a one-hot pattern over the class patches.

use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::dynamics::blocks::{BlockSpec, SelSpec, Sequence};
use crate::dynamics::{Direction, Propagator};
use crate::engine::{heb_step, HebConfig, HebModel, TrainRecord};
use crate::field::{CanonicalField, Region, RegionKind};
use crate::{HebError, Result};

pub const GRID_REGION: &str = "grid";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CnnConfig {
    /// convolutional stages (N, M): full grid side and active window side
    pub conv_stages: Vec<(usize, usize)>,
    /// dense stages (side_in, side_out)
    pub dense_stages: Vec<(usize, usize)>,
    /// DFT-phase factors per dense unitary
    pub u_factors: usize,
    /// activation strength in the convolutional part
    pub chi1: f64,
    /// activation strength in the dense part
    pub chi2: f64,
    /// phase-mask interaction strength chi_l
    pub chi_mask: f64,
    /// duration of each elementary step
    pub step_duration: f64,
    /// peak input intensity per mode
    pub i_max: f64,
    pub n_classes: usize,
    /// one-hot intensity level the correct patch is trained toward
    pub target_intensity: f64,
    /// initial mask amplitude in theta units
    pub theta_init_amp: f64,
    pub heb: HebConfig,
    #[serde(default = "default_subset")]
    pub train_subset: usize,
    #[serde(default = "default_val")]
    pub val_subset: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_subset() -> usize {
    2000
}

fn default_val() -> usize {
    500
}

fn default_eval_every() -> usize {
    250
}

impl CnnConfig {
    /// Reference architecture: conv (31,31), (31,21), (21,17); dense (17,9),
    /// (9,4); J = 10/T_s ancilla coupling inside the S-stage splitters is
    /// fixed at 50-50; eps = 1e-2, eta = 1e-2 via Omega = Gamma = 0.1/T.
    pub fn desk_scale(chi1: f64, chi2: f64) -> Self {
        let t = 1.0;
        let epsilon = 1e-2;
        let (omega, gamma) = (0.1 / t, 0.1 / t);
        let chi_mask = 1e1 * f64::sqrt(omega / (gamma * epsilon * t));
        Self {
            conv_stages: vec![(31, 31), (31, 21), (21, 17)],
            dense_stages: vec![(17, 9), (9, 4)],
            u_factors: 1,
            chi1,
            chi2,
            chi_mask,
            step_duration: t,
            i_max: 1.0,
            n_classes: 10,
            target_intensity: 1.0,
            theta_init_amp: std::f64::consts::PI / chi_mask,
            heb: HebConfig {
                epsilon,
                decay: crate::engine::DecayMode::FreeParticleDamping { omega, gamma },
                schedule: crate::engine::Schedule::Constant,
                noise_std: 0.0,
                noise_on_second_conjugation: true,
                seed: 1,
                steps: 3000,
            },
            train_subset: default_subset(),
            val_subset: default_val(),
            eval_every: default_eval_every(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CnnSample {
    /// field amplitudes over the input grid (sqrt of the pixel intensity)
    pub amps: Vec<f64>,
    pub label: u8,
}

/// Zero-pad an image into the grid and convert pixel values to amplitudes.
pub fn prepare_sample(
    pixels: &[u8],
    rows: usize,
    cols: usize,
    side: usize,
    i_max: f64,
    label: u8,
) -> Result<CnnSample> {
    if rows > side || cols > side {
        return Err(HebError::Config(format!(
            "image {rows}x{cols} does not fit the {side}x{side} grid"
        )));
    }
    let (off_r, off_c) = ((side - rows) / 2, (side - cols) / 2);
    let mut amps = vec![0.0; side * side];
    for r in 0..rows {
        for c in 0..cols {
            let inten = pixels[r * cols + c] as f64 / 255.0 * i_max;
            amps[(r + off_r) * side + (c + off_c)] = inten.sqrt();
        }
    }
    Ok(CnnSample { amps, label })
}

pub struct CnnModel {
    pub cfg: CnnConfig,
    field_template: CanonicalField,
    sequence: Sequence,
    /// absolute mode indices of the class patches in the final window
    pub class_indices: Vec<usize>,
    /// cost weights over the grid region (1 on class patches)
    weights: Vec<f64>,
    /// per-label one-hot intensity targets over the grid region
    targets: Vec<Vec<f64>>,
    learning_names: Vec<String>,
}

impl CnnModel {
    pub fn new(cfg: CnnConfig) -> Result<Self> {
        if cfg.conv_stages.is_empty() {
            return Err(HebError::Config("need at least one convolutional stage".into()));
        }
        let side0 = cfg.conv_stages[0].0;
        let grid_len = side0 * side0;
        let ts = cfg.step_duration;

        let mut regions = vec![Region::grid(GRID_REGION, RegionKind::Evaluation, 0, side0, side0)];
        let mut cursor = grid_len;
        let mut specs: Vec<BlockSpec> = Vec::new();
        let mut windows: Vec<usize> = Vec::new();
        let mut side = side0;
        let mut learning_names = Vec::new();

        let add_region = |regions: &mut Vec<Region>,
                              cursor: &mut usize,
                              name: String,
                              kind: RegionKind,
                              len: usize|
         -> String {
            regions.push(Region::new(&name, kind, *cursor, len));
            *cursor += len;
            name
        };

        let mask = |regions: &mut Vec<Region>,
                        cursor: &mut usize,
                        learning_names: &mut Vec<String>,
                        specs: &mut Vec<BlockSpec>,
                        name: String,
                        sel: SelSpec,
                        len: usize| {
            let th = add_region(regions, cursor, name, RegionKind::Learning, len);
            learning_names.push(th.clone());
            specs.push(BlockSpec::PhaseMask {
                psi: sel,
                theta: SelSpec::whole(&th),
                chi: cfg.chi_mask,
                duration: ts,
            });
        };

        for (k, &(n, m)) in cfg.conv_stages.iter().enumerate() {
            if n != side || m > n {
                return Err(HebError::Config(format!(
                    "conv stage {k} expects grid side {n}, found {side}"
                )));
            }
            specs.push(BlockSpec::DftLayer {
                sel: SelSpec::windowed(GRID_REGION, &windows),
                inverse: false,
            });
            if m < n {
                windows.push(m);
            }
            mask(
                &mut regions,
                &mut cursor,
                &mut learning_names,
                &mut specs,
                format!("theta_conv{k}"),
                SelSpec::windowed(GRID_REGION, &windows),
                m * m,
            );
            specs.push(BlockSpec::DftLayer {
                sel: SelSpec::windowed(GRID_REGION, &windows),
                inverse: true,
            });
            let anc = add_region(
                &mut regions,
                &mut cursor,
                format!("anc_conv{k}"),
                RegionKind::Ancilla,
                m * m,
            );
            specs.push(BlockSpec::Chi2Activation {
                psi: SelSpec::windowed(GRID_REGION, &windows),
                anc: SelSpec::whole(&anc),
                chi: cfg.chi1,
                duration: ts,
                strict: false,
            });
            side = m;
        }

        let n_dense = cfg.dense_stages.len();
        for (k, &(n_in, n_out)) in cfg.dense_stages.iter().enumerate() {
            if n_in != side || n_out > n_in {
                return Err(HebError::Config(format!(
                    "dense stage {k} expects grid side {n_in}, found {side}"
                )));
            }
            // U = D0 (F D_i)^u over the input window
            mask(
                &mut regions,
                &mut cursor,
                &mut learning_names,
                &mut specs,
                format!("theta_d{k}_u0"),
                SelSpec::windowed(GRID_REGION, &windows),
                n_in * n_in,
            );
            for f in 0..cfg.u_factors {
                specs.push(BlockSpec::DftLayer {
                    sel: SelSpec::windowed(GRID_REGION, &windows),
                    inverse: false,
                });
                mask(
                    &mut regions,
                    &mut cursor,
                    &mut learning_names,
                    &mut specs,
                    format!("theta_d{k}_u{}", f + 1),
                    SelSpec::windowed(GRID_REGION, &windows),
                    n_in * n_in,
                );
            }
            // S: splitter, trainable phase on the ancilla arm, splitter;
            // the transmission sin(chi theta T / 2) stays below one
            let s_anc = add_region(
                &mut regions,
                &mut cursor,
                format!("anc_d{k}_s"),
                RegionKind::Ancilla,
                n_in * n_in,
            );
            specs.push(BlockSpec::Beamsplitter50 {
                a: SelSpec::windowed(GRID_REGION, &windows),
                b: SelSpec::whole(&s_anc),
            });
            mask(
                &mut regions,
                &mut cursor,
                &mut learning_names,
                &mut specs,
                format!("theta_d{k}_s"),
                SelSpec::whole(&s_anc),
                n_in * n_in,
            );
            specs.push(BlockSpec::Beamsplitter50 {
                a: SelSpec::windowed(GRID_REGION, &windows),
                b: SelSpec::whole(&s_anc),
            });
            if n_out < n_in {
                windows.push(n_out);
            }
            // V over the output window
            mask(
                &mut regions,
                &mut cursor,
                &mut learning_names,
                &mut specs,
                format!("theta_d{k}_v0"),
                SelSpec::windowed(GRID_REGION, &windows),
                n_out * n_out,
            );
            for f in 0..cfg.u_factors {
                specs.push(BlockSpec::DftLayer {
                    sel: SelSpec::windowed(GRID_REGION, &windows),
                    inverse: false,
                });
                mask(
                    &mut regions,
                    &mut cursor,
                    &mut learning_names,
                    &mut specs,
                    format!("theta_d{k}_v{}", f + 1),
                    SelSpec::windowed(GRID_REGION, &windows),
                    n_out * n_out,
                );
            }
            if k + 1 < n_dense {
                let anc = add_region(
                    &mut regions,
                    &mut cursor,
                    format!("anc_d{k}_act"),
                    RegionKind::Ancilla,
                    n_out * n_out,
                );
                specs.push(BlockSpec::Chi2Activation {
                    psi: SelSpec::windowed(GRID_REGION, &windows),
                    anc: SelSpec::whole(&anc),
                    chi: cfg.chi2,
                    duration: ts,
                    strict: false,
                });
            }
            side = n_out;
        }

        if cfg.n_classes > side * side {
            return Err(HebError::Config(format!(
                "{} classes do not fit the final {side}x{side} window",
                cfg.n_classes
            )));
        }

        let field_template = CanonicalField::new(regions)?;
        let sequence = Sequence::build(&specs, &field_template)?;
        let out_sel = SelSpec::windowed(GRID_REGION, &windows);
        let class_indices = {
            let block = BlockSpec::DftLayer { sel: out_sel, inverse: false };
            // reuse the resolver through a throwaway block build
            match crate::dynamics::blocks::Block::build(&block, &field_template)? {
                crate::dynamics::blocks::Block::DftLayer { sel, .. } => {
                    sel[..cfg.n_classes].to_vec()
                }
                _ => unreachable!(),
            }
        };
        let mut weights = vec![0.0; grid_len];
        for &i in &class_indices {
            weights[i] = 1.0;
        }
        let targets: Vec<Vec<f64>> = (0..cfg.n_classes)
            .map(|c| {
                let mut t = vec![0.0; grid_len];
                t[class_indices[c]] = cfg.target_intensity;
                t
            })
            .collect();

        Ok(Self {
            cfg,
            field_template,
            sequence,
            class_indices,
            weights,
            targets,
            learning_names,
        })
    }

    pub fn make_field(&self) -> CanonicalField {
        self.field_template.clone()
    }

    pub fn learning_mode_count(&self) -> usize {
        crate::oracle::learning_mode_count(&self.field_template)
    }

    pub fn init_theta(&self, field: &mut CanonicalField, seed: u64) -> Result<()> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xc0ff_ee00_1234_5678);
        for name in &self.learning_names {
            for v in field.region_values_mut(name)? {
                *v = C64::new(self.cfg.theta_init_amp * (rng.random::<f64>() * 2.0 - 1.0), 0.0);
            }
        }
        Ok(())
    }

    /// Intensities at the class patches after a forward pass on a copy.
    pub fn class_intensities(&self, field: &CanonicalField, s: &CnnSample) -> Result<Vec<f64>> {
        let mut f = field.clone();
        self.load_input(&mut f, s)?;
        self.sequence.propagate(&mut f, Direction::Forward)?;
        let vals = f.values();
        Ok(self.class_indices.iter().map(|&i| vals[i].norm_sqr()).collect())
    }

    pub fn classify(&self, field: &CanonicalField, s: &CnnSample) -> Result<u8> {
        let intens = self.class_intensities(field, s)?;
        Ok(intens
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i as u8)
            .unwrap_or(0))
    }

    pub fn accuracy(&self, field: &CanonicalField, set: &[CnnSample]) -> Result<f64> {
        let mut correct = 0usize;
        for s in set {
            if self.classify(field, s)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / set.len().max(1) as f64)
    }
}

impl HebModel for CnnModel {
    type Sample = CnnSample;

    fn propagator(&self) -> &dyn Propagator {
        &self.sequence
    }

    fn load_input(&self, field: &mut CanonicalField, s: &CnnSample) -> Result<()> {
        // fresh evaluation and ancilla modes; learning masks persist
        let kinds = [RegionKind::Evaluation, RegionKind::Ancilla];
        for kind in kinds {
            let ranges: Vec<_> = field.regions_of(kind).map(|r| r.range()).collect();
            for range in ranges {
                for v in &mut field.values_mut()[range] {
                    *v = C64::ZERO;
                }
            }
        }
        let grid = field.region_values_mut(GRID_REGION)?;
        if s.amps.len() != grid.len() {
            return Err(HebError::ShapeMismatch { expected: grid.len(), got: s.amps.len() });
        }
        for (v, a) in grid.iter_mut().zip(&s.amps) {
            *v = C64::new(*a, 0.0);
        }
        Ok(())
    }

    fn cost_function(&self, s: &CnnSample) -> Result<CostFunction> {
        CostFunction::mse_intensity(
            GRID_REGION,
            self.weights.clone(),
            self.targets[s.label as usize].clone(),
        )
    }
}

#[derive(Debug, Serialize)]
pub struct CnnReport {
    pub chi1: f64,
    pub chi2: f64,
    pub records: Vec<TrainRecord>,
    pub train_error_trace: Vec<(usize, f64)>,
    pub val_accuracy_trace: Vec<(usize, f64)>,
    pub final_val_accuracy: f64,
    pub initial_cost: f64,
    pub final_cost: f64,
}

pub fn run_cnn(
    cfg: &CnnConfig,
    train: &[CnnSample],
    val: &[CnnSample],
) -> Result<(CnnModel, CanonicalField, CnnReport)> {
    cfg.heb.validate()?;
    let model = CnnModel::new(cfg.clone())?;
    let mut field = model.make_field();
    model.init_theta(&mut field, cfg.heb.seed)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.heb.seed);
    let mut records = Vec::with_capacity(cfg.heb.steps);
    let mut val_accuracy_trace = Vec::new();
    let mut train_error_trace = Vec::new();
    for n in 0..cfg.heb.steps {
        let id = rng.random_range(0..train.len());
        let mut rec = heb_step(&model, &mut field, &train[id], &cfg.heb, n, &mut rng)?;
        rec.sample_id = id;
        records.push(rec);
        if !val.is_empty() && (n % cfg.eval_every == 0 || n + 1 == cfg.heb.steps) {
            let acc = model.accuracy(&field, val)?;
            val_accuracy_trace.push((n, acc));
            let recent = &records[records.len().saturating_sub(cfg.eval_every)..];
            let err = recent.iter().map(|r| r.cost_before).sum::<f64>() / recent.len() as f64;
            train_error_trace.push((n, err));
        }
    }
    let final_val_accuracy = if val.is_empty() {
        f64::NAN
    } else {
        model.accuracy(&field, val)?
    };
    let tail = records.len().saturating_sub(32);
    let final_cost =
        records[tail..].iter().map(|r| r.cost_before).sum::<f64>() / (records.len() - tail) as f64;
    let report = CnnReport {
        chi1: cfg.chi1,
        chi2: cfg.chi2,
        initial_cost: records.first().map(|r| r.cost_before).unwrap_or(f64::NAN),
        final_cost,
        train_error_trace,
        val_accuracy_trace,
        final_val_accuracy,
        records,
    };
    Ok((model, field, report))
}

/// Deterministic synthetic digit-like samples (blobs at class-dependent
/// positions) for pipeline tests that must run without the real dataset.
pub fn synthetic_samples(count: usize, side: usize, i_max: f64, seed: u64) -> Vec<CnnSample> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let img = side.min(28);
    let blob = img as f64 / 10.0;
    (0..count)
        .map(|i| {
            let label = (i % 10) as u8;
            let fx = 0.2 + 0.6 * (label as f64 % 4.0) / 3.0;
            let fy = 0.2 + 0.6 * (label as f64 / 4.0).floor() / 3.0;
            let cx = fx * img as f64 + rng.random::<f64>() * 0.6;
            let cy = fy * img as f64 + rng.random::<f64>() * 0.6;
            let mut pixels = vec![0u8; img * img];
            for r in 0..img {
                for c in 0..img {
                    let d2 = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2))
                        / (2.0 * blob * blob);
                    pixels[r * img + c] = (255.0 * (-d2).exp()) as u8;
                }
            }
            prepare_sample(&pixels, img, img, side, i_max, label).expect("fits")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(chi1: f64, chi2: f64) -> CnnConfig {
        let mut cfg = CnnConfig::desk_scale(chi1, chi2);
        cfg.conv_stages = vec![(9, 9), (9, 7)];
        cfg.dense_stages = vec![(7, 5), (5, 4)];
        cfg.u_factors = 1;
        cfg.heb.steps = 40;
        cfg.eval_every = 20;
        cfg
    }

    #[test]
    fn stages_are_norm_preserving_and_ancillas_start_clean() {
        let cfg = tiny_cfg(1.0, 2.0);
        let model = CnnModel::new(cfg).unwrap();
        let mut field = model.make_field();
        model.init_theta(&mut field, 5).unwrap();
        let samples = synthetic_samples(3, 9, 1.0, 9);
        // the wave-mode norm (evaluation + ancilla) is conserved by every
        // stage; the learning regions absorb the conjugate momentum kicks
        let wave_norm = |f: &CanonicalField| -> f64 {
            f.regions_of(RegionKind::Evaluation)
                .chain(f.regions_of(RegionKind::Ancilla))
                .map(|r| f.values()[r.range()].iter().map(|v| v.norm_sqr()).sum::<f64>())
                .sum()
        };
        for s in &samples {
            model.load_input(&mut field, s).unwrap();
            for r in field.regions_of(RegionKind::Ancilla) {
                let name = r.name.clone();
                assert_eq!(field.norm2(Some(&name)).unwrap(), 0.0);
            }
            let n0 = wave_norm(&field);
            model.sequence.propagate(&mut field, Direction::Forward).unwrap();
            let n1 = wave_norm(&field);
            assert!((n1 - n0).abs() < 1e-12 * n0.max(1.0), "stage norm drift");
        }
    }

    #[test]
    fn echo_closes_at_eps_zero() {
        let cfg = tiny_cfg(1.2, 2.5);
        let model = CnnModel::new(cfg).unwrap();
        let mut field = model.make_field();
        model.init_theta(&mut field, 2).unwrap();
        let s = &synthetic_samples(1, 9, 1.0, 4)[0];
        model.load_input(&mut field, s).unwrap();
        let fid = crate::oracle::echo_fidelity(&model.sequence, &field).unwrap();
        assert!(fid < 1e-12, "cnn echo fidelity {fid}");
    }

    #[test]
    fn overfits_a_few_samples() {
        let mut cfg = tiny_cfg(0.8, 2.0);
        cfg.n_classes = 10;
        cfg.heb.steps = 500;
        cfg.target_intensity = 0.5;
        let train = synthetic_samples(10, 9, 1.0, 31);
        let (_, _, report) = run_cnn(&cfg, &train, &[]).unwrap();
        assert!(
            report.final_cost < 0.1 * report.initial_cost.abs().max(1e-9)
                || report.final_cost < report.initial_cost - 0.9 * report.initial_cost.abs(),
            "cost {} -> {}",
            report.initial_cost,
            report.final_cost
        );
    }
}
