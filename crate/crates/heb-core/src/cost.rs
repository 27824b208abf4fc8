//! Sample costs and the physical error-injection kick.
//!
//! A cost is a real function of the output region of a field. Injecting the
//! error signal means letting a Hamiltonian proportional to the cost act for
//! a short duration epsilon, which to first order sends
//! `psi -> psi - i eps dC/dpsi*` on the output region and touches nothing
//! else. For the field MSE the flow is linear and is applied in closed form
//! (a phase rotation plus a drive toward the target); for the intensity MSE a
//! single Euler kick is used. The position MSE acts on coordinate/momentum
//! pairs, where the cost Hamiltonian flow is exactly a momentum kick.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::field::{CanonicalField, MaskRole, RegionMask};
use crate::{HebError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum CostKind {
    /// C = sum w |psi - target|^2
    MseField { target: Vec<C64> },
    /// C = sum w (|psi|^4 - 2 |psi|^2 I_target), the constant term dropped
    MseIntensity { target: Vec<f64> },
    /// C = sum w (Re psi - target)^2, for coordinate-valued outputs
    MsePosition { target: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostFunction {
    pub kind: CostKind,
    /// Cost weight w(x) over the output region; zero on ancillary modes by
    /// construction (they are time-reversed but compared against no target).
    pub mask: RegionMask,
}

impl CostFunction {
    pub fn mse_field(region: &str, weights: Vec<f64>, target: Vec<C64>) -> Result<Self> {
        let mask = RegionMask::new(region, MaskRole::CostWeight, weights)?;
        if mask.weights.len() != target.len() {
            return Err(HebError::ShapeMismatch { expected: mask.weights.len(), got: target.len() });
        }
        Ok(Self { kind: CostKind::MseField { target }, mask })
    }

    pub fn mse_intensity(region: &str, weights: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let mask = RegionMask::new(region, MaskRole::CostWeight, weights)?;
        if mask.weights.len() != target.len() {
            return Err(HebError::ShapeMismatch { expected: mask.weights.len(), got: target.len() });
        }
        Ok(Self { kind: CostKind::MseIntensity { target }, mask })
    }

    pub fn mse_position(region: &str, weights: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let mask = RegionMask::new(region, MaskRole::CostWeight, weights)?;
        if mask.weights.len() != target.len() {
            return Err(HebError::ShapeMismatch { expected: mask.weights.len(), got: target.len() });
        }
        Ok(Self { kind: CostKind::MsePosition { target }, mask })
    }

    /// A fixed scale for the cost, used to express kick strengths as
    /// eps * C_max: the cost of an all-zero output (field MSE), or the depth
    /// of the intensity well, or the squared target coordinates.
    pub fn cost_scale(&self) -> f64 {
        let w = &self.mask.weights;
        match &self.kind {
            CostKind::MseField { target } => {
                w.iter().zip(target).map(|(w, t)| w * t.norm_sqr()).sum()
            }
            CostKind::MseIntensity { target } => {
                w.iter().zip(target).map(|(w, t)| w * t * t).sum()
            }
            CostKind::MsePosition { target } => {
                w.iter().zip(target).map(|(w, t)| w * t * t).sum()
            }
        }
    }
}

pub fn cost_value(output: &CanonicalField, cf: &CostFunction) -> Result<f64> {
    cf.mask.validate_against(output)?;
    let vals = output.region_values(&cf.mask.region)?;
    let w = &cf.mask.weights;
    let c = match &cf.kind {
        CostKind::MseField { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| w * (v - t).norm_sqr())
            .sum(),
        CostKind::MseIntensity { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| {
                let i = v.norm_sqr();
                w * (i * i - 2.0 * i * t)
            })
            .sum(),
        CostKind::MsePosition { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| w * (v.re - t) * (v.re - t))
            .sum(),
    };
    if !f64::is_finite(c) {
        return Err(HebError::NonFinite("cost".into()));
    }
    Ok(c)
}

/// The Wirtinger gradient dC/dpsi* on the output region (for the position
/// MSE, the coordinate gradient dC/dq is returned in the real part).
pub fn cost_gradient(output: &CanonicalField, cf: &CostFunction) -> Result<Vec<C64>> {
    cf.mask.validate_against(output)?;
    let vals = output.region_values(&cf.mask.region)?;
    let w = &cf.mask.weights;
    Ok(match &cf.kind {
        CostKind::MseField { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| w * (v - t))
            .collect(),
        CostKind::MseIntensity { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| v * (w * (2.0 * v.norm_sqr() - 2.0 * t)))
            .collect(),
        CostKind::MsePosition { target } => vals
            .iter()
            .zip(target)
            .zip(w)
            .map(|((v, t), w)| C64::new(w * 2.0 * (v.re - t), 0.0))
            .collect(),
    })
}

/// Apply the error-signal kick psi -> psi - i eps dC/dpsi* on the output
/// region. Everything outside the output region is left bit-identical.
pub fn inject_error(field: &mut CanonicalField, cf: &CostFunction, eps: f64) -> Result<()> {
    if eps < 0.0 {
        return Err(HebError::Config("epsilon must be non-negative".into()));
    }
    cf.mask.validate_against(field)?;
    if eps == 0.0 {
        return Ok(());
    }
    let w = cf.mask.weights.clone();
    let vals = field.region_values_mut(&cf.mask.region)?;
    match &cf.kind {
        CostKind::MseField { target } => {
            // exact flow of the linear cost Hamiltonian:
            // psi' = e^{-i eps w} (psi - t) + t
            for ((v, t), w) in vals.iter_mut().zip(target).zip(&w) {
                let rot = C64::from_polar(1.0, -eps * w);
                *v = rot * (*v - t) + t;
            }
        }
        CostKind::MseIntensity { target } => {
            for ((v, t), w) in vals.iter_mut().zip(target).zip(&w) {
                let g = w * (2.0 * v.norm_sqr() - 2.0 * t);
                *v -= C64::new(0.0, eps * g) * *v;
            }
        }
        CostKind::MsePosition { target } => {
            // momentum kick p -> p - eps dC/dq; exact since C is q-only
            for ((v, t), w) in vals.iter_mut().zip(target).zip(&w) {
                v.im -= eps * 2.0 * w * (v.re - t);
            }
        }
    }
    if !field.all_finite() {
        return Err(HebError::NonFinite("inject_error".into()));
    }
    Ok(())
}
