//! Coupled-mode building blocks for layered photonic machines.
//!
//! A block acts on a selection of modes of a [`CanonicalField`]. Selections
//! are resolved once (region name plus an optional chain of centered windows
//! in shifted-frequency coordinates) so that the per-pass work touches flat
//! index lists only. A [`Sequence`] applies its blocks in order on the
//! forward pass and in reverse order on the backward pass; every block is the
//! exact flow of a time-reversal-invariant Hamiltonian, so the sequence obeys
//! the echo contract exactly.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::chi2;
use super::{Direction, Propagator};
use crate::field::CanonicalField;
use crate::{HebError, Result};

/// A mode selection: a region, optionally narrowed by a chain of centered
/// windows (each entry is the side of a square window in shifted-frequency
/// coordinates of the previous square grid).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelSpec {
    pub region: String,
    #[serde(default)]
    pub windows: Vec<usize>,
}

impl SelSpec {
    pub fn whole(region: &str) -> Self {
        Self { region: region.to_string(), windows: Vec::new() }
    }

    pub fn windowed(region: &str, windows: &[usize]) -> Self {
        Self { region: region.to_string(), windows: windows.to_vec() }
    }
}

/// Serializable block description; see [`Block::build`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockSpec {
    /// exp(-i chi theta_i dt) on each selected mode, with the conjugate
    /// momentum kick pi_i -= chi |psi_i|^2 dt on the learning pair
    PhaseMask { psi: SelSpec, theta: SelSpec, chi: f64, duration: f64 },
    /// unitary 2D DFT over the selection
    DftLayer { sel: SelSpec, inverse: bool },
    /// 50-50 beamsplitter between two equal-length selections
    Beamsplitter50 { a: SelSpec, b: SelSpec },
    /// 2x2 mixing exp(-i H t), H = J (a* b + b* a): entries (cos Jt, -i sin Jt)
    AncillaSU2 { a: SelSpec, b: SelSpec, coupling: f64, duration: f64 },
    /// saturable chi^(2) activation against a paired ancilla
    Chi2Activation { psi: SelSpec, anc: SelSpec, chi: f64, duration: f64, #[serde(default)] strict: bool },
    /// parametric interaction H = chi (phi xi + phi* xi*); at the default
    /// duration ln(1+sqrt2)/chi a fresh ancilla receives the conjugate copy
    ParametricTR { phi: SelSpec, xi: SelSpec, chi: f64, duration: Option<f64>, #[serde(default = "default_true")] strict: bool },
}

fn default_true() -> bool {
    true
}

fn resolve(spec: &SelSpec, field: &CanonicalField) -> Result<(Vec<usize>, usize)> {
    let region = field.region(&spec.region)?;
    let mut indices: Vec<usize> = region.range().collect();
    let mut side = match region.shape {
        Some((w, l)) if w == l => w,
        _ => (indices.len() as f64).sqrt() as usize,
    };
    if !spec.windows.is_empty() && side * side != indices.len() {
        return Err(HebError::Layout(format!(
            "windowed selection needs a square grid, region '{}' has {} modes",
            spec.region,
            indices.len()
        )));
    }
    for &m in &spec.windows {
        if m > side || m == 0 {
            return Err(HebError::Layout(format!(
                "window {m} does not fit in grid of side {side}"
            )));
        }
        let offs = |m: usize| -> std::ops::RangeInclusive<i64> {
            let m = m as i64;
            if m % 2 == 1 { -(m - 1) / 2..=(m - 1) / 2 } else { -m / 2..=m / 2 - 1 }
        };
        let n = side as i64;
        let mut next = Vec::with_capacity(m * m);
        for fz in offs(m) {
            let iz = fz.rem_euclid(n) as usize;
            for fx in offs(m) {
                let ix = fx.rem_euclid(n) as usize;
                next.push(indices[ix + iz * side]);
            }
        }
        indices = next;
        side = m;
    }
    Ok((indices, side))
}

pub enum Block {
    PhaseMask { psi: Vec<usize>, theta: Vec<usize>, chi: f64, dt: f64 },
    DftLayer { sel: Vec<usize>, side: usize, fwd: Arc<dyn Fft<f64>>, inv: Arc<dyn Fft<f64>>, inverse: bool },
    AncillaSU2 { a: Vec<usize>, b: Vec<usize>, angle: f64 },
    Chi2Activation { psi: Vec<usize>, anc: Vec<usize>, chi: f64, dt: f64, strict: bool },
    ParametricTR { phi: Vec<usize>, xi: Vec<usize>, chi: f64, dt: f64, strict: bool },
}

impl Block {
    pub fn build(spec: &BlockSpec, field: &CanonicalField) -> Result<Self> {
        let pair = |a: &SelSpec, b: &SelSpec| -> Result<(Vec<usize>, Vec<usize>)> {
            let (ia, _) = resolve(a, field)?;
            let (ib, _) = resolve(b, field)?;
            if ia.len() != ib.len() {
                return Err(HebError::ShapeMismatch { expected: ia.len(), got: ib.len() });
            }
            Ok((ia, ib))
        };
        Ok(match spec {
            BlockSpec::PhaseMask { psi, theta, chi, duration } => {
                let (p, t) = pair(psi, theta)?;
                Block::PhaseMask { psi: p, theta: t, chi: *chi, dt: *duration }
            }
            BlockSpec::DftLayer { sel, inverse } => {
                let (indices, side) = resolve(sel, field)?;
                if side * side != indices.len() {
                    return Err(HebError::Layout("dft layer needs a square selection".into()));
                }
                let mut planner = FftPlanner::new();
                Block::DftLayer {
                    sel: indices,
                    side,
                    fwd: planner.plan_fft_forward(side),
                    inv: planner.plan_fft_inverse(side),
                    inverse: *inverse,
                }
            }
            BlockSpec::Beamsplitter50 { a, b } => {
                let (ia, ib) = pair(a, b)?;
                Block::AncillaSU2 { a: ia, b: ib, angle: std::f64::consts::FRAC_PI_4 }
            }
            BlockSpec::AncillaSU2 { a, b, coupling, duration } => {
                let (ia, ib) = pair(a, b)?;
                Block::AncillaSU2 { a: ia, b: ib, angle: coupling * duration }
            }
            BlockSpec::Chi2Activation { psi, anc, chi, duration, strict } => {
                let (p, a) = pair(psi, anc)?;
                Block::Chi2Activation { psi: p, anc: a, chi: *chi, dt: *duration, strict: *strict }
            }
            BlockSpec::ParametricTR { phi, xi, chi, duration, strict } => {
                let (p, x) = pair(phi, xi)?;
                let dt = duration.unwrap_or_else(|| (1.0 + std::f64::consts::SQRT_2).ln() / chi);
                Block::ParametricTR { phi: p, xi: x, chi: *chi, dt, strict: *strict }
            }
        })
    }

    fn check_fresh(kind: &str, vals: &[C64], main: &[usize], anc: &[usize]) -> Result<()> {
        let scale: f64 = main.iter().map(|&i| vals[i].norm_sqr()).sum::<f64>().sqrt();
        let leak: f64 = anc.iter().map(|&i| vals[i].norm_sqr()).sum::<f64>().sqrt();
        if leak > 1e-9 * scale.max(1e-300) {
            return Err(HebError::AncillaNotZero(format!(
                "{kind}: |ancilla| = {leak:.3e} against signal {scale:.3e}"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, field: &mut CanonicalField, dir: Direction) -> Result<()> {
        let vals = field.values_mut();
        match self {
            Block::PhaseMask { psi, theta, chi, dt } => {
                for (&ip, &it) in psi.iter().zip(theta) {
                    let inten = vals[ip].norm_sqr();
                    vals[ip] *= C64::from_polar(1.0, -chi * vals[it].re * dt);
                    vals[it].im -= chi * inten * dt;
                }
            }
            Block::DftLayer { sel, side, fwd, inv, inverse } => {
                let m = *side;
                let mut buf: Vec<C64> = sel.iter().map(|&i| vals[i]).collect();
                let plan = if *inverse { inv } else { fwd };
                let mut scratch = vec![C64::ZERO; plan.get_inplace_scratch_len()];
                for row in buf.chunks_exact_mut(m) {
                    plan.process_with_scratch(row, &mut scratch);
                }
                let mut col = vec![C64::ZERO; m];
                for ix in 0..m {
                    for iz in 0..m {
                        col[iz] = buf[ix + iz * m];
                    }
                    plan.process_with_scratch(&mut col, &mut scratch);
                    for iz in 0..m {
                        buf[ix + iz * m] = col[iz];
                    }
                }
                let scale = 1.0 / m as f64;
                for (&i, v) in sel.iter().zip(&buf) {
                    vals[i] = v * scale;
                }
            }
            Block::AncillaSU2 { a, b, angle } => {
                let (c, s) = (angle.cos(), angle.sin());
                let mis = C64::new(0.0, -s);
                for (&ia, &ib) in a.iter().zip(b) {
                    let (va, vb) = (vals[ia], vals[ib]);
                    vals[ia] = c * va + mis * vb;
                    vals[ib] = mis * va + c * vb;
                }
            }
            Block::Chi2Activation { psi, anc, chi, dt, strict } => {
                if *strict && dir == Direction::Forward {
                    Self::check_fresh("chi2 activation", vals, psi, anc)?;
                }
                for (&ip, &ia) in psi.iter().zip(anc) {
                    let (p, a) = chi2::flow(vals[ip], vals[ia], *chi, *dt);
                    vals[ip] = p;
                    vals[ia] = a;
                }
            }
            Block::ParametricTR { phi, xi, chi, dt, strict } => {
                if *strict && dir == Direction::Forward {
                    Self::check_fresh("parametric time reversal", vals, phi, xi)?;
                }
                let parametric = |vals: &mut [C64]| {
                    let (ch, sh) = ((chi * dt).cosh(), (chi * dt).sinh());
                    let mish = C64::new(0.0, -sh);
                    for (&ip, &ix) in phi.iter().zip(xi) {
                        let (vp, vx) = (vals[ip], vals[ix]);
                        vals[ip] = ch * vp + mish * vx.conj();
                        vals[ix] = ch * vx + mish * vp.conj();
                    }
                };
                // fixed +90° ancilla rotation so that at the magic duration the
                // ancilla holds phi* itself rather than -i phi*
                let rotate = |vals: &mut [C64]| {
                    for &ix in xi {
                        vals[ix] *= C64::new(0.0, 1.0);
                    }
                };
                match dir {
                    Direction::Forward => {
                        parametric(vals);
                        rotate(vals);
                    }
                    Direction::Backward => {
                        rotate(vals);
                        parametric(vals);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Apply a single block in the forward direction.
pub fn apply_block(field: &mut CanonicalField, block: &Block) -> Result<()> {
    block.apply(field, Direction::Forward)
}

/// An ordered stack of blocks; the backward pass traverses the stack from the
/// output side.
pub struct Sequence {
    pub blocks: Vec<Block>,
}

impl Sequence {
    pub fn build(specs: &[BlockSpec], field: &CanonicalField) -> Result<Self> {
        let blocks = specs
            .iter()
            .map(|s| Block::build(s, field))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }
}

impl Propagator for Sequence {
    fn propagate(&self, field: &mut CanonicalField, dir: Direction) -> Result<()> {
        match dir {
            Direction::Forward => {
                for b in &self.blocks {
                    b.apply(field, dir)?;
                }
            }
            Direction::Backward => {
                for b in self.blocks.iter().rev() {
                    b.apply(field, dir)?;
                }
            }
        }
        if !field.all_finite() {
            return Err(HebError::NonFinite("block sequence".into()));
        }
        Ok(())
    }
}
