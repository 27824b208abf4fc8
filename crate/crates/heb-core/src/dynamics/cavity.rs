//! Kerr cavity array: an N x N square tight-binding lattice of learning
//! cavities with four evaluation cavities attached to the corners,
//!
//! ```text
//!   H = sum M_mn a_m* a_n + g sum |a_n|^4,
//! ```
//!
//! where M collects the nearest-neighbour hopping (-J), the corner couplings
//! (-K) and per-cavity disorder shifts on the diagonal. The linear step is
//! applied exactly through a dense eigendecomposition of M (the lattice is
//! tiny and disorder breaks translation invariance, so there is nothing to
//! gain from an FFT); the Kerr step is an exact local phase rotation
//! `exp(-i 2 g |a|^2 dt)`. Strang-composed, the pass is exactly unitary and
//! exactly reversible under conjugation.

use num_complex::Complex64 as C64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nlse::SplitOrder;
use super::{Direction, Propagator};
use crate::field::{CanonicalField, Region, RegionKind};
use crate::{HebError, Result};

pub const PSI_REGION: &str = "psi";
pub const THETA_REGION: &str = "theta";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CavityParams {
    /// lattice side N (N*N learning cavities + 4 corner evaluation cavities)
    pub n: usize,
    pub j_hop: f64,
    pub k_corner: f64,
    pub g: f64,
    /// std of the per-cavity random frequency shifts on the lattice
    pub disorder_std: f64,
    pub disorder_seed: u64,
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub order: SplitOrder,
}

pub struct CavityArray {
    pub params: CavityParams,
    pub deltas: Vec<f64>,
    matrix: Vec<f64>,
    eigvals: Vec<f64>,
    /// column eigenvectors, column-major: eigvecs[col * dim + row]
    eigvecs: Vec<f64>,
    dim: usize,
}

/// cyclic Jacobi eigendecomposition of a dense symmetric matrix
fn jacobi_eigen(a: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; dim * dim];
    for i in 0..dim {
        v[i * dim + i] = 1.0;
    }
    let idx = |r: usize, c: usize| r * dim + c;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..dim {
            for q in p + 1..dim {
                off += m[idx(p, q)] * m[idx(p, q)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + m.iter().map(|x| x * x).sum::<f64>().sqrt()) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let (app, aqq) = (m[idx(p, p)], m[idx(q, q)]);
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let (akp, akq) = (m[idx(k, p)], m[idx(k, q)]);
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let (apk, aqk) = (m[idx(p, k)], m[idx(q, k)]);
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
                for k in 0..dim {
                    let (vkp, vkq) = (v[idx(k, p)], v[idx(k, q)]);
                    v[idx(k, p)] = c * vkp - s * vkq;
                    v[idx(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..dim).map(|i| m[idx(i, i)]).collect();
    // v currently row-major with columns as eigenvectors; repack column-major
    let mut cols = vec![0.0; dim * dim];
    for col in 0..dim {
        for row in 0..dim {
            cols[col * dim + row] = v[idx(row, col)];
        }
    }
    (vals, cols)
}

impl CavityArray {
    pub fn new(params: CavityParams) -> Result<Self> {
        if params.n < 2 {
            return Err(HebError::Config("lattice side must be at least 2".into()));
        }
        if params.dt <= 0.0 {
            return Err(HebError::Config("dt must be positive".into()));
        }
        let n = params.n;
        let dim = n * n + 4;
        let mut rng = ChaCha12Rng::seed_from_u64(params.disorder_seed);
        let normal = Normal::new(0.0, params.disorder_std.max(0.0)).map_err(|e| {
            HebError::Config(format!("bad disorder std: {e}"))
        })?;
        let deltas: Vec<f64> = (0..n * n)
            .map(|_| if params.disorder_std > 0.0 { normal.sample(&mut rng) } else { 0.0 })
            .collect();

        // mode order: 4 corner psi cavities, then the lattice row-major
        let site = |r: usize, c: usize| 4 + r * n + c;
        let corners = [site(0, 0), site(0, n - 1), site(n - 1, 0), site(n - 1, n - 1)];
        let mut m = vec![0.0; dim * dim];
        let mut couple = |a: usize, b: usize, w: f64| {
            m[a * dim + b] = w;
            m[b * dim + a] = w;
        };
        for r in 0..n {
            for c in 0..n {
                if c + 1 < n {
                    couple(site(r, c), site(r, c + 1), -params.j_hop);
                }
                if r + 1 < n {
                    couple(site(r, c), site(r + 1, c), -params.j_hop);
                }
            }
        }
        for (psi, corner) in corners.iter().enumerate() {
            couple(psi, *corner, -params.k_corner);
        }
        for (i, d) in deltas.iter().enumerate() {
            m[(4 + i) * dim + (4 + i)] = *d;
        }
        let (eigvals, eigvecs) = jacobi_eigen(&m, dim);
        Ok(Self { params, deltas, matrix: m, eigvals, eigvecs, dim })
    }

    pub fn mode_count(&self) -> usize {
        self.dim
    }

    pub fn make_field(&self) -> CanonicalField {
        CanonicalField::new(vec![
            Region::new(PSI_REGION, RegionKind::Evaluation, 0, 4),
            Region::grid(THETA_REGION, RegionKind::Learning, 4, self.params.n, self.params.n),
        ])
        .expect("static layout")
    }

    fn linear_step(&self, a: &mut [C64], tau: f64, tmp: &mut [C64]) {
        let d = self.dim;
        for (col, t) in tmp.iter_mut().enumerate() {
            let v = &self.eigvecs[col * d..(col + 1) * d];
            let mut acc = C64::ZERO;
            for (vi, ai) in v.iter().zip(a.iter()) {
                acc += vi * ai;
            }
            *t = acc * C64::from_polar(1.0, -self.eigvals[col] * tau);
        }
        for ai in a.iter_mut() {
            *ai = C64::ZERO;
        }
        for (col, t) in tmp.iter().enumerate() {
            let v = &self.eigvecs[col * d..(col + 1) * d];
            for (vi, ai) in v.iter().zip(a.iter_mut()) {
                *ai += vi * t;
            }
        }
    }

    fn kerr_step(&self, a: &mut [C64], tau: f64) {
        let g = self.params.g;
        for v in a.iter_mut() {
            *v *= C64::from_polar(1.0, -2.0 * g * v.norm_sqr() * tau);
        }
    }

    pub fn evolve(&self, field: &mut CanonicalField, duration: f64) -> Result<()> {
        if field.len() != self.dim {
            return Err(HebError::ShapeMismatch { expected: self.dim, got: field.len() });
        }
        let dt = self.params.dt;
        let steps_f = duration / dt;
        let steps = steps_f.round();
        if steps < 1.0 || (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) {
            return Err(HebError::DurationStep { duration, dt });
        }
        let steps = steps as usize;
        let mut tmp = vec![C64::ZERO; self.dim];
        let a = field.values_mut();
        let weights = self.params.order.weights();
        let mut pending = 0.0;
        for _ in 0..steps {
            for &w in weights {
                self.linear_step(a, (pending + w) * dt / 2.0, &mut tmp);
                self.kerr_step(a, w * dt);
                pending = w;
            }
        }
        self.linear_step(a, pending * dt / 2.0, &mut tmp);
        if !field.all_finite() {
            return Err(HebError::NonFinite("cavity evolution".into()));
        }
        Ok(())
    }

    pub fn evolve_recording(
        &self,
        field: &mut CanonicalField,
        duration: f64,
        every: usize,
    ) -> Result<Vec<CanonicalField>> {
        let dt = self.params.dt;
        let steps = (duration / dt).round() as usize;
        let mut snaps = vec![field.clone()];
        let chunk = every.max(1);
        let mut done = 0;
        while done < steps {
            let take = chunk.min(steps - done);
            self.evolve(field, take as f64 * dt)?;
            done += take;
            snaps.push(field.clone());
        }
        Ok(snaps)
    }

    pub fn hamiltonian(&self, field: &CanonicalField) -> f64 {
        let a = field.values();
        let d = self.dim;
        let mut h = 0.0;
        for r in 0..d {
            for c in 0..d {
                let w = self.matrix[r * d + c];
                if w != 0.0 {
                    h += w * (a[r].conj() * a[c]).re;
                }
            }
        }
        h + self.params.g * a.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum::<f64>()
    }
}

impl Propagator for CavityArray {
    fn propagate(&self, field: &mut CanonicalField, _dir: Direction) -> Result<()> {
        self.evolve(field, self.params.duration)
    }

    fn energy(&self, field: &CanonicalField) -> Option<f64> {
        Some(self.hamiltonian(field))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn array(g: f64, disorder: f64, n: usize) -> CavityArray {
        CavityArray::new(CavityParams {
            n,
            j_hop: 1.0,
            k_corner: 0.0,
            g,
            disorder_std: disorder,
            disorder_seed: 4,
            dt: 1.0 / 512.0,
            duration: 1.0,
            order: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn eigendecomposition_reconstructs_matrix() {
        let arr = array(0.3, 0.5, 3);
        let d = arr.dim;
        for r in 0..d {
            for c in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += arr.eigvecs[k * d + r] * arr.eigvals[k] * arr.eigvecs[k * d + c];
                }
                assert!((acc - arr.matrix[r * d + c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_2x2_lattice_matches_cycle_eigenbasis() {
        // with K = 0 the 2x2 lattice is a 4-cycle; single-site dynamics under
        // H = -J A has the closed form a_j(t) = (1/4) sum_k w^{kj} e^{+2iJ cos(pi k/2) t}
        let arr = array(0.0, 0.0, 2);
        let mut f = arr.make_field();
        f.region_values_mut(THETA_REGION).unwrap()[0] = C64::new(1.0, 0.0);
        let t = 0.75;
        arr.evolve(&mut f, t).unwrap();
        // lattice row-major (0,0),(0,1),(1,0),(1,1); cycle order 0,1,3,2
        let cycle = [0usize, 1, 3, 2];
        let j = arr.params.j_hop;
        for (pos, &site) in cycle.iter().enumerate() {
            let mut expect = C64::ZERO;
            for k in 0..4 {
                let lam = -2.0 * j * (std::f64::consts::PI * k as f64 / 2.0).cos();
                let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k * pos) as f64 / 4.0);
                expect += w * C64::from_polar(0.25, -lam * t);
            }
            let got = f.region_values(THETA_REGION).unwrap()[site];
            assert!((got - expect).norm() < 1e-10, "site {site}: {got} vs {expect}");
        }
    }

    #[test]
    fn norm_preserved_and_echo_closes() {
        let arr = CavityArray::new(CavityParams {
            n: 4,
            j_hop: 4.8,
            k_corner: 48.0,
            g: 1.0,
            disorder_std: 0.3,
            disorder_seed: 11,
            dt: 1.0 / 4096.0,
            duration: 1.0,
            order: Default::default(),
        })
        .unwrap();
        let mut f = arr.make_field();
        f.region_values_mut(PSI_REGION).unwrap()[0] = C64::new(2.19, 0.0);
        f.region_values_mut(PSI_REGION).unwrap()[1] = C64::new(-2.19, 0.0);
        for (i, v) in f.region_values_mut(THETA_REGION).unwrap().iter_mut().enumerate() {
            *v = C64::new(0.1 * (i as f64 * 0.77).sin(), 0.0);
        }
        let f0 = f.clone();
        let n0 = f.norm2(None).unwrap();
        let e0 = arr.hamiltonian(&f);
        // single-step norm conservation at 1e-12
        arr.evolve(&mut f, arr.params.dt).unwrap();
        let n_one = f.norm2(None).unwrap();
        assert!((n_one - n0).abs() < 1e-12 * n0, "per-step drift {}", (n_one - n0) / n0);
        arr.evolve(&mut f, 1.0 - arr.params.dt).unwrap();
        let n1 = f.norm2(None).unwrap();
        let e1 = arr.hamiltonian(&f);
        let steps = (1.0 / arr.params.dt).round();
        assert!(
            (n1 - n0).abs() < 1e-12 * n0 * steps,
            "norm drift {} over {steps} steps",
            (n1 - n0) / n0
        );
        assert!(((e1 - e0) / e0.abs()).abs() < 1e-8, "energy drift {}", (e1 - e0) / e0);
        f.conjugate();
        arr.evolve(&mut f, 1.0).unwrap();
        f.conjugate();
        let rel = f.distance(&f0) / n0.sqrt();
        assert!(rel < 1e-9, "echo {rel}");
    }
}
