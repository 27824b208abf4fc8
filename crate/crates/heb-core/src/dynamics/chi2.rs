//! Two-mode chi^(2) (second-harmonic) flow used as the saturable activation:
//!
//! ```text
//!   psi_dot = -i c anc conj(psi)      anc_dot = -i c psi^2       c = chi / sqrt(2)
//! ```
//!
//! The ancilla is stored rescaled so that |psi|^2 + |anc|^2 is the conserved
//! charge of the flow. Starting from a fresh ancilla the solution is the
//! separatrix
//!
//! ```text
//!   |psi(t)| = |psi(0)| sech(chi t |psi(0)| / sqrt(2)),
//! ```
//!
//! and conjugating both modes lands on the same family run backwards, so both
//! the forward pass and the unperturbed echo evaluate in closed form. States
//! pushed off the separatrix (by the error kick or by conjugation noise) are
//! integrated with an implicit-midpoint rule, which is symmetric: it
//! conserves the charge and closes the conjugate-evolve-conjugate-evolve
//! round trip to solver tolerance regardless of step count, so only
//! trajectory accuracy depends on the substep density.

use num_complex::Complex64 as C64;

/// relative threshold deciding when a state counts as exactly on-family
const FAMILY_TOL: f64 = 1e-12;

fn separatrix(n_sqrt: f64, xi: f64, phase: C64) -> (C64, C64) {
    let sech = 1.0 / xi.cosh();
    let psi = phase * (n_sqrt * sech);
    let anc = C64::new(0.0, -1.0) * phase * phase * (n_sqrt * xi.tanh());
    (psi, anc)
}

fn rhs(c: f64, psi: C64, anc: C64) -> (C64, C64) {
    let mi = C64::new(0.0, -c);
    (mi * anc * psi.conj(), mi * psi * psi)
}

/// One implicit-midpoint substep, solved by fixed-point iteration.
fn midpoint_step(c: f64, h: f64, psi: C64, anc: C64, tol: f64) -> (C64, C64) {
    let (mut zp, mut za) = (psi, anc);
    for _ in 0..64 {
        let mp = (psi + zp) * 0.5;
        let ma = (anc + za) * 0.5;
        let (dp, da) = rhs(c, mp, ma);
        let (np, na) = (psi + h * dp, anc + h * da);
        let delta = (np - zp).norm() + (na - za).norm();
        zp = np;
        za = na;
        if delta <= tol {
            break;
        }
    }
    (zp, za)
}

pub fn flow_midpoint(psi: C64, anc: C64, chi: f64, t: f64, substeps: usize) -> (C64, C64) {
    let c = chi / std::f64::consts::SQRT_2;
    let n = (psi.norm_sqr() + anc.norm_sqr()).sqrt();
    let tol = 1e-15 * n.max(1e-300);
    let h = t / substeps as f64;
    let (mut p, mut a) = (psi, anc);
    for _ in 0..substeps {
        (p, a) = midpoint_step(c, h, p, a, tol);
    }
    (p, a)
}

fn default_substeps(rate: f64, t: f64) -> usize {
    // keep c sqrt(N) h below ~1/64 of the characteristic time
    ((rate * t.abs() * 64.0).ceil() as usize).clamp(32, 1 << 20)
}

/// Evolve one (psi, ancilla) pair for duration `t`.
pub fn flow(psi: C64, anc: C64, chi: f64, t: f64) -> (C64, C64) {
    let c = chi / std::f64::consts::SQRT_2;
    let n2 = psi.norm_sqr() + anc.norm_sqr();
    if n2 == 0.0 || c == 0.0 || t == 0.0 {
        return (psi, anc);
    }
    let n_sqrt = n2.sqrt();
    let pn = psi.norm();
    if pn <= FAMILY_TOL * n_sqrt {
        // fully converted states are fixed points
        return (psi, anc);
    }
    let phase = psi / pn;
    if anc.norm() <= FAMILY_TOL * n_sqrt {
        // fresh ancilla: start of the separatrix
        let xi = c * n_sqrt * t;
        return separatrix(n_sqrt, xi, phase);
    }
    // u is real exactly on the separatrix family
    let u = C64::new(0.0, 1.0) * anc * (phase * phase).conj();
    if u.im.abs() <= FAMILY_TOL * n_sqrt {
        let xi0 = (u.re / pn).asinh();
        let xi = xi0 + c * n_sqrt * t;
        return separatrix(n_sqrt, xi, phase);
    }
    flow_midpoint(psi, anc, chi, t, default_substeps(c.abs() * n_sqrt, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_ancilla_follows_sech() {
        // chi t |psi| / sqrt2 = 1  =>  |psi| shrinks by sech(1)
        let psi0 = C64::new(0.3, 0.4); // |psi0| = 0.5
        let chi = 2.0;
        let t = std::f64::consts::SQRT_2 / (chi * 0.5);
        let (psi, anc) = flow(psi0, C64::ZERO, chi, t);
        let sech1 = 1.0 / 1.0f64.cosh();
        assert!((psi.norm() - 0.5 * sech1).abs() < 1e-14);
        assert!((psi / psi.norm() - psi0 / psi0.norm()).norm() < 1e-14);
        // charge conservation fixes the ancilla magnitude
        assert!((psi.norm_sqr() + anc.norm_sqr() - 0.25).abs() < 1e-14);
        assert!((anc.norm() - 0.5 * 1.0f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn echo_closes_on_family() {
        let psi0 = C64::new(0.7, -0.2);
        let (p1, a1) = flow(psi0, C64::ZERO, 1.3, 1.0);
        // conjugate, evolve, conjugate = inverse
        let (p2, a2) = flow(p1.conj(), a1.conj(), 1.3, 1.0);
        assert!((p2.conj() - psi0).norm() < 1e-13);
        assert!(a2.norm() < 1e-13);
    }

    #[test]
    fn echo_closes_off_family() {
        // a perturbed state takes the midpoint path; reversibility must hold
        // to solver tolerance there as well
        let psi = C64::new(0.6, -0.1);
        let anc = C64::new(0.21, 0.33);
        let (p1, a1) = flow(psi, anc, 1.7, 0.8);
        let (p2, a2) = flow(p1.conj(), a1.conj(), 1.7, 0.8);
        assert!((p2.conj() - psi).norm() < 1e-12, "{:?}", p2.conj() - psi);
        assert!((a2.conj() - anc).norm() < 1e-12);
    }

    #[test]
    fn charge_and_hamiltonian_conserved_off_family() {
        // the charge is quadratic and conserved by midpoint to solver
        // tolerance; the cubic Hamiltonian only to trajectory order
        let psi = C64::new(0.6, -0.1);
        let anc = C64::new(0.2, 0.3);
        let n0 = psi.norm_sqr() + anc.norm_sqr();
        let k0 = (anc.conj() * psi * psi).re;
        let (p, a) = flow(psi, anc, 1.7, 1.0);
        let n1 = p.norm_sqr() + a.norm_sqr();
        let k1 = (a.conj() * p * p).re;
        assert!((n1 - n0).abs() < 1e-13);
        assert!((k1 - k0).abs() < 1e-4 * k0.abs(), "{k0} vs {k1}");
        let (p, a) = flow_midpoint(psi, anc, 1.7, 1.0, 4096);
        let k2 = (a.conj() * p * p).re;
        assert!((k2 - k0).abs() < 1e-8 * k0.abs(), "{k0} vs {k2}");
    }

    #[test]
    fn midpoint_agrees_with_analytic_on_family() {
        let psi0 = C64::new(0.5, 0.5);
        let (pa, aa) = flow(psi0, C64::ZERO, 1.1, 1.0);
        let (pm, am) = flow_midpoint(psi0, C64::ZERO, 1.1, 1.0, 4096);
        assert!((pa - pm).norm() < 1e-7, "{:?}", pa - pm);
        assert!((aa - am).norm() < 1e-7);
    }

    #[test]
    fn perturbation_stays_first_order() {
        // the off-family path must track the analytic family to O(delta):
        // moving the input off the family by delta moves the output by O(delta)
        let psi0 = C64::new(0.8, 0.1);
        let (p_ref, a_ref) = flow(psi0, C64::ZERO, 1.0, 1.0);
        let delta = 1e-6;
        let (p, a) = flow(psi0, C64::new(0.0, delta), 1.0, 1.0);
        let d = (p - p_ref).norm() + (a - a_ref).norm();
        assert!(d < 20.0 * delta, "perturbation response {d}");
        assert!(d > 0.01 * delta);
    }
}
