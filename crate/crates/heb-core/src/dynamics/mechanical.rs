//! Mechanical pinball toy: a charged ball moving in a plane, deflected by a
//! charged particle that slides on a one-dimensional rail, with an optional
//! static background force field acting on the ball. Integrated by velocity
//! Verlet; time reversal is a momentum sign flip, i.e. the same phase
//! conjugation as everywhere else since states are stored as q + i p.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Direction, Propagator};
use crate::field::{CanonicalField, Region, RegionKind};
use crate::{HebError, Result};

pub const BALL_REGION: &str = "ball";
pub const RAIL_REGION: &str = "rail";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub amp: f64,
    pub width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanicalParams {
    pub ball_mass: f64,
    pub rail_mass: f64,
    /// product of the two charges in the softened Coulomb interaction
    pub coupling: f64,
    /// softening length a in 1/sqrt(r^2 + a^2)
    pub softening: f64,
    /// the rail runs along x at this height
    pub rail_y: f64,
    /// static background potential bumps acting on the ball
    #[serde(default)]
    pub background: Vec<GaussianBump>,
    pub dt: f64,
    pub duration: f64,
}

pub struct MechanicalToy {
    pub params: MechanicalParams,
}

#[derive(Clone, Copy, Debug)]
struct State {
    q: [f64; 3], // ball x, ball y, rail theta
    p: [f64; 3],
}

impl MechanicalToy {
    pub fn new(params: MechanicalParams) -> Result<Self> {
        if params.dt <= 0.0 || params.ball_mass <= 0.0 || params.rail_mass <= 0.0 {
            return Err(HebError::Config("dt and masses must be positive".into()));
        }
        if params.softening <= 0.0 {
            return Err(HebError::Config("softening must be positive".into()));
        }
        Ok(Self { params })
    }

    pub fn make_field(&self) -> CanonicalField {
        CanonicalField::new(vec![
            Region::new(BALL_REGION, RegionKind::Evaluation, 0, 2),
            Region::new(RAIL_REGION, RegionKind::Learning, 2, 1),
        ])
        .expect("static layout")
    }

    fn unpack(field: &CanonicalField) -> State {
        let v = field.values();
        State {
            q: [v[0].re, v[1].re, v[2].re],
            p: [v[0].im, v[1].im, v[2].im],
        }
    }

    fn pack(state: &State, field: &mut CanonicalField) {
        let v = field.values_mut();
        for i in 0..3 {
            v[i] = C64::new(state.q[i], state.p[i]);
        }
    }

    fn forces(&self, q: &[f64; 3]) -> [f64; 3] {
        let p = &self.params;
        let d = [q[0] - q[2], q[1] - p.rail_y];
        let s = d[0] * d[0] + d[1] * d[1] + p.softening * p.softening;
        let inv32 = p.coupling / (s * s.sqrt());
        let mut f = [d[0] * inv32, d[1] * inv32, -d[0] * inv32];
        for b in &p.background {
            let r = [q[0] - b.center[0], q[1] - b.center[1]];
            let e = (-0.5 * (r[0] * r[0] + r[1] * r[1]) / (b.width * b.width)).exp();
            f[0] += b.amp * e * r[0] / (b.width * b.width);
            f[1] += b.amp * e * r[1] / (b.width * b.width);
        }
        f
    }

    fn check_step(&self, state: &State) -> Result<()> {
        // documented heuristic: dt <= r_min / (10 v_max), with the softening
        // length standing in for the closest approach
        let p = &self.params;
        let v_max = (state.p[0].hypot(state.p[1]) / p.ball_mass)
            .max(state.p[2].abs() / p.rail_mass)
            .max(1e-12);
        if p.dt > p.softening / (10.0 * v_max) {
            return Err(HebError::StepSize(format!(
                "dt = {} exceeds softening/(10 v_max) = {}",
                p.dt,
                p.softening / (10.0 * v_max)
            )));
        }
        Ok(())
    }

    pub fn evolve(&self, field: &mut CanonicalField, duration: f64) -> Result<()> {
        let p = &self.params;
        let steps_f = duration / p.dt;
        let steps = steps_f.round();
        if steps < 1.0 || (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) {
            return Err(HebError::DurationStep { duration, dt: p.dt });
        }
        let mut st = Self::unpack(field);
        self.check_step(&st)?;
        let masses = [p.ball_mass, p.ball_mass, p.rail_mass];
        let mut f = self.forces(&st.q);
        for _ in 0..steps as usize {
            for i in 0..3 {
                st.p[i] += 0.5 * p.dt * f[i];
                st.q[i] += p.dt * st.p[i] / masses[i];
            }
            f = self.forces(&st.q);
            for i in 0..3 {
                st.p[i] += 0.5 * p.dt * f[i];
            }
        }
        Self::pack(&st, field);
        if !field.all_finite() {
            return Err(HebError::NonFinite("mechanical evolution".into()));
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
        let p = &self.params;
        let st = Self::unpack(field);
        let kin = (st.p[0] * st.p[0] + st.p[1] * st.p[1]) / (2.0 * p.ball_mass)
            + st.p[2] * st.p[2] / (2.0 * p.rail_mass);
        let d = [st.q[0] - st.q[2], st.q[1] - p.rail_y];
        let mut pot = p.coupling
            / (d[0] * d[0] + d[1] * d[1] + p.softening * p.softening).sqrt();
        for b in &p.background {
            let r = [st.q[0] - b.center[0], st.q[1] - b.center[1]];
            pot += b.amp * (-0.5 * (r[0] * r[0] + r[1] * r[1]) / (b.width * b.width)).exp();
        }
        kin + pot
    }
}

impl Propagator for MechanicalToy {
    fn propagate(&self, field: &mut CanonicalField, _dir: Direction) -> Result<()> {
        self.evolve(field, self.params.duration)
    }

    fn energy(&self, field: &CanonicalField) -> Option<f64> {
        Some(self.hamiltonian(field))
    }
}
