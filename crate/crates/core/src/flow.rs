//! Euler–Lagrange flow on T𝕋², its linearization, rotation vectors and the
//! Hamiltonian-side integrator used as a cross-check.
//!
//! States are integrated in the universal cover as `[x1, x2, v1, v2]`, so the
//! lift of a trajectory is simply its raw position component.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{self, LocalData, TonelliLagrangian};
use crate::linalg::{self, Mat2, Mat4};
use crate::torus::{wrap, CotangentState, HomologyClass, LiftedPoint, TangentState};

/// Lifted phase point `[x1, x2, v1, v2]`.
pub type Phase = [f64; 4];

pub const MAX_CONDITION: f64 = 1e8;
pub const DEFAULT_DT: f64 = 1e-3;
/// Energy drift budget per unit time.
pub const DEFAULT_ENERGY_BUDGET: f64 = 1e-6;
pub const DEFAULT_MIN_ROTATION_DURATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub dt: f64,
    /// keep every `sample_stride`-th step (the final state is always kept)
    pub sample_stride: usize,
    pub energy_budget: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            sample_stride: 1,
            energy_budget: DEFAULT_ENERGY_BUDGET,
        }
    }
}

impl IntegrationOptions {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample stride must be at least 1"));
        }
        Ok(())
    }

    /// Largest tolerated energy drift for a run of the given duration.
    pub fn drift_limit(&self, duration: f64) -> f64 {
        100.0 * self.energy_budget * duration.abs().max(1.0)
    }
}

fn check_metric(g: &Mat2) -> Result<()> {
    let (lo, hi) = linalg::sym_eigenvalues2(g);
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::IllConditioned(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    Ok(())
}

fn acceleration_local(d: &LocalData, v: [f64; 2]) -> Result<[f64; 2]> {
    let lx = lagrangian::dl_dx_local(d, v);
    let m = lagrangian::d2l_dvdx_local(d, v);
    let mv = linalg::mul2v(&m, v);
    let rhs = [lx[0] - mv[0], lx[1] - mv[1]];
    check_metric(&d.g)?;
    linalg::solve2(&d.g, rhs).ok_or(Error::IllConditioned(f64::INFINITY))
}

/// Acceleration of the Euler–Lagrange equation at a lifted configuration.
pub fn acceleration(l: &TonelliLagrangian, x: [f64; 2], v: [f64; 2]) -> Result<[f64; 2]> {
    acceleration_local(&l.local(x), v)
}

/// `(velocity, acceleration)` of the Euler–Lagrange vector field.
pub fn el_vector_field(l: &TonelliLagrangian, s: &TangentState) -> Result<([f64; 2], [f64; 2])> {
    if !(s.v1.is_finite() && s.v2.is_finite()) {
        return Err(Error::invalid("non-finite tangent state"));
    }
    Ok((s.v(), acceleration(l, s.x(), s.v())?))
}

pub fn phase_field(l: &TonelliLagrangian, z: &Phase) -> Result<Phase> {
    let a = acceleration(l, [z[0], z[1]], [z[2], z[3]])?;
    Ok([z[2], z[3], a[0], a[1]])
}

/// Field and its Jacobian `∂(v, a)/∂(x, v)`.
pub fn phase_field_jacobian(l: &TonelliLagrangian, z: &Phase) -> Result<(Phase, Mat4)> {
    let x = [z[0], z[1]];
    let v = [z[2], z[3]];
    let d = l.local(x);
    let a = acceleration_local(&d, v)?;
    let ginv = linalg::inv2(&d.g).ok_or(Error::IllConditioned(f64::INFINITY))?;
    let m = lagrangian::d2l_dvdx_local(&d, v);
    let lxx = lagrangian::d2l_dx2_local(&d, v);
    let mut drhs_dx = [[0.0; 2]; 2];
    let mut drhs_dv = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let mut dm = 0.0;
            for j in 0..2 {
                let dmij = d.d2g[j][k][i][0] * v[0] + d.d2g[j][k][i][1] * v[1] + d.a[i].hess[j][k];
                dm += dmij * v[j];
            }
            let dga = d.dg[k][i][0] * a[0] + d.dg[k][i][1] * a[1];
            drhs_dx[i][k] = lxx[i][k] - dm - dga;
            let dgv = d.dg[0][i][k] * v[0] + d.dg[1][i][k] * v[1];
            drhs_dv[i][k] = m[k][i] - m[i][k] - dgv;
        }
    }
    let dadx = linalg::mul2(&ginv, &drhs_dx);
    let dadv = linalg::mul2(&ginv, &drhs_dv);
    let mut j = [[0.0; 4]; 4];
    j[0][2] = 1.0;
    j[1][3] = 1.0;
    for i in 0..2 {
        for k in 0..2 {
            j[2 + i][k] = dadx[i][k];
            j[2 + i][2 + k] = dadv[i][k];
        }
    }
    Ok(([v[0], v[1], a[0], a[1]], j))
}

fn axpy(z: &Phase, h: f64, k: &Phase) -> Phase {
    [z[0] + h * k[0], z[1] + h * k[1], z[2] + h * k[2], z[3] + h * k[3]]
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step(l: &TonelliLagrangian, z: &Phase, h: f64) -> Result<Phase> {
    let k1 = phase_field(l, z)?;
    let k2 = phase_field(l, &axpy(z, 0.5 * h, &k1))?;
    let k3 = phase_field(l, &axpy(z, 0.5 * h, &k2))?;
    let k4 = phase_field(l, &axpy(z, h, &k3))?;
    let mut out = *z;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn mat_vec_cols(j: &Mat4, w: &[f64; 4]) -> [f64; 4] {
    linalg::mat4_vec(j, *w)
}

/// RK4 step of the orbit together with tangent vectors transported by the
/// linearized field (same stages, so frame and orbit stay consistent).
pub fn rk4_step_tangent<const K: usize>(
    l: &TonelliLagrangian,
    z: &Phase,
    w: &[[f64; 4]; K],
    h: f64,
) -> Result<(Phase, [[f64; 4]; K])> {
    let (k1, j1) = phase_field_jacobian(l, z)?;
    let mut w1 = [[0.0; 4]; K];
    for c in 0..K {
        w1[c] = mat_vec_cols(&j1, &w[c]);
    }
    let z2 = axpy(z, 0.5 * h, &k1);
    let (k2, j2) = phase_field_jacobian(l, &z2)?;
    let mut w2 = [[0.0; 4]; K];
    for c in 0..K {
        w2[c] = mat_vec_cols(&j2, &axpy(&w[c], 0.5 * h, &w1[c]));
    }
    let z3 = axpy(z, 0.5 * h, &k2);
    let (k3, j3) = phase_field_jacobian(l, &z3)?;
    let mut w3 = [[0.0; 4]; K];
    for c in 0..K {
        w3[c] = mat_vec_cols(&j3, &axpy(&w[c], 0.5 * h, &w2[c]));
    }
    let z4 = axpy(z, h, &k3);
    let (k4, j4) = phase_field_jacobian(l, &z4)?;
    let mut w4 = [[0.0; 4]; K];
    for c in 0..K {
        w4[c] = mat_vec_cols(&j4, &axpy(&w[c], h, &w3[c]));
    }
    let mut zo = *z;
    let mut wo = *w;
    for i in 0..4 {
        zo[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for c in 0..K {
            wo[c][i] += h / 6.0 * (w1[c][i] + 2.0 * w2[c][i] + 2.0 * w3[c][i] + w4[c][i]);
        }
    }
    Ok((zo, wo))
}

/// Number of fixed steps and the step actually used to reach `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, f64) {
    if t_final == 0.0 {
        return (0, 0.0);
    }
    let n = (t_final.abs() / dt).ceil().max(1.0) as usize;
    (n, t_final / n as f64)
}

pub fn phase_energy(l: &TonelliLagrangian, z: &Phase) -> f64 {
    l.energy_at([z[0], z[1]], [z[2], z[3]])
}

pub fn phase_to_state(z: &Phase) -> Result<TangentState> {
    Ok(TangentState {
        point: wrap(LiftedPoint::new(z[0], z[1]))?,
        v1: z[2],
        v2: z[3],
    })
}

pub fn state_to_phase(s: &TangentState) -> Phase {
    [s.point.x1(), s.point.x2(), s.v1, s.v2]
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TangentState>,
    pub lifts: Vec<LiftedPoint>,
    pub energy_log: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            lifts: Vec::with_capacity(n),
            energy_log: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, z: &Phase, e: f64) -> Result<()> {
        self.times.push(t);
        self.states.push(phase_to_state(z)?);
        self.lifts.push(LiftedPoint::new(z[0], z[1]));
        self.energy_log.push(e);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Lifted phase point of sample `i`.
    pub fn phase(&self, i: usize) -> Phase {
        let p = self.lifts[i];
        [p.x1, p.x2, self.states[i].v1, self.states[i].v2]
    }

    pub fn final_phase(&self) -> Phase {
        self.phase(self.len() - 1)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy_log.first().copied().unwrap_or(0.0);
        self.energy_log.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x1, x2, v1, v2, lift1, lift2, E`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x1", "x2", "v1", "v2", "lift1", "lift2", "E"])
            .map_err(csv_err)?;
        for i in 0..self.len() {
            let s = &self.states[i];
            let p = &self.lifts[i];
            w.serialize((
                self.times[i],
                s.point.x1(),
                s.point.x2(),
                s.v1,
                s.v2,
                p.x1,
                p.x2,
                self.energy_log[i],
            ))
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Final phase point after time `t` (negative for backward), without storing samples.
pub fn flow_map(l: &TonelliLagrangian, z0: &Phase, t: f64, opts: &IntegrationOptions) -> Result<Phase> {
    opts.check()?;
    let (n, h) = step_plan(t, opts.dt);
    let e0 = phase_energy(l, z0);
    let limit = opts.drift_limit(t);
    let mut z = *z0;
    for _ in 0..n {
        z = rk4_step(l, &z, h)?;
    }
    let drift = (phase_energy(l, &z) - e0).abs();
    if !(drift <= limit) {
        return Err(Error::IntegrationFailure(format!(
            "energy drift {drift:.3e} exceeds {limit:.3e} over t = {t}"
        )));
    }
    Ok(z)
}

/// Integrates from a lifted phase point.
pub fn integrate_lifted(l: &TonelliLagrangian, z0: &Phase, t_final: f64, opts: &IntegrationOptions) -> Result<Trajectory> {
    opts.check()?;
    if z0.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite initial state"));
    }
    let (n, h) = step_plan(t_final, opts.dt);
    let mut traj = Trajectory::with_capacity(n / opts.sample_stride + 2);
    let e0 = phase_energy(l, z0);
    traj.push(0.0, z0, e0)?;
    let limit = opts.drift_limit(t_final);
    let mut z = *z0;
    for k in 1..=n {
        z = rk4_step(l, &z, h)?;
        let e = phase_energy(l, &z);
        if !((e - e0).abs() <= limit) {
            return Err(Error::IntegrationFailure(format!(
                "energy drift {:.3e} exceeds {limit:.3e} at t = {}",
                (e - e0).abs(),
                k as f64 * h
            )));
        }
        if k % opts.sample_stride == 0 || k == n {
            traj.push(k as f64 * h, &z, e)?;
        }
    }
    Ok(traj)
}

/// Integrates the Euler–Lagrange flow from `s0` (lifted into the fundamental domain).
pub fn integrate(l: &TonelliLagrangian, s0: &TangentState, t_final: f64, dt: f64) -> Result<Trajectory> {
    integrate_lifted(l, &state_to_phase(s0), t_final, &IntegrationOptions::with_dt(dt))
}

/// Linearized flow `Dφ_t` in `(x, v)` coordinates; column `j` is the image of basis vector `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    pub matrix: Mat4,
}

impl TangentFrame {
    pub fn identity() -> Self {
        Self {
            matrix: linalg::mat4_identity(),
        }
    }

    pub fn det(&self) -> f64 {
        linalg::mat4_det(&self.matrix)
    }

    pub fn column(&self, j: usize) -> [f64; 4] {
        [self.matrix[0][j], self.matrix[1][j], self.matrix[2][j], self.matrix[3][j]]
    }

    pub fn apply(&self, w: [f64; 4]) -> [f64; 4] {
        linalg::mat4_vec(&self.matrix, w)
    }

    /// Determinant corrected for the non-canonical `(x, v)` coordinates:
    /// `det Dφ_t · det G(x_t) / det G(x_0)`, which is 1 for the symplectic flow.
    pub fn symplectic_det(&self, l: &TonelliLagrangian, x0: [f64; 2], xt: [f64; 2]) -> f64 {
        self.det() * linalg::det2(&l.metric_at(xt)) / linalg::det2(&l.metric_at(x0))
    }
}

fn frame_columns(m: &Mat4) -> [[f64; 4]; 4] {
    let mut c = [[0.0; 4]; 4];
    for (j, col) in c.iter_mut().enumerate() {
        for i in 0..4 {
            col[i] = m[i][j];
        }
    }
    c
}

fn columns_to_matrix(c: &[[f64; 4]; 4]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for j in 0..4 {
        for i in 0..4 {
            m[i][j] = c[j][i];
        }
    }
    m
}

/// Orbit and variational equation integrated as one combined state.
pub fn integrate_variational_lifted(
    l: &TonelliLagrangian,
    z0: &Phase,
    t_final: f64,
    opts: &IntegrationOptions,
) -> Result<(Trajectory, TangentFrame)> {
    opts.check()?;
    let (n, h) = step_plan(t_final, opts.dt);
    let mut traj = Trajectory::with_capacity(n / opts.sample_stride + 2);
    let e0 = phase_energy(l, z0);
    traj.push(0.0, z0, e0)?;
    let limit = opts.drift_limit(t_final);
    let mut z = *z0;
    let mut w = frame_columns(&linalg::mat4_identity());
    for k in 1..=n {
        let (zn, wn) = rk4_step_tangent(l, &z, &w, h)?;
        z = zn;
        w = wn;
        let e = phase_energy(l, &z);
        if !((e - e0).abs() <= limit) {
            return Err(Error::IntegrationFailure(format!(
                "energy drift {:.3e} exceeds {limit:.3e} at t = {}",
                (e - e0).abs(),
                k as f64 * h
            )));
        }
        if k % opts.sample_stride == 0 || k == n {
            traj.push(k as f64 * h, &z, e)?;
        }
    }
    Ok((
        traj,
        TangentFrame {
            matrix: columns_to_matrix(&w),
        },
    ))
}

pub fn integrate_variational(
    l: &TonelliLagrangian,
    s0: &TangentState,
    t_final: f64,
    dt: f64,
) -> Result<(Trajectory, TangentFrame)> {
    integrate_variational_lifted(l, &state_to_phase(s0), t_final, &IntegrationOptions::with_dt(dt))
}

/// Final state and monodromy-style frame only.
pub fn flow_with_frame(l: &TonelliLagrangian, z0: &Phase, t: f64, opts: &IntegrationOptions) -> Result<(Phase, TangentFrame)> {
    let stride = opts.sample_stride.max(1 << 30);
    let (traj, frame) = integrate_variational_lifted(
        l,
        z0,
        t,
        &IntegrationOptions {
            sample_stride: stride,
            ..*opts
        },
    )?;
    Ok((traj.final_phase(), frame))
}

/// Average displacement per unit time in the universal cover.
pub fn rotation_vector(traj: &Trajectory) -> Result<HomologyClass> {
    rotation_vector_min(traj, DEFAULT_MIN_ROTATION_DURATION)
}

pub fn rotation_vector_min(traj: &Trajectory, min_duration: f64) -> Result<HomologyClass> {
    let t = traj.duration();
    if traj.len() < 2 || !(t.abs() >= min_duration) || t == 0.0 {
        return Err(Error::InsufficientData(format!(
            "trajectory duration {t} below the minimum {min_duration}"
        )));
    }
    let a = traj.lifts[0];
    let b = traj.lifts[traj.len() - 1];
    Ok(HomologyClass::real((b.x1 - a.x1) / t, (b.x2 - a.x2) / t))
}

/// Cotangent-side trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CotangentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    pub lifts: Vec<LiftedPoint>,
    pub hamiltonian_log: Vec<f64>,
}

impl CotangentTrajectory {
    pub fn final_canonical(&self) -> [f64; 4] {
        let i = self.times.len() - 1;
        [self.lifts[i].x1, self.lifts[i].x2, self.states[i].p1, self.states[i].p2]
    }
}

fn hamilton_field(l: &TonelliLagrangian, y: &[f64; 4]) -> Result<[f64; 4]> {
    let x = [y[0], y[1]];
    let v = l.velocity_for_momentum(x, [y[2], y[3]])?;
    // ṗ = −∂H/∂x = ∂L/∂x at the Legendre-dual velocity
    let px = l.dl_dx(x, v);
    Ok([v[0], v[1], px[0], px[1]])
}

fn canonical_h(l: &TonelliLagrangian, y: &[f64; 4]) -> Result<f64> {
    let x = [y[0], y[1]];
    let v = l.velocity_for_momentum(x, [y[2], y[3]])?;
    Ok(y[2] * v[0] + y[3] * v[1] - l.lagrangian(x, v))
}

/// Hamilton's equations for `H = p(v*) − L(x, v*)`, integrated in canonical
/// coordinates with the same fixed-step scheme.
pub fn hamiltonian_integrate(l: &TonelliLagrangian, c0: &CotangentState, t_final: f64, dt: f64) -> Result<CotangentTrajectory> {
    hamiltonian_integrate_lifted(l, &[c0.point.x1(), c0.point.x2(), c0.p1, c0.p2], t_final, dt)
}

pub fn hamiltonian_integrate_lifted(l: &TonelliLagrangian, y0: &[f64; 4], t_final: f64, dt: f64) -> Result<CotangentTrajectory> {
    let opts = IntegrationOptions::with_dt(dt);
    opts.check()?;
    let (n, h) = step_plan(t_final, dt);
    let limit = opts.drift_limit(t_final);
    let h0 = canonical_h(l, y0)?;
    let mut out = CotangentTrajectory::default();
    let mut record = |t: f64, y: &[f64; 4], hv: f64| -> Result<()> {
        let point = wrap(LiftedPoint::new(y[0], y[1]))?;
        out.times.push(t);
        out.states.push(CotangentState {
            point,
            p1: y[2],
            p2: y[3],
        });
        out.lifts.push(LiftedPoint::new(y[0], y[1]));
        out.hamiltonian_log.push(hv);
        Ok(())
    };
    record(0.0, y0, h0)?;
    let mut y = *y0;
    for k in 1..=n {
        let k1 = hamilton_field(l, &y)?;
        let k2 = hamilton_field(l, &axpy(&y, 0.5 * h, &k1))?;
        let k3 = hamilton_field(l, &axpy(&y, 0.5 * h, &k2))?;
        let k4 = hamilton_field(l, &axpy(&y, h, &k3))?;
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let hv = canonical_h(l, &y)?;
        if !((hv - h0).abs() <= limit) {
            return Err(Error::IntegrationFailure(format!(
                "Hamiltonian drift {:.3e} exceeds {limit:.3e}",
                (hv - h0).abs()
            )));
        }
        record(k as f64 * h, &y, hv)?;
    }
    Ok(out)
}
