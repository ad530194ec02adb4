//! Browser demo: trajectories, a Poincaré section and a slice of the
//! minimal average action for the two-well family.
//!
//! The `#[wasm_bindgen]` wrappers on [`Demo`] only convert errors; the
//! numerical work sits in plain functions that native tests can call.

// NaN-rejecting `!(a < b)` guards and index loops over small fixed matrices are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

use aubry_core::error::{Error, Result};
use aubry_core::flow::{self, Phase};
use aubry_core::lagrangian::TonelliLagrangian;
use aubry_core::mather::{self, BetaOptions, RationalClass};
use wasm_bindgen::prelude::*;

/// Largest number of integration steps a single call may take.
pub const STEP_BUDGET: usize = 2_000_000;

fn check_budget(steps: usize) -> Result<()> {
    if steps > STEP_BUDGET {
        return Err(Error::InvalidInput(format!(
            "{steps} steps exceed the budget of {STEP_BUDGET}"
        )));
    }
    Ok(())
}

/// Wrapped positions along a trajectory: `[x1, x2, energy]` per sample, flattened.
pub fn trajectory_samples(l: &TonelliLagrangian, z0: Phase, duration: f64, dt: f64, stride: usize) -> Result<Vec<f64>> {
    if !(duration > 0.0 && dt > 0.0) {
        return Err(Error::InvalidInput(String::from("duration and step must be positive")));
    }
    let (steps, h) = flow::step_plan(duration, dt);
    check_budget(steps)?;
    let stride = stride.max(1);
    let mut z = z0;
    let mut out = Vec::with_capacity(3 * (steps / stride + 2));
    let push = |z: &Phase, out: &mut Vec<f64>| {
        out.extend_from_slice(&[z[0].rem_euclid(1.0), z[1].rem_euclid(1.0), flow::phase_energy(l, z)]);
    };
    push(&z, &mut out);
    for k in 1..=steps {
        z = flow::rk4_step(l, &z, h)?;
        if k % stride == 0 || k == steps {
            push(&z, &mut out);
        }
    }
    Ok(out)
}

/// Velocity with horizontal component `v1` on the energy level at `x`, moving
/// upward; `None` when the level is not reachable there.
pub fn level_velocity(l: &TonelliLagrangian, x: [f64; 2], v1: f64, energy: f64) -> Option<[f64; 2]> {
    let kinetic = energy - l.potential_value(x);
    let g = l.metric_at(x);
    // solve ½ vᵀ g v = kinetic for v2 > 0
    let a = 0.5 * g[1][1];
    let b = g[0][1] * v1;
    let c = 0.5 * g[0][0] * v1 * v1 - kinetic;
    let disc = b * b - 4.0 * a * c;
    if !(disc >= 0.0) || a <= 0.0 {
        return None;
    }
    let v2 = (-b + disc.sqrt()) / (2.0 * a);
    (v2 > 0.0).then_some([v1, v2])
}

/// Returns to the section `x2 ∈ ℤ` (upward) of orbits started on the section
/// at `seeds` evenly spaced points: `[x1, v1]` per return, flattened.
pub fn section_returns(l: &TonelliLagrangian, energy: f64, seeds: usize, returns: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(String::from("step must be positive")));
    }
    check_budget(seeds * returns * ((4.0 / dt) as usize))?;
    let mut out = Vec::new();
    for s in 0..seeds {
        let u = (s as f64 + 0.5) / seeds as f64;
        let vmax = (2.0 * (energy - l.potential_value([u, 0.0]))).max(0.0).sqrt();
        let v1 = vmax * (2.0 * ((s * 7919) % seeds) as f64 / seeds as f64 - 1.0) * 0.9;
        let Some(v) = level_velocity(l, [u, 0.0], v1, energy) else {
            continue;
        };
        let mut z: Phase = [u, 0.0, v[0], v[1]];
        let mut found = 0;
        let mut t = 0.0;
        let t_max = returns as f64 * 50.0;
        while found < returns && t < t_max {
            let next = flow::rk4_step(l, &z, dt)?;
            t += dt;
            let (k0, k1) = (z[1].floor(), next[1].floor());
            if k1 > k0 && next[3] > 0.0 {
                // linear interpolation to the crossing
                let level = k1;
                let s = (level - z[1]) / (next[1] - z[1]);
                let x1 = z[0] + s * (next[0] - z[0]);
                let v1 = z[2] + s * (next[2] - z[2]);
                out.extend_from_slice(&[x1.rem_euclid(1.0), v1]);
                found += 1;
            }
            z = next;
        }
    }
    Ok(out)
}

/// Minimal average action `β(s·d)` for `s = k/den`, `k = 1..=max_k`, along an
/// integer direction `d`: `[h1, h2, beta]` per sample, flattened.
pub fn beta_slice(l: &TonelliLagrangian, direction: [i64; 2], max_k: i64, den: i64, starts: usize) -> Result<Vec<f64>> {
    if direction == [0, 0] || max_k < 1 || den < 1 {
        return Err(Error::InvalidInput(String::from(
            "need a non-zero direction, max_k >= 1 and den >= 1",
        )));
    }
    let opts = BetaOptions {
        starts: starts.max(1),
        ..BetaOptions::default()
    };
    let mut out = Vec::new();
    for k in 0..=max_k {
        let h = RationalClass::new(k * direction[0], k * direction[1], den)?;
        let b = mather::beta_at(l, h, &opts)?;
        out.extend_from_slice(&[b.h[0], b.h[1], b.beta]);
    }
    Ok(out)
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Two-well system `U = eps (cos 2πx1 + cos 2πx2) + coupling sin 2πx1 sin 2πx2`.
#[wasm_bindgen]
pub struct Demo {
    lagrangian: TonelliLagrangian,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(eps: f64, coupling: f64) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            lagrangian: TonelliLagrangian::two_well(eps, coupling).map_err(js)?,
        })
    }

    pub fn potential(&self, x1: f64, x2: f64) -> f64 {
        self.lagrangian.potential_value([x1, x2])
    }

    /// Critical value estimate `max U` from a grid scan plus Newton polish.
    pub fn critical_value(&self) -> f64 {
        mather::potential_maximum(&self.lagrangian, 64).1
    }

    pub fn trajectory(
        &self,
        x1: f64,
        x2: f64,
        v1: f64,
        v2: f64,
        duration: f64,
        dt: f64,
        stride: usize,
    ) -> std::result::Result<Vec<f64>, JsError> {
        trajectory_samples(&self.lagrangian, [x1, x2, v1, v2], duration, dt, stride).map_err(js)
    }

    pub fn poincare(&self, energy: f64, seeds: usize, returns: usize, dt: f64) -> std::result::Result<Vec<f64>, JsError> {
        section_returns(&self.lagrangian, energy, seeds, returns, dt).map_err(js)
    }

    pub fn beta_slice(&self, d1: i32, d2: i32, max_k: i32, den: i32) -> std::result::Result<Vec<f64>, JsError> {
        beta_slice(&self.lagrangian, [d1 as i64, d2 as i64], max_k as i64, den as i64, 2).map_err(js)
    }
}
