//! Entropy estimators on an energy level: dynamical-ball covering counts,
//! the largest Lyapunov exponent and the horseshoe scale of a transverse cycle.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, Phase};
use crate::lagrangian::TonelliLagrangian;
use crate::linalg;
use crate::orbits::{ConnectionGraph, PeriodicOrbit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Covering,
    Lyapunov,
    Horseshoe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverCount {
    pub delta: f64,
    pub t: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSlope {
    pub delta: f64,
    pub slope: f64,
    pub intercept: f64,
    pub resolution_limited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitExponent {
    pub exponent: f64,
    /// running average of the log stretch at each renormalization time
    pub series: Vec<[f64; 2]>,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleBound {
    pub cycle: Vec<usize>,
    pub symbols: usize,
    pub cycle_time: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Diagnostics {
    Covering {
        samples: usize,
        counts: Vec<CoverCount>,
        slopes: Vec<DeltaSlope>,
        /// the δ whose slope is reported
        delta: f64,
        t_grid: Vec<f64>,
    },
    Lyapunov {
        orbits: Vec<OrbitExponent>,
        rejected: usize,
        t_total: f64,
        renorm_dt: f64,
    },
    Horseshoe {
        cycles: Vec<CycleBound>,
        /// the value is a heuristic scale; the qualitative claim is the certificate
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub energy: f64,
    pub method: Method,
    pub estimate: f64,
    pub certificate: bool,
    pub status: String,
    pub diagnostics: Diagnostics,
}

fn fast_energy(l: &TonelliLagrangian, g_const: Option<linalg::Mat2>, z: &Phase) -> f64 {
    let x = [z[0], z[1]];
    let v = [z[2], z[3]];
    let g = g_const.unwrap_or_else(|| l.metric_at(x));
    0.5 * linalg::dot2(v, linalg::mul2v(&g, v)) + l.potential_value(x)
}

/// Rejection sample of the energy level `{E = c}` followed by one Newton
/// projection along `∇E`.
pub fn sample_level(l: &TonelliLagrangian, c: f64, n: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Phase>> {
    let m = 64;
    let mut umin = f64::INFINITY;
    let mut lmin = f64::INFINITY;
    for i in 0..m {
        for j in 0..m {
            let x = [i as f64 / m as f64, j as f64 / m as f64];
            umin = umin.min(l.potential_value(x));
            lmin = lmin.min(linalg::sym_eigenvalues2(&l.metric_at(x)).0);
        }
    }
    if c < umin {
        return Err(Error::invalid(format!(
            "energy {c} is below min U = {umin}; the level is empty"
        )));
    }
    let vmax = 1.1 * (2.0 * (c - umin) / lmin).sqrt() + tol;
    let g_const = l.has_constant_metric().then(|| l.metric_at([0.0, 0.0]));
    let mut out = Vec::with_capacity(n);
    let max_proposals = (n as u64).saturating_mul(200_000).max(1_000_000);
    let mut proposals = 0u64;
    while out.len() < n {
        proposals += 1;
        if proposals > max_proposals {
            return Err(Error::InsufficientData(format!(
                "only {} of {n} level points after {max_proposals} proposals",
                out.len()
            )));
        }
        let z = [
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random_range(-vmax..vmax),
            rng.random_range(-vmax..vmax),
        ];
        let e = fast_energy(l, g_const, &z);
        if (e - c).abs() > tol {
            continue;
        }
        let d = l.local([z[0], z[1]]);
        let v = [z[2], z[3]];
        let gv = linalg::mul2v(&d.g, v);
        let grad = [
            0.5 * linalg::dot2(v, linalg::mul2v(&d.dg[0], v)) + d.u.grad[0],
            0.5 * linalg::dot2(v, linalg::mul2v(&d.dg[1], v)) + d.u.grad[1],
            gv[0],
            gv[1],
        ];
        let n2 = linalg::dot4(grad, grad);
        if n2 < 1e-20 {
            continue;
        }
        let s = (e - c) / n2;
        out.push([z[0] - s * grad[0], z[1] - s * grad[1], z[2] - s * grad[2], z[3] - s * grad[3]]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoveringOptions {
    pub t_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub samples: usize,
    pub dt: f64,
    /// spacing of the stored trajectory samples used by the ball test
    pub sample_interval: f64,
    pub level_tol: f64,
    /// a count above this fraction of the samples marks δ as resolution-limited
    pub saturation: f64,
    pub seed: u64,
}

impl Default for CoveringOptions {
    fn default() -> Self {
        Self {
            t_grid: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            delta_grid: vec![0.5, 0.35, 0.25],
            samples: 10_000,
            dt: 0.02,
            sample_interval: 0.25,
            level_tol: 1e-3,
            saturation: 0.5,
            seed: 0,
        }
    }
}

/// Wrapped trajectories stored in single precision.
struct Bundle {
    stride: usize,
    len: usize,
    data: Vec<[f32; 4]>,
}

impl Bundle {
    fn point(&self, i: usize, k: usize) -> [f32; 4] {
        self.data[i * self.len + k]
    }

    /// `sup_{k ≤ upto} d(φ_k a, φ_k b) < δ` with the seam-minimal position gap.
    fn within(&self, a: usize, b: usize, upto: usize, delta2: f32) -> bool {
        for k in 0..=upto {
            let p = self.point(a, k);
            let q = self.point(b, k);
            let mut dx = (p[0] - q[0]).abs();
            let mut dy = (p[1] - q[1]).abs();
            dx = dx.min(1.0 - dx);
            dy = dy.min(1.0 - dy);
            let dv1 = p[2] - q[2];
            let dv2 = p[3] - q[3];
            if dx * dx + dy * dy + dv1 * dv1 + dv2 * dv2 >= delta2 {
                return false;
            }
        }
        true
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Growth rate of the number of `(δ, T)` dynamical balls covering the level.
pub fn covering_entropy(l: &TonelliLagrangian, c: f64, opts: &CoveringOptions) -> Result<EntropyReport> {
    let mut t_grid = opts.t_grid.clone();
    t_grid.sort_by(f64::total_cmp);
    if t_grid.len() < 2 || opts.delta_grid.is_empty() || t_grid[0] <= 0.0 {
        return Err(Error::invalid("covering needs at least two positive times and one delta"));
    }
    if !(opts.sample_interval >= opts.dt && opts.dt > 0.0) {
        return Err(Error::invalid("sample interval must be at least the time step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = sample_level(l, c, opts.samples, opts.level_tol, &mut rng)?;
    let t_max = *t_grid.last().unwrap();
    let stride = (opts.sample_interval / opts.dt).round().max(1.0) as usize;
    let h = opts.sample_interval / stride as f64;
    let len = (t_max / opts.sample_interval).ceil() as usize + 1;
    let trajs: Vec<Result<Vec<[f32; 4]>>> = starts
        .par_iter()
        .map(|z0| {
            let mut z = *z0;
            let mut out = Vec::with_capacity(len);
            let wrap = |z: &Phase| {
                let w = crate::torus::Lattice::UNIT.reduce([z[0], z[1]]);
                [w[0] as f32, w[1] as f32, z[2] as f32, z[3] as f32]
            };
            out.push(wrap(&z));
            for _ in 1..len {
                for _ in 0..stride {
                    z = flow::rk4_step(l, &z, h)?;
                }
                out.push(wrap(&z));
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(starts.len() * len);
    for t in trajs {
        data.extend(t?);
    }
    let bundle = Bundle { stride, len, data };
    let _ = bundle.stride;
    let n = starts.len();
    let mut counts = Vec::new();
    let mut slopes = Vec::new();
    let mut deltas = opts.delta_grid.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    for &delta in &deltas {
        let d2 = (delta * delta) as f32;
        // centers accumulate over T: earlier centers stay separated as T grows
        let mut centers: Vec<usize> = Vec::new();
        let mut ys = Vec::new();
        let mut limited = false;
        for &t in &t_grid {
            let upto = ((t / opts.sample_interval).round() as usize).min(len - 1);
            let mut covered = vec![false; n];
            for &cidx in &centers {
                covered[cidx] = true;
            }
            let prior = centers.clone();
            let mark: Vec<bool> = (0..n)
                .into_par_iter()
                .map(|j| covered[j] || prior.iter().any(|&ci| bundle.within(ci, j, upto, d2)))
                .collect();
            covered = mark;
            for j in 0..n {
                if covered[j] {
                    continue;
                }
                centers.push(j);
                covered[j] = true;
                for k in j + 1..n {
                    if !covered[k] && bundle.within(j, k, upto, d2) {
                        covered[k] = true;
                    }
                }
            }
            counts.push(CoverCount {
                delta,
                t,
                count: centers.len(),
            });
            ys.push((centers.len() as f64).ln());
            if centers.len() as f64 >= opts.saturation * n as f64 {
                limited = true;
            }
        }
        let (slope, intercept) = least_squares(&t_grid, &ys);
        slopes.push(DeltaSlope {
            delta,
            slope,
            intercept,
            resolution_limited: limited,
        });
    }
    let pick = slopes
        .iter()
        .rev()
        .find(|s| !s.resolution_limited)
        .or_else(|| slopes.first())
        .cloned()
        .unwrap();
    let status = if pick.resolution_limited {
        "every delta is resolution-limited; the largest is reported".to_string()
    } else {
        format!("smallest resolved delta {}", pick.delta)
    };
    Ok(EntropyReport {
        energy: c,
        method: Method::Covering,
        estimate: pick.slope,
        certificate: false,
        status,
        diagnostics: Diagnostics::Covering {
            samples: n,
            counts,
            slopes,
            delta: pick.delta,
            t_grid,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovOptions {
    pub orbits: usize,
    pub t_total: f64,
    pub renorm_dt: f64,
    pub dt: f64,
    pub level_tol: f64,
    /// integrate the time-reversed flow
    pub backward: bool,
    pub seed: u64,
    /// relative energy drift budget per unit time
    pub energy_budget: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            orbits: 8,
            t_total: 200.0,
            renorm_dt: 1.0,
            dt: 0.01,
            level_tol: 1e-3,
            backward: false,
            seed: 0,
            energy_budget: flow::DEFAULT_ENERGY_BUDGET,
        }
    }
}

/// Log stretch of a tangent vector along `z0`, renormalized every `renorm_dt`.
/// Negative `direction` integrates the time-reversed flow.
fn stretch_series(
    l: &TonelliLagrangian,
    z0: &Phase,
    w0: [f64; 4],
    t_total: f64,
    renorm_dt: f64,
    dt: f64,
    direction: f64,
    pin: Option<Phase>,
) -> Result<(Vec<f64>, f64)> {
    let blocks = (t_total / renorm_dt).round().max(1.0) as usize;
    let (steps, h) = flow::step_plan(renorm_dt, dt);
    let h = h * direction.signum();
    let mut z = *z0;
    let e0 = flow::phase_energy(l, z0);
    let nw = linalg::norm4(w0);
    let mut w = [w0.map(|c| c / nw)];
    let mut logs = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        for _ in 0..steps {
            let (zn, wn) = flow::rk4_step_tangent(l, &z, &w, h)?;
            z = zn;
            w = wn;
        }
        let n = linalg::norm4(w[0]);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::IntegrationFailure("tangent vector lost".into()));
        }
        logs.push(n.ln());
        w[0] = w[0].map(|c| c / n);
        if let Some(seed) = pin {
            z = seed;
        }
    }
    let drift = (flow::phase_energy(l, &z) - e0).abs();
    Ok((logs, drift))
}

fn tail_half_rate(logs: &[f64], renorm_dt: f64) -> f64 {
    let start = logs.len() / 2;
    let tail = &logs[start..];
    tail.iter().sum::<f64>() / (tail.len() as f64 * renorm_dt)
}

fn running_series(logs: &[f64], renorm_dt: f64) -> Vec<[f64; 2]> {
    let mut acc = 0.0;
    logs.iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            let t = (i + 1) as f64 * renorm_dt;
            [t, acc / t]
        })
        .collect()
}

/// Largest Lyapunov exponent over orbits sampled on the level.
pub fn lyapunov_exponent(l: &TonelliLagrangian, c: f64, opts: &LyapunovOptions) -> Result<EntropyReport> {
    if !(opts.t_total > 0.0 && opts.renorm_dt > 0.0 && opts.dt > 0.0) {
        return Err(Error::invalid("Lyapunov times must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = sample_level(l, c, opts.orbits.max(1), opts.level_tol, &mut rng)?;
    let tangents: Vec<[f64; 4]> = (0..starts.len())
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    let direction = if opts.backward { -1.0 } else { 1.0 };
    let limit = 100.0 * opts.energy_budget * opts.t_total.max(1.0);
    let runs: Vec<Option<OrbitExponent>> = starts
        .par_iter()
        .zip(tangents.par_iter())
        .map(|(z0, w0)| {
            let (logs, drift) = stretch_series(l, z0, *w0, opts.t_total, opts.renorm_dt, opts.dt, direction, None).ok()?;
            if drift > limit {
                return None;
            }
            Some(OrbitExponent {
                exponent: tail_half_rate(&logs, opts.renorm_dt),
                series: running_series(&logs, opts.renorm_dt),
                energy_drift: drift,
            })
        })
        .collect();
    let rejected = runs.iter().filter(|r| r.is_none()).count();
    let orbits: Vec<OrbitExponent> = runs.into_iter().flatten().collect();
    if orbits.len() * 2 < opts.orbits.max(1) {
        return Err(Error::InsufficientData(format!(
            "only {} of {} Lyapunov orbits passed the energy-drift check",
            orbits.len(),
            opts.orbits
        )));
    }
    let estimate = orbits.iter().map(|o| o.exponent).fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyReport {
        energy: c,
        method: Method::Lyapunov,
        estimate,
        certificate: false,
        status: format!("max over {} orbits", orbits.len()),
        diagnostics: Diagnostics::Lyapunov {
            orbits,
            rejected,
            t_total: opts.t_total,
            renorm_dt: opts.renorm_dt,
        },
    })
}

/// Exponent along a periodic orbit, re-pinning the base point to the seed
/// after every period so the estimate follows the orbit, not its neighbours.
pub fn lyapunov_on_orbit(l: &TonelliLagrangian, orbit: &PeriodicOrbit, periods: usize) -> Result<OrbitExponent> {
    let w0 = [0.3, -0.7, 0.5, 0.2];
    let t = orbit.period;
    let (logs, drift) = stretch_series(
        l,
        &orbit.seed_lift,
        w0,
        t * periods.max(2) as f64,
        t,
        orbit.dt,
        1.0,
        Some(orbit.seed_lift),
    )?;
    Ok(OrbitExponent {
        exponent: tail_half_rate(&logs, t),
        series: running_series(&logs, t),
        energy_drift: drift,
    })
}

/// `log m / t_cycle` for the best cycle of a certified connection graph.
pub fn horseshoe_bound(graph: &ConnectionGraph, energy: f64) -> Result<EntropyReport> {
    if !graph.certificate || graph.cycles.is_empty() {
        return Err(Error::Inapplicable(
            "no transverse cycle; the graph carries no certificate".into(),
        ));
    }
    let mut bounds = Vec::new();
    for cycle in &graph.cycles {
        let mut total = 0.0;
        for w in 0..cycle.len() {
            let a = cycle[w];
            let b = cycle[(w + 1) % cycle.len()];
            let best = graph
                .edges
                .iter()
                .filter(|e| e.from == a && e.to == b)
                .map(|e| e.transit_time)
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        bounds.push(cycle_bound(cycle.clone(), total));
    }
    let best = bounds.iter().map(|b| b.estimate).fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyReport {
        energy,
        method: Method::Horseshoe,
        estimate: best,
        certificate: true,
        status: "heuristic lower-bound scale from the detected cycle".into(),
        diagnostics: Diagnostics::Horseshoe {
            cycles: bounds,
            note: "log(m)/t_cycle is a conventional scale; the certificate is the qualitative claim".into(),
        },
    })
}

/// Cycle of length `k` with total transit time `t`: `m = max(2, k)` symbols.
pub fn cycle_bound(cycle: Vec<usize>, cycle_time: f64) -> CycleBound {
    let symbols = cycle.len().max(2);
    CycleBound {
        estimate: (symbols as f64).ln() / cycle_time,
        symbols,
        cycle_time,
        cycle,
    }
}

pub fn write_slope_csv<W: Write>(report: &EntropyReport, out: W) -> Result<()> {
    let Diagnostics::Covering { counts, .. } = &report.diagnostics else {
        return Err(Error::invalid("slope table needs a covering report"));
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "t", "count"]).map_err(flow::csv_err)?;
    for c in counts {
        w.write_record([format!("{}", c.delta), format!("{}", c.t), c.count.to_string()])
            .map_err(flow::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exponent_csv<W: Write>(report: &EntropyReport, out: W) -> Result<()> {
    let Diagnostics::Lyapunov { orbits, .. } = &report.diagnostics else {
        return Err(Error::invalid("exponent series needs a Lyapunov report"));
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["orbit", "t", "running_exponent"]).map_err(flow::csv_err)?;
    for (i, o) in orbits.iter().enumerate() {
        for p in &o.series {
            w.write_record([i.to_string(), format!("{:.17e}", p[0]), format!("{:.17e}", p[1])])
                .map_err(flow::csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{refine_orbit, RefineOptions};
    use crate::torus::CohomologyClass;
    use crate::variational::{minimize_loop, LoopOptions, PeriodMode};
    use approx::assert_abs_diff_eq;

    #[test]
    fn level_samples_sit_on_the_level() {
        let l = TonelliLagrangian::two_well(0.05, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_level(&l, 0.5, 200, 1e-3, &mut rng).unwrap();
        for z in &pts {
            assert!((flow::phase_energy(&l, z) - 0.5).abs() < 1e-6);
        }
        assert!(sample_level(&l, -1.0, 10, 1e-3, &mut rng).is_err());
    }

    #[test]
    fn horseshoe_arithmetic() {
        assert_abs_diff_eq!(cycle_bound(vec![0], 5.0).estimate, 2f64.ln() / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cycle_bound(vec![0, 1], 12.0).estimate, 0.0578, epsilon = 1e-4);
        let empty = ConnectionGraph {
            lattice: crate::torus::Lattice::UNIT,
            section: None,
            nodes: vec![],
            edges: vec![],
            cycles: vec![],
            certificate: false,
            hypothesis_failures: vec![],
            tangential_suspects: 0,
            curve_status: vec![],
            notes: vec![],
        };
        assert!(matches!(horseshoe_bound(&empty, 0.5), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn flat_lyapunov_is_small() {
        let l = TonelliLagrangian::flat_kinetic();
        let r = lyapunov_exponent(
            &l,
            0.5,
            &LyapunovOptions {
                orbits: 4,
                dt: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.estimate <= 0.01, "{}", r.estimate);
        assert!(r.estimate >= 0.0);
    }

    #[test]
    fn reversed_flow_has_the_same_exponent() {
        // backward from (x, v) mirrors forward from (x, −v) for a reversible L
        let l = TonelliLagrangian::two_well(0.05, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for z in sample_level(&l, 0.2, 4, 1e-3, &mut rng).unwrap() {
            let w = [0.4, -0.2, 0.7, 0.1];
            let (fwd, _) = stretch_series(
                &l,
                &[z[0], z[1], -z[2], -z[3]],
                [w[0], w[1], -w[2], -w[3]],
                30.0,
                1.0,
                0.01,
                1.0,
                None,
            )
            .unwrap();
            let (bwd, _) = stretch_series(&l, &z, w, 30.0, 1.0, 0.01, -1.0, None).unwrap();
            let (a, b) = (tail_half_rate(&fwd, 1.0), tail_half_rate(&bwd, 1.0));
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        let opts = LyapunovOptions {
            orbits: 4,
            t_total: 40.0,
            ..Default::default()
        };
        let f = lyapunov_exponent(&l, 0.2, &opts).unwrap();
        let b = lyapunov_exponent(&l, 0.2, &LyapunovOptions { backward: true, ..opts }).unwrap();
        assert!(f.estimate >= 0.0 && b.estimate >= 0.0);
    }

    #[test]
    fn orbit_exponent_matches_floquet() {
        let l = TonelliLagrangian::two_well(0.05, 0.0).unwrap();
        let lp = minimize_loop(
            &l,
            [0, 1],
            CohomologyClass::ZERO,
            PeriodMode::Fixed(1.0),
            3,
            &LoopOptions::default(),
        )
        .unwrap()
        .lp;
        let o = refine_orbit(
            &l,
            &lp,
            &RefineOptions {
                energy: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        let e = lyapunov_on_orbit(&l, &o, 40).unwrap();
        let oracle = o.floquet[0].abs().ln() / o.period;
        assert!((e.exponent / oracle - 1.0).abs() < 0.05, "{} vs {oracle}", e.exponent);
    }

    #[test]
    fn flat_covering_counts_grow_slowly() {
        let l = TonelliLagrangian::flat_kinetic();
        let opts = CoveringOptions {
            samples: 2000,
            t_grid: vec![5.0, 10.0, 20.0],
            delta_grid: vec![0.5],
            dt: 0.25,
            ..Default::default()
        };
        let r = covering_entropy(&l, 0.5, &opts).unwrap();
        let Diagnostics::Covering { counts, .. } = &r.diagnostics else {
            panic!()
        };
        assert!(counts.windows(2).all(|w| w[1].count >= w[0].count));
        assert!(r.estimate >= -0.01 && r.estimate < 0.1, "{}", r.estimate);
        let mut buf = Vec::new();
        write_slope_csv(&r, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("delta,t,count\n"));
    }
}
