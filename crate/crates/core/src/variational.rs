//! Discrete action functionals: closed loops in a homology class and
//! endpoint-constrained curves, minimized by banded Newton iterations.
//!
//! The discrete Lagrangian is the midpoint rule
//! `dt · L((q_i + q_{i+1})/2, (q_{i+1} − q_i)/dt)` on a uniform time grid.
//! Loops are ordered `0, N−1, 1, N−2, …` for the factorization so that the
//! cyclic coupling stays inside a band of half-width five.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, csv_err, IntegrationOptions, Trajectory};
use crate::lagrangian::{self, TonelliLagrangian};
use crate::linalg::{self, BandedSpd, Mat2};
use crate::torus::{self, CohomologyClass, DiscreteLoop, LiftedPoint, TorusPoint};

pub const DEFAULT_LOOP_NODES: usize = 64;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopOptions {
    pub nodes: usize,
    /// amplitude of the random perturbation added to seed loops
    pub jitter: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_LOOP_NODES,
            jitter: 0.02,
            grad_tol: DEFAULT_GRAD_TOL,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PeriodMode {
    Fixed(f64),
    /// minimize `A_{L−ω} + k_offset·T` over `T` in the bracket as well
    Free {
        k_offset: f64,
        t_min: f64,
        t_max: f64,
    },
}

/// Midpoint discrete Lagrangian and its derivatives on one segment.
struct SegmentJet {
    value: f64,
    grad_a: [f64; 2],
    grad_b: [f64; 2],
    haa: Mat2,
    hab: Mat2,
    hbb: Mat2,
}

fn segment_value(l: &TonelliLagrangian, a: [f64; 2], b: [f64; 2], dt: f64) -> f64 {
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let u = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
    dt * l.lagrangian(m, u)
}

fn segment_energy(l: &TonelliLagrangian, a: [f64; 2], b: [f64; 2], dt: f64) -> f64 {
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let u = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
    l.energy_at(m, u)
}

fn segment_jet(l: &TonelliLagrangian, a: [f64; 2], b: [f64; 2], dt: f64, with_hessian: bool) -> SegmentJet {
    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let u = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
    let d = l.local(m);
    let value = dt * lagrangian::lagrangian_local(&d, u);
    let lx = lagrangian::dl_dx_local(&d, u);
    let lv = lagrangian::momentum_local(&d, u);
    let grad_a = [0.5 * dt * lx[0] - lv[0], 0.5 * dt * lx[1] - lv[1]];
    let grad_b = [0.5 * dt * lx[0] + lv[0], 0.5 * dt * lx[1] + lv[1]];
    let mut haa = linalg::ZERO2;
    let mut hab = linalg::ZERO2;
    let mut hbb = linalg::ZERO2;
    if with_hessian {
        let lxx = lagrangian::d2l_dx2_local(&d, u);
        // lxv[i][j] = ∂²L/∂x_i∂v_j
        let mvx = lagrangian::d2l_dvdx_local(&d, u);
        let lxv = linalg::transpose2(&mvx);
        let lvv = d.g;
        for i in 0..2 {
            for j in 0..2 {
                let xx = 0.25 * dt * lxx[i][j];
                let vv = lvv[i][j] / dt;
                let sym = 0.5 * (lxv[i][j] + lxv[j][i]);
                haa[i][j] = xx - sym + vv;
                hbb[i][j] = xx + sym + vv;
                hab[i][j] = xx + 0.5 * lxv[i][j] - 0.5 * lxv[j][i] - vv;
            }
        }
    }
    SegmentJet {
        value,
        grad_a,
        grad_b,
        haa,
        hab,
        hbb,
    }
}

/// A polyline of `N` segments whose nodes are either unknowns or fixed.
struct Chain<'a> {
    l: &'a TonelliLagrangian,
    dt: f64,
    /// for a loop: node `N` is node `0` shifted by this displacement
    closing: Option<[f64; 2]>,
    start: [f64; 2],
    end: [f64; 2],
    n_seg: usize,
    /// band position of each unknown node
    position: Vec<usize>,
    bw: usize,
    omega: CohomologyClass,
    k_offset: f64,
}

impl<'a> Chain<'a> {
    fn for_loop(l: &'a TonelliLagrangian, n: usize, period: f64, class: [i64; 2], omega: CohomologyClass, k_offset: f64) -> Self {
        let mut position = vec![0; n];
        let (mut lo, mut hi, mut p) = (0usize, n - 1, 0usize);
        while lo <= hi {
            position[lo] = p;
            p += 1;
            if hi != lo {
                position[hi] = p;
                p += 1;
            }
            lo += 1;
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
        Self {
            l,
            dt: period / n as f64,
            closing: Some([class[0] as f64, class[1] as f64]),
            start: [0.0; 2],
            end: [0.0; 2],
            n_seg: n,
            position,
            bw: 5,
            omega,
            k_offset,
        }
    }

    fn for_curve(l: &'a TonelliLagrangian, n_seg: usize, t: f64, start: [f64; 2], end: [f64; 2], omega: CohomologyClass) -> Self {
        Self {
            l,
            dt: t / n_seg as f64,
            closing: None,
            start,
            end,
            n_seg,
            position: (0..n_seg - 1).collect(),
            bw: 3,
            omega,
            k_offset: 0.0,
        }
    }

    fn n_unknowns(&self) -> usize {
        self.position.len()
    }

    /// Node `i` of the polyline (`0..=n_seg`).
    fn node(&self, x: &[[f64; 2]], i: usize) -> [f64; 2] {
        match self.closing {
            Some(k) => {
                if i == self.n_seg {
                    [x[0][0] + k[0], x[0][1] + k[1]]
                } else {
                    x[i]
                }
            }
            None => {
                if i == 0 {
                    self.start
                } else if i == self.n_seg {
                    self.end
                } else {
                    x[i - 1]
                }
            }
        }
    }

    fn unknown(&self, i: usize) -> Option<usize> {
        match self.closing {
            Some(_) => Some(i % self.n_seg),
            None => (i > 0 && i < self.n_seg).then(|| i - 1),
        }
    }

    fn displacement(&self, x: &[[f64; 2]]) -> [f64; 2] {
        let a = self.node(x, 0);
        let b = self.node(x, self.n_seg);
        [b[0] - a[0], b[1] - a[1]]
    }

    fn constant_terms(&self, x: &[[f64; 2]]) -> f64 {
        -self.omega.apply(self.displacement(x)) + self.k_offset * self.dt * self.n_seg as f64
    }

    fn value(&self, x: &[[f64; 2]]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_seg {
            s += segment_value(self.l, self.node(x, i), self.node(x, i + 1), self.dt);
        }
        s + self.constant_terms(x)
    }

    fn mean_energy(&self, x: &[[f64; 2]]) -> f64 {
        (0..self.n_seg)
            .map(|i| segment_energy(self.l, self.node(x, i), self.node(x, i + 1), self.dt))
            .sum::<f64>()
            / self.n_seg as f64
    }

    fn gradient(&self, x: &[[f64; 2]], hessian: Option<&mut BandedSpd>) -> (f64, Vec<[f64; 2]>) {
        let mut g = vec![[0.0; 2]; self.n_unknowns()];
        let mut s = 0.0;
        let want_h = hessian.is_some();
        let mut h = hessian;
        for i in 0..self.n_seg {
            let jet = segment_jet(self.l, self.node(x, i), self.node(x, i + 1), self.dt, want_h);
            s += jet.value;
            let va = self.unknown(i);
            let vb = self.unknown(i + 1);
            if let Some(a) = va {
                g[a][0] += jet.grad_a[0];
                g[a][1] += jet.grad_a[1];
            }
            if let Some(b) = vb {
                g[b][0] += jet.grad_b[0];
                g[b][1] += jet.grad_b[1];
            }
            if let Some(hm) = h.as_deref_mut() {
                if let Some(a) = va {
                    self.add_block(hm, a, a, &jet.haa);
                }
                if let Some(b) = vb {
                    self.add_block(hm, b, b, &jet.hbb);
                }
                if let (Some(a), Some(b)) = (va, vb) {
                    self.add_block(hm, a, b, &jet.hab);
                }
            }
        }
        (s + self.constant_terms(x), g)
    }

    fn add_block(&self, h: &mut BandedSpd, a: usize, b: usize, m: &Mat2) {
        let pa = self.position[a];
        let pb = self.position[b];
        if a == b {
            h.add(2 * pa, 2 * pa, m[0][0]);
            h.add(2 * pa + 1, 2 * pa + 1, m[1][1]);
            h.add(2 * pa + 1, 2 * pa, 0.5 * (m[0][1] + m[1][0]));
        } else {
            for i in 0..2 {
                for j in 0..2 {
                    h.add(2 * pa + i, 2 * pb + j, m[i][j]);
                }
            }
        }
    }
}

fn flat_norm(g: &[[f64; 2]]) -> f64 {
    g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt()
}

struct NewtonOutcome {
    x: Vec<[f64; 2]>,
    value: f64,
    grad_norm: f64,
    grad_max: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt regularized Newton with Armijo backtracking.
/// The objective never increases from the initial iterate.
fn newton_minimize(chain: &Chain<'_>, x0: Vec<[f64; 2]>, grad_tol: f64, max_iter: usize) -> NewtonOutcome {
    let n = chain.n_unknowns();
    let mut x = x0;
    let (mut f, mut g) = chain.gradient(&x, None);
    let mut gn = flat_norm(&g);
    let mut mu = 0.0f64;
    let mut iterations = 0;
    let mut stalled = 0;
    // polish below the tolerance while the iteration still makes progress
    let polish = grad_tol * 1e-3;
    while iterations < max_iter && gn > polish {
        iterations += 1;
        let mut h = BandedSpd::zeros(2 * n, chain.bw);
        let (_, _) = chain.gradient(&x, Some(&mut h));
        let scale = h.max_abs_diagonal().max(1e-300);
        let mut rhs = vec![0.0; 2 * n];
        for v in 0..n {
            let p = chain.position[v];
            rhs[2 * p] = -g[v][0];
            rhs[2 * p + 1] = -g[v][1];
        }
        let mut accepted = false;
        let mut mu_try = if mu > 0.0 { mu * 0.1 } else { 0.0 };
        for _ in 0..60 {
            let mut hm = h.clone();
            if mu_try > 0.0 {
                hm.add_diagonal(mu_try);
            }
            let Some(chol) = hm.cholesky() else {
                mu_try = if mu_try == 0.0 { 1e-10 * scale } else { mu_try * 8.0 };
                continue;
            };
            let step = chol.solve(&rhs);
            let mut d = vec![[0.0; 2]; n];
            for v in 0..n {
                let p = chain.position[v];
                d[v] = [step[2 * p], step[2 * p + 1]];
            }
            let slope: f64 = d.iter().zip(g.iter()).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
            if !(slope < 0.0) {
                mu_try = if mu_try == 0.0 { 1e-10 * scale } else { mu_try * 8.0 };
                continue;
            }
            let mut t = 1.0;
            while t > 1e-10 {
                let trial: Vec<[f64; 2]> = x
                    .iter()
                    .zip(d.iter())
                    .map(|(a, b)| [a[0] + t * b[0], a[1] + t * b[1]])
                    .collect();
                let ft = chain.value(&trial);
                let sufficient = ft <= f + 1e-4 * t * slope;
                // near a flat minimum the decrease drowns in round-off: accept on gradient reduction
                let flat = ft <= f + 1e-13 * f.abs().max(1.0);
                if sufficient || flat {
                    let (fv, gv) = chain.gradient(&trial, None);
                    let gnv = flat_norm(&gv);
                    if sufficient || gnv < 0.9 * gn {
                        x = trial;
                        f = fv;
                        g = gv;
                        gn = gnv;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted {
                mu = mu_try;
                break;
            }
            mu_try = if mu_try == 0.0 { 1e-10 * scale } else { mu_try * 8.0 };
        }
        if !accepted {
            stalled += 1;
            if stalled >= 2 || gn <= grad_tol {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    let grad_max = g.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
    NewtonOutcome {
        x,
        value: f,
        grad_norm: gn,
        grad_max,
        iterations,
        converged: gn <= grad_tol,
    }
}

/// Discrete action of a loop: midpoint quadrature of `L + k_offset` minus the
/// exact pairing `⟨ω, [loop]⟩`.
pub fn discrete_action(l: &TonelliLagrangian, lp: &DiscreteLoop, omega: CohomologyClass, k_offset: f64) -> Result<f64> {
    let n = lp.len();
    let dt = lp.dt();
    let mut s = 0.0;
    for i in 0..n {
        let a = lp.node(i);
        let b = lp.node(i + 1);
        if a == b && lp.class() != [0, 0] {
            return Err(Error::DegenerateLoop(format!(
                "zero-length segment {i} in a non-contractible loop"
            )));
        }
        s += segment_value(l, a, b, dt);
    }
    let class = lp.homology();
    Ok(s - omega.pairing(&class) + k_offset * lp.period())
}

/// Same quadrature with the ω term integrated segment by segment (no shortcut).
pub fn discrete_action_quadrature(l: &TonelliLagrangian, lp: &DiscreteLoop, omega: CohomologyClass, k_offset: f64) -> f64 {
    let n = lp.len();
    let dt = lp.dt();
    let mut s = 0.0;
    for i in 0..n {
        let a = lp.node(i);
        let b = lp.node(i + 1);
        let u = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
        s += segment_value(l, a, b, dt) - dt * omega.apply(u) + dt * k_offset;
    }
    s
}

/// Mean of the discrete energy over the segments of a loop.
pub fn loop_mean_energy(l: &TonelliLagrangian, lp: &DiscreteLoop) -> f64 {
    let dt = lp.dt();
    (0..lp.len())
        .map(|i| segment_energy(l, lp.node(i), lp.node(i + 1), dt))
        .sum::<f64>()
        / lp.len() as f64
}

/// Gradient of the discrete loop action with respect to the nodes.
pub fn loop_gradient(l: &TonelliLagrangian, lp: &DiscreteLoop) -> Vec<[f64; 2]> {
    let chain = Chain::for_loop(l, lp.len(), lp.period(), lp.class(), CohomologyClass::ZERO, 0.0);
    let x: Vec<[f64; 2]> = lp.nodes().iter().map(|p| p.to_array()).collect();
    chain.gradient(&x, None).1
}

/// Velocity at node `i` by central differences of the neighbours.
pub fn node_velocity(lp: &DiscreteLoop, i: usize) -> [f64; 2] {
    let n = lp.len();
    let a = lp.node(i + n - 1);
    let b = lp.node(i + n + 1);
    let dt = lp.dt();
    [(b[0] - a[0]) / (2.0 * dt), (b[1] - a[1]) / (2.0 * dt)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopMinimum {
    pub lp: DiscreteLoop,
    pub action: f64,
    pub grad_norm: f64,
    /// max-norm of the discrete Euler–Lagrange residual (gradient / dt)
    pub stationarity: f64,
    pub mean_energy: f64,
    pub iterations: usize,
    pub collapsed: bool,
    pub seed_action: f64,
}

/// Minimizes at fixed period starting from a given loop.
pub fn minimize_loop_fixed(
    l: &TonelliLagrangian,
    init: &DiscreteLoop,
    omega: CohomologyClass,
    k_offset: f64,
    opts: &LoopOptions,
) -> Result<LoopMinimum> {
    let n = init.len();
    let chain = Chain::for_loop(l, n, init.period(), init.class(), omega, k_offset);
    let x0: Vec<[f64; 2]> = init.nodes().iter().map(|p| p.to_array()).collect();
    let seed_action = chain.value(&x0);
    let out = newton_minimize(&chain, x0, opts.grad_tol, opts.max_iter);
    let nodes: Vec<LiftedPoint> = out.x.iter().map(|p| LiftedPoint::from_array(*p)).collect();
    let lp = init.with_nodes(nodes)?;
    if init.class() == [0, 0] && lp.length() < 1e-6 {
        return collapse_to_constant(l, &lp, omega, k_offset, seed_action);
    }
    if !out.converged {
        if init.class() == [0, 0] && lp.length() < 1e-3 {
            return collapse_to_constant(l, &lp, omega, k_offset, seed_action);
        }
        return Err(Error::LoopConvergence {
            best: Box::new(lp),
            action: out.value,
            grad_norm: out.grad_norm,
        });
    }
    let mean_energy = chain.mean_energy(&out.x);
    Ok(LoopMinimum {
        lp,
        action: out.value,
        grad_norm: out.grad_norm,
        stationarity: out.grad_max / chain.dt,
        mean_energy,
        iterations: out.iterations,
        collapsed: false,
        seed_action,
    })
}

fn collapse_to_constant(
    l: &TonelliLagrangian,
    lp: &DiscreteLoop,
    omega: CohomologyClass,
    k_offset: f64,
    seed_action: f64,
) -> Result<LoopMinimum> {
    let n = lp.len() as f64;
    let c = lp
        .nodes()
        .iter()
        .fold([0.0, 0.0], |acc, p| [acc[0] + p.x1 / n, acc[1] + p.x2 / n]);
    let constant = lp.with_nodes(vec![LiftedPoint::from_array(c); lp.len()])?;
    let action = discrete_action(l, &constant, omega, k_offset)?;
    let grad = loop_gradient(l, &constant);
    let gn = flat_norm(&grad);
    Ok(LoopMinimum {
        mean_energy: loop_mean_energy(l, &constant),
        stationarity: grad.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max) / constant.dt(),
        lp: constant,
        action,
        grad_norm: gn,
        iterations: 0,
        collapsed: true,
        seed_action,
    })
}

/// Straight seed loop with a deterministic random origin and jitter.
pub fn seed_loop(class: [i64; 2], period: f64, seed: u64, opts: &LoopOptions) -> Result<DiscreteLoop> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = [rng.random::<f64>(), rng.random::<f64>()];
    seed_loop_at(class, period, origin, &mut rng, opts)
}

pub fn seed_loop_at(
    class: [i64; 2],
    period: f64,
    origin: [f64; 2],
    rng: &mut ChaCha8Rng,
    opts: &LoopOptions,
) -> Result<DiscreteLoop> {
    let base = DiscreteLoop::straight(LiftedPoint::from_array(origin), class, period, opts.nodes)?;
    if opts.jitter == 0.0 {
        return Ok(base);
    }
    let n = opts.nodes;
    // smooth jitter: a few random low Fourier modes
    let modes: Vec<(f64, f64, f64, f64)> = (1..=3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let nodes = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = std::f64::consts::TAU * i as f64 / n as f64;
            let mut d = [0.0; 2];
            for (k, m) in modes.iter().enumerate() {
                let kk = (k + 1) as f64;
                let (sn, cs) = (kk * s).sin_cos();
                d[0] += (m.0 * cs + m.1 * sn) / kk;
                d[1] += (m.2 * cs + m.3 * sn) / kk;
            }
            LiftedPoint::new(p.x1 + opts.jitter * d[0], p.x2 + opts.jitter * d[1])
        })
        .collect();
    base.with_nodes(nodes)
}

/// Minimizes the discrete action of loops in class `(k,l)` from a seeded start.
///
/// With [`PeriodMode::Free`] the period is optimized as well: the stationarity
/// condition in `log T` is `mean discrete energy = k_offset`, solved by a
/// bracketed root search with warm-started inner minimizations.
pub fn minimize_loop(
    l: &TonelliLagrangian,
    class: [i64; 2],
    omega: CohomologyClass,
    mode: PeriodMode,
    seed: u64,
    opts: &LoopOptions,
) -> Result<LoopMinimum> {
    match mode {
        PeriodMode::Fixed(t) => {
            let init = seed_loop(class, t, seed, opts)?;
            minimize_loop_fixed(l, &init, omega, 0.0, opts)
        }
        PeriodMode::Free { k_offset, t_min, t_max } => {
            let t0 = (t_min * t_max).sqrt();
            let init = seed_loop(class, t0, seed, opts)?;
            minimize_free_period(l, &init, omega, k_offset, t_min, t_max, opts)
        }
    }
}

/// Free-period minimization warm-started from `init`.
pub fn minimize_free_period(
    l: &TonelliLagrangian,
    init: &DiscreteLoop,
    omega: CohomologyClass,
    k_offset: f64,
    t_min: f64,
    t_max: f64,
    opts: &LoopOptions,
) -> Result<LoopMinimum> {
    if init.class() == [0, 0] {
        return Err(Error::invalid("free-period minimization needs a non-contractible class"));
    }
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Error::invalid("free-period bracket must satisfy 0 < t_min < t_max"));
    }
    let mut warm = init.clone();
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let eval = |t: f64, warm: &mut DiscreteLoop| -> Result<LoopMinimum> {
        let start = warm.with_period(t)?;
        let m = minimize_loop_fixed(l, &start, omega, k_offset, opts)?;
        *warm = m.lp.clone();
        Ok(m)
    };
    // scan upward in log T; f(s) = k_offset − mean energy is increasing
    let steps = 24usize;
    let ratio = (t_max / t_min).powf(1.0 / steps as f64);
    let mut prev: Option<(f64, f64, LoopMinimum)> = None;
    let mut bracket = None;
    for i in 0..=steps {
        let t = t_min * ratio.powi(i as i32);
        let m = eval(t, &mut warm)?;
        let f = k_offset - m.mean_energy;
        samples.push((t, f));
        if let Some((tp, fp, mp)) = prev.take() {
            if fp < 0.0 && f >= 0.0 {
                bracket = Some((tp, fp, mp, t, f, m));
                break;
            }
        }
        prev = Some((t, f, m));
    }
    let Some((ta, mut fa, ma, tb, mut fb, mb)) = bracket else {
        return Err(Error::NoInteriorMinimum(format!(
            "k_offset − mean energy never changes sign on T ∈ [{t_min}, {t_max}]: {samples:?}"
        )));
    };
    let mut best = if fa.abs() < fb.abs() { ma } else { mb };
    let mut warm = best.lp.clone();
    // Illinois regula falsi on s = log T
    let (mut sa, mut sb) = (ta.ln(), tb.ln());
    let mut side = 0i32;
    for _ in 0..60 {
        let s = (sa * fb - sb * fa) / (fb - fa);
        let t = s.exp();
        let m = eval(t, &mut warm)?;
        let f = k_offset - m.mean_energy;
        best = m;
        if f.abs() <= 1e-12 || (sb - sa).abs() <= 1e-13 {
            break;
        }
        if f < 0.0 {
            sa = s;
            fa = f;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            sb = s;
            fb = f;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

/// Endpoint-constrained minimization for one lift of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMinimum {
    pub value: f64,
    pub translate: [i64; 2],
    pub nodes: Vec<[f64; 2]>,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialOptions {
    pub nodes_per_time: f64,
    pub min_nodes: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// expected rotation vector of long minimizers, used to centre the translates
    #[serde(default)]
    pub rotation_hint: Option<[f64; 2]>,
    pub max_recentering: usize,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self {
            nodes_per_time: 64.0,
            min_nodes: 16,
            grad_tol: 1e-9,
            max_iter: 100,
            rotation_hint: None,
            max_recentering: 12,
        }
    }
}

fn minimize_curve(
    l: &TonelliLagrangian,
    start: [f64; 2],
    end: [f64; 2],
    t: f64,
    omega: CohomologyClass,
    opts: &PotentialOptions,
    init: Option<&[[f64; 2]]>,
) -> (f64, Vec<[f64; 2]>, f64, bool) {
    let n_seg = ((opts.nodes_per_time * t).ceil() as usize).max(opts.min_nodes);
    let chain = Chain::for_curve(l, n_seg, t, start, end, omega);
    let x0: Vec<[f64; 2]> = match init {
        Some(x) if x.len() == n_seg - 1 => x.to_vec(),
        _ => (1..n_seg)
            .map(|i| {
                let s = i as f64 / n_seg as f64;
                [start[0] + s * (end[0] - start[0]), start[1] + s * (end[1] - start[1])]
            })
            .collect(),
    };
    let out = newton_minimize(&chain, x0, opts.grad_tol, opts.max_iter);
    (out.value, out.x, out.grad_norm, out.converged)
}

/// `Φ_ω(x, y, t)` by minimizing over discrete curves to lifts of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub best: CurveMinimum,
    pub evaluated: usize,
    pub failed: usize,
}

/// Minimal-lift displacement from `x` to `y` in the cover.
fn nearest_lift(x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let d = torus::toroidal_delta(x, y);
    [x[0] + d[0], x[1] + d[1]]
}

pub fn action_potential(
    l: &TonelliLagrangian,
    x: &TorusPoint,
    y: &TorusPoint,
    t: f64,
    omega: CohomologyClass,
) -> Result<PotentialValue> {
    action_potential_with(l, x.to_array(), y.to_array(), t, omega, &PotentialOptions::default())
}

/// Multi-start over the 3×3 block of deck translates around the expected
/// winding; the block is re-centred while the best translate sits on its border.
pub fn action_potential_with(
    l: &TonelliLagrangian,
    x: [f64; 2],
    y: [f64; 2],
    t: f64,
    omega: CohomologyClass,
    opts: &PotentialOptions,
) -> Result<PotentialValue> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("action potential needs t > 0, got {t}")));
    }
    let y0 = nearest_lift(x, y);
    let hint = match opts.rotation_hint {
        Some(r) => r,
        None => l.velocity_for_momentum(x, omega.to_array()).unwrap_or([0.0, 0.0]),
    };
    let mut center = [
        (t * hint[0] - (y0[0] - x[0])).round() as i64,
        (t * hint[1] - (y0[1] - x[1])).round() as i64,
    ];
    let mut cache: std::collections::BTreeMap<[i64; 2], Option<CurveMinimum>> = Default::default();
    let mut failed = 0;
    for _ in 0..=opts.max_recentering {
        for dm in [-1i64, 0, 1] {
            for dn in [-1i64, 0, 1] {
                let m = [center[0] + dm, center[1] + dn];
                if cache.contains_key(&m) {
                    continue;
                }
                let end = [y0[0] + m[0] as f64, y0[1] + m[1] as f64];
                let (value, nodes, gn, converged) = minimize_curve(l, x, end, t, omega, opts, None);
                let entry = if value.is_finite() && converged {
                    Some(CurveMinimum {
                        value,
                        translate: m,
                        nodes,
                        grad_norm: gn,
                        converged,
                    })
                } else {
                    failed += 1;
                    None
                };
                cache.insert(m, entry);
            }
        }
        let best = cache
            .values()
            .flatten()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .map(|b| b.translate);
        match best {
            Some(b) if (b[0] - center[0]).abs() == 1 || (b[1] - center[1]).abs() == 1 => {
                center = b;
            }
            _ => break,
        }
    }
    let evaluated = cache.len();
    let best = cache
        .into_values()
        .flatten()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Convergence {
            what: "action potential (all translates)".into(),
            iterations: opts.max_iter,
            residual: f64::NAN,
        })?;
    Ok(PotentialValue {
        value: best.value,
        best,
        evaluated,
        failed,
    })
}

/// Geometric grid of `n` times in `[t_min, t_max]`.
pub fn geometric_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_max];
    }
    let r = (t_max / t_min).powf(1.0 / (n - 1) as f64);
    (0..n)
        .map(|i| if i == n - 1 { t_max } else { t_min * r.powi(i as i32) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSample {
    pub x: TorusPoint,
    pub y: TorusPoint,
    pub omega: CohomologyClass,
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    /// `Φ_ω(x,y,t) + α t`, NaN where the minimization failed
    pub values: Vec<f64>,
    /// minimum over the tail half of the grid
    pub running_min: f64,
    /// running minimum along the tail half, one entry per tail grid point
    pub running_min_series: Vec<f64>,
    pub failures: Vec<usize>,
}

impl BarrierSample {
    pub fn tail_start(&self) -> usize {
        self.t_grid.len() / 2
    }
}

/// Tail running minimum of `Φ_ω(x,y,t) + α t` over an increasing time grid.
pub fn peierls_barrier(
    l: &TonelliLagrangian,
    x: &TorusPoint,
    y: &TorusPoint,
    omega: CohomologyClass,
    alpha: f64,
    t_grid: &[f64],
    opts: &PotentialOptions,
) -> Result<BarrierSample> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid[0] <= 0.0 {
        return Err(Error::invalid("barrier time grid must be positive and increasing"));
    }
    if *t_grid.last().unwrap() < 20.0 {
        return Err(Error::invalid("barrier time grid must reach t >= 20"));
    }
    let mut values = Vec::with_capacity(t_grid.len());
    let mut failures = Vec::new();
    for (i, &t) in t_grid.iter().enumerate() {
        match action_potential_with(l, x.to_array(), y.to_array(), t, omega, opts) {
            Ok(p) => values.push(p.value + alpha * t),
            Err(_) => {
                failures.push(i);
                values.push(f64::NAN);
            }
        }
    }
    let tail = t_grid.len() / 2;
    let mut series = Vec::with_capacity(t_grid.len() - tail);
    let mut run = f64::INFINITY;
    for v in &values[tail..] {
        if v.is_finite() {
            run = run.min(*v);
        }
        series.push(run);
    }
    if !run.is_finite() {
        return Err(Error::Convergence {
            what: "Peierls barrier (every tail grid point failed)".into(),
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(BarrierSample {
        x: *x,
        y: *y,
        omega,
        alpha,
        t_grid: t_grid.to_vec(),
        values,
        running_min: run,
        running_min_series: series,
        failures,
    })
}

/// `δ(x,y) = h(x,y) + h(y,x)` with both barrier samples.
pub fn aubry_semidistance(
    l: &TonelliLagrangian,
    x: &TorusPoint,
    y: &TorusPoint,
    omega: CohomologyClass,
    alpha: f64,
    t_grid: &[f64],
    opts: &PotentialOptions,
) -> Result<(f64, BarrierSample, BarrierSample)> {
    let a = peierls_barrier(l, x, y, omega, alpha, t_grid, opts)?;
    let b = peierls_barrier(l, y, x, omega, alpha, t_grid, opts)?;
    Ok((a.running_min + b.running_min, a, b))
}

/// Action of `L − ω + α` along trajectory samples (composite Simpson when the
/// sample count allows it, trapezoid otherwise).
pub fn trajectory_action(l: &TonelliLagrangian, traj: &Trajectory, omega: CohomologyClass, alpha: f64) -> Result<f64> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::InsufficientData("trajectory needs at least two samples".into()));
    }
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let z = traj.phase(i);
            let v = [z[2], z[3]];
            l.lagrangian([z[0], z[1]], v) - omega.apply(v) + alpha
        })
        .collect();
    let h = traj.times[1] - traj.times[0];
    let uniform = traj
        .times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if uniform && (n - 1).is_multiple_of(2) && n >= 3 {
        let mut s = f[0] + f[n - 1];
        for (i, v) in f.iter().enumerate().take(n - 1).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        return Ok(s * h / 3.0);
    }
    Ok((0..n - 1)
        .map(|i| 0.5 * (f[i] + f[i + 1]) * (traj.times[i + 1] - traj.times[i]))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemistaticResidual {
    pub residual: f64,
    pub segment_action: f64,
    pub best_competitor: f64,
    pub best_time: f64,
    pub t_grid: Vec<f64>,
}

/// Segment action minus the best sampled competitor `Φ_ω + α t`.
pub fn semistatic_residual(
    l: &TonelliLagrangian,
    segment: &Trajectory,
    omega: CohomologyClass,
    alpha: f64,
    opts: &PotentialOptions,
) -> Result<SemistaticResidual> {
    let tau = segment.duration();
    if !(tau >= 1.0 - 1e-12) {
        return Err(Error::InsufficientData(format!("segment duration {tau} < 1")));
    }
    let action = trajectory_action(l, segment, omega, alpha)?;
    let a = segment.lifts[0];
    let b = segment.lifts[segment.len() - 1];
    let x = [a.x1, a.x2];
    let disp = [b.x1 - a.x1, b.x2 - a.x2];
    let fractions = [0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2];
    let mut best = f64::INFINITY;
    let mut best_t = tau;
    let mut grid = Vec::new();
    for f in fractions {
        let t = tau * f;
        grid.push(t);
        let popts = PotentialOptions {
            rotation_hint: Some([disp[0] / t, disp[1] / t]),
            ..*opts
        };
        let y = [x[0] + disp[0], x[1] + disp[1]];
        let wx = torus::wrap(LiftedPoint::from_array(x))?.to_array();
        let wy = torus::wrap(LiftedPoint::from_array(y))?.to_array();
        if let Ok(p) = action_potential_with(l, wx, wy, t, omega, &popts) {
            let v = p.value + alpha * t;
            if v < best {
                best = v;
                best_t = t;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::Convergence {
            what: "semi-static competitor search".into(),
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok(SemistaticResidual {
        residual: action - best,
        segment_action: action,
        best_competitor: best,
        best_time: best_t,
        t_grid: grid,
    })
}

/// Trajectory segment from a phase point, sampled uniformly.
pub fn segment_from(l: &TonelliLagrangian, z0: &flow::Phase, duration: f64, dt: f64) -> Result<Trajectory> {
    flow::integrate_lifted(l, z0, duration, &IntegrationOptions::with_dt(dt))
}

/// Barrier sweep rows `x, y, t, phi_plus_alpha_t, running_min`.
pub fn write_barrier_csv<W: Write>(samples: &[BarrierSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "x2", "y1", "y2", "t", "phi_plus_alpha_t", "running_min"])
        .map_err(csv_err)?;
    for s in samples {
        let tail = s.tail_start();
        let mut run = f64::INFINITY;
        for (i, (&t, &v)) in s.t_grid.iter().zip(s.values.iter()).enumerate() {
            if i >= tail && v.is_finite() {
                run = run.min(v);
            }
            let rm = if i >= tail { run } else { f64::NAN };
            w.serialize((s.x.x1(), s.x.x2(), s.y.x1(), s.y.x2(), t, v, rm))
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat() -> TonelliLagrangian {
        TonelliLagrangian::flat_kinetic()
    }

    fn mech(eps: f64) -> TonelliLagrangian {
        TonelliLagrangian::two_well(eps, 0.0).unwrap()
    }

    #[test]
    fn interleaved_ordering_is_a_permutation_with_small_band() {
        let l = flat();
        for n in [8usize, 9, 16, 33] {
            let c = Chain::for_loop(&l, n, 1.0, [1, 0], CohomologyClass::ZERO, 0.0);
            let mut seen = c.position.clone();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            for i in 0..n {
                let a = c.position[i] as i64;
                let b = c.position[(i + 1) % n] as i64;
                assert!((a - b).abs() <= 2);
            }
        }
    }

    #[test]
    fn action_examples() {
        let l = flat();
        let lp = DiscreteLoop::straight(LiftedPoint::new(0.2, 0.3), [1, 0], 1.0, 16).unwrap();
        assert_abs_diff_eq!(
            discrete_action(&l, &lp, CohomologyClass::ZERO, 0.0).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        let m = mech(0.05);
        let c = DiscreteLoop::new(vec![LiftedPoint::new(0.3, 0.1); 8], 2.5, [0, 0]).unwrap();
        let u = m.potential_value([0.3, 0.1]);
        assert_abs_diff_eq!(
            discrete_action(&m, &c, CohomologyClass::ZERO, 0.0).unwrap(),
            -2.5 * u,
            epsilon = 1e-14
        );
        let w = CohomologyClass::new(0.3, -0.7);
        let lp2 = DiscreteLoop::straight(LiftedPoint::new(0.0, 0.0), [2, 3], 1.3, 16).unwrap();
        let a0 = discrete_action(&m, &lp2, CohomologyClass::ZERO, 0.0).unwrap();
        let a1 = discrete_action(&m, &lp2, w, 0.0).unwrap();
        assert_abs_diff_eq!(a0 - a1, 0.3 * 2.0 - 0.7 * 3.0, epsilon = 1e-12);
        let bad = DiscreteLoop::new(vec![LiftedPoint::new(0.0, 0.0); 8], 1.0, [1, 0]).unwrap();
        assert!(matches!(
            discrete_action(&l, &bad, CohomologyClass::ZERO, 0.0),
            Err(Error::DegenerateLoop(_))
        ));
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let l = mech(0.1);
        let lp = seed_loop(
            [1, 2],
            1.7,
            3,
            &LoopOptions {
                nodes: 10,
                jitter: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        let chain = Chain::for_loop(&l, 10, 1.7, [1, 2], CohomologyClass::new(0.2, 0.1), 0.3);
        let x: Vec<[f64; 2]> = lp.nodes().iter().map(|p| p.to_array()).collect();
        let mut h = BandedSpd::zeros(20, chain.bw);
        let (_, g) = chain.gradient(&x, Some(&mut h));
        let eps = 1e-6;
        for v in 0..10 {
            for c in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[v][c] += eps;
                xm[v][c] -= eps;
                let fd = (chain.value(&xp) - chain.value(&xm)) / (2.0 * eps);
                assert!((fd - g[v][c]).abs() < 1e-7, "grad {v} {c}");
                let gp = chain.gradient(&xp, None).1;
                let gm = chain.gradient(&xm, None).1;
                for w in 0..10 {
                    for d in 0..2 {
                        let fd2 = (gp[w][d] - gm[w][d]) / (2.0 * eps);
                        let pa = 2 * chain.position[v] + c;
                        let pb = 2 * chain.position[w] + d;
                        assert!((fd2 - h.get(pa, pb)).abs() < 1e-5, "hess ({v},{c}) ({w},{d})");
                    }
                }
            }
        }
    }

    #[test]
    fn open_curve_hessian_matches() {
        let l = mech(0.1);
        let chain = Chain::for_curve(&l, 6, 1.2, [0.1, 0.2], [0.9, 1.4], CohomologyClass::new(0.5, 0.0));
        let x: Vec<[f64; 2]> = (1..6)
            .map(|i| [0.1 + 0.13 * i as f64, 0.2 + 0.2 * i as f64 + 0.01 * (i * i) as f64])
            .collect();
        let mut h = BandedSpd::zeros(10, chain.bw);
        chain.gradient(&x, Some(&mut h));
        let eps = 1e-6;
        for v in 0..5 {
            for c in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[v][c] += eps;
                xm[v][c] -= eps;
                let gp = chain.gradient(&xp, None).1;
                let gm = chain.gradient(&xm, None).1;
                for w in 0..5 {
                    for d in 0..2 {
                        let fd2 = (gp[w][d] - gm[w][d]) / (2.0 * eps);
                        assert!((fd2 - h.get(2 * v + c, 2 * w + d)).abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn flat_fixed_period_minimizer_is_straight() {
        let l = flat();
        let m = minimize_loop(
            &l,
            [1, 0],
            CohomologyClass::ZERO,
            PeriodMode::Fixed(1.0),
            11,
            &LoopOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(m.action, 0.5, epsilon = 1e-12);
        assert!(m.grad_norm <= 1e-8);
        assert!(m.stationarity <= 1e-6);
        assert!(m.action <= m.seed_action);
        let y0 = m.lp.nodes()[0].x2;
        assert!(m.lp.nodes().iter().all(|p| (p.x2 - y0).abs() < 1e-9));
    }

    #[test]
    fn flat_free_period_has_no_interior_minimum_without_deformation() {
        let l = flat();
        let r = minimize_loop(
            &l,
            [1, 0],
            CohomologyClass::ZERO,
            PeriodMode::Free {
                k_offset: 0.0,
                t_min: 0.1,
                t_max: 50.0,
            },
            1,
            &LoopOptions::default(),
        );
        assert!(matches!(r, Err(Error::NoInteriorMinimum(_))));
        // with ω = (1,0) and α = ½, the minimum of A_{L−ω} + αT is at T = 1 with value 0
        let m = minimize_loop(
            &l,
            [1, 0],
            CohomologyClass::new(1.0, 0.0),
            PeriodMode::Free {
                k_offset: 0.5,
                t_min: 0.1,
                t_max: 50.0,
            },
            1,
            &LoopOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(m.lp.period(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.action, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mechanical_vertical_loop_near_flat() {
        let eps = 0.05;
        let l = mech(eps);
        let m = minimize_loop(
            &l,
            [0, 1],
            CohomologyClass::ZERO,
            PeriodMode::Fixed(1.0),
            5,
            &LoopOptions::default(),
        )
        .unwrap();
        assert!((m.action - 0.5).abs() <= 2.0 * eps);
        let x1 = m.lp.nodes()[0].x1;
        assert!(m.lp.nodes().iter().all(|p| (p.x1 - x1).abs() <= 0.1));
        assert!(m.action <= m.seed_action);
    }

    #[test]
    fn contractible_loop_collapses_to_maximum_of_potential() {
        let l = mech(0.05);
        let opts = LoopOptions {
            jitter: 0.05,
            ..Default::default()
        };
        let init = seed_loop_at([0, 0], 1.0, [0.02, -0.03], &mut ChaCha8Rng::seed_from_u64(1), &opts).unwrap();
        let m = minimize_loop_fixed(&l, &init, CohomologyClass::ZERO, 0.0, &opts).unwrap();
        assert!(m.collapsed);
        assert_abs_diff_eq!(m.action, -0.1, epsilon = 1e-9);
    }

    #[test]
    fn flat_potential_closed_form_and_constant_bound() {
        let l = flat();
        let x = TorusPoint::new(0.1, 0.2).unwrap();
        let y = TorusPoint::new(0.9, 0.5).unwrap();
        let p = action_potential(&l, &x, &y, 2.0, CohomologyClass::ZERO).unwrap();
        let d2 = 0.2f64.powi(2) + 0.3f64.powi(2);
        assert_abs_diff_eq!(p.value, d2 / 4.0, epsilon = 1e-10);
        assert_eq!(p.best.translate, [0, 0]);
        let m = mech(0.05);
        let q = action_potential(&m, &x, &x, 3.0, CohomologyClass::ZERO).unwrap();
        assert!(q.value <= 3.0 * m.lagrangian(x.to_array(), [0.0, 0.0]) + 1e-12);
    }

    #[test]
    fn potential_converges_at_second_order() {
        let l = TonelliLagrangian::two_well(0.2, 0.0).unwrap();
        let x = [0.1, 0.2];
        let y = [0.6, 0.9];
        let t = 1.5;
        let at = |npt: f64| {
            let o = PotentialOptions {
                nodes_per_time: npt,
                min_nodes: 4,
                ..Default::default()
            };
            action_potential_with(&l, x, y, t, CohomologyClass::ZERO, &o).unwrap().value
        };
        let (a, b, c) = (at(8.0), at(16.0), at(32.0));
        let ratio = (a - b) / (b - c);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn flat_barrier_on_diagonal_is_zero() {
        let l = flat();
        let x = TorusPoint::new(0.4, 0.7).unwrap();
        let grid = geometric_grid(5.0, 80.0, 16);
        let b = peierls_barrier(
            &l,
            &x,
            &x,
            CohomologyClass::ZERO,
            0.0,
            &grid,
            &PotentialOptions {
                nodes_per_time: 4.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(b.running_min, 0.0, epsilon = 1e-12);
        assert!(b.running_min_series.windows(2).all(|w| w[1] <= w[0]));
        let short = [1.0, 2.0];
        assert!(peierls_barrier(&l, &x, &x, CohomologyClass::ZERO, 0.0, &short, &PotentialOptions::default()).is_err());
    }

    #[test]
    fn flat_semistatic_segment() {
        let l = flat();
        let z0 = [0.1, 0.2, 0.0, 1.0];
        let seg = segment_from(&l, &z0, 1.0, 1e-3).unwrap();
        let r = semistatic_residual(&l, &seg, CohomologyClass::new(0.0, 1.0), 0.5, &PotentialOptions::default()).unwrap();
        assert!(r.residual.abs() <= 1e-6, "{r:?}");
    }

    #[test]
    fn wiggly_segment_is_not_semistatic() {
        // a pendulum-like oscillation in a deep well is far from minimizing at its own class
        let l = TonelliLagrangian::two_well(0.5, 0.0).unwrap();
        let z0 = [0.5, 0.5, 0.8, 0.3];
        let seg = segment_from(&l, &z0, 3.0, 1e-3).unwrap();
        let r = semistatic_residual(&l, &seg, CohomologyClass::ZERO, 1.0, &PotentialOptions::default()).unwrap();
        assert!(r.residual > 0.01, "{r:?}");
    }

    #[test]
    fn barrier_csv_columns() {
        let l = flat();
        let x = TorusPoint::new(0.4, 0.7).unwrap();
        let grid = geometric_grid(5.0, 20.0, 4);
        let b = peierls_barrier(
            &l,
            &x,
            &x,
            CohomologyClass::ZERO,
            0.0,
            &grid,
            &PotentialOptions {
                nodes_per_time: 2.0,
                ..Default::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_barrier_csv(&[b], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x1,x2,y1,y2,t,phi_plus_alpha_t,running_min\n"));
        assert_eq!(s.lines().count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn action_invariant_under_rotation(seed in 0u64..1000, shift in 0usize..16) {
            let l = mech(0.1);
            let lp = seed_loop([1, -1], 1.3, seed, &LoopOptions { nodes: 16, jitter: 0.1, ..Default::default() }).unwrap();
            let a = discrete_action(&l, &lp, CohomologyClass::new(0.1, 0.2), 0.3).unwrap();
            let b = discrete_action(&l, &lp.rotate(shift), CohomologyClass::new(0.1, 0.2), 0.3).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn omega_shortcut_matches_quadrature(seed in 0u64..1000, w1 in -2.0f64..2.0, w2 in -2.0f64..2.0) {
            let l = mech(0.1);
            let lp = seed_loop([2, 1], 0.9, seed, &LoopOptions { nodes: 12, jitter: 0.1, ..Default::default() }).unwrap();
            let w = CohomologyClass::new(w1, w2);
            let a = discrete_action(&l, &lp, w, 0.0).unwrap();
            let b = discrete_action_quadrature(&l, &lp, w, 0.0);
            prop_assert!((a - b).abs() <= 1e-10);
        }

        #[test]
        fn minimization_never_increases_action(seed in 0u64..200) {
            let l = mech(0.05);
            let opts = LoopOptions { nodes: 16, jitter: 0.1, ..Default::default() };
            let m = minimize_loop(&l, [1, 1], CohomologyClass::ZERO, PeriodMode::Fixed(1.2), seed, &opts).unwrap();
            prop_assert!(m.action <= m.seed_action + 1e-14);
        }

        #[test]
        fn resample_to_double_resolution_changes_action_at_second_order(seed in 0u64..100) {
            let l = mech(0.05);
            let opts = LoopOptions { nodes: 32, jitter: 0.0, ..Default::default() };
            let m = minimize_loop(&l, [0, 1], CohomologyClass::ZERO, PeriodMode::Fixed(1.0), seed, &opts).unwrap();
            let fine = torus::resample_loop(&m.lp, 64).unwrap();
            let a = discrete_action(&l, &fine, CohomologyClass::ZERO, 0.0).unwrap();
            // dt² bound on the quadrature drift of a smooth minimizer
            prop_assert!((a - m.action).abs() <= 10.0 * (1.0f64 / 32.0).powi(2));
        }

        #[test]
        fn subadditivity(x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, y1 in 0.0f64..1.0, y2 in 0.0f64..1.0, z1 in 0.0f64..1.0, z2 in 0.0f64..1.0) {
            let l = mech(0.05);
            let o = PotentialOptions { nodes_per_time: 32.0, ..Default::default() };
            let w = CohomologyClass::ZERO;
            let xy = action_potential_with(&l, [x1, x2], [y1, y2], 1.0, w, &o).unwrap().value;
            let yz = action_potential_with(&l, [y1, y2], [z1, z2], 1.5, w, &o).unwrap().value;
            let xz = action_potential_with(&l, [x1, x2], [z1, z2], 2.5, w, &PotentialOptions { nodes_per_time: 32.0, ..Default::default() }).unwrap().value;
            prop_assert!(xz <= xy + yz + 2e-3);
        }
    }
}
