//! Mather's β and α functions through periodic minimizers, the strict critical
//! value, the cohomology search for a prescribed energy and finite proxies of
//! Mather sets.
//!
//! Rational rotation vectors `h = (p, q)/n` are realized by loops of class
//! `(p, q)` and period `n`; `β(h)` is the best average action among them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, IntegrationOptions};
use crate::lagrangian::TonelliLagrangian;
use crate::orbits::{self, PeriodicOrbit, RefineOptions};
use crate::torus::{CohomologyClass, DiscreteLoop, LiftedPoint};
use crate::variational::{self, LoopMinimum, LoopOptions};

pub const DEFAULT_CRITICAL_MARGIN: f64 = 1e-3;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Deterministic per-task seed derived from a base seed and integer labels.
pub fn mix_seed(seed: u64, labels: &[i64]) -> u64 {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &x in labels {
        z = z.wrapping_add(x as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 31;
        z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 29;
    }
    z
}

/// Rotation vector `(p, q)/n` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalClass {
    pub p: i64,
    pub q: i64,
    pub n: i64,
}

impl RationalClass {
    pub fn new(p: i64, q: i64, n: i64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid(format!("denominator must be at least 1, got {n}")));
        }
        let g = gcd(gcd(p, q), n).max(1);
        Ok(Self {
            p: p / g,
            q: q / g,
            n: n / g,
        })
    }

    pub const ZERO: Self = Self { p: 0, q: 0, n: 1 };

    pub fn is_zero(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    pub fn value(&self) -> [f64; 2] {
        [self.p as f64 / self.n as f64, self.q as f64 / self.n as f64]
    }

    pub fn class(&self) -> [i64; 2] {
        [self.p, self.q]
    }

    pub fn norm(&self) -> f64 {
        let v = self.value();
        v[0].hypot(v[1])
    }
}

/// Reduced rational classes with numerators up to `max_num`, denominators up
/// to `max_den` and norm at most `max_norm`, sorted by denominator then value.
pub fn rational_grid(max_num: i64, max_den: i64, max_norm: f64) -> Vec<RationalClass> {
    let mut out: Vec<RationalClass> = Vec::new();
    for n in 1..=max_den.max(1) {
        for p in -max_num..=max_num {
            for q in -max_num..=max_num {
                let Ok(h) = RationalClass::new(p, q, n) else { continue };
                if h.n != n || h.norm() > max_norm + 1e-12 {
                    continue;
                }
                out.push(h);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaOptions {
    pub starts: usize,
    pub seed: u64,
    pub loop_options: LoopOptions,
    /// extra loop nodes per unit of winding and per unit of period
    pub nodes_per_unit: usize,
    /// grid resolution for the fixed-point search at `h = 0`
    pub fixed_point_grid: usize,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self {
            starts: 4,
            seed: 0,
            loop_options: LoopOptions::default(),
            nodes_per_unit: 16,
            fixed_point_grid: 128,
        }
    }
}

impl BetaOptions {
    fn loop_options_for(&self, class: [i64; 2], period: f64) -> LoopOptions {
        let winding = (class[0].unsigned_abs() + class[1].unsigned_abs()) as usize;
        let extra = self.nodes_per_unit * winding + (self.nodes_per_unit as f64 * period).ceil() as usize;
        LoopOptions {
            nodes: self.loop_options.nodes.max(extra),
            ..self.loop_options
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSample {
    pub class: RationalClass,
    pub h: [f64; 2],
    pub beta: f64,
    pub witness: DiscreteLoop,
    pub witness_period: f64,
    pub successful_starts: usize,
}

/// Best of several multistart minimizations at fixed class and period.
pub fn best_loop(
    l: &TonelliLagrangian,
    class: [i64; 2],
    period: f64,
    omega: CohomologyClass,
    seed: u64,
    starts: usize,
    opts: &LoopOptions,
) -> Result<(LoopMinimum, usize)> {
    let mut best: Option<LoopMinimum> = None;
    let mut ok = 0;
    let mut last_err = None;
    for i in 0..starts.max(1) {
        let s = mix_seed(seed, &[i as i64]);
        match variational::minimize_loop(l, class, omega, variational::PeriodMode::Fixed(period), s, opts) {
            Ok(m) => {
                ok += 1;
                if best.as_ref().is_none_or(|b| m.action < b.action) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(b) => Ok((b, ok)),
        None => Err(Error::Convergence {
            what: format!(
                "all {} starts for class {class:?} at period {period} ({})",
                starts.max(1),
                last_err.map(|e| e.to_string()).unwrap_or_default()
            ),
            iterations: starts,
            residual: f64::NAN,
        }),
    }
}

/// Location of the maximum of `U` by a grid scan polished with Newton steps.
pub fn potential_maximum(l: &TonelliLagrangian, grid: usize) -> ([f64; 2], f64) {
    let n = grid.max(4);
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let x = [i as f64 / n as f64, j as f64 / n as f64];
            let u = l.potential_value(x);
            if u > best.1 {
                best = (x, u);
            }
        }
    }
    let mut x = best.0;
    for _ in 0..20 {
        let jet = l.local(x).u;
        let h = jet.hess;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        // only polish at a nondegenerate maximum
        if !(h[0][0] < 0.0 && det > 0.0) {
            break;
        }
        let g = jet.grad;
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (-h[1][0] * g[0] + h[0][0] * g[1]) / det,
        ];
        let y = [x[0] - step[0], x[1] - step[1]];
        if l.potential_value(y) < l.potential_value(x) - 1e-15 {
            break;
        }
        x = y;
        if step[0].abs().max(step[1].abs()) < 1e-14 {
            break;
        }
    }
    let x = crate::torus::Lattice::UNIT.reduce(x);
    (x, l.potential_value(x))
}

fn beta_zero(l: &TonelliLagrangian, opts: &BetaOptions) -> Result<BetaSample> {
    let (x, _) = potential_maximum(l, opts.fixed_point_grid);
    let nodes = opts.loop_options.nodes;
    let constant = DiscreteLoop::straight(LiftedPoint::from_array(x), [0, 0], 1.0, nodes)?;
    let mut best_beta = variational::discrete_action(l, &constant, CohomologyClass::ZERO, 0.0)?;
    let mut witness = constant;
    let mut ok = 1;
    // contractible loops can beat fixed points when a magnetic term is present
    for (k, t) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let lo = opts.loop_options_for([0, 0], t);
        let lo = LoopOptions {
            jitter: lo.jitter.max(0.1),
            ..lo
        };
        let Ok((m, n_ok)) = best_loop(
            l,
            [0, 0],
            t,
            CohomologyClass::ZERO,
            mix_seed(opts.seed, &[0, 0, 0, k as i64]),
            opts.starts,
            &lo,
        ) else {
            continue;
        };
        ok += n_ok;
        let avg = m.action / t;
        if avg < best_beta - 1e-12 {
            best_beta = avg;
            witness = m.lp;
        }
    }
    Ok(BetaSample {
        class: RationalClass::ZERO,
        h: [0.0, 0.0],
        beta: best_beta,
        witness_period: witness.period(),
        witness,
        successful_starts: ok,
    })
}

/// `β(h)` at a rational rotation vector.
pub fn beta_at(l: &TonelliLagrangian, h: RationalClass, opts: &BetaOptions) -> Result<BetaSample> {
    let h = RationalClass::new(h.p, h.q, h.n)?;
    if h.is_zero() {
        return beta_zero(l, opts);
    }
    let period = h.n as f64;
    let lo = opts.loop_options_for(h.class(), period);
    let seed = mix_seed(opts.seed, &[h.p, h.q, h.n]);
    let (m, ok) = best_loop(l, h.class(), period, CohomologyClass::ZERO, seed, opts.starts, &lo)?;
    Ok(BetaSample {
        class: h,
        h: h.value(),
        beta: m.action / period,
        witness_period: period,
        witness: m.lp,
        successful_starts: ok,
    })
}

/// β on a list of classes; independent evaluations run on the rayon pool.
pub fn beta_grid(l: &TonelliLagrangian, grid: &[RationalClass], opts: &BetaOptions) -> Result<Vec<BetaSample>> {
    grid.par_iter().map(|h| beta_at(l, *h, opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub omega: CohomologyClass,
    pub alpha: f64,
    pub witness: DiscreteLoop,
    /// rotation vector of the witness
    pub witness_h: [f64; 2],
    /// value from the stored β samples alone
    pub grid_alpha: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaOptions {
    /// refine along the ray of the grid maximizer
    pub refine: bool,
    pub golden_iterations: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            refine: true,
            golden_iterations: 24,
        }
    }
}

/// Average `(L − ω)`-action of the class-`class` minimizer at period `t`,
/// warm-started from `warm`.
fn ray_average(
    l: &TonelliLagrangian,
    warm: &DiscreteLoop,
    t: f64,
    omega: CohomologyClass,
    opts: &LoopOptions,
) -> Result<(f64, DiscreteLoop)> {
    let start = warm.with_period(t)?;
    let m = variational::minimize_loop_fixed(l, &start, omega, 0.0, opts)?;
    Ok((m.action / t, m.lp))
}

/// Maximizes `−A_{L−ω}(T)/T` over `T ∈ [t0/2, 2 t0]` for a fixed class.
fn refine_along_ray(
    l: &TonelliLagrangian,
    witness: &DiscreteLoop,
    omega: CohomologyClass,
    beta: &BetaOptions,
    iters: usize,
) -> Result<(f64, DiscreteLoop)> {
    let t0 = witness.period();
    let lo = beta.loop_options_for(witness.class(), 2.0 * t0);
    let witness = variational::minimize_loop_fixed(l, &variational_resample(witness, lo.nodes)?, omega, 0.0, &lo)?.lp;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((0.5 * t0).ln(), (2.0 * t0).ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut wc) = ray_average(l, &witness, c.exp(), omega, &lo)?;
    let (mut fd, mut wd) = ray_average(l, &witness, d.exp(), omega, &lo)?;
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            wd = wc.clone();
            c = b - g * (b - a);
            (fc, wc) = ray_average(l, &wd, c.exp(), omega, &lo)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            wc = wd.clone();
            d = a + g * (b - a);
            (fd, wd) = ray_average(l, &wc, d.exp(), omega, &lo)?;
        }
    }
    Ok(if fc < fd { (-fc, wc) } else { (-fd, wd) })
}

fn variational_resample(lp: &DiscreteLoop, nodes: usize) -> Result<DiscreteLoop> {
    if lp.len() == nodes {
        Ok(lp.clone())
    } else {
        crate::torus::resample_loop(lp, nodes)
    }
}

/// `α(ω)` as the Fenchel conjugate of the stored β samples, optionally
/// sharpened along the ray of the grid maximizer.
pub fn alpha_at(
    l: &TonelliLagrangian,
    omega: CohomologyClass,
    samples: &[BetaSample],
    beta: &BetaOptions,
    opts: &AlphaOptions,
) -> Result<AlphaSample> {
    let best = samples
        .iter()
        .max_by(|a, b| {
            let fa = omega.apply(a.h) - a.beta;
            let fb = omega.apply(b.h) - b.beta;
            fa.total_cmp(&fb)
        })
        .ok_or_else(|| Error::InsufficientData("alpha needs at least one beta sample".into()))?;
    let grid_alpha = omega.apply(best.h) - best.beta;
    let mut out = AlphaSample {
        omega,
        alpha: grid_alpha,
        witness: best.witness.clone(),
        witness_h: best.h,
        grid_alpha,
        refined: false,
    };
    if opts.refine && !best.class.is_zero() {
        let (value, lp) = refine_along_ray(l, &best.witness, omega, beta, opts.golden_iterations)?;
        if value > out.alpha {
            out.alpha = value;
            out.witness_h = [lp.class()[0] as f64 / lp.period(), lp.class()[1] as f64 / lp.period()];
            out.witness = lp;
            out.refined = true;
        }
    }
    Ok(out)
}

/// Largest Fenchel-inequality violation `⟨ω,h⟩ − α − β(h)` over the samples.
pub fn fenchel_violation(alpha: &AlphaSample, samples: &[BetaSample]) -> f64 {
    samples
        .iter()
        .map(|s| alpha.omega.apply(s.h) - alpha.alpha - s.beta)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub beta_zero: BetaSample,
    /// smallest sampled α over the cross-check grid
    pub alpha_min: f64,
    pub alpha_argmin: CohomologyClass,
    pub gap: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalOptions {
    pub beta: BetaOptions,
    /// β grid used by the α cross-check
    pub max_num: i64,
    pub max_den: i64,
    pub omega_grid: Vec<[f64; 2]>,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        let mut omega_grid = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                omega_grid.push([0.25 * i as f64, 0.25 * j as f64]);
            }
        }
        Self {
            beta: BetaOptions::default(),
            max_num: 2,
            max_den: 2,
            omega_grid,
        }
    }
}

/// `c₀ = −β(0)`, cross-checked against the smallest α on an ω grid.
pub fn critical_value(l: &TonelliLagrangian, opts: &CriticalOptions) -> Result<CriticalValue> {
    let b0 = beta_at(l, RationalClass::ZERO, &opts.beta)?;
    let value = -b0.beta;
    let grid = rational_grid(opts.max_num, opts.max_den, f64::INFINITY);
    let samples = beta_grid(l, &grid, &opts.beta)?;
    let no_refine = AlphaOptions {
        refine: false,
        ..AlphaOptions::default()
    };
    let mut alpha_min = f64::INFINITY;
    let mut alpha_argmin = CohomologyClass::ZERO;
    for w in &opts.omega_grid {
        let omega = CohomologyClass::new(w[0], w[1]);
        let a = alpha_at(l, omega, &samples, &opts.beta, &no_refine)?;
        if a.alpha < alpha_min {
            alpha_min = a.alpha;
            alpha_argmin = omega;
        }
    }
    let gap = (alpha_min - value).abs();
    let warning = (gap > 1e-2).then(|| format!("-beta(0) = {value:.6} and min alpha = {alpha_min:.6} disagree by {gap:.3e}"));
    Ok(CriticalValue {
        value,
        beta_zero: b0,
        alpha_min,
        alpha_argmin,
        gap,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub lambda: f64,
    pub energy: f64,
    pub average_action: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OmegaOptions {
    pub margin: f64,
    /// scan range for `λ`; chosen from the energy when absent
    #[serde(default)]
    pub lambda_range: Option<[f64; 2]>,
    pub scan_points: usize,
    pub beta: BetaOptions,
    pub refine: RefineOptions,
    /// multiple of the class used in the transverse stencil
    pub stencil_multiple: i64,
    pub validation_max_num: i64,
    pub validation_max_den: i64,
    pub validation_tol: f64,
    pub proxy: ProxyOptions,
    /// skip the proxy when false
    pub with_proxy: bool,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self {
            margin: DEFAULT_CRITICAL_MARGIN,
            lambda_range: None,
            scan_points: 16,
            beta: BetaOptions::default(),
            refine: RefineOptions::default(),
            stencil_multiple: 4,
            validation_max_num: 2,
            validation_max_den: 2,
            validation_tol: 1e-3,
            proxy: ProxyOptions::default(),
            with_proxy: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaResult {
    pub energy: f64,
    pub critical: f64,
    pub h0: [i64; 2],
    pub omega: CohomologyClass,
    pub lambda0: f64,
    /// all sign changes of `E(λ) − c` seen in the scan
    pub brackets: Vec<[f64; 2]>,
    pub scan: Vec<EnergySample>,
    pub witness: DiscreteLoop,
    pub orbit: PeriodicOrbit,
    /// `⟨ω₀, h₀⟩` and `⟨ω₀, h₀^⊥⟩`
    pub pairing: [f64; 2],
    pub alpha_check: AlphaSample,
    pub validation_gap: f64,
    pub proxy: Option<MatherSetProxy>,
}

/// Finds `λ₀` and `ω₀` with `α(ω₀) = c` and rotation `λ₀ h₀` for the minimizers.
pub fn omega_for_energy(l: &TonelliLagrangian, c: f64, h0: [i64; 2], critical: f64, opts: &OmegaOptions) -> Result<OmegaResult> {
    if h0 == [0, 0] {
        return Err(Error::invalid("h0 must be non-zero"));
    }
    if !(c > critical + opts.margin) {
        return Err(Error::BelowCritical {
            energy: c,
            critical,
            margin: opts.margin,
        });
    }
    let hn = ((h0[0] * h0[0] + h0[1] * h0[1]) as f64).sqrt();
    let [lam_lo, lam_hi] = opts.lambda_range.unwrap_or_else(|| {
        let guess = (2.0 * c).sqrt() / hn;
        [0.25 * guess, 4.0 * guess]
    });
    if !(lam_lo > 0.0 && lam_hi > lam_lo) {
        return Err(Error::invalid("lambda range must satisfy 0 < lo < hi"));
    }
    let n = opts.scan_points.max(2);
    let ratio = (lam_hi / lam_lo).powf(1.0 / (n - 1) as f64);
    let lambdas: Vec<f64> = (0..n).map(|i| lam_lo * ratio.powi(i as i32)).collect();
    let evals: Vec<Result<LoopMinimum>> = lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lam)| {
            let t = 1.0 / lam;
            let lo = opts.beta.loop_options_for(h0, t);
            best_loop(
                l,
                h0,
                t,
                CohomologyClass::ZERO,
                mix_seed(opts.beta.seed, &[h0[0], h0[1], i as i64]),
                opts.beta.starts,
                &lo,
            )
            .map(|r| r.0)
        })
        .collect();
    let mut scan = Vec::new();
    let mut loops = Vec::new();
    for (lam, m) in lambdas.iter().zip(evals) {
        let m = m?;
        scan.push(EnergySample {
            lambda: *lam,
            energy: m.mean_energy,
            average_action: m.action * lam,
        });
        loops.push(m.lp);
    }
    let mut brackets = Vec::new();
    for i in 1..scan.len() {
        let a = scan[i - 1].energy - c;
        let b = scan[i].energy - c;
        if (a < 0.0) != (b < 0.0) {
            brackets.push([scan[i - 1].lambda, scan[i].lambda]);
        }
    }
    let bracket_err = |msg: &str| Error::Bracketing {
        message: msg.to_string(),
        samples: scan.iter().map(|s| (s.lambda, s.energy)).collect(),
    };
    let Some(first) = brackets.first().copied() else {
        return Err(bracket_err("minimizer energy never crosses the target on the lambda scan"));
    };
    let idx = scan.iter().position(|s| s.lambda == first[0]).unwrap_or(0);
    if scan[idx].energy > c {
        return Err(bracket_err("minimizer energy decreases through the target; not monotone"));
    }
    // Illinois iteration on λ with warm starts
    let (mut a, mut b) = (first[0], first[1]);
    let (mut fa, mut fb) = (scan[idx].energy - c, scan[idx + 1].energy - c);
    let mut warm = loops[idx].clone();
    let lo = opts.beta.loop_options_for(h0, 1.0 / a);
    warm = variational_resample(&warm, lo.nodes)?;
    let mut side = 0;
    let mut witness = warm.clone();
    for _ in 0..60 {
        let lam = (a * fb - b * fa) / (fb - fa);
        let m = variational::minimize_loop_fixed(l, &warm.with_period(1.0 / lam)?, CohomologyClass::ZERO, 0.0, &lo)?;
        let f = m.mean_energy - c;
        warm = m.lp.clone();
        witness = m.lp;
        if f.abs() <= 1e-11 || (b - a) <= 1e-13 * b {
            break;
        }
        if f < 0.0 {
            a = lam;
            fa = f;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = lam;
            fb = f;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let refine = RefineOptions {
        energy: Some(c),
        ..opts.refine
    };
    let orbit = orbits::refine_orbit(l, &witness, &refine)?;
    let period = orbit.period;
    let lambda0 = 1.0 / period;

    // ⟨ω₀,h₀⟩ = A_L(γ) + c T along the refined orbit
    let traj = flow::integrate_lifted(l, &orbit.seed_lift, period, &IntegrationOptions::with_dt(orbit.dt))?;
    let action = variational::trajectory_action(l, &traj, CohomologyClass::ZERO, 0.0)?;
    let along = action + c * period;
    let perp = [-h0[1], h0[0]];
    let m = opts.stencil_multiple.max(1);
    let stencil = |sign: i64| -> Result<f64> {
        let class = [m * h0[0] + sign * perp[0], m * h0[1] + sign * perp[1]];
        let t = m as f64 * period;
        let lo = opts.beta.loop_options_for(class, t);
        let seed = mix_seed(opts.beta.seed, &[class[0], class[1], 7]);
        Ok(best_loop(l, class, t, CohomologyClass::ZERO, seed, opts.beta.starts, &lo)?
            .0
            .action)
    };
    let across = 0.5 * (stencil(1)? - stencil(-1)?);
    let h2 = hn * hn;
    let omega = CohomologyClass::new(
        (along * h0[0] as f64 + across * perp[0] as f64) / h2,
        (along * h0[1] as f64 + across * perp[1] as f64) / h2,
    );

    // α(ω₀) from a small β grid plus the witness ray
    let grid = rational_grid(opts.validation_max_num, opts.validation_max_den, f64::INFINITY);
    let mut samples = beta_grid(l, &grid, &opts.beta)?;
    samples.push(BetaSample {
        class: RationalClass {
            p: h0[0],
            q: h0[1],
            n: 0,
        },
        h: [h0[0] as f64 / period, h0[1] as f64 / period],
        beta: action / period,
        witness: witness.clone(),
        witness_period: period,
        successful_starts: 1,
    });
    let alpha_check = alpha_at(l, omega, &samples, &opts.beta, &AlphaOptions::default())?;
    let validation_gap = (alpha_check.alpha - c).abs();
    if validation_gap > opts.validation_tol {
        log::warn!("alpha validation gap {validation_gap:.3e} exceeds {}", opts.validation_tol);
    }
    let proxy = if opts.with_proxy {
        Some(mather_set_proxy(l, omega, c, h0, period, &opts.proxy)?)
    } else {
        None
    };
    Ok(OmegaResult {
        energy: c,
        critical,
        h0,
        omega,
        lambda0,
        brackets,
        scan,
        witness,
        orbit,
        pairing: [along, across],
        alpha_check,
        validation_gap,
        proxy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyOptions {
    pub starts: usize,
    pub seed: u64,
    pub cluster_tol: f64,
    pub action_tol: f64,
    pub loop_options: LoopOptions,
    pub refine: RefineOptions,
}

impl Default for ProxyOptions {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            cluster_tol: 1e-3,
            action_tol: 1e-6,
            loop_options: LoopOptions {
                jitter: 0.1,
                ..LoopOptions::default()
            },
            refine: RefineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProxyStatus {
    Finite,
    /// a continuum of minimizers; no finite list is reported
    NonIsolatedFamily {
        clusters: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCluster {
    pub average_action: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatherSetProxy {
    pub omega: CohomologyClass,
    pub energy: f64,
    pub class: [i64; 2],
    pub period: f64,
    pub status: ProxyStatus,
    pub clusters: usize,
    pub orbits: Vec<PeriodicOrbit>,
    /// average `(L − ω)`-action per orbit
    pub average_actions: Vec<f64>,
    pub energies: Vec<f64>,
    /// `|x(T) − x(0) − [γ]|` per orbit
    pub rotation_residuals: Vec<f64>,
    /// `[γ] = n₀ h₀` multiplicities
    pub multiplicities: Vec<i64>,
    /// `min |ρ|` and `max |ρ|` over the members, `None` when there are none
    pub rotation_bounds: Option<[f64; 2]>,
    /// smallest pairwise distance between member projections
    pub min_separation: Option<f64>,
    pub dropped: Vec<DroppedCluster>,
}

impl MatherSetProxy {
    pub fn count(&self) -> usize {
        self.orbits.len()
    }

    pub fn all_hyperbolic(&self) -> bool {
        !self.orbits.is_empty() && self.orbits.iter().all(|o| o.stability == orbits::Stability::Hyperbolic)
    }
}

/// Symmetric Hausdorff distance between two closed polylines modulo ℤ².
pub fn loop_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
    fn one_sided(a: &DiscreteLoop, b: &DiscreteLoop) -> f64 {
        let lattice = crate::torus::Lattice::UNIT;
        let mut worst: f64 = 0.0;
        for i in 0..a.len() {
            let p = a.node(i);
            let mut best = f64::INFINITY;
            for j in 0..b.len() {
                let q0 = b.node(j);
                let q1 = b.node(j + 1);
                let d = lattice.delta(q0, p);
                let pp = [q0[0] + d[0], q0[1] + d[1]];
                let ab = [q1[0] - q0[0], q1[1] - q0[1]];
                let ap = [pp[0] - q0[0], pp[1] - q0[1]];
                let den = ab[0] * ab[0] + ab[1] * ab[1];
                let t = if den > 0.0 {
                    ((ab[0] * ap[0] + ab[1] * ap[1]) / den).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                best = best.min((ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1]));
            }
            worst = worst.max(best);
        }
        worst
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// Finite list of minimizing periodic orbits at a cohomology class and energy.
pub fn mather_set_proxy(
    l: &TonelliLagrangian,
    omega: CohomologyClass,
    energy: f64,
    class: [i64; 2],
    period: f64,
    opts: &ProxyOptions,
) -> Result<MatherSetProxy> {
    let lo = LoopOptions {
        nodes: opts
            .loop_options
            .nodes
            .max(16 * (class[0].unsigned_abs() + class[1].unsigned_abs()) as usize + (16.0 * period).ceil() as usize),
        ..opts.loop_options
    };
    let runs: Vec<Result<LoopMinimum>> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|i| {
            let seed = mix_seed(opts.seed, &[class[0], class[1], i as i64, 11]);
            variational::minimize_loop(l, class, omega, variational::PeriodMode::Fixed(period), seed, &lo)
        })
        .collect();
    let mut clusters: Vec<(f64, DiscreteLoop)> = Vec::new();
    for m in runs.into_iter().flatten() {
        let avg = m.action / period;
        match clusters
            .iter_mut()
            .find(|(_, rep)| loop_distance(rep, &m.lp) <= opts.cluster_tol)
        {
            Some(c) => {
                if avg < c.0 {
                    *c = (avg, m.lp);
                }
            }
            None => clusters.push((avg, m.lp)),
        }
    }
    if clusters.is_empty() {
        return Err(Error::Convergence {
            what: "Mather set proxy multistart".into(),
            iterations: opts.starts,
            residual: f64::NAN,
        });
    }
    let best = clusters.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (avg, lp) in clusters.iter() {
        if *avg > best + opts.action_tol {
            dropped.push(DroppedCluster {
                average_action: *avg,
                reason: format!("loop average action exceeds the minimum by {:.3e}", avg - best),
            });
        } else {
            kept.push(lp.clone());
        }
    }
    let mut proxy = MatherSetProxy {
        omega,
        energy,
        class,
        period,
        status: ProxyStatus::Finite,
        clusters: clusters.len(),
        orbits: Vec::new(),
        average_actions: Vec::new(),
        energies: Vec::new(),
        rotation_residuals: Vec::new(),
        multiplicities: Vec::new(),
        rotation_bounds: None,
        min_separation: None,
        dropped,
    };
    if kept.len() > 2.max(opts.starts / 4) {
        proxy.status = ProxyStatus::NonIsolatedFamily { clusters: kept.len() };
        return Ok(proxy);
    }
    let refine = RefineOptions {
        energy: Some(energy),
        ..opts.refine
    };
    let mut found: Vec<(f64, PeriodicOrbit)> = Vec::new();
    for lp in &kept {
        let orbit = orbits::refine_orbit(l, lp, &refine)?;
        let traj = flow::integrate_lifted(l, &orbit.seed_lift, orbit.period, &IntegrationOptions::with_dt(orbit.dt))?;
        let avg = variational::trajectory_action(l, &traj, omega, 0.0)? / orbit.period;
        let duplicate = found.iter().any(|(_, o)| {
            o.separation(l, &orbit, crate::torus::Lattice::UNIT)
                .map(|d| d < opts.cluster_tol)
                .unwrap_or(false)
        });
        if !duplicate {
            found.push((avg, orbit));
        }
    }
    let best = found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    for (avg, orbit) in found {
        if avg > best + opts.action_tol {
            proxy.dropped.push(DroppedCluster {
                average_action: avg,
                reason: format!("orbit average action exceeds the minimum by {:.3e}", avg - best),
            });
            continue;
        }
        let h2 = class[0] * class[0] + class[1] * class[1];
        let dotp = orbit.class[0] * class[0] + orbit.class[1] * class[1];
        proxy.multiplicities.push(if h2 > 0 { dotp / h2 } else { 0 });
        proxy.energies.push(orbit.energy);
        proxy.rotation_residuals.push(orbit.closure_residual);
        proxy.average_actions.push(avg);
        proxy.orbits.push(orbit);
    }
    let norms: Vec<f64> = proxy
        .orbits
        .iter()
        .map(|o| {
            let r = o.rotation_vector();
            r[0].hypot(r[1])
        })
        .collect();
    if !norms.is_empty() {
        proxy.rotation_bounds = Some([
            norms.iter().copied().fold(f64::INFINITY, f64::min),
            norms.iter().copied().fold(0.0, f64::max),
        ]);
    }
    let mut sep: Option<f64> = None;
    for i in 0..proxy.orbits.len() {
        for j in i + 1..proxy.orbits.len() {
            let d = proxy.orbits[i].separation(l, &proxy.orbits[j], crate::torus::Lattice::UNIT)?;
            sep = Some(sep.map_or(d, |s| s.min(d)));
        }
    }
    proxy.min_separation = sep;
    Ok(proxy)
}

pub fn write_beta_csv<W: Write>(samples: &[BetaSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h1", "h2", "beta", "T_witness"]).map_err(flow::csv_err)?;
    for s in samples {
        w.write_record([
            format!("{:.17e}", s.h[0]),
            format!("{:.17e}", s.h[1]),
            format!("{:.17e}", s.beta),
            format!("{:.17e}", s.witness_period),
        ])
        .map_err(flow::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_alpha_csv<W: Write>(samples: &[AlphaSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["w1", "w2", "alpha"]).map_err(flow::csv_err)?;
    for s in samples {
        w.write_record([
            format!("{:.17e}", s.omega.w1),
            format!("{:.17e}", s.omega.w2),
            format!("{:.17e}", s.alpha),
        ])
        .map_err(flow::csv_err)?;
    }
    w.flush()?;
    Ok(())
}
