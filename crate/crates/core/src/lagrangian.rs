//! Quadratic-in-velocity Tonelli Lagrangians on 𝕋²
//!
//! `L(x,v) = ½ vᵀG(x)v + A(x)·v − U(x)` with `G`, `A` and `U` given by
//! truncated Fourier series. The four families only differ in which tables
//! may be non-trivial.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, Jet2};
use crate::linalg::{self, Mat2, ZERO2};
use crate::torus::{CotangentState, TangentState};

pub const DEFAULT_MAX_HARMONIC: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    FlatKinetic,
    Mechanical,
    Magnetic,
    CustomFourier,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::FlatKinetic => "flat-kinetic",
            Family::Mechanical => "mechanical",
            Family::Magnetic => "magnetic",
            Family::CustomFourier => "custom-fourier",
        }
    }
}

/// Metric coefficients `g11, g12, g22`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSeries {
    pub g11: FourierSeries,
    #[serde(default)]
    pub g12: FourierSeries,
    pub g22: FourierSeries,
}

impl MetricSeries {
    pub fn euclidean() -> Self {
        Self {
            g11: FourierSeries::constant(1.0),
            g12: FourierSeries::zero(),
            g22: FourierSeries::constant(1.0),
        }
    }

    pub fn constant(g: Mat2) -> Self {
        Self {
            g11: FourierSeries::constant(g[0][0]),
            g12: FourierSeries::constant(g[0][1]),
            g22: FourierSeries::constant(g[1][1]),
        }
    }

    fn entries(&self) -> [&FourierSeries; 3] {
        [&self.g11, &self.g12, &self.g22]
    }

    pub fn is_constant(&self) -> bool {
        self.entries().iter().all(|s| s.is_constant())
    }

    pub fn is_euclidean(&self) -> bool {
        self.is_constant() && self.g11.mean() == 1.0 && self.g12.mean() == 0.0 && self.g22.mean() == 1.0
    }
}

/// Pointwise coefficient data at a configuration `x` (second-order jets).
#[derive(Debug, Clone, Copy)]
pub struct LocalData {
    pub g: Mat2,
    /// `dg[k] = ∂G/∂x_k`
    pub dg: [Mat2; 2],
    /// `d2g[k][l] = ∂²G/∂x_k∂x_l`
    pub d2g: [[Mat2; 2]; 2],
    pub u: Jet2,
    /// `a[i]` is the jet of the component `A_i`
    pub a: [Jet2; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonelliLagrangian {
    family: Family,
    metric: MetricSeries,
    potential: FourierSeries,
    magnetic: [FourierSeries; 2],
    max_harmonic: u32,
    #[serde(skip)]
    constant_metric: bool,
}

fn split_jet(j: Jet2) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    (j.value, j.grad, j.hess)
}

impl TonelliLagrangian {
    /// General constructor; checks that the family tag matches the data.
    pub fn new(
        family: Family,
        metric: MetricSeries,
        potential: FourierSeries,
        magnetic: [FourierSeries; 2],
        max_harmonic: u32,
    ) -> Result<Self> {
        for s in metric.entries().into_iter().chain([&potential, &magnetic[0], &magnetic[1]]) {
            s.check()?;
            if s.max_harmonic() > max_harmonic {
                return Err(Error::invalid(format!(
                    "harmonic {} exceeds the configured maximum {max_harmonic}",
                    s.max_harmonic()
                )));
            }
        }
        let magnetic_trivial = magnetic.iter().all(|a| a.is_constant() && a.mean() == 0.0);
        match family {
            Family::FlatKinetic => {
                if !metric.is_euclidean() || !potential.is_constant() || !magnetic_trivial {
                    return Err(Error::invalid("flat-kinetic family admits only a constant potential"));
                }
            }
            Family::Mechanical => {
                if !metric.is_euclidean() || !magnetic_trivial {
                    return Err(Error::invalid("mechanical family has Euclidean metric and no magnetic term"));
                }
            }
            Family::Magnetic => {
                if !metric.is_euclidean() {
                    return Err(Error::invalid("magnetic family has Euclidean metric"));
                }
            }
            Family::CustomFourier => {}
        }
        let constant_metric = metric.is_constant();
        Ok(Self {
            family,
            metric,
            potential,
            magnetic,
            max_harmonic,
            constant_metric,
        })
    }

    pub fn flat_kinetic() -> Self {
        Self::new(
            Family::FlatKinetic,
            MetricSeries::euclidean(),
            FourierSeries::zero(),
            [FourierSeries::zero(), FourierSeries::zero()],
            DEFAULT_MAX_HARMONIC,
        )
        .expect("flat data is valid")
    }

    pub fn mechanical(potential: FourierSeries) -> Result<Self> {
        Self::new(
            Family::Mechanical,
            MetricSeries::euclidean(),
            potential,
            [FourierSeries::zero(), FourierSeries::zero()],
            DEFAULT_MAX_HARMONIC,
        )
    }

    pub fn magnetic(magnetic: [FourierSeries; 2], potential: FourierSeries) -> Result<Self> {
        Self::new(
            Family::Magnetic,
            MetricSeries::euclidean(),
            potential,
            magnetic,
            DEFAULT_MAX_HARMONIC,
        )
    }

    pub fn custom(metric: MetricSeries, potential: FourierSeries, magnetic: [FourierSeries; 2]) -> Result<Self> {
        Self::new(Family::CustomFourier, metric, potential, magnetic, DEFAULT_MAX_HARMONIC)
    }

    /// `U = eps (cos 2πx1 + cos 2πx2) + coupling · sin 2πx1 sin 2πx2`.
    pub fn two_well(eps: f64, coupling: f64) -> Result<Self> {
        use crate::fourier::FourierTerm;
        let mut terms = vec![FourierTerm::cos(1, 0, eps), FourierTerm::cos(0, 1, eps)];
        if coupling != 0.0 {
            // sin a sin b = ½ cos(a−b) − ½ cos(a+b)
            terms.push(FourierTerm::cos(1, -1, 0.5 * coupling));
            terms.push(FourierTerm::cos(1, 1, -0.5 * coupling));
        }
        Self::mechanical(FourierSeries::new(0.0, terms)?)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn metric(&self) -> &MetricSeries {
        &self.metric
    }

    pub fn potential(&self) -> &FourierSeries {
        &self.potential
    }

    pub fn magnetic_form(&self) -> &[FourierSeries; 2] {
        &self.magnetic
    }

    pub fn max_harmonic(&self) -> u32 {
        self.max_harmonic
    }

    pub fn has_constant_metric(&self) -> bool {
        self.constant_metric || self.metric.is_constant()
    }

    /// The same Lagrangian with `U` replaced by `U + k` (so `L` shifts by `−k`).
    pub fn with_potential_shift(&self, k: f64) -> Self {
        let mut l = self.clone();
        l.potential = l.potential.shifted(k);
        l
    }

    pub fn local(&self, x: [f64; 2]) -> LocalData {
        let mut g = ZERO2;
        let mut dg = [ZERO2; 2];
        let mut d2g = [[ZERO2; 2]; 2];
        if self.has_constant_metric() {
            g = [
                [self.metric.g11.mean(), self.metric.g12.mean()],
                [self.metric.g12.mean(), self.metric.g22.mean()],
            ];
        } else {
            let idx = [(0usize, 0usize), (0, 1), (1, 1)];
            for (s, &(i, j)) in self.metric.entries().iter().zip(idx.iter()) {
                let (v, gr, h) = split_jet(s.jet(x));
                g[i][j] = v;
                g[j][i] = v;
                for k in 0..2 {
                    dg[k][i][j] = gr[k];
                    dg[k][j][i] = gr[k];
                    for l in 0..2 {
                        d2g[k][l][i][j] = h[k][l];
                        d2g[k][l][j][i] = h[k][l];
                    }
                }
            }
        }
        LocalData {
            g,
            dg,
            d2g,
            u: self.potential.jet(x),
            a: [self.magnetic[0].jet(x), self.magnetic[1].jet(x)],
        }
    }

    pub fn potential_value(&self, x: [f64; 2]) -> f64 {
        self.potential.value(x)
    }

    pub fn metric_at(&self, x: [f64; 2]) -> Mat2 {
        self.local(x).g
    }

    pub fn lagrangian(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        lagrangian_local(&self.local(x), v)
    }

    pub fn energy_at(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        energy_local(&self.local(x), v)
    }

    /// `∂L/∂v = G v + A`.
    pub fn momentum(&self, x: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        momentum_local(&self.local(x), v)
    }

    pub fn dl_dx(&self, x: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        dl_dx_local(&self.local(x), v)
    }

    pub fn d2l_dv2(&self, x: [f64; 2]) -> Mat2 {
        self.local(x).g
    }

    /// `M[i][j] = ∂²L/∂v_i∂x_j`.
    pub fn d2l_dvdx(&self, x: [f64; 2], v: [f64; 2]) -> Mat2 {
        d2l_dvdx_local(&self.local(x), v)
    }

    /// `∂²L/∂x_i∂x_j`.
    pub fn d2l_dx2(&self, x: [f64; 2], v: [f64; 2]) -> Mat2 {
        d2l_dx2_local(&self.local(x), v)
    }

    /// Velocity with `∂L/∂v(x, v) = p`, by damped Newton from `v = p`.
    pub fn velocity_for_momentum(&self, x: [f64; 2], p: [f64; 2]) -> Result<[f64; 2]> {
        const MAX_ITER: usize = 50;
        const TOL: f64 = 1e-12;
        let loc = self.local(x);
        let residual = |v: [f64; 2]| {
            let q = momentum_local(&loc, v);
            [q[0] - p[0], q[1] - p[1]]
        };
        let mut v = p;
        let mut r = residual(v);
        let mut rn = linalg::norm2(r);
        for _ in 0..MAX_ITER {
            if rn <= TOL * (1.0 + linalg::norm2(p)) {
                return Ok(v);
            }
            let step = linalg::solve2(&loc.g, r).ok_or(Error::IllConditioned(f64::INFINITY))?;
            let mut damping = 1.0;
            loop {
                let trial = [v[0] - damping * step[0], v[1] - damping * step[1]];
                let rt = residual(trial);
                let rtn = linalg::norm2(rt);
                if rtn < rn || damping < 1e-10 {
                    v = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                damping *= 0.5;
            }
        }
        if rn <= TOL * (1.0 + linalg::norm2(p)) {
            return Ok(v);
        }
        Err(Error::Convergence {
            what: "inverse Legendre transform".into(),
            iterations: MAX_ITER,
            residual: rn,
        })
    }
}

pub fn lagrangian_local(d: &LocalData, v: [f64; 2]) -> f64 {
    let gv = linalg::mul2v(&d.g, v);
    0.5 * linalg::dot2(v, gv) + d.a[0].value * v[0] + d.a[1].value * v[1] - d.u.value
}

pub fn energy_local(d: &LocalData, v: [f64; 2]) -> f64 {
    let gv = linalg::mul2v(&d.g, v);
    0.5 * linalg::dot2(v, gv) + d.u.value
}

pub fn momentum_local(d: &LocalData, v: [f64; 2]) -> [f64; 2] {
    let gv = linalg::mul2v(&d.g, v);
    [gv[0] + d.a[0].value, gv[1] + d.a[1].value]
}

pub fn dl_dx_local(d: &LocalData, v: [f64; 2]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let dgv = linalg::mul2v(&d.dg[i], v);
        *o = 0.5 * linalg::dot2(v, dgv) + d.a[0].grad[i] * v[0] + d.a[1].grad[i] * v[1] - d.u.grad[i];
    }
    out
}

pub fn d2l_dvdx_local(d: &LocalData, v: [f64; 2]) -> Mat2 {
    let mut m = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = d.dg[j][i][0] * v[0] + d.dg[j][i][1] * v[1] + d.a[i].grad[j];
        }
    }
    m
}

pub fn d2l_dx2_local(d: &LocalData, v: [f64; 2]) -> Mat2 {
    let mut m = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            let hv = linalg::mul2v(&d.d2g[i][j], v);
            m[i][j] = 0.5 * linalg::dot2(v, hv) + d.a[0].hess[i][j] * v[0] + d.a[1].hess[i][j] * v[1] - d.u.hess[i][j];
        }
    }
    m
}

fn check_state(s: &TangentState) -> Result<()> {
    if !(s.v1.is_finite() && s.v2.is_finite() && s.point.x1().is_finite() && s.point.x2().is_finite()) {
        return Err(Error::invalid("non-finite tangent state"));
    }
    Ok(())
}

pub fn eval_l(l: &TonelliLagrangian, s: &TangentState) -> Result<f64> {
    check_state(s)?;
    Ok(l.lagrangian(s.x(), s.v()))
}

/// `E(x,v) = ⟨∂L/∂v, v⟩ − L(x,v)`, composed from the evaluators.
pub fn energy(l: &TonelliLagrangian, s: &TangentState) -> Result<f64> {
    check_state(s)?;
    let p = l.momentum(s.x(), s.v());
    Ok(linalg::dot2(p, s.v()) - l.lagrangian(s.x(), s.v()))
}

pub fn legendre(l: &TonelliLagrangian, s: &TangentState) -> Result<CotangentState> {
    check_state(s)?;
    let p = l.momentum(s.x(), s.v());
    Ok(CotangentState {
        point: s.point,
        p1: p[0],
        p2: p[1],
    })
}

pub fn inverse_legendre(l: &TonelliLagrangian, c: &CotangentState) -> Result<TangentState> {
    if !(c.p1.is_finite() && c.p2.is_finite()) {
        return Err(Error::invalid("non-finite cotangent state"));
    }
    let v = l.velocity_for_momentum(c.x(), c.p())?;
    Ok(TangentState {
        point: c.point,
        v1: v[0],
        v2: v[1],
    })
}

/// `H(x,p) = p(v*) − L(x,v*)` with `v*` the inverse Legendre image.
pub fn hamiltonian(l: &TonelliLagrangian, c: &CotangentState) -> Result<f64> {
    let s = inverse_legendre(l, c)?;
    Ok(linalg::dot2(c.p(), s.v()) - l.lagrangian(c.x(), s.v()))
}

/// Sample points and speeds for [`validate_tonelli`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationGrid {
    /// base points per side
    pub points_per_side: usize,
    pub speed_levels: usize,
    pub speed_cap: f64,
    pub directions: usize,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self {
            points_per_side: 32,
            speed_levels: 8,
            speed_cap: 20.0,
            directions: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub family: Family,
    pub min_hessian_eigenvalue: f64,
    pub max_hessian_condition: f64,
    /// `min over x, directions of L(x, s·u)/s` at each sampled speed `s`
    pub superlinearity: Vec<(f64, f64)>,
    pub superlinear_trend_increasing: bool,
    pub max_derivative_mismatch: f64,
    pub passed: bool,
}

fn relative_mismatch(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / (1.0 + analytic.abs())
}

/// Grid certification of convexity, superlinearity and derivative consistency.
pub fn validate_tonelli(l: &TonelliLagrangian, grid: &ValidationGrid) -> Result<ValidationReport> {
    if grid.points_per_side < 32 || grid.speed_levels < 8 {
        return Err(Error::invalid("validation grid needs at least 32² points and 8 speed levels"));
    }
    if !(grid.speed_cap > 0.0) || grid.directions == 0 {
        return Err(Error::invalid("validation grid needs a positive speed cap and directions"));
    }
    let n = grid.points_per_side;
    let speeds: Vec<f64> = (1..=grid.speed_levels)
        .map(|k| grid.speed_cap * k as f64 / grid.speed_levels as f64)
        .collect();
    let dirs: Vec<[f64; 2]> = (0..grid.directions)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / grid.directions as f64;
            [th.cos(), th.sin()]
        })
        .collect();
    let mut min_eig = f64::INFINITY;
    let mut max_cond: f64 = 1.0;
    let mut ratio = vec![f64::INFINITY; speeds.len()];
    let mut mismatch: f64 = 0.0;
    let h = 1e-5;
    for i in 0..n {
        for j in 0..n {
            let x = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
            let g = l.d2l_dv2(x);
            let (lo, hi) = linalg::sym_eigenvalues2(&g);
            min_eig = min_eig.min(lo);
            if lo > 0.0 {
                max_cond = max_cond.max(hi / lo);
            }
            for (k, &s) in speeds.iter().enumerate() {
                for d in &dirs {
                    let v = [s * d[0], s * d[1]];
                    ratio[k] = ratio[k].min(l.lagrangian(x, v) / s);
                }
            }
            // derivative consistency on a sparse subgrid
            if (i + j) % 4 == 0 {
                let v = [
                    0.7 * dirs[(i + j) % dirs.len()][0] + 0.3,
                    -0.4 * dirs[(i * 3 + j) % dirs.len()][1] + 0.2,
                ];
                let dx = l.dl_dx(x, v);
                let dv = l.momentum(x, v);
                let mvx = l.d2l_dvdx(x, v);
                let mxx = l.d2l_dx2(x, v);
                for c in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += h;
                    xm[c] -= h;
                    let mut vp = v;
                    let mut vm = v;
                    vp[c] += h;
                    vm[c] -= h;
                    let fdx = (l.lagrangian(xp, v) - l.lagrangian(xm, v)) / (2.0 * h);
                    let fdv = (l.lagrangian(x, vp) - l.lagrangian(x, vm)) / (2.0 * h);
                    mismatch = mismatch.max(relative_mismatch(dx[c], fdx));
                    mismatch = mismatch.max(relative_mismatch(dv[c], fdv));
                    let mp = l.momentum(xp, v);
                    let mm = l.momentum(xm, v);
                    let gp = l.dl_dx(xp, v);
                    let gm = l.dl_dx(xm, v);
                    let hp = l.momentum(x, vp);
                    let hm = l.momentum(x, vm);
                    for r in 0..2 {
                        mismatch = mismatch.max(relative_mismatch(mvx[r][c], (mp[r] - mm[r]) / (2.0 * h)));
                        mismatch = mismatch.max(relative_mismatch(mxx[r][c], (gp[r] - gm[r]) / (2.0 * h)));
                        mismatch = mismatch.max(relative_mismatch(g[r][c], (hp[r] - hm[r]) / (2.0 * h)));
                    }
                }
            }
        }
    }
    if !(min_eig > 0.0) {
        return Err(Error::NotTonelli(format!(
            "fiber Hessian has eigenvalue {min_eig:.6e} <= 0 on the validation grid"
        )));
    }
    if mismatch > 1e-5 {
        return Err(Error::InconsistentDerivatives {
            what: "Lagrangian evaluators".into(),
            mismatch,
        });
    }
    let superlinearity: Vec<(f64, f64)> = speeds.iter().copied().zip(ratio.iter().copied()).collect();
    let increasing = ratio.windows(2).all(|w| w[1] > w[0]);
    if !increasing {
        return Err(Error::NotTonelli("L(x,v)/|v| is not increasing along sampled rays".into()));
    }
    Ok(ValidationReport {
        family: l.family,
        min_hessian_eigenvalue: min_eig,
        max_hessian_condition: max_cond,
        superlinearity,
        superlinear_trend_increasing: increasing,
        max_derivative_mismatch: mismatch,
        passed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierTerm;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ts(x1: f64, x2: f64, v1: f64, v2: f64) -> TangentState {
        TangentState::new(x1, x2, v1, v2).unwrap()
    }

    fn cs(x1: f64, x2: f64, p1: f64, p2: f64) -> CotangentState {
        CotangentState::new(x1, x2, p1, p2).unwrap()
    }

    fn cosine_potential(a: f64) -> TonelliLagrangian {
        TonelliLagrangian::mechanical(FourierSeries::new(0.0, vec![FourierTerm::cos(1, 0, a)]).unwrap()).unwrap()
    }

    fn constant_magnetic(a1: f64) -> TonelliLagrangian {
        TonelliLagrangian::magnetic([FourierSeries::constant(a1), FourierSeries::zero()], FourierSeries::zero()).unwrap()
    }

    /// A non-trivial custom Lagrangian used by the consistency checks.
    pub(crate) fn rich() -> TonelliLagrangian {
        let metric = MetricSeries {
            g11: FourierSeries::new(1.2, vec![FourierTerm::cos(1, 1, 0.2)]).unwrap(),
            g12: FourierSeries::new(0.1, vec![FourierTerm::sin(0, 1, 0.05)]).unwrap(),
            g22: FourierSeries::new(0.9, vec![FourierTerm::sin(1, 0, 0.15)]).unwrap(),
        };
        let u = FourierSeries::new(
            0.0,
            vec![
                FourierTerm::cos(1, 0, 0.1),
                FourierTerm {
                    m: 1,
                    n: -2,
                    cos: 0.03,
                    sin: 0.02,
                },
            ],
        )
        .unwrap();
        let a = [
            FourierSeries::new(0.2, vec![FourierTerm::sin(0, 1, 0.1)]).unwrap(),
            FourierSeries::new(-0.1, vec![FourierTerm::cos(1, 0, 0.2)]).unwrap(),
        ];
        TonelliLagrangian::custom(metric, u, a).unwrap()
    }

    #[test]
    fn eval_examples() {
        let flat = TonelliLagrangian::flat_kinetic();
        assert_eq!(eval_l(&flat, &ts(0.2, 0.3, 1.0, 1.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_l(&cosine_potential(0.5), &ts(0.0, 0.4, 0.0, 0.0)).unwrap(), -0.5);
        assert_abs_diff_eq!(
            eval_l(&constant_magnetic(0.3), &ts(0.1, 0.1, 2.0, 0.0)).unwrap(),
            2.6,
            epsilon = 1e-15
        );
        assert!(TangentState::new(0.0, 0.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(
            energy(&TonelliLagrangian::flat_kinetic(), &ts(0.0, 0.0, 1.0, 1.0)).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(energy(&cosine_potential(0.5), &ts(0.0, 0.0, 0.0, 0.0)).unwrap(), 0.5);
        assert_abs_diff_eq!(
            energy(&constant_magnetic(0.3), &ts(0.5, 0.5, 2.0, 0.0)).unwrap(),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn legendre_examples() {
        let p = legendre(&TonelliLagrangian::flat_kinetic(), &ts(0.0, 0.0, 1.0, 2.0)).unwrap();
        assert_eq!(p.p(), [1.0, 2.0]);
        let p = legendre(&constant_magnetic(0.3), &ts(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p.p1, 1.3);
        let diag = TonelliLagrangian::custom(
            MetricSeries::constant([[2.0, 0.0], [0.0, 1.0]]),
            FourierSeries::zero(),
            [FourierSeries::zero(), FourierSeries::zero()],
        )
        .unwrap();
        assert_eq!(legendre(&diag, &ts(0.1, 0.1, 1.0, 1.0)).unwrap().p(), [2.0, 1.0]);
    }

    #[test]
    fn inverse_legendre_examples() {
        let v = inverse_legendre(&TonelliLagrangian::flat_kinetic(), &cs(0.0, 0.0, 1.0, 2.0)).unwrap();
        assert_eq!(v.v(), [1.0, 2.0]);
        let v = inverse_legendre(&constant_magnetic(0.3), &cs(0.0, 0.0, 1.3, 0.0)).unwrap();
        assert_abs_diff_eq!(v.v1, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.v2, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hamiltonian_examples() {
        assert_abs_diff_eq!(
            hamiltonian(&TonelliLagrangian::flat_kinetic(), &cs(0.0, 0.0, 1.0, 1.0)).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(hamiltonian(&cosine_potential(0.5), &cs(0.0, 0.0, 0.0, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn validation_examples() {
        let r = validate_tonelli(&TonelliLagrangian::flat_kinetic(), &ValidationGrid::default()).unwrap();
        assert_eq!(r.min_hessian_eigenvalue, 1.0);
        let r2 = validate_tonelli(&cosine_potential(0.5), &ValidationGrid::default()).unwrap();
        assert_eq!(r2.min_hessian_eigenvalue, 1.0);
        assert!(validate_tonelli(&rich(), &ValidationGrid::default()).is_ok());
        let bad = TonelliLagrangian::custom(
            MetricSeries::constant([[1.0, 0.0], [0.0, -0.5]]),
            FourierSeries::zero(),
            [FourierSeries::zero(), FourierSeries::zero()],
        )
        .unwrap();
        assert!(matches!(
            validate_tonelli(&bad, &ValidationGrid::default()),
            Err(Error::NotTonelli(_))
        ));
        let small = ValidationGrid {
            points_per_side: 8,
            ..ValidationGrid::default()
        };
        assert!(validate_tonelli(&bad, &small).is_err());
    }

    #[test]
    fn family_mismatch_rejected() {
        let u = FourierSeries::new(0.0, vec![FourierTerm::cos(1, 0, 0.1)]).unwrap();
        assert!(TonelliLagrangian::new(
            Family::FlatKinetic,
            MetricSeries::euclidean(),
            u.clone(),
            [FourierSeries::zero(), FourierSeries::zero()],
            4
        )
        .is_err());
        let high = FourierSeries::new(0.0, vec![FourierTerm::cos(5, 0, 0.1)]).unwrap();
        assert!(TonelliLagrangian::mechanical(high).is_err());
    }

    fn magnetic_with_potential() -> TonelliLagrangian {
        TonelliLagrangian::magnetic(
            [
                FourierSeries::new(0.1, vec![FourierTerm::sin(0, 1, 0.3)]).unwrap(),
                FourierSeries::new(0.0, vec![FourierTerm::cos(1, 0, 0.25)]).unwrap(),
            ],
            FourierSeries::new(0.0, vec![FourierTerm::cos(1, 1, 0.05)]).unwrap(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_and_energy_identity(x in 0.0f64..1.0, y in 0.0f64..1.0, v1 in -3.0f64..3.0, v2 in -3.0f64..3.0) {
            for l in [rich(), magnetic_with_potential(), cosine_potential(0.2)] {
                let s = ts(x, y, v1, v2);
                let c = legendre(&l, &s).unwrap();
                let back = inverse_legendre(&l, &c).unwrap();
                prop_assert!((back.v1 - v1).abs() <= 1e-10 && (back.v2 - v2).abs() <= 1e-10);
                let e = energy(&l, &s).unwrap();
                let h = hamiltonian(&l, &c).unwrap();
                prop_assert!((e - h).abs() <= 1e-10);
            }
        }

        #[test]
        fn magnetic_energy_independent_of_form(x in 0.0f64..1.0, y in 0.0f64..1.0, v1 in -3.0f64..3.0, v2 in -3.0f64..3.0) {
            let with = magnetic_with_potential();
            let without = TonelliLagrangian::mechanical(with.potential().clone()).unwrap();
            let s = ts(x, y, v1, v2);
            prop_assert!((energy(&with, &s).unwrap() - energy(&without, &s).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn fenchel_gap_nonnegative(x in 0.0f64..1.0, y in 0.0f64..1.0, p1 in -3.0f64..3.0, p2 in -3.0f64..3.0, v1 in -3.0f64..3.0, v2 in -3.0f64..3.0) {
            let l = rich();
            let c = cs(x, y, p1, p2);
            let h = hamiltonian(&l, &c).unwrap();
            let gap = h + l.lagrangian(c.x(), [v1, v2]) - (p1 * v1 + p2 * v2);
            prop_assert!(gap >= -1e-12);
            let vs = inverse_legendre(&l, &c).unwrap();
            let at = h + l.lagrangian(c.x(), vs.v()) - linalg::dot2(c.p(), vs.v());
            prop_assert!(at.abs() <= 1e-12);
        }

        #[test]
        fn analytic_derivatives_match_differences(x in 0.0f64..1.0, y in 0.0f64..1.0, v1 in -2.0f64..2.0, v2 in -2.0f64..2.0) {
            let l = rich();
            let h = 1e-5;
            let (xs, v) = ([x, y], [v1, v2]);
            let dx = l.dl_dx(xs, v);
            let dv = l.momentum(xs, v);
            for c in 0..2 {
                let mut xp = xs; xp[c] += h;
                let mut xm = xs; xm[c] -= h;
                let mut vp = v; vp[c] += h;
                let mut vm = v; vm[c] -= h;
                let fdx = (l.lagrangian(xp, v) - l.lagrangian(xm, v)) / (2.0 * h);
                let fdv = (l.lagrangian(xs, vp) - l.lagrangian(xs, vm)) / (2.0 * h);
                prop_assert!(relative_mismatch(dx[c], fdx) <= 1e-6);
                prop_assert!(relative_mismatch(dv[c], fdv) <= 1e-6);
            }
        }
    }
}
