//! Periodic orbits of the Euler–Lagrange flow: refinement through a
//! transversal section, monodromy and stability, invariant-manifold traces on
//! the section, transverse crossings, the connection graph and the double cover.
//!
//! A section for class `K = (k, l)` is the line through an anchor point normal
//! to `K`, restricted to one energy level. Section coordinates are
//! `s = (x − anchor)·ê` and `w = v·ê` with `ê = (−l, k)/|K|`; the normal
//! velocity is recovered from the energy. The section map follows the flow
//! until the height `(x − anchor)·K` has advanced by `|K|²`, i.e. one full
//! period of a class-`K` orbit.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, IntegrationOptions, Phase, TangentFrame, Trajectory};
use crate::lagrangian::TonelliLagrangian;
use crate::linalg::{self, Complex, Mat2};
use crate::torus::{DiscreteLoop, Lattice, LiftedPoint, TangentState};
use crate::variational;

pub const DEFAULT_STABILITY_TOL: f64 = 1e-4;
pub const DEFAULT_TRANSVERSE_ANGLE: f64 = 1e-2;

fn extended_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, x, y) = extended_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub anchor: [f64; 2],
    pub class: [i64; 2],
    pub energy: f64,
}

impl Section {
    pub fn new(anchor: [f64; 2], class: [i64; 2], energy: f64) -> Result<Self> {
        if class == [0, 0] {
            return Err(Error::invalid("a section needs a non-zero homology class"));
        }
        Ok(Self { anchor, class, energy })
    }

    fn k(&self) -> [f64; 2] {
        [self.class[0] as f64, self.class[1] as f64]
    }

    pub fn class_norm2(&self) -> f64 {
        let k = self.k();
        k[0] * k[0] + k[1] * k[1]
    }

    pub fn normal(&self) -> [f64; 2] {
        let k = self.k();
        let n = self.class_norm2().sqrt();
        [k[0] / n, k[1] / n]
    }

    pub fn tangent(&self) -> [f64; 2] {
        let k = self.k();
        let n = self.class_norm2().sqrt();
        [-k[1] / n, k[0] / n]
    }

    pub fn height(&self, x: [f64; 2]) -> f64 {
        let k = self.k();
        (x[0] - self.anchor[0]) * k[0] + (x[1] - self.anchor[1]) * k[1]
    }

    /// Section coordinates of a phase point, measured from `anchor + shift`.
    pub fn coords(&self, z: &Phase, shift: [f64; 2]) -> [f64; 2] {
        let e = self.tangent();
        [
            (z[0] - self.anchor[0] - shift[0]) * e[0] + (z[1] - self.anchor[1] - shift[1]) * e[1],
            z[2] * e[0] + z[3] * e[1],
        ]
    }

    /// Phase point on the energy level with the given section coordinates and
    /// positive normal velocity.
    pub fn phase(&self, l: &TonelliLagrangian, sw: [f64; 2]) -> Result<Phase> {
        let e = self.tangent();
        let n = self.normal();
        let x = [self.anchor[0] + sw[0] * e[0], self.anchor[1] + sw[0] * e[1]];
        let g = l.metric_at(x);
        let gnn = linalg::dot2(n, linalg::mul2v(&g, n));
        let gnw = linalg::dot2(n, linalg::mul2v(&g, e));
        let gww = linalg::dot2(e, linalg::mul2v(&g, e));
        let w = sw[1];
        let a = 0.5 * gnn;
        let b = gnw * w;
        let c = 0.5 * gww * w * w + l.potential_value(x) - self.energy;
        let disc = b * b - 4.0 * a * c;
        if !(disc >= 0.0) {
            return Err(Error::IntegrationFailure(format!(
                "section point ({:.6}, {:.6}) has no velocity on the energy level",
                sw[0], sw[1]
            )));
        }
        let vn = (-b + disc.sqrt()) / (2.0 * a);
        if !(vn > 0.0) {
            return Err(Error::IntegrationFailure(
                "section crossing is not positively oriented".into(),
            ));
        }
        Ok([x[0], x[1], vn * n[0] + w * e[0], vn * n[1] + w * e[1]])
    }

    /// Period of the section coordinate `s` under the deck lattice.
    pub fn period(&self, lattice: Lattice) -> f64 {
        let (k, l) = (self.class[0], self.class[1]);
        let p = lattice.n2 * l;
        let q = lattice.n1 * k;
        let g = extended_gcd(p, q).0.max(1);
        let m = [lattice.n1 * p / g, -lattice.n2 * q / g];
        ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt()
    }

    /// A lattice vector whose height equals `h` (which must be attainable).
    fn lattice_vector_at_height(&self, lattice: Lattice, h: i64) -> Option<[i64; 2]> {
        let a = lattice.n1 * self.class[0];
        let b = lattice.n2 * self.class[1];
        let (g, x, y) = extended_gcd(a, b);
        if g == 0 || h % g != 0 {
            return None;
        }
        let f = h / g;
        Some([lattice.n1 * x * f, lattice.n2 * y * f])
    }

    /// Height spacing of the section lines that project to the same curve.
    fn height_step(&self, lattice: Lattice) -> i64 {
        extended_gcd(lattice.n1 * self.class[0], lattice.n2 * self.class[1]).0
    }
}

/// Full-period section map on a fixed energy level.
#[derive(Debug, Clone, Copy)]
pub struct SectionMap<'a> {
    pub l: &'a TonelliLagrangian,
    pub section: Section,
    pub dt: f64,
    pub max_time: f64,
}

impl<'a> SectionMap<'a> {
    pub fn new(l: &'a TonelliLagrangian, section: Section, dt: f64, max_time: f64) -> Self {
        Self {
            l,
            section,
            dt,
            max_time,
        }
    }

    /// Integrates until the height reaches `target`; the crossing is located
    /// inside the last step by re-running a partial RK4 step.
    pub fn flow_to_height(&self, z0: &Phase, target: f64, backward: bool) -> Result<(Phase, f64)> {
        let dir = if backward { -1.0 } else { 1.0 };
        let h = dir * self.dt;
        let f = |z: &Phase| dir * (self.section.height([z[0], z[1]]) - target);
        let mut z = *z0;
        let mut t = 0.0f64;
        let mut fz = f(&z);
        if fz >= 0.0 {
            return Err(Error::invalid("start point is already past the target height"));
        }
        while t.abs() < self.max_time {
            let z1 = flow::rk4_step(self.l, &z, h)?;
            let f1 = f(&z1);
            if !f1.is_finite() {
                return Err(Error::IntegrationFailure("non-finite state in section map".into()));
            }
            if f1 >= 0.0 {
                // Illinois iteration for the partial step length
                let (mut a, mut fa, mut b, mut fb) = (0.0f64, fz, self.dt, f1);
                let mut side = 0;
                let mut best = (z1, b);
                for _ in 0..80 {
                    let c = (a * fb - b * fa) / (fb - fa);
                    let zc = flow::rk4_step(self.l, &z, dir * c)?;
                    let fc = f(&zc);
                    best = (zc, c);
                    if fc.abs() <= 1e-15 * target.abs().max(1.0) || (b - a) <= 1e-17 {
                        break;
                    }
                    if fc < 0.0 {
                        a = c;
                        fa = fc;
                        if side == -1 {
                            fb *= 0.5;
                        }
                        side = -1;
                    } else {
                        b = c;
                        fb = fc;
                        if side == 1 {
                            fa *= 0.5;
                        }
                        side = 1;
                    }
                }
                return Ok((best.0, t + dir * best.1));
            }
            z = z1;
            fz = f1;
            t += h;
        }
        Err(Error::IntegrationFailure(format!(
            "no return to the section within time {}",
            self.max_time
        )))
    }

    /// One full return from section coordinates; returns new coordinates and time.
    pub fn apply(&self, sw: [f64; 2], backward: bool) -> Result<([f64; 2], f64)> {
        let z = self.section.phase(self.l, sw)?;
        let k2 = self.section.class_norm2();
        let (target, shift) = if backward {
            (-k2, [-(self.section.class[0] as f64), -(self.section.class[1] as f64)])
        } else {
            (k2, [self.section.class[0] as f64, self.section.class[1] as f64])
        };
        let (zt, t) = self.flow_to_height(&z, target, backward)?;
        Ok((self.section.coords(&zt, shift), t))
    }

    pub fn apply_n(&self, sw: [f64; 2], n: usize, backward: bool) -> Result<[f64; 2]> {
        let mut p = sw;
        for _ in 0..n {
            p = self.apply(p, backward)?.0;
        }
        Ok(p)
    }

    /// Central-difference Jacobian of the section map.
    pub fn jacobian(&self, sw: [f64; 2], backward: bool, step: f64) -> Result<Mat2> {
        let mut j = linalg::ZERO2;
        for c in 0..2 {
            let mut p = sw;
            let mut m = sw;
            p[c] += step;
            m[c] -= step;
            let fp = self.apply(p, backward)?.0;
            let fm = self.apply(m, backward)?.0;
            for r in 0..2 {
                j[r][c] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
        Ok(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Hyperbolic,
    Elliptic,
    Degenerate,
    /// the reduced pair could not be extracted reliably
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// wrapped initial state on the section
    pub seed: TangentState,
    /// the same state in the cover
    pub seed_lift: Phase,
    pub period: f64,
    pub class: [i64; 2],
    pub energy: f64,
    pub monodromy: TangentFrame,
    pub reduced_monodromy: Mat2,
    pub stability: Stability,
    /// reduced Floquet pair, larger modulus first
    pub floquet: [Complex; 2],
    pub section: Section,
    pub section_point: [f64; 2],
    pub section_jacobian: Mat2,
    /// max-norm return residual of the section map
    pub residual: f64,
    /// `|x(T) − x(0) − class|` in the cover
    pub closure_residual: f64,
    pub dt: f64,
}

impl PeriodicOrbit {
    /// Rotation vector `class / T`.
    pub fn rotation_vector(&self) -> [f64; 2] {
        [self.class[0] as f64 / self.period, self.class[1] as f64 / self.period]
    }

    pub fn trajectory(&self, l: &TonelliLagrangian, stride: usize) -> Result<Trajectory> {
        flow::integrate_lifted(
            l,
            &self.seed_lift,
            self.period,
            &IntegrationOptions {
                dt: self.dt,
                sample_stride: stride.max(1),
                ..IntegrationOptions::default()
            },
        )
    }

    /// The same orbit shifted by a deck translation.
    pub fn translated(&self, m: [i64; 2]) -> Self {
        let mut o = self.clone();
        o.seed_lift[0] += m[0] as f64;
        o.seed_lift[1] += m[1] as f64;
        o.section.anchor = [o.section.anchor[0] + m[0] as f64, o.section.anchor[1] + m[1] as f64];
        o
    }

    /// Max over orbit samples of the distance to another orbit's samples, both
    /// reduced modulo the lattice (a sup-type separation used for clustering).
    pub fn separation(&self, l: &TonelliLagrangian, other: &PeriodicOrbit, lattice: Lattice) -> Result<f64> {
        let a = self.trajectory(l, 10)?;
        let b = other.trajectory(l, 10)?;
        let pa: Vec<[f64; 2]> = a.lifts.iter().map(|p| p.to_array()).collect();
        let pb: Vec<[f64; 2]> = b.lifts.iter().map(|p| p.to_array()).collect();
        Ok(polyline_min_distance(&pa, &pb, lattice))
    }
}

/// Smallest distance between two sampled curves modulo a lattice.
pub fn polyline_min_distance(a: &[[f64; 2]], b: &[[f64; 2]], lattice: Lattice) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let d = lattice.delta(*p, *q);
            best = best.min(d[0].hypot(d[1]));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineOptions {
    /// energy level of the orbit; taken from the candidate when absent
    #[serde(default)]
    pub energy: Option<f64>,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_candidate_gradient: f64,
    pub fd_step: f64,
    pub stability_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            energy: None,
            dt: flow::DEFAULT_DT,
            tol: 1e-10,
            max_iter: 40,
            max_candidate_gradient: 1e-6,
            fd_step: 1e-6,
            stability_tol: DEFAULT_STABILITY_TOL,
        }
    }
}

fn max_abs2(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Sharpens a stationary discrete loop into a periodic orbit of the flow.
pub fn refine_orbit(l: &TonelliLagrangian, candidate: &DiscreteLoop, opts: &RefineOptions) -> Result<PeriodicOrbit> {
    let class = candidate.class();
    if class == [0, 0] {
        return Err(Error::DegenerateOrbit("contractible candidates have no section".into()));
    }
    let grad = variational::loop_gradient(l, candidate);
    let gn = grad.iter().map(|g| g[0] * g[0] + g[1] * g[1]).sum::<f64>().sqrt();
    if gn > opts.max_candidate_gradient {
        return Err(Error::Refinement {
            message: format!("candidate is not stationary (action gradient {gn:.3e})"),
            residual: gn,
        });
    }
    let n = candidate.len();
    let fastest = (0..n)
        .max_by(|&a, &b| {
            let va = variational::node_velocity(candidate, a);
            let vb = variational::node_velocity(candidate, b);
            linalg::norm2(va).total_cmp(&linalg::norm2(vb))
        })
        .unwrap_or(0);
    let anchor = candidate.node(fastest);
    let v = variational::node_velocity(candidate, fastest);
    let energy = opts.energy.unwrap_or_else(|| l.energy_at(anchor, v));
    let section = Section::new(anchor, class, energy)?;
    let e = section.tangent();
    let start = [0.0, linalg::dot2(v, e)];
    refine_on_section(l, section, start, 4.0 * candidate.period() + 1.0, opts)
}

/// Newton iteration for a fixed point of the section map.
pub fn refine_on_section(
    l: &TonelliLagrangian,
    section: Section,
    start: [f64; 2],
    max_time: f64,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let map = SectionMap::new(l, section, opts.dt, max_time);
    let residual_at = |p: [f64; 2]| -> Result<([f64; 2], f64)> {
        let (q, t) = map.apply(p, false)?;
        Ok(([q[0] - p[0], q[1] - p[1]], t))
    };
    let mut p = start;
    let (mut r, _) = residual_at(p).map_err(|e| Error::Refinement {
        message: format!("initial section point does not return: {e}"),
        residual: f64::INFINITY,
    })?;
    let mut it = 0;
    while max_abs2(r) > opts.tol {
        if it >= opts.max_iter {
            return Err(Error::Refinement {
                message: format!("Newton did not converge in {} iterations", opts.max_iter),
                residual: max_abs2(r),
            });
        }
        it += 1;
        let mut j = map.jacobian(p, false, opts.fd_step).map_err(|e| Error::Refinement {
            message: format!("section Jacobian failed: {e}"),
            residual: max_abs2(r),
        })?;
        j[0][0] -= 1.0;
        j[1][1] -= 1.0;
        // damped least squares keeps the step bounded near parabolic orbits
        let jt = linalg::transpose2(&j);
        let mut a = linalg::mul2(&jt, &j);
        let mu = 1e-14 * (a[0][0] + a[1][1]).max(1e-300);
        a[0][0] += mu;
        a[1][1] += mu;
        let rhs = linalg::mul2v(&jt, [-r[0], -r[1]]);
        let Some(d) = linalg::solve2(&a, rhs) else {
            return Err(Error::Refinement {
                message: "singular Newton system".into(),
                residual: max_abs2(r),
            });
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let q = [p[0] + step * d[0], p[1] + step * d[1]];
            if let Ok((rq, _)) = residual_at(q) {
                if max_abs2(rq) < max_abs2(r) {
                    p = q;
                    r = rq;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::Refinement {
                message: "Newton step failed to reduce the return residual".into(),
                residual: max_abs2(r),
            });
        }
    }
    build_orbit(l, section, p, max_time, max_abs2(r), opts)
}

fn build_orbit(
    l: &TonelliLagrangian,
    section: Section,
    p: [f64; 2],
    max_time: f64,
    residual: f64,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let map = SectionMap::new(l, section, opts.dt, max_time);
    let z0 = section.phase(l, p)?;
    let (zt, period) = map.flow_to_height(&z0, section.class_norm2(), false)?;
    if period < 0.01 {
        return Err(Error::DegenerateOrbit(format!("period collapsed to {period:.3e}")));
    }
    let closure_residual = (zt[0] - z0[0] - section.class[0] as f64)
        .abs()
        .max((zt[1] - z0[1] - section.class[1] as f64).abs());
    let (_, monodromy) = flow::flow_with_frame(l, &z0, period, &IntegrationOptions::with_dt(opts.dt))?;
    let section_jacobian = map.jacobian(p, false, opts.fd_step)?;
    let (stability, floquet, reduced) = classify_monodromy(l, &z0, &monodromy, opts.stability_tol);
    Ok(PeriodicOrbit {
        seed: flow::phase_to_state(&z0)?,
        seed_lift: z0,
        period,
        class: section.class,
        energy: flow::phase_energy(l, &z0),
        monodromy,
        reduced_monodromy: reduced,
        stability,
        floquet,
        section,
        section_point: p,
        section_jacobian,
        residual,
        closure_residual,
        dt: opts.dt,
    })
}

fn energy_gradient(l: &TonelliLagrangian, z: &Phase) -> [f64; 4] {
    let d = l.local([z[0], z[1]]);
    let v = [z[2], z[3]];
    let mut g = [0.0; 4];
    for i in 0..2 {
        let gv = linalg::mul2v(&d.dg[i], v);
        g[i] = 0.5 * linalg::dot2(v, gv) + d.u.grad[i];
    }
    let p = linalg::mul2v(&d.g, v);
    g[2] = p[0];
    g[3] = p[1];
    g
}

/// Reduced monodromy on the complement of the flow direction and the energy
/// gradient, its eigenvalues and the stability class.
pub fn classify_monodromy(
    l: &TonelliLagrangian,
    z0: &Phase,
    monodromy: &TangentFrame,
    tol: f64,
) -> (Stability, [Complex; 2], Mat2) {
    let nan = [Complex { re: f64::NAN, im: 0.0 }; 2];
    let Ok(f) = flow::phase_field(l, z0) else {
        return (Stability::Uncertain, nan, linalg::ZERO2);
    };
    let g = energy_gradient(l, z0);
    let fnorm = linalg::norm4(f);
    if fnorm < 1e-12 {
        return (Stability::Uncertain, nan, linalg::ZERO2);
    }
    let mut basis: Vec<[f64; 4]> = vec![f.map(|c| c / fnorm)];
    let push = |v: [f64; 4], basis: &mut Vec<[f64; 4]>| -> f64 {
        let mut u = v;
        for b in basis.iter() {
            let d = linalg::dot4(u, *b);
            for i in 0..4 {
                u[i] -= d * b[i];
            }
        }
        let n = linalg::norm4(u);
        if n > 1e-10 {
            basis.push(u.map(|c| c / n));
        }
        n
    };
    if push(g, &mut basis) < 1e-10 * linalg::norm4(g).max(1.0) {
        return (Stability::Uncertain, nan, linalg::ZERO2);
    }
    // complete with the coordinate directions that survive projection best
    let mut candidates: Vec<(f64, [f64; 4])> = (0..4)
        .map(|i| {
            let mut e = [0.0; 4];
            e[i] = 1.0;
            let mut u = e;
            for b in &basis {
                let d = linalg::dot4(u, *b);
                for k in 0..4 {
                    u[k] -= d * b[k];
                }
            }
            (linalg::norm4(u), e)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, e) in candidates {
        if basis.len() == 4 {
            break;
        }
        push(e, &mut basis);
    }
    if basis.len() < 4 {
        return (Stability::Uncertain, nan, linalg::ZERO2);
    }
    let w = [basis[2], basis[3]];
    let mut dp = linalg::ZERO2;
    for c in 0..2 {
        let img = monodromy.apply(w[c]);
        for r in 0..2 {
            dp[r][c] = linalg::dot4(w[r], img);
        }
    }
    let ev = linalg::eigenvalues2(&dp);
    let det = linalg::det2(&dp);
    if (det - 1.0).abs() > 1e-3 {
        return (Stability::Uncertain, ev, dp);
    }
    let stability = if ev[0].im == 0.0 && ev[0].abs() > 1.0 + tol {
        Stability::Hyperbolic
    } else if ev[0].im != 0.0 && (ev[0].abs() - 1.0).abs() <= tol && ev[0].im.abs() > tol {
        Stability::Elliptic
    } else {
        Stability::Degenerate
    };
    (stability, ev, dp)
}

pub fn classify(l: &TonelliLagrangian, orbit: &PeriodicOrbit) -> Stability {
    classify_monodromy(l, &orbit.seed_lift, &orbit.monodromy, DEFAULT_STABILITY_TOL).0
}

/// Moves an orbit's reference point to a common section with the given
/// anchor, keeping the orbit itself.
pub fn reanchor(
    l: &TonelliLagrangian,
    orbit: &PeriodicOrbit,
    anchor: [f64; 2],
    lattice: Lattice,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let section = Section::new(anchor, orbit.class, orbit.energy)?;
    let step = section.height_step(lattice).max(1);
    let h0 = section.height([orbit.seed_lift[0], orbit.seed_lift[1]]);
    // next section line strictly above the current height
    let target_line = ((h0 / step as f64).floor() as i64 + 1) * step;
    let map = SectionMap::new(l, section, opts.dt, 4.0 * orbit.period + 1.0);
    let (z, _) = map.flow_to_height(&orbit.seed_lift, target_line as f64, false)?;
    let m = section
        .lattice_vector_at_height(lattice, target_line)
        .ok_or_else(|| Error::invalid("section line not reachable in the lattice"))?;
    let p = section.coords(&z, [m[0] as f64, m[1] as f64]);
    let sw = section.phase(l, p)?;
    let _ = sw;
    let mut ropts = *opts;
    ropts.energy = Some(orbit.energy);
    refine_on_section(l, section, p, 4.0 * orbit.period + 1.0, &ropts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub kind: ManifoldKind,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldOptions {
    pub eps0: f64,
    /// number of fundamental domains to iterate
    pub steps: usize,
    /// largest allowed spacing of adjacent section points
    pub gap: f64,
    pub max_points: usize,
    /// stop once the curve is this long (section units)
    pub max_length: f64,
    pub dt: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            eps0: 1e-5,
            steps: 12,
            gap: 0.01,
            max_points: 4000,
            max_length: 6.0,
            dt: flow::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum CurveStatus {
    Complete,
    Truncated { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionCurve {
    pub branch: Branch,
    pub section: Section,
    pub lattice: Lattice,
    pub fixed_point: [f64; 2],
    /// multiplier of the iterated map along the seed direction (`> 1`)
    pub multiplier: f64,
    /// maps per fundamental domain (2 for orientation-reversing multipliers)
    pub map_power: usize,
    /// points `(s, w)` in curve order
    pub points: Vec<[f64; 2]>,
    /// curve parameter: fundamental-domain index plus the seed fraction
    pub params: Vec<f64>,
    pub period_time: f64,
    pub status: CurveStatus,
}

impl SectionCurve {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

/// Traces one branch of the stable or unstable manifold of a hyperbolic orbit
/// on the orbit's section.
pub fn globalize_manifold(
    l: &TonelliLagrangian,
    orbit: &PeriodicOrbit,
    branch: Branch,
    lattice: Lattice,
    opts: &ManifoldOptions,
) -> Result<SectionCurve> {
    if orbit.stability != Stability::Hyperbolic {
        return Err(Error::Inapplicable(format!(
            "manifolds need a hyperbolic orbit, got {:?}",
            orbit.stability
        )));
    }
    let ev = linalg::eigenvalues2(&orbit.section_jacobian);
    if ev[0].im != 0.0 || !(ev[0].abs() > 1.0) {
        return Err(Error::Inapplicable(
            "section Jacobian has no real expanding eigenvalue".into(),
        ));
    }
    let (lambda, backward) = match branch.kind {
        ManifoldKind::Unstable => (ev[0].re, false),
        ManifoldKind::Stable => (ev[1].re, true),
    };
    let mut dir = linalg::eigenvector2(&orbit.section_jacobian, lambda);
    if dir[0] < 0.0 || (dir[0] == 0.0 && dir[1] < 0.0) {
        dir = [-dir[0], -dir[1]];
    }
    if branch.side == Side::Minus {
        dir = [-dir[0], -dir[1]];
    }
    let mult_one = if backward { 1.0 / lambda } else { lambda };
    let map_power = if mult_one < 0.0 { 2 } else { 1 };
    let mu = mult_one.abs().powi(map_power as i32);
    let map = SectionMap::new(l, orbit.section, opts.dt, 4.0 * orbit.period + 1.0);
    let z = orbit.section_point;
    let seed = |sigma: f64| -> [f64; 2] {
        let r = opts.eps0 * mu.powf(sigma);
        [z[0] + r * dir[0], z[1] + r * dir[1]]
    };
    let image = |sigma: f64, k: usize| -> Result<[f64; 2]> { map.apply_n(seed(sigma), k * map_power, backward) };

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut params: Vec<f64> = Vec::new();
    let mut status = CurveStatus::Complete;
    let mut length = 0.0;
    // current fundamental domain as (sigma, point) pairs
    let mut domain: Vec<(f64, [f64; 2])> = Vec::new();
    for i in 0..=8 {
        let s = i as f64 / 8.0;
        domain.push((s, seed(s)));
    }
    'domains: for k in 0..=opts.steps {
        if k > 0 {
            let mut next = Vec::with_capacity(domain.len());
            for &(s, p) in &domain {
                match map.apply_n(p, map_power, backward) {
                    Ok(q) => next.push((s, q)),
                    Err(e) => {
                        status = CurveStatus::Truncated {
                            reason: format!("section map failed in domain {k}: {e}"),
                        };
                        break 'domains;
                    }
                }
            }
            domain = next;
        }
        // insert points until adjacent images are within the gap
        let mut i = 0;
        while i + 1 < domain.len() {
            let (s0, p0) = domain[i];
            let (s1, p1) = domain[i + 1];
            let d = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
            if d > opts.gap && s1 - s0 > 1e-12 {
                if points.len() + domain.len() >= opts.max_points {
                    status = CurveStatus::Truncated {
                        reason: format!("point cap {} reached in domain {k}", opts.max_points),
                    };
                    break 'domains;
                }
                let sm = 0.5 * (s0 + s1);
                match image(sm, k) {
                    Ok(q) => domain.insert(i + 1, (sm, q)),
                    Err(e) => {
                        status = CurveStatus::Truncated {
                            reason: format!("section map failed while refining domain {k}: {e}"),
                        };
                        break 'domains;
                    }
                }
            } else {
                i += 1;
            }
        }
        let skip = usize::from(k > 0);
        for &(s, p) in domain.iter().skip(skip) {
            if let Some(last) = points.last() {
                let lp: &[f64; 2] = last;
                length += (p[0] - lp[0]).hypot(p[1] - lp[1]);
            }
            points.push(p);
            params.push(k as f64 + s);
        }
        if length > opts.max_length {
            break;
        }
    }
    Ok(SectionCurve {
        branch,
        section: orbit.section,
        lattice,
        fixed_point: z,
        multiplier: mu,
        map_power,
        points,
        params,
        period_time: orbit.period,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub point: [f64; 2],
    pub angle: f64,
    pub transverse: bool,
    /// curve parameters at the crossing
    pub param_a: f64,
    pub param_b: f64,
    /// multiple of the section period added to the second curve
    pub shift: i64,
    /// length of the longer of the two crossing segments
    pub segment_length: f64,
}

fn seg_intersection(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let qp = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

/// Segment-pair crossings of two section curves, with the second curve
/// shifted through the periodic copies of the section.
pub fn detect_intersections(a: &SectionCurve, b: &SectionCurve, transverse_angle: f64) -> Vec<Crossing> {
    let period = a.section.period(a.lattice);
    if a.points.len() < 2 || b.points.len() < 2 {
        return Vec::new();
    }
    let range = |c: &SectionCurve| {
        c.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])))
    };
    let (alo, ahi) = range(a);
    let (blo, bhi) = range(b);
    let jmin = ((alo - bhi) / period).floor() as i64;
    let jmax = ((ahi - blo) / period).ceil() as i64;
    let mut out = Vec::new();
    let exclude = 1e3 * 1e-6;
    for j in jmin..=jmax {
        let off = j as f64 * period;
        for ia in 0..a.points.len() - 1 {
            let p0 = a.points[ia];
            let p1 = a.points[ia + 1];
            let (xlo, xhi) = (p0[0].min(p1[0]), p0[0].max(p1[0]));
            let (ylo, yhi) = (p0[1].min(p1[1]), p0[1].max(p1[1]));
            for ib in 0..b.points.len() - 1 {
                let q0 = [b.points[ib][0] + off, b.points[ib][1]];
                let q1 = [b.points[ib + 1][0] + off, b.points[ib + 1][1]];
                if q0[0].max(q1[0]) < xlo || q0[0].min(q1[0]) > xhi || q0[1].max(q1[1]) < ylo || q0[1].min(q1[1]) > yhi {
                    continue;
                }
                let Some((t, u)) = seg_intersection(p0, p1, q0, q1) else {
                    continue;
                };
                // shared vertices count once
                if (t == 1.0 && ia + 2 < a.points.len()) || (u == 1.0 && ib + 2 < b.points.len()) {
                    continue;
                }
                let point = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                let near_fixed = |fp: [f64; 2], shift: f64| {
                    let ds = (point[0] - fp[0] - shift) / period;
                    let ds = (ds - ds.round()) * period;
                    ds.hypot(point[1] - fp[1]) < exclude
                };
                if near_fixed(a.fixed_point, 0.0) || near_fixed(b.fixed_point, off) {
                    continue;
                }
                let r = [p1[0] - p0[0], p1[1] - p0[1]];
                let s = [q1[0] - q0[0], q1[1] - q0[1]];
                let cosang = (linalg::dot2(r, s) / (linalg::norm2(r) * linalg::norm2(s))).abs().min(1.0);
                let angle = cosang.acos();
                out.push(Crossing {
                    point,
                    angle,
                    transverse: angle >= transverse_angle,
                    param_a: a.params[ia] + t * (a.params[ia + 1] - a.params[ia]),
                    param_b: b.params[ib] + u * (b.params[ib + 1] - b.params[ib]),
                    shift: j,
                    segment_length: linalg::norm2(r).max(linalg::norm2(s)),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphOptions {
    pub manifold: ManifoldOptions,
    pub transverse_angle: f64,
    /// largest displacement of a crossing under resolution doubling
    pub persistence_tol: f64,
    pub check_doubling: bool,
    /// search `W^u(Λ_i) ∩ W^s(Λ_i)` as well
    pub include_self_pairs: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            manifold: ManifoldOptions::default(),
            transverse_angle: DEFAULT_TRANSVERSE_ANGLE,
            persistence_tol: 1e-3,
            check_doubling: true,
            include_self_pairs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub label: String,
    pub orbit: PeriodicOrbit,
    /// deck translation of the base orbit (zero on the base torus)
    pub copy: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistentCrossing {
    pub crossing: Crossing,
    /// displacement to the matching crossing at doubled resolution
    pub displacement: Option<f64>,
    pub persistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub unstable_side: Side,
    pub stable_side: Side,
    pub crossings: Vec<PersistentCrossing>,
    /// connection flight time of the fastest persistent crossing
    pub transit_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionGraph {
    pub lattice: Lattice,
    pub section: Option<Section>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub cycles: Vec<Vec<usize>>,
    pub certificate: bool,
    /// orbits failing the hyperbolicity hypothesis
    pub hypothesis_failures: Vec<String>,
    pub tangential_suspects: usize,
    pub curve_status: Vec<String>,
    pub notes: Vec<String>,
}

impl ConnectionGraph {
    pub fn has_self_loop(&self) -> bool {
        self.edges.iter().any(|e| e.from == e.to)
    }
}

fn curves_for(
    l: &TonelliLagrangian,
    orbit: &PeriodicOrbit,
    lattice: Lattice,
    opts: &ManifoldOptions,
) -> Result<[[SectionCurve; 2]; 2]> {
    let mk = |kind, side| globalize_manifold(l, orbit, Branch { kind, side }, lattice, opts);
    Ok([
        [
            mk(ManifoldKind::Unstable, Side::Plus)?,
            mk(ManifoldKind::Unstable, Side::Minus)?,
        ],
        [mk(ManifoldKind::Stable, Side::Plus)?, mk(ManifoldKind::Stable, Side::Minus)?],
    ])
}

/// Finds elementary cycles: one per strongly connected component with a cycle.
fn find_cycles(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::new();
    let idx: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for &(a, b) in edges {
        g.update_edge(idx[a], idx[b], ());
    }
    let mut cycles = Vec::new();
    for comp in tarjan_scc(&g) {
        let members: Vec<usize> = {
            let mut m: Vec<usize> = comp.iter().map(|i| i.index()).collect();
            m.sort_unstable();
            m
        };
        if members.len() == 1 {
            let v = members[0];
            if edges.iter().any(|&(a, b)| a == v && b == v) {
                cycles.push(vec![v]);
            }
            continue;
        }
        // walk inside the component until a node repeats
        let inside = |v: usize| members.binary_search(&v).is_ok();
        let mut path = vec![members[0]];
        loop {
            let cur = *path.last().unwrap();
            let next = edges
                .iter()
                .filter(|&&(a, b)| a == cur && b != cur && inside(b))
                .map(|&(_, b)| b)
                .min()
                .expect("strongly connected component has an outgoing edge");
            if let Some(pos) = path.iter().position(|&v| v == next) {
                cycles.push(path[pos..].to_vec());
                break;
            }
            path.push(next);
        }
    }
    cycles.sort();
    cycles
}

/// Connection graph over hyperbolic orbits sharing a homology class.
///
/// All orbits are re-anchored on the section of the first one. Nodes are the
/// orbits and, for a proper sublattice, their deck copies.
pub fn build_connection_graph(
    l: &TonelliLagrangian,
    orbits: &[PeriodicOrbit],
    lattice: Lattice,
    opts: &GraphOptions,
    refine: &RefineOptions,
) -> Result<ConnectionGraph> {
    let mut graph = ConnectionGraph {
        lattice,
        section: None,
        nodes: Vec::new(),
        edges: Vec::new(),
        cycles: Vec::new(),
        certificate: false,
        hypothesis_failures: Vec::new(),
        tangential_suspects: 0,
        curve_status: Vec::new(),
        notes: Vec::new(),
    };
    if orbits.is_empty() {
        graph.notes.push("no orbits supplied".into());
        return Ok(graph);
    }
    for (i, o) in orbits.iter().enumerate() {
        if o.stability != Stability::Hyperbolic {
            graph.hypothesis_failures.push(format!(
                "orbit {i} (class {:?}, T = {:.6}) is {:?}",
                o.class, o.period, o.stability
            ));
        }
    }
    let class = orbits[0].class;
    if orbits.iter().any(|o| o.class != class) {
        return Err(Error::invalid("graph orbits must share one homology class"));
    }
    if !lattice.contains(class) {
        return Err(Error::Inapplicable(format!(
            "class {class:?} does not close on the lattice {lattice:?}"
        )));
    }
    let anchor = orbits[0].section.anchor;
    let mut copies = Vec::new();
    for m1 in 0..lattice.n1 {
        for m2 in 0..lattice.n2 {
            copies.push([m1, m2]);
        }
    }
    for (i, o) in orbits.iter().enumerate() {
        for &m in &copies {
            let label = if copies.len() == 1 {
                format!("orbit-{i}")
            } else {
                format!("orbit-{i}+({},{})", m[0], m[1])
            };
            let moved = o.translated(m);
            let node_orbit = if i == 0 && m == [0, 0] {
                moved
            } else {
                reanchor(l, &moved, anchor, lattice, refine)?
            };
            graph.nodes.push(GraphNode {
                label,
                orbit: node_orbit,
                copy: m,
            });
        }
    }
    graph.section = Some(graph.nodes[0].orbit.section);
    if !graph.hypothesis_failures.is_empty() {
        graph
            .notes
            .push("hyperbolicity hypothesis fails; no manifolds computed".into());
        return Ok(graph);
    }
    let curves: Vec<[[SectionCurve; 2]; 2]> = graph
        .nodes
        .iter()
        .map(|n| curves_for(l, &n.orbit, lattice, &opts.manifold))
        .collect::<Result<_>>()?;
    for (i, c) in curves.iter().enumerate() {
        for row in c {
            for curve in row {
                if let CurveStatus::Truncated { reason } = &curve.status {
                    graph.curve_status.push(format!("node {i} {:?}: {reason}", curve.branch));
                }
            }
        }
    }
    let fine_opts = ManifoldOptions {
        gap: 0.5 * opts.manifold.gap,
        max_points: 2 * opts.manifold.max_points,
        ..opts.manifold
    };
    let mut fine: Vec<Option<[[SectionCurve; 2]; 2]>> = vec![None; graph.nodes.len()];
    let sides = [Side::Plus, Side::Minus];
    let n = graph.nodes.len();
    for i in 0..n {
        for j in 0..n {
            if i == j && !opts.include_self_pairs {
                continue;
            }
            for (su, side_u) in sides.iter().enumerate() {
                for (ss, side_s) in sides.iter().enumerate() {
                    let cu = &curves[i][0][su];
                    let cs = &curves[j][1][ss];
                    let found = detect_intersections(cu, cs, opts.transverse_angle);
                    graph.tangential_suspects += found.iter().filter(|c| !c.transverse).count();
                    let transverse: Vec<Crossing> = found.into_iter().filter(|c| c.transverse).collect();
                    if transverse.is_empty() {
                        continue;
                    }
                    let mut kept = Vec::new();
                    if opts.check_doubling {
                        for k in [i, j] {
                            if fine[k].is_none() {
                                fine[k] = Some(curves_for(l, &graph.nodes[k].orbit, lattice, &fine_opts)?);
                            }
                        }
                        let fu = &fine[i].as_ref().unwrap()[0][su];
                        let fs = &fine[j].as_ref().unwrap()[1][ss];
                        let refined = detect_intersections(fu, fs, opts.transverse_angle);
                        let period = cu.section.period(lattice);
                        for c in transverse {
                            let disp = refined
                                .iter()
                                .filter(|r| r.transverse)
                                .map(|r| {
                                    let ds = (r.point[0] - c.point[0]) / period;
                                    let ds = (ds - ds.round()) * period;
                                    ds.hypot(r.point[1] - c.point[1])
                                })
                                .fold(f64::INFINITY, f64::min);
                            let displacement = disp.is_finite().then_some(disp);
                            kept.push(PersistentCrossing {
                                crossing: c,
                                displacement,
                                persistent: disp <= opts.persistence_tol,
                            });
                        }
                    } else {
                        kept = transverse
                            .into_iter()
                            .map(|c| PersistentCrossing {
                                crossing: c,
                                displacement: None,
                                persistent: true,
                            })
                            .collect();
                    }
                    let transit = kept
                        .iter()
                        .filter(|c| c.persistent)
                        .map(|c| {
                            let ku = c.crossing.param_a.floor() * cu.map_power as f64;
                            let ks = c.crossing.param_b.floor() * cs.map_power as f64;
                            (ku + ks + 1.0) * graph.nodes[i].orbit.period
                        })
                        .fold(f64::INFINITY, f64::min);
                    if transit.is_finite() {
                        graph.edges.push(GraphEdge {
                            from: i,
                            to: j,
                            unstable_side: *side_u,
                            stable_side: *side_s,
                            crossings: kept,
                            transit_time: transit,
                        });
                    }
                }
            }
        }
    }
    let pairs: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.from, e.to)).collect();
    graph.cycles = find_cycles(n, &pairs);
    graph.certificate = !graph.cycles.is_empty();
    if graph.edges.is_empty() {
        graph
            .notes
            .push("no transverse connections; a double-cover pass may expose homoclinics".into());
    }
    Ok(graph)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainWitness {
    Cycle,
    PeriodicOrbit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeChain {
    pub node: usize,
    pub witnessed: bool,
    pub via: ChainWitness,
    /// smallest jump size the stored data can certify for this node
    pub resolution_bound: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub eps: f64,
    pub t_min: f64,
    pub nodes: Vec<NodeChain>,
}

/// Per-node witness of an ε-pseudo-orbit that returns after time `≥ t_min`.
pub fn chain_connectivity_check(graph: &ConnectionGraph, eps: f64, t_min: f64) -> Result<ChainReport> {
    if graph.nodes.is_empty() {
        return Err(Error::invalid("chain check needs at least one node"));
    }
    let mut nodes = Vec::new();
    for (v, node) in graph.nodes.iter().enumerate() {
        let on_cycle = graph.cycles.iter().position(|c| c.contains(&v));
        let has_edges = graph.edges.iter().any(|e| e.from == v || e.to == v);
        let entry = if let Some(ci) = on_cycle {
            let cycle = &graph.cycles[ci];
            // every cycle edge must offer a crossing resolved below eps
            let mut bound: f64 = 0.0;
            for w in 0..cycle.len() {
                let a = cycle[w];
                let b = cycle[(w + 1) % cycle.len()];
                let best = graph
                    .edges
                    .iter()
                    .filter(|e| e.from == a && e.to == b)
                    .flat_map(|e| e.crossings.iter().filter(|c| c.persistent))
                    .map(|c| c.crossing.segment_length)
                    .fold(f64::INFINITY, f64::min);
                bound = bound.max(best);
            }
            let witnessed = eps >= bound;
            NodeChain {
                node: v,
                witnessed,
                via: if witnessed { ChainWitness::Cycle } else { ChainWitness::None },
                resolution_bound: bound,
                note: if witnessed {
                    format!("pseudo-orbit along cycle {ci}, repeated until t >= {t_min}")
                } else {
                    format!("not witnessed: polyline resolution {bound:.3e} exceeds eps (not a refutation)")
                },
            }
        } else if !has_edges {
            let gap = node.orbit.residual.max(node.orbit.closure_residual);
            let witnessed = eps >= gap;
            NodeChain {
                node: v,
                witnessed,
                via: if witnessed {
                    ChainWitness::PeriodicOrbit
                } else {
                    ChainWitness::None
                },
                resolution_bound: gap,
                note: format!(
                    "periodic orbit of period {:.6} repeated {} times",
                    node.orbit.period,
                    (t_min / node.orbit.period).ceil().max(1.0)
                ),
            }
        } else {
            NodeChain {
                node: v,
                witnessed: false,
                via: ChainWitness::None,
                resolution_bound: f64::INFINITY,
                note: "node has connections but lies on no cycle".into(),
            }
        };
        nodes.push(entry);
    }
    Ok(ChainReport { eps, t_min, nodes })
}

/// The Lagrangian read on a finite cover `ℝ² / Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverLagrangian {
    pub base: TonelliLagrangian,
    pub lattice: Lattice,
}

impl CoverLagrangian {
    pub fn lagrangian(&self, x: [f64; 2], v: [f64; 2]) -> f64 {
        self.base.lagrangian(self.lattice.reduce(x), v)
    }

    /// Covering projection to the base torus.
    pub fn project(&self, x: [f64; 2]) -> [f64; 2] {
        Lattice::UNIT.reduce(x)
    }

    pub fn reduce(&self, x: [f64; 2]) -> [f64; 2] {
        self.lattice.reduce(x)
    }

    /// Deck copies of a base orbit; one per coset of the lattice.
    pub fn lift_orbit(&self, orbit: &PeriodicOrbit) -> Result<Vec<PeriodicOrbit>> {
        if !self.lattice.contains(orbit.class) {
            return Err(Error::Inapplicable(format!(
                "class {:?} does not close on the cover",
                orbit.class
            )));
        }
        let mut out = Vec::new();
        for m1 in 0..self.lattice.n1 {
            for m2 in 0..self.lattice.n2 {
                out.push(orbit.translated([m1, m2]));
            }
        }
        Ok(out)
    }
}

pub fn lift_to_double_cover(l: &TonelliLagrangian) -> CoverLagrangian {
    CoverLagrangian {
        base: l.clone(),
        lattice: Lattice::DOUBLE_X,
    }
}

/// Wraps a cover trajectory sample to the base torus.
pub fn project_lift(p: LiftedPoint) -> [f64; 2] {
    Lattice::UNIT.reduce(p.to_array())
}
