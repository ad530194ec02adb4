//! Geometry of the flat two-torus ℝ²/ℤ²: canonical points, lifts to the
//! universal cover, (co)homology coordinates and closed discrete loops.
//!
//! Positions handed to the dynamics are always *lifted* (points of ℝ²); the
//! canonical representative in `[0,1)²` is only produced on demand by [`wrap`].
//! Homology of a loop is stored as an exact integer displacement and is never
//! reconstructed from floating point differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of nodes of a [`DiscreteLoop`].
pub const MIN_LOOP_NODES: usize = 8;

/// Point of 𝕋² in its canonical representative `[0,1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x1: f64,
    x2: f64,
}

impl TorusPoint {
    /// Builds a torus point from arbitrary finite coordinates (reduced mod 1).
    pub fn new(x1: f64, x2: f64) -> Result<Self> {
        wrap(LiftedPoint::new(x1, x2))
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// The lift of this point lying in the fundamental domain.
    pub fn lift(self) -> LiftedPoint {
        LiftedPoint::new(self.x1, self.x2)
    }
}

/// Point of the universal cover ℝ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub x1: f64,
    pub x2: f64,
}

impl LiftedPoint {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    /// Deck transformation by an integer vector.
    pub fn translate(self, m: [i64; 2]) -> Self {
        Self::new(self.x1 + m[0] as f64, self.x2 + m[1] as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

fn reduce_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduces a lifted point modulo ℤ² into `[0,1)²`.
pub fn wrap(p: LiftedPoint) -> Result<TorusPoint> {
    if !p.is_finite() {
        return Err(Error::invalid(format!("non-finite point ({}, {})", p.x1, p.x2)));
    }
    Ok(TorusPoint {
        x1: reduce_unit(p.x1),
        x2: reduce_unit(p.x2),
    })
}

/// Minimal-displacement representative of `b - a` on the circle ℝ/ℤ, in `[-1/2, 1/2)`.
pub fn circle_delta(a: f64, b: f64) -> f64 {
    let d = b - a;
    d - (d + 0.5).floor()
}

/// Per-coordinate minimal displacement from `a` to `b` on 𝕋².
pub fn toroidal_delta(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [circle_delta(a[0], b[0]), circle_delta(a[1], b[1])]
}

/// Euclidean distance on 𝕋² using seam-minimal differences.
pub fn toroidal_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = toroidal_delta(a, b);
    d[0].hypot(d[1])
}

/// Lifts a sampled torus trajectory continuously, starting from `initial_lift`.
///
/// Consecutive samples are joined by their minimal displacement; a step whose
/// minimal representative reaches half a period in some coordinate is
/// ambiguous and rejected.
pub fn continuous_lift(trajectory: &[TorusPoint], initial_lift: LiftedPoint) -> Result<Vec<LiftedPoint>> {
    continuous_lift_bounded(trajectory, initial_lift, 0.5)
}

/// As [`continuous_lift`] with a custom per-coordinate step bound (`0 < max_step <= 1/2`).
pub fn continuous_lift_bounded(trajectory: &[TorusPoint], initial_lift: LiftedPoint, max_step: f64) -> Result<Vec<LiftedPoint>> {
    if !(max_step > 0.0 && max_step <= 0.5) {
        return Err(Error::invalid(format!("step bound {max_step} outside (0, 1/2]")));
    }
    let Some(first) = trajectory.first() else {
        return Ok(Vec::new());
    };
    if !initial_lift.is_finite() {
        return Err(Error::invalid("non-finite initial lift"));
    }
    let start = wrap(initial_lift)?;
    let off = toroidal_delta(start.to_array(), first.to_array());
    if off[0].abs() > 1e-12 || off[1].abs() > 1e-12 {
        return Err(Error::invalid("initial lift does not project to the first sample"));
    }
    let mut out = Vec::with_capacity(trajectory.len());
    out.push(initial_lift);
    for (i, w) in trajectory.windows(2).enumerate() {
        let d = toroidal_delta(w[0].to_array(), w[1].to_array());
        if d[0].abs() >= max_step || d[1].abs() >= max_step {
            return Err(Error::AmbiguousLift {
                index: i + 1,
                d1: d[0],
                d2: d[1],
            });
        }
        let prev = out[i];
        out.push(LiftedPoint::new(prev.x1 + d[0], prev.x2 + d[1]));
    }
    Ok(out)
}

/// Phase point `(x, v)` of the tangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    pub point: TorusPoint,
    pub v1: f64,
    pub v2: f64,
}

impl TangentState {
    pub fn new(x1: f64, x2: f64, v1: f64, v2: f64) -> Result<Self> {
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::invalid("non-finite velocity"));
        }
        Ok(Self {
            point: TorusPoint::new(x1, x2)?,
            v1,
            v2,
        })
    }

    pub fn x(&self) -> [f64; 2] {
        self.point.to_array()
    }

    pub fn v(&self) -> [f64; 2] {
        [self.v1, self.v2]
    }
}

/// Point `(x, p)` of the cotangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotangentState {
    pub point: TorusPoint,
    pub p1: f64,
    pub p2: f64,
}

impl CotangentState {
    pub fn new(x1: f64, x2: f64, p1: f64, p2: f64) -> Result<Self> {
        if !(p1.is_finite() && p2.is_finite()) {
            return Err(Error::invalid("non-finite momentum"));
        }
        Ok(Self {
            point: TorusPoint::new(x1, x2)?,
            p1,
            p2,
        })
    }

    pub fn x(&self) -> [f64; 2] {
        self.point.to_array()
    }

    pub fn p(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }
}

/// Real homology class in H₁(𝕋²,ℝ) ≅ ℝ², flagged when integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomologyClass {
    pub h1: f64,
    pub h2: f64,
    integral: Option<[i64; 2]>,
}

impl HomologyClass {
    pub fn integral(k: i64, l: i64) -> Self {
        Self {
            h1: k as f64,
            h2: l as f64,
            integral: Some([k, l]),
        }
    }

    /// A real class; the integrality flag is set iff both components are exact integers.
    pub fn real(h1: f64, h2: f64) -> Self {
        let as_int = |x: f64| (x.fract() == 0.0 && x.abs() < 9.0e15).then_some(x as i64);
        let integral = match (as_int(h1), as_int(h2)) {
            (Some(k), Some(l)) => Some([k, l]),
            _ => None,
        };
        Self { h1, h2, integral }
    }

    pub fn as_integral(&self) -> Option<[i64; 2]> {
        self.integral
    }

    pub fn is_integral(&self) -> bool {
        self.integral.is_some()
    }

    pub fn norm(&self) -> f64 {
        self.h1.hypot(self.h2)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::real(self.h1 * s, self.h2 * s)
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.h1, self.h2]
    }
}

/// Cohomology class represented by the constant 1-form `w1 dx1 + w2 dx2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CohomologyClass {
    pub w1: f64,
    pub w2: f64,
}

impl CohomologyClass {
    pub const ZERO: Self = Self { w1: 0.0, w2: 0.0 };

    pub const fn new(w1: f64, w2: f64) -> Self {
        Self { w1, w2 }
    }

    pub fn pairing(&self, h: &HomologyClass) -> f64 {
        self.w1 * h.h1 + self.w2 * h.h2
    }

    /// Value of the form on a tangent vector.
    pub fn apply(&self, v: [f64; 2]) -> f64 {
        self.w1 * v[0] + self.w2 * v[1]
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.w1, self.w2]
    }
}

/// Closed discretized curve: `N` lifted nodes on a uniform time grid of step `T/N`.
///
/// Node `N` is implicit and equals node `0` translated by the integer class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLoop {
    nodes: Vec<LiftedPoint>,
    period: f64,
    class: [i64; 2],
}

impl DiscreteLoop {
    pub fn new(nodes: Vec<LiftedPoint>, period: f64, class: [i64; 2]) -> Result<Self> {
        if nodes.len() < MIN_LOOP_NODES {
            return Err(Error::Resolution(format!(
                "loop needs at least {MIN_LOOP_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid(format!("loop period must be positive, got {period}")));
        }
        if nodes.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite loop node"));
        }
        Ok(Self { nodes, period, class })
    }

    /// Constant-speed straight loop through `origin` in the given class.
    pub fn straight(origin: LiftedPoint, class: [i64; 2], period: f64, n: usize) -> Result<Self> {
        let nodes = (0..n)
            .map(|i| {
                let s = i as f64 / n as f64;
                LiftedPoint::new(origin.x1 + s * class[0] as f64, origin.x2 + s * class[1] as f64)
            })
            .collect();
        Self::new(nodes, period, class)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[LiftedPoint] {
        &self.nodes
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn class(&self) -> [i64; 2] {
        self.class
    }

    pub fn homology(&self) -> HomologyClass {
        HomologyClass::integral(self.class[0], self.class[1])
    }

    pub fn dt(&self) -> f64 {
        self.period / self.nodes.len() as f64
    }

    /// Node with periodic extension: `node(i + N) = node(i) + class`.
    pub fn node(&self, i: usize) -> [f64; 2] {
        let n = self.nodes.len();
        let wraps = (i / n) as f64;
        let p = self.nodes[i % n];
        [p.x1 + wraps * self.class[0] as f64, p.x2 + wraps * self.class[1] as f64]
    }

    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), period, self.class)
    }

    pub fn with_nodes(&self, nodes: Vec<LiftedPoint>) -> Result<Self> {
        Self::new(nodes, self.period, self.class)
    }

    /// Cyclic relabeling: node `shift` becomes node `0`.
    pub fn rotate(&self, shift: usize) -> Self {
        let n = self.nodes.len();
        let nodes = (0..n).map(|i| LiftedPoint::from_array(self.node(i + shift % n))).collect();
        Self {
            nodes,
            period: self.period,
            class: self.class,
        }
    }

    /// Translates every node by a deck transformation.
    pub fn translate(&self, m: [i64; 2]) -> Self {
        Self {
            nodes: self.nodes.iter().map(|p| p.translate(m)).collect(),
            period: self.period,
            class: self.class,
        }
    }

    /// Euclidean length of the closed polyline in the cover.
    pub fn length(&self) -> f64 {
        (0..self.nodes.len())
            .map(|i| {
                let a = self.node(i);
                let b = self.node(i + 1);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }
}

/// Resamples a loop to `m` nodes by linear interpolation in the normalized
/// curve parameter, keeping class and period.
pub fn resample_loop(lp: &DiscreteLoop, m: usize) -> Result<DiscreteLoop> {
    if m < MIN_LOOP_NODES {
        return Err(Error::Resolution(format!("cannot resample to {m} < {MIN_LOOP_NODES} nodes")));
    }
    let n = lp.len();
    if m == n {
        return Ok(lp.clone());
    }
    let nodes = (0..m)
        .map(|j| {
            let u = j as f64 * n as f64 / m as f64;
            let i = u.floor() as usize;
            let f = u - i as f64;
            let a = lp.node(i);
            let b = lp.node(i + 1);
            LiftedPoint::new(a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
        })
        .collect();
    DiscreteLoop::new(nodes, lp.period(), lp.class())
}

/// Integer lattice of deck transformations `n1 ℤ × n2 ℤ`; the unit lattice is
/// 𝕋² itself and `(2, 1)` the double cover used for homoclinic searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub n1: i64,
    pub n2: i64,
}

impl Lattice {
    pub const UNIT: Lattice = Lattice { n1: 1, n2: 1 };
    pub const DOUBLE_X: Lattice = Lattice { n1: 2, n2: 1 };

    pub fn contains(&self, m: [i64; 2]) -> bool {
        m[0].rem_euclid(self.n1) == 0 && m[1].rem_euclid(self.n2) == 0
    }

    /// Canonical representative in `[0,n1) × [0,n2)`.
    pub fn reduce(&self, p: [f64; 2]) -> [f64; 2] {
        let r = |x: f64, n: f64| {
            let y = x - (x / n).floor() * n;
            if y >= n {
                0.0
            } else {
                y
            }
        };
        [r(p[0], self.n1 as f64), r(p[1], self.n2 as f64)]
    }

    /// Minimal displacement from `a` to `b` modulo the lattice.
    pub fn delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let d = |x: f64, n: f64| {
            let y = x / n;
            (y - (y + 0.5).floor()) * n
        };
        [d(b[0] - a[0], self.n1 as f64), d(b[1] - a[1], self.n2 as f64)]
    }
}
