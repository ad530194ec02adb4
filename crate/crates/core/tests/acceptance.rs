//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts.
//!
//! Run with `cargo test -p aubry-core --test acceptance --release` for
//! realistic timings; the heavy criteria take several minutes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aubry_core::config::ExperimentConfig;
use aubry_core::entropy::{self, CoveringOptions, Method};
use aubry_core::flow::{self, IntegrationOptions, Phase};
use aubry_core::fourier::{FourierSeries, FourierTerm};
use aubry_core::lagrangian::{self, MetricSeries, TonelliLagrangian};
use aubry_core::linalg::Complex;
use aubry_core::mather::{self, BetaOptions, CriticalOptions, OmegaOptions, OmegaResult, RationalClass};
use aubry_core::orbits::{self, PeriodicOrbit, RefineOptions, Stability};
use aubry_core::pipeline::{self, ExitStatus, RunOptions, RunOutcome};
use aubry_core::torus::{CohomologyClass, CotangentState, TangentState, TorusPoint};
use aubry_core::variational::{self, LoopOptions, PeriodMode, PotentialOptions};

/// Criteria run one at a time so their wall-clock budgets mean something on
/// small machines.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Criterion {
    number: u32,
    title: &'static str,
    started: Instant,
    checks: Vec<(String, bool, String)>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Self {
            number,
            title,
            started: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push((label.into(), ok, detail.into()));
    }

    fn within_budget(&mut self, budget: Duration) {
        let elapsed = self.started.elapsed();
        self.check(
            format!("runtime < {} s", budget.as_secs()),
            elapsed < budget,
            format!("{:.1} s", elapsed.as_secs_f64()),
        );
    }

    fn finish(self) {
        let failed: Vec<_> = self.checks.iter().filter(|c| !c.1).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "criterion {} ({}): {verdict} [{} checks, {:.1} s]",
            self.number,
            self.title,
            self.checks.len(),
            self.started.elapsed().as_secs_f64()
        );
        for (label, _, detail) in &failed {
            let _ = writeln!(err, "    failed: {label}: {detail}");
        }
        drop(err);
        assert!(failed.is_empty(), "criterion {} failed: {:?}", self.number, failed);
    }
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter()
        .fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Non-constant metric, magnetic form and potential.
fn structured_lagrangian() -> TonelliLagrangian {
    let metric = MetricSeries {
        g11: FourierSeries::new(1.0, vec![FourierTerm::cos(1, 0, 0.3)]).unwrap(),
        g12: FourierSeries::new(0.0, vec![FourierTerm::sin(0, 1, 0.1)]).unwrap(),
        g22: FourierSeries::new(1.2, vec![FourierTerm::cos(1, 1, 0.2)]).unwrap(),
    };
    let potential = FourierSeries::new(0.0, vec![FourierTerm::cos(1, 0, 0.1), FourierTerm::sin(1, 1, 0.05)]).unwrap();
    let magnetic = [
        FourierSeries::new(0.1, vec![FourierTerm::sin(0, 1, 0.2)]).unwrap(),
        FourierSeries::new(-0.05, vec![FourierTerm::cos(1, 0, 0.15)]).unwrap(),
    ];
    TonelliLagrangian::custom(metric, potential, magnetic).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, speed: f64) -> TangentState {
    TangentState::new(
        rng.random_range(0.0..1.0),
        rng.random_range(0.0..1.0),
        rng.random_range(-speed..speed),
        rng.random_range(-speed..speed),
    )
    .unwrap()
}

fn refined(l: &TonelliLagrangian, class: [i64; 2], energy: f64) -> Result<PeriodicOrbit, String> {
    let period = ((class[0] * class[0] + class[1] * class[1]) as f64).sqrt();
    let lp = variational::minimize_loop(
        l,
        class,
        CohomologyClass::ZERO,
        PeriodMode::Fixed(period),
        3,
        &LoopOptions::default(),
    )
    .map_err(|e| e.to_string())?
    .lp;
    orbits::refine_orbit(
        l,
        &lp,
        &RefineOptions {
            energy: Some(energy),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())
}

fn grid_max(l: &TonelliLagrangian) -> f64 {
    let n = 512;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            best = best.max(l.potential_value([i as f64 / n as f64, j as f64 / n as f64]));
        }
    }
    best
}

#[test]
fn criterion_1_flat_torus() {
    let _guard = serial();
    let mut c = Criterion::new(1, "flat torus");
    let l = TonelliLagrangian::flat_kinetic();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let mut drift: f64 = 0.0;
    for _ in 0..8 {
        let s0 = random_state(&mut rng, 2.0);
        let traj = flow::integrate(&l, &s0, 10.0, 1e-3).unwrap();
        for (t, p) in traj.times.iter().zip(&traj.lifts) {
            drift = drift.max((p.x1 - (s0.point.x1() + t * s0.v1)).abs());
            drift = drift.max((p.x2 - (s0.point.x2() + t * s0.v2)).abs());
        }
    }
    c.check("flow is x + t v to 1e-8", drift <= 1e-8, format!("max deviation {drift:e}"));

    let classes = [
        (0, 0, 1),
        (1, 0, 1),
        (0, 1, 1),
        (-1, 0, 1),
        (1, 1, 1),
        (1, -1, 1),
        (1, 0, 2),
        (0, 1, 2),
        (1, 1, 2),
        (-1, 1, 2),
        (2, 1, 1),
        (1, 2, 1),
        (1, 0, 3),
        (2, 1, 3),
        (1, 1, 3),
        (3, 1, 2),
    ];
    let mut beta_err: f64 = 0.0;
    for (p, q, n) in classes {
        let s = mather::beta_at(&l, RationalClass::new(p, q, n).unwrap(), &BetaOptions::default()).unwrap();
        beta_err = beta_err.max((s.beta - 0.5 * (s.h[0] * s.h[0] + s.h[1] * s.h[1])).abs());
    }
    c.check(
        "beta is |h|^2 / 2 on 16 classes to 1e-3",
        beta_err <= 1e-3,
        format!("max error {beta_err:e}"),
    );

    let c0 = mather::critical_value(&l, &CriticalOptions::default()).unwrap();
    c.check("critical value 0 +- 1e-3", c0.value.abs() <= 1e-3, format!("{}", c0.value));

    match refined(&l, [0, 1], 0.5) {
        Ok(o) => c.check(
            "vertical geodesic degenerate",
            o.stability == Stability::Degenerate,
            format!("{:?}", o.stability),
        ),
        Err(e) => c.check("vertical geodesic degenerate", false, e),
    }

    let cover = entropy::covering_entropy(
        &l,
        0.5,
        &CoveringOptions {
            seed: 11,
            ..Default::default()
        },
    )
    .unwrap();
    c.check(
        "covering slope on T in [20, 40] <= 0.05",
        cover.estimate <= 0.05,
        format!("{}", cover.estimate),
    );

    c.within_budget(Duration::from_secs(60));
    c.finish();
}

#[test]
fn criterion_2_duality() {
    let _guard = serial();
    let mut c = Criterion::new(2, "Legendre duality");
    let l = structured_lagrangian();
    let mut rng = ChaCha8Rng::seed_from_u64(12);

    let mut round_trip: f64 = 0.0;
    let mut energy_gap: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_state(&mut rng, 3.0);
        let p = lagrangian::legendre(&l, &s).unwrap();
        let back = lagrangian::inverse_legendre(&l, &p).unwrap();
        round_trip = round_trip.max(max_abs([back.v1 - s.v1, back.v2 - s.v2]));
        let e = lagrangian::energy(&l, &s).unwrap();
        let h = lagrangian::hamiltonian(&l, &p).unwrap();
        energy_gap = energy_gap.max((e - h).abs());
    }
    c.check("round trip <= 1e-10", round_trip <= 1e-10, format!("{round_trip:e}"));
    c.check(
        "energy equals H after Legendre <= 1e-10",
        energy_gap <= 1e-10,
        format!("{energy_gap:e}"),
    );

    let mut most_negative: f64 = 0.0;
    let mut at_transform: f64 = 0.0;
    for _ in 0..10_000 {
        let s = random_state(&mut rng, 3.0);
        let x = [s.point.x1(), s.point.x2()];
        let cot = CotangentState::new(x[0], x[1], rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)).unwrap();
        let h = lagrangian::hamiltonian(&l, &cot).unwrap();
        let gap = h + l.lagrangian(x, s.v()) - (cot.p1 * s.v1 + cot.p2 * s.v2);
        most_negative = most_negative.min(gap);
        let v = lagrangian::inverse_legendre(&l, &cot).unwrap();
        let zero = h + l.lagrangian(x, v.v()) - (cot.p1 * v.v1 + cot.p2 * v.v2);
        at_transform = at_transform.max(zero.abs());
    }
    c.check(
        "Fenchel gap nonnegative",
        most_negative >= -1e-12,
        format!("min {most_negative:e}"),
    );
    c.check(
        "Fenchel gap zero at the transform <= 1e-9",
        at_transform <= 1e-9,
        format!("{at_transform:e}"),
    );

    c.within_budget(Duration::from_secs(60));
    c.finish();
}

#[test]
fn criterion_3_mechanical_family() {
    let _guard = serial();
    let mut c = Criterion::new(3, "mechanical family");
    for eps in [0.01, 0.05] {
        let l = TonelliLagrangian::two_well(eps, 0.0).unwrap();
        let oracle = grid_max(&l);
        let c0 = mather::critical_value(&l, &CriticalOptions::default()).unwrap().value;
        c.check(
            format!("eps {eps}: critical value is the potential maximum"),
            (c0 - oracle).abs() <= 1e-3 && (c0 - 2.0 * eps).abs() <= 1e-3,
            format!("c0 {c0}, grid max {oracle}"),
        );

        let r = match mather::omega_for_energy(&l, 0.5, [0, 1], c0, &OmegaOptions::default()) {
            Ok(r) => r,
            Err(e) => {
                c.check(format!("eps {eps}: cohomology search"), false, e.to_string());
                continue;
            }
        };
        c.check(
            format!("eps {eps}: |lambda0 - 1| <= 2 eps"),
            (r.lambda0 - 1.0).abs() <= 2.0 * eps,
            format!("{}", r.lambda0),
        );
        c.check(
            format!("eps {eps}: alpha validation gap <= 1e-3"),
            r.validation_gap <= 1e-3,
            format!("{:e}", r.validation_gap),
        );
        let Some(proxy) = r.proxy.as_ref().filter(|p| p.count() > 0) else {
            c.check(format!("eps {eps}: proxy orbits"), false, "no proxy orbits");
            continue;
        };
        let energy_err = max_abs(proxy.energies.iter().map(|e| e - 0.5));
        c.check(
            format!("eps {eps}: proxy energies 0.5 +- 1e-4"),
            energy_err <= 1e-4,
            format!("{energy_err:e}"),
        );
        for (i, o) in proxy.orbits.iter().enumerate() {
            let n0 = proxy.multiplicities[i];
            let rho = o.rotation_vector();
            let expected = [0.0, n0.unsigned_abs() as f64 / o.period];
            let integer_residual = proxy.rotation_residuals[i].max(o.closure_residual);
            c.check(
                format!("eps {eps} orbit {i}: rotation is class / (|n0| T)"),
                o.class == [0, n0] && max_abs([rho[0] - expected[0], rho[1] - expected[1]]) <= 1e-12 && integer_residual < 1e-6,
                format!("class {:?}, n0 {n0}, residual {integer_residual:e}", o.class),
            );
        }
    }
    c.within_budget(Duration::from_secs(300));
    c.finish();
}

fn complex_product(a: Complex, b: Complex) -> [f64; 2] {
    [a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re]
}

#[test]
fn criterion_4_symplectic_structure() {
    let _guard = serial();
    let mut c = Criterion::new(4, "symplectic structure");

    let cases: Vec<(&str, TonelliLagrangian, [i64; 2])> = vec![
        ("two-well 0.01", TonelliLagrangian::two_well(0.01, 0.0).unwrap(), [0, 1]),
        ("two-well 0.05", TonelliLagrangian::two_well(0.05, 0.0).unwrap(), [0, 1]),
        ("two-well 0.05", TonelliLagrangian::two_well(0.05, 0.0).unwrap(), [1, 1]),
        ("coupled two-well", TonelliLagrangian::two_well(0.05, 0.01).unwrap(), [0, 1]),
        ("coupled two-well", TonelliLagrangian::two_well(0.05, 0.01).unwrap(), [1, 0]),
        ("structured", structured_lagrangian(), [0, 1]),
    ];
    let mut hyperbolic: Option<(TonelliLagrangian, PeriodicOrbit)> = None;
    for (name, l, class) in cases {
        let o = match refined(&l, class, 0.5) {
            Ok(o) => o,
            Err(e) => {
                c.check(format!("{name} {class:?}: refinement"), false, e);
                continue;
            }
        };
        let x0 = [o.seed_lift[0], o.seed_lift[1]];
        let xt = [x0[0] + class[0] as f64, x0[1] + class[1] as f64];
        let det = o.monodromy.symplectic_det(&l, x0, xt);
        c.check(
            format!("{name} {class:?}: monodromy det 1 +- 1e-6"),
            (det - 1.0).abs() <= 1e-6,
            format!("{det}"),
        );
        let prod = complex_product(o.floquet[0], o.floquet[1]);
        c.check(
            format!("{name} {class:?}: Floquet product 1 +- 1e-6"),
            (prod[0] - 1.0).abs() <= 1e-6 && prod[1].abs() <= 1e-6,
            format!("{prod:?} ({:?})", o.stability),
        );
        if hyperbolic.is_none() && o.stability == Stability::Hyperbolic {
            hyperbolic = Some((l, o));
        }
    }

    match hyperbolic {
        Some((l, o)) => {
            let oracle = o.floquet[0].abs().ln() / o.period;
            match entropy::lyapunov_on_orbit(&l, &o, 40) {
                Ok(e) => c.check(
                    "orbit Lyapunov exponent within 5% of log|lambda| / T",
                    (e.exponent / oracle - 1.0).abs() <= 0.05,
                    format!("{} vs {oracle}", e.exponent),
                ),
                Err(e) => c.check("orbit Lyapunov exponent", false, e.to_string()),
            }
        }
        None => c.check("a hyperbolic orbit exists", false, "none of the refined orbits is hyperbolic"),
    }

    let l = structured_lagrangian();
    let opts = IntegrationOptions::with_dt(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let s = random_state(&mut rng, 1.0);
        let z0: Phase = [s.point.x1(), s.point.x2(), s.v1, s.v2];
        let (_, frame) = flow::flow_with_frame(&l, &z0, 3.0, &opts).unwrap();
        let h = 1e-6;
        for j in 0..4 {
            let mut plus = z0;
            let mut minus = z0;
            plus[j] += h;
            minus[j] -= h;
            let a = flow::flow_map(&l, &plus, 3.0, &opts).unwrap();
            let b = flow::flow_map(&l, &minus, 3.0, &opts).unwrap();
            let fd: Vec<f64> = (0..4).map(|i| (a[i] - b[i]) / (2.0 * h)).collect();
            let col = frame.column(j);
            let scale = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            let diff = (0..4).map(|i| (col[i] - fd[i]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff / scale);
        }
    }
    c.check(
        "variational frame vs finite differences <= 1e-4",
        worst <= 1e-4,
        format!("{worst:e}"),
    );
    c.finish();
}

fn wrapped(z: &Phase) -> TorusPoint {
    TorusPoint::new(z[0].rem_euclid(1.0), z[1].rem_euclid(1.0)).unwrap()
}

#[test]
fn criterion_5_barrier() {
    let _guard = serial();
    let mut c = Criterion::new(5, "barrier and semidistance");
    let l = TonelliLagrangian::two_well(0.05, 0.0).unwrap();
    let energy = 0.5;
    let r: OmegaResult = mather::omega_for_energy(&l, energy, [0, 1], 0.1, &OmegaOptions::default()).unwrap();
    let omega = r.omega;
    let orbits: Vec<PeriodicOrbit> = match r.proxy.as_ref().filter(|p| p.count() > 0) {
        Some(p) => p.orbits.clone(),
        None => vec![r.orbit.clone()],
    };
    let grid = variational::geometric_grid(5.0, 20.0, 8);
    let popts = PotentialOptions {
        nodes_per_time: 32.0,
        rotation_hint: Some(r.orbit.rotation_vector()),
        ..Default::default()
    };

    // random points on the proxy orbits
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut pool: Vec<TorusPoint> = Vec::new();
    let mut starts: Vec<(usize, Phase)> = Vec::new();
    for k in 0..6 {
        let which = k % orbits.len();
        let traj = orbits[which].trajectory(&l, 1).unwrap();
        let z = traj.phase(rng.random_range(0..traj.len() - 1));
        pool.push(wrapped(&z));
        starts.push((which, z));
    }
    let n = pool.len();
    let mut h = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in 0..n {
            match variational::peierls_barrier(&l, &pool[i], &pool[j], omega, energy, &grid, &popts) {
                Ok(s) => h[i][j] = s.running_min,
                Err(e) => c.check(format!("barrier {i} -> {j}"), false, e.to_string()),
            }
        }
    }
    let diag = max_abs((0..n).map(|i| h[i][i]));
    c.check(
        "h(x, x) <= 1e-3 on proxy points",
        (0..n).all(|i| h[i][i] <= 1e-3),
        format!("max |h(x,x)| {diag:e}"),
    );

    let (d01, _, _) = variational::aubry_semidistance(&l, &pool[0], &pool[1], omega, energy, &grid, &popts).unwrap();
    let (d10, _, _) = variational::aubry_semidistance(&l, &pool[1], &pool[0], omega, energy, &grid, &popts).unwrap();
    c.check("semidistance symmetric", d01 == d10, format!("{d01} vs {d10}"));

    let delta = |i: usize, j: usize| h[i][j] + h[j][i];
    let min_delta = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| delta(i, j))
        .fold(f64::INFINITY, f64::min);
    c.check("semidistance >= -2e-3", min_delta >= -2e-3, format!("min {min_delta:e}"));

    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        worst = worst.max(delta(i, k) - delta(i, j) - delta(j, k));
    }
    c.check(
        "triangle inequality within 4e-3 on 50 triples",
        worst <= 4e-3,
        format!("max excess {worst:e}"),
    );

    let mut residual = f64::NEG_INFINITY;
    for (which, z) in &starts {
        let o = &orbits[*which];
        let seg = variational::segment_from(&l, z, o.period.max(1.0), o.dt).unwrap();
        match variational::semistatic_residual(&l, &seg, omega, energy, &popts) {
            Ok(s) => residual = residual.max(s.residual),
            Err(e) => c.check("semistatic residual", false, e.to_string()),
        }
    }
    c.check("semistatic residual <= 1e-4", residual <= 1e-4, format!("max {residual:e}"));
    c.finish();
}

struct MechanicalRun {
    dir: tempfile::TempDir,
    outcome: RunOutcome,
    elapsed: Duration,
}

fn mechanical_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/mechanical.toml");
    ExperimentConfig::from_file(&path).unwrap()
}

fn run_into(dir: &Path, workers: usize) -> RunOutcome {
    let opts = RunOptions {
        out: dir.to_path_buf(),
        workers,
        resume: false,
    };
    pipeline::run_pipeline(&mechanical_config(), &opts).unwrap()
}

/// The eight-worker run shared by the smoke and determinism criteria.
fn mechanical_run() -> &'static MechanicalRun {
    static RUN: OnceLock<MechanicalRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let outcome = run_into(dir.path(), 8);
        MechanicalRun {
            dir,
            outcome,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_6_pipeline_smoke() {
    let _guard = serial();
    let mut c = Criterion::new(6, "mechanical pipeline");
    let run = mechanical_run();
    let out = &run.outcome;
    c.check(
        "exit status success",
        out.status == ExitStatus::Success,
        format!("{:?}", out.status),
    );
    let c0 = out.manifest.critical_value.unwrap_or(f64::NAN);
    c.check("critical value 0.1 below c = 0.5", (c0 - 0.1).abs() <= 1e-3, format!("{c0}"));

    let class = out.classification.as_ref();
    c.check(
        "hyperbolicity holds on the proxy",
        class.is_some_and(|k| k.holds && k.all_hyperbolic),
        format!("{:?}", class.map(|k| (&k.failure, k.orbits.len()))),
    );

    let cover = out.graph.as_ref().and_then(|g| g.double_cover.as_ref());
    let stable = cover
        .map(|g| {
            g.edges
                .iter()
                .flat_map(|e| &e.crossings)
                .filter(|p| p.crossing.transverse && p.persistent && p.displacement.is_some_and(|d| d < 1e-3))
                .count()
        })
        .unwrap_or(0);
    c.check(
        "double cover has a transverse crossing stable under refinement",
        stable >= 1,
        format!("{stable} stable crossings"),
    );
    c.check(
        "certificate set",
        out.manifest.certificate,
        format!("{:?}", out.manifest.hypothesis_failures),
    );

    let est = |m| out.entropy.as_ref().and_then(|e| e.estimate(m)).unwrap_or(f64::NAN);
    let (covering, lyapunov, horseshoe) = (est(Method::Covering), est(Method::Lyapunov), est(Method::Horseshoe));
    c.check(
        "entropy estimates positive",
        covering > 0.0 && lyapunov > 0.0 && horseshoe > 0.0,
        format!("covering {covering}, lyapunov {lyapunov}, horseshoe {horseshoe}"),
    );
    c.check(
        "Lyapunov >= 0.2 x horseshoe",
        lyapunov >= 0.2 * horseshoe,
        format!("{lyapunov} vs {horseshoe}"),
    );
    c.check(
        "runtime < 1800 s",
        run.elapsed < Duration::from_secs(1800),
        format!("{:.1} s", run.elapsed.as_secs_f64()),
    );
    c.finish();
}

fn artifacts(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else if path.file_name().is_some_and(|n| n != pipeline::TIMINGS) {
                acc.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(root, root, &mut acc);
    acc.sort();
    acc
}

#[test]
fn criterion_7_determinism() {
    let _guard = serial();
    let mut c = Criterion::new(7, "determinism across worker counts");
    let eight = mechanical_run();
    let single = tempfile::tempdir().unwrap();
    run_into(single.path(), 1);
    let a = artifacts(eight.dir.path());
    let b = artifacts(single.path());
    let names = |v: &[(PathBuf, Vec<u8>)]| v.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    c.check(
        "same artifact set",
        names(&a) == names(&b),
        format!("{} vs {} files", a.len(), b.len()),
    );
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    c.check(
        "byte-identical artifacts",
        differing.is_empty(),
        format!("differ: {differing:?}"),
    );
    c.check("artifacts written", a.len() >= 8, format!("{} files", a.len()));
    c.finish();
}
