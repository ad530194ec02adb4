//! End-to-end experiment runs: stages, cache, artifacts and exit codes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::entropy::{self, EntropyReport, OrbitExponent};
use crate::error::{Error, Result};
use crate::lagrangian::{self, TonelliLagrangian, ValidationReport};
use crate::mather::{self, AlphaSample, BetaSample, CriticalValue, OmegaResult, ProxyStatus};
use crate::orbits::{self, ConnectionGraph, PeriodicOrbit, Stability};
use crate::torus::{Lattice, TorusPoint};
use crate::variational::{self, BarrierSample, SemistaticResidual};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitStatus {
    Success,
    ConfigError,
    NotTonelli,
    SubCritical,
    /// a numerical stage the run cannot continue without failed
    ComputationFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::ConfigError => 1,
            ExitStatus::NotTonelli => 2,
            ExitStatus::SubCritical => 3,
            ExitStatus::ComputationFailure => 4,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidInput(_) => ExitStatus::ConfigError,
            Error::NotTonelli(_) | Error::IllConditioned(_) | Error::InconsistentDerivatives { .. } => ExitStatus::NotTonelli,
            Error::BelowCritical { .. } => ExitStatus::SubCritical,
            _ => ExitStatus::ComputationFailure,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: usize,
    pub resume: bool,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self {
            out: out.into(),
            workers: 1,
            resume: false,
        }
    }
}

/// Value or recorded failure of a stage that does not abort the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome<T> {
    Value(T),
    Failed(String),
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Value(v),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Outcome::Value(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub index: usize,
    pub period: f64,
    pub energy: f64,
    pub rotation_vector: [f64; 2],
    pub stability: Stability,
    pub floquet_moduli: [f64; 2],
    pub floquet_product: f64,
    pub monodromy_det: f64,
    pub closure_residual: f64,
}

/// Hyperbolicity report for the proxy orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub orbits: Vec<OrbitSummary>,
    pub all_hyperbolic: bool,
    pub finite_proxy: bool,
    pub holds: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStage {
    pub base: Option<ConnectionGraph>,
    pub double_cover: Option<ConnectionGraph>,
    /// a transverse cycle exists on the base torus or its double cover
    pub holds: bool,
    pub certificate: bool,
    pub failure: Option<String>,
}

impl GraphStage {
    pub fn certified_graph(&self) -> Option<&ConnectionGraph> {
        [self.base.as_ref(), self.double_cover.as_ref()]
            .into_iter()
            .flatten()
            .find(|g| g.certificate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierStage {
    pub alpha: f64,
    pub samples: Vec<Outcome<BarrierSample>>,
    pub semistatic: Vec<Outcome<SemistaticResidual>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyStage {
    pub energy: f64,
    pub covering: Outcome<EntropyReport>,
    pub lyapunov: Outcome<EntropyReport>,
    pub horseshoe: Outcome<EntropyReport>,
    pub orbit_exponents: Vec<Outcome<OrbitExponent>>,
}

impl EntropyStage {
    pub fn estimate(&self, method: entropy::Method) -> Option<f64> {
        let o = match method {
            entropy::Method::Covering => &self.covering,
            entropy::Method::Lyapunov => &self.lyapunov,
            entropy::Method::Horseshoe => &self.horseshoe,
        };
        o.value().map(|r| r.estimate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    /// size and hash are absent for files whose content varies between runs
    pub bytes: Option<u64>,
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub energy: f64,
    pub exit_code: i32,
    pub stages: Vec<StageRecord>,
    pub critical_value: Option<f64>,
    pub certificate: bool,
    pub hypothesis_failures: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheUse {
    Hit,
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub cache: CacheUse,
    pub seconds: f64,
}

/// Run-specific bookkeeping kept out of the manifest so that artifacts stay
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix: u64,
    pub workers: usize,
    pub stages: Vec<StageTiming>,
}

/// Everything a pipeline run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub manifest: RunManifest,
    pub timings: Timings,
    pub validation: Option<ValidationReport>,
    pub critical: Option<CriticalValue>,
    pub omega: Option<OmegaResult>,
    pub classification: Option<Classification>,
    pub graph: Option<GraphStage>,
    pub barrier: Option<BarrierStage>,
    pub entropy: Option<EntropyStage>,
}

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

/// Writes through a temporary file in the target directory and renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| Error::invalid(format!("serialization: {e}")))?;
    s.push(b'\n');
    Ok(s)
}

/// Runs `f` on a pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Derives every stage seed from the experiment seed.
pub fn seeded(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    let s = cfg.seed;
    let mix = |own: u64, tag: i64| mather::mix_seed(s, &[own as i64, tag]);
    c.critical.beta.seed = mix(c.critical.beta.seed, 1);
    c.omega.beta.seed = mix(c.omega.beta.seed, 2);
    c.omega.proxy.seed = mix(c.omega.proxy.seed, 3);
    c.entropy.covering.seed = mix(c.entropy.covering.seed, 4);
    c.entropy.lyapunov.seed = mix(c.entropy.lyapunov.seed, 5);
    c
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: Some(bytes.len() as u64),
            sha256: Some(hex::encode(Sha256::digest(bytes))),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

struct Cache {
    dir: PathBuf,
    resume: bool,
    timings: Vec<StageTiming>,
}

impl Cache {
    fn stage<T: Serialize + DeserializeOwned>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let path = self.dir.join(format!("{name}.json"));
        let start = Instant::now();
        if self.resume {
            if let Ok(bytes) = std::fs::read(&path) {
                match serde_json::from_slice(&bytes) {
                    Ok(v) => {
                        self.timings.push(StageTiming {
                            name: name.into(),
                            cache: CacheUse::Hit,
                            seconds: start.elapsed().as_secs_f64(),
                        });
                        return Ok(v);
                    }
                    Err(e) => log::warn!("cache entry {} unreadable ({e}); recomputing", path.display()),
                }
            }
        }
        let v = f()?;
        let bytes = serde_json::to_vec(&v).map_err(|e| Error::invalid(format!("serialization: {e}")))?;
        // non-finite floats serialize as null and would not read back
        if serde_json::from_slice::<T>(&bytes).is_ok() {
            write_atomic(&path, &bytes)?;
        } else {
            log::warn!("stage {name} result does not round-trip through JSON; not cached");
        }
        self.timings.push(StageTiming {
            name: name.into(),
            cache: CacheUse::Computed,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(v)
    }
}

fn classify_proxy(l: &TonelliLagrangian, omega: &OmegaResult) -> Classification {
    let Some(proxy) = &omega.proxy else {
        return Classification {
            orbits: Vec::new(),
            all_hyperbolic: false,
            finite_proxy: false,
            holds: false,
            failure: Some("no Mather set proxy was computed".into()),
        };
    };
    let orbits: Vec<OrbitSummary> = proxy
        .orbits
        .iter()
        .enumerate()
        .map(|(index, o)| {
            let m = [o.floquet[0].abs(), o.floquet[1].abs()];
            OrbitSummary {
                index,
                period: o.period,
                energy: o.energy,
                rotation_vector: o.rotation_vector(),
                stability: orbits::classify(l, o),
                floquet_moduli: m,
                floquet_product: m[0] * m[1],
                monodromy_det: o.monodromy.det(),
                closure_residual: o.closure_residual,
            }
        })
        .collect();
    let finite_proxy = proxy.status == ProxyStatus::Finite;
    let all_hyperbolic = !orbits.is_empty() && orbits.iter().all(|o| o.stability == Stability::Hyperbolic);
    let failure = if !finite_proxy {
        Some("the minimizers form a non-isolated family; no finite orbit list exists".into())
    } else if !all_hyperbolic {
        Some("a proxy orbit is not hyperbolic".into())
    } else {
        None
    };
    Classification {
        orbits,
        all_hyperbolic,
        finite_proxy,
        holds: failure.is_none(),
        failure,
    }
}

fn graph_stage(l: &TonelliLagrangian, cfg: &ExperimentConfig, omega: &OmegaResult, class: &Classification) -> GraphStage {
    let mut out = GraphStage {
        base: None,
        double_cover: None,
        holds: false,
        certificate: false,
        failure: None,
    };
    if !class.holds {
        out.failure = Some("skipped: the hyperbolicity condition does not hold".into());
        return out;
    }
    let orbits: &[PeriodicOrbit] = omega.proxy.as_ref().map(|p| p.orbits.as_slice()).unwrap_or(&[]);
    let opts = &cfg.graph.options;
    let refine = &cfg.omega.refine;
    let base = match orbits::build_connection_graph(l, orbits, Lattice::UNIT, opts, refine) {
        Ok(g) => g,
        Err(e) => {
            out.failure = Some(format!("connection graph: {e}"));
            return out;
        }
    };
    let lonely = base.nodes.len() == 1 && !base.has_self_loop();
    out.base = Some(base);
    if lonely && cfg.graph.double_cover {
        match orbits::build_connection_graph(l, orbits, Lattice::DOUBLE_X, opts, refine) {
            Ok(g) => out.double_cover = Some(g),
            Err(e) => out.failure = Some(format!("double-cover graph: {e}")),
        }
    }
    out.certificate = out.certified_graph().is_some();
    out.holds = out.certificate;
    if !out.holds && out.failure.is_none() {
        out.failure = Some("no transverse cycle of connections was found".into());
    }
    out
}

fn barrier_stage(l: &TonelliLagrangian, cfg: &ExperimentConfig, omega: &OmegaResult) -> Result<BarrierStage> {
    let b = &cfg.barrier;
    let grid = variational::geometric_grid(b.t_min, b.t_max, b.t_points);
    let rho = omega.orbit.rotation_vector();
    let popts = variational::PotentialOptions {
        rotation_hint: Some(rho),
        ..b.potential
    };
    let alpha = omega.energy;
    let mut orbits: Vec<&PeriodicOrbit> = omega.proxy.iter().flat_map(|p| p.orbits.iter()).collect();
    if orbits.is_empty() {
        orbits.push(&omega.orbit);
    }
    let mut samples = Vec::new();
    let mut semistatic = Vec::new();
    for o in orbits {
        let traj = o.trajectory(l, 1)?;
        let n = b.points_per_orbit.max(1);
        for k in 0..n {
            let i = k * (traj.len() - 1) / n;
            let z = traj.phase(i);
            let x = TorusPoint::new(z[0].rem_euclid(1.0), z[1].rem_euclid(1.0))?;
            samples.push(Outcome::from_result(variational::peierls_barrier(
                l,
                &x,
                &x,
                omega.omega,
                alpha,
                &grid,
                &popts,
            )));
            let seg = variational::segment_from(l, &z, o.period.max(1.0), o.dt);
            semistatic.push(Outcome::from_result(
                seg.and_then(|s| variational::semistatic_residual(l, &s, omega.omega, alpha, &popts)),
            ));
        }
    }
    Ok(BarrierStage {
        alpha,
        samples,
        semistatic,
    })
}

fn entropy_stage(
    l: &TonelliLagrangian,
    cfg: &ExperimentConfig,
    omega: Option<&OmegaResult>,
    graph: Option<&GraphStage>,
) -> EntropyStage {
    let c = cfg.energy;
    let e = &cfg.entropy;
    let horseshoe = match graph.and_then(|g| g.certified_graph()) {
        Some(g) => Outcome::from_result(entropy::horseshoe_bound(g, c)),
        None => Outcome::Failed("inapplicable: no certified connection graph".into()),
    };
    let orbit_exponents = omega
        .and_then(|o| o.proxy.as_ref())
        .map(|p| {
            p.orbits
                .iter()
                .map(|o| Outcome::from_result(entropy::lyapunov_on_orbit(l, o, e.orbit_periods)))
                .collect()
        })
        .unwrap_or_default();
    EntropyStage {
        energy: c,
        covering: Outcome::from_result(entropy::covering_entropy(l, c, &e.covering)),
        lyapunov: Outcome::from_result(entropy::lyapunov_exponent(l, c, &e.lyapunov)),
        horseshoe,
        orbit_exponents,
    }
}

pub fn beta_samples(l: &TonelliLagrangian, cfg: &ExperimentConfig) -> Result<Vec<BetaSample>> {
    let g = &cfg.beta;
    let grid = mather::rational_grid(g.max_num, g.max_den, g.max_norm);
    mather::beta_grid(l, &grid, &cfg.critical.beta)
}

pub fn alpha_samples(l: &TonelliLagrangian, cfg: &ExperimentConfig, beta: &[BetaSample]) -> Result<Vec<AlphaSample>> {
    cfg.alpha
        .omega_grid
        .iter()
        .map(|w| {
            mather::alpha_at(
                l,
                crate::torus::CohomologyClass::new(w[0], w[1]),
                beta,
                &cfg.critical.beta,
                &cfg.alpha.options,
            )
        })
        .collect()
}

fn record(stages: &mut Vec<StageRecord>, name: &str, status: StageStatus, detail: impl Into<String>) {
    stages.push(StageRecord {
        name: name.into(),
        status,
        detail: detail.into(),
    });
}

fn outcome_detail<T>(o: &Outcome<T>, f: impl Fn(&T) -> String) -> (StageStatus, String) {
    match o {
        Outcome::Value(v) => (StageStatus::Ok, f(v)),
        Outcome::Failed(m) => (StageStatus::Failed, m.clone()),
    }
}

const STAGES: [&str; 11] = [
    "validate",
    "critical-value",
    "omega-search",
    "proxy",
    "classify",
    "graph",
    "barrier",
    "entropy",
    "beta",
    "alpha",
    "trajectories",
];

/// The full pipeline. Artifacts go to `opts.out`; stage results are cached
/// under `opts.out/cache/<config hash>/`.
pub fn run_pipeline(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let hash = cfg.hash();
    let cfg = seeded(cfg);
    let mut art = Artifacts::new(&opts.out)?;
    let mut cache = Cache {
        dir: opts.out.join("cache").join(&hash),
        resume: opts.resume,
        timings: Vec::new(),
    };
    let mut stages = Vec::new();
    let mut failures = Vec::new();
    let mut out = RunOutcome {
        status: ExitStatus::Success,
        manifest: RunManifest {
            config_hash: hash.clone(),
            versions: BTreeMap::from([
                ("aubry-core".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                ("artifact-format".to_string(), "1".to_string()),
            ]),
            seed: cfg.seed,
            energy: cfg.energy,
            exit_code: 0,
            stages: Vec::new(),
            critical_value: None,
            certificate: false,
            hypothesis_failures: Vec::new(),
            files: Vec::new(),
        },
        timings: Timings {
            started_unix,
            workers: opts.workers,
            stages: Vec::new(),
        },
        validation: None,
        critical: None,
        omega: None,
        classification: None,
        graph: None,
        barrier: None,
        entropy: None,
    };

    let status = with_workers(opts.workers, || -> Result<ExitStatus> {
        let l = cfg.lagrangian.build()?;
        let fail_rest = |stages: &mut Vec<StageRecord>, from: usize| {
            for name in &STAGES[from..] {
                record(stages, name, StageStatus::Skipped, "an earlier stage failed");
            }
        };

        match cache.stage("validate", || lagrangian::validate_tonelli(&l, &cfg.validation)) {
            Ok(v) => {
                record(
                    &mut stages,
                    "validate",
                    StageStatus::Ok,
                    format!("min fiber eigenvalue {:.6e}", v.min_hessian_eigenvalue),
                );
                out.validation = Some(v);
            }
            Err(e) => {
                record(&mut stages, "validate", StageStatus::Failed, e.to_string());
                fail_rest(&mut stages, 1);
                return Ok(ExitStatus::from_error(&e));
            }
        }

        let critical = match cache.stage("critical-value", || mather::critical_value(&l, &cfg.critical)) {
            Ok(c) => c,
            Err(e) => {
                record(&mut stages, "critical-value", StageStatus::Failed, e.to_string());
                fail_rest(&mut stages, 2);
                return Ok(ExitStatus::from_error(&e));
            }
        };
        let c0 = critical.value + 0.0;
        record(
            &mut stages,
            "critical-value",
            StageStatus::Ok,
            format!("c0 = {c0:.9}, alpha cross-check gap {:.3e}", critical.gap),
        );
        out.critical = Some(critical);
        if !(cfg.energy > c0 + cfg.omega.margin) {
            let e = Error::BelowCritical {
                energy: cfg.energy,
                critical: c0,
                margin: cfg.omega.margin,
            };
            failures.push(format!("energy hypothesis: {e}"));
            record(&mut stages, "omega-search", StageStatus::Failed, e.to_string());
            fail_rest(&mut stages, 3);
            return Ok(ExitStatus::SubCritical);
        }

        let omega = match cache.stage("omega-search", || {
            mather::omega_for_energy(&l, cfg.energy, cfg.h0, c0, &cfg.omega)
        }) {
            Ok(o) => o,
            Err(e) => {
                record(&mut stages, "omega-search", StageStatus::Failed, e.to_string());
                fail_rest(&mut stages, 3);
                return Ok(ExitStatus::from_error(&e));
            }
        };
        record(
            &mut stages,
            "omega-search",
            StageStatus::Ok,
            format!(
                "lambda0 = {:.9}, omega = ({:.9}, {:.9}), alpha gap {:.3e}",
                omega.lambda0, omega.omega.w1, omega.omega.w2, omega.validation_gap
            ),
        );
        match &omega.proxy {
            Some(p) => record(
                &mut stages,
                "proxy",
                StageStatus::Ok,
                match &p.status {
                    ProxyStatus::Finite => format!("{} orbit(s)", p.count()),
                    ProxyStatus::NonIsolatedFamily { clusters } => format!("non-isolated family ({clusters} clusters)"),
                },
            ),
            None => record(&mut stages, "proxy", StageStatus::Skipped, "disabled in the configuration"),
        }

        let class = cache.stage("classify", || Ok(classify_proxy(&l, &omega)))?;
        match &class.failure {
            None => record(
                &mut stages,
                "classify",
                StageStatus::Ok,
                format!("{} hyperbolic orbit(s)", class.orbits.len()),
            ),
            Some(m) => {
                failures.push(format!("hyperbolicity: {m}"));
                record(&mut stages, "classify", StageStatus::Failed, m.clone());
            }
        }

        let graph = cache.stage("graph", || Ok(graph_stage(&l, &cfg, &omega, &class)))?;
        let node_count = |g: &Option<ConnectionGraph>| g.as_ref().map(|g| (g.nodes.len(), g.edges.len(), g.cycles.len()));
        let detail = format!(
            "base (nodes, edges, cycles) {:?}, double cover {:?}",
            node_count(&graph.base),
            node_count(&graph.double_cover)
        );
        match &graph.failure {
            None => record(&mut stages, "graph", StageStatus::Ok, detail),
            Some(m) => {
                failures.push(format!("connections: {m}"));
                let st = if class.holds {
                    StageStatus::Failed
                } else {
                    StageStatus::Skipped
                };
                record(&mut stages, "graph", st, format!("{m}; {detail}"));
            }
        }

        let barrier = cache.stage("barrier", || barrier_stage(&l, &cfg, &omega));
        match &barrier {
            Ok(b) => {
                let worst = b
                    .samples
                    .iter()
                    .filter_map(|s| s.value())
                    .map(|s| s.running_min)
                    .fold(f64::NEG_INFINITY, f64::max);
                let bad = b.samples.iter().filter(|s| s.value().is_none()).count();
                let st = if bad == 0 { StageStatus::Ok } else { StageStatus::Failed };
                record(
                    &mut stages,
                    "barrier",
                    st,
                    format!(
                        "{} diagonal samples, largest h(x,x) {worst:.3e}, {bad} failed",
                        b.samples.len()
                    ),
                );
            }
            Err(e) => record(&mut stages, "barrier", StageStatus::Failed, e.to_string()),
        }

        let ent = cache.stage("entropy", || Ok(entropy_stage(&l, &cfg, Some(&omega), Some(&graph))))?;
        let (st_c, d_c) = outcome_detail(&ent.covering, |r| format!("covering {:.6}", r.estimate));
        let (st_l, d_l) = outcome_detail(&ent.lyapunov, |r| format!("lyapunov {:.6}", r.estimate));
        let (_, d_h) = outcome_detail(&ent.horseshoe, |r| format!("horseshoe {:.6}", r.estimate));
        let d_h = if d_h.starts_with("horseshoe") {
            d_h
        } else {
            format!("horseshoe {d_h}")
        };
        let st = if st_c == StageStatus::Ok && st_l == StageStatus::Ok {
            StageStatus::Ok
        } else {
            StageStatus::Failed
        };
        record(&mut stages, "entropy", st, format!("{d_c}; {d_l}; {d_h}"));

        let beta = cache.stage("beta", || beta_samples(&l, &cfg));
        let alpha = match &beta {
            Ok(b) => {
                record(&mut stages, "beta", StageStatus::Ok, format!("{} classes", b.len()));
                art.csv("beta.csv", |w| mather::write_beta_csv(b, w))?;
                let a = cache.stage("alpha", || alpha_samples(&l, &cfg, b));
                match &a {
                    Ok(a) => {
                        record(&mut stages, "alpha", StageStatus::Ok, format!("{} classes", a.len()));
                        art.csv("alpha.csv", |w| mather::write_alpha_csv(a, w))?;
                    }
                    Err(e) => record(&mut stages, "alpha", StageStatus::Failed, e.to_string()),
                }
                a.ok()
            }
            Err(e) => {
                record(&mut stages, "beta", StageStatus::Failed, e.to_string());
                record(&mut stages, "alpha", StageStatus::Skipped, "no beta samples");
                None
            }
        };
        let _ = alpha;

        // artifacts
        #[derive(Serialize)]
        struct OrbitsFile<'a> {
            critical: &'a CriticalValue,
            omega: &'a OmegaResult,
            classification: &'a Classification,
        }
        art.write(
            "orbits.json",
            &to_json(&OrbitsFile {
                critical: out.critical.as_ref().expect("critical value computed"),
                omega: &omega,
                classification: &class,
            })?,
        )?;
        art.write("graph.json", &to_json(&graph)?)?;
        if let Ok(b) = &barrier {
            let ok: Vec<BarrierSample> = b.samples.iter().filter_map(|s| s.value().cloned()).collect();
            art.csv("barrier.csv", |w| variational::write_barrier_csv(&ok, w))?;
        }
        art.write("entropy.json", &to_json(&ent)?)?;
        if let Outcome::Value(r) = &ent.covering {
            art.csv("covering_counts.csv", |w| entropy::write_slope_csv(r, w))?;
        }
        if let Outcome::Value(r) = &ent.lyapunov {
            art.csv("lyapunov_series.csv", |w| entropy::write_exponent_csv(r, w))?;
        }
        let mut traj_count = 0;
        let orbits: Vec<&PeriodicOrbit> = omega.proxy.iter().flat_map(|p| p.orbits.iter()).collect();
        let orbits = if orbits.is_empty() { vec![&omega.orbit] } else { orbits };
        for (i, o) in orbits.iter().enumerate() {
            let t = o.trajectory(&l, cfg.output.trajectory_stride)?;
            art.csv(&format!("trajectory_orbit_{i}.csv"), |w| t.write_csv(w))?;
            traj_count += 1;
        }
        record(&mut stages, "trajectories", StageStatus::Ok, format!("{traj_count} file(s)"));

        out.manifest.certificate = graph.certificate && class.holds;
        out.omega = Some(omega);
        out.classification = Some(class);
        out.graph = Some(graph);
        out.barrier = barrier.ok();
        out.entropy = Some(ent);
        Ok(ExitStatus::Success)
    })?;
    let status = match status {
        Ok(s) => s,
        Err(e) => {
            record(&mut stages, "validate", StageStatus::Failed, e.to_string());
            ExitStatus::from_error(&e)
        }
    };

    out.status = status;
    out.manifest.exit_code = status.code();
    out.manifest.critical_value = out.critical.as_ref().map(|c| c.value);
    out.manifest.stages = stages;
    out.manifest.hypothesis_failures = failures;
    out.timings.stages = cache.timings;
    let timings_bytes = to_json(&out.timings)?;
    write_atomic(&opts.out.join(TIMINGS), &timings_bytes)?;
    art.files.push(FileEntry {
        path: TIMINGS.into(),
        bytes: None,
        sha256: None,
    });
    art.files.sort_by(|a, b| a.path.cmp(&b.path));
    out.manifest.files = art.files;
    write_atomic(&opts.out.join(MANIFEST), &to_json(&out.manifest)?)?;
    Ok(out)
}

/// `validate` subcommand: writes `validation.json`.
pub fn run_validate(cfg: &ExperimentConfig, out: &Path) -> Result<(ExitStatus, Option<ValidationReport>)> {
    #[derive(Serialize)]
    struct Report<'a> {
        config_hash: String,
        passed: bool,
        error: Option<String>,
        report: Option<&'a ValidationReport>,
    }
    let res = cfg
        .lagrangian
        .build()
        .and_then(|l| lagrangian::validate_tonelli(&l, &cfg.validation));
    let (status, report, error) = match res {
        Ok(r) => (ExitStatus::Success, Some(r), None),
        Err(e) => (ExitStatus::from_error(&e), None, Some(e.to_string())),
    };
    let body = Report {
        config_hash: cfg.hash(),
        passed: status == ExitStatus::Success,
        error,
        report: report.as_ref(),
    };
    write_atomic(&out.join("validation.json"), &to_json(&body)?)?;
    Ok((status, report))
}

/// `beta` subcommand: writes `beta.csv`.
pub fn run_beta(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<BetaSample>> {
    let cfg = seeded(cfg);
    let l = cfg.lagrangian.build()?;
    let samples = with_workers(opts.workers, || beta_samples(&l, &cfg))??;
    let mut buf = Vec::new();
    mather::write_beta_csv(&samples, &mut buf)?;
    write_atomic(&opts.out.join("beta.csv"), &buf)?;
    Ok(samples)
}

/// `alpha` subcommand: writes `beta.csv` and `alpha.csv`.
pub fn run_alpha(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<AlphaSample>> {
    let beta = run_beta(cfg, opts)?;
    let cfg = seeded(cfg);
    let l = cfg.lagrangian.build()?;
    let samples = with_workers(opts.workers, || alpha_samples(&l, &cfg, &beta))??;
    let mut buf = Vec::new();
    mather::write_alpha_csv(&samples, &mut buf)?;
    write_atomic(&opts.out.join("alpha.csv"), &buf)?;
    Ok(samples)
}

/// `entropy` subcommand: covering and Lyapunov estimates at the configured energy.
pub fn run_entropy(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<EntropyStage> {
    let cfg = seeded(cfg);
    let l = cfg.lagrangian.build()?;
    let stage = with_workers(opts.workers, || entropy_stage(&l, &cfg, None, None))?;
    write_atomic(&opts.out.join("entropy.json"), &to_json(&stage)?)?;
    if let Outcome::Value(r) = &stage.covering {
        let mut buf = Vec::new();
        entropy::write_slope_csv(r, &mut buf)?;
        write_atomic(&opts.out.join("covering_counts.csv"), &buf)?;
    }
    if let Outcome::Value(r) = &stage.lyapunov {
        let mut buf = Vec::new();
        entropy::write_exponent_csv(r, &mut buf)?;
        write_atomic(&opts.out.join("lyapunov_series.csv"), &buf)?;
    }
    Ok(stage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub exit_code: i32,
    pub critical_value: Option<f64>,
    pub certificate: bool,
    pub covering: Option<f64>,
    pub lyapunov: Option<f64>,
    pub horseshoe: Option<f64>,
    pub error: Option<String>,
}

/// Runs the pipeline once per value into `out/run_<i>/` and writes
/// `out/sweep_summary.csv`. Individual failures are recorded, not raised.
pub fn run_sweep(cfg: &ExperimentConfig, parameters: &[String], values: &[f64], opts: &RunOptions) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    if parameters.is_empty() {
        return Err(Error::Config("sweep needs at least one parameter path".into()));
    }
    // resolve every path before running anything
    for p in parameters {
        cfg.with_parameter(p, values[0])?;
    }
    let mut rows = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let mut c = cfg.clone();
        let mut row = SweepRow {
            value: v,
            exit_code: 0,
            critical_value: None,
            certificate: false,
            covering: None,
            lyapunov: None,
            horseshoe: None,
            error: None,
        };
        let applied = parameters.iter().try_for_each(|p| {
            c = c.with_parameter(p, v)?;
            Ok::<_, Error>(())
        });
        if let Err(e) = applied {
            row.exit_code = ExitStatus::from_error(&e).code();
            row.error = Some(e.to_string());
            rows.push(row);
            continue;
        }
        let run_opts = RunOptions {
            out: opts.out.join(format!("run_{i}")),
            ..opts.clone()
        };
        match run_pipeline(&c, &run_opts) {
            Ok(r) => {
                row.exit_code = r.manifest.exit_code;
                row.critical_value = r.manifest.critical_value;
                row.certificate = r.manifest.certificate;
                if let Some(e) = &r.entropy {
                    row.covering = e.estimate(entropy::Method::Covering);
                    row.lyapunov = e.estimate(entropy::Method::Lyapunov);
                    row.horseshoe = e.estimate(entropy::Method::Horseshoe);
                }
                if r.status != ExitStatus::Success {
                    row.error = r
                        .manifest
                        .stages
                        .iter()
                        .find(|s| s.status == StageStatus::Failed)
                        .map(|s| s.detail.clone());
                }
            }
            Err(e) => {
                row.exit_code = ExitStatus::from_error(&e).code();
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "value",
        "exit_code",
        "critical_value",
        "certificate",
        "covering",
        "lyapunov",
        "horseshoe",
        "error",
    ])
    .map_err(csv_error)?;
    let f = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    for r in &rows {
        w.write_record([
            format!("{}", r.value),
            r.exit_code.to_string(),
            f(r.critical_value),
            r.certificate.to_string(),
            f(r.covering),
            f(r.lyapunov),
            f(r.horseshoe),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    write_atomic(&opts.out.join("sweep_summary.csv"), &bytes)?;
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}
