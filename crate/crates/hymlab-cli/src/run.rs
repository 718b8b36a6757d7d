//! Mode dispatch and the files each mode writes.

use std::path::PathBuf;
use std::time::Instant;

use hymlab::bundle_geometry::{self, CatalogEntry, CatalogParams};
use hymlab::chern_forms::{self, CurvatureSample};
use hymlab::continuity_solver::{self, SolveOptions};
use hymlab::hn_algebra::{self, DerivedOp, DescendingVector};
use hymlab::hym_flow::{self, FlowConfig};
use hymlab::linalg_hermitian::{CMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Mode};
use crate::output::{json_number, json_numbers, write_json, OutputPaths, Table};
use crate::validate::{self, Validator};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {message}")]
    Module { context: String, message: String },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} criteria failed")]
    ValidationFailed { failed: usize, total: usize },
}

impl CliError {
    /// Process exit code for each error family.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Parse { .. }) | CliError::Config(ConfigError::Read { .. }) => 3,
            CliError::Config(ConfigError::Invalid(_)) => 4,
            CliError::Module { .. } => 5,
            CliError::Io(_) => 6,
            CliError::ValidationFailed { .. } => 7,
        }
    }
}

fn module_err(context: &str) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Module { context: context.to_string(), message: e.to_string() }
}

macro_rules! ctx {
    ($e:expr, $c:expr) => {
        $e.map_err(|err| module_err($c)(&err))
    };
}

/// Constants derived from the bundle and its initial metric.
#[derive(Clone, Debug, Serialize)]
pub struct Derived {
    pub volume: f64,
    pub lambda: f64,
    pub degree: f64,
    pub hn_type: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub derived: Option<Derived>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn catalog_params(cfg: &ExperimentConfig, seed: u64) -> CatalogParams {
    CatalogParams {
        n: cfg.manifold.n,
        tau: C64::new(cfg.manifold.tau_re, cfg.manifold.tau_im),
        seed,
        amplitude: cfg.bundle.amplitude,
        offdiag: cfg.bundle.offdiag,
        rank: cfg.bundle.rank,
    }
}

fn load_entry(cfg: &ExperimentConfig, seed: u64) -> Result<CatalogEntry, CliError> {
    ctx!(bundle_geometry::catalog_bundle(&cfg.bundle.tag, &catalog_params(cfg, seed)), "catalog")
}

fn derived(e: &CatalogEntry) -> Derived {
    Derived {
        volume: e.bundle.mesh.volume(),
        lambda: e.bundle.einstein_constant(&e.h0),
        degree: e.bundle.degree(&e.h0),
        hn_type: e.hn_type.values().to_vec(),
    }
}

/// Mode output before it is written to disk.
struct ModeOutput {
    table: Table,
    title: &'static str,
    summary: Value,
    derived: Option<Derived>,
    failed: Option<(usize, usize)>,
}

/// Runs the configured experiment and writes series.csv, summary.json,
/// schema.txt and manifest.json into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let out = match cfg.run.mode {
        Mode::Flow => run_flow(cfg)?,
        Mode::Continuity => run_continuity(cfg)?,
        Mode::Compare => run_compare(cfg)?,
        Mode::Hn => run_hn(cfg)?,
        Mode::Chern => run_chern(cfg)?,
        Mode::Validate => run_validate(cfg)?,
    };
    let paths = OutputPaths::create(&cfg.output.dir)?;
    out.table.write_csv(&paths.series)?;
    std::fs::write(&paths.schema, out.table.schema(out.title))?;
    write_json(&paths.summary, &out.summary)?;
    let manifest = RunManifest {
        config: cfg.clone(),
        derived: out.derived,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: vec![paths.series, paths.summary, paths.schema, paths.manifest.clone()],
    };
    write_json(&paths.manifest, &manifest)?;
    if let Some((failed, total)) = out.failed {
        return Err(CliError::ValidationFailed { failed, total });
    }
    Ok(manifest)
}

fn run_flow(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let e = load_entry(cfg, cfg.bundle.seed)?;
    let targets = e.targets();
    let fc = FlowConfig {
        t_end: cfg.run.t_end,
        dt: cfg.run.dt,
        record_every: cfg.run.record_every,
        normalize_trace: cfg.run.normalize_trace,
        stop_fraction: cfg.run.stop_fraction,
    };
    let (series, _) = ctx!(hym_flow::run_flow_from(&e.bundle, e.h0.clone(), &targets, &fc), "flow")?;
    let r = e.bundle.rank();
    let mut t = Table::new();
    t.column("t", "flow time");
    t.indexed("lamhat_L", r, "inf over the grid of the sum of the k smallest eigenvalues of theta");
    t.indexed("lamhat_U", r, "sup over the grid of the sum of the k largest eigenvalues of theta");
    t.indexed("lam_mL", r, "grid average of the sum of the k smallest eigenvalues of theta");
    t.indexed("lam_mU", r, "grid average of the sum of the k largest eigenvalues of theta");
    t.column("sup_phi_sq", "sup over the grid of |theta - lambda Id|^2");
    t.column("energy_dtheta", "integral of |d theta / dt|^2");
    t.column("det_residual", "sup over the grid of |det(K^-1 H) - 1|, K the trace-normalized initial metric");
    t.column("tr_residual", "sup over the grid of |tr(theta - lambda Id) - u|, u the scalar heat evolution of its initial value");
    for row in &series.rows {
        let s = &row.stats;
        let mut v = vec![row.t];
        v.extend(&s.hat_l);
        v.extend(&s.hat_u);
        v.extend(&s.m_l);
        v.extend(&s.m_u);
        v.extend([row.sup_phi_sq, row.energy, row.det_residual, row.tr_residual]);
        t.push(v);
    }
    let mono = series.monotonicity(1e-8);
    let last = series.last().expect("initial row is always recorded");
    let summary = json!({
        "tag": e.tag,
        "dt": series.dt,
        "lambda": series.lambda,
        "targets": targets,
        "t_final": last.t,
        "rows": series.rows.len(),
        "aborted": series.aborted,
        "monotonicity_violations": mono.total(),
        "lam_mU_1_final": last.stats.m_u[0],
        "lam_mL_1_final": last.stats.m_l[0],
        "sup_phi_sq_final": last.sup_phi_sq,
        "max_det_residual": series.rows.iter().map(|r| r.det_residual).fold(0.0, f64::max),
        "energy_integral": last.energy_integral,
    });
    Ok(ModeOutput { table: t, title: "flow time series", summary, derived: Some(derived(&e)), failed: None })
}

fn run_continuity(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let e = load_entry(cfg, cfg.bundle.seed)?;
    let k = ctx!(continuity_solver::normalize_background(&e.bundle, &e.h0), "normalize background")?;
    let targets = e.targets();
    let path = ctx!(
        continuity_solver::eps_path(&e.bundle, &k, &cfg.run.eps_schedule, &targets, &SolveOptions::default()),
        "continuity path"
    )?;
    let r = e.bundle.rank();
    let mut t = Table::new();
    t.column("eps", "continuity parameter");
    t.indexed("lam_mL", r, "grid average of the sum of the k smallest eigenvalues of lambda Id - eps s");
    t.indexed("lam_mU", r, "grid average of the sum of the k largest eigenvalues of lambda Id - eps s");
    t.column("residual", "max over cells of the Frobenius norm of the equation defect");
    t.column("eps_s_inf", "sup |eps s|");
    t.column("phi_k_inf", "sup |theta_K - lambda Id|");
    t.column("trace_max", "sup |tr s|");
    t.column("eps_s_l2", "L2 norm of eps s");
    t.column("key_identity", "residual of the integral identity at the solution");
    t.column("step_change", "sup |s - s_previous|");
    t.column("u_plateau", "largest oscillation of an ordered eigenvalue of s / sup|s| (0 for constant eigenvalues)");
    for row in &path.rows {
        let mut v = vec![row.eps];
        v.extend(&row.stats.m_l);
        v.extend(&row.stats.m_u);
        v.extend([
            row.residual,
            row.lemma.eps_s_inf,
            row.lemma.phi_k_inf,
            row.lemma.trace_max,
            row.lemma.eps_s_l2,
            row.key_identity,
            row.step_change,
            row.u_plateau,
        ]);
        t.push(v);
    }
    let summary = json!({
        "tag": e.tag,
        "targets": targets,
        "limit_lam_mU": path.limit_m_u,
        "limit_lam_mL": path.limit_m_l,
        "aborted": path.aborted,
        "max_residual": path.rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        "estimates_hold": path.rows.iter().all(|r| r.lemma.bound_holds(1e-6)),
    });
    Ok(ModeOutput { table: t, title: "continuity path", summary, derived: Some(derived(&e)), failed: None })
}

fn run_compare(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let e1 = load_entry(cfg, cfg.bundle.seed)?;
    let e2 = load_entry(cfg, cfg.bundle.seed2)?;
    let cmp = ctx!(
        hym_flow::two_solution_compare(&e1.bundle, e1.h0.clone(), &e2.bundle, e2.h0, cfg.run.t_end, cfg.run.record_every),
        "compare"
    )?;
    let mut t = Table::new();
    t.column("t", "flow time");
    t.column("sup_tr", "sup over the grid of tr(h + h^-1) - 2r, h = H1^-1 H2");
    t.column("int_a_sq", "integral of |A1 - A2|^2 for the Chern connections");
    t.column("int_theta_diff_sq", "integral of |theta_1 - theta_2|^2");
    t.column("bound_violations", "grid points violating the pointwise comparison bound");
    t.column("cond_violations", "grid points violating the condition-number bound");
    for r in &cmp.rows {
        t.push(vec![r.t, r.sup_tr, r.int_a_sq, r.int_theta_diff_sq, r.bound_violations as f64, r.cond_violations as f64]);
    }
    let first = &cmp.rows[0];
    let last = cmp.rows.last().expect("at least one row");
    let summary = json!({
        "tag": e1.tag,
        "seeds": [cfg.bundle.seed, cfg.bundle.seed2],
        "sup_tr_increases": cmp.sup_tr_increases(1e-8),
        "theta_diff_ratio": last.int_theta_diff_sq / first.int_theta_diff_sq,
        "bound_violations": cmp.rows.iter().map(|r| r.bound_violations).sum::<usize>(),
    });
    Ok(ModeOutput { table: t, title: "two-solution comparison", summary, derived: Some(derived(&e1)), failed: None })
}

/// Parses `T`, `T<k>`, `S<k>`, `A<k>` and `M<k>,<l>`.
pub fn parse_op(s: &str) -> Option<DerivedOp> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<usize>().ok();
    match s.chars().next()? {
        'T' if s.len() == 1 => Some(DerivedOp::Tensor),
        'T' => num(&s[1..]).map(DerivedOp::TensorPower),
        'S' => num(&s[1..]).map(DerivedOp::Sym),
        'A' => num(&s[1..]).map(DerivedOp::Ext),
        'M' => {
            let (k, l) = s[1..].split_once(',')?;
            Some(DerivedOp::Mixed(num(k)?, num(l)?))
        }
        _ => None,
    }
}

fn run_hn(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let op = parse_op(&cfg.hn.op).ok_or_else(|| ConfigError::Invalid(format!("unknown hn.op {:?}", cfg.hn.op)))?;
    let mu = ctx!(DescendingVector::sorted(cfg.hn.slopes.clone()), "hn slopes")?;
    let mu2 = match &cfg.hn.slopes2 {
        Some(v) => Some(ctx!(DescendingVector::sorted(v.clone()), "hn slopes2")?),
        None => None,
    };
    let out = ctx!(hn_algebra::derived_hn_type(op, &mu, mu2.as_ref()), "hn")?;
    let mut t = Table::new();
    t.column("index", "1-based position in the descending slope vector");
    t.column("slope", "slope of the derived bundle");
    for (i, v) in out.values().iter().enumerate() {
        t.push(vec![(i + 1) as f64, *v]);
    }
    let summary = json!({ "slopes": json_numbers(out.values()) });
    println!("{summary}");
    Ok(ModeOutput { table: t, title: "derived HN type", summary, derived: None, failed: None })
}

/// Random curvature sample with `A_ba = H^-1 A_ab^* H`.
pub fn random_curvature_sample(rng: &mut ChaCha8Rng, r: usize) -> CurvatureSample {
    let mut mat = |n: usize| CMat::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let pd = |m: CMat| {
        let mut p = &m * &m.adjoint();
        p.add_identity(0.3);
        p.hermitian_part()
    };
    let g = pd(mat(2));
    let h = pd(mat(r));
    let hinv = h.inverse().expect("positive definite");
    let a00 = &hinv * &mat(r).hermitian_part();
    let a11 = &hinv * &mat(r).hermitian_part();
    let a01 = mat(r);
    let a10 = &(&hinv * &a01.adjoint()) * &h;
    CurvatureSample { g, h, a: [[a00, a01], [a10, a11]] }
}

fn run_chern(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.bundle.seed);
    let mut t = Table::new();
    t.column("sample", "sample index");
    t.column("rank", "fiber rank");
    t.column("c1_sq", "c1^2 as a multiple of omega^2/2");
    t.column("c2", "c2 as a multiple of omega^2/2");
    t.column("gap_residual", "|4 pi^2 (2 c2 - (r-1)/r c1^2) - (|F0|^2 - |Lambda F0|^2)|");
    t.column("lambda1", "larger eigenvalue of a random trace-2 pair");
    t.column("eigen_gap_diff", "difference of the two sides of the two-eigenvalue identity");
    let mut max_gap = 0.0f64;
    let mut max_eig = 0.0f64;
    let mut pairs = Vec::with_capacity(cfg.chern.samples);
    for i in 0..cfg.chern.samples {
        let r = 1 + i % cfg.chern.max_rank;
        let s = random_curvature_sample(&mut rng, r);
        let (c1, c2) = ctx!(chern_forms::chern_numbers(&s), "chern")?;
        let res = ctx!(chern_forms::c2_gap_residual(&s), "chern")?;
        let l1 = rng.gen_range(1.0..3.0);
        let (a, b) = ctx!(chern_forms::two_eigen_gap(l1, 2.0 - l1), "chern")?;
        max_gap = max_gap.max(res);
        max_eig = max_eig.max((a - b).abs());
        pairs.push(vec![l1, 2.0 - l1]);
        t.push(vec![i as f64, r as f64, c1, c2, res, l1, a - b]);
    }
    let rep = ctx!(chern_forms::c2_positivity_run(&pairs), "chern")?;
    let summary = json!({
        "samples": cfg.chern.samples,
        "max_gap_residual": max_gap,
        "max_eigen_gap_diff": max_eig,
        "positivity": {
            "positive": rep.positive,
            "min_lambda2": rep.min_lambda2,
            "c2_lower_bound": json_number(rep.c2_lower_bound),
        },
    });
    Ok(ModeOutput { table: t, title: "pointwise Chern identities", summary, derived: None, failed: None })
}

fn run_validate(cfg: &ExperimentConfig) -> Result<ModeOutput, CliError> {
    let v = Validator::new(validate::Options { coarse: cfg.validate.coarse, seed: cfg.bundle.seed });
    let ids: Vec<u8> = if cfg.validate.criteria.is_empty() { (1..=14).collect() } else { cfg.validate.criteria.clone() };
    let reports: Vec<validate::Report> = ids.iter().map(|&id| v.run(id)).collect();
    let mut t = Table::new();
    t.column("criterion", "acceptance criterion id");
    t.column("pass", "1 when the criterion holds, else 0");
    for r in &reports {
        t.push(vec![r.id as f64, r.pass as u8 as f64]);
        eprintln!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    let summary = json!({ "passed": reports.len() - failed, "failed": failed, "criteria": reports });
    let failed = (failed > 0).then_some((failed, reports.len()));
    Ok(ModeOutput { table: t, title: "acceptance criteria", summary, derived: None, failed })
}
