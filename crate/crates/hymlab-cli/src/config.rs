//! Experiment configuration: flat key-value text grouped in `[sections]`.
//!
//! ```text
//! [bundle]
//! tag = "CP1:O(1)⊕O(-1)"
//! seed = 1
//!
//! [run]
//! mode = "flow"
//! t_end = 0.2
//! ```
//!
//! Every key has a default; unknown sections and keys are rejected with the
//! line and column where they occur.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Flow,
    Continuity,
    Compare,
    Hn,
    Chern,
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Cp1,
    Torus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldSection {
    /// Must agree with the prefix of the bundle tag when given.
    pub kind: Option<ManifoldKind>,
    /// Grid resolution.
    pub n: usize,
    pub tau_re: f64,
    pub tau_im: f64,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        ManifoldSection { kind: None, n: 32, tau_re: 0.0, tau_im: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BundleSection {
    pub tag: String,
    pub seed: u64,
    /// Seed of the second initial metric in compare mode.
    pub seed2: u64,
    pub amplitude: f64,
    pub offdiag: f64,
    pub rank: usize,
}

impl Default for BundleSection {
    fn default() -> Self {
        BundleSection { tag: "CP1:O(1)⊕O(-1)".into(), seed: 1, seed2: 9, amplitude: 0.3, offdiag: 0.2, rank: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub t_end: f64,
    /// Fixed time step; the stability bound is used when absent.
    pub dt: Option<f64>,
    pub record_every: usize,
    pub normalize_trace: bool,
    pub stop_fraction: Option<f64>,
    pub eps_schedule: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: Mode::Flow,
            t_end: 0.1,
            dt: None,
            record_every: 10,
            normalize_trace: true,
            stop_fraction: None,
            eps_schedule: hymlab::continuity_solver::DEFAULT_SCHEDULE.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnSection {
    pub slopes: Vec<f64>,
    pub slopes2: Option<Vec<f64>>,
    /// One of `T` (E⊗F), `T<k>`, `S<k>`, `A<k>`, `M<k>,<l>` (E^{⊗k}⊗F^{⊗l}).
    pub op: String,
}

impl Default for HnSection {
    fn default() -> Self {
        HnSection { slopes: vec![1.0, -1.0], slopes2: None, op: "S2".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernSection {
    pub samples: usize,
    pub max_rank: usize,
}

impl Default for ChernSection {
    fn default() -> Self {
        ChernSection { samples: 500, max_rank: 4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Halve the grid resolutions and rescale the convergence tolerances.
    pub coarse: bool,
    /// Criterion ids to run; empty runs all.
    pub criteria: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("hymlab-out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParallelSection {
    pub workers: usize,
}

impl Default for ParallelSection {
    fn default() -> Self {
        ParallelSection { workers: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldSection,
    pub bundle: BundleSection,
    pub run: RunSection,
    pub hn: HnSection,
    pub chern: ChernSection,
    pub validate: ValidateSection,
    pub output: OutputSection,
    pub parallel: ParallelSection,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            ConfigError::Parse { path: path.to_string(), line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Range checks on every numeric parameter.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let m = &self.manifold;
        if !(8..=256).contains(&m.n) {
            return bad(format!("manifold.n = {} is outside [8, 256]", m.n));
        }
        if !(m.tau_im > 0.0) || !m.tau_re.is_finite() || !m.tau_im.is_finite() {
            return bad("manifold.tau_im must be positive".into());
        }
        let prefix = self.bundle.tag.split(':').next().unwrap_or("");
        match (m.kind, prefix) {
            (Some(ManifoldKind::Cp1), "Torus") | (Some(ManifoldKind::Torus), "CP1") => {
                return bad(format!("manifold.kind does not match bundle tag {}", self.bundle.tag));
            }
            _ => {}
        }
        let b = &self.bundle;
        if !(0.0..=10.0).contains(&b.amplitude) || !(0.0..=1.0).contains(&b.offdiag) {
            return bad("bundle.amplitude must lie in [0, 10] and bundle.offdiag in [0, 1]".into());
        }
        if !(1..=8).contains(&b.rank) {
            return bad(format!("bundle.rank = {} is outside [1, 8]", b.rank));
        }
        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end <= 100.0) {
            return bad(format!("run.t_end = {} is outside (0, 100]", r.t_end));
        }
        if let Some(dt) = r.dt {
            if !(dt > 0.0 && dt <= r.t_end) {
                return bad(format!("run.dt = {dt} must lie in (0, t_end]"));
            }
        }
        if r.record_every == 0 {
            return bad("run.record_every must be at least 1".into());
        }
        if let Some(f) = r.stop_fraction {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("run.stop_fraction = {f} is outside (0, 1)"));
            }
        }
        if r.eps_schedule.is_empty() || r.eps_schedule.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("run.eps_schedule must be a non-empty list in (0, 1]".into());
        }
        if r.eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("run.eps_schedule must be strictly decreasing".into());
        }
        if self.hn.slopes.is_empty() || self.hn.slopes.iter().any(|x| !x.is_finite()) {
            return bad("hn.slopes must be a non-empty list of finite numbers".into());
        }
        if !(1..=100_000).contains(&self.chern.samples) || !(1..=8).contains(&self.chern.max_rank) {
            return bad("chern.samples must lie in [1, 100000] and chern.max_rank in [1, 8]".into());
        }
        if let Some(c) = self.validate.criteria.iter().find(|c| !(1..=14).contains(*c)) {
            return bad(format!("validate.criteria contains unknown id {c}"));
        }
        if !(1..=1024).contains(&self.parallel.workers) {
            return bad(format!("parallel.workers = {} is outside [1, 1024]", self.parallel.workers));
        }
        Ok(())
    }
}
