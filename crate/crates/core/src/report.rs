//! Run configuration, certificate assembly and CSV/JSON emission.

use crate::certify::{
    audit_geometry, certify_convex, certify_kappa, certify_ksigma, certify_pinching, default_page, delta_star, estimate_kappa, ksigma,
    page_tau, Certificate, DeltaStar, GeometryAudit, KappaConfig, KappaEstimate, Verdict,
};
use crate::error::{Error, Result};
use crate::flow_engine::IntegratorOptions;
use crate::sections_linking::{write_returns_csv, FlowModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "Ksigma")]
    KSigma,
    #[serde(rename = "convex")]
    Convex,
    #[serde(rename = "pinching")]
    Pinching,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| Error::Config(format!("unknown criterion {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_integration")]
    pub integration: f64,
    #[serde(default = "default_audit")]
    pub audit: f64,
}

fn default_integration() -> f64 {
    1e-10
}
fn default_audit() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { integration: default_integration(), audit: default_audit() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: FlowModel,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Full(RunConfig),
    Bare(FlowModel),
}

impl RunConfig {
    pub fn for_model(model: FlowModel) -> Self {
        Self { model, criteria: vec![], tolerances: Tolerances::default(), seed: None, budget: None, t_grid: None, output_dir: None }
    }

    /// Accepts either a full configuration or a bare model object.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = if v.get("model").is_some() {
            serde_json::from_value::<RunConfig>(v).map_err(|e| Error::Config(e.to_string()))?
        } else {
            match serde_json::from_value::<ConfigFile>(v).map_err(|e| Error::Config(e.to_string()))? {
                ConfigFile::Full(c) => c,
                ConfigFile::Bare(m) => RunConfig::for_model(m),
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        let t = self.tolerances;
        if !(t.integration > 0.0 && t.integration < 1e-2 && t.audit > 0.0) {
            return Err(Error::Config("tolerances must be positive and the integration tolerance below 1e-2".into()));
        }
        if let Some(g) = &self.t_grid {
            if g.len() < 2 || g.iter().any(|t| !(*t > 0.0)) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("t_grid must be increasing positive times, at least two".into()));
            }
        }
        if self.budget == Some(0) {
            return Err(Error::Config("budget must be positive".into()));
        }
        Ok(())
    }

    /// Criteria to run: the configured list, or one per model family.
    pub fn effective_criteria(&self) -> Vec<Criterion> {
        if !self.criteria.is_empty() {
            return self.criteria.clone();
        }
        match self.model {
            FlowModel::Revolution { .. } => vec![Criterion::Pinching],
            FlowModel::Ellipsoid { .. } | FlowModel::PerturbedBall { .. } => vec![Criterion::Convex],
            FlowModel::Hopf { .. } => vec![Criterion::KSigma],
        }
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::with_tol(self.tolerances.integration)
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required for sampling runs".into()))
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).unwrap_or_default();
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string()))
}

fn kappa_config(cfg: &RunConfig) -> Result<KappaConfig> {
    let mut k = KappaConfig { seed: cfg.require_seed()?, ..KappaConfig::default() };
    if let Some(b) = cfg.budget {
        k.budget = b;
    }
    if let Some(g) = &cfg.t_grid {
        k.t_grid = g.clone();
    }
    Ok(k)
}

pub fn write_kappa_csv<W: std::io::Write>(w: W, est: &KappaEstimate) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(["T", "inf_ratio", "inf_ratio_literal", "link_min"]).map_err(io)?;
    for k in 0..est.t_grid.len() {
        wr.write_record([
            format!("{}", est.t_grid[k]),
            format!("{:.12e}", est.inf_per_t[k]),
            format!("{:.12e}", est.literal_inf_per_t[k]),
            format!("{}", est.link_min_per_t[k]),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

/// Runs every criterion and stamps the certificates. Files are written
/// when `out` is given; artifact paths are relative to it.
pub fn run_certify(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<Certificate>> {
    cfg.validate()?;
    let opts = cfg.integrator();
    let mut certs = Vec::new();
    for crit in cfg.effective_criteria() {
        let mut cert = match crit {
            Criterion::Pinching => match cfg.model.metric() {
                Some(m) => certify_pinching(&m),
                None => return Err(Error::Config("pinching applies to the revolution family only".into())),
            },
            Criterion::Convex => match cfg.model.body() {
                Some(b) => certify_convex(&b, None, cfg.budget.unwrap_or(4096), opts)?,
                None => return Err(Error::Config("convex applies to ellipsoid and perturbed_ball only".into())),
            },
            Criterion::KSigma => {
                let ks = ksigma(&cfg.model, cfg.budget.unwrap_or(4096))?;
                let tau = page_tau(&cfg.model, &default_page(&cfg.model), opts)?;
                certify_ksigma(&cfg.model, ks, &tau)
            }
            Criterion::Kappa => {
                let kc = kappa_config(cfg)?;
                let est = estimate_kappa(&cfg.model, &default_page(&cfg.model), &kc, opts)?;
                let mut c = certify_kappa(&cfg.model, &est);
                if let Some(dir) = out {
                    let mut buf = Vec::new();
                    write_kappa_csv(&mut buf, &est)?;
                    write(&dir.join("kappa_per_t.csv"), &buf)?;
                    c.artifacts.push("kappa_per_t.csv".into());
                }
                c
            }
        };
        cert.config_hash = cfg.hash();
        if cert.seed.is_none() {
            cert.seed = cfg.seed;
        }
        if let serde_json::Value::Object(ref mut m) = cert.inputs {
            m.insert("tolerances".into(), serde_json::to_value(cfg.tolerances).unwrap_or_default());
        }
        if let Some(dir) = out {
            let name = format!("certificate_{}.json", cert.criterion);
            write(&dir.join(&name), to_json(&cert)?.as_bytes())?;
        }
        certs.push(cert);
    }
    Ok(certs)
}

/// 0 when all certified, 2 when any is not certified, otherwise 3 when any
/// is inconclusive.
pub fn exit_code(certs: &[Certificate]) -> i32 {
    if certs.iter().any(|c| c.verdict == Verdict::NotCertified) {
        2
    } else if certs.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        3
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config_hash: String,
    pub tool_version: String,
    pub audit: GeometryAudit,
    pub artifacts: Vec<String>,
}

pub fn run_audit(cfg: &RunConfig, grid: (usize, usize), out: Option<&Path>) -> Result<AuditReport> {
    cfg.validate()?;
    let metric = cfg.model.metric().ok_or_else(|| Error::Config("audit applies to the revolution family only".into()))?;
    let audit = audit_geometry(&metric, grid.0, grid.1, cfg.tolerances.audit, cfg.integrator())?;
    let mut artifacts = Vec::new();
    if let Some(dir) = out {
        let mut buf = Vec::new();
        write_returns_csv(&mut buf, &audit.samples)?;
        write(&dir.join("returns.csv"), &buf)?;
        let mut wr = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        wr.write_record(["check", "measured", "bound", "slack", "status"]).map_err(io)?;
        for c in &audit.checks {
            let st = serde_json::to_value(c.status).unwrap_or_default();
            wr.write_record([
                c.name.clone(),
                format!("{:.12e}", c.measured),
                format!("{:.12e}", c.bound),
                format!("{:.12e}", c.slack),
                st.as_str().unwrap_or("").to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = wr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        write(&dir.join("audit_checks.csv"), &bytes)?;
        artifacts = vec!["returns.csv".into(), "audit_checks.csv".into()];
    }
    let rep = AuditReport { config_hash: cfg.hash(), tool_version: crate::TOOL_VERSION.into(), audit, artifacts };
    if let Some(dir) = out {
        write(&dir.join("audit.json"), to_json(&rep)?.as_bytes())?;
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub config_hash: String,
    pub tool_version: String,
    pub estimate: KappaEstimate,
    pub artifacts: Vec<String>,
}

pub fn run_kappa(cfg: &RunConfig, out: Option<&Path>) -> Result<KappaReport> {
    cfg.validate()?;
    let kc = kappa_config(cfg)?;
    let estimate = estimate_kappa(&cfg.model, &default_page(&cfg.model), &kc, cfg.integrator())?;
    let mut artifacts = Vec::new();
    if let Some(dir) = out {
        let mut buf = Vec::new();
        write_kappa_csv(&mut buf, &estimate)?;
        write(&dir.join("kappa_per_t.csv"), &buf)?;
        artifacts.push("kappa_per_t.csv".into());
    }
    let rep = KappaReport { config_hash: cfg.hash(), tool_version: crate::TOOL_VERSION.into(), estimate, artifacts };
    if let Some(dir) = out {
        write(&dir.join("kappa.json"), to_json(&rep)?.as_bytes())?;
    }
    Ok(rep)
}

pub fn run_delta_star() -> DeltaStar {
    delta_star()
}
