//! Batch runs: configuration, dispatch and artifact manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{blowdown, classify_profile, verify_suite, write_summary, BlowdownGrid, ClassifyOptions, VerifyConfig};
use crate::construction::{build_family, shoot_parameters, ShootingMode, ShootingTolerances};
use crate::curve_flow::{area_law_check, csf_run, export_trajectory, gage_hamilton_decay, normalize_and_roundness, SupportCurve};
use crate::domain::{Domain, EllipsoidDomain};
use crate::elliptic::{continuation_with, SolverConfig, DEFAULT_SIGMA_SCHEDULE};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::reference::{bowl_profile, ReferenceProfile};
use crate::stencil::Boundary;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SOLITON_FORGE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Construct,
    Csf,
    Blowdown,
    Verify,
}

impl Command {
    /// Accepted parameter keys with their defaults.
    pub fn schema(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Solve => &[("dim", "2"), ("r", "2"), ("t", "1"), ("sigma", "0"), ("resolution", "129")],
            Command::Construct => &[("n", "2"), ("K", "2"), ("theta", "2"), ("mode", "level-set"), ("resolution", "97")],
            Command::Csf => &[("a", "2"), ("b", "1"), ("nodes", "256"), ("t_end_fraction", "0.9"), ("dt", "1e-3")],
            Command::Blowdown => &[("profile", "bowl"), ("dim", "2"), ("k", "2"), ("h_schedule", "100,1000,10000")],
            Command::Verify => &[("resolution", "97"), ("theta", "2"), ("K", "2,4"), ("concavity_tol", "1e-6")],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        Self {
            command,
            params: BTreeMap::new(),
            out: out.into(),
            seed: 0,
        }
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), serde_json::Value::String(value.to_string()));
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Parameters resolved against the command schema: unknown keys are an
    /// error, absent keys take their defaults.
    pub fn resolved(&self) -> Result<Params> {
        let schema = self.command.schema();
        let mut map = BTreeMap::new();
        for (key, value) in &self.params {
            if !schema.iter().any(|(k, _)| k == key) {
                return Err(Error::Parse(format!("unknown parameter '{key}' for {:?}", self.command)));
            }
            let text = match value {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            map.insert(key.clone(), text);
        }
        for (key, default) in schema {
            map.entry(key.to_string()).or_insert_with(|| default.to_string());
        }
        Ok(Params(map))
    }
}

/// String-valued parameters with typed accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse(format!("missing parameter '{key}'")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let s = self.raw(key)?;
        s.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("parameter '{key}' = '{s}' is not a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let s = self.raw(key)?;
        s.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("parameter '{key}' = '{s}' is not a count")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let s = self.raw(key)?;
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("parameter '{key}' entry '{p}' is not a number")))
            })
            .collect()
    }

    pub fn text(&self, key: &str) -> Result<String> {
        self.raw(key).map(str::to_string)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub status: i32,
    pub message: Option<String>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// 0: success, 1: numerical failure or failed check, 2: invalid config.
    pub status: i32,
    pub manifest: Option<RunManifest>,
    pub message: Option<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<ManifestEntry>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .expect("walked below root")
            .to_string_lossy()
            .replace('\\', "/");
        if rel == MANIFEST_FILE {
            continue;
        }
        let bytes = fs::read(&path)?;
        out.push(ManifestEntry {
            path: rel,
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Lists every file under `dir` with its content hash and writes the
/// manifest beside them.
pub fn write_manifest(dir: &Path, cfg: &RunConfig, params: &Params, status: i32, message: Option<String>) -> Result<RunManifest> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let m = RunManifest {
        command: cfg.command,
        params: params.0.clone(),
        seed: cfg.seed,
        status,
        message,
        files,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m)?)?;
    Ok(m)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Failure diagnostics, including the shooting trace of bracketing errors.
#[derive(Serialize)]
struct Diagnostic<'a> {
    error: String,
    trace: &'a [String],
}

fn diagnostic(e: &Error) -> Diagnostic<'_> {
    let trace: &[String] = match e {
        Error::Bracketing { trace, .. } => trace,
        _ => &[],
    };
    Diagnostic {
        error: e.to_string(),
        trace,
    }
}

/// Runs one command. Invalid configurations give status 2 before anything
/// is computed; otherwise artifacts, including diagnostics of a failure, are
/// always flushed and listed in the manifest.
pub fn run_command(cfg: &RunConfig) -> RunOutcome {
    let params = match cfg.resolved().and_then(|p| validate(cfg.command, &p).map(|_| p)) {
        Ok(p) => p,
        Err(e) => {
            return RunOutcome {
                status: 2,
                manifest: None,
                message: Some(e.to_string()),
            }
        }
    };
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        return RunOutcome {
            status: 2,
            manifest: None,
            message: Some(format!("output directory: {e}")),
        };
    }
    let (status, message) = match dispatch(cfg.command, &params, &cfg.out) {
        Ok(true) => (0, None),
        Ok(false) => (1, Some("some checks failed".to_string())),
        Err(e) => {
            let _ = write_json(&cfg.out.join("error.json"), &diagnostic(&e));
            (1, Some(e.to_string()))
        }
    };
    match write_manifest(&cfg.out, cfg, &params, status, message.clone()) {
        Ok(m) => RunOutcome {
            status,
            manifest: Some(m),
            message,
        },
        Err(e) => RunOutcome {
            status: 1,
            manifest: None,
            message: Some(format!("manifest: {e}")),
        },
    }
}

fn validate(cmd: Command, p: &Params) -> Result<()> {
    let positive = |key: &str| -> Result<()> {
        let v = p.f64(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Parse(format!("parameter '{key}' must be positive")))
        }
    };
    match cmd {
        Command::Solve => {
            p.usize("dim")?;
            p.usize("resolution")?;
            positive("r")?;
            positive("t")?;
            let s = p.f64("sigma")?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Parse("sigma must lie in [0, 1]".into()));
            }
        }
        Command::Construct => {
            p.usize("n")?;
            p.usize("resolution")?;
            p.list("K")?;
            positive("theta")?;
            parse_mode(&p.text("mode")?)?;
        }
        Command::Csf => {
            positive("a")?;
            positive("b")?;
            positive("dt")?;
            p.usize("nodes")?;
            let f = p.f64("t_end_fraction")?;
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Parse("t_end_fraction must lie in (0, 1)".into()));
            }
        }
        Command::Blowdown => {
            p.usize("dim")?;
            p.usize("k")?;
            p.list("h_schedule")?;
            let name = p.text("profile")?;
            if !["bowl", "eta", "radial", "paperclip", "grim-reaper"].contains(&name.as_str()) {
                return Err(Error::Parse(format!("unknown profile '{name}'")));
            }
        }
        Command::Verify => {
            p.usize("resolution")?;
            positive("theta")?;
            p.list("K")?;
            positive("concavity_tol")?;
        }
    }
    Ok(())
}

fn parse_mode(s: &str) -> Result<ShootingMode> {
    match s {
        "level-set" => Ok(ShootingMode::LevelSet),
        "dual" => Ok(ShootingMode::Dual),
        other => Err(Error::Parse(format!("unknown mode '{other}'"))),
    }
}

fn dispatch(cmd: Command, p: &Params, out: &Path) -> Result<bool> {
    match cmd {
        Command::Solve => run_solve(p, out),
        Command::Construct => run_construct(p, out),
        Command::Csf => run_csf(p, out),
        Command::Blowdown => run_blowdown(p, out),
        Command::Verify => run_verify(p, out),
    }
}

fn run_solve(p: &Params, out: &Path) -> Result<bool> {
    let domain = Domain::from(EllipsoidDomain::new(p.usize("dim")?, p.f64("r")?, p.f64("t")?)?);
    let sigma = p.f64("sigma")?;
    let mut sigmas: Vec<f64> = DEFAULT_SIGMA_SCHEDULE.iter().copied().filter(|s| *s > sigma).collect();
    sigmas.push(sigma);
    let steps = continuation_with(&domain, p.usize("resolution")?, &sigmas, &SolverConfig::default(), &Boundary::Constant(0.0))?;
    let stats: Vec<_> = steps.iter().map(|(_, s)| s.clone()).collect();
    write_json(&out.join("stats.json"), &stats)?;
    let (u, last) = steps.last().expect("nonempty schedule");
    u.save(out.join("solution.grid"))?;
    Ok(last.converged && last.sigma == sigma)
}

fn run_construct(p: &Params, out: &Path) -> Result<bool> {
    let tol = ShootingTolerances {
        resolution: p.usize("resolution")?,
        ..Default::default()
    };
    let mode = parse_mode(&p.text("mode")?)?;
    let (n, theta) = (p.usize("n")?, p.f64("theta")?);
    let ks = p.list("K")?;
    if let [k] = ks[..] {
        let res = shoot_parameters(n, k, theta, mode, &tol)?;
        res.save(out, "member")?;
        Ok(res.converged)
    } else {
        let fam = build_family(n, theta, &ks, mode, &tol)?;
        fam.save(out)?;
        Ok(fam.failures.is_empty())
    }
}

#[derive(Serialize)]
struct CsfSummary<'a> {
    area_law: &'a crate::curve_flow::AreaLawReport,
    roundness_exponent: f64,
    delta: &'a [f64],
    decreasing_from: Option<usize>,
    decay: &'a crate::curve_flow::DecayReport,
}

fn run_csf(p: &Params, out: &Path) -> Result<bool> {
    let (a, b) = (p.f64("a")?, p.f64("b")?);
    let w0 = SupportCurve::ellipse(a, b, p.usize("nodes")?)?;
    let t_end = p.f64("t_end_fraction")? * a * b / 2.0;
    let traj = csf_run(&w0, t_end, p.f64("dt")?)?;
    let law = area_law_check(&traj)?;
    let round = normalize_and_roundness(&traj)?;
    let decay = gage_hamilton_decay(&traj)?;
    let mut table = Vec::new();
    let curves = export_trajectory(&traj, &mut table)?;
    fs::write(out.join("trajectory.csv"), table)?;
    let dir = out.join("curves");
    fs::create_dir_all(&dir)?;
    for (name, text) in curves {
        fs::write(dir.join(name), text)?;
    }
    write_json(
        &out.join("report.json"),
        &CsfSummary {
            area_law: &law,
            roundness_exponent: round.exponent,
            delta: &round.delta,
            decreasing_from: round.decreasing_from,
            decay: &decay,
        },
    )?;
    Ok(law.pass && round.decreasing_from == Some(0) && decay.pass)
}

fn run_blowdown(p: &Params, out: &Path) -> Result<bool> {
    let dim = p.usize("dim")?;
    let hs = p.list("h_schedule")?;
    let top = hs.iter().copied().fold(1.0, f64::max);
    let profile = match p.text("profile")?.as_str() {
        "bowl" => ReferenceProfile::bowl(bowl_profile(dim, 1.1 * (top * 2.0 * (dim - 1) as f64).sqrt() + 5.0, 0.01)?),
        "eta" => ReferenceProfile::eta(dim, p.usize("k")?)?,
        "radial" => ReferenceProfile::radial_sigma0(dim, 0.0),
        "paperclip" => ReferenceProfile::Paperclip,
        _ => ReferenceProfile::grim_reaper(dim),
    };
    if profile.dim() != dim {
        return Err(Error::InvalidInput(format!("profile is {}-dimensional", profile.dim())));
    }
    let rep = classify_profile(&profile, &hs, &ClassifyOptions::default())?;
    write_json(&out.join("blowdown.json"), &rep)?;
    for (i, &h) in hs.iter().enumerate() {
        blowdown(&profile, h, &BlowdownGrid::default())?
            .field
            .save(out.join(format!("blowdown_{i:02}.grid")))?;
    }
    Ok(rep.k.is_some())
}

fn run_verify(p: &Params, out: &Path) -> Result<bool> {
    let cfg = VerifyConfig {
        resolution: p.usize("resolution")?,
        theta: p.f64("theta")?,
        ks: p.list("K")?,
        concavity_tol: p.f64("concavity_tol")?,
    };
    let reports = verify_suite(&cfg)?;
    let dir = out.join("reports");
    fs::create_dir_all(&dir)?;
    for r in &reports {
        write_json(&dir.join(format!("{}.json", r.name)), r)?;
    }
    let mut summary = Vec::new();
    write_summary(&reports, &mut summary)?;
    fs::write(out.join("summary.csv"), summary)?;
    Ok(reports.iter().all(|r| r.pass))
}

/// Caps the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("{THREADS_ENV} = '{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_unknown_keys() {
        let cfg = RunConfig::new(Command::Solve, "/tmp/unused").set("colour", "red");
        assert_eq!(run_command(&cfg).status, 2);
        let cfg = RunConfig::new(Command::Solve, "/tmp/unused").set("sigma", "2");
        assert_eq!(run_command(&cfg).status, 2);
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let p = RunConfig::new(Command::Blowdown, "x").resolved().unwrap();
        assert_eq!(p.list("h_schedule").unwrap(), vec![100.0, 1000.0, 10000.0]);
    }

    #[test]
    fn config_values_may_be_numbers() {
        let json = r#"{"command":"verify","params":{"theta":3,"K":[2,4]},"out":"o"}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        let p = cfg.resolved().unwrap();
        assert_eq!(p.f64("theta").unwrap(), 3.0);
        assert_eq!(p.list("K").unwrap(), vec![2.0, 4.0]);
    }
}
