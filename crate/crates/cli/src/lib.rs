//! Scenario runner for the library in `ltg-core`.

pub mod kinds;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;

use kinds::RunError;
use report::{Report, Table};
use scenario::{output_dir, InputError, Kind, Overrides, RunList, ScenarioConfig};

/// Process exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug)]
pub struct Outcome {
    pub name: String,
    pub dir: PathBuf,
    pub report: Option<Report>,
    pub error: Option<String>,
}

impl Outcome {
    pub fn status(&self) -> i32 {
        match (&self.report, &self.error) {
            (Some(r), None) if r.pass() => EXIT_PASS,
            (Some(_), None) => EXIT_ASSERTION,
            _ => EXIT_INPUT,
        }
    }
}

/// Loads, runs and writes one scenario. `expect` rejects a config whose
/// kind differs from the subcommand that named it.
pub fn run_config(path: &Path, out: Option<&Path>, overrides: &Overrides, expect: Option<Kind>) -> Outcome {
    let loaded = ScenarioConfig::load(path).and_then(|(mut cfg, text)| {
        cfg.apply(overrides)?;
        Ok((cfg, text))
    });
    let (cfg, text) = match loaded {
        Ok(v) => v,
        Err(e) => return failure(path, out, e.to_string()),
    };
    if let Some(k) = expect {
        if k != cfg.kind {
            return failure(path, out, format!("config is a {} scenario, not {}", cfg.kind.name(), k.name()));
        }
    }
    let dir = output_dir(out, &cfg);
    let name = cfg.name();
    match kinds::run(&cfg) {
        Ok(mut report) => {
            report.inputs.insert(0, digest(&path.file_name().map_or("config".into(), |f| f.to_string_lossy().into_owned()), &text));
            let error = report.write(&dir).err().map(|e| e.to_string());
            Outcome { name, dir, report: Some(report), error }
        }
        Err(e) => {
            let error = match e {
                RunError::Input(InputError::Missing(m)) => m,
                other => other.to_string(),
            };
            Outcome { name, dir, report: None, error: Some(error) }
        }
    }
}

fn digest(label: &str, text: &str) -> report::Input {
    let mut r = Report::new("", "");
    r.input(label, text.as_bytes());
    r.inputs.remove(0)
}

fn failure(path: &Path, out: Option<&Path>, error: String) -> Outcome {
    let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    Outcome { name, dir: out.map(Path::to_path_buf).unwrap_or_default(), report: None, error: Some(error) }
}

/// Runs every scenario of a list, each into `<out>/<name>`, with at most
/// `jobs` at a time, and writes `<out>/index.csv`.
pub fn run_list(path: &Path, out: &Path, overrides: &Overrides, jobs: Option<usize>) -> Result<Vec<Outcome>, InputError> {
    let (list, _) = RunList::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let configs: Vec<PathBuf> = list.scenarios.iter().map(|p| base.join(p)).collect();
    let jobs = jobs
        .or(list.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, configs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg_path) = configs.get(k) else { break };
                let name = match ScenarioConfig::load(cfg_path) {
                    Ok((c, _)) => c.name(),
                    Err(_) => cfg_path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned()),
                };
                let dir = out.join(&name);
                let outcome = run_config(cfg_path, Some(&dir), overrides, None);
                results.lock().expect("no worker panics while holding the lock")[k] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<Outcome> = results.into_inner().expect("workers joined").into_iter().flatten().collect();
    let mut index = Table::new(&["scenario", "kind", "status", "error"]);
    for o in &outcomes {
        let kind = o.report.as_ref().map_or(String::new(), |r| r.kind.clone());
        index.push(vec![o.name.clone(), kind, o.status().to_string(), o.error.clone().unwrap_or_default()]);
    }
    let write = || -> Result<()> {
        std::fs::create_dir_all(out)?;
        let mut w = csv::Writer::from_path(out.join("index.csv"))?;
        w.write_record(&index.header)?;
        for r in &index.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| InputError::Missing(format!("writing index: {e}")))?;
    Ok(outcomes)
}
