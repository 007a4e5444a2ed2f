use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ppboot::experiments::{run_coverage_study, summarize_to_tables, DataSource, TrialConfig};
use ppboot::par::with_threads;
use ppboot::{Error, Result};
use serde::{Deserialize, Serialize};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const DISPLAYED_FILE: &str = "displayed.csv";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Study configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for every random draw of the study.
    #[arg(long)]
    seed: u64,
    /// Worker thread cap; does not affect results.
    #[arg(long)]
    threads: Option<usize>,
}

/// The study config file: a data source plus the trial protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub source: DataSource,
    pub study: TrialConfig,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    seed: u64,
    config: &'a StudyFile,
}

fn read_config(path: &Path) -> Result<StudyFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut cfg: StudyFile = serde_json::from_str(&text)
        .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))?;
    if let DataSource::Csv { path: csv, .. } = &mut cfg.source {
        if csv.is_relative() {
            if let Some(dir) = path.parent() {
                *csv = dir.join(&*csv);
            }
        }
    }
    Ok(cfg)
}

fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    let io = |path: PathBuf| move |source| Error::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_owned()))?;
    for (i, (name, contents)) in files.iter().enumerate() {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for (done, _) in &files[..=i] {
                let _ = fs::remove_file(dir.join(done));
            }
            return Err(io(path)(e));
        }
    }
    Ok(())
}

pub fn run(a: StudyArgs) -> Result<()> {
    let mut file = read_config(&a.config)?;
    file.study.bootstrap.master_seed = a.seed;
    let tables = with_threads(a.threads, || -> Result<_> {
        let data = file.source.load(a.seed)?;
        Ok(summarize_to_tables(&run_coverage_study(&data, &file.study)?))
    })??;
    let manifest = Manifest {
        version: format!("v{}", env!("CARGO_PKG_VERSION")),
        seed: a.seed,
        config: &file,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');
    let mut report_json = tables.to_json();
    report_json.push('\n');
    write_all(
        &a.out,
        &[
            (AGGREGATE_FILE, tables.aggregate_csv()?),
            (DISPLAYED_FILE, tables.displayed_csv()?),
            (REPORT_JSON_FILE, report_json),
            (MANIFEST_FILE, manifest_json),
        ],
    )
}
