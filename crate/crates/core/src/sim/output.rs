//! Run artifacts: `timeseries.csv`, `summary.json` and `config.echo.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::sim::runner::RunResult;

pub const TIMESERIES_HEADER: [&str; 8] = ["t", "agent", "x", "y", "vx", "vy", "lambda2", "lambda2_hat"];

/// One row per step and agent. `lambda2_hat` is empty while no estimate is
/// available.
pub fn write_timeseries(result: &RunResult, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMESERIES_HEADER)?;
    for r in &result.series {
        let t = r.t.to_string();
        let l2 = r.lambda2.to_string();
        let l2_hat = r.lambda2_hat.map(|v| v.to_string()).unwrap_or_default();
        for (i, (p, v)) in r.positions.iter().zip(&r.velocities).enumerate() {
            w.write_record([
                t.as_str(),
                &i.to_string(),
                &p[0].to_string(),
                &p[1].to_string(),
                &v[0].to_string(),
                &v[1].to_string(),
                &l2,
                &l2_hat,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub timeseries: PathBuf,
    pub summary: PathBuf,
    pub config_echo: PathBuf,
}

/// Creates `dir` if needed and writes all three artifacts into it.
pub fn write_outputs(result: &RunResult, dir: impl AsRef<Path>) -> Result<OutputPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        timeseries: dir.join("timeseries.csv"),
        summary: dir.join("summary.json"),
        config_echo: dir.join("config.echo.json"),
    };
    let file = fs::File::create(&paths.timeseries)?;
    write_timeseries(result, std::io::BufWriter::new(file))?;
    fs::write(&paths.summary, serde_json::to_string_pretty(&result.summary)? + "\n")?;
    fs::write(&paths.config_echo, result.config.to_json_string() + "\n")?;
    Ok(paths)
}
