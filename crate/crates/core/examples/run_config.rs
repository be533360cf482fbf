//! Parse a bundled preset and run it the way the command-line tool does.

use std::path::Path;

use hybridqed::cli::{run as run_job, RunOptions};
use hybridqed::config::RunConfig;

pub fn run() -> hybridqed::Result<()> {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets/table3.cfg");
    let cfg = RunConfig::from_file(&preset)?;
    let out = std::env::temp_dir().join("hybridqed_run_config");
    let report = run_job(&cfg, &RunOptions { out, verbose: false })?;
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    println!("crossing: {}", report.summary["results"]["crossing"]);
    println!("resolved config:\n{}", cfg.render());
    Ok(())
}

#[allow(dead_code)]
fn main() -> hybridqed::Result<()> {
    run()
}
