//! Every stage from one config file, run twice to show the artifacts are
//! byte-identical. Same as `uplift-policy run --config <file>`.
//!
//! ```text
//! cargo run --release --example full_pipeline [config.toml]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use uplift_policy::pipeline::{self, RunConfig};

fn main() -> uplift_policy::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/budget.toml")
    });
    let mut cfg = RunConfig::load(&path)?;
    print!("{}", pipeline::cmd_run(&cfg)?);

    let first = cfg.out_dir.clone();
    cfg.out_dir = first.with_file_name(format!(
        "{}-rerun",
        first.file_name().unwrap_or_default().to_string_lossy()
    ));
    pipeline::cmd_run(&cfg)?;
    let mut names: Vec<_> = fs::read_dir(&first)
        .map_err(|e| uplift_policy::Error::io(&first, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .collect();
    names.sort();
    for name in names {
        let same = fs::read(first.join(&name)).ok() == fs::read(cfg.out_dir.join(&name)).ok();
        println!("{:<24} {}", name.to_string_lossy(), if same { "identical" } else { "DIFFERS" });
    }
    Ok(())
}
