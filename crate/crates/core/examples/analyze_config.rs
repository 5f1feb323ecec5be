//! Runs the full analysis for a TOML config, as `infoloss analyze` does.
//!
//! `cargo run --release --example analyze_config -- crates/core/configs/cyclic_walk.toml`

use std::path::PathBuf;

use infoloss::cli::{cmd_analyze, Config, GlobalOpts, Settings};

fn main() -> infoloss::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/tightness.toml"));
    let cfg = Config::load(&path)?;
    let opts = GlobalOpts {
        seed: None,
        samples: Some(200_000),
        bins: None,
        quad_tol: None,
        grid: None,
        out: None,
    };
    let settings = Settings::resolve(&opts, Some(&cfg.estimation))?;
    let report = cmd_analyze(&cfg, &settings)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
