//! Writes a small synthetic gland dataset and its manifest.
//!
//! `cargo run --example synth_dataset -- [out_dir] [n]`

use std::path::PathBuf;

use glandseg::cli::{cmd_synth, RunConfig, SynthConfig};

fn main() -> glandseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth_out".into()));
    let n: usize = args.next().map_or(Ok(8), |s| s.parse()).expect("n must be an integer");
    let cfg = RunConfig {
        seed: 7,
        ..RunConfig::default()
    };
    let synth = SynthConfig {
        touching: 0.6,
        ..SynthConfig::default()
    };
    let manifest = cmd_synth(&cfg, &synth, n, "train", &out)?;
    for r in &manifest.records {
        println!("{}  {}  {}", r.id, r.image.display(), r.labels.display());
    }
    println!("wrote {} images and manifest.json to {}", manifest.records.len(), out.display());
    Ok(())
}
