//! Drives the command-line pipeline in-process: the staged commands and a
//! single `run` over the scripted solution-mix configuration.

use std::path::Path;

use clap::Parser;
use featling::cli::{default_client, execute, Cli};

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/solution_mix.json");
    let out = std::env::temp_dir().join("featling-cli-example");
    let config = config.to_string_lossy();
    let out = out.to_string_lossy();
    for stage in ["extract", "train", "predict", "eval"] {
        let cli = Cli::parse_from(["featling", stage, "--config", &config, "--output", &out, "--trials", "5"]);
        let code = execute(&cli, &default_client);
        println!("{stage}: exit {code}");
    }
    let cli = Cli::parse_from([
        "featling", "inspect", "weights", "--config", &config, "--output", &out, "--trials", "5",
    ]);
    execute(&cli, &default_client);
}
