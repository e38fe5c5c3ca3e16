use std::process::ExitCode;

use clap::Parser;
use orient_cli::{run_experiment, Args, ExperimentSpec};

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentSpec::resolve(&args).and_then(|spec| run_experiment(&spec));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.table);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
