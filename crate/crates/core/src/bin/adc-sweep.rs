use std::process::ExitCode;

use adc_capacity::sweep::{run_sweep, Cli, SweepConfig};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = SweepConfig::from_cli(&cli).and_then(|cfg| {
        log::info!("writing {}", cfg.output_path.display());
        let summary = run_sweep(&cfg)?;
        Ok((cfg, summary))
    });
    match result {
        Ok((cfg, summary)) => {
            print!("{summary}");
            println!("\nrows written to {}", cfg.output_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("adc-sweep: {e}");
            ExitCode::FAILURE
        }
    }
}
