use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ckn_lab::experiments::{is_usage_error, list_experiments, run_config, RunOptions};

#[derive(Parser)]
#[command(name = "ckn-lab", version, about = "Numerical experiments for power-weighted elliptic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in a config file.
    Run {
        config: PathBuf,
        /// Also write per-trial tables.
        #[arg(long)]
        dump_trials: bool,
    },
    /// Print the experiment registry.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            ExitCode::SUCCESS
        }
        Command::Run { config, dump_trials } => match run_config(&config, RunOptions { dump_trials }) {
            Ok((report, files)) => {
                print!("{}", report.summary_text());
                for f in &files {
                    println!("wrote {}", f.display());
                }
                if report.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if is_usage_error(&e) { 1 } else { 2 })
            }
        },
    }
}
