use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use ramanlab_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            // exit code 2 is reserved for unconverged fits
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(m) if m.converged => ExitCode::SUCCESS,
        Ok(m) => {
            eprintln!(
                "warning: a fit did not converge; outputs written to {}",
                cli.out_dir.display()
            );
            for o in &m.outputs {
                eprintln!("  {o}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
