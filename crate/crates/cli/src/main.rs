use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ssm_cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { Status::InputError as u8 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = std::env::var("SSM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let report = run(&cli);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.body.as_bytes());
    let _ = stdout.flush();
    if let Some(error) = &report.error {
        eprintln!("{error}");
    }
    ExitCode::from(report.status as u8)
}
