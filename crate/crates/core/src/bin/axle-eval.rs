use std::io;
use std::process::ExitCode;

use axle_eval::cli;

fn main() -> ExitCode {
    cli::init_logging();
    let code = cli::run(
        std::env::args_os(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
