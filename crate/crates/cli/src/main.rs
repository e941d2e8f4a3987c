use std::process::ExitCode;

fn main() -> ExitCode {
    abscam_cli::run(std::env::args_os())
}
