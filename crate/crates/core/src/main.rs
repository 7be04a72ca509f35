use std::process::ExitCode;

fn main() -> ExitCode {
    wagegap::cli::run(std::env::args_os())
}
