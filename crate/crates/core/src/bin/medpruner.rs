use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(medpruner::cli::run(std::env::args_os()))
}
