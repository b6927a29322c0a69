use std::process::ExitCode;

fn main() -> ExitCode {
    ordseg::cli::run()
}
