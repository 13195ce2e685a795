use std::process::ExitCode;

fn main() -> ExitCode {
    reluforge::cli::run()
}
