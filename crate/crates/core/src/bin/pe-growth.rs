use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pe_growth::cli::main_from_args(std::env::args_os()))
}
