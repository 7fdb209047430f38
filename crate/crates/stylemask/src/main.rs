use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(stylemask::cli::main_with_args(std::env::args_os()))
}
