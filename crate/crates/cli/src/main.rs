use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(curvefront_cli::app::main_with(std::env::args_os()))
}
