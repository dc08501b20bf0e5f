use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(embednn::cli::main_with_args(std::env::args_os()).code())
}
