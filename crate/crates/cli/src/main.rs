use std::process::ExitCode;

fn main() -> ExitCode {
    tckae_cli::main_with(std::env::args_os())
}
