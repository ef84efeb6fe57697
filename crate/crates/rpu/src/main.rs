use std::io::IsTerminal;
use std::process::ExitCode;

fn main() -> ExitCode {
    let tty = std::io::stdout().is_terminal();
    let code = rpu::cli::run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock(), tty);
    ExitCode::from(code)
}
