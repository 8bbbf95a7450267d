use std::process::ExitCode;

fn main() -> ExitCode {
    let code = biphoton_cli::main_with(
        std::env::args_os(),
        std::env::var_os(biphoton_cli::OUT_DIR_ENV).map(Into::into),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
