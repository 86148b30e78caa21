use std::process::ExitCode;

fn main() -> ExitCode {
    let env_seed = std::env::var(strobosq::cli::SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = strobosq::cli::run(
        std::env::args_os(),
        env_seed.as_deref(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    );
    ExitCode::from(code as u8)
}
