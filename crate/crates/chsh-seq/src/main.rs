use clap::Parser;

use chsh_seq::cli::{execute, Cli, CliError};

/// Applies the CHSH_SEQ_THREADS worker cap (0 or unset = automatic).
fn configure_threads() -> Result<(), CliError> {
    match std::env::var("CHSH_SEQ_THREADS") {
        Ok(value) => {
            let n: usize = value.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "CHSH_SEQ_THREADS must be a non-negative integer, got '{value}'"
                ))
            })?;
            if n > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Input(format!("cannot configure thread pool: {e}")))?;
            }
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| execute(cli)) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
