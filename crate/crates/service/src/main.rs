use std::process::ExitCode;

use payoff_forge_service::{resolve_bind, serve, BIND_ENV};

fn usage() -> ExitCode {
    eprintln!("usage: payoff-forge-service [--bind ADDR:PORT]  (or set {BIND_ENV})");
    ExitCode::from(64)
}

#[tokio::main]
async fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut bind = None;
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--bind" => match args.next() {
                Some(v) => bind = Some(v),
                None => return usage(),
            },
            s if s.starts_with("--bind=") => bind = Some(s["--bind=".len()..].to_string()),
            _ => return usage(),
        }
    }
    match serve(&resolve_bind(bind.as_deref())).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
