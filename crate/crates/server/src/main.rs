use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use psa_server::{manager, router, Settings};

#[tokio::main]
async fn main() -> ExitCode {
    let settings = Settings::parse();
    let manager = match manager(&settings) {
        Ok(m) => Arc::new(m),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let app = router(manager, &settings.prefix, settings.cors);
    let addr = SocketAddr::new(settings.bind, settings.port);
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("psa-server listening on http://{addr}{}", settings.prefix);
    if let Err(e) = axum::serve(listener, app).await {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
