// SPDX-License-Identifier: Apache-2.0

use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use rmtiso_core::control::Controller;
use rmtiso_core::system::SystemConfig;

fn parse_u32(s: &str) -> Result<u32, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

/// Serve a software pipeline over HTTP/JSON.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: SocketAddr,
    /// Reconfiguration cookie (decimal or 0x-prefixed hex).
    #[arg(long, default_value = "0x00C0FFEE", value_parser = parse_u32)]
    cookie: u32,
    /// System configuration (TOML): routes, multicast groups, tenants.
    #[arg(long)]
    system: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let args = Args::parse();
    let system = match &args.system {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SystemConfig::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SystemConfig::default(),
    };
    let ctl = Controller::new(args.cookie, system)?;
    let listener = tokio::net::TcpListener::bind(args.addr).await.with_context(|| format!("binding {}", args.addr))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    rmtiso_service::serve_until(listener, rmtiso_service::shared(ctl), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
