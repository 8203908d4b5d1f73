// SPDX-License-Identifier: Apache-2.0

//! Command-line client of the pipeline service.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rmtiso_client::{Client, ClientError};
use rmtiso_core::api::{CompileRequest, PacketRequest};
use rmtiso_core::compiler::CompileError;
use rmtiso_core::control::Register;
use rmtiso_core::harness::{RunOptions, Scenario};

fn parse_u32(s: &str) -> Result<u32, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse(),
    }
    .map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "rmtiso", version, about = "Client for the rmtiso pipeline service")]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "RMTISO_SERVER", default_value = "http://127.0.0.1:7878")]
    server: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a module; writes its entry dump and reconfiguration packets.
    Compile {
        source: PathBuf,
        #[arg(long, default_value_t = 1)]
        vid: u16,
        /// Cookie for the emitted packets (default: the server's).
        #[arg(long, value_parser = parse_u32)]
        cookie: Option<u32>,
        /// Output directory; the dump goes to stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file; writes stats.jsonl (and trace.jsonl with --trace).
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Record every packet outcome to trace.jsonl.
        #[arg(long)]
        trace: bool,
        /// Check every admitted packet against the reference semantics.
        #[arg(long)]
        check: bool,
        /// Override the scenario's cookie.
        #[arg(long, value_parser = parse_u32)]
        cookie: Option<u32>,
    },
    /// Send frames to the live pipeline; prints one outcome per line.
    Inject {
        /// Frame as hex; repeatable.
        #[arg(long = "hex")]
        hex: Vec<String>,
        /// File with one hex frame per line.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        port: u8,
    },
    /// Print filter registers and every non-default entry.
    DumpState {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a module onto the live pipeline.
    Load {
        source: PathBuf,
        #[arg(long)]
        vid: u16,
        #[arg(long)]
        slot: Option<u8>,
    },
    /// Replace the module in a slot.
    Update {
        slot: u8,
        source: PathBuf,
    },
    Unload {
        slot: u8,
    },
    /// List resident modules.
    Modules,
    /// Write one entry: `<resource> <index> <hex>`.
    InstallEntry {
        line: String,
    },
    /// Overwrite an entry that is already installed.
    ModifyEntry {
        line: String,
    },
    /// Read one entry, e.g. `cam@2 5`.
    ReadEntry {
        resource: String,
        index: u8,
    },
    /// Per-module packet counters, system counter and memory faults.
    ReadCounters {
        slot: u8,
    },
    /// Read or write a filter register (cookie, counter, bitmap).
    Configure {
        register: Register,
        #[arg(value_parser = parse_u32)]
        value: Option<u32>,
    },
    /// Set the system-provided link utilization and queue length.
    Stats {
        link_util: u16,
        queue_len: u16,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

fn report_compile(e: &CompileError) {
    match e {
        CompileError::Static { violations } => violations.iter().for_each(|v| eprintln!("error: {v}")),
        CompileError::Resource { violations } => violations.iter().for_each(|v| eprintln!("error: {v}")),
        e => eprintln!("error: {e}"),
    }
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    let c = Client::new(cli.server);
    match cli.cmd {
        Cmd::Compile { source, vid, cookie, out } => {
            let resp = c.compile(&CompileRequest { source: read(&source)?, vid, cookie }).await?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write(&dir.join(format!("{}.dump", resp.name)), &resp.dump)?;
                    write(&dir.join(format!("{}.packets", resp.name)), &(resp.packets.join("\n") + "\n"))?;
                    eprintln!("{}: {} packets", resp.name, resp.packets.len());
                }
                None => print!("{}", resp.dump),
            }
        }
        Cmd::Run { scenario, out, trace, check, cookie } => {
            let mut sc = Scenario::from_file(&scenario)?;
            if let Some(k) = cookie {
                sc.cookie = k;
            }
            let report = c.run(sc, RunOptions { record_outcomes: trace, check_reference: check }).await?;
            std::fs::create_dir_all(&out)?;
            write(&out.join("stats.jsonl"), &report.stats_jsonl())?;
            if trace {
                write(&out.join("trace.jsonl"), &report.trace_jsonl())?;
            }
            for (vid, t) in &report.totals {
                eprintln!("vid {vid}: injected {} forwarded {} dropped {}", t.injected, t.forwarded, t.dropped);
            }
            for w in &report.windows {
                let end = w.end_tick.map_or("-".to_string(), |t| t.to_string());
                eprintln!("slot {} {:?}: ticks {}..{end}", w.slot, w.kind, w.start_tick);
            }
            if check && !report.mismatches.is_empty() {
                bail!("{} packets disagree with the reference", report.mismatches.len());
            }
        }
        Cmd::Inject { mut hex, file, port } => {
            if let Some(f) = file {
                hex.extend(
                    read(&f)?.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from),
                );
            }
            if hex.is_empty() {
                bail!("no frames given; use --hex or --file");
            }
            let packets = hex.into_iter().map(|hex| PacketRequest { hex, ingress_port: port }).collect();
            for o in c.inject_batch(packets).await? {
                print_json(&o);
            }
        }
        Cmd::DumpState { out } => {
            let st = c.state().await?;
            let text = format!(
                "counter {}\nbitmap {:08x}\n{}",
                st.reconfig_counter,
                st.update_bitmap,
                st.lines.iter().map(|l| format!("{l}\n")).collect::<String>()
            );
            match out {
                Some(p) => write(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Load { source, vid, slot } => print_json(&c.load(&read(&source)?, vid, slot).await?),
        Cmd::Update { slot, source } => print_json(&c.update(slot, &read(&source)?).await?),
        Cmd::Unload { slot } => c.unload(slot).await?,
        Cmd::Modules => {
            for m in c.modules().await? {
                print_json(&m);
            }
        }
        Cmd::InstallEntry { line } => print_json(&c.install_entry(&line).await?),
        Cmd::ModifyEntry { line } => print_json(&c.modify_entry(&line).await?),
        Cmd::ReadEntry { resource, index } => println!("{}", c.read_entry(&resource, index).await?),
        Cmd::ReadCounters { slot } => print_json(&c.counters(slot).await?),
        Cmd::Configure { register, value } => {
            let v = match value {
                Some(v) => c.configure(register, v).await?,
                None => c.read_filter(register).await?,
            };
            println!("{v:#010x}");
        }
        Cmd::Stats { link_util, queue_len } => print_json(&c.set_stats(link_util, queue_len).await?),
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(ClientError::Api { body, .. }) = e.downcast_ref::<ClientError>() {
                if let (Some(code), Some(ce)) = (body.exit_code, &body.compile) {
                    report_compile(ce);
                    return ExitCode::from(code as u8);
                }
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
