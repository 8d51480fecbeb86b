mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "soppia", version, about = "Score, classify and report non-pecuniary damages cases")]
struct Cli {
    /// Criteria schema file; the built-in CLT schema when omitted.
    #[arg(long, global = true, env = "SOPPIA_SCHEMA")]
    schema: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a case file and print its report.
    Assess {
        #[arg(long)]
        case: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Print the band and third for a weighted total.
    Classify {
        #[arg(long)]
        total: rust_decimal::Decimal,
    },
    /// Re-run a case with presence or weight overrides.
    Whatif {
        #[arg(long)]
        case: PathBuf,
        /// Presence override, ID=LEVEL. Repeatable.
        #[arg(long = "set", value_parser = parse_presence)]
        set: Vec<(String, u8)>,
        /// Weight override, ID=WEIGHT. Repeatable.
        #[arg(long = "set-weight", value_parser = parse_weight)]
        set_weight: Vec<(String, rust_decimal::Decimal)>,
        #[arg(long, value_enum, default_value_t = WhatIfFormat::Plain)]
        format: WhatIfFormat,
    },
    /// Render model prompts and parse model responses.
    #[command(subcommand)]
    Prompt(PromptCommand),
    /// Validate or export criteria schemas.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum PromptCommand {
    /// Print the assessment prompt for a facts file.
    Render {
        #[arg(long)]
        facts: PathBuf,
    },
    /// Parse a model response; exits 1 when diagnostics are raised.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum SchemaCommand {
    /// Check a schema file and print OK.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the active schema as JSON.
    Export,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, env = "SOPPIA_STORE")]
    store: PathBuf,
    /// Completion endpoint URL; enables /api/prompt/complete.
    #[arg(long)]
    llm_url: Option<String>,
    /// Environment variable holding the endpoint's bearer token.
    #[arg(long)]
    llm_token_env: Option<String>,
    #[arg(long, default_value_t = 60_000)]
    llm_timeout_ms: u64,
    #[arg(long)]
    llm_model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Plain,
    Markdown,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WhatIfFormat {
    Plain,
    Json,
}

fn split_pair(s: &str) -> Result<(&str, &str), String> {
    s.split_once('=')
        .filter(|(id, v)| !id.is_empty() && !v.is_empty())
        .ok_or_else(|| format!("expected ID=VALUE, got {s:?}"))
}

fn parse_presence(s: &str) -> Result<(String, u8), String> {
    let (id, v) = split_pair(s)?;
    let level = v.parse::<u8>().map_err(|e| format!("presence {v:?}: {e}"))?;
    Ok((id.to_owned(), level))
}

fn parse_weight(s: &str) -> Result<(String, rust_decimal::Decimal), String> {
    let (id, v) = split_pair(s)?;
    let weight = v.parse().map_err(|e| format!("weight {v:?}: {e}"))?;
    Ok((id.to_owned(), weight))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
