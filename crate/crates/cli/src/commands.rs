use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use soppia_core::report::{fmt_money, fmt_multiplier, fmt_score};
use soppia_core::{
    assess, canonicalize, classify_total, default_clt_schema, load_schema, parse_response, render_prompt,
    render_report_text, what_if, AssessError, AssessmentResult, CaseFile, CriteriaSchema, EndpointConfig,
    ReportFormat, SchemaError, SensitivityError, WhatIfDelta,
};
use soppia_server::{ServerConfig, StartupError};

use crate::{Cli, Command, Format, PromptCommand, SchemaCommand, ServeArgs, WhatIfFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation,
    Io,
    Internal,
}

#[derive(Debug)]
pub struct CliError {
    kind: ExitKind,
    code: &'static str,
    message: String,
    field: Option<String>,
}

impl CliError {
    fn new(kind: ExitKind, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(ExitKind::Io, "io_error", format!("{}: {e}", path.display()))
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Internal, "internal", message)
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ExitKind::Validation => 1,
            ExitKind::Io => 2,
            ExitKind::Internal => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)?;
        if let Some(field) = &self.field {
            write!(f, " (field {field})")?;
        }
        Ok(())
    }
}

impl From<AssessError> for CliError {
    fn from(e: AssessError) -> Self {
        let kind = if e.is_internal() { ExitKind::Internal } else { ExitKind::Validation };
        Self {
            kind,
            code: e.code(),
            message: e.to_string(),
            field: e.field(),
        }
    }
}

impl From<SensitivityError> for CliError {
    fn from(e: SensitivityError) -> Self {
        match e {
            SensitivityError::Assess(inner) => inner.into(),
            other => Self {
                kind: ExitKind::Validation,
                code: other.code(),
                message: other.to_string(),
                field: other.field(),
            },
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        match &e {
            SchemaError::Parse(_) => CliError::new(ExitKind::Validation, "malformed_json", e.to_string()),
            SchemaError::Invalid(violations) => {
                let lines: Vec<String> = violations.iter().map(|v| format!("{}: {}", v.field, v.message)).collect();
                CliError::new(ExitKind::Validation, "invalid_schema", lines.join("; "))
            }
        }
    }
}

impl From<StartupError> for CliError {
    fn from(e: StartupError) -> Self {
        let (kind, code) = match &e {
            StartupError::Schema { .. } => (ExitKind::Validation, "invalid_schema"),
            StartupError::Llm(_) => (ExitKind::Validation, "invalid_config"),
            StartupError::Store(soppia_core::StoreError::Validation { .. }) => (ExitKind::Validation, "validation_error"),
            StartupError::SchemaRead { .. }
            | StartupError::Store(_)
            | StartupError::Bind { .. }
            | StartupError::Io(_) => (ExitKind::Io, "io_error"),
        };
        CliError::new(kind, code, e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let code = if inner.is_data() { "invalid_request" } else { "malformed_json" };
        CliError {
            kind: ExitKind::Validation,
            code,
            message: format!("{}: {inner}", path.display()),
            field: (field != "." && inner.is_data()).then_some(field),
        }
    })?;
    de.end()
        .map_err(|e| CliError::new(ExitKind::Validation, "malformed_json", format!("{}: {e}", path.display())))?;
    Ok(value)
}

fn active_schema(path: Option<&PathBuf>) -> CliResult<CriteriaSchema> {
    match path {
        Some(p) => Ok(load_schema(&read_text(p)?)?),
        None => Ok(default_clt_schema()),
    }
}

fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(ExitKind::Io, "io_error", format!("stdout: {e}")))
}

fn to_canonical<T: serde::Serialize>(value: &T) -> CliResult<String> {
    canonicalize(value).map_err(|e| CliError::internal(e.to_string()))
}

pub fn run(cli: Cli) -> CliResult {
    let schema_path = cli.schema;
    match cli.command {
        Command::Assess { case, format } => {
            let schema = active_schema(schema_path.as_ref())?;
            let case: CaseFile = read_json(&case)?;
            let result = assess(&schema, &case)?;
            emit(&render_assessment(&result, format)?)
        }
        Command::Classify { total } => {
            let schema = active_schema(schema_path.as_ref())?;
            let c = classify_total(&schema, total).map_err(|e| CliError::from(AssessError::from(e)))?;
            let note = if c.below_scale { " (below scale)" } else { "" };
            emit(&format!("{} / {} third{note}\n", c.band_label, c.third.as_str()))
        }
        Command::Whatif {
            case,
            set,
            set_weight,
            format,
        } => {
            let schema = active_schema(schema_path.as_ref())?;
            let case: CaseFile = read_json(&case)?;
            let delta = WhatIfDelta {
                presence_overrides: set.into_iter().collect(),
                weight_overrides: set_weight.into_iter().collect(),
            };
            let outcome = what_if(&schema, &case, &delta)?;
            match format {
                WhatIfFormat::Json => emit(&to_canonical(&outcome)?),
                WhatIfFormat::Plain => {
                    let mut text = format!("before: {}\nafter:  {}\n", summary(&outcome.before), summary(&outcome.after));
                    if outcome.modified_weights {
                        text.push_str("note: weights modified, band thresholds unchanged\n");
                    }
                    for change in &outcome.changed_fields {
                        text.push_str(&format!("changed {}: {} -> {}\n", change.field, change.before, change.after));
                    }
                    emit(&text)
                }
            }
        }
        Command::Prompt(PromptCommand::Render { facts }) => {
            let schema = active_schema(schema_path.as_ref())?;
            let prompt = render_prompt(&schema, &read_text(&facts)?)
                .map_err(|e| CliError::new(ExitKind::Validation, "empty_facts", e.to_string()))?;
            emit(&prompt.rendered)
        }
        Command::Prompt(PromptCommand::Parse { input }) => {
            let schema = active_schema(schema_path.as_ref())?;
            let parsed = parse_response(&read_text(&input)?, &schema)
                .map_err(|e| CliError::new(ExitKind::Validation, "unparseable_response", e.to_string()))?;
            emit(&to_canonical(&parsed)?)?;
            if parsed.diagnostics.is_empty() {
                return Ok(());
            }
            for d in &parsed.diagnostics {
                eprintln!("warning: {d}");
            }
            Err(CliError::new(
                ExitKind::Validation,
                "response_diagnostics",
                format!("{} diagnostic(s) raised", parsed.diagnostics.len()),
            ))
        }
        Command::Schema(SchemaCommand::Validate { input }) => {
            load_schema(&read_text(&input)?)?;
            emit("OK\n")
        }
        Command::Schema(SchemaCommand::Export) => {
            let schema = active_schema(schema_path.as_ref())?;
            emit(&format!("{}\n", schema.to_json_pretty()))
        }
        Command::Serve(args) => serve(args, schema_path),
    }
}

/// Byte-identical to the `data` member of `POST /api/assess` for `Format::Json`.
pub fn render_assessment(result: &AssessmentResult, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Json => to_canonical(result)?,
        Format::Markdown => render_report_text(&result.report, ReportFormat::Markdown),
        Format::Plain => render_report_text(&result.report, ReportFormat::Plain),
    })
}

fn summary(r: &AssessmentResult) -> String {
    let c = &r.classification;
    format!(
        "{} points, {} / {} third, {}× = {}",
        fmt_score(c.total),
        c.band_label,
        c.third.as_str(),
        fmt_multiplier(r.recommendation.recommended_multiplier),
        fmt_money(&r.recommendation.recommended_amount)
    )
}

fn serve(args: ServeArgs, schema_path: Option<PathBuf>) -> CliResult {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();

    let config = ServerConfig {
        host: args.host,
        port: args.port,
        store_root: args.store,
        schema_path,
        llm_endpoint: args.llm_url.map(|url| EndpointConfig {
            url,
            token_env: args.llm_token_env,
            timeout_ms: args.llm_timeout_ms,
            model: args.llm_model,
        }),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    runtime.block_on(async {
        let server = soppia_server::bind(&config).await?;
        let addr = server.local_addr().map_err(StartupError::from)?;
        eprintln!("listening on http://{addr}");
        server.run_until(soppia_server::shutdown_signal()).await?;
        Ok(())
    })
}
