//! HTTP facade over the assessment engine.
//!
//! Compute endpoints are pure functions of the request body. Persistence only
//! happens through `/api/cases` and `PUT /api/schema`. Every response body is
//! a canonical-JSON [`ApiEnvelope`].

mod api;
mod error;

use std::future::Future;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::Router;
use soppia_core::{
    canonicalize, default_clt_schema, load_schema, CaseStore, CompletionError, CriteriaSchema, RecordKind, SchemaError,
    SchemaRef, StoreError, EndpointConfig,
};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{
    AssessRequest, CaseSaved, CompleteRequest, CompleteResponse, ParseRequest, RenderRequest, ReportRenderRequest,
    ReportText, SchemaSaved, SensitivityReport, SensitivityRequest, WhatIfRequest,
};
pub use error::{ApiEnvelope, ApiError, ErrorBody};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub host: IpAddr,
    pub port: u16,
    pub store_root: PathBuf,
    pub schema_path: Option<PathBuf>,
    pub llm_endpoint: Option<EndpointConfig>,
}

impl ServerConfig {
    pub fn new(port: u16, store_root: impl Into<PathBuf>) -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port,
            store_root: store_root.into(),
            schema_path: None,
            llm_endpoint: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("cannot read schema {path}: {source}")]
    SchemaRead {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("schema {path} rejected: {source}")]
    Schema {
        path: PathBuf,
        #[source]
        source: SchemaError,
    },
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("llm endpoint: {0}")]
    Llm(#[from] CompletionError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
struct ActiveSchema {
    schema: Arc<CriteriaSchema>,
    schema_ref: SchemaRef,
}

pub struct AppState {
    active: RwLock<ActiveSchema>,
    store: Arc<CaseStore>,
    llm: Option<EndpointConfig>,
}

impl AppState {
    /// Validates the configuration and records the active schema in the store.
    pub fn from_config(config: &ServerConfig) -> Result<Arc<Self>, StartupError> {
        let schema = match &config.schema_path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| StartupError::SchemaRead {
                    path: path.clone(),
                    source,
                })?;
                load_schema(&text).map_err(|source| StartupError::Schema {
                    path: path.clone(),
                    source,
                })?
            }
            None => default_clt_schema(),
        };
        if let Some(llm) = &config.llm_endpoint {
            llm.validate()?;
        }
        let store = Arc::new(CaseStore::open(&config.store_root)?);
        let revision = register_schema(&store, &schema)?;
        Ok(Arc::new(Self {
            active: RwLock::new(ActiveSchema {
                schema_ref: SchemaRef::of(&schema).with_revision(revision),
                schema: Arc::new(schema),
            }),
            store,
            llm: config.llm_endpoint.clone(),
        }))
    }

    fn active(&self) -> ActiveSchema {
        self.active.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn set_active(&self, schema: CriteriaSchema, revision: u64) {
        let mut guard = self.active.write().unwrap_or_else(|p| p.into_inner());
        *guard = ActiveSchema {
            schema_ref: SchemaRef::of(&schema).with_revision(revision),
            schema: Arc::new(schema),
        };
    }
}

/// Reuses the latest stored revision when it already holds this exact schema.
fn register_schema(store: &CaseStore, schema: &CriteriaSchema) -> Result<u64, StoreError> {
    match store.load(RecordKind::Schema, &schema.schema_id, None) {
        Ok(latest) if canonicalize(&latest.payload).ok() == canonicalize(schema).ok() => Ok(latest.revision),
        Ok(_) | Err(StoreError::NotFound { .. }) => store.save_schema(schema),
        Err(e) => Err(e),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    api::routes(state)
}

pub struct BoundServer {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl BoundServer {
    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub async fn run_until<F>(self, shutdown: F) -> Result<(), StartupError>
    where
        F: Future<Output = ()> + Send + 'static,
    {
        axum::serve(self.listener, router(self.state))
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}

/// Validates the config and binds the listener without serving yet.
pub async fn bind(config: &ServerConfig) -> Result<BoundServer, StartupError> {
    let state = AppState::from_config(config)?;
    let addr = SocketAddr::new(config.host, config.port);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::Bind { addr, source })?;
    Ok(BoundServer { listener, state })
}

/// Serves until Ctrl-C (or SIGTERM on Unix).
pub async fn serve(config: ServerConfig) -> Result<(), StartupError> {
    let server = bind(&config).await?;
    tracing::info!("listening on http://{}", server.local_addr()?);
    server.run_until(shutdown_signal()).await
}

pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = terminate => {}
    }
    tracing::info!("shutting down");
}
