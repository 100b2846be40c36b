//! Single-threaded client state machine for one federation round.

use std::io;
use std::net::TcpStream;
use std::thread;
use std::time::Duration;

use fedsurv_core::federation::LocalModel;
use fedsurv_core::forest::ForestParams;
use fedsurv_core::schema::FederatedSchema;
use log::{info, warn};
use serde::Serialize;

use crate::audit::{find_violation, AuditEntry, Direction};
use crate::codec::DEFAULT_MAX_FRAME;
use crate::envelope::{Empty, Envelope, ModelDownload, ModelUpload, MsgType, RoundComplete};
use crate::error::{Result, TransportError};
use crate::site::{Evaluation, LocalSite};

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub client_id: String,
    pub forest: ForestParams,
    /// Seeds the local forest.
    pub seed: u64,
    pub timeout: Duration,
    pub max_frame: usize,
    pub connect_retries: u32,
    pub initial_backoff: Duration,
}

impl ClientConfig {
    pub fn new(client_id: impl Into<String>, forest: ForestParams, seed: u64) -> Self {
        Self {
            client_id: client_id.into(),
            forest,
            seed,
            timeout: Duration::from_secs(120),
            max_frame: DEFAULT_MAX_FRAME,
            connect_retries: 3,
            initial_backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientOutcome {
    pub client_id: String,
    pub federated_schema: FederatedSchema,
    pub model: LocalModel<f64>,
    pub evaluation: Evaluation,
    pub n_sites: usize,
    pub audit: Vec<AuditEntry>,
}

/// Connects, retrying refused or reset connections with exponential backoff.
pub fn connect_with_retry(addr: &str, retries: u32, initial_backoff: Duration) -> Result<TcpStream> {
    let mut delay = initial_backoff;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) if TransportError::is_retriable_io(&e) && attempt <= retries => {
                warn!("connect to {addr} failed ({e}); retrying in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
            Err(source) => {
                return Err(TransportError::Connect {
                    addr: addr.to_string(),
                    attempts: attempt,
                    source,
                })
            }
        }
    }
}

struct Session {
    stream: TcpStream,
    id: String,
    max_frame: usize,
    audit: Vec<AuditEntry>,
}

impl Session {
    fn send(&mut self, msg_type: MsgType, payload: &impl Serialize) -> Result<()> {
        let env = Envelope::new(msg_type, self.id.clone(), payload)?;
        if let Some(path) = find_violation(&env.payload) {
            return Err(TransportError::Privacy(format!("{msg_type} would transmit {path}")));
        }
        env.write_to(&mut self.stream, self.max_frame).map_err(lost)?;
        self.audit.push(AuditEntry::of(Direction::Sent, &env));
        Ok(())
    }

    fn recv(&mut self, expected: MsgType) -> Result<Envelope> {
        let env = Envelope::read_from(&mut self.stream, self.max_frame)
            .map_err(lost)?
            .ok_or_else(|| TransportError::RoundAborted("coordinator closed the connection".into()))?;
        self.audit.push(AuditEntry::of(Direction::Received, &env));
        match env.msg_type {
            MsgType::Error => Err(TransportError::RoundAborted(env.error_message())),
            t if t == expected => Ok(env),
            got => Err(TransportError::OutOfPhase { got, expected }),
        }
    }
}

/// Transport failures after the connection is up end the round; protocol
/// errors such as a version mismatch pass through unchanged.
fn lost(e: TransportError) -> TransportError {
    match e {
        TransportError::Io(e) if e.kind() == io::ErrorKind::WouldBlock || e.kind() == io::ErrorKind::TimedOut => {
            TransportError::RoundAborted("timed out waiting for the coordinator".into())
        }
        TransportError::Io(e) => TransportError::RoundAborted(format!("connection lost: {e}")),
        TransportError::ShortFrame => TransportError::RoundAborted("connection lost mid-frame".into()),
        other => other,
    }
}

/// Runs the client side of one round: schema up, federated schema down,
/// local fit, model up, model down, held-out evaluation. Only schema and
/// tree documents leave the site.
pub fn run_client(addr: &str, site: &LocalSite, config: &ClientConfig) -> Result<ClientOutcome> {
    if site.id() != config.client_id {
        return Err(TransportError::Config(format!(
            "site `{}` run as client `{}`",
            site.id(),
            config.client_id
        )));
    }
    let stream = connect_with_retry(addr, config.connect_retries, config.initial_backoff)?;
    stream.set_read_timeout(Some(config.timeout))?;
    let mut s = Session {
        stream,
        id: config.client_id.clone(),
        max_frame: config.max_frame,
        audit: Vec::new(),
    };

    s.send(MsgType::Hello, &Empty {})?;
    s.send(MsgType::SchemaUpload, site.schema())?;
    let federated: FederatedSchema = s.recv(MsgType::FederatedSchema)?.payload_as()?;
    info!("client `{}`: received federated schema", s.id);

    let fitted = site.fit(&federated, &config.forest, config.seed)?;
    s.send(
        MsgType::ModelUpload,
        &ModelUpload {
            site_features: fitted.site_features.clone(),
            forest: fitted.forest.clone(),
        },
    )?;
    let download: ModelDownload = s.recv(MsgType::ModelDownload)?.payload_as()?;
    let model = fitted
        .model(download.update_method, download.update_weighting)?
        .apply(download.received, &download.selection)?;
    let done: RoundComplete = s.recv(MsgType::RoundComplete)?.payload_as()?;
    info!(
        "client `{}`: round complete, {} active trees",
        s.id,
        model.active_set().len()
    );

    let evaluation = fitted.evaluate(&model)?;
    Ok(ClientOutcome {
        client_id: s.id,
        federated_schema: federated,
        model,
        evaluation,
        n_sites: done.n_sites,
        audit: s.audit,
    })
}
