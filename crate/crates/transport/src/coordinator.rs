//! Round coordinator: one thread per client connection, shared round state
//! behind a mutex, and a condition variable as the phase barrier.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, Instant};

use fedsurv_core::federation::{plan_federation, LocalModel, SitePlan};
use fedsurv_core::schema::{merge_schemas, DatasetSchema, FederatedSchema};
use log::{info, warn};
use serde::Serialize;

use crate::audit::{AuditEntry, Direction};
use crate::codec::DEFAULT_MAX_FRAME;
use crate::envelope::{Envelope, ModelDownload, ModelUpload, MsgType, RoundComplete};
use crate::error::{Result, TransportError};
use crate::site::RoundParams;

const COORDINATOR_ID: &str = "coordinator";
const ACCEPT_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone)]
pub struct CoordinatorConfig {
    /// Expected client ids; models are pooled in this order.
    pub roster: Vec<String>,
    pub round: RoundParams,
    pub timeout: Duration,
    pub max_frame: usize,
}

impl CoordinatorConfig {
    pub fn new(roster: Vec<String>, round: RoundParams) -> Self {
        Self {
            roster,
            round,
            timeout: Duration::from_secs(120),
            max_frame: DEFAULT_MAX_FRAME,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(TransportError::Config("empty roster".into()));
        }
        let unique: BTreeSet<&String> = self.roster.iter().collect();
        if unique.len() != self.roster.len() {
            return Err(TransportError::Config("roster lists a client twice".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SiteLog {
    pub n_local_trees: usize,
    pub n_received: usize,
    pub n_active: usize,
}

/// What the coordinator keeps after a round: the merged schema, per-site
/// tree counts and the message audit.
#[derive(Debug, Clone, Serialize)]
pub struct RoundLog {
    pub federated_schema: FederatedSchema,
    pub sites: BTreeMap<String, SiteLog>,
    pub audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitingSchemas,
    AwaitingModels,
    Done,
}

struct RoundState {
    phase: Phase,
    connected: BTreeSet<String>,
    received_schemas: BTreeMap<String, DatasetSchema>,
    received_models: BTreeMap<String, LocalModel<f64>>,
    federated: Option<FederatedSchema>,
    plans: BTreeMap<String, SitePlan<f64>>,
    finished: BTreeSet<String>,
    sites: BTreeMap<String, SiteLog>,
    audit: Vec<AuditEntry>,
    aborted: Option<String>,
}

struct Shared {
    config: CoordinatorConfig,
    state: Mutex<RoundState>,
    barrier: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, RoundState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn abort(&self, reason: String) {
        let mut st = self.lock();
        if st.aborted.is_none() {
            warn!("aborting round: {reason}");
            st.aborted = Some(reason);
        }
        drop(st);
        self.barrier.notify_all();
    }

    /// Blocks until the round leaves `phase`, it is aborted, or the timeout
    /// passes (which aborts it).
    fn wait_past(&self, phase: Phase, what: &str) -> Result<MutexGuard<'_, RoundState>> {
        let deadline = Instant::now() + self.config.timeout;
        let mut st = self.lock();
        loop {
            if let Some(reason) = &st.aborted {
                return Err(TransportError::RoundAborted(reason.clone()));
            }
            if st.phase != phase {
                return Ok(st);
            }
            let now = Instant::now();
            if now >= deadline {
                let missing = self.missing(&st, phase);
                drop(st);
                let reason = format!("timed out waiting for {what} from {missing:?}");
                self.abort(reason.clone());
                return Err(TransportError::RoundAborted(reason));
            }
            st = self
                .barrier
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    fn missing(&self, st: &RoundState, phase: Phase) -> Vec<String> {
        self.config
            .roster
            .iter()
            .filter(|id| match phase {
                Phase::AwaitingSchemas => !st.received_schemas.contains_key(*id),
                _ => !st.received_models.contains_key(*id),
            })
            .cloned()
            .collect()
    }
}

pub struct Coordinator {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Coordinator {
    pub fn bind(addr: impl ToSocketAddrs, config: CoordinatorConfig) -> Result<Self> {
        config.validate()?;
        let listener = TcpListener::bind(addr)?;
        let state = RoundState {
            phase: Phase::AwaitingSchemas,
            connected: BTreeSet::new(),
            received_schemas: BTreeMap::new(),
            received_models: BTreeMap::new(),
            federated: None,
            plans: BTreeMap::new(),
            finished: BTreeSet::new(),
            sites: BTreeMap::new(),
            audit: Vec::new(),
            aborted: None,
        };
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                config,
                state: Mutex::new(state),
                barrier: Condvar::new(),
            }),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves one round to completion or abort.
    pub fn run(self) -> Result<RoundLog> {
        let shared = self.shared;
        let roster_len = shared.config.roster.len();
        self.listener.set_nonblocking(true)?;
        let started = Instant::now();
        let mut handlers = Vec::new();
        loop {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    info!("connection from {peer}");
                    let shared = Arc::clone(&shared);
                    handlers.push(thread::spawn(move || serve(stream, &shared)));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    let st = shared.lock();
                    if st.aborted.is_some() || st.finished.len() == roster_len {
                        break;
                    }
                    let waiting_for_hellos = st.phase == Phase::AwaitingSchemas && st.connected.len() < roster_len;
                    drop(st);
                    if waiting_for_hellos && started.elapsed() >= shared.config.timeout {
                        shared.abort("timed out waiting for clients to connect".into());
                        break;
                    }
                    thread::sleep(ACCEPT_POLL);
                }
                Err(e) => {
                    shared.abort(format!("accept failed: {e}"));
                    break;
                }
            }
        }
        for h in handlers {
            let _ = h.join();
        }
        let mut st = shared.lock();
        if let Some(reason) = st.aborted.take() {
            return Err(TransportError::RoundAborted(reason));
        }
        Ok(RoundLog {
            federated_schema: st.federated.take().expect("finished round has a schema"),
            sites: std::mem::take(&mut st.sites),
            audit: std::mem::take(&mut st.audit),
        })
    }
}

pub fn run_coordinator(addr: impl ToSocketAddrs, config: CoordinatorConfig) -> Result<RoundLog> {
    Coordinator::bind(addr, config)?.run()
}

struct Conn<'a> {
    stream: TcpStream,
    shared: &'a Shared,
    client_id: Option<String>,
}

impl Conn<'_> {
    fn send(&mut self, env: &Envelope) -> Result<()> {
        env.write_to(&mut self.stream, self.shared.config.max_frame)
    }

    fn recv(&mut self, expected: MsgType) -> Result<Envelope> {
        let env = match Envelope::read_from(&mut self.stream, self.shared.config.max_frame) {
            Ok(Some(env)) => env,
            Ok(None) => {
                return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "client closed the connection").into())
            }
            Err(TransportError::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                return Err(TransportError::Timeout(format!("{expected}")))
            }
            Err(e) => return Err(e),
        };
        if env.msg_type != expected {
            return Err(TransportError::OutOfPhase {
                got: env.msg_type,
                expected,
            });
        }
        if let Some(id) = &self.client_id {
            if &env.client_id != id {
                return Err(TransportError::Malformed(format!(
                    "client `{id}` sent a message as `{}`",
                    env.client_id
                )));
            }
        }
        self.shared.lock().audit.push(AuditEntry::of(Direction::Received, &env));
        Ok(env)
    }

    fn reply(&self, msg_type: MsgType, payload: &impl Serialize) -> Result<Envelope> {
        Envelope::new(msg_type, COORDINATOR_ID, payload)
    }
}

fn serve(stream: TcpStream, shared: &Shared) {
    let mut conn = Conn {
        stream,
        shared,
        client_id: None,
    };
    if let Err(e) = conn
        .stream
        .set_nonblocking(false)
        .and_then(|()| conn.stream.set_read_timeout(Some(shared.config.timeout)))
    {
        warn!("socket setup failed: {e}");
        return;
    }
    if let Err(e) = session(&mut conn) {
        let id = conn.client_id.clone().unwrap_or_default();
        warn!("client `{id}`: {e}");
        // a failed roster client stalls the barrier, so the round ends
        if conn.client_id.is_some() {
            shared.abort(format!("client `{id}`: {e}"));
        }
        let _ = conn.send(&Envelope::error(COORDINATOR_ID, e.to_string()));
    }
}

fn session(conn: &mut Conn<'_>) -> Result<()> {
    let shared = conn.shared;
    let cfg = &shared.config;

    let hello = conn.recv(MsgType::Hello)?;
    let id = hello.client_id;
    {
        let mut st = shared.lock();
        if !cfg.roster.contains(&id) {
            return Err(TransportError::UnknownClient(id));
        }
        if !st.connected.insert(id.clone()) {
            return Err(TransportError::DuplicateClient(id));
        }
    }
    conn.client_id = Some(id.clone());
    info!("client `{id}` joined");

    let schema: DatasetSchema = conn.recv(MsgType::SchemaUpload)?.payload_as()?;
    schema.validate()?;
    {
        let mut st = shared.lock();
        st.received_schemas.insert(id.clone(), schema);
        if st.received_schemas.len() == cfg.roster.len() {
            st.federated = Some(merge_schemas(&st.received_schemas, &cfg.round.merge)?);
            st.phase = Phase::AwaitingModels;
            info!("all schemas received; federated schema merged");
            shared.barrier.notify_all();
        }
    }
    let federated = shared
        .wait_past(Phase::AwaitingSchemas, "schemas")?
        .federated
        .clone()
        .expect("schema phase completed");
    let msg = conn.reply(MsgType::FederatedSchema, &federated)?;
    conn.send(&msg)?;

    let upload: ModelUpload = conn.recv(MsgType::ModelUpload)?.payload_as()?;
    let allowed = federated.client_features(&id)?;
    if let Some(f) = upload.site_features.difference(&allowed).next() {
        return Err(TransportError::Malformed(format!("site feature `{f}` is not in the client's schema")));
    }
    let n_local_trees = upload.forest.trees().len();
    let model = LocalModel::new(
        upload.forest,
        id.clone(),
        upload.site_features,
        cfg.round.update_method,
        cfg.round.update_weighting,
    )?;
    {
        let mut st = shared.lock();
        st.received_models.insert(id.clone(), model);
        if st.received_models.len() == cfg.roster.len() {
            let models: Vec<LocalModel<f64>> = cfg.roster.iter().map(|c| st.received_models[c].clone()).collect();
            st.plans = plan_federation(&models, cfg.round.seed)?;
            st.phase = Phase::Done;
            info!("all models received; federation planned");
            shared.barrier.notify_all();
        }
    }
    let plan = shared
        .wait_past(Phase::AwaitingModels, "models")?
        .plans
        .get(&id)
        .cloned()
        .expect("plan exists for every roster client");

    let log = SiteLog {
        n_local_trees,
        n_received: plan.received.len(),
        n_active: plan.selection.local.len() + plan.selection.received.len(),
    };
    let download = ModelDownload {
        update_method: cfg.round.update_method,
        update_weighting: cfg.round.update_weighting,
        received: plan.received,
        selection: plan.selection,
    };
    let msg = conn.reply(MsgType::ModelDownload, &download)?;
    conn.send(&msg)?;
    let msg = conn.reply(
        MsgType::RoundComplete,
        &RoundComplete {
            n_sites: cfg.roster.len(),
        },
    )?;
    conn.send(&msg)?;
    {
        let mut st = shared.lock();
        st.sites.insert(id.clone(), log);
        st.finished.insert(id.clone());
    }
    info!("client `{id}` finished");
    Ok(())
}
