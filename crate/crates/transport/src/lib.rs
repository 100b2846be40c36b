//! Networked federation round: a coordinator and K clients exchanging
//! schema and tree documents as length-prefixed JSON envelopes.

pub mod audit;
pub mod client;
pub mod codec;
pub mod coordinator;
pub mod envelope;
pub mod error;
pub mod site;

pub use client::{run_client, ClientConfig, ClientOutcome};
pub use coordinator::{run_coordinator, Coordinator, CoordinatorConfig, RoundLog, SiteLog};
pub use envelope::{Envelope, MsgType, PROTOCOL_VERSION};
pub use error::{Result, TransportError};
pub use site::{federate_in_process, Evaluation, FittedSite, LocalSite, RoundParams};
