//! Protocol messages and their payload documents.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use fedsurv_core::federation::{Selection, UpdateMethod, UpdateWeighting};
use fedsurv_core::forest::Forest;
use fedsurv_core::tree::SurvivalTree;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec;
use crate::error::{Result, TransportError};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgType {
    Hello,
    SchemaUpload,
    FederatedSchema,
    ModelUpload,
    ModelDownload,
    RoundComplete,
    Error,
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub protocol_version: u32,
    pub msg_type: MsgType,
    pub client_id: String,
    pub payload: Value,
}

impl Envelope {
    pub fn new<T: Serialize>(msg_type: MsgType, client_id: impl Into<String>, payload: &T) -> Result<Self> {
        Ok(Self {
            protocol_version: PROTOCOL_VERSION,
            msg_type,
            client_id: client_id.into(),
            payload: serde_json::to_value(payload).map_err(|e| TransportError::Malformed(e.to_string()))?,
        })
    }

    pub fn error(client_id: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            msg_type: MsgType::Error,
            client_id: client_id.into(),
            payload: serde_json::json!({ "message": message.into() }),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelope serialization is infallible")
    }

    /// Parses a frame body. The version is checked before the message type,
    /// so a newer peer gets a version error rather than a parse error.
    pub fn from_bytes(body: &[u8]) -> Result<Self> {
        let value: Value = serde_json::from_slice(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
        let version = value
            .get("protocol_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| TransportError::Malformed("missing protocol_version".into()))?;
        if version != u64::from(PROTOCOL_VERSION) {
            return Err(TransportError::Version(version));
        }
        serde_json::from_value(value).map_err(|e| TransportError::Malformed(e.to_string()))
    }

    pub fn payload_as<T: DeserializeOwned>(&self) -> Result<T> {
        T::deserialize(&self.payload).map_err(|e| TransportError::Malformed(format!("{} payload: {e}", self.msg_type)))
    }

    pub fn error_message(&self) -> String {
        self.payload
            .get("message")
            .and_then(Value::as_str)
            .unwrap_or("unspecified error")
            .to_string()
    }

    pub fn write_to<W: Write>(&self, w: &mut W, max_frame: usize) -> Result<()> {
        codec::write_frame(w, &self.to_bytes(), max_frame)
    }

    /// `Ok(None)` when the peer closed the stream between messages.
    pub fn read_from<R: Read>(r: &mut R, max_frame: usize) -> Result<Option<Self>> {
        codec::read_frame(r, max_frame)?
            .map(|body| Self::from_bytes(&body))
            .transpose()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUpload {
    pub site_features: BTreeSet<String>,
    pub forest: Forest<f64>,
}

/// A site's share of the round: the remote trees it may use and which of
/// (local ++ received) form its active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDownload {
    pub update_method: UpdateMethod,
    pub update_weighting: UpdateWeighting,
    pub received: Vec<Arc<SurvivalTree<f64>>>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundComplete {
    pub n_sites: usize,
}
