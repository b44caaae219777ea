//! Bearer-token sessions minted after the platform adapter accepts a
//! handle and app password.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use bonsai_core::sourcer::{AdapterError, PlatformAdapter};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    /// Account id used as the owner of feeds created in this session.
    pub did: String,
    pub handle: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum AuthError {
    #[error("invalid handle or app password")]
    Rejected,
    #[error("could not reach the platform to verify credentials: {0}")]
    Unavailable(String),
}

pub struct Sessions {
    adapter: Arc<dyn PlatformAdapter>,
    live: RwLock<HashMap<String, Session>>,
}

impl Sessions {
    pub fn new(adapter: Arc<dyn PlatformAdapter>) -> Self {
        Self { adapter, live: RwLock::new(HashMap::new()) }
    }

    pub async fn login(&self, handle: &str, app_password: &str, now: DateTime<Utc>) -> Result<Session, AuthError> {
        let did = match self.adapter.verify_credentials(handle, app_password).await {
            Ok(did) => did,
            Err(AdapterError::Auth(_)) | Err(AdapterError::NotFound(_)) => return Err(AuthError::Rejected),
            Err(e) => return Err(AuthError::Unavailable(e.to_string())),
        };
        let session = Session {
            token: format!("bsn_{}", uuid::Uuid::new_v4().simple()),
            did,
            handle: handle.to_string(),
            created_at: now,
        };
        self.live.write().expect("session lock").insert(session.token.clone(), session.clone());
        Ok(session)
    }

    pub fn lookup(&self, token: &str) -> Option<Session> {
        self.live.read().expect("session lock").get(token).cloned()
    }

    pub fn logout(&self, token: &str) -> bool {
        self.live.write().expect("session lock").remove(token).is_some()
    }
}
