use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use ivise_core::operator_api::EdgeStatus;
use ivise_core::protocol::{sender_id_for, Message, ProtocolError};
use ivise_core::query::{CameraInfo, CameraRegistry};
use ivise_core::CameraId;

/// Outbound channel from the fog to one connected edge.
pub trait EdgeLink: Send + Sync {
    fn send(&self, message: &Message) -> Result<(), ProtocolError>;
}

struct EdgeEntry {
    info: CameraInfo,
    link: Option<(u64, Arc<dyn EdgeLink>)>,
    /// False once heartbeats stop arriving, even if the socket is still open.
    fresh: bool,
    last_heartbeat_ms: Option<u64>,
    messages: u64,
    bytes: u64,
}

/// Registered cameras and the live state of their edges.
pub(crate) struct EdgeTable {
    entries: BTreeMap<CameraId, EdgeEntry>,
    by_sender: HashMap<u64, CameraId>,
    next_connection: u64,
}

impl EdgeTable {
    /// Fails with the two camera ids when their sender ids collide.
    pub fn new(registry: &CameraRegistry) -> Result<Self, (CameraId, CameraId)> {
        let mut by_sender: HashMap<u64, CameraId> = HashMap::new();
        let mut entries = BTreeMap::new();
        for (camera, info) in registry.iter() {
            if let Some(prev) = by_sender.insert(sender_id_for(camera), camera.clone()) {
                return Err((prev, camera.clone()));
            }
            entries.insert(
                camera.clone(),
                EdgeEntry { info: info.clone(), link: None, fresh: false, last_heartbeat_ms: None, messages: 0, bytes: 0 },
            );
        }
        Ok(Self { entries, by_sender, next_connection: 1 })
    }

    pub fn camera_for(&self, sender_id: u64) -> Option<&CameraId> {
        self.by_sender.get(&sender_id)
    }

    pub fn count_message(&mut self, camera: &CameraId, bytes: usize) {
        if let Some(e) = self.entries.get_mut(camera) {
            e.messages += 1;
            e.bytes += bytes as u64;
        }
    }

    pub fn heartbeat(&mut self, camera: &CameraId, now_ms: u64) {
        if let Some(e) = self.entries.get_mut(camera) {
            e.last_heartbeat_ms = Some(now_ms);
            e.fresh = true;
        }
    }

    pub fn attach(&mut self, camera: &CameraId, link: Arc<dyn EdgeLink>, now_ms: u64) -> Option<u64> {
        let e = self.entries.get_mut(camera)?;
        let id = self.next_connection;
        self.next_connection += 1;
        e.link = Some((id, link));
        e.fresh = true;
        e.last_heartbeat_ms.get_or_insert(now_ms);
        Some(id)
    }

    /// Drops the link only if it is still connection `connection`.
    pub fn detach(&mut self, camera: &CameraId, connection: u64) {
        if let Some(e) = self.entries.get_mut(camera) {
            if e.link.as_ref().is_some_and(|(id, _)| *id == connection) {
                e.link = None;
                e.fresh = false;
            }
        }
    }

    /// Marks edges whose last heartbeat is older than `limit_ms` as disconnected.
    pub fn expire(&mut self, now_ms: u64, limit_ms: u64) -> Vec<CameraId> {
        let mut stale = Vec::new();
        for (camera, e) in &mut self.entries {
            if e.fresh && e.last_heartbeat_ms.is_some_and(|t| now_ms.saturating_sub(t) > limit_ms) {
                e.fresh = false;
                stale.push(camera.clone());
            }
        }
        stale
    }

    fn connected(e: &EdgeEntry) -> bool {
        e.link.is_some() && e.fresh
    }

    /// Links of connected edges accepted by `filter`.
    pub fn links(&self, filter: impl Fn(&CameraId) -> bool) -> Vec<(CameraId, Arc<dyn EdgeLink>)> {
        self.entries
            .iter()
            .filter(|(c, e)| Self::connected(e) && filter(c))
            .filter_map(|(c, e)| e.link.as_ref().map(|(_, l)| (c.clone(), Arc::clone(l))))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn connected_count(&self) -> usize {
        self.entries.values().filter(|e| Self::connected(e)).count()
    }

    pub fn statuses(&self) -> Vec<EdgeStatus> {
        self.entries
            .iter()
            .map(|(c, e)| EdgeStatus {
                camera_id: c.clone(),
                address: e.info.address.clone(),
                latitude: e.info.latitude,
                longitude: e.info.longitude,
                connected: Self::connected(e),
                last_heartbeat_ms: e.last_heartbeat_ms,
                messages_received: e.messages,
                bytes_received: e.bytes,
            })
            .collect()
    }
}
