//! Service topology: containers, pods, nodes, services and their membership.
//!
//! A service is a collection of containers deployed to achieve one function.
//! Deployment structure (pods, nodes) is tracked separately from service
//! membership: a container has exactly one *owner* service used for
//! partition-style accounting (groups, grand totals) and may additionally be
//! a member of further services (e.g. a sidecar that belongs both to its
//! pod's primary service and to an auxiliary mesh service). Composed
//! services are named groupings of services treated as one accounting unit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContainerId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ServiceId(pub String);

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ContainerId {
    fn from(s: &str) -> Self {
        ContainerId(s.to_string())
    }
}

impl From<&str> for ServiceId {
    fn from(s: &str) -> Self {
        ServiceId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceRole {
    Primary,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEntry {
    pub role: ServiceRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerInfo {
    pub node: String,
    pub pod: String,
    /// The service this container is accounted under in partitions.
    pub owner: ServiceId,
    /// Further services the container belongs to (e.g. sidecar memberships).
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub extra_services: BTreeSet<ServiceId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("container {container} references unknown service {service}")]
    UnknownOwner { container: String, service: String },
    #[error("composed service {composed} references unknown service {service}")]
    UnknownComposedMember { composed: String, service: String },
    #[error("unknown service {0}")]
    UnknownService(String),
}

/// Containers, their pod/node assignment, service membership and composed
/// (virtual) services.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceTopology {
    pub services: BTreeMap<ServiceId, ServiceEntry>,
    pub containers: BTreeMap<ContainerId, ContainerInfo>,
    #[serde(default, rename = "composed_services")]
    pub composed: BTreeMap<String, BTreeSet<ServiceId>>,
}

impl ServiceTopology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_service(&mut self, id: impl Into<String>, role: ServiceRole) -> ServiceId {
        let id = ServiceId(id.into());
        self.services.insert(id.clone(), ServiceEntry { role });
        id
    }

    pub fn add_container(
        &mut self,
        id: impl Into<String>,
        node: impl Into<String>,
        pod: impl Into<String>,
        owner: &ServiceId,
    ) -> ContainerId {
        let id = ContainerId(id.into());
        self.containers.insert(
            id.clone(),
            ContainerInfo {
                node: node.into(),
                pod: pod.into(),
                owner: owner.clone(),
                extra_services: BTreeSet::new(),
            },
        );
        id
    }

    pub fn add_membership(&mut self, container: &ContainerId, service: &ServiceId) {
        if let Some(info) = self.containers.get_mut(container) {
            if info.owner != *service {
                info.extra_services.insert(service.clone());
            }
        }
    }

    pub fn compose(&mut self, name: impl Into<String>, members: impl IntoIterator<Item = ServiceId>) {
        self.composed.insert(name.into(), members.into_iter().collect());
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        for (cid, info) in &self.containers {
            for svc in std::iter::once(&info.owner).chain(&info.extra_services) {
                if !self.services.contains_key(svc) {
                    return Err(TopologyError::UnknownOwner {
                        container: cid.0.clone(),
                        service: svc.0.clone(),
                    });
                }
            }
        }
        for (name, members) in &self.composed {
            for svc in members {
                if !self.services.contains_key(svc) {
                    return Err(TopologyError::UnknownComposedMember {
                        composed: name.clone(),
                        service: svc.0.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn role(&self, service: &ServiceId) -> Option<ServiceRole> {
        self.services.get(service).map(|e| e.role)
    }

    pub fn contains_container(&self, id: &ContainerId) -> bool {
        self.containers.contains_key(id)
    }

    /// All services the given container belongs to (owner plus extras).
    pub fn services_of(&self, container: &ContainerId) -> Option<BTreeSet<ServiceId>> {
        self.containers.get(container).map(|info| {
            let mut set = info.extra_services.clone();
            set.insert(info.owner.clone());
            set
        })
    }

    /// Containers that are members of the given service (owner or extra).
    pub fn members_of(&self, service: &ServiceId) -> Vec<ContainerId> {
        self.containers
            .iter()
            .filter(|(_, info)| info.owner == *service || info.extra_services.contains(service))
            .map(|(cid, _)| cid.clone())
            .collect()
    }

    /// Owner-based partition: every container appears under exactly one
    /// service, so partition sums reconcile with container sums.
    pub fn owner_partition(&self) -> BTreeMap<ServiceId, Vec<ContainerId>> {
        let mut out: BTreeMap<ServiceId, Vec<ContainerId>> = BTreeMap::new();
        for sid in self.services.keys() {
            out.entry(sid.clone()).or_default();
        }
        for (cid, info) in &self.containers {
            out.entry(info.owner.clone()).or_default().push(cid.clone());
        }
        out
    }

    pub fn services_with_role(&self, role: ServiceRole) -> Vec<ServiceId> {
        self.services
            .iter()
            .filter(|(_, e)| e.role == role)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn service_count(&self) -> usize {
        self.services.len()
    }

    pub fn container_count(&self) -> usize {
        self.containers.len()
    }
}
