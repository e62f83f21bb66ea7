//! Contact-graph clustering of JPs.

use std::collections::BTreeSet;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::agents::{JanusParticle, JpId};

use super::trapping::CaptureParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<JpId>,
    pub speed_multiplier: f64,
    pub capsule_capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterChange {
    Formed(Vec<JpId>),
    Dissolved(Vec<JpId>),
}

/// Current clusters plus a JP → cluster index. JP ids index `of_jp`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub clusters: Vec<Cluster>,
    pub of_jp: Vec<usize>,
}

impl ClusterTable {
    pub fn cluster_of(&self, jp: JpId) -> &Cluster {
        &self.clusters[self.of_jp[jp as usize]]
    }
}

pub fn cluster_speed_multiplier(size: usize, params: &CaptureParams) -> f64 {
    let full = params.cluster_full_speed_max as f64;
    if size as f64 <= full {
        1.0
    } else {
        (full / size as f64).powi(2)
    }
}

/// Capsule capacity of a cluster: a lone JP holds up to the per-JP cap,
/// clusters of up to ten JPs hold `cluster_capacity`, and larger clusters lose
/// trapping surface in proportion to their size.
pub fn cluster_capacity(size: usize, params: &CaptureParams) -> u32 {
    match size {
        0 => 0,
        1 => params.per_jp_cap,
        2..=10 => params.cluster_capacity,
        n => ((params.cluster_capacity as usize * 10) / n).max(1) as u32,
    }
}

/// Rebuild clusters as connected components of the contact graph and report
/// multi-JP clusters that appeared or disappeared relative to `previous`.
pub fn update_clusters(
    jps: &[JanusParticle],
    params: &CaptureParams,
    previous: &ClusterTable,
) -> (ClusterTable, Vec<ClusterChange>) {
    let n = jps.len();
    let contact = params.contact_distance_um();
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if jps[i].position_um.distance(jps[j].position_um) <= contact {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<JpId>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    let mut of_jp = vec![0; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        of_jp[i] = root_slot[r];
        groups[root_slot[r]].push(jps[i].id);
    }
    let clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| Cluster {
            speed_multiplier: cluster_speed_multiplier(members.len(), params),
            capsule_capacity: cluster_capacity(members.len(), params),
            members,
        })
        .collect();

    let multi = |t: &[Cluster]| -> BTreeSet<Vec<JpId>> {
        t.iter().filter(|c| c.members.len() > 1).map(|c| c.members.clone()).collect()
    };
    let before = multi(&previous.clusters);
    let after = multi(&clusters);
    let mut changes: Vec<ClusterChange> = before
        .difference(&after)
        .map(|m| ClusterChange::Dissolved(m.clone()))
        .collect();
    changes.extend(after.difference(&before).map(|m| ClusterChange::Formed(m.clone())));
    (ClusterTable { clusters, of_jp }, changes)
}
