//! Control actions and their canonical ordering.

use std::fmt;

use crate::ids::{ClusterId, PairKey, WorkloadId};

/// A control action over the replica placement.
///
/// `Scale` adjusts the replica count of one (cluster, workload) pair in
/// place; `Migrate` moves replicas of a workload between two clusters.
/// The canonical total order (`NoOp < Scale < Migrate`, then lexicographic
/// on the fields) is what every tie-break in the decision layer uses, so
/// selection never depends on candidate enumeration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    NoOp,
    Scale {
        cluster: ClusterId,
        workload: WorkloadId,
        delta: i32,
    },
    Migrate {
        src_cluster: ClusterId,
        dst_cluster: ClusterId,
        workload: WorkloadId,
        count: u32,
    },
}

impl Action {
    pub fn scale(cluster: &str, workload: &str, delta: i32) -> Self {
        Action::Scale {
            cluster: ClusterId::from(cluster),
            workload: WorkloadId::from(workload),
            delta,
        }
    }

    pub fn migrate(src: &str, dst: &str, workload: &str, count: u32) -> Self {
        Action::Migrate {
            src_cluster: ClusterId::from(src),
            dst_cluster: ClusterId::from(dst),
            workload: WorkloadId::from(workload),
            count,
        }
    }

    /// The (cluster, workload) pairs an action touches. A migration touches
    /// both endpoints; two actions conflict iff their touched sets intersect.
    pub fn touched_pairs(&self) -> Vec<PairKey> {
        match self {
            Action::NoOp => Vec::new(),
            Action::Scale {
                cluster, workload, ..
            } => {
                vec![PairKey::new(cluster.clone(), workload.clone())]
            }
            Action::Migrate {
                src_cluster,
                dst_cluster,
                workload,
                ..
            } => vec![
                PairKey::new(src_cluster.clone(), workload.clone()),
                PairKey::new(dst_cluster.clone(), workload.clone()),
            ],
        }
    }

    pub fn conflicts_with(&self, other: &Action) -> bool {
        let mine = self.touched_pairs();
        other.touched_pairs().iter().any(|p| mine.contains(p))
    }

    /// Number of replicas moved across clusters (zero unless `Migrate`).
    pub fn migrated_replicas(&self) -> u32 {
        match self {
            Action::Migrate { count, .. } => *count,
            _ => 0,
        }
    }

    /// Compact stable label used in CSV trace rows.
    pub fn label(&self) -> String {
        match self {
            Action::NoOp => "noop".to_string(),
            Action::Scale { delta, .. } => format!("scale({delta:+})"),
            Action::Migrate {
                src_cluster,
                dst_cluster,
                count,
                ..
            } => {
                format!("migrate({count},{src_cluster}->{dst_cluster})")
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::NoOp => write!(f, "noop"),
            Action::Scale {
                cluster,
                workload,
                delta,
            } => {
                write!(f, "scale {cluster}/{workload} {delta:+}")
            }
            Action::Migrate {
                src_cluster,
                dst_cluster,
                workload,
                count,
            } => {
                write!(
                    f,
                    "migrate {workload} x{count} {src_cluster}->{dst_cluster}"
                )
            }
        }
    }
}
