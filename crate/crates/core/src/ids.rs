//! String-backed identifiers for clusters and workloads.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(ClusterId);
id_type!(WorkloadId);

/// A (cluster, workload) pair — the unit every per-series map is keyed on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub cluster: ClusterId,
    pub workload: WorkloadId,
}

impl PairKey {
    pub fn new(cluster: ClusterId, workload: WorkloadId) -> Self {
        PairKey { cluster, workload }
    }

    pub fn of(cluster: &str, workload: &str) -> Self {
        PairKey::new(ClusterId::from(cluster), WorkloadId::from(workload))
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cluster, self.workload)
    }
}
