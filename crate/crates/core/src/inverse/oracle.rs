//! Sources of interior D-N maps for congruent copies of the parallelogram.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::lattice::{build_parallelogram, Frame, HexDomain};
use crate::vertex::{dn_map, DNMatrix, DnModel, PotentialMap};

/// Contract: vertex-model D-N map of the `N`-parallelogram placed by `frame`.
///
/// Implementations must be safe for concurrent queries.
pub trait DNOracle: Send + Sync {
    /// Side parameter `N` of every domain this oracle answers for.
    fn n(&self) -> usize;

    fn dn(&self, frame: Frame, lambda: f64) -> Result<DNMatrix>;

    /// Whether arbitrary admissible λ may be queried (as opposed to a fixed list).
    fn is_live(&self) -> bool;

    /// For recorded oracles: the λ values available for `frame`.
    fn recorded_lambdas(&self, _frame: Frame) -> Option<Vec<f64>> {
        None
    }

    /// λ values the producer of the data declared inadmissible.
    fn declared_skips(&self, _frame: Frame) -> Vec<f64> {
        vec![]
    }
}

/// Domains are cheap but not free to build; share them between queries.
#[derive(Debug, Default)]
pub struct DomainCache {
    map: RwLock<HashMap<(usize, Frame), Arc<HexDomain>>>,
}

impl DomainCache {
    pub fn get(&self, n: usize, frame: Frame) -> Arc<HexDomain> {
        if let Some(d) = self.map.read().unwrap().get(&(n, frame)) {
            return d.clone();
        }
        let d = Arc::new(build_parallelogram(n as i64, frame).expect("N is nonnegative"));
        self.map.write().unwrap().entry((n, frame)).or_insert(d).clone()
    }
}

/// Forward solver behind the oracle interface.
#[derive(Debug)]
pub struct LiveOracle {
    n: usize,
    potmap: PotentialMap,
    domains: DomainCache,
}

impl LiveOracle {
    pub fn new(n: usize, potmap: PotentialMap) -> Self {
        LiveOracle {
            n,
            potmap,
            domains: DomainCache::default(),
        }
    }

    pub fn potentials(&self) -> &PotentialMap {
        &self.potmap
    }
}

impl DNOracle for LiveOracle {
    fn n(&self) -> usize {
        self.n
    }

    fn dn(&self, frame: Frame, lambda: f64) -> Result<DNMatrix> {
        let d = self.domains.get(self.n, frame);
        dn_map(&d, &self.potmap, lambda, DnModel::Vertex)
    }

    fn is_live(&self) -> bool {
        true
    }
}

/// Recorded D-N maps, answered only at exact λ matches.
#[derive(Debug, Default)]
pub struct DatasetOracle {
    n: usize,
    records: HashMap<(Frame, u64), DNMatrix>,
    skipped: HashMap<Frame, Vec<f64>>,
}

impl DatasetOracle {
    pub fn new(n: usize) -> Self {
        DatasetOracle {
            n,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, frame: Frame, dn: DNMatrix) -> Result<()> {
        let dn = match dn.model {
            DnModel::Vertex => dn,
            DnModel::Edge => {
                return Err(Error::Validation(
                    "dataset oracle needs vertex-model records".into(),
                ))
            }
        };
        self.records.insert((frame, dn.lambda.to_bits()), dn);
        Ok(())
    }

    pub fn declare_skip(&mut self, frame: Frame, lambda: f64) {
        self.skipped.entry(frame).or_default().push(lambda);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl DNOracle for DatasetOracle {
    fn n(&self) -> usize {
        self.n
    }

    fn dn(&self, frame: Frame, lambda: f64) -> Result<DNMatrix> {
        self.records
            .get(&(frame, lambda.to_bits()))
            .cloned()
            .ok_or(Error::Coverage { missing: vec![lambda] })
    }

    fn is_live(&self) -> bool {
        false
    }

    fn recorded_lambdas(&self, frame: Frame) -> Option<Vec<f64>> {
        let mut v: Vec<f64> = self
            .records
            .keys()
            .filter(|(f, _)| *f == frame)
            .map(|(_, b)| f64::from_bits(*b))
            .collect();
        v.sort_by(f64::total_cmp);
        Some(v)
    }

    fn declared_skips(&self, frame: Frame) -> Vec<f64> {
        self.skipped.get(&frame).cloned().unwrap_or_default()
    }
}
