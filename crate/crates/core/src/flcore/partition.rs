use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::ledger::{DatasetLedger, SampleId};
use crate::math::round;
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PartitionMode {
    #[default]
    Iid,
    ShardNonIid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    pub shard_count: usize,
    pub shards_per_device: usize,
    /// Fraction of each device's samples that may be offloaded.
    pub alpha: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { mode: PartitionMode::Iid, shard_count: 200, shards_per_device: 4, alpha: 0.5 }
    }
}

/// Splits the training set over the devices and marks a random `alpha`
/// fraction of each device's samples as offloadable.
pub fn partition(labels: &[u8], cluster_of: Vec<usize>, air_nodes: usize, spec: &PartitionSpec, seed: u64) -> Result<DatasetLedger> {
    let devices = cluster_of.len();
    if devices == 0 {
        return Err(Error::Config("at least one device is required"));
    }
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::Config("alpha must lie in [0, 1]"));
    }
    if cluster_of.iter().any(|&n| n >= air_nodes) {
        return Err(Error::Config("device assigned to a missing air node"));
    }
    let mut rng = stream(seed, purpose::PARTITION, 0, 0);
    let n = labels.len();
    let per_device: Vec<Vec<SampleId>> = match spec.mode {
        PartitionMode::Iid => {
            let mut ids: Vec<SampleId> = (0..n as SampleId).collect();
            ids.shuffle(&mut rng);
            let size = n / devices;
            (0..devices).map(|k| ids[k * size..(k + 1) * size].to_vec()).collect()
        }
        PartitionMode::ShardNonIid => {
            if spec.shards_per_device == 0 || spec.shard_count != devices * spec.shards_per_device {
                return Err(Error::Config("shard count must equal devices times shards per device"));
            }
            let mut ids: Vec<SampleId> = (0..n as SampleId).collect();
            ids.sort_by_key(|&i| (labels[i as usize], i));
            let size = n / spec.shard_count;
            let mut shards: Vec<usize> = (0..spec.shard_count).collect();
            shards.shuffle(&mut rng);
            shards
                .chunks(spec.shards_per_device)
                .map(|own| own.iter().flat_map(|&s| ids[s * size..(s + 1) * size].iter().copied()).collect())
                .collect()
        }
    };
    let mut sensitive = Vec::with_capacity(devices);
    let mut offloadable = Vec::with_capacity(devices);
    for mut ids in per_device {
        ids.shuffle(&mut rng);
        let movable = round(spec.alpha * ids.len() as f64) as usize;
        let keep = ids.split_off(movable);
        offloadable.push(ids);
        sensitive.push(keep);
    }
    Ok(DatasetLedger::new(sensitive, offloadable, cluster_of, air_nodes))
}

/// Number of distinct labels among `ids`.
pub fn distinct_labels(ids: &[SampleId], labels: &[u8]) -> usize {
    let mut seen = [false; 256];
    ids.iter().for_each(|&i| seen[labels[i as usize] as usize] = true);
    seen.iter().filter(|s| **s).count()
}
