//! Concrete sample assignments per node.
//!
//! The ledger is the single source of truth for who holds which training
//! samples. Plans are real-valued; [`DatasetLedger::apply_plan`] rounds them
//! and moves randomly chosen indices.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::floor;
use crate::offload::{ClusterFlow, Direction, OffloadPlan};

pub type SampleId = u32;

/// Which node holds a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeId {
    Ground(usize),
    Air(usize),
    Space,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetLedger {
    /// Privacy-sensitive samples of each device. Never moved.
    pub sensitive: Vec<Vec<SampleId>>,
    /// Transferable samples currently on each device.
    pub offloadable: Vec<Vec<SampleId>>,
    pub air: Vec<Vec<SampleId>>,
    pub space: Vec<SampleId>,
    /// Air node serving each device.
    pub cluster_of: Vec<usize>,
}

impl DatasetLedger {
    pub fn new(sensitive: Vec<Vec<SampleId>>, offloadable: Vec<Vec<SampleId>>, cluster_of: Vec<usize>, air_nodes: usize) -> Self {
        Self { sensitive, offloadable, air: alloc::vec![Vec::new(); air_nodes], space: Vec::new(), cluster_of }
    }

    pub fn device_count(&self) -> usize {
        self.sensitive.len()
    }

    pub fn air_count(&self) -> usize {
        self.air.len()
    }

    /// Devices of air node `n`, in index order.
    pub fn cluster_devices(&self, n: usize) -> Vec<usize> {
        (0..self.device_count()).filter(|&k| self.cluster_of[k] == n).collect()
    }

    pub fn ground_len(&self, k: usize) -> usize {
        self.sensitive[k].len() + self.offloadable[k].len()
    }

    pub fn len(&self, node: NodeId) -> usize {
        match node {
            NodeId::Ground(k) => self.ground_len(k),
            NodeId::Air(n) => self.air[n].len(),
            NodeId::Space => self.space.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn total(&self) -> usize {
        (0..self.device_count()).map(|k| self.ground_len(k)).sum::<usize>()
            + self.air.iter().map(Vec::len).sum::<usize>()
            + self.space.len()
    }

    /// All samples currently at `node`.
    pub fn samples(&self, node: NodeId) -> Vec<SampleId> {
        match node {
            NodeId::Ground(k) => self.sensitive[k].iter().chain(&self.offloadable[k]).copied().collect(),
            NodeId::Air(n) => self.air[n].clone(),
            NodeId::Space => self.space.clone(),
        }
    }

    /// Every node with its samples; ground devices first, then air nodes,
    /// then the space layer.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = (0..self.device_count()).map(NodeId::Ground).collect();
        out.extend((0..self.air_count()).map(NodeId::Air));
        out.push(NodeId::Space);
        out
    }

    /// Counts of sensitive samples found anywhere other than their owner.
    pub fn privacy_violations(&self) -> usize {
        let mut owned: Vec<(SampleId, usize)> =
            self.sensitive.iter().enumerate().flat_map(|(k, v)| v.iter().map(move |&i| (i, k))).collect();
        owned.sort_unstable();
        let owner = |id: SampleId| owned.binary_search_by_key(&id, |p| p.0).ok().map(|i| owned[i].1);
        self.offloadable
            .iter()
            .chain(&self.air)
            .chain(core::iter::once(&self.space))
            .map(|v| v.iter().filter(|&&i| owner(i).is_some()).count())
            .sum()
    }

    /// Rounds `plan` to whole samples and moves randomly chosen indices.
    /// Only offloadable samples ever leave a device.
    pub fn apply_plan<R: Rng + ?Sized>(&self, plan: &OffloadPlan, rng: &mut R) -> Result<Self> {
        if plan.clusters.len() != self.air_count() {
            return Err(Error::Dimension { expected: self.air_count(), got: plan.clusters.len() });
        }
        let mut next = self.clone();
        let space_real: Vec<f64> = plan.clusters.iter().map(|c| c.space_transfer).collect();
        match plan.direction {
            Direction::SpaceToAirGround => {
                let counts = round_preserving_sum(&space_real, next.space.len());
                for (n, &c) in counts.iter().enumerate() {
                    let moved = take_random(&mut next.space, c, rng);
                    next.air[n].extend(moved);
                }
            }
            Direction::AirGroundToSpace => {
                for (n, &x) in space_real.iter().enumerate() {
                    let c = round_preserving_sum(&[x], next.air[n].len())[0];
                    let moved = take_random(&mut next.air[n], c, rng);
                    next.space.extend(moved);
                }
            }
        }
        for (n, cp) in plan.clusters.iter().enumerate() {
            let devices = self.cluster_devices(n);
            if devices.len() != cp.device_transfer.len() {
                return Err(Error::Dimension { expected: devices.len(), got: cp.device_transfer.len() });
            }
            match cp.flow {
                ClusterFlow::AirToGround => {
                    let counts = round_preserving_sum(&cp.device_transfer, next.air[n].len());
                    for (&k, &c) in devices.iter().zip(&counts) {
                        let moved = take_random(&mut next.air[n], c, rng);
                        next.offloadable[k].extend(moved);
                    }
                }
                ClusterFlow::GroundToAir => {
                    for (&k, &x) in devices.iter().zip(&cp.device_transfer) {
                        let c = round_preserving_sum(&[x], next.offloadable[k].len())[0];
                        let moved = take_random(&mut next.offloadable[k], c, rng);
                        next.air[n].extend(moved);
                    }
                }
            }
        }
        Ok(next)
    }
}

/// Largest-remainder rounding: floors every entry, then hands the units
/// needed to reach `round(sum)` to the largest fractional parts. The result
/// never exceeds `available` in total.
pub fn round_preserving_sum(values: &[f64], available: usize) -> Vec<usize> {
    let clean: Vec<f64> = values.iter().map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 }).collect();
    let sum: f64 = clean.iter().sum();
    let target = (crate::math::round(sum) as usize).min(available);
    let mut out: Vec<usize> = clean.iter().map(|v| floor(*v) as usize).collect();
    let mut assigned: usize = out.iter().sum();
    while assigned > target {
        let i = (0..out.len()).filter(|&i| out[i] > 0).max_by(|&a, &b| out[a].cmp(&out[b])).unwrap_or(0);
        out[i] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = clean[a] - floor(clean[a]);
        let fb = clean[b] - floor(clean[b]);
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(out.len() * 2) {
        if assigned >= target {
            break;
        }
        out[i] += 1;
        assigned += 1;
    }
    out
}

fn take_random<R: Rng + ?Sized>(pool: &mut Vec<SampleId>, count: usize, rng: &mut R) -> Vec<SampleId> {
    let count = count.min(pool.len());
    if count == 0 {
        return Vec::new();
    }
    // The chosen elements end up at the back of the slice.
    pool.partial_shuffle(rng, count);
    pool.split_off(pool.len() - count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offload::ClusterPlan;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two clusters of two devices; device k owns ids 100k..100k+10, the
    /// first four sensitive.
    fn ledger() -> DatasetLedger {
        let sensitive = (0..4).map(|k| (0..4).map(|i| 100 * k + i).collect()).collect();
        let offloadable = (0..4).map(|k| (4..10).map(|i| 100 * k + i).collect()).collect();
        let mut l = DatasetLedger::new(sensitive, offloadable, vec![0, 0, 1, 1], 2);
        l.air[0] = (1000..1005).collect();
        l.space = (2000..2020).collect();
        l
    }

    fn plan(direction: Direction, clusters: Vec<ClusterPlan>) -> OffloadPlan {
        OffloadPlan { direction, clusters, epsilon1: 1e-3, epsilon2: 1e-3 }
    }

    #[test]
    fn zero_plan_is_identity() {
        let l = ledger();
        let p = plan(Direction::SpaceToAirGround, vec![ClusterPlan::zero(2), ClusterPlan::zero(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(l.apply_plan(&p, &mut rng).unwrap(), l);
    }

    #[test]
    fn full_offload_keeps_sensitive_only() {
        let l = ledger();
        let mut c0 = ClusterPlan::zero(2);
        c0.flow = ClusterFlow::GroundToAir;
        c0.device_transfer[1] = 6.0;
        let p = plan(Direction::AirGroundToSpace, vec![c0, ClusterPlan::zero(2)]);
        let next = l.apply_plan(&p, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(next.ground_len(1), 4);
        assert_eq!(next.sensitive[1], l.sensitive[1]);
        assert_eq!(next.air[0].len(), 11);
        assert_eq!(next.privacy_violations(), 0);
    }

    #[test]
    fn case_one_identities_and_conservation() {
        let l = ledger();
        let c0 = ClusterPlan { space_transfer: 7.4, flow: ClusterFlow::AirToGround, device_transfer: vec![3.0, 2.0] };
        let c1 = ClusterPlan { space_transfer: 2.6, flow: ClusterFlow::GroundToAir, device_transfer: vec![1.0, 0.0] };
        let p = plan(Direction::SpaceToAirGround, vec![c0, c1]);
        let next = l.apply_plan(&p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(next.space.len(), 20 - 10);
        assert_eq!(next.air[0].len(), 5 + 7 - 5);
        assert_eq!(next.air[1].len(), 3 + 1);
        assert_eq!(next.ground_len(0), 13);
        assert_eq!(next.ground_len(1), 12);
        assert_eq!(next.ground_len(2), 9);
        assert_eq!(next.total(), l.total());
        assert_eq!(next.privacy_violations(), 0);
    }

    #[test]
    fn case_two_identities() {
        let l = ledger();
        let c0 = ClusterPlan { space_transfer: 2.0, flow: ClusterFlow::AirToGround, device_transfer: vec![1.0, 1.0] };
        let c1 = ClusterPlan { space_transfer: 0.0, flow: ClusterFlow::GroundToAir, device_transfer: vec![2.0, 3.0] };
        let p = plan(Direction::AirGroundToSpace, vec![c0, c1]);
        let next = l.apply_plan(&p, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(next.space.len(), 22);
        assert_eq!(next.air[0].len(), 1);
        assert_eq!(next.air[1].len(), 5);
        assert_eq!(next.ground_len(2), 8);
        assert_eq!(next.total(), l.total());
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(round_preserving_sum(&[1.4, 1.4, 1.2], 10), vec![2, 1, 1]);
        assert_eq!(round_preserving_sum(&[0.5, 0.5], 10).iter().sum::<usize>(), 1);
        assert_eq!(round_preserving_sum(&[5.0, 5.0], 7).iter().sum::<usize>(), 7);
        assert_eq!(round_preserving_sum(&[f64::NAN, -1.0], 7), vec![0, 0]);
    }

    #[test]
    fn leaked_sensitive_sample_is_counted() {
        let mut l = ledger();
        l.space.push(0);
        assert_eq!(l.privacy_violations(), 1);
    }
}
