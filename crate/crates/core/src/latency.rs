//! Completion-time algebra for one round.
//!
//! Sample counts are real-valued here; integer rounding happens only when a
//! plan is applied to the ledger.

use alloc::vec::Vec;

use crate::constellation::SatellitePass;
use crate::error::{Error, Result};
use crate::linkmodel::{delay, PayloadSizes};
use crate::offload::{ClusterFlow, ClusterPlan, Direction, OffloadPlan};

/// `samples` to be processed at `cpu_rate` with `cycles_per_sample`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeLoad {
    pub samples: f64,
    pub cycles_per_sample: f64,
    pub cpu_rate: f64,
}

/// `m |D| / f`.
#[inline]
pub fn compute_time(load: ComputeLoad) -> f64 {
    if load.samples <= 0.0 {
        return 0.0;
    }
    load.cycles_per_sample * load.samples / load.cpu_rate
}

#[inline]
fn cpu(samples: f64, m: f64, f: f64) -> f64 {
    compute_time(ComputeLoad { samples, cycles_per_sample: m, cpu_rate: f })
}

/// What the outgoing satellite ships over the ISL at each handover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum HandoverPayload {
    /// Model plus the whole space-layer dataset.
    #[default]
    Full,
    /// Model plus only the samples not yet processed.
    Remaining,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLayerJob<'a> {
    pub samples: f64,
    pub passes: &'a [SatellitePass],
    pub payload: PayloadSizes,
    pub handover_payload: HandoverPayload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceLatency {
    pub tau: f64,
    /// 1-based index of the pass that finishes the job.
    pub finishing_pass: usize,
    pub processed_per_pass: Vec<f64>,
}

/// Handover delay between consecutive passes.
pub fn handover_delay(payload: &PayloadSizes, samples: f64, isl_rate: f64) -> f64 {
    (payload.model_bits + payload.sample_bits * samples) / isl_rate
}

/// Training latency of the space layer across successive serving satellites.
///
/// Pass `i` finishes the job if its completion time is strictly less than its
/// exit time `T_i`. Otherwise it processes what it can before leaving and the
/// model plus data are handed to pass `i + 1` over the ISL.
pub fn space_layer_latency(job: &SpaceLayerJob<'_>) -> Result<SpaceLatency> {
    let total = job.samples;
    if total <= 0.0 {
        return Ok(SpaceLatency { tau: 0.0, finishing_pass: 1, processed_per_pass: alloc::vec![0.0] });
    }
    let mut processed = Vec::with_capacity(job.passes.len());
    let mut omega = 0.0;
    let mut start = 0.0;
    for (i, pass) in job.passes.iter().enumerate() {
        if i > 0 {
            let prev = &job.passes[i - 1];
            let shipped = match job.handover_payload {
                HandoverPayload::Full => total,
                HandoverPayload::Remaining => total - omega,
            };
            start = prev.time_to_exit + handover_delay(&job.payload, shipped, prev.isl_rate_to_next);
        }
        let remaining = total - omega;
        let tau = start + pass.cycles_per_sample * remaining / pass.cpu_rate;
        if tau < pass.time_to_exit {
            processed.push(remaining);
            return Ok(SpaceLatency { tau, finishing_pass: i + 1, processed_per_pass: processed });
        }
        let service = (pass.time_to_exit - start).max(0.0);
        let done = (pass.cpu_rate / pass.cycles_per_sample * service).min(remaining);
        processed.push(done);
        omega += done;
    }
    Err(Error::SpaceInfeasible { remaining: total - omega })
}

/// Per-device quantities needed by the latency algebra.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    pub samples: f64,
    /// Privacy-sensitive samples that never leave the device.
    pub sensitive: f64,
    pub cycles_per_sample: f64,
    pub cpu_rate: f64,
    /// Uplink to the air node (models and offloaded data).
    pub g2a_rate: f64,
    /// Downlink from the air node.
    pub a2g_rate: f64,
}

impl DeviceProfile {
    pub fn offloadable(&self) -> f64 {
        (self.samples - self.sensitive).max(0.0)
    }

    pub fn local_time(&self) -> f64 {
        cpu(self.samples, self.cycles_per_sample, self.cpu_rate)
    }

    /// Offload amount beyond which transfer delay dominates residual compute.
    pub fn g2a_threshold(&self, sample_bits: f64) -> f64 {
        let mz = self.cycles_per_sample * self.g2a_rate;
        if !mz.is_finite() {
            return self.samples;
        }
        mz * self.samples / (mz + sample_bits * self.cpu_rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AirProfile {
    pub samples: f64,
    pub cycles_per_sample: f64,
    pub cpu_rate: f64,
    /// Uplink to the serving satellite.
    pub a2s_rate: f64,
    /// Downlink from the serving satellite.
    pub s2a_rate: f64,
}

impl AirProfile {
    pub fn local_time(&self) -> f64 {
        cpu(self.samples, self.cycles_per_sample, self.cpu_rate)
    }

    pub fn a2s_threshold(&self, sample_bits: f64, extra: f64) -> f64 {
        let mz = self.cycles_per_sample * self.a2s_rate;
        let cap = if mz.is_finite() {
            mz * (self.samples + extra) / (mz + sample_bits * self.cpu_rate)
        } else {
            self.samples
        };
        cap.min(self.samples)
    }
}

/// One air node and its non-overlapping set of ground devices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterState {
    pub air: AirProfile,
    pub devices: Vec<DeviceProfile>,
}

/// Everything the latency model and the optimizer need for one round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundState {
    pub space_samples: f64,
    pub passes: Vec<SatellitePass>,
    pub payload: PayloadSizes,
    #[cfg_attr(feature = "serde", serde(default))]
    pub handover_payload: HandoverPayload,
    pub clusters: Vec<ClusterState>,
}

impl RoundState {
    pub fn device_count(&self) -> usize {
        self.clusters.iter().map(|c| c.devices.len()).sum()
    }

    pub fn total_samples(&self) -> f64 {
        self.space_samples
            + self
                .clusters
                .iter()
                .map(|c| c.air.samples + c.devices.iter().map(|d| d.samples).sum::<f64>())
                .sum::<f64>()
    }

    /// Space-layer completion time; infinite when the passes cannot finish.
    pub fn space_delay(&self, samples: f64) -> (f64, usize) {
        let job = SpaceLayerJob {
            samples,
            passes: &self.passes,
            payload: self.payload,
            handover_payload: self.handover_payload,
        };
        match space_layer_latency(&job) {
            Ok(s) => (s.tau, s.finishing_pass),
            Err(_) => (f64::INFINITY, self.passes.len().max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundLatency {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_inf"))]
    pub tau_space: f64,
    /// Per air node: time until its own model and all cluster models are in.
    pub tau_air: Vec<f64>,
    /// Per air node: model upload to the satellite.
    pub a2s_upload: Vec<f64>,
    /// Per device (cluster order): local completion time.
    pub tau_ground: Vec<f64>,
    /// Per device (cluster order): model upload to the air node.
    pub g2a_upload: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_inf"))]
    pub tau_total: f64,
    pub finishing_pass_index: usize,
}

impl RoundLatency {
    /// `max_n (tau_air[n] + a2s_upload[n])`.
    pub fn air_side(&self) -> f64 {
        self.tau_air.iter().zip(&self.a2s_upload).map(|(a, u)| a + u).fold(0.0, f64::max)
    }

    /// Largest model-upload delay over all links.
    pub fn max_comm_delay(&self) -> f64 {
        self.a2s_upload.iter().chain(&self.g2a_upload).copied().fold(0.0, f64::max)
    }
}

/// `max(tau_A_local, max_k (tau_G_k + tau_G2A_k))` with the original datasets.
pub fn air_cluster_completion_no_offload(cluster: &ClusterState, payload: &PayloadSizes) -> f64 {
    cluster
        .devices
        .iter()
        .map(|d| d.local_time() + delay(payload.model_bits, d.g2a_rate))
        .fold(cluster.air.local_time(), f64::max)
}

pub fn round_latency_no_offload(state: &RoundState) -> RoundLatency {
    let (tau_space, finishing) = state.space_delay(state.space_samples);
    let mut out = RoundLatency {
        tau_space,
        tau_air: Vec::with_capacity(state.clusters.len()),
        a2s_upload: Vec::with_capacity(state.clusters.len()),
        tau_ground: Vec::with_capacity(state.device_count()),
        g2a_upload: Vec::with_capacity(state.device_count()),
        tau_total: 0.0,
        finishing_pass_index: finishing,
    };
    for c in &state.clusters {
        out.tau_air.push(air_cluster_completion_no_offload(c, &state.payload));
        out.a2s_upload.push(delay(state.payload.model_bits, c.air.a2s_rate));
        for d in &c.devices {
            out.tau_ground.push(d.local_time());
            out.g2a_upload.push(delay(state.payload.model_bits, d.g2a_rate));
        }
    }
    out.tau_total = tau_space.max(out.air_side());
    out
}

/// Air-node compute time when it receives `s2a` samples from the satellite
/// and forwards `a2g_total` to its devices.
pub fn case1_air_local_delay(air: &AirProfile, s2a: f64, a2g_total: f64, sample_bits: f64) -> f64 {
    let (m, f) = (air.cycles_per_sample, air.cpu_rate);
    if s2a - a2g_total <= 0.0 {
        cpu(air.samples + s2a - a2g_total, m, f)
    } else {
        cpu(air.samples, m, f).max(delay(sample_bits * s2a, air.s2a_rate)) + cpu(s2a - a2g_total, m, f)
    }
}

/// Ground compute time when the device receives `a2g` samples relayed after
/// the satellite downlink (which took `s2a_delay`).
pub fn case1_ground_delay(device: &DeviceProfile, a2g: f64, s2a_delay: f64, sample_bits: f64) -> f64 {
    let (m, f) = (device.cycles_per_sample, device.cpu_rate);
    let own = device.local_time();
    if a2g <= 0.0 {
        return own;
    }
    own.max(s2a_delay + delay(sample_bits * a2g, device.a2g_rate)) + cpu(a2g, m, f)
}

/// Case I with the air node collecting `g2a[k]` from its devices while also
/// receiving `s2a` from the satellite.
pub fn case1_air_collect_delay(air: &AirProfile, s2a: f64, g2a: &[f64], devices: &[DeviceProfile], sample_bits: f64) -> f64 {
    let (m, f) = (air.cycles_per_sample, air.cpu_rate);
    let total: f64 = g2a.iter().sum();
    let arrivals = g2a
        .iter()
        .zip(devices)
        .map(|(x, d)| delay(sample_bits * x, d.g2a_rate))
        .fold(delay(sample_bits * s2a, air.s2a_rate), f64::max);
    cpu(air.samples, m, f).max(arrivals) + cpu(s2a + total, m, f)
}

/// Air-node readiness in Case II: it has shipped `a2s` to the satellite and
/// collected `g2a[k]` from each device.
pub fn case2_air_local_delay(air: &AirProfile, a2s: f64, g2a: &[f64], devices: &[DeviceProfile], sample_bits: f64) -> f64 {
    let (m, f) = (air.cycles_per_sample, air.cpu_rate);
    let total: f64 = g2a.iter().sum();
    let upload = delay(sample_bits * a2s, air.a2s_rate);
    if total - a2s <= 0.0 {
        cpu(air.samples - a2s + total, m, f).max(upload)
    } else {
        let arrivals = g2a
            .iter()
            .zip(devices)
            .map(|(x, d)| delay(sample_bits * x, d.g2a_rate))
            .fold(0.0, f64::max);
        (cpu(air.samples, m, f).max(arrivals) + cpu(total - a2s, m, f)).max(upload)
    }
}

/// Ground readiness when it offloads `g2a` samples to its air node.
pub fn case2_ground_delay(device: &DeviceProfile, g2a: f64, sample_bits: f64) -> f64 {
    let (m, f) = (device.cycles_per_sample, device.cpu_rate);
    cpu(device.samples - g2a, m, f).max(delay(sample_bits * g2a, device.g2a_rate))
}

/// Case II with the air node pushing `a2g[k]` to its devices while also
/// shipping `a2s` to the satellite.
pub fn case2_air_push_delay(air: &AirProfile, a2s: f64, a2g_total: f64, sample_bits: f64) -> f64 {
    cpu(air.samples - a2s - a2g_total, air.cycles_per_sample, air.cpu_rate)
        .max(delay(sample_bits * a2s, air.a2s_rate))
}

/// Ground compute time when the device receives `a2g` samples straight from
/// the air node's own dataset.
pub fn case2_ground_receive_delay(device: &DeviceProfile, a2g: f64, sample_bits: f64) -> f64 {
    case1_ground_delay(device, a2g, 0.0, sample_bits)
}

/// Local completion times inside one cluster under a plan:
/// `(air_local, per-device ground times)`.
pub fn cluster_local_delays(
    cluster: &ClusterState,
    direction: Direction,
    plan: &ClusterPlan,
    sample_bits: f64,
) -> (f64, Vec<f64>) {
    let air = &cluster.air;
    let devs = &cluster.devices;
    let x = &plan.device_transfer;
    let total: f64 = x.iter().sum();
    let s = plan.space_transfer;
    match (direction, plan.flow) {
        (Direction::SpaceToAirGround, ClusterFlow::AirToGround) => {
            let s2a_delay = delay(sample_bits * s, air.s2a_rate);
            let ground = devs.iter().zip(x).map(|(d, &a)| case1_ground_delay(d, a, s2a_delay, sample_bits)).collect();
            (case1_air_local_delay(air, s, total, sample_bits), ground)
        }
        (Direction::SpaceToAirGround, ClusterFlow::GroundToAir) => {
            let ground = devs.iter().zip(x).map(|(d, &g)| case2_ground_delay(d, g, sample_bits)).collect();
            (case1_air_collect_delay(air, s, x, devs, sample_bits), ground)
        }
        (Direction::AirGroundToSpace, ClusterFlow::GroundToAir) => {
            let ground = devs.iter().zip(x).map(|(d, &g)| case2_ground_delay(d, g, sample_bits)).collect();
            (case2_air_local_delay(air, s, x, devs, sample_bits), ground)
        }
        (Direction::AirGroundToSpace, ClusterFlow::AirToGround) => {
            let ground = devs.iter().zip(x).map(|(d, &a)| case2_ground_receive_delay(d, a, sample_bits)).collect();
            (case2_air_push_delay(air, s, total, sample_bits), ground)
        }
    }
}

/// `max(air_local, max_k (ground_k + tau_G2A_k))` for one cluster.
pub fn cluster_completion(cluster: &ClusterState, direction: Direction, plan: &ClusterPlan, payload: &PayloadSizes) -> f64 {
    let (air, ground) = cluster_local_delays(cluster, direction, plan, payload.sample_bits);
    ground
        .iter()
        .zip(&cluster.devices)
        .map(|(g, d)| g + delay(payload.model_bits, d.g2a_rate))
        .fold(air, f64::max)
}

/// Space-layer sample count after the plan moves data.
pub fn planned_space_samples(state: &RoundState, plan: &OffloadPlan) -> f64 {
    let moved = plan.space_total();
    match plan.direction {
        Direction::SpaceToAirGround => (state.space_samples - moved).max(0.0),
        Direction::AirGroundToSpace => state.space_samples + moved,
    }
}

/// Round latency once `plan` has been applied. A zero plan reproduces
/// [`round_latency_no_offload`] exactly.
pub fn round_latency_with_plan(state: &RoundState, plan: &OffloadPlan) -> RoundLatency {
    let (tau_space, finishing) = state.space_delay(planned_space_samples(state, plan));
    let mut out = RoundLatency {
        tau_space,
        tau_air: Vec::with_capacity(state.clusters.len()),
        a2s_upload: Vec::with_capacity(state.clusters.len()),
        tau_ground: Vec::with_capacity(state.device_count()),
        g2a_upload: Vec::with_capacity(state.device_count()),
        tau_total: 0.0,
        finishing_pass_index: finishing,
    };
    let q = state.payload.model_bits;
    for (c, cp) in state.clusters.iter().zip(&plan.clusters) {
        let (air, ground) = cluster_local_delays(c, plan.direction, cp, state.payload.sample_bits);
        let mut done = air;
        for (g, d) in ground.iter().zip(&c.devices) {
            let up = delay(q, d.g2a_rate);
            done = done.max(g + up);
            out.tau_ground.push(*g);
            out.g2a_upload.push(up);
        }
        out.tau_air.push(done);
        out.a2s_upload.push(delay(q, c.air.a2s_rate));
    }
    out.tau_total = tau_space.max(out.air_side());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    const Q: PayloadSizes = PayloadSizes { model_bits: 1e6, sample_bits: 6.4e3 };

    fn pass(t: f64, f: f64) -> SatellitePass {
        SatellitePass {
            satellite_id: 0,
            t_enter: 0.0,
            t_exit: t,
            time_to_exit: t,
            cpu_rate: f,
            cycles_per_sample: 3e9,
            isl_rate_to_next: 3.125e6,
        }
    }

    fn job(samples: f64, passes: &[SatellitePass]) -> SpaceLayerJob<'_> {
        SpaceLayerJob { samples, passes, payload: Q, handover_payload: HandoverPayload::Full }
    }

    fn device(samples: f64, f: f64) -> DeviceProfile {
        DeviceProfile { samples, sensitive: 0.0, cycles_per_sample: 3e9, cpu_rate: f, g2a_rate: 1e5, a2g_rate: 1e5 }
    }

    fn air(samples: f64) -> AirProfile {
        AirProfile { samples, cycles_per_sample: 3e9, cpu_rate: 1e9, a2s_rate: 1e6, s2a_rate: 1e6 }
    }

    #[test]
    fn compute_time_examples() {
        let load = |samples, f| ComputeLoad { samples, cycles_per_sample: 3e9, cpu_rate: f };
        assert_eq!(compute_time(load(0.0, 1e8)), 0.0);
        assert_relative_eq!(compute_time(load(1200.0, 1e8)), 36_000.0, max_relative = 1e-15);
        assert_relative_eq!(compute_time(load(1200.0, 1e9)), 3_600.0, max_relative = 1e-15);
    }

    #[test]
    fn empty_space_job() {
        let out = space_layer_latency(&job(0.0, &[])).unwrap();
        assert_eq!((out.tau, out.finishing_pass), (0.0, 1));
    }

    #[test]
    fn single_infinite_pass() {
        let p = [pass(f64::INFINITY, 2e9)];
        let out = space_layer_latency(&job(1000.0, &p)).unwrap();
        assert_relative_eq!(out.tau, 1500.0, max_relative = 1e-15);
        assert_eq!(out.finishing_pass, 1);
    }

    #[test]
    fn three_pass_expansion() {
        let (t1, t2) = (300.0, 700.0);
        let (f1, f2, f3) = (1e9, 2e9, 5e9);
        let m = 3e9;
        let d = 1000.0;
        let p = [pass(t1, f1), pass(t2, f2), pass(f64::INFINITY, f3)];
        let hand = (Q.model_bits + Q.sample_bits * d) / 3.125e6;
        assert_relative_eq!(hand, 2.368, max_relative = 1e-12);
        let tau3 = t2 + hand + m * (d - f1 / m * t1 - f2 / m * (t2 - t1 - hand)) / f3;
        let out = space_layer_latency(&job(d, &p)).unwrap();
        assert_eq!(out.finishing_pass, 3);
        assert_relative_eq!(out.tau, tau3, max_relative = 1e-12);
        assert_relative_eq!(out.processed_per_pass[0], f1 / m * t1, max_relative = 1e-12);
        assert_relative_eq!(out.processed_per_pass[1], f2 / m * (t2 - t1 - hand), max_relative = 1e-12);
        assert_relative_eq!(out.processed_per_pass.iter().sum::<f64>(), d, max_relative = 1e-12);
    }

    #[test]
    fn exhausted_passes_report_remaining() {
        let p = [pass(30.0, 1e9)];
        match space_layer_latency(&job(100.0, &p)) {
            Err(Error::SpaceInfeasible { remaining }) => assert_relative_eq!(remaining, 90.0, max_relative = 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn handover_longer_than_service_processes_nothing() {
        // The second pass leaves before the handover completes.
        let p = [pass(30.0, 1e9), pass(30.3, 1e9), pass(f64::INFINITY, 1e9)];
        let out = space_layer_latency(&job(100.0, &p)).unwrap();
        assert_eq!(out.processed_per_pass[1], 0.0);
        assert_eq!(out.finishing_pass, 3);
    }

    #[test]
    fn remaining_payload_ships_less() {
        let p = [pass(300.0, 1e9), pass(f64::INFINITY, 1e9)];
        let mut j = job(1000.0, &p);
        let full = space_layer_latency(&j).unwrap().tau;
        j.handover_payload = HandoverPayload::Remaining;
        let rem = space_layer_latency(&j).unwrap().tau;
        assert_relative_eq!(full - rem, Q.sample_bits * 100.0 / 3.125e6, max_relative = 1e-9);
    }

    #[test]
    fn air_cluster_without_offload() {
        let mut c = ClusterState { air: air(0.0), devices: vec![device(10.0, 1e8)] };
        let up = Q.model_bits / 1e5;
        assert_relative_eq!(air_cluster_completion_no_offload(&c, &Q), 300.0 + up);
        c.air.samples = 1000.0;
        assert_relative_eq!(air_cluster_completion_no_offload(&c, &Q), 3000.0);
    }

    #[test]
    fn all_empty_round_is_instant() {
        let state = RoundState {
            space_samples: 0.0,
            passes: vec![],
            payload: PayloadSizes { model_bits: 0.0, sample_bits: 1.0 },
            handover_payload: HandoverPayload::Full,
            clusters: vec![ClusterState { air: air(0.0), devices: vec![device(0.0, 1e8)] }],
        };
        assert_eq!(round_latency_no_offload(&state).tau_total, 0.0);
    }

    #[test]
    fn case1_air_branches() {
        let a = air(100.0);
        assert_relative_eq!(case1_air_local_delay(&a, 0.0, 0.0, 1e3), 300.0);
        // Boundary s2a = sum(a2g) with compute dominating: both branches agree.
        let lhs = case1_air_local_delay(&a, 50.0, 50.0, 1e3);
        let rhs = 300.0f64.max(1e3 * 50.0 / 1e6) + 0.0;
        assert_relative_eq!(lhs, rhs);
        assert_relative_eq!(case1_air_local_delay(&a, 60.0, 10.0, 1e3), 300.0 + 150.0);
    }

    #[test]
    fn case1_ground_branches() {
        let d = device(10.0, 1e8);
        assert_relative_eq!(case1_ground_delay(&d, 0.0, 50.0, 1e3), 300.0);
        // Compute with own data dominates the arrival.
        assert_relative_eq!(case1_ground_delay(&d, 5.0, 1.0, 1e3), 300.0 + 150.0);
        // Arrival dominates.
        assert_relative_eq!(case1_ground_delay(&d, 5.0, 400.0, 1e3), 400.0 + 0.05 + 150.0);
    }

    #[test]
    fn case2_air_branches() {
        let a = air(10.0);
        assert_relative_eq!(case2_air_local_delay(&a, 0.0, &[0.0], &[device(1.0, 1e8)], 1e3), 30.0);
        let mut slow = air(10.0);
        slow.a2s_rate = 10.0;
        assert_relative_eq!(case2_air_local_delay(&slow, 10.0, &[0.0], &[device(1.0, 1e8)], 1e3), 1000.0);
    }

    #[test]
    fn case2_ground_minimum_at_threshold() {
        let d = device(100.0, 1e8);
        let q = 1e3;
        let star = d.g2a_threshold(q);
        let at = case2_ground_delay(&d, star, q);
        let n = 100_000;
        let grid_min = (0..=n).map(|i| case2_ground_delay(&d, 100.0 * i as f64 / n as f64, q)).fold(f64::INFINITY, f64::min);
        assert!(at <= grid_min + 1e-9);
        assert_eq!(case2_ground_delay(&d, 0.0, q), 3000.0);
        assert_relative_eq!(case2_ground_delay(&d, 100.0, q), 1.0);
    }

    #[test]
    fn zero_plan_matches_no_offload_in_every_case() {
        let c = ClusterState { air: air(40.0), devices: vec![device(10.0, 1e8), device(30.0, 2e8)] };
        let state = RoundState {
            space_samples: 500.0,
            passes: vec![pass(200.0, 3e9), pass(f64::INFINITY, 1e9)],
            payload: Q,
            handover_payload: HandoverPayload::Full,
            clusters: vec![c.clone(), c],
        };
        let base = round_latency_no_offload(&state);
        for direction in [Direction::SpaceToAirGround, Direction::AirGroundToSpace] {
            for flow in [ClusterFlow::AirToGround, ClusterFlow::GroundToAir] {
                let mut plan = OffloadPlan::zero(&state, direction);
                plan.clusters.iter_mut().for_each(|c| c.flow = flow);
                assert_eq!(round_latency_with_plan(&state, &plan), base);
            }
        }
    }
}
