//! Per-scheme planning for one round.

use rand::seq::SliceRandom;
use rand::Rng;
use sagin_core::ledger::{round_preserving_sum, DatasetLedger, SampleId};
use sagin_core::latency::{case2_ground_delay, round_latency_with_plan, RoundLatency, RoundState};
use sagin_core::math::bisection_budget;
use sagin_core::offload::{
    balance_air_ground, classify_direction, optimize_round, ClusterFlow, ClusterPlan, Direction, OffloadPlan, Tolerances,
};

use crate::config::Scheme;

/// What a scheme decides to move this round.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Plan(OffloadPlan),
    /// Per cluster and device: samples sent to the space layer through the
    /// air node, which only relays them.
    Relay(Vec<Vec<f64>>),
}

impl Action {
    pub fn direction_label(&self) -> &'static str {
        match self {
            Action::Plan(p) => p.direction.label(),
            Action::Relay(_) => "ground-relay-space",
        }
    }

    /// `(samples moved across the space link, samples moved across G2A/A2G)`.
    pub fn moved(&self) -> (f64, f64) {
        match self {
            Action::Plan(p) => (p.space_total(), p.device_total()),
            Action::Relay(x) => {
                let s: f64 = x.iter().flatten().sum();
                (s, s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planned {
    pub action: Action,
    pub latency: RoundLatency,
    /// The space layer could not finish before a coverage gap, so its data
    /// was sent down to the air nodes instead.
    pub evacuated: bool,
    /// Every bisection loop stayed within its iteration budget. Always true
    /// for schemes that do not call the optimizer.
    pub within_budget: bool,
}

/// Scheme memory across rounds.
#[derive(Debug, Clone, Default)]
pub struct Planner {
    pub scheme: Scheme,
    static_used: bool,
}

impl Planner {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, static_used: false }
    }

    pub fn plan(&mut self, state: &RoundState, tol: Tolerances, space_cpu_hz: f64) -> Planned {
        let mut within_budget = true;
        let mut solve = |state: &RoundState| {
            let out = optimize_round(state, tol);
            within_budget = out.trace.within_budget();
            out.plan
        };
        let action = match self.scheme {
            Scheme::Proposed => Action::Plan(solve(state)),
            Scheme::NoOffload => Action::Plan(zero_plan(state, tol)),
            Scheme::Static => {
                if self.static_used {
                    Action::Plan(zero_plan(state, tol))
                } else {
                    self.static_used = true;
                    Action::Plan(solve(state))
                }
            }
            Scheme::AirOnly => Action::Plan(air_only(state, tol)),
            Scheme::SpaceOnly => Action::Relay(space_only(state, tol)),
            Scheme::Proportional => Action::Plan(proportional(state, tol, space_cpu_hz)),
        };
        let latency = action_latency(state, &action);
        if latency.tau_space.is_finite() {
            return Planned { action, latency, evacuated: false, within_budget };
        }
        let plan = evacuate(state, tol);
        let latency = round_latency_with_plan(state, &plan);
        Planned { action: Action::Plan(plan), latency, evacuated: true, within_budget }
    }
}

pub fn zero_plan(state: &RoundState, tol: Tolerances) -> OffloadPlan {
    let mut p = OffloadPlan::zero(state, classify_direction(state));
    p.epsilon1 = tol.epsilon1;
    p.epsilon2 = tol.epsilon2;
    p
}

pub fn action_latency(state: &RoundState, action: &Action) -> RoundLatency {
    match action {
        Action::Plan(p) => round_latency_with_plan(state, p),
        Action::Relay(x) => relay_latency(state, x),
    }
}

/// Everything on the space layer goes to the air nodes, split evenly.
fn evacuate(state: &RoundState, tol: Tolerances) -> OffloadPlan {
    let n = state.clusters.len() as f64;
    let clusters = state
        .clusters
        .iter()
        .map(|c| ClusterPlan { space_transfer: state.space_samples / n, ..ClusterPlan::zero(c.devices.len()) })
        .collect();
    OffloadPlan { direction: Direction::SpaceToAirGround, clusters, epsilon1: tol.epsilon1, epsilon2: tol.epsilon2 }
}

/// Cluster balancing with the space layer left out.
fn air_only(state: &RoundState, tol: Tolerances) -> OffloadPlan {
    let clusters = state
        .clusters
        .iter()
        .map(|c| balance_air_ground(c, Direction::AirGroundToSpace, 0.0, &state.payload, tol).0)
        .collect();
    OffloadPlan { direction: Direction::AirGroundToSpace, clusters, epsilon1: tol.epsilon1, epsilon2: tol.epsilon2 }
}

/// Moves data towards holdings proportional to CPU frequency. Devices never
/// drop below their sensitive samples; air nodes forward to the space layer
/// only what they held at the start of the round.
fn proportional(state: &RoundState, tol: Tolerances, space_cpu_hz: f64) -> OffloadPlan {
    let total = state.total_samples();
    let mut weights: Vec<f64> = Vec::new();
    let mut floors: Vec<f64> = Vec::new();
    for c in &state.clusters {
        for d in &c.devices {
            weights.push(d.cpu_rate);
            floors.push(d.sensitive);
        }
    }
    let devices = weights.len();
    for c in &state.clusters {
        weights.push(c.air.cpu_rate);
        floors.push(0.0);
    }
    weights.push(space_cpu_hz);
    floors.push(0.0);
    let target = water_fill(total, &weights, &floors);

    let mut space_deficit = (target[target.len() - 1] - state.space_samples).max(0.0);
    let mut k = 0;
    let clusters = state
        .clusters
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let device_transfer: Vec<f64> = c
                .devices
                .iter()
                .map(|d| {
                    let x = (d.samples - target[k]).clamp(0.0, d.offloadable());
                    k += 1;
                    x
                })
                .collect();
            let surplus = (c.air.samples - target[devices + j]).max(0.0);
            let a2s = surplus.min(space_deficit);
            space_deficit -= a2s;
            ClusterPlan { space_transfer: a2s, flow: ClusterFlow::GroundToAir, device_transfer }
        })
        .collect();
    OffloadPlan { direction: Direction::AirGroundToSpace, clusters, epsilon1: tol.epsilon1, epsilon2: tol.epsilon2 }
}

/// Splits `total` proportionally to `weights` subject to per-entry floors.
pub fn water_fill(total: f64, weights: &[f64], floors: &[f64]) -> Vec<f64> {
    let mut fixed = vec![false; weights.len()];
    loop {
        let free_total = total - floors.iter().zip(&fixed).filter(|(_, f)| **f).map(|(v, _)| v).sum::<f64>();
        let free_weight: f64 = weights.iter().zip(&fixed).filter(|(_, f)| !**f).map(|(w, _)| w).sum();
        let out: Vec<f64> = (0..weights.len())
            .map(|i| if fixed[i] { floors[i] } else { free_total.max(0.0) * weights[i] / free_weight })
            .collect();
        let mut changed = false;
        for i in 0..weights.len() {
            if !fixed[i] && out[i] < floors[i] {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed || free_weight == 0.0 {
            return out;
        }
    }
}

fn shifted_space_delay(state: &RoundState, samples: f64, offset: f64) -> f64 {
    if samples <= 0.0 {
        return 0.0;
    }
    let mut late = state.clone();
    late.passes = state
        .passes
        .iter()
        .filter(|p| p.time_to_exit > offset)
        .map(|p| {
            let mut p = *p;
            p.time_to_exit -= offset;
            p
        })
        .collect();
    offset + late.space_delay(samples).0
}

/// Latency when devices push `x` through their air node to the space layer.
pub fn relay_latency(state: &RoundState, x: &[Vec<f64>]) -> RoundLatency {
    let q = state.payload.sample_bits;
    let model = state.payload.model_bits;
    let mut offset = 0.0f64;
    let mut moved = 0.0;
    let mut out = RoundLatency {
        tau_space: 0.0,
        tau_air: Vec::new(),
        a2s_upload: Vec::new(),
        tau_ground: Vec::new(),
        g2a_upload: Vec::new(),
        tau_total: 0.0,
        finishing_pass_index: 1,
    };
    for (c, xs) in state.clusters.iter().zip(x) {
        let sent: f64 = xs.iter().sum();
        let arrivals = c.devices.iter().zip(xs).map(|(d, v)| q * v / d.g2a_rate).fold(0.0, f64::max);
        if sent > 0.0 {
            offset = offset.max(arrivals + q * sent / c.air.a2s_rate);
        }
        moved += sent;
        let mut done = c.air.local_time();
        for (d, &v) in c.devices.iter().zip(xs) {
            let ground = case2_ground_delay(d, v, q);
            let up = model / d.g2a_rate;
            out.tau_ground.push(ground);
            out.g2a_upload.push(up);
            done = done.max(ground + up);
        }
        out.tau_air.push(done);
        out.a2s_upload.push(model / c.air.a2s_rate);
    }
    let samples = state.space_samples + moved;
    out.tau_space = shifted_space_delay(state, samples, offset);
    out.tau_total = out.tau_space.max(out.air_side());
    out
}

/// Level search over the device completion time: every device offloads
/// just enough to finish by the level, and the level rises until the space
/// layer keeps up.
fn space_only(state: &RoundState, tol: Tolerances) -> Vec<Vec<f64>> {
    let q = state.payload.sample_bits;
    let model = state.payload.model_bits;
    let at_level = |nu: f64| -> Vec<Vec<f64>> {
        state
            .clusters
            .iter()
            .map(|c| {
                c.devices
                    .iter()
                    .map(|d| {
                        let cap = d.offloadable().min(d.g2a_threshold(q));
                        let slack = (nu - model / d.g2a_rate).max(0.0);
                        (d.samples - d.cpu_rate * slack / d.cycles_per_sample).clamp(0.0, cap.max(0.0))
                    })
                    .collect()
            })
            .collect()
    };
    let zero: Vec<Vec<f64>> = state.clusters.iter().map(|c| vec![0.0; c.devices.len()]).collect();
    let mut best = (relay_latency(state, &zero).tau_total, zero);
    let hi0 = state
        .clusters
        .iter()
        .flat_map(|c| c.devices.iter().map(|d| d.local_time() + model / d.g2a_rate))
        .fold(0.0, f64::max);
    let eps = tol.epsilon1 * hi0;
    let budget = bisection_budget(hi0, eps);
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..budget {
        if hi - lo < eps {
            break;
        }
        let nu = 0.5 * (lo + hi);
        let x = at_level(nu);
        let lat = relay_latency(state, &x);
        if lat.tau_total < best.0 {
            best = (lat.tau_total, x);
        }
        if lat.tau_space > lat.air_side() {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    best.1
}

fn move_random<R: Rng + ?Sized>(from: &mut Vec<SampleId>, to: &mut Vec<SampleId>, count: usize, rng: &mut R) {
    let count = count.min(from.len());
    from.partial_shuffle(rng, count);
    // The chosen samples sit at the back.
    to.extend(from.split_off(from.len() - count));
}

/// Applies an action to the ledger.
pub fn apply<R: Rng + ?Sized>(ledger: &DatasetLedger, action: &Action, rng: &mut R) -> anyhow::Result<DatasetLedger> {
    match action {
        Action::Plan(p) => Ok(ledger.apply_plan(p, rng)?),
        Action::Relay(x) => {
            let mut next = ledger.clone();
            for (j, xs) in x.iter().enumerate() {
                for (k, &v) in ledger.cluster_devices(j).into_iter().zip(xs) {
                    let c = round_preserving_sum(&[v], next.offloadable[k].len())[0];
                    let (off, space) = (&mut next.offloadable[k], &mut next.space);
                    move_random(off, space, c, rng);
                }
            }
            Ok(next)
        }
    }
}
