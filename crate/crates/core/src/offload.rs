//! Inter-layer data-offloading optimizer.
//!
//! The planner is a hierarchy of bisections. At the top, the total amount
//! moved between the space layer and the air layer is bisected until the
//! space-layer delay meets the slowest air cluster. In the middle, a common
//! completion level is bisected so that the per-air-node transfers add up to
//! that total. At the bottom every air node balances against its own ground
//! devices with the same two-level scheme.
//!
//! Every loop stops once its interval falls below its tolerance, so the
//! iteration count never exceeds `ceil(log2(interval / eps)) + 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::latency::{
    cluster_completion, cluster_local_delays, round_latency_no_offload, round_latency_with_plan, ClusterState,
    RoundLatency, RoundState,
};
use crate::linkmodel::{delay, PayloadSizes};
use crate::math::{abs, bisection_budget};

/// Direction of the space/air exchange in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Direction {
    /// Case I: the space layer is the bottleneck and sheds data.
    SpaceToAirGround,
    /// Case II: air and ground shed data towards the space layer.
    AirGroundToSpace,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::SpaceToAirGround => "space-to-air-ground",
            Direction::AirGroundToSpace => "air-ground-to-space",
        }
    }
}

/// Direction of the exchange between an air node and its devices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ClusterFlow {
    #[default]
    AirToGround,
    GroundToAir,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterPlan {
    /// Samples received from (Case I) or sent to (Case II) the satellite.
    pub space_transfer: f64,
    pub flow: ClusterFlow,
    /// Per device, in the direction given by `flow`.
    pub device_transfer: Vec<f64>,
}

impl ClusterPlan {
    pub fn zero(devices: usize) -> Self {
        Self { space_transfer: 0.0, flow: ClusterFlow::AirToGround, device_transfer: vec![0.0; devices] }
    }

    pub fn device_total(&self) -> f64 {
        self.device_transfer.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OffloadPlan {
    pub direction: Direction,
    pub clusters: Vec<ClusterPlan>,
    pub epsilon1: f64,
    pub epsilon2: f64,
}

impl OffloadPlan {
    pub fn zero(state: &RoundState, direction: Direction) -> Self {
        Self {
            direction,
            clusters: state.clusters.iter().map(|c| ClusterPlan::zero(c.devices.len())).collect(),
            epsilon1: 0.0,
            epsilon2: 0.0,
        }
    }

    pub fn space_total(&self) -> f64 {
        self.clusters.iter().map(|c| c.space_transfer).sum()
    }

    pub fn device_total(&self) -> f64 {
        self.clusters.iter().map(ClusterPlan::device_total).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.space_total() == 0.0 && self.device_total() == 0.0
    }

    /// Checks every box constraint against the pre-offload state, with an
    /// absolute slack `tol` for real-valued plans.
    pub fn validate(&self, state: &RoundState, tol: f64) -> core::result::Result<(), &'static str> {
        if self.clusters.len() != state.clusters.len() {
            return Err("cluster count mismatch");
        }
        let q = state.payload.sample_bits;
        let space = self.space_total();
        if self.direction == Direction::SpaceToAirGround && space > state.space_samples + tol {
            return Err("space layer sends more than it holds");
        }
        for (cp, c) in self.clusters.iter().zip(&state.clusters) {
            if cp.device_transfer.len() != c.devices.len() {
                return Err("device count mismatch");
            }
            if cp.space_transfer < -tol || cp.device_transfer.iter().any(|x| *x < -tol || !x.is_finite()) {
                return Err("negative transfer");
            }
            let total = cp.device_total();
            match (self.direction, cp.flow) {
                (Direction::SpaceToAirGround, ClusterFlow::AirToGround) => {
                    if total > c.air.samples + cp.space_transfer + tol {
                        return Err("air node sends more than it holds");
                    }
                }
                (Direction::AirGroundToSpace, ClusterFlow::AirToGround) => {
                    if cp.space_transfer + total > c.air.samples + tol {
                        return Err("air node sends more than it holds");
                    }
                }
                (_, ClusterFlow::GroundToAir) => {
                    if self.direction == Direction::AirGroundToSpace && cp.space_transfer > c.air.samples + tol {
                        return Err("air node sends more than it holds");
                    }
                    for (x, d) in cp.device_transfer.iter().zip(&c.devices) {
                        if *x > d.offloadable() + tol {
                            return Err("device offloads sensitive samples");
                        }
                        if *x > d.g2a_threshold(q) + tol {
                            return Err("device offload beyond its useful range");
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Relative tolerances: each loop stops once its interval is below this
/// fraction of its initial width.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    pub epsilon1: f64,
    pub epsilon2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { epsilon1: 1e-3, epsilon2: 1e-3 }
    }
}

/// Iteration counts of one loop kind, maximised over its invocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoopStats {
    pub max_iterations: u32,
    pub max_budget: u32,
    pub invocations: u64,
    /// Invocations that exceeded their own budget.
    pub violations: u64,
}

impl LoopStats {
    fn record(&mut self, iterations: u32, budget: u32) {
        self.max_iterations = self.max_iterations.max(iterations);
        self.max_budget = self.max_budget.max(budget);
        self.invocations += 1;
        if iterations > budget {
            self.violations += 1;
        }
    }

}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BisectionTrace {
    /// Outer loop over the space/air total.
    pub outer_iterations: u32,
    pub outer_budget: u32,
    /// Level loop splitting the total across air nodes.
    pub inner: LoopStats,
    /// Per-air-node search for its space transfer.
    pub node_search: LoopStats,
    /// Outer loop of the air/ground balance.
    pub cluster_outer: LoopStats,
    /// Level loop of the air/ground balance.
    pub cluster_inner: LoopStats,
    /// `|tau_S - max_n(tau_A_n + tau_A2S_n)|` of the returned plan.
    pub final_gap: f64,
    /// Imbalance the final outer bracket allows; infinite when the outer
    /// search ran into an end of its range.
    pub gap_bound: f64,
    /// A level loop ran out of interval before its sum window was met.
    pub saturated: bool,
    /// A box constraint is active in the returned plan.
    pub constrained: bool,
}

impl BisectionTrace {
    pub fn within_budget(&self) -> bool {
        self.outer_iterations <= self.outer_budget
            && self.inner.violations == 0
            && self.node_search.violations == 0
            && self.cluster_outer.violations == 0
            && self.cluster_inner.violations == 0
    }

    pub fn max_iterations(&self) -> u32 {
        [
            self.outer_iterations,
            self.inner.max_iterations,
            self.node_search.max_iterations,
            self.cluster_outer.max_iterations,
            self.cluster_inner.max_iterations,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

/// `CaseI` iff the space layer alone is slower than every air cluster; a tie
/// falls to `CaseII`.
pub fn classify_direction(state: &RoundState) -> Direction {
    let lat = round_latency_no_offload(state);
    if lat.tau_space > lat.air_side() {
        Direction::SpaceToAirGround
    } else {
        Direction::AirGroundToSpace
    }
}

/// Completion-time curve of one device as a function of the samples it
/// exchanges with its air node, model upload included.
#[derive(Debug, Clone, Copy)]
enum Curve {
    /// Receiving `x`: `max(c + b x, s + (a + b) x) + u` for `x > 0`, `c + u`
    /// at zero.
    Rising { c: f64, b: f64, s: f64, ab: f64, u: f64, cap: f64 },
    /// Sending `x` below its transfer-dominated threshold: `c - b x + u`.
    Falling { c: f64, b: f64, u: f64, cap: f64 },
}

impl Curve {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Curve::Rising { c, b, s, ab, u, .. } => {
                if x <= 0.0 {
                    c + u
                } else {
                    (c + b * x).max(s + ab * x) + u
                }
            }
            Curve::Falling { c, b, u, .. } => c - b * x + u,
        }
    }

    fn cap(&self, limit: f64) -> f64 {
        match *self {
            Curve::Rising { cap, .. } | Curve::Falling { cap, .. } => cap.min(limit).max(0.0),
        }
    }

    /// Allocation that brings this device to completion level `nu`.
    fn alloc(&self, nu: f64, limit: f64) -> f64 {
        let cap = self.cap(limit);
        let x = match *self {
            Curve::Rising { c, b, s, ab, u, .. } => {
                let r = nu - u;
                solve_rising(r - c, b).min(solve_rising(r - s, ab))
            }
            Curve::Falling { c, b, u, .. } => {
                let excess = c + u - nu;
                if excess <= 0.0 {
                    0.0
                } else if b > 0.0 {
                    excess / b
                } else {
                    f64::INFINITY
                }
            }
        };
        x.clamp(0.0, cap)
    }
}

/// Largest `x` with `slope * x <= room`.
fn solve_rising(room: f64, slope: f64) -> f64 {
    if room < 0.0 {
        return 0.0;
    }
    if slope > 0.0 {
        room / slope
    } else {
        f64::INFINITY
    }
}

/// Finds a completion level whose allocations sum to `target` within
/// `(1 +- eps)`. Returns the allocation and whether the level interval was
/// exhausted first, in which case the allocation on the under-target side is
/// returned.
fn level_split(curves: &[Curve], target: f64, eps: f64, stats: &mut LoopStats) -> (Vec<f64>, bool) {
    let rising = matches!(curves.first(), Some(Curve::Rising { .. }));
    let alloc = |nu: f64| -> Vec<f64> { curves.iter().map(|c| c.alloc(nu, target)).collect() };
    let in_window = |x: &[f64]| {
        let s: f64 = x.iter().sum();
        s >= (1.0 - eps) * target && s <= (1.0 + eps) * target
    };
    let mut current = vec![0.0; curves.len()];
    let top = curves
        .iter()
        .map(|c| if rising { c.value(c.cap(target)) } else { c.value(0.0) })
        .fold(0.0, f64::max);
    let width = if top.is_finite() { top } else { 0.0 };
    let tol = eps * width;
    let budget = bisection_budget(width, tol);
    let (mut lo, mut hi) = (0.0, width);
    let mut iterations = 0;
    while !in_window(&current) && hi - lo >= tol && width > 0.0 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        current = alloc(mid);
        let sum: f64 = current.iter().sum();
        let more = sum <= (1.0 - eps) * target;
        if more == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    stats.record(iterations, budget);
    if in_window(&current) {
        return (current, false);
    }
    let (under, over) = if rising { (alloc(lo), alloc(hi)) } else { (alloc(hi), alloc(lo)) };
    let out = blend(&under, &over, target);
    let saturated = !in_window(&out);
    (out, saturated)
}

/// Allocation on the segment between `under` and `over` whose entries sum to
/// `target`, clamped to the segment. When the level bracket has collapsed
/// onto a jump, every point of the segment stays at or below the upper level
/// because each entry is monotone in the level.
fn blend(under: &[f64], over: &[f64], target: f64) -> Vec<f64> {
    let su: f64 = under.iter().sum();
    let so: f64 = over.iter().sum();
    let theta = if so > su { ((target - su) / (so - su)).clamp(0.0, 1.0) } else { 1.0 };
    under.iter().zip(over).map(|(u, o)| u + theta * (o - u)).collect()
}

/// Result of balancing one cluster for a fixed space transfer.
#[derive(Debug, Clone)]
struct ClusterOutcome {
    plan: ClusterPlan,
    completion: f64,
    constrained: bool,
    saturated: bool,
}

/// Balances one air node against its devices for a fixed space transfer
/// `space`. The flow direction is chosen from the unbalanced delays.
fn balance_cluster(
    cluster: &ClusterState,
    direction: Direction,
    space: f64,
    payload: &PayloadSizes,
    tol: Tolerances,
    trace: &mut BisectionTrace,
) -> ClusterOutcome {
    let n = cluster.devices.len();
    let q = payload.sample_bits;
    let uploads: Vec<f64> = cluster.devices.iter().map(|d| delay(payload.model_bits, d.g2a_rate)).collect();
    let evaluate = |plan: &ClusterPlan| -> (f64, f64) {
        let (air, ground) = cluster_local_delays(cluster, direction, plan, q);
        let ground_max = ground.iter().zip(&uploads).map(|(g, u)| g + u).fold(0.0, f64::max);
        (air, ground_max)
    };

    let zero = ClusterPlan { space_transfer: space, flow: ClusterFlow::AirToGround, device_transfer: vec![0.0; n] };
    let (air0, ground0) = evaluate(&zero);
    if n == 0 || air0 == ground0 {
        trace.cluster_outer.record(0, 1);
        return ClusterOutcome { completion: air0.max(ground0), plan: zero, constrained: false, saturated: false };
    }
    let flow = if air0 > ground0 { ClusterFlow::AirToGround } else { ClusterFlow::GroundToAir };
    let air = &cluster.air;

    let (curves, y_max): (Vec<Curve>, f64) = match flow {
        ClusterFlow::AirToGround => {
            let (pool, lead) = match direction {
                Direction::SpaceToAirGround => (air.samples + space, delay(q * space, air.s2a_rate)),
                Direction::AirGroundToSpace => ((air.samples - space).max(0.0), 0.0),
            };
            let curves = cluster
                .devices
                .iter()
                .zip(&uploads)
                .map(|(d, &u)| {
                    let b = d.cycles_per_sample / d.cpu_rate;
                    Curve::Rising { c: d.local_time(), b, s: lead, ab: q / d.a2g_rate + b, u, cap: pool }
                })
                .collect();
            (curves, pool)
        }
        ClusterFlow::GroundToAir => {
            let curves: Vec<Curve> = cluster
                .devices
                .iter()
                .zip(&uploads)
                .map(|(d, &u)| Curve::Falling {
                    c: d.local_time(),
                    b: d.cycles_per_sample / d.cpu_rate,
                    u,
                    cap: d.offloadable().min(d.g2a_threshold(q)),
                })
                .collect();
            let total = curves.iter().map(|c| c.cap(f64::INFINITY)).sum();
            (curves, total)
        }
    };

    let mut best = ClusterOutcome { completion: air0.max(ground0), plan: zero, constrained: false, saturated: false };
    if !(y_max > 0.0) {
        trace.cluster_outer.record(0, 1);
        best.constrained = true;
        return best;
    }
    let eps1 = tol.epsilon1 * y_max;
    let budget = bisection_budget(y_max, eps1);
    let (mut lo, mut hi) = (0.0, y_max);
    let mut iterations = 0;
    while hi - lo >= eps1 {
        iterations += 1;
        let y = 0.5 * (lo + hi);
        let (mut x, saturated) = level_split(&curves, y, tol.epsilon2, &mut trace.cluster_inner);
        let sum: f64 = x.iter().sum();
        if sum > y_max {
            x.iter_mut().for_each(|v| *v *= y_max / sum);
        }
        let plan = ClusterPlan { space_transfer: space, flow, device_transfer: x };
        let (a, g) = evaluate(&plan);
        let completion = a.max(g);
        if completion < best.completion {
            let at_cap = plan.device_transfer.iter().zip(&curves).any(|(x, c)| *x >= c.cap(y_max) && *x > 0.0);
            best = ClusterOutcome { plan, completion, constrained: at_cap, saturated };
        }
        let sender_slower = match flow {
            ClusterFlow::AirToGround => a >= g,
            ClusterFlow::GroundToAir => g >= a,
        };
        if sender_slower {
            lo = y;
        } else {
            hi = y;
        }
    }
    trace.cluster_outer.record(iterations, budget);
    if lo == 0.0 || hi == y_max {
        best.constrained = true;
    }
    best
}

/// One air node's balanced completion including its model upload.
fn node_completion(
    cluster: &ClusterState,
    direction: Direction,
    space: f64,
    payload: &PayloadSizes,
    tol: Tolerances,
    trace: &mut BisectionTrace,
) -> ClusterOutcome {
    let mut out = balance_cluster(cluster, direction, space, payload, tol, trace);
    out.completion += delay(payload.model_bits, cluster.air.a2s_rate);
    out
}

/// Upper limit on a node's space transfer.
fn node_cap(state: &RoundState, cluster: &ClusterState, direction: Direction, x: f64) -> f64 {
    match direction {
        Direction::SpaceToAirGround => state.space_samples.min(x),
        Direction::AirGroundToSpace => {
            let q = state.payload.sample_bits;
            let inflow: f64 = cluster.devices.iter().map(|d| d.offloadable().min(d.g2a_threshold(q))).sum();
            cluster.air.a2s_threshold(q, inflow).min(x).max(0.0)
        }
    }
}

/// Space transfer of one node that brings its completion to level `nu`.
/// Completion rises with the transfer in Case I and falls in Case II.
fn node_search(
    cluster: &ClusterState,
    direction: Direction,
    cap: f64,
    nu: f64,
    payload: &PayloadSizes,
    tol: Tolerances,
    trace: &mut BisectionTrace,
) -> f64 {
    if !(cap > 0.0) {
        trace.node_search.record(0, 1);
        return 0.0;
    }
    let rising = direction == Direction::SpaceToAirGround;
    let eval = |s: f64, trace: &mut BisectionTrace| node_completion(cluster, direction, s, payload, tol, trace).completion;
    let f0 = eval(0.0, trace);
    let fc = eval(cap, trace);
    if rising {
        if fc <= nu {
            trace.node_search.record(0, 1);
            return cap;
        }
        if f0 > nu {
            trace.node_search.record(0, 1);
            return 0.0;
        }
    } else {
        if f0 <= nu {
            trace.node_search.record(0, 1);
            return 0.0;
        }
        if fc > nu {
            trace.node_search.record(0, 1);
            return cap;
        }
    }
    // Invariant: `ok` meets the level, `bad` does not.
    let (mut ok, mut bad) = if rising { (0.0, cap) } else { (cap, 0.0) };
    let eps = tol.epsilon2 * cap;
    let budget = bisection_budget(cap, eps);
    let mut iterations = 0;
    while abs(bad - ok) >= eps {
        iterations += 1;
        let mid = 0.5 * (ok + bad);
        if eval(mid, trace) <= nu {
            ok = mid;
        } else {
            bad = mid;
        }
    }
    trace.node_search.record(iterations, budget);
    ok
}

/// Output of [`optimize_round`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Optimized {
    pub plan: OffloadPlan,
    pub latency: RoundLatency,
    pub trace: BisectionTrace,
}

#[derive(Clone)]
struct Candidate {
    plan: OffloadPlan,
    space: f64,
    air: f64,
    constrained: bool,
}

impl Candidate {
    fn total(&self) -> f64 {
        self.space.max(self.air)
    }
}

/// Per-node transfers for a fixed total `x`, then the cluster balances.
fn split_total(state: &RoundState, direction: Direction, x: f64, tol: Tolerances, trace: &mut BisectionTrace) -> Candidate {
    let payload = state.payload;
    let caps: Vec<f64> = state.clusters.iter().map(|c| node_cap(state, c, direction, x)).collect();
    let rising = direction == Direction::SpaceToAirGround;
    let mut transfers = vec![0.0; state.clusters.len()];
    let in_window = |t: &[f64]| {
        let s: f64 = t.iter().sum();
        s >= (1.0 - tol.epsilon2) * x && s <= (1.0 + tol.epsilon2) * x
    };
    let top = state
        .clusters
        .iter()
        .zip(&caps)
        .map(|(c, &cap)| {
            let s = if rising { cap } else { 0.0 };
            node_completion(c, direction, s, &payload, tol, trace).completion
        })
        .fold(0.0, f64::max);
    let width = if top.is_finite() { top } else { 0.0 };
    let eps = tol.epsilon2 * width;
    let budget = bisection_budget(width, eps);
    let (mut lo, mut hi) = (0.0, width);
    let mut iterations = 0;
    while !in_window(&transfers) && hi - lo >= eps && width > 0.0 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        for ((t, c), &cap) in transfers.iter_mut().zip(&state.clusters).zip(&caps) {
            *t = node_search(c, direction, cap, mid, &payload, tol, trace);
        }
        let sum: f64 = transfers.iter().sum();
        let low = sum <= (1.0 - tol.epsilon2) * x;
        if low == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    trace.inner.record(iterations, budget);
    if !in_window(&transfers) && iterations > 0 {
        let (nu_under, nu_over) = if rising { (lo, hi) } else { (hi, lo) };
        let at = |nu: f64, trace: &mut BisectionTrace| -> Vec<f64> {
            state
                .clusters
                .iter()
                .zip(&caps)
                .map(|(c, &cap)| node_search(c, direction, cap, nu, &payload, tol, trace))
                .collect()
        };
        let under = at(nu_under, trace);
        let over = at(nu_over, trace);
        transfers = blend(&under, &over, x);
        trace.saturated |= !in_window(&transfers);
    }
    if rising {
        let sum: f64 = transfers.iter().sum();
        if sum > state.space_samples && sum > 0.0 {
            let scale = state.space_samples / sum;
            transfers.iter_mut().for_each(|t| *t *= scale);
        }
    }

    let mut constrained = false;
    let mut clusters = Vec::with_capacity(state.clusters.len());
    let mut air_side = 0.0f64;
    for ((c, &t), &cap) in state.clusters.iter().zip(&transfers).zip(&caps) {
        let out = node_completion(c, direction, t, &payload, tol, trace);
        constrained |= out.constrained || out.saturated || (t >= cap && cap > 0.0);
        air_side = air_side.max(out.completion);
        clusters.push(out.plan);
    }
    let plan = OffloadPlan { direction, clusters, epsilon1: tol.epsilon1, epsilon2: tol.epsilon2 };
    let lat = round_latency_with_plan(state, &plan);
    Candidate { plan, space: lat.tau_space, air: lat.air_side(), constrained }
}

/// Plans the round: classifies the direction, then runs the hierarchical
/// bisection. The returned plan is the best candidate evaluated, the zero
/// plan included, so it is never slower than not offloading.
pub fn optimize_round(state: &RoundState, tol: Tolerances) -> Optimized {
    let base = round_latency_no_offload(state);
    let mut trace = BisectionTrace::default();
    let direction = if base.tau_space > base.air_side() {
        Direction::SpaceToAirGround
    } else {
        Direction::AirGroundToSpace
    };
    let mut zero = OffloadPlan::zero(state, direction);
    zero.epsilon1 = tol.epsilon1;
    zero.epsilon2 = tol.epsilon2;
    let mut best = Candidate { plan: zero, space: base.tau_space, air: base.air_side(), constrained: true };
    if base.tau_space == base.air_side() {
        trace.outer_budget = 1;
        trace.constrained = true;
        return finish(state, best, trace, f64::INFINITY);
    }

    let upper = match direction {
        Direction::SpaceToAirGround => state.space_samples,
        Direction::AirGroundToSpace => state.clusters.iter().map(|c| c.air.samples).sum(),
    };
    let first = split_total(state, direction, 0.0, tol, &mut trace);
    if first.total() < best.total() {
        best = first;
    }
    let eps1 = tol.epsilon1 * upper;
    trace.outer_budget = bisection_budget(upper, eps1);
    let (mut lo, mut hi) = (0.0, upper);
    let mut below: Option<Candidate> = None;
    let mut above: Option<Candidate> = None;
    while upper > 0.0 && hi - lo >= eps1 {
        trace.outer_iterations += 1;
        let x = 0.5 * (lo + hi);
        let cand = split_total(state, direction, x, tol, &mut trace);
        let space_slower = cand.space >= cand.air;
        let more = match direction {
            Direction::SpaceToAirGround => space_slower,
            Direction::AirGroundToSpace => !space_slower,
        };
        if more {
            lo = x;
        } else {
            hi = x;
        }
        if cand.total() < best.total() {
            best = cand.clone();
        }
        if space_slower {
            below = Some(cand);
        } else {
            above = Some(cand);
        }
    }
    let bound = match (&below, &above) {
        (Some(b), Some(a)) => abs(b.space - a.space) + abs(b.air - a.air),
        _ => f64::INFINITY,
    };
    // Near-ties go to the most balanced bracket end; its own gap is within
    // `bound`.
    if bound.is_finite() {
        let limit = best.total() * (1.0 + tol.epsilon1);
        let gap = |c: &Candidate| abs(c.space - c.air);
        for c in [below, above].into_iter().flatten() {
            if c.total() <= limit && gap(&c) < gap(&best) {
                best = c;
            }
        }
    }
    finish(state, best, trace, bound)
}

fn finish(state: &RoundState, best: Candidate, mut trace: BisectionTrace, bound: f64) -> Optimized {
    let latency = round_latency_with_plan(state, &best.plan);
    trace.final_gap = abs(latency.tau_space - latency.air_side());
    trace.gap_bound = bound;
    trace.constrained |= best.constrained || !bound.is_finite();
    Optimized { plan: best.plan, latency, trace }
}

/// Exposes the cluster balance for a fixed space transfer; used by the
/// air-only baseline and by tests.
pub fn balance_air_ground(
    cluster: &ClusterState,
    direction: Direction,
    space_transfer: f64,
    payload: &PayloadSizes,
    tol: Tolerances,
) -> (ClusterPlan, f64, BisectionTrace) {
    let mut trace = BisectionTrace::default();
    let out = balance_cluster(cluster, direction, space_transfer, payload, tol, &mut trace);
    trace.constrained = out.constrained;
    trace.saturated = out.saturated;
    debug_assert!((out.completion - cluster_completion(cluster, direction, &out.plan, payload)).abs() <= 1e-9 * out.completion.max(1.0));
    (out.plan, out.completion, trace)
}
