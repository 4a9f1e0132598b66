use sagin_core::latency::{cluster_completion, ClusterState, RoundState};
use sagin_core::linkmodel::PayloadSizes;
use sagin_core::offload::{ClusterFlow, ClusterPlan, Direction};

fn linspace(hi: f64, n: usize) -> Vec<f64> {
    if hi <= 0.0 {
        return vec![0.0];
    }
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}

/// Best balanced completion of one cluster for a fixed space transfer, by
/// enumerating a per-device grid in both flow directions.
fn cluster_grid(c: &ClusterState, dir: Direction, s: f64, payload: &PayloadSizes, pts: usize) -> f64 {
    let upload = payload.model_bits / c.air.a2s_rate;
    let mut best = f64::INFINITY;
    for flow in [ClusterFlow::AirToGround, ClusterFlow::GroundToAir] {
        let pool = match dir {
            Direction::SpaceToAirGround => c.air.samples + s,
            Direction::AirGroundToSpace => c.air.samples - s,
        };
        let grids: Vec<Vec<f64>> = c
            .devices
            .iter()
            .map(|d| match flow {
                ClusterFlow::AirToGround => linspace(pool, pts),
                ClusterFlow::GroundToAir => linspace(d.offloadable(), pts),
            })
            .collect();
        let mut idx = vec![0usize; grids.len()];
        loop {
            let x: Vec<f64> = idx.iter().zip(&grids).map(|(&i, g)| g[i]).collect();
            let ok = flow == ClusterFlow::GroundToAir || x.iter().sum::<f64>() <= pool + 1e-9;
            if ok {
                let plan = ClusterPlan { space_transfer: s, flow, device_transfer: x };
                best = best.min(cluster_completion(c, dir, &plan, payload) + upload);
            }
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < grids[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    best
}

/// Exhaustive min-max over two air nodes: a space-transfer grid per node
/// crossed with each node's best cluster grid.
pub fn grid_optimum(state: &RoundState, dir: Direction, dev_pts: usize, space_pts: usize) -> f64 {
    let n = state.clusters.len();
    let per_node: Vec<Vec<(f64, f64)>> = state
        .clusters
        .iter()
        .map(|c| {
            let hi = match dir {
                Direction::SpaceToAirGround => state.space_samples,
                Direction::AirGroundToSpace => c.air.samples,
            };
            linspace(hi, space_pts)
                .into_iter()
                .map(|s| (s, cluster_grid(c, dir, s, &state.payload, dev_pts)))
                .collect()
        })
        .collect();
    assert_eq!(n, 2);
    let mut best = f64::INFINITY;
    for &(s1, f1) in &per_node[0] {
        for &(s2, f2) in &per_node[1] {
            let ds = match dir {
                Direction::SpaceToAirGround => {
                    if s1 + s2 > state.space_samples + 1e-9 {
                        continue;
                    }
                    state.space_samples - s1 - s2
                }
                Direction::AirGroundToSpace => state.space_samples + s1 + s2,
            };
            let (tau_s, _) = state.space_delay(ds);
            best = best.min(tau_s.max(f1).max(f2));
        }
    }
    best
}
