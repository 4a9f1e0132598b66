#![allow(dead_code)]

pub mod grid;

use rand::Rng;
use sagin_core::constellation::SatellitePass;
use sagin_core::latency::{AirProfile, ClusterState, DeviceProfile, HandoverPayload, RoundState};
use sagin_core::linkmodel::PayloadSizes;

pub const M: f64 = 3e9;

pub fn random_passes<R: Rng>(rng: &mut R, count: usize) -> Vec<SatellitePass> {
    let mut t = 0.0;
    let slow = rng.gen_bool(0.5);
    (0..count)
        .map(|i| {
            t += rng.gen_range(50.0..600.0);
            SatellitePass {
                satellite_id: i,
                t_enter: t - 600.0,
                t_exit: t,
                time_to_exit: if i + 1 == count && rng.gen_bool(0.3) { f64::INFINITY } else { t },
                cpu_rate: if slow { rng.gen_range(1e8..1e9) } else { rng.gen_range(1e9..1e10) },
                cycles_per_sample: M,
                isl_rate_to_next: 3.125e6,
            }
        })
        .collect()
}

pub fn random_device<R: Rng>(rng: &mut R, max_samples: f64) -> DeviceProfile {
    let samples = rng.gen_range(0.0..=max_samples).round();
    let alpha: f64 = rng.gen_range(0.3..=1.0);
    DeviceProfile {
        samples,
        sensitive: (samples * (1.0 - alpha)).round(),
        cycles_per_sample: M,
        cpu_rate: rng.gen_range(1e8..1e9),
        g2a_rate: rng.gen_range(2e3..2e5),
        a2g_rate: rng.gen_range(2e3..2e5),
    }
}

pub fn random_state<R: Rng>(rng: &mut R, air_nodes: usize, devices: usize, max_samples: f64) -> RoundState {
    let count = rng.gen_range(1..=5);
    let passes = random_passes(rng, count);
    let clusters = (0..air_nodes)
        .map(|_| ClusterState {
            air: AirProfile {
                samples: rng.gen_range(0.0..=max_samples).round(),
                cycles_per_sample: M,
                cpu_rate: rng.gen_range(5e8..2e9),
                a2s_rate: rng.gen_range(1e4..1e6),
                s2a_rate: rng.gen_range(1e4..1e6),
            },
            devices: (0..devices).map(|_| random_device(rng, max_samples)).collect(),
        })
        .collect();
    RoundState {
        space_samples: rng.gen_range(0.0..=max_samples).round(),
        passes,
        payload: PayloadSizes { model_bits: 1e4, sample_bits: 1032.0 },
        handover_payload: HandoverPayload::Full,
        clusters,
    }
}
