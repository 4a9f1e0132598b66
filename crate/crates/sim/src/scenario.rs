//! Node placement, link rates and the per-round state handed to the
//! optimizer.

use std::sync::Arc;

use anyhow::{Context, Result};
use rand::Rng;
use sagin_core::constellation::{slant_range, SatellitePass};
use sagin_core::flcore::{gaussian_blobs, partition, Dataset, Objective, SoftmaxRegression};
use sagin_core::latency::{AirProfile, ClusterState, DeviceProfile, RoundState};
use sagin_core::ledger::DatasetLedger;
use sagin_core::linkmodel::{access_rate, LinkParams, PayloadSizes};
use sagin_core::rng::{purpose, stream};

use crate::config::ExperimentConfig;
use crate::coverage::{serving_chain, CoverageCache};

/// Horizontal positions in the region and the resulting cluster layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub devices: Vec<[f64; 2]>,
    pub air: Vec<[f64; 2]>,
    pub cluster_of: Vec<usize>,
}

/// Devices uniform in the square; air nodes evenly on a ring around the
/// centre. Each device joins the nearest air node with spare capacity,
/// shortest pairs first, so every cluster gets exactly `K / N` devices.
pub fn place_nodes(cfg: &ExperimentConfig) -> Placement {
    let n = &cfg.nodes;
    let side = cfg.site.region_m;
    let mut rng = stream(cfg.seed, purpose::PLACEMENT, 0, 0);
    let devices: Vec<[f64; 2]> = (0..n.devices).map(|_| [rng.gen_range(0.0..side), rng.gen_range(0.0..side)]).collect();
    let c = side / 2.0;
    let air: Vec<[f64; 2]> = (0..n.air_nodes)
        .map(|i| {
            if n.air_nodes == 1 {
                return [c, c];
            }
            let a = std::f64::consts::TAU * i as f64 / n.air_nodes as f64;
            [c + n.air_ring_m * a.cos(), c + n.air_ring_m * a.sin()]
        })
        .collect();
    let dist2 = |d: &[f64; 2], a: &[f64; 2]| (d[0] - a[0]).powi(2) + (d[1] - a[1]).powi(2);
    let mut pairs: Vec<(f64, usize, usize)> = devices
        .iter()
        .enumerate()
        .flat_map(|(k, d)| air.iter().enumerate().map(move |(j, a)| (dist2(d, a), k, j)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let capacity = n.devices / n.air_nodes;
    let mut load = vec![0; n.air_nodes];
    let mut cluster_of = vec![usize::MAX; n.devices];
    for (_, k, j) in pairs {
        if cluster_of[k] == usize::MAX && load[j] < capacity {
            cluster_of[k] = j;
            load[j] += 1;
        }
    }
    Placement { devices, air, cluster_of }
}

/// Everything about a configuration that does not change between rounds.
pub struct Scenario {
    pub cfg: ExperimentConfig,
    pub coverage: Arc<CoverageCache>,
    pub placement: Placement,
    pub train: Dataset,
    pub test: Dataset,
    pub payload: PayloadSizes,
    /// Per device: (g2a, a2g) rates, bit/s.
    pub device_rates: Vec<(f64, f64)>,
}

impl Scenario {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let coverage = Arc::new(CoverageCache::new(&cfg)?);
        Self::with_coverage(cfg, coverage)
    }

    /// Reuses an existing coverage cache; its constellation must match.
    pub fn with_coverage(cfg: ExperimentConfig, coverage: Arc<CoverageCache>) -> Result<Self> {
        cfg.check()?;
        let (train, test) = gaussian_blobs(&cfg.blob_spec(), cfg.seed);
        let placement = place_nodes(&cfg);
        let model = SoftmaxRegression::new(&train);
        let payload = PayloadSizes::for_model(model.param_count(), cfg.data.dim);
        let link = g2a_link(&cfg);
        let h = cfg.nodes.air_altitude_m;
        let device_rates = placement
            .devices
            .iter()
            .zip(&placement.cluster_of)
            .map(|(d, &j)| {
                let a = placement.air[j];
                let dist = ((d[0] - a[0]).powi(2) + (d[1] - a[1]).powi(2) + h * h).sqrt();
                let l = link.with_distance(dist);
                (access_rate(&l, cfg.nodes.device_power_w), access_rate(&l, cfg.nodes.air_power_w))
            })
            .collect();
        Ok(Self { cfg, coverage, placement, train, test, payload, device_rates })
    }

    pub fn initial_ledger(&self) -> Result<DatasetLedger> {
        let spec = self.cfg.partition_spec();
        Ok(partition(&self.train.labels, self.placement.cluster_of.clone(), self.cfg.nodes.air_nodes, &spec, self.cfg.seed)?)
    }

    /// Serving passes from `t`; the chain stops at the first coverage gap.
    pub fn passes(&self, t: f64) -> Result<Vec<SatellitePass>> {
        Ok(serving_chain(&self.coverage, &self.cfg, t)?.passes)
    }

    /// `(a2s, s2a)` rates towards the first serving satellite at `t`.
    pub fn air_space_rates(&self, passes: &[SatellitePass], t: f64) -> (f64, f64) {
        let n = &self.cfg.nodes;
        let dist = match passes.first() {
            Some(p) => {
                let sat = &self.coverage.elements()[p.satellite_id];
                slant_range(sat, self.coverage.site(), n.air_altitude_m, t)
            }
            None => self.cfg.constellation.altitude_km * 1e3 - n.air_altitude_m,
        };
        let l = a2s_link(&self.cfg).with_distance(dist);
        (access_rate(&l, n.air_power_w), access_rate(&l, n.sat_power_w))
    }

    /// Optimizer input for the round starting at `t` with holdings `ledger`.
    pub fn round_state(&self, ledger: &DatasetLedger, t: f64) -> Result<RoundState> {
        let passes = self.passes(t).context("building the serving chain")?;
        Ok(self.round_state_with(ledger, passes, t))
    }

    pub fn round_state_with(&self, ledger: &DatasetLedger, passes: Vec<SatellitePass>, t: f64) -> RoundState {
        let n = &self.cfg.nodes;
        let (a2s, s2a) = self.air_space_rates(&passes, t);
        let clusters = (0..n.air_nodes)
            .map(|j| ClusterState {
                air: AirProfile {
                    samples: ledger.air[j].len() as f64,
                    cycles_per_sample: n.cycles_per_sample,
                    cpu_rate: n.air_cpu_hz,
                    a2s_rate: a2s,
                    s2a_rate: s2a,
                },
                devices: ledger
                    .cluster_devices(j)
                    .into_iter()
                    .map(|k| DeviceProfile {
                        samples: ledger.ground_len(k) as f64,
                        sensitive: ledger.sensitive[k].len() as f64,
                        cycles_per_sample: n.cycles_per_sample,
                        cpu_rate: n.device_cpu_hz,
                        g2a_rate: self.device_rates[k].0,
                        a2g_rate: self.device_rates[k].1,
                    })
                    .collect(),
            })
            .collect();
        RoundState {
            space_samples: ledger.space.len() as f64,
            passes,
            payload: self.payload,
            handover_payload: self.cfg.links.handover_payload,
            clusters,
        }
    }
}

fn reference_gain(cfg: &ExperimentConfig) -> f64 {
    10f64.powf(cfg.links.reference_gain_db / 10.0)
}

pub fn g2a_link(cfg: &ExperimentConfig) -> LinkParams {
    let l = &cfg.links;
    LinkParams {
        bandwidth: l.g2a_bandwidth_hz,
        noise_density: l.noise_density,
        tx_gain: l.tx_gain,
        rx_gain: l.rx_gain,
        reference_gain: reference_gain(cfg),
        pathloss_exponent: l.g2a_pathloss_exponent,
        distance: cfg.nodes.air_altitude_m,
        channel_mode: l.channel_mode,
    }
}

pub fn a2s_link(cfg: &ExperimentConfig) -> LinkParams {
    let l = &cfg.links;
    LinkParams {
        bandwidth: l.a2s_bandwidth_hz,
        pathloss_exponent: l.a2s_pathloss_exponent,
        ..g2a_link(cfg)
    }
}
