//! Experiment configuration. Every field has a default, so a config file
//! only needs the values it changes.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sagin_core::constellation::{GroundSite, OrbitalShell};
use sagin_core::flcore::{BatchPolicy, BlobSpec, LocalTrainConfig, PartitionMode, PartitionSpec};
use sagin_core::latency::HandoverPayload;
use sagin_core::linkmodel::ChannelMode;
use sagin_core::offload::Tolerances;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Proposed,
    NoOffload,
    AirOnly,
    SpaceOnly,
    Static,
    Proportional,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::Proposed, Scheme::NoOffload, Scheme::AirOnly, Scheme::SpaceOnly, Scheme::Static, Scheme::Proportional];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoOffload => "no-offload",
            Scheme::AirOnly => "air-only",
            Scheme::SpaceOnly => "space-only",
            Scheme::Static => "static",
            Scheme::Proportional => "proportional",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|x| x.name() == s).with_context(|| format!("unknown scheme `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub satellite_count: usize,
    pub plane_count: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub phasing: usize,
    pub epoch_s: f64,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self { satellite_count: 80, plane_count: 5, altitude_km: 800.0, inclination_deg: 85.0, phasing: 1, epoch_s: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
    /// Side of the square region holding the devices.
    pub region_m: f64,
}

impl Default for SiteConfig {
    fn default() -> Self {
        Self { latitude_deg: 40.0, longitude_deg: -86.0, min_elevation_deg: 15.0, region_m: 1200.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    /// Propagation step of the window search.
    pub step_s: f64,
    /// Windows are computed in chunks of this length.
    pub chunk_s: f64,
    /// Minimum look-ahead past a round start.
    pub lookahead_s: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { step_s: 10.0, chunk_s: 86_400.0, lookahead_s: 172_800.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    pub devices: usize,
    pub air_nodes: usize,
    pub air_altitude_m: f64,
    /// Radius of the circle the air nodes sit on, around the region centre.
    pub air_ring_m: f64,
    pub device_cpu_hz: f64,
    pub air_cpu_hz: f64,
    pub sat_cpu_min_hz: f64,
    pub sat_cpu_max_hz: f64,
    pub cycles_per_sample: f64,
    pub device_power_w: f64,
    pub air_power_w: f64,
    pub sat_power_w: f64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            devices: 50,
            air_nodes: 5,
            air_altitude_m: 20_000.0,
            air_ring_m: 300.0,
            device_cpu_hz: 1e8,
            air_cpu_hz: 1e9,
            sat_cpu_min_hz: 1e9,
            sat_cpu_max_hz: 1e10,
            cycles_per_sample: 3e9,
            device_power_w: 0.1,
            air_power_w: 1.0,
            sat_power_w: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub noise_density: f64,
    pub g2a_bandwidth_hz: f64,
    pub a2s_bandwidth_hz: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub reference_gain_db: f64,
    pub g2a_pathloss_exponent: f64,
    pub a2s_pathloss_exponent: f64,
    pub channel_mode: ChannelMode,
    pub isl_rate_bps: f64,
    pub handover_payload: HandoverPayload,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            noise_density: 3.98e-21,
            g2a_bandwidth_hz: 1e6,
            a2s_bandwidth_hz: 1e7,
            tx_gain: 1.0,
            rx_gain: 1.0,
            reference_gain_db: -30.0,
            g2a_pathloss_exponent: 3.0,
            a2s_pathloss_exponent: 2.0,
            channel_mode: ChannelMode::RayleighExpectation,
            isl_rate_bps: 3.125e6,
            handover_payload: HandoverPayload::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub classes: usize,
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    pub separation: f64,
    pub noise: f64,
    pub scale_spread: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let b = BlobSpec::default();
        Self {
            classes: b.classes,
            dim: b.dim,
            train: b.train,
            test: b.test,
            separation: 0.8,
            noise: b.noise,
            scale_spread: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub mode: PartitionMode,
    pub shard_count: usize,
    pub shards_per_device: usize,
    pub alpha: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { mode: PartitionMode::Iid, shard_count: 200, shards_per_device: 4, alpha: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub local_iterations: usize,
    pub batch_policy: BatchPolicy,
    pub learning_rate: f64,
    /// `eta_r = learning_rate / (1 + decay * r)`.
    pub decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { local_iterations: 10, batch_policy: BatchPolicy::DatasetOverH, learning_rate: 0.1, decay: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub epsilon1: f64,
    pub epsilon2: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { epsilon1: t.epsilon1, epsilon2: t.epsilon2 }
    }
}

/// Inputs of the `validate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub dim: usize,
    pub samples: usize,
    pub nodes: usize,
    pub local_iterations: usize,
    pub rounds: usize,
    pub seeds: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { dim: 5, samples: 400, nodes: 4, local_iterations: 5, rounds: 50, seeds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rounds: usize,
    pub scheme: Scheme,
    /// Stop once test accuracy reaches this; `None` runs every round.
    pub target_accuracy: Option<f64>,
    pub output: String,
    pub constellation: ConstellationConfig,
    pub site: SiteConfig,
    pub coverage: CoverageConfig,
    pub nodes: NodeConfig,
    pub links: LinkConfig,
    pub data: DataConfig,
    pub partition: PartitionConfig,
    pub train: TrainConfig,
    pub optimizer: OptimizerConfig,
    pub validate: ValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            rounds: 500,
            scheme: Scheme::Proposed,
            target_accuracy: Some(0.9),
            output: "out".into(),
            constellation: Default::default(),
            site: Default::default(),
            coverage: Default::default(),
            nodes: Default::default(),
            links: Default::default(),
            data: Default::default(),
            partition: Default::default(),
            train: Default::default(),
            optimizer: Default::default(),
            validate: Default::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let n = &self.nodes;
        if n.devices == 0 || n.air_nodes == 0 || !n.devices.is_multiple_of(n.air_nodes) {
            bail!("devices ({}) must be a positive multiple of air nodes ({})", n.devices, n.air_nodes);
        }
        if self.rounds == 0 {
            bail!("rounds must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.partition.alpha) {
            bail!("alpha must lie in [0, 1]");
        }
        if !(n.sat_cpu_min_hz > 0.0 && n.sat_cpu_max_hz >= n.sat_cpu_min_hz) {
            bail!("satellite CPU range must be positive and ordered");
        }
        if self.train.local_iterations == 0 || self.train.learning_rate.is_nan() || self.train.learning_rate <= 0.0 {
            bail!("training needs H >= 1 and a positive learning rate");
        }
        if self.data.train < n.devices {
            bail!("fewer training samples than devices");
        }
        self.shell().validate()?;
        self.ground_site().validate()?;
        Ok(())
    }

    pub fn shell(&self) -> OrbitalShell {
        let c = &self.constellation;
        OrbitalShell {
            satellite_count: c.satellite_count,
            plane_count: c.plane_count,
            altitude: c.altitude_km * 1e3,
            inclination: c.inclination_deg.to_radians(),
            phasing_offset: c.phasing,
            epoch: c.epoch_s,
        }
    }

    pub fn ground_site(&self) -> GroundSite {
        GroundSite {
            latitude: self.site.latitude_deg.to_radians(),
            longitude: self.site.longitude_deg.to_radians(),
            min_elevation: self.site.min_elevation_deg.to_radians(),
        }
    }

    pub fn blob_spec(&self) -> BlobSpec {
        let d = &self.data;
        BlobSpec { classes: d.classes, dim: d.dim, train: d.train, test: d.test, separation: d.separation, noise: d.noise, scale_spread: d.scale_spread }
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        let p = &self.partition;
        PartitionSpec { mode: p.mode, shard_count: p.shard_count, shards_per_device: p.shards_per_device, alpha: p.alpha }
    }

    pub fn local_train(&self) -> LocalTrainConfig {
        LocalTrainConfig { local_iterations: self.train.local_iterations, batch_policy: self.train.batch_policy }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances { epsilon1: self.optimizer.epsilon1, epsilon2: self.optimizer.epsilon2 }
    }

    pub fn learning_rate(&self, round: usize) -> f64 {
        self.train.learning_rate / (1.0 + self.train.decay * round as f64)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
