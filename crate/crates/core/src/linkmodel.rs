//! Communication rates and transfer delays.
//!
//! Access links (ground-to-air, air-to-satellite and their downlink
//! counterparts) use a distance-based channel power gain `beta0 * d^-gamma`.
//! In Rayleigh mode the rate is the expectation over an exponentially
//! distributed fading power, evaluated by composite Gauss-Legendre
//! quadrature so latency stays a deterministic function of geometry.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, cos, log2_1p, powf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ChannelMode {
    #[default]
    RayleighExpectation,
    FreeSpace,
}

/// Parameters of one access link.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkParams {
    /// Hz.
    pub bandwidth: f64,
    /// W/Hz.
    pub noise_density: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Channel power gain at 1 m (linear).
    pub reference_gain: f64,
    pub pathloss_exponent: f64,
    /// Meters.
    pub distance: f64,
    pub channel_mode: ChannelMode,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.bandwidth,
            self.noise_density,
            self.tx_gain,
            self.rx_gain,
            self.reference_gain,
            self.distance,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("link parameters must be positive"));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::Config("path-loss exponent must be at least 2"));
        }
        Ok(())
    }

    pub fn with_distance(mut self, distance: f64) -> Self {
        self.distance = distance;
        self
    }

    /// Average received SNR for transmit power `power` (watts).
    pub fn mean_snr(&self, power: f64) -> f64 {
        let gain = self.reference_gain * powf(self.distance, -self.pathloss_exponent);
        power * self.tx_gain * self.rx_gain * gain / (self.bandwidth * self.noise_density)
    }
}

/// Inter-satellite link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IslParams {
    pub bandwidth: f64,
    pub noise_density: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Free-space path loss between the two satellites (linear, >= 1).
    pub free_space_loss: f64,
}

/// Model and per-sample payload sizes, bits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PayloadSizes {
    pub model_bits: f64,
    pub sample_bits: f64,
}

impl PayloadSizes {
    /// 32-bit parameters; samples are `feature_dim` 32-bit features plus an
    /// 8-bit label.
    pub fn for_model(parameter_count: usize, feature_dim: usize) -> Self {
        Self {
            model_bits: parameter_count as f64 * 32.0,
            sample_bits: feature_dim as f64 * 32.0 + 8.0,
        }
    }
}

/// `B log2(1 + p A_tx A_rx / (C N0))`, implemented as written (the SNR term
/// carries no bandwidth factor).
pub fn isl_rate(params: &IslParams, tx_power: f64) -> f64 {
    let snr = tx_power * params.tx_gain * params.rx_gain / (params.free_space_loss * params.noise_density);
    params.bandwidth * log2_1p(snr)
}

/// Uplink rate from a ground device to its air node.
pub fn g2a_rate(params: &LinkParams, tx_power: f64) -> f64 {
    access_rate(params, tx_power)
}

/// Uplink rate from an air node to the serving satellite.
pub fn a2s_rate(params: &LinkParams, tx_power: f64) -> f64 {
    access_rate(params, tx_power)
}

/// Rate of an access link in either channel mode.
pub fn access_rate(params: &LinkParams, tx_power: f64) -> f64 {
    if !(tx_power > 0.0) {
        return 0.0;
    }
    let snr = params.mean_snr(tx_power);
    match params.channel_mode {
        ChannelMode::FreeSpace => params.bandwidth * log2_1p(snr),
        ChannelMode::RayleighExpectation => params.bandwidth * rayleigh_expected_log2(snr),
    }
}

/// `tau = bits / rate`. Zero bits cost nothing even over a dead link.
pub fn transfer_delay(bits: f64, rate: f64) -> Result<f64> {
    if bits == 0.0 {
        return Ok(0.0);
    }
    if !(rate > 0.0) {
        return Err(Error::InfeasibleLink { bits });
    }
    Ok(bits / rate)
}

/// Delay used inside the latency algebra: infinite over a dead link.
#[inline]
pub(crate) fn delay(bits: f64, rate: f64) -> f64 {
    if bits <= 0.0 {
        0.0
    } else {
        bits / rate
    }
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if abs(dx) < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Nodes per panel of the composite rule.
pub const QUADRATURE_NODES: usize = 64;

/// `E[log2(1 + snr * X)]` with `X ~ Exp(1)`.
///
/// Panels grow geometrically from a first panel scaled to `1/snr`, which keeps
/// the log singularity at `-1/snr` well separated from every panel.
pub fn rayleigh_expected_log2(snr: f64) -> f64 {
    if !(snr > 0.0) {
        return 0.0;
    }
    let rule = GaussLegendre::new(QUADRATURE_NODES);
    let f = |x: f64| log2_1p(snr * x) * crate::math::exp(-x);
    let mut a = 0.0;
    let mut b = 0.25 * (1.0f64).min(1.0 / snr);
    let mut total = 0.0;
    while a < 64.0 {
        total += rule.integrate(a, b, f);
        a = b;
        b *= 4.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn link(mode: ChannelMode) -> LinkParams {
        LinkParams {
            bandwidth: 1e6,
            noise_density: 1e-6,
            tx_gain: 1.0,
            rx_gain: 1.0,
            reference_gain: 1.0,
            pathloss_exponent: 2.0,
            distance: 1.0,
            channel_mode: mode,
        }
    }

    #[test]
    fn zero_power_zero_rate() {
        let isl = IslParams { bandwidth: 1e6, noise_density: 1e-20, tx_gain: 1.0, rx_gain: 1.0, free_space_loss: 1e18 };
        assert_eq!(isl_rate(&isl, 0.0), 0.0);
        assert_eq!(g2a_rate(&link(ChannelMode::FreeSpace), 0.0), 0.0);
        assert_eq!(g2a_rate(&link(ChannelMode::RayleighExpectation), 0.0), 0.0);
    }

    #[test]
    fn isl_unit_snr_gives_bandwidth() {
        let isl = IslParams { bandwidth: 1e6, noise_density: 2e-20, tx_gain: 1.0, rx_gain: 1.0, free_space_loss: 5e19 };
        assert_relative_eq!(isl_rate(&isl, 1.0), 1e6, max_relative = 1e-12);
    }

    #[test]
    fn free_space_snr_three() {
        // p / (b N0) = 3 with unit gain and unit distance.
        let rate = g2a_rate(&link(ChannelMode::FreeSpace), 3.0);
        assert_relative_eq!(rate, 2e6, max_relative = 1e-12);
    }

    #[test]
    fn transfer_delay_cases() {
        assert_eq!(transfer_delay(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(transfer_delay(3.125e6, 3.125e6).unwrap(), 1.0);
        assert!(matches!(transfer_delay(1.0, 0.0), Err(Error::InfeasibleLink { .. })));
        let handover = transfer_delay(1e6 + 6.4e3 * 1e3, 3.125e6).unwrap();
        assert_relative_eq!(handover, 2.368, max_relative = 1e-12);
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let rule = GaussLegendre::new(64);
        assert_relative_eq!(rule.integrate(0.0, 2.0, |x| x * x * x), 4.0, max_relative = 1e-13);
        assert_relative_eq!(rule.integrate(-1.0, 1.0, |_| 1.0), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn invalid_exponent_rejected() {
        let mut p = link(ChannelMode::FreeSpace);
        p.pathloss_exponent = 1.5;
        assert!(p.validate().is_err());
    }
}
