//! Lazily extended coverage windows, shared between runs.

use std::sync::Mutex;

use anyhow::Result;
use sagin_core::constellation::{
    build_walker_star, coverage_windows_between, pass_chain, sort_windows, CoverageWindow, GroundSite, OrbitalElements,
    PassChain,
};
use sagin_core::rng::{derive_seed, purpose};

use crate::config::ExperimentConfig;

#[derive(Debug)]
struct Computed {
    windows: Vec<CoverageWindow>,
    until: f64,
}

/// Coverage windows of the configured constellation, computed chunk by
/// chunk as simulated time advances. Windows cut by a chunk boundary are
/// stitched back together.
#[derive(Debug)]
pub struct CoverageCache {
    elements: Vec<OrbitalElements>,
    site: GroundSite,
    step: f64,
    chunk: f64,
    lookahead: f64,
    inner: Mutex<Computed>,
}

impl CoverageCache {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let elements = build_walker_star(&cfg.shell())?;
        Ok(Self {
            elements,
            site: cfg.ground_site(),
            step: cfg.coverage.step_s,
            chunk: cfg.coverage.chunk_s,
            lookahead: cfg.coverage.lookahead_s,
            inner: Mutex::new(Computed { windows: Vec::new(), until: 0.0 }),
        })
    }

    pub fn elements(&self) -> &[OrbitalElements] {
        &self.elements
    }

    pub fn site(&self) -> &GroundSite {
        &self.site
    }

    /// Windows overlapping `[t, t + lookahead]`, computing more if needed.
    pub fn windows_from(&self, t: f64) -> Result<Vec<CoverageWindow>> {
        let end = t + self.lookahead;
        let mut inner = self.inner.lock().expect("coverage cache poisoned");
        while inner.until < end {
            let start = inner.until;
            let fresh = coverage_windows_between(&self.elements, &self.site, start, self.chunk, self.step)?;
            for w in fresh {
                if w.enter_clipped && start > 0.0 {
                    let open = inner.windows.iter_mut().rev().find(|o| o.satellite_id == w.satellite_id && o.exit_clipped);
                    if let Some(o) = open {
                        o.t_exit = w.t_exit;
                        o.exit_clipped = w.exit_clipped;
                        continue;
                    }
                }
                inner.windows.push(w);
            }
            sort_windows(&mut inner.windows);
            inner.until = start + self.chunk;
        }
        Ok(inner.windows.iter().filter(|w| w.t_exit > t && w.t_enter <= end).copied().collect())
    }
}

/// Deterministic satellite CPU frequency for one pass.
pub fn pass_cpu(seed: u64, window: &CoverageWindow, min_hz: f64, max_hz: f64) -> f64 {
    let key = (window.t_enter * 1e3).round() as i64 as u64;
    let h = derive_seed(seed, purpose::CPU, window.satellite_id as u64, key);
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    min_hz + (max_hz - min_hz) * u
}

/// Serving chain from `t` with hashed CPU frequencies.
pub fn serving_chain(cache: &CoverageCache, cfg: &ExperimentConfig, t: f64) -> Result<PassChain> {
    let windows = cache.windows_from(t)?;
    let n = &cfg.nodes;
    Ok(pass_chain(
        &windows,
        t,
        n.cycles_per_sample,
        |w| pass_cpu(cfg.seed, w, n.sat_cpu_min_hz, n.sat_cpu_max_hz),
        cfg.links.isl_rate_bps,
    ))
}
