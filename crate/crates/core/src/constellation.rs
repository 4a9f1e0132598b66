//! Walker-Star constellation geometry and coverage windows.
//!
//! Orbits are circular two-body Keplerian orbits; the Earth is a sphere
//! rotating at the sidereal rate. That is enough to reproduce first-order
//! pass geometry and keeps every quantity checkable in closed form.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::math::{acos, asin, cos, sin, sqrt};

/// Standard gravitational parameter of the Earth, m^3/s^2.
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Equatorial radius, m. Used as the radius of the spherical Earth.
pub const EARTH_RADIUS: f64 = 6_378_137.0;
/// Sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_9e-5;

/// Refinement tolerance for window edges, seconds.
pub const EDGE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrbitalShell {
    pub satellite_count: usize,
    pub plane_count: usize,
    /// Altitude above the spherical Earth, meters.
    pub altitude: f64,
    /// Radians.
    pub inclination: f64,
    /// Walker phasing factor `F`.
    pub phasing_offset: usize,
    /// Seconds since the Earth-rotation reference (zero Greenwich angle).
    pub epoch: f64,
}

impl OrbitalShell {
    pub fn validate(&self) -> Result<()> {
        if self.plane_count == 0 || self.satellite_count == 0 {
            return Err(Error::Config("constellation needs at least one plane and one satellite"));
        }
        if !self.satellite_count.is_multiple_of(self.plane_count) {
            return Err(Error::Config("satellite count must be divisible by plane count"));
        }
        if !(self.altitude > 0.0) {
            return Err(Error::Config("altitude must be positive"));
        }
        if !(0.0..=PI).contains(&self.inclination) {
            return Err(Error::Config("inclination must lie in [0, pi]"));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        EARTH_RADIUS + self.altitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundSite {
    pub latitude: f64,
    pub longitude: f64,
    pub min_elevation: f64,
}

impl GroundSite {
    pub fn validate(&self) -> Result<()> {
        if crate::math::abs(self.latitude) > PI / 2.0 {
            return Err(Error::Config("latitude must lie in [-pi/2, pi/2]"));
        }
        if !(self.min_elevation > 0.0 && self.min_elevation < PI / 2.0) {
            return Err(Error::Config("minimum elevation must lie in (0, pi/2)"));
        }
        Ok(())
    }

    /// Position in the inertial frame at `t` seconds after `epoch`.
    fn position(&self, epoch: f64, t: f64) -> [f64; 3] {
        let theta = self.longitude + EARTH_ROTATION_RATE * (epoch + t);
        let c = cos(self.latitude);
        [
            EARTH_RADIUS * c * cos(theta),
            EARTH_RADIUS * c * sin(theta),
            EARTH_RADIUS * sin(self.latitude),
        ]
    }
}

/// Circular-orbit element set of one satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrbitalElements {
    pub satellite_id: usize,
    pub plane: usize,
    /// Right ascension of the ascending node, radians.
    pub raan: f64,
    pub inclination: f64,
    /// Orbital radius, meters.
    pub radius: f64,
    /// Argument of latitude at the shell epoch, radians.
    pub anomaly: f64,
    pub epoch: f64,
}

impl OrbitalElements {
    pub fn mean_motion(&self) -> f64 {
        sqrt(EARTH_MU / (self.radius * self.radius * self.radius))
    }

    /// Inertial position `t` seconds after the epoch.
    pub fn position(&self, t: f64) -> [f64; 3] {
        let u = self.anomaly + self.mean_motion() * t;
        let (su, cu) = (sin(u), cos(u));
        let (so, co) = (sin(self.raan), cos(self.raan));
        let (si, ci) = (sin(self.inclination), cos(self.inclination));
        [
            self.radius * (cu * co - su * ci * so),
            self.radius * (cu * so + su * ci * co),
            self.radius * su * si,
        ]
    }
}

/// Walker-Star layout: planes spread over 180 degrees of right ascension,
/// satellites evenly phased within each plane, adjacent planes offset by
/// `F * 360 / T` degrees.
pub fn build_walker_star(shell: &OrbitalShell) -> Result<Vec<OrbitalElements>> {
    shell.validate()?;
    let per_plane = shell.satellite_count / shell.plane_count;
    let total = shell.satellite_count as f64;
    let mut out = Vec::with_capacity(shell.satellite_count);
    for plane in 0..shell.plane_count {
        let raan = plane as f64 * PI / shell.plane_count as f64;
        let plane_phase = plane as f64 * shell.phasing_offset as f64 * TAU / total;
        for slot in 0..per_plane {
            let anomaly = (slot as f64 * TAU / per_plane as f64 + plane_phase) % TAU;
            out.push(OrbitalElements {
                satellite_id: plane * per_plane + slot,
                plane,
                raan,
                inclination: shell.inclination,
                radius: shell.radius(),
                anomaly,
                epoch: shell.epoch,
            });
        }
    }
    Ok(out)
}

/// Elevation of the satellite above the site's local horizon, radians.
pub fn elevation(sat: &OrbitalElements, site: &GroundSite, t: f64) -> f64 {
    let r = sat.position(t);
    let s = site.position(sat.epoch, t);
    let rho = [r[0] - s[0], r[1] - s[1], r[2] - s[2]];
    let range = sqrt(rho[0] * rho[0] + rho[1] * rho[1] + rho[2] * rho[2]);
    let up = (rho[0] * s[0] + rho[1] * s[1] + rho[2] * s[2]) / (EARTH_RADIUS * range);
    asin(up.clamp(-1.0, 1.0))
}

/// Slant range from a point `height` meters above the site to the satellite.
pub fn slant_range(sat: &OrbitalElements, site: &GroundSite, height: f64, t: f64) -> f64 {
    let r = sat.position(t);
    let s = site.position(sat.epoch, t);
    let k = (EARTH_RADIUS + height) / EARTH_RADIUS;
    let d = [r[0] - k * s[0], r[1] - k * s[1], r[2] - k * s[2]];
    sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

/// Earth central angle between the sub-satellite point and a site at which
/// a satellite at `radius` sits exactly at `min_elevation`.
pub fn coverage_half_angle(radius: f64, min_elevation: f64) -> f64 {
    acos(EARTH_RADIUS * cos(min_elevation) / radius) - min_elevation
}

fn central_angle(sat: &OrbitalElements, site: &GroundSite, t: f64) -> f64 {
    let r = sat.position(t);
    let s = site.position(sat.epoch, t);
    let c = (r[0] * s[0] + r[1] * s[1] + r[2] * s[2]) / (sat.radius * EARTH_RADIUS);
    acos(c.clamp(-1.0, 1.0))
}

/// A maximal interval during which one satellite is above the minimum
/// elevation. `*_clipped` marks edges cut by the search horizon rather than
/// by an actual horizon crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageWindow {
    pub satellite_id: usize,
    pub t_enter: f64,
    pub t_exit: f64,
    pub enter_clipped: bool,
    pub exit_clipped: bool,
}

impl CoverageWindow {
    pub fn duration(&self) -> f64 {
        self.t_exit - self.t_enter
    }
}

fn refine_crossing<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    // g(lo) and g(hi) have opposite signs.
    let rising = g(lo) < 0.0;
    while hi - lo > EDGE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Coverage windows of `sat` over `[start, start + horizon]`.
pub fn satellite_windows(
    sat: &OrbitalElements,
    site: &GroundSite,
    start: f64,
    horizon: f64,
    step: f64,
) -> Vec<CoverageWindow> {
    let g = |t: f64| elevation(sat, site, t) - site.min_elevation;
    let end = start + horizon;
    let half_angle = coverage_half_angle(sat.radius, site.min_elevation);
    // Upper bound on how fast the sub-satellite point moves relative to the
    // rotating site; lets us skip stretches where a pass is impossible.
    let max_rate = sat.mean_motion() + EARTH_ROTATION_RATE;

    let mut windows = Vec::new();
    let mut t = start;
    let mut visible = g(t) >= 0.0;
    let mut open: Option<(f64, bool)> = if visible { Some((t, true)) } else { None };
    while t < end {
        let mut dt = step;
        if !visible {
            let gap = central_angle(sat, site, t) - half_angle;
            if gap > 0.0 {
                let skip = crate::math::floor(gap / max_rate / step) * step;
                if skip > step {
                    dt = skip;
                }
            }
        }
        let next = if t + dt >= end { end } else { t + dt };
        let now_visible = g(next) >= 0.0;
        if now_visible != visible {
            let edge = refine_crossing(g, t, next);
            if now_visible {
                open = Some((edge, false));
            } else if let Some((enter, clipped)) = open.take() {
                windows.push(CoverageWindow {
                    satellite_id: sat.satellite_id,
                    t_enter: enter,
                    t_exit: edge,
                    enter_clipped: clipped,
                    exit_clipped: false,
                });
            }
            visible = now_visible;
        }
        t = next;
    }
    if let Some((enter, clipped)) = open {
        windows.push(CoverageWindow {
            satellite_id: sat.satellite_id,
            t_enter: enter,
            t_exit: end,
            enter_clipped: clipped,
            exit_clipped: true,
        });
    }
    windows
}

/// All coverage windows over `[0, horizon]`, sorted by entry time.
pub fn coverage_windows(
    elements: &[OrbitalElements],
    site: &GroundSite,
    horizon: f64,
    step: f64,
) -> Result<Vec<CoverageWindow>> {
    coverage_windows_between(elements, site, 0.0, horizon, step)
}

pub fn coverage_windows_between(
    elements: &[OrbitalElements],
    site: &GroundSite,
    start: f64,
    horizon: f64,
    step: f64,
) -> Result<Vec<CoverageWindow>> {
    if !(horizon > 0.0) || !(step > 0.0) {
        return Err(Error::Config("horizon and step must be positive"));
    }
    let mut all: Vec<CoverageWindow> = elements
        .iter()
        .flat_map(|sat| satellite_windows(sat, site, start, horizon, step))
        .collect();
    sort_windows(&mut all);
    Ok(all)
}

pub fn sort_windows(windows: &mut [CoverageWindow]) {
    windows.sort_by(|a, b| {
        a.t_enter
            .total_cmp(&b.t_enter)
            .then(a.satellite_id.cmp(&b.satellite_id))
    });
}

/// One serving satellite in a round's handover chain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SatellitePass {
    pub satellite_id: usize,
    pub t_enter: f64,
    pub t_exit: f64,
    /// Time from round start until the satellite leaves coverage. Infinite
    /// when it stays past the known horizon.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_inf"))]
    pub time_to_exit: f64,
    pub cpu_rate: f64,
    pub cycles_per_sample: f64,
    /// Inter-satellite link rate to the next satellite in the chain, bit/s.
    pub isl_rate_to_next: f64,
}

/// Slack allowed between one satellite leaving and the next being visible.
pub const HANDOVER_TOLERANCE: f64 = 2.0 * EDGE_TOLERANCE;

/// Serving chain for one round, cut short at the first coverage gap.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassChain {
    pub passes: Vec<SatellitePass>,
    /// `(from, to)` of the first interval with no serving satellite, if any.
    pub gap: Option<(f64, f64)>,
}

/// Builds the chain of serving satellites from `round_start` on, stopping
/// at the first gap in coverage.
///
/// At every handover point the visible satellite that stays longest is
/// picked. `cpu_sampler` is called once per chosen pass.
pub fn pass_chain<F>(
    windows: &[CoverageWindow],
    round_start: f64,
    cycles_per_sample: f64,
    mut cpu_sampler: F,
    isl_rate: f64,
) -> PassChain
where
    F: FnMut(&CoverageWindow) -> f64,
{
    let mut passes = Vec::new();
    let mut t = round_start;
    loop {
        let best = windows
            .iter()
            .filter(|w| w.t_enter <= t + HANDOVER_TOLERANCE && w.t_exit > t)
            .max_by(|a, b| a.t_exit.total_cmp(&b.t_exit));
        let Some(w) = best else {
            let next = windows
                .iter()
                .filter(|w| w.t_enter > t)
                .map(|w| w.t_enter)
                .fold(f64::INFINITY, f64::min);
            return PassChain { passes, gap: Some((t, next)) };
        };
        let time_to_exit = if w.exit_clipped {
            f64::INFINITY
        } else {
            w.t_exit - round_start
        };
        passes.push(SatellitePass {
            satellite_id: w.satellite_id,
            t_enter: w.t_enter,
            t_exit: w.t_exit,
            time_to_exit,
            cpu_rate: cpu_sampler(w),
            cycles_per_sample,
            isl_rate_to_next: isl_rate,
        });
        if w.exit_clipped {
            return PassChain { passes, gap: None };
        }
        t = w.t_exit;
    }
}

/// Like [`pass_chain`] but a gap anywhere in the chain is an error.
pub fn pass_sequence<F>(
    windows: &[CoverageWindow],
    round_start: f64,
    cycles_per_sample: f64,
    cpu_sampler: F,
    isl_rate: f64,
) -> Result<Vec<SatellitePass>>
where
    F: FnMut(&CoverageWindow) -> f64,
{
    let chain = pass_chain(windows, round_start, cycles_per_sample, cpu_sampler, isl_rate);
    match chain.gap {
        Some((from, to)) => Err(Error::CoverageGap { from, to }),
        None => Ok(chain.passes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn deg(x: f64) -> f64 {
        x.to_radians()
    }

    fn shell(sats: usize, planes: usize) -> OrbitalShell {
        OrbitalShell {
            satellite_count: sats,
            plane_count: planes,
            altitude: 800e3,
            inclination: deg(85.0),
            phasing_offset: 1,
            epoch: 0.0,
        }
    }

    #[test]
    fn walker_star_80_over_5_planes() {
        let els = build_walker_star(&shell(80, 5)).unwrap();
        assert_eq!(els.len(), 80);
        for (p, expected) in [0.0, 36.0, 72.0, 108.0, 144.0].iter().enumerate() {
            let plane: Vec<_> = els.iter().filter(|e| e.plane == p).collect();
            assert_eq!(plane.len(), 16);
            for e in plane {
                assert_relative_eq!(e.raan, deg(*expected), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_single_satellite() {
        let els = build_walker_star(&shell(1, 1)).unwrap();
        assert_eq!(els.len(), 1);
        assert_eq!(els[0].anomaly, 0.0);
    }

    #[test]
    fn eight_over_two_spacing() {
        let els = build_walker_star(&shell(8, 2)).unwrap();
        assert_relative_eq!(els[1].anomaly - els[0].anomaly, deg(90.0), epsilon = 1e-12);
        assert_relative_eq!(els[4].raan - els[0].raan, deg(90.0), epsilon = 1e-12);
    }

    #[test]
    fn non_divisible_count_rejected() {
        assert!(matches!(build_walker_star(&shell(7, 2)), Err(Error::Config(_))));
    }

    #[test]
    fn equatorial_satellite_never_reaches_polar_site() {
        let mut s = shell(1, 1);
        s.inclination = 0.0;
        let els = build_walker_star(&s).unwrap();
        let site = GroundSite {
            latitude: deg(90.0),
            longitude: 0.0,
            min_elevation: deg(90.0) - 1e-6,
        };
        let w = coverage_windows(&els, &site, 86_400.0, 1.0).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn single_pass_covering_horizon_is_infinite() {
        let w = [CoverageWindow {
            satellite_id: 3,
            t_enter: 0.0,
            t_exit: 100.0,
            enter_clipped: true,
            exit_clipped: true,
        }];
        let seq = pass_sequence(&w, 10.0, 3e9, |_| 1e9, 3.125e6).unwrap();
        assert_eq!(seq.len(), 1);
        assert!(seq[0].time_to_exit.is_infinite());
        assert_eq!(seq[0].cpu_rate, 1e9);
    }

    #[test]
    fn gap_is_reported_with_interval() {
        let w = [
            CoverageWindow { satellite_id: 0, t_enter: 0.0, t_exit: 50.0, enter_clipped: true, exit_clipped: false },
            CoverageWindow { satellite_id: 1, t_enter: 80.0, t_exit: 200.0, enter_clipped: false, exit_clipped: true },
        ];
        match pass_sequence(&w, 0.0, 3e9, |_| 1e9, 1.0) {
            Err(Error::CoverageGap { from, to }) => {
                assert_eq!(from, 50.0);
                assert_eq!(to, 80.0);
            }
            other => panic!("expected gap, got {other:?}"),
        }
    }

    #[test]
    fn chain_picks_longest_staying_satellite() {
        let w = [
            CoverageWindow { satellite_id: 0, t_enter: 0.0, t_exit: 50.0, enter_clipped: true, exit_clipped: false },
            CoverageWindow { satellite_id: 1, t_enter: 10.0, t_exit: 120.0, enter_clipped: false, exit_clipped: false },
            CoverageWindow { satellite_id: 2, t_enter: 30.0, t_exit: 60.0, enter_clipped: false, exit_clipped: false },
            CoverageWindow { satellite_id: 3, t_enter: 100.0, t_exit: 300.0, enter_clipped: false, exit_clipped: true },
        ];
        let seq = pass_sequence(&w, 20.0, 3e9, |_| 2e9, 1.0).unwrap();
        let ids: Vec<_> = seq.iter().map(|p| p.satellite_id).collect();
        assert_eq!(ids, [1, 3]);
        assert_eq!(seq[0].time_to_exit, 100.0);
    }
}
