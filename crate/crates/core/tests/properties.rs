mod common;

use common::{random_passes, random_state, M};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_core::constellation::SatellitePass;
use sagin_core::latency::{
    case1_ground_delay, case2_air_local_delay, case2_ground_delay, round_latency_no_offload, round_latency_with_plan,
    space_layer_latency, HandoverPayload, SpaceLayerJob,
};
use sagin_core::ledger::{DatasetLedger, NodeId, SampleId};
use sagin_core::linkmodel::{rayleigh_expected_log2, transfer_delay, PayloadSizes};
use sagin_core::offload::{optimize_round, Direction, OffloadPlan, Tolerances};

const PAYLOAD: PayloadSizes = PayloadSizes { model_bits: 1e4, sample_bits: 1032.0 };

/// Independent fluid oracle: tracks outstanding CPU cycles and a clock.
fn space_oracle(samples: f64, passes: &[SatellitePass], payload: HandoverPayload) -> Option<(f64, usize)> {
    if samples <= 0.0 {
        return Some((0.0, 1));
    }
    let mut cycles_left = samples * M;
    let mut clock = 0.0;
    for (i, p) in passes.iter().enumerate() {
        let need = cycles_left / p.cpu_rate;
        if clock + need < p.time_to_exit {
            return Some((clock + need, i + 1));
        }
        let worked = ((p.time_to_exit - clock).max(0.0) * p.cpu_rate).min(cycles_left);
        cycles_left -= worked;
        let shipped = match payload {
            HandoverPayload::Full => samples,
            HandoverPayload::Remaining => cycles_left / M,
        };
        clock = p.time_to_exit + (PAYLOAD.model_bits + PAYLOAD.sample_bits * shipped) / p.isl_rate_to_next;
    }
    None
}

fn e1(x: f64) -> f64 {
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -0.577_215_664_901_532_9 - x.ln() - sum
    } else {
        // Modified Lentz on the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

fn closed_form(snr: f64) -> f64 {
    let inv = 1.0 / snr;
    if inv > 700.0 {
        // e^x E1(x) ~ 1/x for large x.
        return (1.0 / inv) * (1.0 - 1.0 / inv + 2.0 / (inv * inv)) / std::f64::consts::LN_2;
    }
    inv.exp() * e1(inv) / std::f64::consts::LN_2
}

fn state_ledger(state: &sagin_core::latency::RoundState) -> DatasetLedger {
    let mut next: SampleId = 0;
    let mut take = |n: f64| {
        let v: Vec<SampleId> = (next..next + n as SampleId).collect();
        next += n as SampleId;
        v
    };
    let mut sensitive = Vec::new();
    let mut offloadable = Vec::new();
    let mut cluster_of = Vec::new();
    for (n, c) in state.clusters.iter().enumerate() {
        for d in &c.devices {
            sensitive.push(take(d.sensitive));
            offloadable.push(take(d.samples - d.sensitive));
            cluster_of.push(n);
        }
    }
    let mut ledger = DatasetLedger::new(sensitive, offloadable, cluster_of, state.clusters.len());
    for (n, c) in state.clusters.iter().enumerate() {
        ledger.air[n] = take(c.air.samples);
    }
    ledger.space = take(state.space_samples);
    ledger
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn space_recursion_matches_event_oracle(seed in any::<u64>(), samples in 0u32..2000, remaining in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=6);
        let passes = random_passes(&mut rng, count);
        let payload = if remaining { HandoverPayload::Remaining } else { HandoverPayload::Full };
        let job = SpaceLayerJob { samples: samples as f64, passes: &passes, payload: PAYLOAD, handover_payload: payload };
        match (space_layer_latency(&job), space_oracle(samples as f64, &passes, payload)) {
            (Ok(s), Some((tau, idx))) => {
                prop_assert!((s.tau - tau).abs() <= 1e-9 * tau.max(1.0));
                prop_assert_eq!(s.finishing_pass, idx);
                let done: f64 = s.processed_per_pass.iter().sum();
                prop_assert!((done - samples as f64).abs() <= 1e-9 * (samples as f64).max(1.0));
            }
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a, b),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn space_latency_monotone_in_samples(seed in any::<u64>(), a in 0u32..3000, b in 0u32..3000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=5);
        let passes = random_passes(&mut rng, count);
        let (lo, hi) = (a.min(b) as f64, a.max(b) as f64);
        let tau = |d: f64| {
            let job = SpaceLayerJob { samples: d, passes: &passes, payload: PAYLOAD, handover_payload: HandoverPayload::Full };
            space_layer_latency(&job).map(|s| s.tau).unwrap_or(f64::INFINITY)
        };
        prop_assert!(tau(lo) <= tau(hi));
    }

    #[test]
    fn transfer_delay_is_linear(a in 0.0..1e9f64, b in 0.0..1e9f64, rate in 1.0..1e9f64) {
        let sum = transfer_delay(a + b, rate).unwrap();
        let parts = transfer_delay(a, rate).unwrap() + transfer_delay(b, rate).unwrap();
        prop_assert!((sum - parts).abs() <= 1e-12 * sum.max(1e-300));
    }

    #[test]
    fn zero_plan_reproduces_no_offload(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..4);
        let k = rng.gen_range(1..5);
        let state = random_state(&mut rng, n, k, 40.0);
        let base = round_latency_no_offload(&state);
        for dir in [Direction::SpaceToAirGround, Direction::AirGroundToSpace] {
            prop_assert_eq!(&round_latency_with_plan(&state, &OffloadPlan::zero(&state, dir)), &base);
        }
    }

    #[test]
    fn ground_delay_monotone_in_transfers(seed in any::<u64>(), x in 0.0..30.0f64, y in 0.0..30.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dev = common::random_device(&mut rng, 60.0);
        let (lo, hi) = (x.min(y), x.max(y));
        prop_assert!(case1_ground_delay(&dev, lo, 0.0, 1032.0) <= case1_ground_delay(&dev, hi, 0.0, 1032.0));
        let (lo, hi) = (lo.min(dev.offloadable()), hi.min(dev.offloadable()));
        prop_assert!(case2_ground_delay(&dev, hi, 1032.0) <= case2_ground_delay(&dev, lo, 1032.0) + 1e-9);
    }

    #[test]
    fn air_delay_nondecreasing_in_inflow(seed in any::<u64>(), x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&mut rng, 1, 3, 40.0);
        let c = &state.clusters[0];
        let caps: Vec<f64> = c.devices.iter().map(|d| d.offloadable()).collect();
        let (lo, hi) = (x.min(y), x.max(y));
        let g = |f: f64| caps.iter().map(|c| c * f).collect::<Vec<_>>();
        let a = |v: &[f64]| case2_air_local_delay(&c.air, 0.0, v, &c.devices, 1032.0);
        prop_assert!(a(&g(lo)) <= a(&g(hi)) + 1e-9);
    }

    #[test]
    fn ledger_conserves_and_respects_privacy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..4);
        let k = rng.gen_range(1..5);
        let state = random_state(&mut rng, n, k, 30.0);
        let ledger = state_ledger(&state);
        let opt = optimize_round(&state, Tolerances::default());
        let next = ledger.apply_plan(&opt.plan, &mut rng).unwrap();
        prop_assert_eq!(next.total(), ledger.total());
        prop_assert_eq!(next.privacy_violations(), 0);
        prop_assert_eq!(&next.sensitive, &ledger.sensitive);
        let mut all: Vec<SampleId> = next.nodes().into_iter().flat_map(|node| next.samples(node)).collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        prop_assert_eq!(all.len(), before);
        let space_real = match opt.plan.direction {
            Direction::SpaceToAirGround => state.space_samples - opt.plan.space_total(),
            Direction::AirGroundToSpace => state.space_samples + opt.plan.space_total(),
        };
        prop_assert!((next.len(NodeId::Space) as f64 - space_real).abs() <= n as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimizer_never_worse_and_within_budget(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..5);
        let k = rng.gen_range(1..6);
        let state = random_state(&mut rng, n, k, 60.0);
        let base = round_latency_no_offload(&state).tau_total;
        let opt = optimize_round(&state, Tolerances::default());
        prop_assert!(opt.latency.tau_total <= base * (1.0 + 1e-12) || base.is_infinite());
        prop_assert!(opt.trace.within_budget(), "{:?}", opt.trace);
        prop_assert!(opt.plan.validate(&state, 1e-6).is_ok());
        prop_assert_eq!(&opt.latency, &round_latency_with_plan(&state, &opt.plan));
        if opt.trace.gap_bound.is_finite() && !opt.trace.constrained && !opt.trace.saturated {
            prop_assert!(opt.trace.final_gap <= opt.trace.gap_bound * (1.0 + 1e-9) + 1e-9);
        }
    }
}

#[test]
fn rayleigh_expectation_below_jensen_on_grid() {
    let mut prev = 0.0;
    for i in 0..20 {
        let snr = 10f64.powf(-3.0 + 0.5 * i as f64);
        let e = rayleigh_expected_log2(snr);
        assert!(e <= (1.0 + snr).log2(), "snr {snr}");
        assert!(e > prev);
        prev = e;
    }
}

#[test]
fn rayleigh_expectation_matches_closed_form() {
    for i in 0..40 {
        let snr = 10f64.powf(-4.0 + 0.25 * i as f64);
        let got = rayleigh_expected_log2(snr);
        let want = closed_form(snr);
        assert!((got - want).abs() <= 1e-6 * want.max(1e-3), "snr {snr}: {got} vs {want}");
    }
}

#[test]
fn rayleigh_expectation_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 10_000_000;
    for snr in [0.1, 1.0, 30.0] {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let g: f64 = rng.sample(rand_distr::Exp1);
            let v = (1.0 + snr * g).log2();
            s += v;
            s2 += v * v;
        }
        let mean = s / draws as f64;
        let sd = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((rayleigh_expected_log2(snr) - mean).abs() <= 5.0 * sd, "snr {snr}");
    }
}
