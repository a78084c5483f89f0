use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use macol_core::analytic::{HighwayGeometry, Lane};
use macol_core::channel::InterferenceMode;
use macol_core::geometry::{departure, BeamSector};
use macol_core::simulator::{run, transit_decomposition, MetricsReport, Policy, SimConfig, BEAM_RADIUS_M};

fn short(policy: Policy, vehicles: usize) -> SimConfig {
    SimConfig {
        policy,
        vehicle_count: vehicles,
        sim_duration_s: 300.0,
        exploration_s: 120.0,
        warmup_s: 30.0,
        ..SimConfig::default()
    }
}

fn check_invariants(r: &MetricsReport) {
    let cfg = &r.config;
    let total_ticks: u64 = r.windows.iter().map(|w| w.ticks.total()).sum();
    assert_eq!(total_ticks, cfg.vehicle_count as u64 * r.ticks);
    let per_window = (cfg.window_s / cfg.dt).round() as u64;
    assert_eq!(r.windows.len() as u64, r.ticks.div_ceil(per_window));
    for (j, w) in r.windows.iter().enumerate() {
        assert_eq!(w.start_time, j as f64 * cfg.window_s);
        if (j as u64 + 1) * per_window <= r.ticks {
            assert_eq!(w.ticks.total(), cfg.vehicle_count as u64 * per_window);
        }
    }
    for t in &r.transits {
        let expected = (t.end_time - t.start_time) / cfg.dt;
        assert!((t.ticks.total() as f64 - expected).abs() <= 1.0 + 1e-9, "{t:?}");
        let (s, i, o) = transit_decomposition(t);
        assert!((s + i + o - 1.0).abs() < 1e-12);
    }
    let mut by_vehicle: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut by_slot: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for c in &r.connections {
        assert!(c.clean_distance <= 2.0 * BEAM_RADIUS_M);
        assert!(c.clean_distance <= c.travelled + 1e-9);
        assert!(c.interfered_time <= c.duration + 1e-9);
        assert!(c.bits >= 0.0);
        let span = (c.start_time, c.start_time + c.duration);
        by_vehicle.entry(c.vehicle_id).or_default().push(span);
        by_slot.entry((c.beam, c.band)).or_default().push(span);
    }
    for spans in by_vehicle.values_mut().chain(by_slot.values_mut()) {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in spans.windows(2) {
            assert!(w[1].0 >= w[0].1 - 1e-9, "overlapping connections {w:?}");
        }
    }
}

#[test]
fn zero_vehicles_never_connect() {
    let r = run(&short(Policy::Macol, 0)).unwrap();
    assert!(r.connections.is_empty());
    assert!(r.transits.is_empty());
    assert_eq!(r.signaling.pushes, 0);
    assert!(r.beams.iter().all(|b| b.connected_ticks == 0));
}

#[test]
fn runs_keep_their_invariants() {
    for policy in Policy::ALL {
        for (mode, bands) in [(InterferenceMode::Geometric, 1), (InterferenceMode::Practical, 2)] {
            let cfg = SimConfig {
                mode,
                band_count: bands,
                ..short(policy, 20)
            };
            let r = run(&cfg).unwrap();
            assert!(!r.connections.is_empty());
            check_invariants(&r);
            if policy == Policy::Macol {
                let open = r.signaling.pushes - 2 * r.connections.len() as u64;
                assert!(open <= (r.beams.len() * bands) as u64);
                assert!(r.beams.iter().all(|b| b.contexts <= 32));
            } else {
                assert_eq!(r.signaling.pushes, 0);
            }
        }
    }
}

#[test]
fn same_seed_same_report() {
    let cfg = short(Policy::Macol, 16);
    assert_eq!(run(&cfg).unwrap().to_json(), run(&cfg).unwrap().to_json());
    let other = SimConfig { seed: 2, ..cfg.clone() };
    assert_ne!(run(&cfg).unwrap().to_json(), run(&other).unwrap().to_json());
}

#[test]
fn lone_beam_serves_whole_chords() {
    let beam = BeamSector::new(0, 250.0, -5.0, FRAC_PI_2, 80.0, FRAC_PI_3).unwrap();
    let lanes = vec![
        Lane { offset: 10.0, heading: 0.0 },
        Lane { offset: 10.0, heading: PI },
    ];
    let cfg = SimConfig {
        beams: vec![beam],
        highway: HighwayGeometry::new(500.0, 20.0, lanes).unwrap(),
        policy: Policy::Random,
        vehicle_count: 2,
        sim_duration_s: 2000.0,
        monitored_beam: 0,
        ..SimConfig::default()
    };
    let r = run(&cfg).unwrap();
    let entry = beam.polar_of(250.0 - 15.0 * (FRAC_PI_3 / 2.0).tan(), 10.0);
    let chord = departure(&beam, entry, 0.0).unwrap().distance;
    assert!((chord - 30.0 * (FRAC_PI_3 / 2.0).tan()).abs() < 1e-6);
    let step = cfg.speed_max_kmh / 3.6 * cfg.dt;
    let full = r
        .connections
        .iter()
        .filter(|c| c.start_time > 1.0)
        .inspect(|c| {
            assert!(c.travelled <= chord + step + 1e-9);
            assert_eq!(c.clean_distance, c.travelled);
        })
        .filter(|c| (c.travelled - chord).abs() <= step)
        .count();
    let n = r.connections.iter().filter(|c| c.start_time > 1.0).count();
    assert!(n > 100);
    assert!(full as f64 >= 0.9 * n as f64, "{full}/{n}");
    assert_eq!(r.exploitation.interference, 0);
}
