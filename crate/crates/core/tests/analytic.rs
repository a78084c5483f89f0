use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use macol_core::analytic::{
    highway_service_cdf, interference_cdf, interference_cdf_family, interference_free_distance, monte_carlo_cdf,
    path_profile, service_cdf, uniform_grid, Layout, Quadrature,
};
use macol_core::channel::{ChannelParams, InterferenceMode};
use macol_core::geometry::{advance, departure, BeamSector, PolarPoint};
use macol_core::simulator::{classify_tick, reference_beams, reference_highway, MONITORED_BEAM};
use macol_core::agents::ContextVector;

#[test]
fn quadrature_converges() {
    let beam = BeamSector::new(0, 0.0, 0.0, FRAC_PI_2, 80.0, FRAC_PI_3).unwrap();
    let grid = uniform_grid(160.0, 41);
    let coarse = service_cdf(&beam, &grid, &Quadrature::square(50)).unwrap();
    let mid = service_cdf(&beam, &grid, &Quadrature::square(100)).unwrap();
    let fine = service_cdf(&beam, &grid, &Quadrature::square(200)).unwrap();
    let e1 = coarse.sup_distance(&fine);
    let e2 = mid.sup_distance(&fine);
    assert!(e2 < e1, "{e1} {e2}");
    assert!(e2 < 2e-3, "{e2}");
    assert!(fine.is_monotone());
    assert_eq!(fine.values[0], 0.0);
    assert!((fine.values[40] - 1.0).abs() < 1e-9);
}

#[test]
fn idle_neighbours_reduce_to_the_plain_curve() {
    let layout = Layout::uniform(reference_beams(), 0.0).unwrap();
    let hw = reference_highway();
    let grid = uniform_grid(160.0, 81);
    let quad = Quadrature::square(120);
    let plain = highway_service_cdf(&layout.beams()[MONITORED_BEAM], &hw, &grid, &quad).unwrap();
    let aware = interference_cdf(&layout, &hw, MONITORED_BEAM, &grid, &quad).unwrap();
    assert!(plain.sup_distance(&aware) < 1e-9);
}

#[test]
fn family_matches_single_curves() {
    let layout = Layout::uniform(reference_beams(), 0.0).unwrap();
    let hw = reference_highway();
    let grid = uniform_grid(160.0, 41);
    let quad = Quadrature::square(60);
    let ps = [0.0, 0.3, 0.9];
    let fam = interference_cdf_family(&layout, &hw, 4, &ps, &grid, &quad).unwrap();
    for (p, curve) in ps.iter().zip(&fam) {
        let single = interference_cdf(&layout.with_uniform_activity(*p).unwrap(), &hw, 4, &grid, &quad).unwrap();
        assert!(curve.sup_distance(&single) < 1e-12);
    }
    for w in fam.windows(2) {
        assert!(w[0].values.iter().zip(&w[1].values).all(|(a, b)| b + 1e-12 >= *a));
    }
}

#[test]
fn monte_carlo_tracks_quadrature_with_interference() {
    let layout = Layout::uniform(reference_beams(), 0.4).unwrap();
    let hw = reference_highway();
    let grid = uniform_grid(160.0, 81);
    let mc = monte_carlo_cdf(&layout, &hw, 3, &grid, 200_000, 4).unwrap();
    let quad = interference_cdf(&layout, &hw, 3, &grid, &Quadrature::square(200)).unwrap();
    assert!(mc.sup_distance(&quad) < 0.01, "{}", mc.sup_distance(&quad));
    let again = monte_carlo_cdf(&layout, &hw, 3, &grid, 200_000, 4).unwrap();
    assert_eq!(mc, again);
}

/// Walks a vehicle through beam `k` in small steps with a frozen activity
/// pattern and adds up the steps the simulator would classify as clean.
fn stepped_clean_distance(layout: &Layout, k: usize, p: PolarPoint, heading: f64, active: &ContextVector) -> f64 {
    let beam = &layout.beams()[k];
    let total = departure(beam, p, heading).unwrap().distance;
    let steps = 20_000;
    let h = total / steps as f64;
    let params = ChannelParams::default();
    (0..steps)
        .filter(|s| {
            let q = advance(p, heading, (*s as f64 + 0.5) * h, beam);
            let (x, y) = beam.to_cartesian(q);
            !classify_tick(layout.beams(), k, active, x, y, InterferenceMode::Geometric, &params)
                .unwrap()
                .interfered
        })
        .count() as f64
        * h
}

#[test]
fn frozen_activity_matches_the_exact_clean_distance() {
    let beams = reference_beams();
    let n = beams.len();
    let hw = reference_highway();
    let k = MONITORED_BEAM;
    let starts = [
        (PolarPoint::new(20.0, -0.3), 0.0),
        (PolarPoint::new(12.0, 0.4), PI),
        (PolarPoint::new(25.0, 0.0), PI),
    ];
    for pattern in [0u64, 0x3_ffff, 1 << 3 | 1 << 5, 1 << 4 | 1 << 8 | 1 << 10] {
        let active = ContextVector::from_bits(pattern & !(1 << k), n).unwrap();
        let activity: Vec<f64> = (0..n).map(|i| if active.get(i) { 1.0 } else { 0.0 }).collect();
        let layout = Layout::new(beams.clone(), activity).unwrap();
        for &(p, heading) in &starts {
            let (_, y) = beams[k].to_cartesian(p);
            assert!(hw.on_road(y));
            let exact = interference_free_distance(&layout, k, p, heading).unwrap();
            let stepped = stepped_clean_distance(&layout, k, p, heading, &active);
            assert!((exact - stepped).abs() < 0.05, "pattern {pattern:b}: {exact} vs {stepped}");
            let profile = path_profile(&layout, k, p, heading).unwrap();
            assert!((profile.length - departure(&beams[k], p, heading).unwrap().distance).abs() < 1e-9);
        }
    }
}
