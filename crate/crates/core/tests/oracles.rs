//! Model and geometry routines checked against direct re-evaluation.

use intermob::geo_flows::{aggregate_total, distance_matrix, haversine, Direction};
use intermob::models::{compute_sij, predict_day, FlowModel, Geography, RadiationVariant};
use intermob::synthgen::{generate, Noise, SynthConfig};

fn registry_config(seed: u64, zones: usize) -> SynthConfig {
    SynthConfig { zones, days: 3, seed, noise: Noise::Poisson, ..SynthConfig::default() }
}

#[test]
fn opportunities_match_brute_force_scan() {
    for seed in 0..10 {
        let data = generate(&registry_config(seed, 12 + seed as usize)).unwrap();
        let reg = &data.registry;
        let d = distance_matrix(reg);
        let m = reg.masses();
        let s = compute_sij(reg, &d);
        let n = reg.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let brute: f64 = (0..n).filter(|&k| k != i && k != j && d.get(i, k) < d.get(i, j)).map(|k| m[k]).sum();
                assert_eq!(s.get(i, j), brute, "seed {seed}, cell ({i}, {j})");
            }
        }
    }
}

#[test]
fn radiation_cells_match_formula() {
    let data = generate(&registry_config(42, 20)).unwrap();
    let geo = Geography::new(data.registry.clone());
    let day = &data.flows[0];
    let outflows = day.outflows();
    let m = geo.masses();
    for variant in [RadiationVariant::Canonical, RadiationVariant::Paper] {
        let pred = predict_day(&FlowModel::Radiation { variant }, &geo, day.date(), None, Some(&outflows)).unwrap();
        for i in 0..geo.len() {
            for j in 0..geo.len() {
                if i == j {
                    assert_eq!(pred.get(i, j), 0.0);
                    continue;
                }
                let s = geo.opportunities().get(i, j);
                let first = if variant == RadiationVariant::Canonical { m[i] + s } else { m[j] + s };
                let want = outflows[i] * m[i] * m[j] / first / (m[i] + m[j] + s);
                let got = pred.get(i, j);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300), "({i}, {j}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn distance_matrix_matches_pairwise_haversine() {
    let data = generate(&registry_config(3, 15)).unwrap();
    let reg = &data.registry;
    let d = distance_matrix(reg);
    for (i, a) in reg.zones().iter().enumerate() {
        for (j, b) in reg.zones().iter().enumerate() {
            let want = if i == j { 0.0 } else { haversine((a.lat, a.lon), (b.lat, b.lon)) };
            assert_eq!(d.get(i, j), want);
            assert_eq!(d.get(i, j), d.get(j, i));
        }
    }
}

#[test]
fn aggregates_over_all_focus_zones_sum_to_grand_total() {
    let data = generate(&registry_config(9, 10)).unwrap();
    let reg = &data.registry;
    for direction in [Direction::Incoming, Direction::Outgoing] {
        let mut sums = vec![0.0; data.flows.len()];
        for id in reg.ids() {
            for (t, (date, v)) in aggregate_total(&data.flows, reg, id, direction).unwrap().into_iter().enumerate() {
                assert_eq!(date, data.flows[t].date());
                sums[t] += v;
            }
        }
        for (t, day) in data.flows.iter().enumerate() {
            assert!((sums[t] - day.total()).abs() <= 1e-9 * day.total());
        }
    }
}
