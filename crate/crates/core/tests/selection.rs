use lswspec::adaptive::{build_grids, select_interval, AdaptiveConfig};
use lswspec::estimator::Averager;
use lswspec::lsw::{max_levels, simulate};
use lswspec::montecarlo::{self, MonteCarloConfig};
use lswspec::periodogram::PeriodogramGrid;
use lswspec::spectrum::SpectrumSpec;
use lswspec::wavelet::{gram_matrix, Scale};
use rayon::prelude::*;

fn s1() -> Scale {
    Scale::new(-1).unwrap()
}

#[test]
fn constant_spectrum_keeps_the_longest_candidate() {
    let t = 1000;
    let spec = SpectrumSpec::constant(&[1.0]).unwrap();
    let g = gram_matrix(max_levels(t)).unwrap();
    let cfg = AdaptiveConfig::default();
    let longest = *build_grids(0.5, t, &cfg).unwrap().lambda.iter().max_by_key(|r| r.count()).unwrap();
    let hits = (0..200u64)
        .into_par_iter()
        .filter(|&s| {
            let p = PeriodogramGrid::new(&simulate(&spec, t, s).unwrap().values, &g).unwrap();
            select_interval(&p, s1(), 0.5, &AdaptiveConfig { seed: s, ..cfg }, None).unwrap().selected == longest
        })
        .count();
    println!("longest candidate kept in {hits} of 200");
    assert!(hits >= 160, "{hits}");
}

#[test]
fn selection_avoids_the_breaks() {
    let t = 1000;
    let spec = SpectrumSpec::benchmark();
    let g = gram_matrix(max_levels(t)).unwrap();
    let cfg = AdaptiveConfig::default();
    let slack = 2.0 * cfg.delta_points as f64;
    let (a, b) = (0.25 * t as f64 - slack, 0.575 * t as f64 + slack);
    let inside = (0..200u64)
        .into_par_iter()
        .filter(|&s| {
            let p = PeriodogramGrid::new(&simulate(&spec, t, s).unwrap().values, &g).unwrap();
            let r = select_interval(&p, s1(), 0.4, &AdaptiveConfig { seed: s, ..cfg }, None).unwrap().selected;
            r.lo as f64 >= a && r.hi as f64 <= b
        })
        .count();
    println!("selected interval inside the plateau in {inside} of 200");
    assert!(inside >= 160, "{inside}");
}

#[test]
fn homogeneous_risk_is_close_to_the_full_average() {
    let t = 1024;
    let spec = SpectrumSpec::constant(&[1.0]).unwrap();
    let g = gram_matrix(max_levels(t)).unwrap();
    let cfg = AdaptiveConfig::default();
    let full = *build_grids(0.5, t, &cfg).unwrap().lambda.iter().max_by_key(|r| r.count()).unwrap();
    let (adaptive, average): (Vec<f64>, Vec<f64>) = (0..200u64)
        .into_par_iter()
        .map(|s| {
            let p = PeriodogramGrid::new(&simulate(&spec, t, s).unwrap().values, &g).unwrap();
            let e = select_interval(&p, s1(), 0.5, &AdaptiveConfig { seed: s, ..cfg }, None).unwrap();
            let q = Averager::new(&p, s1(), 0.0, s).unwrap().q(&full);
            ((e.value - 1.0).powi(2), (q - 1.0).powi(2))
        })
        .unzip();
    let (ma, mf) = (adaptive.iter().sum::<f64>() / 200.0, average.iter().sum::<f64>() / 200.0);
    println!("adaptive mse {ma:.5}, full-interval mse {mf:.5}");
    assert!(ma <= 2.0 * mf, "{ma} vs {mf}");
}

#[test]
fn constant_spectrum_beats_the_shortest_window() {
    let spec = SpectrumSpec::constant(&[1.0]).unwrap();
    let mut cfg = MonteCarloConfig::new(1000, 100, 0);
    // window of the shortest candidate, 2 delta + 1 points
    cfg.baseline_bandwidth = Some(cfg.adaptive.delta_points);
    let report = montecarlo::run(&spec, &cfg).unwrap();
    println!("adaptive mad {:.4}, baseline mad {:.4}", report.adaptive.mad, report.baseline.mad);
    assert!(report.adaptive.mad <= report.baseline.mad);
}
