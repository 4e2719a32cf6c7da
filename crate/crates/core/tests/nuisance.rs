use lswspec::lsw::{max_levels, simulate};
use lswspec::nuisance::{default_bandwidth, estimate_nuisance};
use lswspec::periodogram::PeriodogramGrid;
use lswspec::rng::white_noise;
use lswspec::spec_file;
use lswspec::wavelet::{gram_matrix, Scale};

#[test]
fn constant_rows_have_no_variation() {
    let g = gram_matrix(4).unwrap();
    let raw: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0 + i as f64; 200]).collect();
    let p = PeriodogramGrid::from_raw(raw, &g).unwrap();
    let n = estimate_nuisance(&p, 5);
    assert!(n.tv.iter().all(|&v| v == 0.0), "{:?}", n.tv);
    assert!(n.c2 > 0.0);
}

#[test]
fn white_noise_norm_is_near_one() {
    let t = 1024;
    let g = gram_matrix(max_levels(t)).unwrap();
    let norms: Vec<f64> = (0..100)
        .map(|r| {
            let p = PeriodogramGrid::new(&white_noise(r, t), &g).unwrap();
            estimate_nuisance(&p, default_bandwidth(t)).c_norm
        })
        .collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    println!("mean cNorm {mean:.3}, range {:.3}..{:.3}", norms.iter().copied().fold(f64::INFINITY, f64::min), norms.iter().copied().fold(0.0, f64::max));
    assert!((mean - 1.0).abs() <= 0.2, "mean cNorm {mean}");
}

#[test]
fn single_jump_variation() {
    let spec = spec_file::parse("levels = 1\nscale = -1; piece = [0.0, 0.5), const 1.0; piece = [0.5, 1.0), const 2.0\n").unwrap();
    let t = 1024;
    let g = gram_matrix(max_levels(t)).unwrap();
    let j = Scale::new(-1).unwrap();
    let tvs: Vec<f64> = (0..100)
        .map(|r| {
            let p = PeriodogramGrid::new(&simulate(&spec, t, r).unwrap().values, &g).unwrap();
            estimate_nuisance(&p, default_bandwidth(t)).tv[j.index()]
        })
        .collect();
    // the true variation is the jump itself
    let mean = tvs.iter().sum::<f64>() / tvs.len() as f64;
    println!("mean tv {mean:.3}");
    assert!((0.5..=2.0).contains(&mean), "mean tv {mean}");
}
