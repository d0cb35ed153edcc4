use std::sync::Arc;

use ewlab_core::noise::*;
use ewlab_core::{bump_mollifier, covariance_of, Lattice, SpectralPlan, Tolerances};

fn source(n: usize, h: f64, r0: f64, dt: f64) -> (NoiseSource, ewlab_core::CovarianceKernel) {
    let lat = Lattice::new(3, n, h).unwrap();
    let plan = Arc::new(SpectralPlan::new(&lat));
    let phi = bump_mollifier(&plan, r0).unwrap();
    let r = covariance_of(&plan, &phi, &Tolerances::default()).unwrap();
    (NoiseSource::new(plan, Arc::new(phi), 2024, dt).unwrap(), r)
}

#[test]
fn raw_slices_have_the_declared_law() {
    let lat = Lattice::new(3, 64, 0.25).unwrap();
    let dt = 0.01;
    let seed = SeedSpec::new(11, StreamId::new(1, 0, 0));
    let mut all = Vec::new();
    for i in 0..4 {
        all.extend(sample_raw_slice(&seed, &lat, dt, i));
    }
    let n = all.len() as f64;
    let var = dt / lat.cell_volume();
    let mean = all.iter().sum::<f64>() / n;
    assert!(mean.abs() < 4.0 * (var / n).sqrt());
    let v = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((v / var - 1.0).abs() < 0.01);
}

#[test]
fn slices_are_bitwise_reproducible_and_random_access() {
    let lat = Lattice::new(3, 8, 1.0).unwrap();
    let seed = SeedSpec::new(5, StreamId::new(2, 7, 0));
    let a = sample_raw_slice(&seed, &lat, 0.1, -3);
    let b = sample_raw_slice(&seed, &lat, 0.1, -3);
    assert_eq!(a, b);
    assert_ne!(a, sample_raw_slice(&seed, &lat, 0.1, -2));
    assert_ne!(a, sample_raw_slice(&seed.with_window(1), &lat, 0.1, -3));
    let other = SeedSpec::new(5, StreamId::new(2, 8, 0));
    assert_ne!(a, sample_raw_slice(&other, &lat, 0.1, -3));
}

#[test]
fn smoothing_zero_gives_zero() {
    let (src, _) = source(16, 0.25, 0.5, 0.01);
    let mut ws = src.plan().workspace();
    let mut z = vec![0.0; src.lattice().cell_count()];
    src.smooth_in_place(&mut z, &mut ws).unwrap();
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn smoothed_variance_matches_dt_r0() {
    let dt = 0.02;
    let (src, r) = source(16, 0.25, 0.5, dt);
    let lat = src.lattice().clone();
    let far = lat.index_of(&[0, 0, 5]);
    let mut ws = src.plan().workspace();
    let (mut s0, mut s00, mut sfar) = (Vec::new(), 0.0, Vec::new());
    let stream = StreamId::new(3, 0, 0);
    for i in 0..10_000 {
        let s = src.slice(stream, i, &mut ws).unwrap();
        s0.push(s.values[0] * s.values[0]);
        s00 += s.values[0];
        sfar.push(s.values[0] * s.values[far]);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (m0, se0) = stats(&s0);
    let target = dt * r.at_origin();
    assert!((m0 - target).abs() < 3.0 * se0, "{m0} vs {target} ({se0})");
    let (mf, sef) = stats(&sfar);
    assert!(mf.abs() < 3.0 * sef);
    assert!((s00 / 1e4).abs() < 4.0 * (target / 1e4).sqrt());
}

fn lags() -> Vec<Vec<i64>> {
    let mut l = vec![vec![0, 0, 0]];
    for k in 1..=6 {
        l.push(vec![k, 0, 0]);
        l.push(vec![0, k, 0]);
        l.push(vec![0, 0, k]);
    }
    l.push(vec![1, 1, 0]);
    l
}

#[test]
fn covariance_report_passes_on_correct_noise() {
    let (src, r) = source(16, 0.25, 0.5, 0.01);
    let mut ws = src.plan().workspace();
    let mut acc = CovarianceAccumulator::new(src.lattice(), &lags());
    for i in 0..2000 {
        acc.push(&src.slice(StreamId::new(4, 0, 0), i, &mut ws).unwrap());
    }
    let rep = acc.report(&r, 3.0, 0.01).unwrap();
    assert_eq!(lags().len(), 20);
    assert!(rep.check("chi2").unwrap().passed, "{:?}", rep.scalars);
    assert!(rep.checks.iter().filter(|c| c.name.starts_with("temporal")).all(|c| c.passed));
}

#[test]
fn covariance_report_rejects_mis_scaled_noise() {
    let (src, r) = source(16, 0.25, 0.5, 0.01);
    let mut ws = src.plan().workspace();
    let mut acc = CovarianceAccumulator::new(src.lattice(), &lags());
    for i in 0..2000 {
        let mut s = src.slice(StreamId::new(4, 0, 0), i, &mut ws).unwrap();
        s.values.iter_mut().for_each(|v| *v *= 1.05);
        acc.push(&s);
    }
    assert!(!acc.report(&r, 3.0, 0.01).unwrap().check("chi2").unwrap().passed);
    let few: Vec<NoiseSlice> = (0..10).map(|i| src.slice(StreamId::default(), i, &mut ws).unwrap()).collect();
    assert!(empirical_covariance(&few, &lags(), &r, 3.0, 0.01).is_err());
}

#[test]
fn coupled_streams_share_exactly_the_window() {
    let (src, _) = source(16, 0.5, 1.0, 0.5);
    let base = StreamId::new(9, 3, 0);
    let (a, b) = coupled_streams(&src, base, CouplingWindow::new(4.0, 2.0).unwrap()).unwrap();
    let a: Vec<NoiseSlice> = a.collect();
    let b: Vec<NoiseSlice> = b.collect();
    assert_eq!(a.len(), 8);
    assert_eq!(b.len(), 4);
    assert_eq!(b[0].time_index, -4);
    for s in &b {
        let twin = a.iter().find(|x| x.time_index == s.time_index).unwrap();
        assert_eq!(twin.values, s.values);
    }
    let (_, empty) = coupled_streams(&src, base, CouplingWindow::new(3.0, 0.0).unwrap()).unwrap();
    assert_eq!(empty.count(), 0);
    assert!(matches!(
        coupled_streams(&src, base, CouplingWindow::new(3.3, 1.0).unwrap()),
        Err(ewlab_core::Error::NotOnStepGrid { .. })
    ));
    let (it, _) = coupled_streams(&src, base, CouplingWindow::new(4.0, 2.0).unwrap()).unwrap();
    let replay = it.clone();
    assert_eq!(it.map(|s| s.values).collect::<Vec<_>>(), replay.map(|s| s.values).collect::<Vec<_>>());
}

#[test]
fn private_and_shared_windows_are_uncorrelated() {
    let (src, _) = source(16, 0.5, 1.0, 1.0);
    let mut ws = src.plan().workspace();
    let mut prods = Vec::new();
    for rep in 0..400 {
        let base = StreamId::new(1, rep, 0);
        let a = src.slice(StreamId { window: CouplingWindow::PRIVATE, ..base }, -3, &mut ws).unwrap();
        let b = src.slice(StreamId { window: CouplingWindow::SHARED, ..base }, -1, &mut ws).unwrap();
        let var = src.dt() * 1.0;
        prods.push(a.values[0] * b.values[0] / var);
    }
    let n = prods.len() as f64;
    let m = prods.iter().sum::<f64>() / n;
    let se = (prods.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(m.abs() < 3.0 * se);
}

#[test]
fn dump_round_trip() {
    let lat = Lattice::new(3, 8, 0.5).unwrap();
    let values: Vec<f64> = (0..lat.cell_count()).map(|i| i as f64 * 0.1 - 3.0).collect();
    let mut buf = Vec::new();
    write_dump(&mut buf, &lat, 0.01, -17, &values).unwrap();
    assert_eq!(buf.len(), 40 + 8 * 512);
    assert_eq!(&buf[0..8], &3u64.to_le_bytes());
    let rec = read_dump(&buf[..]).unwrap();
    assert_eq!(rec.dim, 3);
    assert_eq!(rec.side, 8);
    assert_eq!(rec.spacing, 0.5);
    assert_eq!(rec.time_index, -17);
    assert_eq!(rec.values, values);
}

#[test]
fn accumulated_covariances_match_the_direct_sums() {
    let (src, r) = source(16, 0.25, 0.5, 0.01);
    let lat = src.lattice().clone();
    let mut ws = src.plan().workspace();
    let tables: Vec<Vec<usize>> = lags().iter().map(|l| lat.shift_table(l)).collect();
    let mut acc = CovarianceAccumulator::new(&lat, &lags());
    let mut direct = vec![0.0; tables.len()];
    for i in 0..100 {
        let s = src.slice(StreamId::new(5, 0, 0), i, &mut ws).unwrap();
        for (d, c) in direct.iter_mut().zip(spatial_covariances(&lat, &s.values, &tables)) {
            *d += c / 100.0;
        }
        acc.push(&s);
    }
    let rep = acc.report(&r, 3.0, 0.01).unwrap();
    let cov: Vec<f64> = rep.rows.iter().filter(|r| r.quantity == "cov").map(|r| r.value).collect();
    let scale = direct[0];
    for (a, b) in cov.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-12 * scale, "{a} vs {b}");
    }
}
