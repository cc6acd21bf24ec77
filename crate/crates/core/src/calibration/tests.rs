use super::*;
use crate::svi::{ssvi_total_variance, SsviParams};
use crate::wa_param::{family_bounded_skew, family_flat, family_w_shape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FIT_DELTAS: [f64; 13] = [0.005, 0.01, 0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

fn sample(params: &WAParams, deltas: &[f64]) -> PillarSet {
    PillarSet::deltas(1.0, deltas.iter().map(|&d| (d, params.sigma(d).unwrap().value())).collect()).unwrap()
}

fn ssvi_pillars() -> PillarSet {
    let p = SsviParams::new(0.04, 1.0, -0.3).unwrap();
    let ks = [-0.4, -0.25, -0.1, 0.0, 0.1, 0.25, 0.4];
    PillarSet::strikes(1.0, ks.iter().map(|&k| (k, ssvi_total_variance(&p, k).sqrt())).collect()).unwrap()
}

fn local_extrema(v: &[f64]) -> (usize, usize) {
    let mins = v.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count();
    let maxs = v.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count();
    (mins, maxs)
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
}

#[test]
fn strike_pillars_to_delta() {
    let p = PillarSet::strikes(1.0, vec![(0.1, 0.2), (0.0, 0.2), (-0.1, 0.2)]).unwrap();
    let d = pillars_to_delta(&p).unwrap();
    assert_eq!(d.kind(), PillarKind::Delta);
    // ascending delta is descending strike
    let ks = [0.1, 0.0, -0.1];
    for (&(delta, s), k) in d.pillars().iter().zip(ks) {
        assert_eq!(s, 0.2);
        assert!((delta - norm_cdf(-k / 0.2 + 0.1)).abs() < 1e-15);
    }
    assert!((d.pillars()[1].0 - 0.539_827_837_277_029).abs() < 1e-12);
    // maturity scales the total volatility
    let p = PillarSet::strikes(4.0, vec![(-0.1, 0.1), (0.0, 0.1), (0.1, 0.1)]).unwrap();
    assert!((pillars_to_delta(&p).unwrap().pillars()[1].0 - 0.539_827_837_277_029).abs() < 1e-12);
}

use crate::gaussian::norm_cdf;

#[test]
fn d1_inversion_is_a_data_error() {
    let p = PillarSet::strikes(1.0, vec![(-0.2, 0.2), (0.0, 0.2), (0.01, 0.5), (0.3, 0.2)]).unwrap();
    match pillars_to_delta(&p) {
        Err(Error::Data(msg)) => assert!(msg.contains("k=0,") && msg.contains("k=0.01"), "{msg}"),
        other => panic!("expected a data error, got {other:?}"),
    }
    assert!(matches!(calibrate_l_interp(&p, &CalibrationConfig::default()), Err(Error::Data(_))));
}

#[test]
fn pillar_set_invariants() {
    assert!(PillarSet::strikes(1.0, vec![(0.0, 0.2), (0.1, 0.2)]).is_err());
    assert!(PillarSet::strikes(1.0, vec![(0.0, 0.2), (0.1, 0.2), (0.1, 0.3)]).is_err());
    assert!(PillarSet::strikes(1.0, vec![(0.0, 0.2), (0.1, -0.2), (0.2, 0.3)]).is_err());
    assert!(PillarSet::deltas(1.0, vec![(0.0, 0.2), (0.1, 0.2), (0.2, 0.3)]).is_err());
    assert!(PillarSet::deltas(0.0, vec![(0.1, 0.2), (0.2, 0.2), (0.3, 0.3)]).is_err());
    let p = PillarSet::deltas(1.0, vec![(0.3, 0.2), (0.1, 0.2), (0.2, 0.3)]).unwrap();
    assert_eq!(p.pillars()[0].0, 0.1);
}

#[test]
fn csv_input() {
    let p = PillarSet::from_csv("k,sigma\n-0.1,0.21\n0.0,0.2\n0.1, 0.19\n", 0.5).unwrap();
    assert_eq!(p.kind(), PillarKind::Strike);
    assert_eq!(p.len(), 3);
    assert_eq!(p.maturity(), 0.5);
    let p = PillarSet::from_csv("delta,sigma\n0.25,0.2\n0.5,0.2\n0.75,0.2\n", 1.0).unwrap();
    assert_eq!(p.kind(), PillarKind::Delta);
    match PillarSet::from_csv("k,sigma\n0.0,0.2\n0.1,abc\n0.2,0.2\n", 1.0) {
        Err(Error::Data(msg)) => assert!(msg.starts_with("line 3:"), "{msg}"),
        other => panic!("{other:?}"),
    }
    match PillarSet::from_csv("k,sigma\n0.0,0.2\n0.1\n", 1.0) {
        Err(Error::Data(msg)) => assert!(msg.starts_with("line 3:"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(PillarSet::from_csv("strike,vol\n0,0.2\n", 1.0).is_err());
}

#[test]
fn l_interp_recovers_flat() {
    let p = PillarSet::deltas(1.0, [0.2, 0.4, 0.6, 0.8].iter().map(|&d| (d, 0.2)).collect()).unwrap();
    let r = calibrate_l_interp(&p, &CalibrationConfig::default()).unwrap();
    assert!(r.residuals.iter().all(|x| x.abs() <= 1e-10), "{:?}", r.residuals);
    for i in 0..=80 {
        let d = 0.1 + 0.01 * i as f64;
        assert!((r.smile.eval(d) - 0.2).abs() < 2e-3, "delta={d}");
    }
    assert!((r.tilde_delta - norm_cdf(0.2)).abs() < 1e-12);
    assert!(r.report.passed);
    assert_eq!(r.method, Method::LInterp);
}

#[test]
fn l_interp_through_ssvi_pillars() {
    let p = ssvi_pillars();
    for strict in [false, true] {
        let cfg = CalibrationConfig { wa_strict: strict, ..Default::default() };
        let r = calibrate_l_interp(&p, &cfg).unwrap();
        assert_eq!(r.residuals.len(), 7);
        assert!(r.residuals.iter().all(|x| x.abs() <= 1e-10), "{:?}", r.residuals);
        assert!(r.report.passed, "{:?}", r.report.failures);
        // the switch lies between the pillars either side of the true one
        assert!(r.tilde_delta > 0.5 && r.tilde_delta < 0.7, "{}", r.tilde_delta);
    }
}

#[test]
fn l_interp_is_idempotent() {
    let cfg = CalibrationConfig::default();
    let first = calibrate_l_interp(&ssvi_pillars(), &cfg).unwrap();
    let again = PillarSet::deltas(1.0, first.pillars.pillars().iter().map(|&(d, _)| (d, first.smile.eval(d))).collect())
        .unwrap();
    let second = calibrate_l_interp(&again, &cfg).unwrap();
    for &(d, _) in first.pillars.pillars() {
        assert!((first.smile.eval(d) - second.smile.eval(d)).abs() <= 1e-8);
    }
}

#[test]
fn l_half_violation() {
    // tiny volatilities either side of the money with the larger one above
    let p = PillarSet::deltas(1.0, vec![(0.2, 0.3), (0.4, 0.001), (0.6, 0.004), (0.8, 0.3)]).unwrap();
    match calibrate_l_interp(&p, &CalibrationConfig::default()) {
        Err(Error::ConstraintViolation(msg)) => assert!(msg.starts_with("l(1/2)<0"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn decreasing_l_violation() {
    let p = PillarSet::deltas(1.0, vec![(0.2, 0.2), (0.3, 0.9), (0.6, 0.2), (0.8, 0.2)]).unwrap();
    match calibrate_l_interp(&p, &CalibrationConfig::default()) {
        Err(Error::ConstraintViolation(msg)) => assert!(msg.starts_with("l strictly increasing"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pillars_must_bracket_the_switch() {
    let p = PillarSet::deltas(1.0, vec![(0.1, 0.2), (0.2, 0.2), (0.3, 0.2)]).unwrap();
    match calibrate_l_interp(&p, &CalibrationConfig::default()) {
        Err(Error::ConstraintViolation(msg)) => assert!(msg.starts_with("exists unique tilde_delta"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fit_recovers_flat() {
    let p = sample(&family_flat(0.2).unwrap(), &FIT_DELTAS);
    let r = calibrate_wa_fit(&p, FitFamily::Flat, &CalibrationConfig::default()).unwrap();
    let params = r.params.as_ref().unwrap();
    assert!((params.tilde_delta() - norm_cdf(0.2)).abs() < 1e-6);
    assert!(rms(&r.residuals) < 1e-9);
    assert!(r.report.passed);
    match params.family() {
        Some(crate::wa_param::FamilyParams::Flat { c }) => assert!((c - 0.2).abs() < 1e-6),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fit_bounded_skew_with_noise() {
    let mut p = sample(&family_bounded_skew(0.1, 0.7).unwrap(), &FIT_DELTAS);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1e-4).unwrap();
    let noisy: Vec<(f64, f64)> = p.pillars().iter().map(|&(d, s)| (d, s + noise.sample(&mut rng))).collect();
    p = PillarSet::deltas(1.0, noisy).unwrap();
    let cfg = CalibrationConfig { seed: 11, ..Default::default() };
    let r = calibrate_wa_fit(&p, FitFamily::BoundedSkew, &cfg).unwrap();
    assert!(rms(&r.residuals) <= 3e-4, "{}", rms(&r.residuals));
    let again = calibrate_wa_fit(&p, FitFamily::BoundedSkew, &cfg).unwrap();
    assert_eq!(r.residuals, again.residuals);
    assert_eq!(r.tilde_delta, again.tilde_delta);
}

#[test]
fn fit_keeps_the_w_shape() {
    let p = sample(&family_w_shape(0.7, 0.02, 0.9).unwrap(), &FIT_DELTAS);
    let r = calibrate_wa_fit(&p, FitFamily::WShape, &CalibrationConfig::default()).unwrap();
    assert!(rms(&r.residuals) <= 1e-6, "{}", rms(&r.residuals));
    let grid = crate::smile::GridSpec::uniform(401, 1e-4, 1.0 - 1e-4).points();
    let (mins, _) = local_extrema(&r.smile.sample(&grid));
    assert_eq!(mins, 2);
}

#[test]
fn more_starts_never_hurt() {
    let p = sample(&family_bounded_skew(0.1, 0.7).unwrap(), &FIT_DELTAS);
    let mut last = f64::INFINITY;
    for starts in [1, 2, 4] {
        let cfg = CalibrationConfig { starts, max_evals: 200, ..Default::default() };
        let r = calibrate_wa_fit(&p, FitFamily::BoundedSkew, &cfg).unwrap();
        assert!(r.objective <= last, "{starts}: {} > {last}", r.objective);
        last = r.objective;
    }
}

#[test]
fn spline_params_fit() {
    let p = sample(&family_bounded_skew(0.1, 0.7).unwrap(), &FIT_DELTAS);
    let r = calibrate_wa_fit(&p, FitFamily::SplineParams, &CalibrationConfig::default()).unwrap();
    assert!(rms(&r.residuals) < 5e-3, "{}", rms(&r.residuals));
    assert!(r.report.passed);
}

#[test]
fn family_names() {
    for f in FitFamily::ALL {
        assert_eq!(f.name().parse::<FitFamily>().unwrap(), f);
    }
    assert!("svi".parse::<FitFamily>().is_err());
}
