//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test --test acceptance`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use smilewa::calibration::{calibrate_wa_fit, pillars_to_delta, CalibrationConfig, FitFamily, PillarSet};
use smilewa::delta_map::{check_sigma_wa, to_delta, to_strike};
use smilewa::diagnostics::{atm_expansion, fukasawa_check, verify_expansion, wing_report};
use smilewa::gaussian::{norm_cdf, norm_pdf, norm_ppf};
use smilewa::numerics::roots::bisect;
use smilewa::svi::{ssvi_tilde, svi_tilde_k, svi_to_delta, svi_total_variance, SsviParams, SviModel, SviParams};
use smilewa::wa_param::{
    family_bounded_skew, family_custom, family_flat, family_w_shape, recover_params, wa_l, wa_sigma, Knots, WAParams,
};
use smilewa::{Error, GridSpec, StrikeSmile};
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn grid401() -> Vec<f64> {
    GridSpec::uniform(401, 1e-4, 1.0 - 1e-4).points()
}

fn paper_sets() -> Vec<(&'static str, WAParams)> {
    vec![
        ("bounded_skew(0.1, 0.7)", family_bounded_skew(0.1, 0.7).unwrap()),
        ("flat(0.2)", family_flat(0.2).unwrap()),
        ("w_shape(0.7, 0.02, 0.9)", family_w_shape(0.7, 0.02, 0.9).unwrap()),
    ]
}

/// Paper parameter sets followed by seeded random draws, all validated.
fn validated_smiles(n: usize, seed: u64) -> Vec<(String, WAParams)> {
    let mut out: Vec<(String, WAParams)> = paper_sets().into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut i = 0;
    while out.len() < n {
        let drawn = match i % 3 {
            0 => {
                let c = rng.gen_range(0.05..0.8);
                family_flat(c).map(|p| (format!("flat({c:.4})"), p))
            }
            1 => {
                let (c, td) = (rng.gen_range(0.05..0.3), rng.gen_range(0.52..0.74));
                family_bounded_skew(c, td).map(|p| (format!("bounded_skew({c:.4}, {td:.4})"), p))
            }
            _ => {
                let td = rng.gen_range(0.55..0.85);
                let dh = rng.gen_range(0.005..0.3);
                let dhh = rng.gen_range(td + 0.02..0.98);
                family_w_shape(td, dh, dhh).map(|p| (format!("w_shape({td:.4}, {dh:.4}, {dhh:.4})"), p))
            }
        };
        i += 1;
        if let Ok(x) = drawn {
            out.push(x);
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    for (name, p) in validated_smiles(20, 1) {
        let s = p.smile().unwrap();
        let back = match to_strike(&s).and_then(|k| to_delta(&k)) {
            Ok(b) => b,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        for d in grid401() {
            let e = (back.eval(d) - s.eval(d)).abs();
            if e > worst.0 {
                worst = (e, format!("{name} at delta={d}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst.0 <= 1e-8 && secs < 10.0, format!("max error {:.2e} ({}), {secs:.2}s", worst.0, worst.1))
}

fn criterion_2() -> Outcome {
    let grid = GridSpec::uniform(401, 0.01, 0.99).points();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, p) in paper_sets() {
        let r = recover_params(&p.smile().unwrap()).and_then(|q| {
            grid.iter()
                .map(|&d| Ok((wa_sigma(&q, d)?.value() - wa_sigma(&p, d)?.value()).abs()))
                .try_fold(0.0f64, |m, e: Result<f64, Error>| Ok(m.max(e?)))
        });
        match r {
            Ok(e) => {
                ok &= e <= 1e-6;
                lines.push(format!("{name} {e:.2e}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name} error: {e}"));
            }
        }
    }
    outcome(ok, lines.join(", "))
}

fn criterion_3() -> Outcome {
    let p = family_flat(0.2).unwrap();
    let worst = grid401().iter().map(|&d| (wa_sigma(&p, d).unwrap().value() - 0.2).abs()).fold(0.0, f64::max);
    let td_err = (p.tilde_delta() - norm_cdf(0.2)).abs();
    outcome(worst <= 1e-9 && td_err <= 1e-10, format!("max |sigma - 0.2| {worst:.2e}, |tilde_delta - N(0.2)| {td_err:.2e}"))
}

fn criterion_4() -> Outcome {
    let p = family_w_shape(0.7, 0.02, 0.9).unwrap();
    let v: Vec<f64> = grid401().iter().map(|&d| wa_sigma(&p, d).unwrap().value()).collect();
    let mins: Vec<f64> = v.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).map(|w| w[1]).collect();
    let maxs: Vec<f64> = v.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).map(|w| w[1]).collect();
    let interior_max = maxs.iter().copied().fold(f64::NAN, f64::max);
    let (left, right) = (v[0], v[v.len() - 1]);
    let shape = mins.len() == 2 && maxs.len() == 1;
    let ends = left > 2.0 * interior_max && right > 2.0 * interior_max;
    outcome(
        shape && ends,
        format!(
            "{} minima {:?}, {} maxima {:?}; endpoints {left:.4} / {right:.4} vs 2x max {:.4} (left {}, right {})",
            mins.len(),
            mins.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            maxs.len(),
            maxs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            2.0 * interior_max,
            if left > 2.0 * interior_max { "ok" } else { "FAIL" },
            if right > 2.0 * interior_max { "ok" } else { "FAIL" },
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 1000 {
        let p = SviParams::new(
            rng.gen_range(-0.05..0.2),
            rng.gen_range(0.01..1.0),
            rng.gen_range(-0.95..0.95),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.01..1.0),
        );
        let Ok(p) = p else { continue };
        let (l, r) = p.wing_slopes();
        if !(l < 2.0 && r < 2.0) {
            continue;
        }
        n += 1;
        let closed = svi_tilde_k(&p).unwrap();
        let root = bisect(|k| svi_total_variance(&p, k) + 2.0 * k, -50.0, 0.0, 1e-15, 500).unwrap();
        worst = worst.max((closed - root).abs());
    }
    let (k, d) = ssvi_tilde(&SsviParams::new(0.04, 1.0, -0.3).unwrap()).unwrap();
    let k_ok = (k - -0.0201226).abs() <= 1e-6;
    let d_ok = (d - 0.655905).abs() <= 1e-6;
    outcome(
        worst <= 1e-9 && k_ok && d_ok,
        format!(
            "1000 draws max |closed - bisection| {worst:.2e}; SSVI k~ {k:.7} ({}), delta~ {d:.6} vs 0.655905 ({})",
            if k_ok { "ok" } else { "FAIL" },
            if d_ok { "ok" } else { "FAIL" }
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut n = 0;
    let mut failures = Vec::new();
    while n < 20 {
        let (a0, s, c) = (rng.gen_range(0.1..0.4), rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.3));
        let smile = StrikeSmile::new(move |k: f64| a0 - s * k.tanh() + c * k * k / (1.0 + k * k));
        if !fukasawa_check(&smile, &GridSpec::strike_check()).passed {
            continue;
        }
        n += 1;
        let r = atm_expansion(&smile).and_then(|co| verify_expansion(&smile, &co, 1e-3));
        match r {
            Ok(chk) => {
                worst = worst.max(chk.b1_rel_err).max(chk.b2_rel_err);
                if !chk.passed {
                    failures.push(format!("({a0:.3}, {s:.3}, {c:.3})"));
                }
            }
            Err(e) => failures.push(format!("({a0:.3}, {s:.3}, {c:.3}): {e}")),
        }
    }
    outcome(failures.is_empty(), format!("20 smiles, worst relative error {worst:.2e}; failing {failures:?}"))
}

fn criterion_7() -> Outcome {
    let custom = family_custom(
        0.65,
        Knots(vec![(0.05, 0.3), (0.5, 0.2)]),
        Knots(vec![(0.5, 0.15), (0.65, 0.05)]),
        Knots(vec![(0.65, 0.1), (0.95, 0.4)]),
    )
    .unwrap();
    let mut fams = paper_sets().into_iter().map(|(n, p)| (n.to_string(), p)).collect::<Vec<_>>();
    fams.push(("custom".into(), custom));
    let mut bad = Vec::new();
    for (name, p) in &fams {
        let td = p.tilde_delta();
        let h = 1e-6;
        let fd = |d: f64| (wa_l(p, d + h).unwrap() - wa_l(p, d - h).unwrap()) / (2.0 * h);
        let bound = |d: f64| {
            let z = norm_ppf(d).unwrap();
            z / norm_pdf(z)
        };
        for i in 1..=101 {
            let below = 0.5 + (td - 0.5) * i as f64 / 102.0;
            let above = td + (0.999 - td) * i as f64 / 102.0;
            if !(fd(below) > bound(below)) {
                bad.push(format!("{name} at {below:.4}"));
            }
            if !(fd(above) < bound(above)) {
                bad.push(format!("{name} at {above:.4}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("{} families x 202 probes; violations {bad:?}", fams.len()))
}

fn criterion_8() -> Outcome {
    const DELTAS: [f64; 13] = [0.005, 0.01, 0.05, 0.1, 0.25, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
    let cfg = CalibrationConfig { seed: 8, ..Default::default() };
    let rms = |r: &[f64]| (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt();
    let mut ok = true;
    let mut lines = Vec::new();
    let families = [
        (FitFamily::Flat, family_flat(0.2).unwrap()),
        (FitFamily::BoundedSkew, family_bounded_skew(0.1, 0.7).unwrap()),
        (FitFamily::WShape, family_w_shape(0.7, 0.02, 0.9).unwrap()),
    ];
    let noise = Normal::new(0.0, 1e-4).unwrap();
    for (i, (fam, p)) in families.iter().enumerate() {
        let clean: Vec<(f64, f64)> = DELTAS.iter().map(|&d| (d, wa_sigma(p, d).unwrap().value())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(80 + i as u64);
        let noisy: Vec<(f64, f64)> = clean.iter().map(|&(d, s)| (d, s + noise.sample(&mut rng))).collect();
        let clean = PillarSet::deltas(1.0, clean).unwrap();
        let noisy = PillarSet::deltas(1.0, noisy).unwrap();
        let fit = |ps: &PillarSet| calibrate_wa_fit(ps, *fam, &cfg);
        match (fit(&clean), fit(&noisy), fit(&noisy)) {
            (Ok(a), Ok(b), Ok(c)) => {
                let (ra, rb) = (rms(&a.residuals), rms(&b.residuals));
                let same = b.residuals == c.residuals && b.tilde_delta == c.tilde_delta;
                ok &= ra <= 1e-6 && rb <= 3e-4 && same;
                lines.push(format!("{fam}: clean {ra:.1e}, noisy {rb:.1e}{}", if same { "" } else { ", NOT deterministic" }));
            }
            (a, b, _) => {
                ok = false;
                lines.push(format!("{fam}: {:?} / {:?}", a.err(), b.err()));
            }
        }
    }
    outcome(ok, lines.join("; "))
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    // right wing slope b(1 + rho) = 2.25 > 2
    let lee = SviModel::Svi(SviParams::new(0.01, 1.5, 0.5, 0.0, 0.1).unwrap());
    let conv = svi_to_delta(&lee, &GridSpec::strike_check());
    let fuk = fukasawa_check(&lee.strike_smile(), &GridSpec::strike_check());
    let flagged = matches!(conv, Err(Error::Membership(_))) && !fuk.lee_right_ok && !fuk.passed;
    ok &= flagged;
    lines.push(format!("Lee wing {}", if flagged { "flagged" } else { "MISSED" }));

    let inv = PillarSet::strikes(1.0, vec![(-0.2, 0.2), (0.0, 0.2), (0.01, 0.5), (0.3, 0.2)]).unwrap();
    let flagged = matches!(pillars_to_delta(&inv), Err(Error::Data(_)));
    ok &= flagged;
    lines.push(format!("d1 inversion {}", if flagged { "flagged" } else { "MISSED" }));

    // a delta smile with an exploding right tail has no strike image
    let exploding = smilewa::DeltaSmile::new(|d: f64| 0.2 + 0.5 * norm_ppf(d).unwrap().max(0.0).powi(2));
    let rep = check_sigma_wa(&exploding, &GridSpec::delta_check(1e-9));
    let flagged = !rep.passed && to_strike(&exploding).is_err();
    ok &= flagged;
    lines.push(format!("non-monotone l {}", if flagged { "flagged" } else { "MISSED" }));

    // σ√T above N⁻¹(δ) as δ → 1 breaks the left-wing Lee bound
    let steep = smilewa::DeltaSmile::new(|d: f64| 0.2 + 1.5 * norm_ppf(d).unwrap().max(0.0));
    let (left, _) = wing_report(&steep, 1e-6).unwrap();
    let flagged = !left.lee_ok;
    ok &= flagged;
    lines.push(format!("delta-space Lee ratio {}", if flagged { "flagged" } else { "MISSED" }));
    outcome(ok, lines.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("roundtrip to_delta(to_strike(s)) <= 1e-8 in < 10 s", criterion_1),
        ("recover_params roundtrip <= 1e-6 on [0.01, 0.99]", criterion_2),
        ("flat fixed point", criterion_3),
        ("W-shape extrema and divergent endpoints", criterion_4),
        ("SVI/SSVI switch point", criterion_5),
        ("ATM expansion b1, b2 <= 1e-3 relative", criterion_6),
        ("monotone-m inequality at 101 probes per side", criterion_7),
        ("calibration recovery", criterion_8),
        ("falsifiers", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} [{:.1}s] {}",
            i + 1,
            if o.passed { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
