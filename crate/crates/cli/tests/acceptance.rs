//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use intermob::fitting::{fit_cgm, fit_gravity};
use intermob::geo_flows::distance_matrix;
use intermob::metrics::{cpc_values, information_gain_values, pearson};
use intermob::models::{compute_sij, predict_day, DecayKind, FlowModel, Geography, RadiationVariant};
use intermob::synthgen::{generate, Noise, SynthConfig, TruthSpec};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))?;
    Ok(took)
}

fn metric_exactness() -> Outcome {
    let start = Instant::now();
    let c: f64 = cpc_values(&[2.0, 3.0], &[4.0, 1.0]).map_err(|e| e.to_string())?;
    ensure((c - 0.6).abs() < 1e-9, || format!("cpc {c}"))?;
    let ig: f64 = information_gain_values(&[2.0, 2.0], &[1.0, 3.0]).map_err(|e| e.to_string())?;
    ensure((ig - 0.14384103622589045).abs() < 1e-9, || format!("ig {ig}"))?;
    let r: f64 = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    ensure((r - 0.98198).abs() < 1e-5, || format!("pearson {r}"))?;
    let took = within(Duration::from_millis(100), start)?;
    Ok(format!("cpc={c}, ig={ig:.17}, pearson={r:.6} in {took:.2?}"))
}

fn gravity_config(beta: f64, noise: Noise) -> SynthConfig {
    SynthConfig {
        zones: 20,
        days: 1,
        truth: TruthSpec::Gravity { scale: 1e-10, beta, decay: DecayKind::Exponential },
        noise,
        seed: 2024,
        ..SynthConfig::default()
    }
}

fn gravity_recovery() -> Outcome {
    let start = Instant::now();
    let mut errs = Vec::new();
    for noise in [Noise::None, Noise::Poisson] {
        let data = generate(&gravity_config(0.002, noise)).map_err(|e| e.to_string())?;
        let day = &data.flows[0];
        let d = distance_matrix(&data.registry);
        let fit = fit_gravity(day, &d, &data.registry.masses(), DecayKind::Exponential).map_err(|e| e.to_string())?;
        let err = rel(fit.params.beta, 0.002);
        if noise == Noise::Poisson {
            let mean = day.total() / (20.0 * 19.0);
            ensure(mean >= 50.0, || format!("mean cell count {mean} below 50"))?;
            ensure(err < 0.05, || format!("poisson beta {} (rel err {err:.3e})", fit.params.beta))?;
        } else {
            ensure(err < 1e-6, || format!("noiseless beta {} (rel err {err:.3e})", fit.params.beta))?;
        }
        errs.push(err);
    }
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("beta rel err noiseless {:.2e}, poisson {:.2e} in {took:.2?}", errs[0], errs[1]))
}

fn cgm_truth() -> TruthSpec {
    TruthSpec::Cgm {
        epsilon: -20.0,
        alpha: 0.9,
        beta: 0.8,
        gamma: 1.2,
        delta1: -0.03,
        delta2: -0.03,
        decay: DecayKind::Exponential,
    }
}

fn cgm_worst(cfg: &SynthConfig) -> Result<f64, String> {
    let data = generate(cfg).map_err(|e| e.to_string())?;
    let d = distance_matrix(&data.registry);
    let fit = fit_cgm(&data.flows, &d, &data.registry, &data.stringency, DecayKind::Exponential)
        .map_err(|e| e.to_string())?;
    let FlowModel::Cgm(truth) = data.truth else { return Err("truth is not cgm".into()) };
    let worst = fit
        .params
        .coefficients()
        .iter()
        .zip(truth.coefficients())
        .map(|(g, w)| rel(*g, w))
        .fold(0.0, f64::max);
    Ok(worst)
}

fn cgm_recovery() -> Outcome {
    let start = Instant::now();
    let nb = SynthConfig {
        zones: 50,
        days: 60,
        truth: cgm_truth(),
        noise: Noise::NegativeBinomial { dispersion: 1.0 },
        seed: 60,
        ..SynthConfig::default()
    };
    let nb_err = cgm_worst(&nb)?;
    ensure(nb_err < 0.10, || format!("NB worst coefficient rel err {nb_err:.3}"))?;
    let clean = SynthConfig { zones: 30, days: 10, noise: Noise::None, ..nb };
    let clean_err = cgm_worst(&clean)?;
    ensure(clean_err < 1e-4, || format!("noiseless worst coefficient rel err {clean_err:.3e}"))?;
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("worst rel err NB(50x60, k=1) {nb_err:.4}, noiseless {clean_err:.2e} in {took:.2?}"))
}

fn radiation_oracles() -> Outcome {
    let mut cells = 0;
    for seed in 0..10u64 {
        let cfg = SynthConfig { zones: 10 + 2 * seed as usize, days: 1, seed: 500 + seed, ..SynthConfig::default() };
        let data = generate(&cfg).map_err(|e| e.to_string())?;
        let d = distance_matrix(&data.registry);
        let m = data.registry.masses();
        let s = compute_sij(&data.registry, &d);
        let n = m.len();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let brute: f64 = (0..n).filter(|&k| k != i && k != j && d.get(i, k) < d.get(i, j)).map(|k| m[k]).sum();
                ensure(s.get(i, j) == brute, || format!("seed {seed} ({i},{j}): {} vs {brute}", s.get(i, j)))?;
            }
        }
        let geo = Geography::new(data.registry.clone());
        let day = &data.flows[0];
        let o = day.outflows();
        for variant in [RadiationVariant::Canonical, RadiationVariant::Paper] {
            let pred = predict_day(&FlowModel::Radiation { variant }, &geo, day.date(), None, Some(&o))
                .map_err(|e| e.to_string())?;
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    let sij = s.get(i, j);
                    let first = match variant {
                        RadiationVariant::Canonical => m[i] + sij,
                        RadiationVariant::Paper => m[j] + sij,
                    };
                    let want = o[i] * m[i] * m[j] / first / (m[i] + m[j] + sij);
                    let got = pred.get(i, j);
                    ensure((got - want).abs() <= 1e-12 * want, || format!("({i},{j}): {got} vs {want}"))?;
                    cells += 1;
                }
            }
        }
    }
    Ok(format!("s_ij exact on 10 registries; {cells} radiation cells within 1e-12"))
}

fn improvement_over_gravity() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = gen_default(dir.path());
    let out = dir.path().join("eval");
    let o = run_with("evaluate", &data, &["--models", "gravity-exp,cgm-exp", "--out", s(&out)]);
    ensure(o.code == 0, || format!("evaluate exit {}: {}", o.code, o.stderr))?;
    let summary = read_json(&out.join("summary.json"));
    let block = summary["relative_improvement"]
        .as_array()
        .and_then(|v| v.iter().find(|r| r["model"] == "cgm-exp" && r["baseline"] == "gravity-exp"))
        .ok_or("no cgm-exp over gravity-exp block")?;
    let imp = block["mean"].as_f64().ok_or("improvement is null")?;
    ensure(imp >= 0.10, || format!("mean relative CPC improvement {:.2}% < 10%", imp * 100.0))?;
    let took = within(Duration::from_secs(120), start)?;
    Ok(format!("cgm-exp over gravity-exp: {:+.2}% in {took:.2?}", imp * 100.0))
}

fn sync_self_test() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = gen(dir.path(), &gravity_toml(8, 60, "poisson", 31));
    let reference = dir.path().join("ref.csv");
    write_total_reference(&data.join("flows.csv"), &reference);
    let out = dir.path().join("sync");
    let o = run_with("sync", &data, &["--reference", s(&reference), "--windows", "5,10,15,20,25", "--out", s(&out)]);
    ensure(o.code == 0, || format!("sync exit {}: {}", o.code, o.stderr))?;
    let sync = read_json(&out.join("sync.json"));
    let rho = sync["rho_g"].as_f64().ok_or("rho_g missing")?;
    ensure((rho - 1.0).abs() < 1e-12, || format!("rho_g {rho}"))?;
    let local = sync["local"].as_array().ok_or("local missing")?;
    let mut counts = Vec::new();
    for (entry, w) in local.iter().zip([5u64, 10, 15, 20, 25]) {
        ensure(entry["w"] == w, || format!("window order: {entry}"))?;
        for key in ["mean", "median"] {
            let v = entry[key].as_f64().ok_or(format!("w={w} {key} missing"))?;
            ensure((v - 1.0).abs() < 1e-12, || format!("w={w} {key} {v}"))?;
        }
        let n = entry["windows"].as_u64().unwrap_or(0);
        ensure(n == 60 - w + 1, || format!("w={w}: {n} windows"))?;
        counts.push(n);
    }
    ensure(counts.len() == 5, || "expected five windows".into())?;
    Ok(format!("rho_g={rho}, all window stats 1.0, counts {counts:?}"))
}

fn invariants() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let cases = 500;
    for _ in 0..cases {
        let n = rng.gen_range(2..30);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..100.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
        let c = cpc_values(&a, &b).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&c), || format!("cpc {c} out of bounds"))?;
        ensure(c == cpc_values(&b, &a).unwrap(), || "cpc asymmetric".into())?;
        let ig = information_gain_values(&b, &a).map_err(|e| e.to_string())?;
        ensure(ig >= 0.0, || format!("ig {ig} negative"))?;
        let k = rng.gen_range(0.1..10.0);
        let scaled: Vec<f64> = b.iter().map(|v| v * k).collect();
        let same = information_gain_values(&b, &scaled).unwrap();
        ensure(same < 1e-12, || format!("ig of proportional flows {same}"))?;
        let mut bumped = scaled.clone();
        bumped[0] *= 2.0;
        ensure(information_gain_values(&b, &bumped).unwrap() > 1e-12, || "ig zero for unequal flows".into())?;
        if let Ok(r) = pearson(&a, &b) {
            let (s, t) = (rng.gen_range(0.1..50.0), rng.gen_range(-100.0..100.0));
            let moved: Vec<f64> = a.iter().map(|v| s * v + t).collect();
            let r2 = pearson(&moved, &b).unwrap();
            ensure((r - r2).abs() < 1e-9, || format!("pearson not affine invariant: {r} vs {r2}"))?;
        }
    }

    let data = generate(&SynthConfig { zones: 15, days: 4, ..SynthConfig::default() }).map_err(|e| e.to_string())?;
    let d = distance_matrix(&data.registry);
    let grav = fit_gravity(&data.flows[0], &d, &data.registry.masses(), DecayKind::PowerLaw).map_err(|e| e.to_string())?;
    let cgm = fit_cgm(&data.flows, &d, &data.registry, &data.stringency, DecayKind::Exponential)
        .map_err(|e| e.to_string())?;
    for (name, trace) in [("gravity", &grav.trace), ("cgm", &cgm.trace)] {
        let ok = trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs());
        ensure(ok, || format!("{name} objective trace increases"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data_dir = gen(dir.path(), &gravity_toml(10, 20, "poisson", 99));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let models = "gravity-exp,gravity-pow,radiation,cgm-exp,cgm-pow";
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run_with("evaluate", &data_dir, &["--models", models, "--workers", workers, "--out", s(out)]);
        ensure(o.code == 0, || format!("evaluate exit {}: {}", o.code, o.stderr))?;
    }
    for f in ["params.json", "scores.csv", "summary.json"] {
        let same = std::fs::read(a.join(f)).ok() == std::fs::read(b.join(f)).ok();
        ensure(same, || format!("{f} differs between reruns"))?;
    }
    Ok(format!("{cases} random cases for CPC/IG/Pearson; monotone fit traces; byte-identical reruns"))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = gen_default(dir.path());
    let fit_dir = dir.path().join("fit");
    let o = run_with("fit", &data, &["--out", s(&fit_dir)]);
    ensure(o.code == 0, || format!("fit exit {}: {}", o.code, o.stderr))?;
    let params = fit_dir.join("params.json");
    let out = dir.path().join("eval");
    let o = run_with("evaluate", &data, &["--params", s(&params), "--out", s(&out)]);
    ensure(o.code == 0, || format!("evaluate exit {}: {}", o.code, o.stderr))?;
    let took = within(Duration::from_secs(180), start)?;

    let (header, rows) = read_scores(&out.join("scores.csv"));
    ensure(header == ["date", "model", "cpc", "ig"], || format!("scores header {header:?}"))?;
    let days = SynthConfig::default().days;
    ensure(rows.len() == days * 5, || format!("{} score rows, expected {}", rows.len(), days * 5))?;
    let names = ["gravity-exp", "gravity-pow", "radiation", "cgm-exp", "cgm-pow"];
    for (date, model, cpc, ig) in &rows {
        ensure(date.parse::<chrono::NaiveDate>().is_ok(), || format!("bad date {date}"))?;
        ensure(names.contains(&model.as_str()), || format!("bad model {model}"))?;
        ensure((0.0..=1.0).contains(cpc) && ig.is_finite() && *ig >= 0.0, || format!("bad scores {cpc} {ig}"))?;
    }
    let summary = read_json(&out.join("summary.json"));
    for key in ["first_date", "last_date", "split_date", "improvement_convention"] {
        ensure(summary[key].is_string(), || format!("summary.{key} missing"))?;
    }
    let models = summary["models"].as_array().ok_or("summary.models missing")?;
    ensure(models.len() == 5, || "summary should cover five models".into())?;
    for m in models {
        for key in ["mean_cpc", "max_cpc", "min_cpc", "mean_cpc_p1", "mean_cpc_p2", "mean_ig"] {
            ensure(m[key].is_f64(), || format!("{}: {key} is not a number", m["model"]))?;
        }
    }
    let blocks = summary["relative_improvement"].as_array().ok_or("relative_improvement missing")?;
    ensure(blocks.len() == 6, || format!("{} improvement blocks, expected 6", blocks.len()))?;
    Ok(format!("gen, fit, evaluate exit 0 in {took:.2?}; {} score rows; summary schema valid", rows.len()))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("metric exactness", metric_exactness),
        ("gravity recovery", gravity_recovery),
        ("cgm recovery", cgm_recovery),
        ("radiation oracle equivalence", radiation_oracles),
        ("cgm improvement over gravity", improvement_over_gravity),
        ("synchronicity self-test", sync_self_test),
        ("invariant suites", invariants),
        ("end-to-end pipeline", end_to_end),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
