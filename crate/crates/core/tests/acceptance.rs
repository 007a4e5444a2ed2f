//! Acceptance criteria. Each criterion prints one `[PASS]`/`[FAIL]` line;
//! the process exits non-zero if any fails. Pass criterion ids (`AC3`) as
//! arguments to run a subset.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{array, Array2};
use ppboot::baselines::classical_bootstrap_interval;
use ppboot::crossfit::{CrossfitConfig, LearnerSpec};
use ppboot::dataset::{split_trial, LabeledDataset};
use ppboot::estimators::regression::{logistic_fit, logistic_log_likelihood, Design};
use ppboot::estimators::{
    est_log_odds_ratio, est_logistic_coef, est_ols_coef, est_pearson_corr, est_quantile,
};
use ppboot::experiments::{
    generate_synthetic, run_coverage_study, summarize_to_tables, CellSummary, Dgp, Method,
    PredictionModel, SyntheticSpec, TrialConfig, TrialSummary,
};
use ppboot::par::with_threads;
use ppboot::ppboot::{ppboot_interval, ppboot_replicates};
use ppboot::resampling::{draw_unlabeled, phase, run_replicates, RngStream};
use ppboot::{BootstrapConfig, Estimand, EstimandSpec, LambdaMode};
use rand::Rng;

type Check = Result<String, String>;

fn cell(s: &TrialSummary, m: Method, n: usize) -> &CellSummary {
    s.cells.iter().find(|c| c.method == m && c.n == n).expect("cell present")
}

fn synthetic(dgp: Dgp, predictions: PredictionModel, total_rows: usize, seed: u64) -> LabeledDataset {
    let spec = SyntheticSpec { dgp, predictions, total_rows };
    generate_synthetic(&spec, &RngStream::new(seed, &[phase::SYNTHETIC])).expect("valid spec")
}

fn gaussian(coef: Vec<f64>) -> Dgp {
    Dgp::GaussianLinear { coef, noise_sd: 1.0, intercept: 0.5 }
}

fn study(n_grid: Vec<usize>, trials: usize, methods: Vec<Method>, estimand: Estimand, seed: u64) -> TrialConfig {
    let mut c = TrialConfig::new(n_grid, methods, estimand.into());
    c.trials = trials;
    c.bootstrap.master_seed = seed;
    c
}

/// One labeled/unlabeled split per estimand, exercising every code path.
fn estimand_cases() -> Vec<(Estimand, LabeledDataset)> {
    let cont = synthetic(gaussian(vec![1.0, -0.5]), PredictionModel::NoisyTruth { rho: 0.8 }, 700, 1);
    let logit = synthetic(
        Dgp::Logistic { coef: vec![1.0, -0.5], intercept: 0.0 },
        PredictionModel::NoisyTruth { rho: 0.8 },
        700,
        2,
    );
    let pair = synthetic(
        Dgp::BinaryPair { p11: 0.15, p10: 0.25, p01: 0.2, p00: 0.4 },
        PredictionModel::NoisyTruth { rho: 0.8 },
        700,
        3,
    );
    vec![
        (Estimand::Mean, cont.clone()),
        (Estimand::Quantile { q: 0.5 }, cont.clone()),
        (Estimand::OlsCoef { target_index: 0, intercept: true }, cont.clone()),
        (Estimand::LogisticCoef { target_index: 0, intercept: true }, logit),
        (Estimand::LogOddsRatio { exposure_column: 0 }, pair),
        (Estimand::PearsonCorr { feature_column: 0 }, cont),
    ]
}

fn ac1() -> Check {
    let mut checked = Vec::new();
    for (kind, full) in estimand_cases() {
        let stream = RngStream::new(101, &[7]);
        let (l, u) = split_trial(&full, 100, &stream.child(phase::SPLIT)).map_err(|e| e.to_string())?;
        let spec: EstimandSpec = kind.into();
        let cfg = BootstrapConfig { iterations: 500, lambda: LambdaMode::Fixed(0.0), master_seed: 101, ..Default::default() };
        let pp = ppboot_interval(&l, &u, &spec, &cfg, &stream).map_err(|e| e.to_string())?;
        let cl = classical_bootstrap_interval(&l, &spec, &cfg, &stream).map_err(|e| e.to_string())?;
        let same = pp.lower.to_bits() == cl.lower.to_bits()
            && pp.upper.to_bits() == cl.upper.to_bits()
            && pp.degenerate_iterations == cl.degenerate_iterations;
        if !same {
            return Err(format!("{}: ppboot {:?} vs classical {:?}", kind.name(), (pp.lower, pp.upper), (cl.lower, cl.upper)));
        }
        checked.push(kind.name());
    }
    Ok(format!("bit-identical for {}", checked.join(", ")))
}

fn ac2() -> Check {
    let mut checked = Vec::new();
    for (kind, full) in estimand_cases() {
        let oracle = LabeledDataset::new(full.features().to_owned(), full.outcomes().to_vec(), full.outcomes().to_vec())
            .map_err(|e| e.to_string())?;
        let stream = RngStream::new(202, &[]);
        let (l, u) = split_trial(&oracle, 150, &stream.child(phase::SPLIT)).map_err(|e| e.to_string())?;
        let cfg = BootstrapConfig { iterations: 300, ..Default::default() };
        let mut combined = ppboot_replicates(&l, &u, &kind, 1.0, &cfg, &stream).values;
        let mut imputed = run_replicates(cfg.iterations, cfg.max_degenerate_retries, &stream.child(phase::MAIN), cfg.execution, |s| {
            let idx = draw_unlabeled(u.len(), s);
            let x = u.features().select(ndarray::Axis(0), &idx);
            let f: Vec<f64> = idx.iter().map(|&i| u.predictions()[i]).collect();
            kind.evaluate(x.view(), &f).ok()?.usable()
        })
        .values;
        combined.sort_by(f64::total_cmp);
        imputed.sort_by(f64::total_cmp);
        if combined.len() != cfg.iterations || combined != imputed {
            return Err(format!("{}: replicate multisets differ", kind.name()));
        }
        checked.push(kind.name());
    }
    Ok(format!("θ*_b multiset equals the imputed multiset for {}", checked.join(", ")))
}

fn galaxy_study() -> &'static Result<TrialSummary, String> {
    static CELL: OnceLock<Result<TrialSummary, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = synthetic(Dgp::BernoulliMean { p: 0.3 }, PredictionModel::NoisyTruth { rho: 0.9 }, 10_000, 3);
        let c = study(vec![200], 200, vec![Method::Ppboot, Method::Classical, Method::PpiMean], Estimand::Mean, 3);
        run_coverage_study(&data, &c).map_err(|e| e.to_string())
    })
}

fn ac3() -> Check {
    let s = galaxy_study().as_ref()?;
    let pp = cell(s, Method::Ppboot, 200).coverage;
    let cl = cell(s, Method::Classical, 200).coverage;
    let msg = format!("coverage ppboot {pp:.3}, classical {cl:.3} (band [0.84, 0.95])");
    let band = 0.84..=0.95;
    if band.contains(&pp) && band.contains(&cl) { Ok(msg) } else { Err(msg) }
}

fn ac4() -> Check {
    let s = galaxy_study().as_ref()?;
    let ratio = cell(s, Method::Ppboot, 200).mean_width / cell(s, Method::Classical, 200).mean_width;
    let msg = format!("ppboot/classical mean width {ratio:.3} (≤ 0.8)");
    if ratio <= 0.8 { Ok(msg) } else { Err(msg) }
}

fn ac5() -> Check {
    let s = galaxy_study().as_ref()?;
    let pp = cell(s, Method::Ppboot, 200).mean_width;
    let ppi = cell(s, Method::PpiMean, 200).mean_width;
    let rel = (pp - ppi).abs() / ppi;
    let msg = format!("ppboot {pp:.5} vs ppi-mean {ppi:.5}, relative gap {rel:.3} (≤ 0.15)");
    if rel <= 0.15 { Ok(msg) } else { Err(msg) }
}

fn ac6() -> Check {
    let data = synthetic(Dgp::BernoulliMean { p: 0.3 }, PredictionModel::PureNoise, 10_000, 6);
    let c = study(vec![200], 200, vec![Method::Ppboot, Method::PpbootTuned, Method::Classical], Estimand::Mean, 6);
    let s = run_coverage_study(&data, &c).map_err(|e| e.to_string())?;
    let tuned = cell(&s, Method::PpbootTuned, 200).mean_width;
    let plain = cell(&s, Method::Ppboot, 200).mean_width;
    let classical = cell(&s, Method::Classical, 200).mean_width;
    let msg = format!("tuned {tuned:.5}, untuned {plain:.5}, classical {classical:.5} (tuned ≤ 1.1·classical and ≤ untuned)");
    if tuned <= 1.1 * classical && tuned <= plain { Ok(msg) } else { Err(msg) }
}

fn ac7() -> Check {
    let p: f64 = 0.3;
    let n = 200;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let data = synthetic(
        Dgp::BernoulliMean { p },
        PredictionModel::Biased { offset: 5.0 * se, noise_sd: 0.3 },
        10_000,
        7,
    );
    let c = study(vec![n], 200, vec![Method::Imputed, Method::Ppboot], Estimand::Mean, 7);
    let s = run_coverage_study(&data, &c).map_err(|e| e.to_string())?;
    let imp = cell(&s, Method::Imputed, n).coverage;
    let pp = cell(&s, Method::Ppboot, n).coverage;
    let msg = format!("offset {:.4}: imputed coverage {imp:.3} (< 0.10), ppboot {pp:.3} (≥ 0.84)", 5.0 * se);
    if imp < 0.10 && pp >= 0.84 { Ok(msg) } else { Err(msg) }
}

fn ac8() -> Check {
    // The prediction column is unused: both methods fit their own models.
    let data = synthetic(gaussian(vec![1.0, -0.5, 0.25]), PredictionModel::Oracle, 3000, 8);
    let mut c = TrialConfig::new(vec![100, 200, 400], vec![Method::CrossPpboot, Method::SplitPpboot], Estimand::Mean.into());
    c.bootstrap.master_seed = 8;
    c.crossfit = Some(CrossfitConfig::new(LearnerSpec::LinearLeastSquares { intercept: true }));
    let s = run_coverage_study(&data, &c).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for n in [100, 200, 400] {
        let cross = cell(&s, Method::CrossPpboot, n).mean_width;
        let split = cell(&s, Method::SplitPpboot, n).mean_width;
        ok &= cross <= split;
        parts.push(format!("n={n}: cross {cross:.4} vs split {split:.4}"));
    }
    let msg = parts.join("; ");
    if ok { Ok(msg) } else { Err(msg) }
}

/// Coarse-to-fine grid maximiser of the logistic log-likelihood over
/// (slope, intercept).
fn grid_logistic(x: &Array2<f64>, y: &[f64]) -> (f64, f64) {
    let ll = |b: f64, a: f64| logistic_log_likelihood(Design::new(x.view(), true), y, &[b, a]);
    let (mut cb, mut ca, mut step) = (0.0, 0.0, 0.5);
    let mut radius = 12.0;
    for _ in 0..9 {
        let k = (radius / step) as i64;
        let mut best = (f64::NEG_INFINITY, cb, ca);
        for i in -k..=k {
            for j in -k..=k {
                let (b, a) = (cb + i as f64 * step, ca + j as f64 * step);
                let v = ll(b, a);
                if v > best.0 {
                    best = (v, b, a);
                }
            }
        }
        (cb, ca) = (best.1, best.2);
        radius = 2.0 * step;
        step /= 5.0;
    }
    (cb, ca)
}

fn ac9() -> Check {
    let mut notes = Vec::new();
    // Logistic vs likelihood grid.
    let x = array![[-2.0], [-1.0], [0.0], [1.0], [2.0]];
    let y = [0.0, 0.0, 1.0, 0.0, 1.0];
    let (gb, _) = grid_logistic(&x, &y);
    let fit = est_logistic_coef(x.view(), &y, 0, true).map_err(|e| e.to_string())?.value;
    if (fit - gb).abs() > 1e-4 {
        return Err(format!("logistic 5-row example: IRLS {fit} vs grid {gb}"));
    }
    let mut rng = RngStream::new(909, &[]).rng();
    let mut compared = 0;
    while compared < 25 {
        let rows = rng.random_range(4..=8usize);
        let x = Array2::from_shape_fn((rows, 1), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..rows).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let Ok(beta) = logistic_fit(Design::new(x.view(), true), &y) else { continue };
        if beta.iter().any(|b| b.abs() > 8.0) {
            continue;
        }
        let (gb, ga) = grid_logistic(&x, &y);
        if (beta[0] - gb).abs() > 1e-4 || (beta[1] - ga).abs() > 1e-4 {
            return Err(format!("logistic {rows}-row instance: IRLS {beta:?} vs grid ({gb}, {ga})"));
        }
        compared += 1;
    }
    notes.push(format!("logistic matches grid on {} instances", compared + 1));

    // OLS on noiseless data.
    for trial in 0..20 {
        let truth: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = Array2::from_shape_fn((20, 3), |_| rng.random_range(-5.0..5.0));
        let y: Vec<f64> = x
            .outer_iter()
            .map(|r| truth[3] + r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        for (j, &want) in truth.iter().take(3).enumerate() {
            let got = est_ols_coef(x.view(), &y, j, true).map_err(|e| e.to_string())?.value;
            if (got - want).abs() > 1e-10 {
                return Err(format!("OLS trial {trial}, coefficient {j}: {got} vs {want}"));
            }
        }
    }
    notes.push("OLS exact to 1e-10".into());

    let q = est_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).map_err(|e| e.to_string())?.value;
    let q99 = est_quantile(&[3.0, 1.0, 2.0], 0.99).map_err(|e| e.to_string())?.value;
    if q != 2.0 || q99 != 3.0 {
        return Err(format!("quantile examples gave {q}, {q99}"));
    }
    let mut exposure = Vec::new();
    let mut outcome = Vec::new();
    for (e, o, count) in [(1.0, 1.0, 20), (0.0, 0.0, 20), (1.0, 0.0, 10), (0.0, 1.0, 10)] {
        exposure.extend(std::iter::repeat_n(e, count));
        outcome.extend(std::iter::repeat_n(o, count));
    }
    let lor = est_log_odds_ratio(ndarray::ArrayView1::from(&exposure), &outcome).map_err(|e| e.to_string())?.value;
    if (lor - 4f64.ln()).abs() > 1e-12 {
        return Err(format!("log odds ratio {lor} vs log 4"));
    }
    let r = est_pearson_corr(array![[1.0], [2.0], [3.0], [4.0]].view(), &[1.0, 3.0, 2.0, 4.0], 0)
        .map_err(|e| e.to_string())?
        .value;
    if (r - 0.8).abs() > 1e-12 {
        return Err(format!("pearson {r} vs 0.8"));
    }
    notes.push("quantile/log-odds/correlation examples exact".into());
    Ok(notes.join("; "))
}

fn render(data: &LabeledDataset, c: &TrialConfig, threads: usize) -> Result<String, String> {
    let tables = with_threads(Some(threads), || run_coverage_study(data, c))
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())
        .map(|s| summarize_to_tables(&s))?;
    Ok(format!(
        "{}{}{}",
        tables.aggregate_csv().map_err(|e| e.to_string())?,
        tables.displayed_csv().map_err(|e| e.to_string())?,
        tables.to_json()
    ))
}

fn ac10() -> Check {
    let cont = synthetic(gaussian(vec![1.0, -0.5]), PredictionModel::NoisyTruth { rho: 0.9 }, 1500, 10);
    let mut mean = study(vec![50, 100], 10, vec![Method::Ppboot, Method::PpbootTuned, Method::Classical, Method::Imputed, Method::PpiMean], Estimand::Mean, 10);
    mean.bootstrap.iterations = 200;
    let mut cross = study(vec![60], 8, vec![Method::CrossPpboot, Method::SplitPpboot], Estimand::OlsCoef { target_index: 0, intercept: true }, 11);
    cross.bootstrap.iterations = 200;
    cross.crossfit = Some(CrossfitConfig::new(LearnerSpec::Knn { k: 5 }));
    let logit = synthetic(Dgp::Logistic { coef: vec![1.0], intercept: 0.0 }, PredictionModel::NoisyTruth { rho: 0.9 }, 800, 12);
    let mut lg = study(vec![150], 6, vec![Method::Ppboot, Method::PpbootTuned], Estimand::LogisticCoef { target_index: 0, intercept: true }, 12);
    lg.bootstrap.iterations = 100;
    for (name, data, c) in [("mean", &cont, &mean), ("crossfit", &cont, &cross), ("logistic", &logit, &lg)] {
        let one = render(data, c, 1)?;
        for threads in [2, 4] {
            if render(data, c, threads)? != one {
                return Err(format!("{name} study differs between 1 and {threads} threads"));
            }
        }
    }
    Ok("mean, crossfit and logistic studies byte-identical across 1, 2 and 4 threads".into())
}

fn ac11() -> Check {
    let rho = PredictionModel::NoisyTruth { rho: 0.9 };
    let cont = synthetic(gaussian(vec![1.0, -0.5]), rho, 5000, 21);
    let logit = synthetic(Dgp::Logistic { coef: vec![1.0, -0.5], intercept: 0.0 }, rho, 2500, 22);
    let pair = synthetic(Dgp::BinaryPair { p11: 0.15, p10: 0.25, p01: 0.2, p00: 0.4 }, rho, 5000, 23);
    let cases: Vec<(Estimand, &LabeledDataset, usize)> = vec![
        (Estimand::Mean, &cont, 200),
        (Estimand::Quantile { q: 0.5 }, &cont, 200),
        (Estimand::OlsCoef { target_index: 0, intercept: true }, &cont, 200),
        (Estimand::LogisticCoef { target_index: 0, intercept: true }, &logit, 300),
        (Estimand::LogOddsRatio { exposure_column: 0 }, &pair, 300),
        (Estimand::PearsonCorr { feature_column: 0 }, &cont, 200),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, (kind, data, n)) in cases.into_iter().enumerate() {
        let c = study(vec![n], 50, vec![Method::Ppboot], kind, 30 + i as u64);
        let s = run_coverage_study(data, &c).map_err(|e| format!("{}: {e}", kind.name()))?;
        let cov = cell(&s, Method::Ppboot, n).coverage;
        ok &= cov >= 0.80;
        parts.push(format!("{} {cov:.2}", kind.name()));
    }
    let msg = format!("ppboot coverage (≥ 0.80): {}", parts.join(", "));
    if ok { Ok(msg) } else { Err(msg) }
}

fn main() {
    let criteria: [(&str, &str, u64, fn() -> Check); 11] = [
        ("AC1", "lambda = 0 equals the classical bootstrap", 10, ac1),
        ("AC2", "perfect-prediction collapse", 5, ac2),
        ("AC3", "coverage, mean estimand", 600, ac3),
        ("AC4", "width gain over classical", 600, ac4),
        ("AC5", "agreement with the PPI mean interval", 600, ac5),
        ("AC6", "power tuning never hurts", 600, ac6),
        ("AC7", "imputed approach undercovers", 600, ac7),
        ("AC8", "cross-fitting beats data splitting", 900, ac8),
        ("AC9", "estimator oracles", 60, ac9),
        ("AC10", "determinism across thread counts", 300, ac10),
        ("AC11", "all six estimands cover", 1200, ac11),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (id, title, limit, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let (pass, detail) = match result {
            Ok(d) if in_time => (true, d),
            Ok(d) => (false, format!("{d}; exceeded the {limit} s limit")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        writeln!(out, "[{tag}] {id} {title} ({:.1} s): {detail}", elapsed.as_secs_f64()).unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
