//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line, then exits non-zero if any failed.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wagegap::decomposition::{DetailKind, DetailedTable, ThreefoldColumn, ThreefoldTotals};
use wagegap::design::design_labels;
use wagegap::inference::GroupDesigns;
use wagegap::mca::Anchor;
use wagegap::synth::{Distribution, GroupDgp, SyntheticSpec};
use wagegap::{
    bootstrap_decomposition, column_means, fit_mca, fit_ols, score_individuals, threefold, twofold, BootstrapConfig, Cell,
    Dataset, ModelSpec, Reference, VariableSpec,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// Published aggregate decomposition, female reference.
const GAP: f64 = 58.585;
const CHARACTERISTICS: f64 = 12.397;
const RETURNS: f64 = 46.518;
const INTERACTION: f64 = -0.330;
const MALE_MEAN: f64 = 381.615;
const DISCRIMINATION: f64 = 46.188;
const COUNTERFACTUAL: f64 = 335.427;

fn table3() -> Outcome {
    let totals = ThreefoldTotals {
        mean_a: MALE_MEAN,
        endowments: CHARACTERISTICS,
        coefficients: RETURNS,
        interaction: INTERACTION,
    };
    let d = totals.discrimination();
    let w = totals.counterfactual_wage_a();
    let g = totals.gap();
    let pass = (d - DISCRIMINATION).abs() <= 0.001 && (w - COUNTERFACTUAL).abs() <= 0.001 && (g - GAP).abs() <= 0.001;
    outcome(pass, format!("discrimination {d:.4} (published {DISCRIMINATION}), counterfactual {w:.4} (published {COUNTERFACTUAL}), gap {g:.4}"))
}

// Published variable-by-variable rows: characteristics, returns, interaction, nepotism.
const TABLE5: [(f64, f64, f64, f64); 26] = [
    (0.000, -105.103, -0.000, -105.103),
    (35.499, 217.359, 40.032, 257.390),
    (-21.739, -88.242, -35.172, -123.415),
    (-5.164, 12.745, -2.865, 9.880),
    (0.670, 2.374, 0.144, 2.518),
    (2.219, 13.676, 0.934, 14.609),
    (-8.340, 15.898, -2.138, 13.760),
    (0.185, 0.336, -0.082, 0.254),
    (-1.053, 1.250, 0.321, 1.571),
    (0.601, 1.539, -0.422, 1.117),
    (-0.625, 0.829, 0.549, 1.378),
    (-1.873, 0.220, 0.154, 0.374),
    (-1.329, 1.111, 0.335, 1.446),
    (-0.087, -0.246, 0.047, -0.199),
    (-2.927, -4.726, 3.972, -0.754),
    (0.020, -0.063, -0.087, -0.150),
    (-1.256, 0.807, 0.560, 1.367),
    (2.051, 0.136, 0.282, 0.418),
    (1.545, -0.082, -0.216, -0.298),
    (0.169, 0.234, 0.030, 0.264),
    (-0.090, 0.169, 0.068, 0.237),
    (0.742, 1.612, -0.336, 1.276),
    (6.903, -22.543, -4.896, -27.439),
    (6.025, -3.098, -1.253, -4.352),
    (0.364, 0.360, -0.315, 0.045),
    (-0.111, -0.032, 0.026, -0.006),
];
const TABLE5_OVERALL: (f64, f64, f64, f64) = (12.397, 46.518, -0.330, 46.189);

fn table5() -> Outcome {
    let spec = ModelSpec::from_json_str(include_str!("../../../configs/wage_model.json")).expect("model config");
    let labels = design_labels(&spec);
    if labels.len() != TABLE5.len() {
        return outcome(false, format!("model encodes {} columns, table has {}", labels.len(), TABLE5.len()));
    }
    let columns: Vec<ThreefoldColumn> = labels
        .into_iter()
        .zip(TABLE5)
        .map(|(label, (e, c, i, _))| ThreefoldColumn {
            label,
            endowments: e,
            coefficients: c,
            interaction: i,
        })
        .collect();
    let table = DetailedTable::from_columns(&columns, Reference::Female);
    let leaves: Vec<_> = table.rows.iter().filter(|r| r.kind != DetailKind::Subtotal).collect();

    let o = &table.overall;
    let sum_nepotism: f64 = TABLE5.iter().map(|r| r.3).sum();
    let overall_dev = [
        (o.endowments - TABLE5_OVERALL.0).abs(),
        (o.coefficients - TABLE5_OVERALL.1).abs(),
        (o.interaction - TABLE5_OVERALL.2).abs(),
        (sum_nepotism - TABLE5_OVERALL.3).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let row_dev = leaves
        .iter()
        .zip(TABLE5)
        .map(|(row, published)| (row.nepotism - published.3).abs())
        .fold(0.0, f64::max);
    let pass = leaves.len() == 26 && overall_dev <= 0.05 && row_dev <= 0.002;
    outcome(
        pass,
        format!("{} rows, max |overall - sum| = {overall_dev:.4} (tol 0.05), max |nepotism - (returns + interaction)| = {row_dev:.4} (tol 0.002)", leaves.len()),
    )
}

struct Problem {
    designs: GroupDesigns,
}

fn random_problems() -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_050_101);
    (0..100)
        .map(|i| {
            let p = 2 + i % 25;
            let spec = spec_with(random_predictors(&mut rng, p));
            let size = |rng: &mut ChaCha8Rng| (50.0 * 100f64.powf(rng.random_range(0.0..1.0))).round() as usize;
            let (n_a, n_b) = (size(&mut rng), size(&mut rng));
            let data = random_dataset(&mut rng, &spec, n_a, n_b);
            let designs = GroupDesigns::build(&data, &spec).expect("designs");
            assert_eq!(designs.design_a.n_cols(), p);
            Problem { designs }
        })
        .collect()
}

fn additivity_and_bridge(problems: &[Problem]) -> (Outcome, Outcome) {
    let mut worst_add: f64 = 0.0;
    let mut worst_bridge: f64 = 0.0;
    let mut errors = Vec::new();
    for (i, pr) in problems.iter().enumerate() {
        let d = &pr.designs;
        let (fa, fb) = match (fit_ols(&d.design_a, &d.outcome_a), fit_ols(&d.design_b, &d.outcome_b)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                errors.push(format!("dataset {i}: {e}"));
                continue;
            }
        };
        let (ma, mb) = (column_means(&d.design_a).unwrap(), column_means(&d.design_b).unwrap());
        let tw_f = twofold(&fa, &fb, &ma, &mb, Reference::Female).unwrap();
        let tw_m = twofold(&fa, &fb, &ma, &mb, Reference::Male).unwrap();
        let th_f = threefold(&fa, &fb, &ma, &mb, Reference::Female).unwrap();
        let th_m = threefold(&fa, &fb, &ma, &mb, Reference::Male).unwrap();

        for tw in [&tw_f, &tw_m] {
            let scale = abs_sum(&[tw.explained, tw.unexplained]);
            worst_add = worst_add.max((tw.explained + tw.unexplained - tw.gap).abs() / scale);
        }
        for th in [&th_f, &th_m] {
            let scale = abs_sum(&[th.endowments, th.coefficients, th.interaction]);
            worst_add = worst_add.max((th.endowments + th.coefficients + th.interaction - th.gap).abs() / scale);
        }

        let scale = abs_sum(&[th_f.endowments, th_f.coefficients, th_f.interaction]);
        let bridge = [
            tw_f.explained - th_f.endowments,
            tw_f.unexplained - (th_f.coefficients + th_f.interaction),
            tw_m.explained - (th_f.endowments + th_f.interaction),
            tw_m.unexplained - th_f.coefficients,
        ];
        for b in bridge {
            worst_bridge = worst_bridge.max(b.abs() / scale);
        }
    }
    let note = if errors.is_empty() { String::new() } else { format!("; {} fit errors: {}", errors.len(), errors.join(", ")) };
    (
        outcome(
            errors.is_empty() && worst_add <= 1e-9,
            format!("{} datasets, worst relative additivity residual {worst_add:.2e} (tol 1e-9){note}", problems.len()),
        ),
        outcome(
            errors.is_empty() && worst_bridge <= 1e-9,
            format!("{} datasets, worst relative bridge residual {worst_bridge:.2e} (tol 1e-9){note}", problems.len()),
        ),
    )
}

fn ols_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=10);
        let n = rng.random_range(k + 12..=200);
        let (x, y) = random_regression(&mut rng, n, k);
        let labels = {
            let mut l = vec![wagegap::design::ColumnLabel::intercept()];
            l.extend((1..=k).map(|j| wagegap::design::ColumnLabel {
                variable: format!("x{j}"),
                term: wagegap::design::Term::Continuous,
            }));
            l
        };
        let design = wagegap::DesignMatrix { values: x.clone(), labels };
        let fit = fit_ols(&design, &y).expect("full rank");
        let exact = exact_ols(&x, &y);
        let se = fit.std_errors();
        for j in 0..=k {
            worst = worst.max(rel_err(fit.coefficients[j], exact.coefficients[j]));
            worst = worst.max(rel_err(se[j], exact.std_errors[j]));
        }
        worst = worst.max(rel_err(fit.r_squared, exact.r_squared));
        worst = worst.max(rel_err(fit.f_statistic, exact.f_statistic));
    }
    outcome(worst <= 1e-8, format!("50 instances, worst relative error vs exact rational oracle {worst:.2e} (tol 1e-8)"))
}

fn recovery_dgp(n: usize) -> SyntheticSpec {
    let model = spec_with(vec![
        VariableSpec::continuous("age"),
        VariableSpec::categorical("edu", &["none", "primary", "higher"], "none"),
    ]);
    let group = |shift: f64, coefs: [f64; 4]| GroupDgp {
        n,
        noise_sd: 3.0,
        coefficients: ["(Intercept)", "age", "edu=primary", "edu=higher"]
            .into_iter()
            .zip(coefs)
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        predictors: [
            ("age".to_string(), Distribution::Normal { mean: 40.0 + 2.0 * shift, sd: 5.0 }),
            (
                "edu".to_string(),
                Distribution::Categorical {
                    probabilities: [("none", 0.3 - 0.1 * shift), ("primary", 0.4), ("higher", 0.3 + 0.1 * shift)]
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), v))
                        .collect(),
                },
            ),
        ]
        .into_iter()
        .collect(),
    };
    SyntheticSpec {
        seed: 0,
        model,
        group_a: group(1.0, [4.0, 0.55, 1.5, 3.0]),
        group_b: group(0.0, [3.0, 0.45, 1.0, 2.5]),
    }
}

fn recovery() -> Outcome {
    let mut spec = recovery_dgp(20_000);
    let truth = spec.true_threefold(Reference::Female).unwrap();
    let mut draws: [Vec<f64>; 3] = Default::default();
    for seed in 0..50 {
        spec.seed = seed;
        let data = spec.generate().unwrap();
        let est = GroupDesigns::build(&data, &spec.model).unwrap().threefold(Reference::Female).unwrap();
        draws[0].push(est.endowments);
        draws[1].push(est.coefficients);
        draws[2].push(est.interaction);
    }
    let want = [truth.endowments, truth.coefficients, truth.interaction];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (d, t)) in ["endowments", "coefficients", "interaction"].iter().zip(draws.iter().zip(want)) {
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        let mc_se = sd / (d.len() as f64).sqrt();
        let z = (m - t) / mc_se;
        pass &= z.abs() <= 3.0;
        parts.push(format!("{name} mean {m:.4} true {t:.4} z {z:+.2}"));
    }
    outcome(pass, format!("50 seeds, n = 20000 per group: {}", parts.join("; ")))
}

fn coverage() -> Outcome {
    let mut spec = recovery_dgp(1000);
    let truth = spec.true_threefold(Reference::Female).unwrap().endowments;
    let trials = 200;
    let mut covered = 0;
    for t in 0..trials {
        spec.seed = 10_000 + t;
        let data = spec.generate().unwrap();
        let config = BootstrapConfig { replications: 200, level: 0.95, seed: t };
        let ci = bootstrap_decomposition(&data, &spec.model, Reference::Female, &config).unwrap();
        let e = ci.get("total.endowments").unwrap();
        if e.low <= truth && truth <= e.high {
            covered += 1;
        }
    }
    let rate = covered as f64 / trials as f64;
    outcome(rate >= 0.88, format!("endowments covered in {covered}/{trials} trials ({:.1}%, need >= 88%)", 100.0 * rate))
}

fn mca() -> Outcome {
    let rows = [("no", "low"), ("no", "low"), ("yes", "mid"), ("no", "mid"), ("yes", "high"), ("yes", "high")];
    let data = Dataset::new(
        vec!["tv".into(), "fridge".into()],
        rows.iter().map(|(a, b)| vec![Cell::from(*a), Cell::from(*b)]).collect(),
    )
    .unwrap();
    let vars = vec![
        VariableSpec::categorical("tv", &["no", "yes"], "no"),
        VariableSpec::categorical("fridge", &["low", "mid", "high"], "low"),
    ];
    let anchor = Anchor { variable: "fridge".into(), level: "high".into() };
    let model = fit_mca(&data, &vars, Some(&anchor)).unwrap();
    let scores: Vec<f64> = score_individuals(&model, &data).unwrap().into_iter().map(Option::unwrap).collect();

    let cats = [("tv", "no"), ("tv", "yes"), ("fridge", "low"), ("fridge", "mid"), ("fridge", "high")];
    let z = DMatrix::from_fn(6, 5, |i, j| {
        let (a, b) = rows[i];
        let (var, level) = cats[j];
        f64::from(u8::from(if var == "tv" { a == level } else { b == level }))
    });
    let oracle = mca_oracle(&z, 4);

    let mut worst: f64 = 0.0;
    for (j, (var, level)) in cats.iter().enumerate() {
        let c = model.coordinate(var, level).unwrap();
        worst = worst.max((c.standard - oracle.column_standard[j]).abs());
    }
    for (s, o) in scores.iter().zip(&oracle.row_scores) {
        worst = worst.max((s - o).abs());
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let var_err = (var - oracle.first_inertia).abs() / oracle.first_inertia;
    let inertia_err = (model.first_inertia() - oracle.first_inertia).abs() / oracle.first_inertia;
    let pass = worst <= 1e-9 && mean.abs() <= 1e-9 && var_err <= 1e-9 && inertia_err <= 1e-9;
    outcome(
        pass,
        format!("max coordinate/score deviation {worst:.2e}, score mean {mean:.2e}, variance rel. error {var_err:.2e}, inertia rel. error {inertia_err:.2e} (tol 1e-9)"),
    )
}

fn determinism() -> Outcome {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let run_with = |threads: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_wagegap"));
        if let Some(t) = threads {
            cmd.env("RAYON_NUM_THREADS", t);
        }
        cmd.args(["decompose", "--input", &format!("{dir}/synthetic.csv"), "--model", &format!("{dir}/model.json")])
            .args(["--bootstrap", "200", "--seed", "42", "--format", "json"])
            .output()
            .expect("binary runs")
    };
    let (first, second, serial) = (run_with(None), run_with(None), run_with(Some("1")));
    let ok = [&first, &second, &serial].iter().all(|o| o.status.success());
    let same = first.stdout == second.stdout;
    let same_serial = first.stdout == serial.stdout;
    outcome(
        ok && same && same_serial && !first.stdout.is_empty(),
        format!("{} bytes, two parallel runs identical: {same}, single-threaded run identical: {same_serial}", first.stdout.len()),
    )
}

fn main() -> ExitCode {
    let problems = random_problems();
    let (additivity, bridge) = additivity_and_bridge(&problems);
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("published aggregate arithmetic", Box::new(table3)),
        ("published variable-by-variable table", Box::new(table5)),
        ("additivity on random datasets", Box::new(move || outcome(additivity.pass, additivity.detail.clone()))),
        ("twofold/threefold bridge", Box::new(move || outcome(bridge.pass, bridge.detail.clone()))),
        ("OLS vs exact oracle", Box::new(ols_oracle)),
        ("synthetic recovery", Box::new(recovery)),
        ("bootstrap coverage", Box::new(coverage)),
        ("MCA vs dense eigen oracle", Box::new(mca)),
        ("bootstrap determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2}s): {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
