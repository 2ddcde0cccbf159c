use std::collections::BTreeMap;
use std::io::Cursor;

use boundzne::engine::{fit, fit_batch, ScaleSeries};
use boundzne::io;
use boundzne::models::{eval_model, param_box, zero_noise_value, Asymptote, ModelSpec, ParamBox, ParamVector, Sign};
use boundzne::optimizer::{minimize_box, ols_polynomial, SolveSettings};
use boundzne::stats;
use boundzne::synth::{self, generate_dataset, BenchmarkConfig, ExperimentRecord, Regime};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn all_specs() -> Vec<ModelSpec> {
    let mut specs = Vec::new();
    for bounded in [true, false] {
        for d in 1..=3 {
            specs.push(ModelSpec::polynomial(d, bounded));
            specs.push(ModelSpec::poly_exp(d, Asymptote::Fixed(0.0), bounded));
            specs.push(ModelSpec::poly_exp(d, Asymptote::Free, bounded));
        }
        specs.push(ModelSpec::exponential(Asymptote::Free, bounded));
        specs.push(ModelSpec::exponential(Asymptote::Fixed(0.0), bounded));
    }
    specs
}

fn spec_strategy() -> impl Strategy<Value = ModelSpec> {
    prop::sample::select(all_specs())
}

/// A point inside `param_box(spec)`; infinite sides are capped at ±`cap`.
fn params_in_box(spec: &ModelSpec, unit: &[f64], sign: bool, cap: f64) -> ParamVector {
    let bx = param_box(spec);
    let values = (0..spec.param_len())
        .map(|i| {
            let lo = bx.lower[i].max(-cap);
            let hi = bx.upper[i].min(cap);
            lo + unit[i] * (hi - lo)
        })
        .collect();
    if spec.has_sign() {
        ParamVector::with_sign(values, if sign { Sign::Plus } else { Sign::Minus })
    } else {
        ParamVector::new(values)
    }
}

fn lambda_set() -> impl Strategy<Value = Vec<f64>> {
    prop::sample::select(vec![
        vec![1.0, 2.0, 3.0],
        vec![1.0, 3.0, 5.0],
        vec![1.0, 2.0, 3.0, 4.0, 5.0],
        vec![1.0, 1.3, 1.6],
    ])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn bounded_zero_noise_is_physical(
        spec in spec_strategy().prop_filter("bounded", |s| s.bounded),
        unit in prop::collection::vec(0.0..=1.0f64, 5),
        sign: bool,
    ) {
        let p = params_in_box(&spec, &unit, sign, 50.0);
        let z = zero_noise_value(&spec, &p).unwrap();
        prop_assert!((-1.0..=1.0).contains(&z), "{spec} {p:?} -> {z}");
    }

    #[test]
    fn eval_at_zero_is_zero_noise_value(
        spec in spec_strategy(),
        unit in prop::collection::vec(0.0..=1.0f64, 5),
        sign: bool,
    ) {
        let p = params_in_box(&spec, &unit, sign, 3.0);
        let at_zero = eval_model(&spec, &p, 0.0).unwrap();
        let z = zero_noise_value(&spec, &p).unwrap();
        prop_assert!((at_zero - z).abs() <= 1e-12 * z.abs().max(f64::MIN_POSITIVE), "{at_zero} vs {z}");
    }

    #[test]
    fn bounded_exponential_is_linear_poly_exp(
        a in -1.0..=1.0f64,
        zeta in -1.0..=1.0f64,
        c in 1e-8..5.0f64,
        lambda in 0.0..10.0f64,
    ) {
        let exp = eval_model(&ModelSpec::exponential(Asymptote::Free, true), &ParamVector::new(vec![a, zeta, c]), lambda).unwrap();
        let pe = eval_model(&ModelSpec::poly_exp(1, Asymptote::Free, true), &ParamVector::new(vec![a, zeta, -c]), lambda).unwrap();
        prop_assert_eq!(exp, pe);
    }

    #[test]
    fn fixed_zero_asymptote_equals_pinned_free(
        spec in spec_strategy().prop_filter("has asymptote", |s| s.asymptote().is_some()),
        unit in prop::collection::vec(0.0..=1.0f64, 5),
        sign: bool,
        lambda in 0.0..6.0f64,
    ) {
        let fixed = match spec.family {
            boundzne::Family::Exponential { .. } => ModelSpec::exponential(Asymptote::Fixed(0.0), spec.bounded),
            boundzne::Family::PolyExp { degree, .. } => ModelSpec::poly_exp(degree, Asymptote::Fixed(0.0), spec.bounded),
            boundzne::Family::Polynomial { .. } => unreachable!(),
        };
        let free = ModelSpec { family: match fixed.family {
            boundzne::Family::Exponential { .. } => boundzne::Family::Exponential { asymptote: Asymptote::Free },
            boundzne::Family::PolyExp { degree, .. } => boundzne::Family::PolyExp { degree, asymptote: Asymptote::Free },
            f => f,
        }, ..fixed };
        let p = params_in_box(&fixed, &unit, sign, 3.0);
        prop_assert_eq!(p.values[0], 0.0);
        prop_assert_eq!(eval_model(&fixed, &p, lambda).unwrap(), eval_model(&free, &p, lambda).unwrap());
    }
}

/// `½ xᵀ A x - bᵀ x` with `A = MᵀM + I`.
#[derive(Debug)]
struct Quadratic {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Quadratic {
    fn new(m: &[f64], b: Vec<f64>) -> Self {
        let n = b.len();
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Self { a, b }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| x[i] * self.a[i][j] * x[j]).sum::<f64>()).sum();
        0.5 * quad - self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| (0..x.len()).map(|j| self.a[i][j] * x[j]).sum::<f64>() - self.b[i])
            .collect()
    }

    /// Enumerates every free/lower/upper assignment and returns the one
    /// satisfying the KKT conditions.
    fn kkt_solution(&self, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        let n = self.b.len();
        for code in 0..3usize.pow(n as u32) {
            let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
            let mut x = vec![0.0; n];
            for i in 0..n {
                x[i] = match state[i] {
                    1 => lower[i],
                    2 => upper[i],
                    _ => 0.0,
                };
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
            // Solve A_ff x_f = b_f - A_fa x_a by Gaussian elimination.
            let k = free.len();
            let mut m: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| {
                    let mut row: Vec<f64> = free.iter().map(|&j| self.a[i][j]).collect();
                    let rhs = self.b[i] - (0..n).filter(|j| state[*j] != 0).map(|j| self.a[i][j] * x[j]).sum::<f64>();
                    row.push(rhs);
                    row
                })
                .collect();
            for c in 0..k {
                let pivot = (c..k).max_by(|p, q| m[*p][c].abs().total_cmp(&m[*q][c].abs())).unwrap();
                m.swap(c, pivot);
                for r in 0..k {
                    if r != c {
                        let f = m[r][c] / m[c][c];
                        for cc in c..=k {
                            m[r][cc] -= f * m[c][cc];
                        }
                    }
                }
            }
            for (r, &i) in free.iter().enumerate() {
                x[i] = m[r][k] / m[r][r];
            }
            let g = self.gradient(&x);
            let ok = (0..n).all(|i| match state[i] {
                0 => lower[i] <= x[i] && x[i] <= upper[i],
                1 => g[i] >= -1e-12,
                _ => g[i] <= 1e-12,
            });
            if ok {
                return x;
            }
        }
        unreachable!("a strictly convex box QP has a KKT point")
    }
}

fn quadratic_problem() -> impl Strategy<Value = (Quadratic, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0..2.0f64, n * n),
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec((-3.0..0.0f64, 0.0..3.0f64), n),
            prop::collection::vec(0.0..=1.0f64, n),
        )
            .prop_map(|(m, b, bounds, unit)| {
                let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
                let upper: Vec<f64> = bounds.iter().map(|b| b.1).collect();
                let init = (0..lower.len()).map(|i| lower[i] + unit[i] * (upper[i] - lower[i])).collect();
                (Quadratic::new(&m, b), lower, upper, init)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solver_matches_kkt_on_convex_quadratics((q, lower, upper, init) in quadratic_problem()) {
        let bounds = ParamBox { lower: lower.clone(), upper: upper.clone() };
        // Gradient-only stopping, so the run ends where line-search
        // comparisons of f hit rounding: objective to eps, point to ~sqrt(eps).
        let settings = SolveSettings { gradient_tolerance: 1e-12, objective_rel_tolerance: 0.0, ..SolveSettings::default() };
        let out = minimize_box(|x| q.value(x), |x| q.gradient(x), &init, &bounds, &settings).unwrap();
        prop_assert!(bounds.contains(&out.point));
        let expected = q.kkt_solution(&lower, &upper);
        let optimum = q.value(&expected);
        prop_assert!(out.objective - optimum <= 1e-12 * optimum.abs().max(1.0), "{} vs {optimum}", out.objective);
        for (got, want) in out.point.iter().zip(&expected) {
            prop_assert!((got - want).abs() <= 1e-6, "{:?} vs {:?}", out.point, expected);
        }
    }

    #[test]
    fn solver_stays_in_box_and_is_deterministic(
        centre in prop::collection::vec(-4.0..4.0f64, 2),
        lower in prop::collection::vec(prop_oneof![Just(f64::NEG_INFINITY), -2.0..0.0f64], 2),
        upper in prop::collection::vec(prop_oneof![Just(f64::INFINITY), 0.0..2.0f64], 2),
    ) {
        // Shifted banana valley: non-convex, optimum often outside the box.
        let f = |x: &[f64]| (x[0] - centre[0]).powi(2) + 10.0 * (x[1] - centre[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| {
            let r = x[1] - centre[1] - x[0] * x[0];
            vec![2.0 * (x[0] - centre[0]) - 40.0 * x[0] * r, 20.0 * r]
        };
        let bounds = ParamBox { lower, upper };
        let run = || minimize_box(f, g, &[0.0, 0.0], &bounds, &SolveSettings::default()).unwrap();
        let (first, second) = (run(), run());
        prop_assert!(bounds.contains(&first.point));
        prop_assert_eq!(first, second);
    }

    #[test]
    fn ols_recovers_noiseless_polynomials(
        lambdas in lambda_set(),
        coeffs in prop::collection::vec(-1.0..1.0f64, 4),
        degree in 1usize..=3,
    ) {
        prop_assume!(lambdas.len() > degree);
        let truth = &coeffs[..=degree];
        let values = lambdas.iter().map(|l| truth.iter().rev().fold(0.0, |acc, c| acc * l + c)).collect();
        let got = ols_polynomial(&ScaleSeries::new(lambdas, values).unwrap(), degree).unwrap();
        let diff = got.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-9 * scale, "{got:?} vs {truth:?}");
    }
}

fn record_strategy() -> impl Strategy<Value = ExperimentRecord> {
    (
        lambda_set(),
        prop::collection::vec(-1.0..=1.0f64, 5),
        -1.0..=1.0f64,
        0u32..20,
        1u64..100_000,
        "[a-z]{1,6}",
        prop::option::of("[0-9]{1,3}"),
    )
        .prop_map(|(lambdas, values, ideal, repetition, shots, backend, width)| {
            let n = lambdas.len();
            let mut meta = BTreeMap::new();
            if let Some(w) = width {
                meta.insert("width".to_string(), w);
            }
            ExperimentRecord {
                id: format!("{backend}-r{repetition:02}"),
                curve_id: backend.clone(),
                backend,
                lambdas,
                expectations: values[..n].to_vec(),
                ideal,
                repetition,
                shots,
                meta,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fit_ignores_input_order(
        lambdas in lambda_set(),
        values in prop::collection::vec(-1.0..=1.0f64, 5),
        spec in spec_strategy(),
        rotation in 0usize..5,
    ) {
        let pairs: Vec<(f64, f64)> = lambdas.iter().copied().zip(values).collect();
        let mut shuffled = pairs.clone();
        shuffled.reverse();
        let k = rotation % shuffled.len();
        shuffled.rotate_left(k);
        let settings = SolveSettings::default();
        let a = fit(&ScaleSeries::from_pairs(pairs).unwrap(), &spec, &settings, 3);
        let b = fit(&ScaleSeries::from_pairs(shuffled).unwrap(), &spec, &settings, 3);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dataset_round_trips(records in prop::collection::vec(record_strategy(), 0..8)) {
        let mut buf = Vec::new();
        io::write_dataset_to(&records, &mut buf).unwrap();
        let back = io::read_dataset_from(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn results_round_trip(record in record_strategy(), spec in spec_strategy(), seed: u64) {
        let result = fit(&record.series().unwrap(), &spec, &SolveSettings::default(), seed);
        let rows = vec![io::ResultRow::new(&record, result)];
        let mut buf = Vec::new();
        io::write_results_to(&rows, &mut buf).unwrap();
        let back = io::read_results_from(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, rows);
    }
}

#[test]
fn fit_batch_is_independent_of_thread_count() {
    let config = BenchmarkConfig {
        bin_width: 0.5,
        curves_per_bin: 3,
        repetitions: 2,
        seed: 11,
        ..BenchmarkConfig::default()
    };
    let dataset = generate_dataset(&config).unwrap();
    let specs = boundzne::cli::parse_model_list("exp:a=free,polyexp:d=1:a=0,poly:d=2").unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit_batch(&dataset.records, &specs, &SolveSettings::default(), 5))
    };
    let one = run(1);
    assert_eq!(one.len(), dataset.records.len() * specs.len());
    assert_eq!(one, run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_data_is_on_the_shot_lattice_and_binned(
        seed: u64,
        shots in 1u64..5_000,
        per_bin in 1usize..4,
    ) {
        let config = BenchmarkConfig {
            bin_width: 0.25,
            curves_per_bin: per_bin,
            repetitions: 2,
            shots,
            seed,
            ..BenchmarkConfig::default()
        };
        let dataset = generate_dataset(&config).unwrap();
        prop_assert_eq!(&dataset, &generate_dataset(&config).unwrap());
        for r in &dataset.records {
            for &e in &r.expectations {
                prop_assert!((-1.0..=1.0).contains(&e));
                let k = (e + 1.0) * shots as f64 / 2.0;
                prop_assert!((k - k.round()).abs() < 1e-6, "{e} off the 2/{shots} lattice");
            }
        }
        let bins = config.bin_count().unwrap();
        for regime in &config.regimes {
            for b in 0..bins {
                let range = config.bin(b);
                let in_bin = dataset
                    .curves
                    .iter()
                    .filter(|c| c.id.starts_with(&format!("{}-b{b:03}-", regime.tag)))
                    .inspect(|c| assert!(range.contains(&c.ideal) || c.ideal == range.start, "{} outside {range:?}", c.ideal))
                    .count();
                prop_assert_eq!(in_bin, per_bin);
            }
        }
    }

    #[test]
    fn shot_sampling_is_unbiased(seed: u64, regime_harsh: bool, ideal in -0.95..0.95f64, lambda in 1.0..5.0f64) {
        const N: usize = 100_000;
        const SHOTS: u64 = 1_000;
        let regime = if regime_harsh { Regime::harsh() } else { Regime::mild() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = ideal.min(0.99);
        let curve = synth::sample_true_curve(lo..lo + 0.01, &regime, (-0.2, 0.2), "c".into(), &mut rng).unwrap();
        let e = curve.eval(lambda);
        let mean = (0..N).map(|_| synth::shot_sample(e, SHOTS, &mut rng)).sum::<f64>() / N as f64;
        let sigma = ((1.0 - e * e) / SHOTS as f64).sqrt();
        prop_assert!((mean - e).abs() < 5.0 * sigma / (N as f64).sqrt() + 1e-15, "mean {mean} vs {e}");
    }
}

fn delta_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), (-8i32..=8).prop_map(|k| f64::from(k) * 0.125), -2.0..2.0f64], 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn wilcoxon_is_sign_symmetric(delta in delta_strategy()) {
        let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
        match (stats::wilcoxon_signed_rank(&delta), stats::wilcoxon_signed_rank(&neg)) {
            (Ok(a), Ok(b)) => {
                if a.method == stats::WilcoxonMethod::Exact {
                    prop_assert_eq!(a.p_value, b.p_value);
                } else {
                    prop_assert!((a.p_value - b.p_value).abs() <= 1e-12);
                }
                prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
            }
            (Err(_), Err(_)) => prop_assert!(delta.iter().all(|d| *d == 0.0)),
            other => prop_assert!(false, "asymmetric outcome {other:?}"),
        }
    }

    #[test]
    fn holm_is_bounded_and_monotone(p in prop::collection::vec(0.0..=1.0f64, 0..30)) {
        let adj = stats::holm_adjust(&p);
        prop_assert_eq!(adj.len(), p.len());
        for (a, raw) in adj.iter().zip(&p) {
            prop_assert!(a >= raw && *a <= 1.0);
        }
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
        for w in order.windows(2) {
            prop_assert!(adj[w[0]] <= adj[w[1]]);
        }
    }

    #[test]
    fn ecdf_is_a_distribution(delta in delta_strategy(), cap in 0.1..3.0f64) {
        let e = stats::ecdf_winsorized(&delta, cap).unwrap();
        prop_assert!(e.points.len() <= delta.len());
        prop_assert_eq!(e.points.last().unwrap().1, 1.0);
        for w in e.points.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 <= w[1].1);
        }
        prop_assert!(e.points.iter().all(|(x, _)| x.abs() <= cap));
    }

    #[test]
    fn paired_summary_invariants(
        rows in prop::collection::vec((prop::option::of(-1.0..=1.0f64), prop::option::of(-3.0..=3.0f64), -1.0..=1.0f64), 1..40),
    ) {
        let mut bounded = stats::ArmOutcomes::new();
        let mut unbounded = stats::ArmOutcomes::new();
        let mut ideals = BTreeMap::new();
        for (i, (b, u, ideal)) in rows.iter().enumerate() {
            let id = format!("r{i:03}");
            bounded.insert(id.clone(), *b);
            unbounded.insert(id.clone(), *u);
            ideals.insert(id, *ideal);
        }
        let group = stats::GroupKey { family: "f".into(), lambda_set: "*".into(), backend: "*".into(), width: "*".into() };
        let s = stats::summarize_pairs(group, &bounded, &unbounded, &ideals, rows.len());
        prop_assert!(s.coverage_matched <= s.coverage_bounded.min(s.coverage_unbounded));
        for (mae, mse) in [(s.mae_bounded, s.mse_bounded), (s.mae_unbounded, s.mse_unbounded)] {
            if let (Some(mae), Some(mse)) = (mae, mse) {
                prop_assert!(mae.mean <= mse.mean.sqrt() * (1.0 + 1e-12));
            }
        }
        let c = stats::coverage_summary(&bounded, &unbounded, rows.len());
        prop_assert_eq!(c.k(), s.k);
    }
}

#[test]
fn summary_export_is_pure() {
    let config = BenchmarkConfig {
        bin_width: 0.5,
        curves_per_bin: 4,
        repetitions: 2,
        lambda_sets: vec![vec![1.0, 2.0, 3.0]],
        seed: 3,
        ..BenchmarkConfig::default()
    };
    let dataset = generate_dataset(&config).unwrap();
    let specs = boundzne::cli::parse_model_list("polyexp:d=1:a=0").unwrap();
    let by_id: BTreeMap<&str, &ExperimentRecord> = dataset.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let rows: Vec<io::ResultRow> = fit_batch(&dataset.records, &specs, &SolveSettings::default(), 1)
        .into_iter()
        .map(|item| io::ResultRow::new(by_id[item.record_id.as_str()], item.result))
        .collect();
    let table = io::summarize_results(&rows, io::GroupBy::ALL).unwrap();
    assert_eq!(io::render_summary(&table, 0.05), io::render_summary(&table.clone(), 0.05));
    let mut reversed = rows.clone();
    reversed.reverse();
    assert_eq!(table, io::summarize_results(&reversed, io::GroupBy::ALL).unwrap());
}
