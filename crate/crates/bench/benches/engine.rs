//! Benchmarks for the hot paths: feature assembly, the penalty-path fit
//! for a single window, and path simulation.

use chrono::Days;
use criterion::{criterion_group, criterion_main, Criterion};

use powercast::backtest::Dataset;
use powercast::calendar::DateRange;
use powercast::features::{build_feature_table, FeatureSpec};
use powercast::market::{forward_fill, ExchangeCalendar};
use powercast::models::{fit_ar24, fit_future_model};
use powercast::simulate::{simulate_paths, SimulationConfig};
use powercast::synth::{generate, SynthConfig};
use powercast::LassoConfig;

fn dataset() -> Dataset {
    let cfg = SynthConfig {
        num_days: 430,
        seed: 5,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).expect("generator config is valid");
    let calendar = ExchangeCalendar::new(data.holidays.clone());
    Dataset {
        book: forward_fill(&data.book, &calendar, 7),
        panel: data.panel,
        holidays: data.holidays,
    }
}

fn train_range(data: &Dataset) -> DateRange {
    let start = data.panel.first_date();
    DateRange::new(start, start + Days::new(364)).expect("valid range")
}

fn bench_feature_table(c: &mut Criterion) {
    let data = dataset();
    let range = DateRange::new(
        data.panel.first_date() + Days::new(40),
        data.panel.first_date() + Days::new(364),
    )
    .expect("valid range");
    c.bench_function("feature_table_325_days", |b| {
        b.iter(|| {
            build_feature_table(
                &data.panel,
                &data.book,
                &data.holidays,
                FeatureSpec::full(),
                range,
            )
            .expect("table builds")
        })
    });
}

fn bench_window_fits(c: &mut Criterion) {
    let data = dataset();
    let train = train_range(&data);
    let lasso = LassoConfig::default();
    c.bench_function("fit_future_model_28d", |b| {
        b.iter(|| {
            fit_future_model(&data.panel, &data.book, &data.holidays, train, 28, &lasso)
                .expect("fit succeeds")
        })
    });
    c.bench_function("fit_ar24", |b| {
        b.iter(|| fit_ar24(&data.panel, &data.holidays, train, &lasso).expect("fit succeeds"))
    });
}

fn bench_simulation(c: &mut Criterion) {
    let data = dataset();
    let train = train_range(&data);
    let model = fit_future_model(
        &data.panel,
        &data.book,
        &data.holidays,
        train,
        28,
        &LassoConfig::default(),
    )
    .expect("fit succeeds");
    let sim = SimulationConfig {
        num_paths: 1000,
        horizon_days: 28,
        seed: 9,
        ..SimulationConfig::default()
    };
    c.bench_function("simulate_1000_paths_28d", |b| {
        b.iter(|| simulate_paths(&model, &data.panel, &sim).expect("simulation runs"))
    });
}

criterion_group!(benches, bench_feature_table, bench_window_fits, bench_simulation);
criterion_main!(benches);
