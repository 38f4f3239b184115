use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use kernelcal::estimators::{skce_block, skce_plug_in, skce_u_stat, ucme_squared};
use kernelcal::hypothesis::{
    test_asymptotic_block, test_asymptotic_sqrt_block, test_bootstrap_u_stat, test_cme,
};
use kernelcal::io::{parse_dataset, save_dataset, write_benchmark_csv, write_dataset};
use kernelcal::metrics;
use kernelcal::synthetic::{
    run_estimator_benchmark, run_test_benchmark, EstimatorBenchmarkConfig, LocationScheme, Scenario,
    ScenarioSpec, TestBenchmarkConfig, TestChoice,
};
use kernelcal::{
    BlockVariance, Dataset, Error, ExpectationMode, Family, KernelSpec, Prediction, PredictionKernel,
    PredictionMetric, Result, TargetKernel, Temperature, TestLocations, TestReport,
};
use serde::Serialize;

use crate::args::*;
use crate::render::render;

pub fn run(cli: &Cli) -> Result<String> {
    let f = cli.format;
    match &cli.command {
        Command::Estimate(a) => estimate(a).map(|v| render(&v, f)),
        Command::Test(a) => test(a).map(|v| render(&v, f)),
        Command::Ucme(a) => ucme(a).map(|v| render(&v, f)),
        Command::Diagnose(a) => diagnose(a).map(|v| render(&v, f)),
        Command::Recalibrate(a) => recalibrate(a).map(|v| render(&v, f)),
        Command::SyntheticBenchmark(a) => benchmark(a, f),
        Command::Generate(a) => generate(a, f),
    }
}

fn kernel_spec(a: &KernelArgs, data: &Dataset) -> Result<KernelSpec> {
    let first = data.first_prediction();
    let metric = match a.metric {
        Metric::Auto => match first.family() {
            Family::Mixture => PredictionMetric::MixtureW2 { s: a.mw_order },
            Family::DiagNormal | Family::Laplace => PredictionMetric::W2,
            Family::Categorical | Family::TruncatedCountable => PredictionMetric::ParamEuclidean,
        },
        Metric::W2 => PredictionMetric::W2,
        Metric::MixtureW2 => PredictionMetric::MixtureW2 { s: a.mw_order },
        Metric::ParamEuclidean => PredictionMetric::ParamEuclidean,
    };
    let kind = match a.target_kernel {
        TargetKernelKind::Auto if first.family() == Family::Categorical => TargetKernelKind::Delta,
        TargetKernelKind::Auto => TargetKernelKind::Gaussian,
        k => k,
    };
    let target = match kind {
        TargetKernelKind::Laplacian => TargetKernel::laplacian(a.gamma.unwrap_or(1.0))?,
        TargetKernelKind::Delta => {
            if a.gamma.is_some() {
                return Err(Error::Configuration("--gamma has no effect on the delta kernel".into()));
            }
            TargetKernel::KroneckerDelta
        }
        _ => TargetKernel::gaussian(a.gamma.unwrap_or(0.5))?,
    };
    let mode = match a.expectation {
        Expectation::Analytic => ExpectationMode::Analytic,
        Expectation::MonteCarlo => ExpectationMode::MonteCarlo {
            samples: a.mc_samples,
            seed: a.mc_seed,
        },
    };
    let spec = KernelSpec::new(PredictionKernel::new(metric, a.lambda, a.nu)?, target, mode)?;
    data.check_kernel(&spec)?;
    Ok(spec)
}

fn benchmark_kernel(a: &KernelArgs, scenario: &Scenario) -> Result<KernelSpec> {
    let probe = ScenarioSpec {
        scenario: *scenario,
        n: 1,
        seed: 0,
    }
    .generate()?;
    kernel_spec(a, &probe)
}

fn estimate(a: &EstimateArgs) -> Result<serde_json::Value> {
    let data = parse_dataset(&a.data)?;
    let spec = kernel_spec(&a.kernel, &data)?;
    let report = |e: Estimator| match e {
        Estimator::PlugIn => skce_plug_in(&spec, &data),
        Estimator::Block => skce_block(&spec, &data, a.block_size),
        _ => skce_u_stat(&spec, &data),
    };
    let value = if a.estimator == Estimator::All {
        let mut map = serde_json::Map::new();
        for (name, e) in [("plug_in", Estimator::PlugIn), ("block", Estimator::Block), ("u_stat", Estimator::UStat)] {
            map.insert(name.into(), to_value(&report(e)?));
        }
        serde_json::Value::Object(map)
    } else {
        to_value(&report(a.estimator)?)
    };
    Ok(value)
}

#[derive(Serialize)]
struct TestOutput {
    #[serde(flatten)]
    report: TestReport,
    alpha: f64,
    reject: bool,
}

fn locations(a: &LocationArgs, data: &Dataset, seed: u64) -> Result<TestLocations> {
    match &a.locations {
        Some(path) => TestLocations::new(parse_dataset(path)?.into_pairs()),
        None => {
            let first = data.first_prediction();
            if first.family() != Family::DiagNormal {
                return Err(Error::Configuration(format!(
                    "test locations are only generated for diag_normal data, pass --locations for {} predictions",
                    first.family().name()
                )));
            }
            LocationScheme {
                count: a.num_locations,
                ..LocationScheme::default()
            }
            .generate(first.dim(), seed)
        }
    }
}

fn test(a: &TestArgs) -> Result<TestOutput> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let data = parse_dataset(&a.data)?;
    let spec = kernel_spec(&a.kernel, &data)?;
    let report = match a.method {
        Method::Block => test_asymptotic_block(&spec, &data, a.block_size, BlockVariance::EmpiricalStd)?,
        Method::BlockHSquared => test_asymptotic_block(&spec, &data, a.block_size, BlockVariance::HSquared)?,
        Method::SqrtBlock => test_asymptotic_sqrt_block(&spec, &data)?,
        Method::Bootstrap => test_bootstrap_u_stat(&spec, &data, a.bootstrap, a.seed)?,
        Method::Cme => {
            let locs = locations(&a.locations, &data, a.seed)?;
            let mut report = test_cme(&spec, &data, &locs)?;
            if a.locations.locations.is_none() {
                report.seed = Some(a.seed);
            }
            report
        }
    };
    Ok(TestOutput {
        reject: report.rejects(a.alpha),
        report,
        alpha: a.alpha,
    })
}

fn ucme(a: &UcmeArgs) -> Result<kernelcal::EstimateReport> {
    let data = parse_dataset(&a.data)?;
    let spec = kernel_spec(&a.kernel, &data)?;
    let locs = locations(&a.locations, &data, a.seed)?;
    ucme_squared(&spec, &data, &locs)
}

#[derive(Serialize)]
struct PinballRow {
    tau: f64,
    loss: f64,
}

#[derive(Serialize, Default)]
struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    quantile_curve: Option<metrics::QuantileCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quantile_curve_mean_abs_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pinball: Vec<PinballRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nll: Option<metrics::Nll>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    binned_ece: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_ece: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_mce: Option<f64>,
}

/// With no selection every diagnostic that applies to the data is reported.
fn diagnose(a: &DiagnoseArgs) -> Result<Diagnostics> {
    let data = parse_dataset(&a.data)?;
    let all = !a.quantile_curve && a.pinball.is_empty() && !a.nll && !a.mse && a.binned_ece.is_none() && a.oracle.is_none();
    let first = data.first_prediction();
    let univariate = first.is_univariate();
    let categorical = first.family() == Family::Categorical;
    let mut out = Diagnostics::default();
    if a.quantile_curve || (all && univariate) {
        let curve = metrics::quantile_curve(&data, &metrics::default_taus())?;
        out.quantile_curve_mean_abs_deviation = Some(curve.mean_abs_deviation());
        out.quantile_curve = Some(curve);
    }
    for &tau in &a.pinball {
        out.pinball.push(PinballRow {
            tau,
            loss: metrics::pinball_loss(&data, tau)?,
        });
    }
    if a.nll || all {
        out.nll = Some(metrics::nll(&data)?);
    }
    if a.mse || (all && !categorical) {
        out.mse = Some(metrics::mse(&data)?);
    }
    if let Some(bins) = a.binned_ece.or(if all && categorical { Some(10) } else { None }) {
        out.binned_ece = Some(metrics::binned_confidence_ece(&data, bins)?);
    }
    if let Some(path) = &a.oracle {
        let oracles: Vec<Prediction> = parse_dataset(path)?.into_pairs().into_iter().map(|(p, _)| p).collect();
        out.oracle_ece = Some(metrics::oracle_ece_paired(&data, &oracles, a.q)?);
        out.oracle_mce = Some(metrics::oracle_mce_paired(&data, &oracles)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct Written {
    output: String,
    records: usize,
}

fn recalibrate(a: &RecalibrateArgs) -> Result<Written> {
    let data = parse_dataset(&a.data)?;
    let t = Temperature::new(a.temperature)?;
    let pairs = data
        .into_pairs()
        .into_iter()
        .map(|(p, y)| Ok((p.temperature_scale(t)?, y)))
        .collect::<Result<Vec<_>>>()?;
    let scaled = Dataset::new(pairs)?;
    save_dataset(&scaled, &a.output)?;
    Ok(Written {
        output: a.output.display().to_string(),
        records: scaled.len(),
    })
}

fn scenario(a: &ScenarioArgs) -> Result<Scenario> {
    let s = match a.scenario {
        ScenarioKind::Calibrated => Scenario::CalibratedGaussian { d: a.dim },
        ScenarioKind::Uncalibrated => Scenario::UncalibratedGaussian { d: a.dim },
        ScenarioKind::Ols => Scenario::OlsRegression,
        ScenarioKind::Friedman1 => Scenario::Friedman1 { noise_sd: a.noise_sd },
    };
    s.validate()?;
    Ok(s)
}

fn benchmark(a: &BenchmarkArgs, format: Format) -> Result<String> {
    let s = scenario(&a.scenario)?;
    let kernel = benchmark_kernel(&a.kernel, &s)?;
    let result = match a.kind {
        BenchmarkKind::Estimators => {
            let mut config = EstimatorBenchmarkConfig::new(s);
            config.kernel = kernel;
            config.n_grid = a.n_grid.clone();
            config.replicates = a.replicates;
            config.seed = a.seed;
            config.ground_truth = a.ground_truth;
            config.timing = a.timing;
            run_estimator_benchmark(&config)?
        }
        BenchmarkKind::Tests => {
            let mut config = TestBenchmarkConfig::new(s);
            config.kernel = kernel;
            config.n_grid = a.n_grid.clone();
            config.replicates = a.replicates;
            config.alpha = a.alpha;
            config.seed = a.seed;
            config.timing = a.timing;
            config.methods = vec![
                TestChoice::AsymptoticBlock {
                    block_size: 2,
                    variant: BlockVariance::EmpiricalStd,
                },
                TestChoice::SqrtBlock,
                TestChoice::Bootstrap {
                    num_bootstrap: a.bootstrap,
                },
            ];
            if let Some(count) = a.cme_locations {
                config.methods.push(TestChoice::Cme {
                    scheme: LocationScheme {
                        count,
                        ..LocationScheme::default()
                    },
                });
            }
            run_test_benchmark(&config)?
        }
    };
    match &a.output {
        Some(path) => {
            write_benchmark_csv(&result, BufWriter::new(create(path)?))?;
            Ok(render(
                &Written {
                    output: path.display().to_string(),
                    records: result.rows.len(),
                },
                format,
            ))
        }
        None => {
            let mut buf = Vec::new();
            write_benchmark_csv(&result, &mut buf)?;
            Ok(String::from_utf8(buf).expect("csv output is utf-8"))
        }
    }
}

fn generate(a: &GenerateArgs, format: Format) -> Result<String> {
    let data = ScenarioSpec {
        scenario: scenario(&a.scenario)?,
        n: a.n,
        seed: a.seed,
    }
    .generate()?;
    match &a.output {
        Some(path) => {
            save_dataset(&data, path)?;
            Ok(render(
                &Written {
                    output: path.display().to_string(),
                    records: data.len(),
                },
                format,
            ))
        }
        None => {
            let mut buf = Vec::new();
            write_dataset(&data, &mut buf)?;
            Ok(String::from_utf8(buf).expect("dataset output is utf-8"))
        }
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}
