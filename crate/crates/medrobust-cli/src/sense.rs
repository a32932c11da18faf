//! `sensitivity`: trace the natural direct effect over a grid of mediator
//! confounding departures.

use std::path::PathBuf;

use medrobust::error::{Error, Result};
use medrobust::estimators::EstimatorOptions;
use medrobust::inference::BootstrapOptions;
use medrobust::regression::FitOptions;
use medrobust::sensitivity::{sensitivity_curve, SelectionFunction, SensitivityCurve};

use crate::common::{csv_opt, to_canonical_json, SchemaArgs, SpecArgs};
use crate::manifest::ManifestBuilder;

#[derive(Debug, clap::Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub specs: SpecArgs,
    /// Grid config (JSON): selection function family, optional parameters,
    /// and the lambda multipliers (must include 0).
    #[arg(long, value_name = "FILE")]
    pub grid: PathBuf,
    /// Bootstrap replicates for per-lambda intervals; 0 skips intervals.
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub boot_reps: usize,
    /// Confidence level for intervals.
    #[arg(long, value_name = "LEVEL", default_value_t = 0.95)]
    pub ci_level: f64,
    /// RNG seed for bootstrap resampling.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

/// Grid file shape: a built-in family name, optional family parameters,
/// and the multipliers.
#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    family: String,
    #[serde(default)]
    parameters: Option<serde_json::Value>,
    lambdas: Vec<f64>,
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    value: f64,
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct AsymmetricParams {
    exposed: f64,
    unexposed: f64,
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    base: f64,
    slope: f64,
}

fn parse_params<T: serde::de::DeserializeOwned>(
    family: &str,
    value: &Option<serde_json::Value>,
    default: T,
) -> Result<T> {
    match value {
        None => Ok(default),
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|err| Error::Config(format!("parameters for family '{family}': {err}"))),
    }
}

fn selection_function(config: &GridConfig) -> Result<SelectionFunction> {
    match config.family.as_str() {
        "constant" => {
            let p = parse_params(&config.family, &config.parameters, ConstantParams { value: 1.0 })?;
            Ok(SelectionFunction::Constant(p.value))
        }
        "exposure_asymmetric" => {
            let p = parse_params(
                &config.family,
                &config.parameters,
                AsymmetricParams {
                    exposed: 1.0,
                    unexposed: 0.0,
                },
            )?;
            Ok(SelectionFunction::ExposureAsymmetric {
                exposed: p.exposed,
                unexposed: p.unexposed,
            })
        }
        "mediator_linear" => {
            let p = parse_params(
                &config.family,
                &config.parameters,
                LinearParams {
                    base: 0.0,
                    slope: 1.0,
                },
            )?;
            Ok(SelectionFunction::MediatorLinear {
                base: p.base,
                slope: p.slope,
            })
        }
        other => Err(Error::Config(format!(
            "unknown selection function family '{other}' \
             (expected constant, exposure_asymmetric or mediator_linear)"
        ))),
    }
}

#[derive(Debug, serde::Serialize)]
struct SensitivityReport {
    command: String,
    family: String,
    lambdas: Vec<f64>,
    curve: SensitivityCurve,
}

pub fn run(args: &SensitivityArgs) -> Result<()> {
    let grid_text = std::fs::read_to_string(&args.grid)?;
    let grid: GridConfig = serde_json::from_str(&grid_text)
        .map_err(|err| Error::Schema(format!("{}: {err}", args.grid.display())))?;
    let t = selection_function(&grid)?;

    let mut manifest = ManifestBuilder::new(
        "sensitivity",
        (args.boot_reps > 0).then_some(args.seed),
        serde_json::json!({
            "schema": args.schema.config_json(),
            "specs": args.specs.config_json(),
            "grid_file": args.grid.display().to_string(),
            "family": grid.family,
            "lambdas": grid.lambdas,
            "boot_reps": args.boot_reps,
            "ci_level": args.ci_level,
            "seed": args.seed,
        }),
    );

    let data = args.schema.load()?;
    let specs = args.specs.resolve(&data)?;
    let boot = (args.boot_reps > 0).then(|| BootstrapOptions {
        replicates: args.boot_reps,
        seed: args.seed,
        level: args.ci_level,
    });
    let curve = sensitivity_curve(
        &data,
        &specs,
        &t,
        &grid.lambdas,
        &FitOptions::default(),
        &EstimatorOptions::default(),
        boot.as_ref(),
    )?;

    manifest.record_diagnostic("n", data.n() as f64);
    manifest.record_diagnostic("grid_points", curve.points.len() as f64);

    let report = SensitivityReport {
        command: "sensitivity".into(),
        family: grid.family.clone(),
        lambdas: grid.lambdas.clone(),
        curve,
    };
    manifest.emit(
        &args.out,
        "sensitivity_report.json",
        &to_canonical_json(&report)?,
    )?;

    let mut csv = String::from("lambda,theta0,nde,se,ci_low,ci_high\n");
    for p in &report.curve.points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.lambda,
            p.theta0,
            p.nde,
            csv_opt(p.se),
            csv_opt(p.ci_low),
            csv_opt(p.ci_high)
        ));
    }
    manifest.emit(&args.out, "sensitivity_curve.csv", &csv)?;
    let path = manifest.finish(&args.out)?;
    eprintln!(
        "sensitivity: wrote sensitivity_report.json, sensitivity_curve.csv, {}",
        path.file_name().unwrap_or_default().to_string_lossy()
    );
    Ok(())
}
