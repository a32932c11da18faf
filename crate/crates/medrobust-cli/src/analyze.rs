//! `analyze`: estimate natural direct and indirect effects from a CSV.

use std::path::PathBuf;

use medrobust::data::{EstimateReport, OutcomeKind, PositivityReport};
use medrobust::error::{Error, Result};
use medrobust::estimators::{EffectKind, EffectScale, EstimatorChoice};
use medrobust::inference::{
    bootstrap_multi, sandwich_effect, BootstrapOptions, InferenceMethod, SandwichOptions,
};
use medrobust::nuisance::fit_nuisances;
use medrobust::regression::FitOptions;
use medrobust::stabilized::effect_with;

use crate::common::{
    csv_opt, parse_effect, parse_estimator, parse_inference, parse_scale, to_canonical_json,
    SchemaArgs, SpecArgs,
};
use crate::manifest::ManifestBuilder;

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub specs: SpecArgs,
    /// Point estimator for the mediation functional theta0.
    #[arg(long, value_name = "NAME", default_value = "triply", value_parser = parse_estimator)]
    pub estimator: EstimatorChoice,
    /// Effects to report, comma separated.
    #[arg(
        long,
        value_name = "LIST",
        value_delimiter = ',',
        default_value = "nde,nie,total",
        value_parser = parse_effect
    )]
    pub effects: Vec<EffectKind>,
    /// Effect scales, comma separated. Ratio scales need a binary outcome;
    /// the total effect is always reported on the difference scale.
    #[arg(
        long,
        value_name = "LIST",
        value_delimiter = ',',
        default_value = "difference",
        value_parser = parse_scale
    )]
    pub scale: Vec<EffectScale>,
    /// Uncertainty method. Sandwich is derived for the triply robust
    /// estimator only; every estimator supports bootstrap.
    #[arg(long, value_name = "METHOD", default_value = "sandwich", value_parser = parse_inference)]
    pub inference: InferenceMethod,
    /// Bootstrap replicates (bootstrap inference only).
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub boot_reps: usize,
    /// Confidence level for intervals.
    #[arg(long, value_name = "LEVEL", default_value_t = 0.95)]
    pub ci_level: f64,
    /// RNG seed for bootstrap resampling.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the report, its CSV rendering, and the manifest.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, serde::Serialize)]
struct AnalyzeReport {
    command: String,
    n: usize,
    outcome_kind: OutcomeKind,
    estimator: String,
    inference: String,
    estimates: Vec<EstimateReport>,
    positivity: PositivityReport,
    warnings: Vec<String>,
}

/// Deduplicated `(effect, scale)` pairs in request order, with the total
/// effect pinned to the difference scale.
fn requested_pairs(args: &AnalyzeArgs) -> Vec<(EffectKind, EffectScale)> {
    let mut pairs = Vec::new();
    for &scale in &args.scale {
        for &effect in &args.effects {
            let pair = match effect {
                EffectKind::Total => (EffectKind::Total, EffectScale::Difference),
                other => (other, scale),
            };
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
    }
    pairs
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    let seed = matches!(args.inference, InferenceMethod::Bootstrap).then_some(args.seed);
    let mut manifest = ManifestBuilder::new(
        "analyze",
        seed,
        serde_json::json!({
            "schema": args.schema.config_json(),
            "specs": args.specs.config_json(),
            "estimator": args.estimator.label(),
            "effects": args.effects.iter().map(|e| e.label()).collect::<Vec<_>>(),
            "scale": args.scale.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "inference": args.inference.label(),
            "boot_reps": args.boot_reps,
            "ci_level": args.ci_level,
            "seed": args.seed,
        }),
    );

    let data = args.schema.load()?;
    let specs = args.specs.resolve(&data)?;
    if data.outcome_kind() == OutcomeKind::Continuous
        && args.scale.iter().any(|s| *s != EffectScale::Difference)
    {
        return Err(Error::Domain(
            "risk_ratio and odds_ratio scales are defined for probabilities; \
             the outcome is continuous, so only the difference scale applies"
                .into(),
        ));
    }
    let pairs = requested_pairs(args);
    let fit_options = FitOptions::default();
    let fit = fit_nuisances(&data, &specs, &fit_options)?;

    let mut estimates = Vec::new();
    let mut warnings = Vec::new();
    match args.inference {
        InferenceMethod::Sandwich => {
            if args.estimator != EstimatorChoice::Triply {
                return Err(Error::Config(format!(
                    "sandwich inference is derived for the triply robust estimator only; \
                     rerun --estimator {} with --inference bootstrap",
                    args.estimator.label()
                )));
            }
            let options = SandwichOptions {
                ci_level: args.ci_level,
                ..SandwichOptions::default()
            };
            for &(effect, scale) in &pairs {
                let inf = sandwich_effect(&data, &fit, effect, scale, &options)?;
                for w in &inf.warnings {
                    warnings.push(format!("{} {}: {w}", effect.label(), scale.label()));
                }
                estimates.push(EstimateReport {
                    estimand: effect.label().into(),
                    scale: scale.label().into(),
                    estimator: args.estimator.label().into(),
                    point: inf.estimate,
                    se: Some(inf.se),
                    ci_level: Some(inf.ci_level),
                    ci_low: Some(inf.ci_low),
                    ci_high: Some(inf.ci_high),
                    inference: inf.method.label().into(),
                    diagnostics: inf.diagnostics.to_map(),
                });
            }
        }
        InferenceMethod::Bootstrap => {
            let choice = args.estimator;
            let boot_options = BootstrapOptions {
                replicates: args.boot_reps,
                seed: args.seed,
                level: args.ci_level,
            };
            let statistic = |sample: &medrobust::data::MediationDataset| {
                let refit = fit_nuisances(sample, &specs, &fit_options)?;
                pairs
                    .iter()
                    .map(|&(effect, scale)| {
                        effect_with(
                            sample,
                            &refit,
                            choice,
                            effect,
                            scale,
                            &fit_options,
                            &Default::default(),
                        )
                        .map(|est| est.value)
                    })
                    .collect()
            };
            let summaries = bootstrap_multi(&data, statistic, &boot_options)?;
            for (&(effect, scale), summary) in pairs.iter().zip(summaries) {
                // Full-sample diagnostics for this pair (the bootstrap only
                // keeps the point values).
                let full = effect_with(
                    &data,
                    &fit,
                    choice,
                    effect,
                    scale,
                    &fit_options,
                    &Default::default(),
                )?;
                for w in &summary.warnings {
                    warnings.push(format!("{} {}: {w}", effect.label(), scale.label()));
                }
                let mut diagnostics = full.diagnostics.to_map();
                diagnostics.insert(
                    "bootstrap_replicates_used".into(),
                    summary.replicates_used as f64,
                );
                diagnostics.insert("bootstrap_failures".into(), summary.failures as f64);
                estimates.push(EstimateReport {
                    estimand: effect.label().into(),
                    scale: scale.label().into(),
                    estimator: choice.label().into(),
                    point: summary.point,
                    se: Some(summary.se),
                    ci_level: Some(summary.level),
                    ci_low: Some(summary.ci_low),
                    ci_high: Some(summary.ci_high),
                    inference: "bootstrap".into(),
                    diagnostics,
                });
            }
        }
    }

    let positivity = medrobust::data::empirical_positivity_report(&data);
    warnings.extend(positivity.warnings.iter().cloned());

    for report in &estimates {
        manifest.merge_diagnostics(&report.diagnostics);
    }
    manifest.record_diagnostic("n", data.n() as f64);

    let report = AnalyzeReport {
        command: "analyze".into(),
        n: data.n(),
        outcome_kind: data.outcome_kind(),
        estimator: args.estimator.label().into(),
        inference: args.inference.label().into(),
        estimates,
        positivity,
        warnings,
    };
    manifest.emit(&args.out, "analyze_report.json", &to_canonical_json(&report)?)?;

    let mut csv = String::from("estimand,scale,estimator,point,se,ci_level,ci_low,ci_high,inference\n");
    for r in &report.estimates {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.estimand,
            r.scale,
            r.estimator,
            r.point,
            csv_opt(r.se),
            csv_opt(r.ci_level),
            csv_opt(r.ci_low),
            csv_opt(r.ci_high),
            r.inference
        ));
    }
    manifest.emit(&args.out, "analyze_report.csv", &csv)?;
    let path = manifest.finish(&args.out)?;
    eprintln!(
        "analyze: wrote analyze_report.json, analyze_report.csv, {}",
        path.file_name().unwrap_or_default().to_string_lossy()
    );
    Ok(())
}
