//! Shared argument groups, parsers, and file helpers for the subcommands.

use std::path::{Path, PathBuf};

use medrobust::data::{load_csv, CsvSchema, MediationDataset, OutcomeKind};
use medrobust::design::{DesignSpec, ModelTarget};
use medrobust::error::{Error, Result};
use medrobust::estimators::{EffectKind, EffectScale, EstimatorChoice};
use medrobust::inference::InferenceMethod;
use medrobust::nuisance::NuisanceSpecs;
use medrobust::regression::Link;

/// CSV location and column mapping.
#[derive(Debug, clap::Args)]
pub struct SchemaArgs {
    /// Input CSV file with a header row.
    #[arg(long, value_name = "FILE")]
    pub csv: PathBuf,
    /// Outcome column name.
    #[arg(long = "y-col", value_name = "NAME", default_value = "y")]
    pub y_col: String,
    /// Exposure column name (binary 0/1).
    #[arg(long = "e-col", value_name = "NAME", default_value = "e")]
    pub e_col: String,
    /// Mediator column name (non-negative integer levels).
    #[arg(long = "m-col", value_name = "NAME", default_value = "m")]
    pub m_col: String,
    /// Covariate column names in design order, comma separated.
    #[arg(
        long = "x-cols",
        value_name = "NAMES",
        value_delimiter = ',',
        required = true
    )]
    pub x_cols: Vec<String>,
    /// Outcome kind; inferred from the data when omitted.
    #[arg(long, value_name = "KIND", value_parser = parse_outcome_kind)]
    pub outcome_kind: Option<OutcomeKind>,
    /// Mediator support size; `max(m) + 1` when omitted.
    #[arg(long, value_name = "K")]
    pub support_size: Option<usize>,
}

impl SchemaArgs {
    pub fn load(&self) -> Result<MediationDataset> {
        let schema = CsvSchema {
            y: self.y_col.clone(),
            e: self.e_col.clone(),
            m: self.m_col.clone(),
            x: self.x_cols.clone(),
            outcome_kind: self.outcome_kind,
            support_size: self.support_size,
        };
        load_csv(&self.csv, &schema)
    }

    pub fn config_json(&self) -> serde_json::Value {
        serde_json::json!({
            "csv": self.csv.display().to_string(),
            "y_col": self.y_col,
            "e_col": self.e_col,
            "m_col": self.m_col,
            "x_cols": self.x_cols,
            "outcome_kind": self.outcome_kind,
            "support_size": self.support_size,
        })
    }
}

/// Optional working-model spec files; main-effects designs when omitted.
#[derive(Debug, clap::Args)]
pub struct SpecArgs {
    /// Outcome model spec (JSON file with target, link, terms).
    #[arg(long = "outcome-spec", value_name = "FILE")]
    pub outcome_spec: Option<PathBuf>,
    /// Mediator model spec (JSON file).
    #[arg(long = "mediator-spec", value_name = "FILE")]
    pub mediator_spec: Option<PathBuf>,
    /// Propensity model spec (JSON file).
    #[arg(long = "propensity-spec", value_name = "FILE")]
    pub propensity_spec: Option<PathBuf>,
}

impl SpecArgs {
    /// Resolve the three specs, reading files where given and filling the
    /// rest with main-effects designs (identity link for a continuous
    /// outcome, logit for a binary one).
    pub fn resolve(&self, data: &MediationDataset) -> Result<NuisanceSpecs> {
        let p = data.p();
        let outcome_link = match data.outcome_kind() {
            OutcomeKind::Continuous => Link::Identity,
            OutcomeKind::Binary => Link::Logit,
        };
        let outcome = match &self.outcome_spec {
            Some(path) => read_spec(path, ModelTarget::Outcome)?,
            None => DesignSpec::main_effects(ModelTarget::Outcome, outcome_link, p),
        };
        let mediator = match &self.mediator_spec {
            Some(path) => read_spec(path, ModelTarget::Mediator)?,
            None => DesignSpec::main_effects(ModelTarget::Mediator, Link::Logit, p),
        };
        let propensity = match &self.propensity_spec {
            Some(path) => read_spec(path, ModelTarget::Propensity)?,
            None => DesignSpec::main_effects(ModelTarget::Propensity, Link::Logit, p),
        };
        Ok(NuisanceSpecs {
            outcome,
            mediator,
            propensity,
        })
    }

    pub fn config_json(&self) -> serde_json::Value {
        let show = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "main_effects".into())
        };
        serde_json::json!({
            "outcome_spec": show(&self.outcome_spec),
            "mediator_spec": show(&self.mediator_spec),
            "propensity_spec": show(&self.propensity_spec),
        })
    }
}

fn read_spec(path: &Path, expected: ModelTarget) -> Result<DesignSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: DesignSpec = serde_json::from_str(&text)
        .map_err(|err| Error::Schema(format!("{}: {err}", path.display())))?;
    if spec.target != expected {
        return Err(Error::Config(format!(
            "{}: spec targets the {:?} model but was passed for the {:?} model",
            path.display(),
            spec.target,
            expected
        )));
    }
    // Surface term/link inconsistencies now, with the file named.
    DesignSpec::new(spec.target, spec.link, spec.terms)
        .map_err(|err| Error::Config(format!("{}: {err}", path.display())))
}

pub fn parse_outcome_kind(s: &str) -> std::result::Result<OutcomeKind, String> {
    match s {
        "continuous" => Ok(OutcomeKind::Continuous),
        "binary" => Ok(OutcomeKind::Binary),
        other => Err(format!(
            "unknown outcome kind '{other}' (expected continuous or binary)"
        )),
    }
}

pub fn parse_estimator(s: &str) -> std::result::Result<EstimatorChoice, String> {
    match s {
        "ym" => Ok(EstimatorChoice::Ym),
        "ye" => Ok(EstimatorChoice::Ye),
        "em" => Ok(EstimatorChoice::Em),
        "triply" => Ok(EstimatorChoice::Triply),
        "dag1" => Ok(EstimatorChoice::Dag1),
        "dag2" => Ok(EstimatorChoice::Dag2),
        other => Err(format!(
            "unknown estimator '{other}' (expected ym, ye, em, triply, dag1 or dag2)"
        )),
    }
}

pub fn parse_effect(s: &str) -> std::result::Result<EffectKind, String> {
    match s {
        "nde" => Ok(EffectKind::Nde),
        "nie" => Ok(EffectKind::Nie),
        "total" => Ok(EffectKind::Total),
        other => Err(format!(
            "unknown effect '{other}' (expected nde, nie or total)"
        )),
    }
}

pub fn parse_scale(s: &str) -> std::result::Result<EffectScale, String> {
    match s {
        "difference" => Ok(EffectScale::Difference),
        "risk_ratio" => Ok(EffectScale::RiskRatio),
        "odds_ratio" => Ok(EffectScale::OddsRatio),
        other => Err(format!(
            "unknown scale '{other}' (expected difference, risk_ratio or odds_ratio)"
        )),
    }
}

pub fn parse_inference(s: &str) -> std::result::Result<InferenceMethod, String> {
    match s {
        "sandwich" => Ok(InferenceMethod::Sandwich),
        "bootstrap" => Ok(InferenceMethod::Bootstrap),
        other => Err(format!(
            "unknown inference method '{other}' (expected sandwich or bootstrap)"
        )),
    }
}

/// Serialize a report as pretty JSON with a trailing newline. Output bytes
/// are a pure function of the value, which is what makes reports
/// byte-identical across reruns with the same seed.
pub fn to_canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Error::Config(format!("cannot serialize report: {err}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Render one CSV cell: optional numbers become empty cells.
pub fn csv_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Human row label for a misspecification set, mirroring results-table
/// row names ("all correct", "Y wrong", "E,M wrong").
pub fn misspec_label(flags: &[medrobust::sim::Misspec]) -> String {
    use medrobust::sim::Misspec;
    if flags.is_empty() {
        return "all correct".into();
    }
    let mut parts: Vec<&str> = flags
        .iter()
        .map(|f| match f {
            Misspec::E => "E",
            Misspec::M => "M",
            Misspec::Y => "Y",
        })
        .collect();
    parts.sort_unstable();
    format!("{} wrong", parts.join(","))
}
