//! File formats: instances and game values in, reports and plans out.
//!
//! Every JSON document starts with `format` and `version` fields. Readers
//! reject other formats and versions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use mpbap_core::game::{Allocation, EpmOutcome, GameAnalysis, PortSavings, MAX_PLAYERS};
use mpbap_core::graph::CostBreakdown;
use mpbap_core::model::{Instance, ModelError};
use mpbap_core::search::{CutPolicy, InfeasibilityCertificate, Plan, SolveOptions, SolveReport, SolveStatus, TimeShares};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const INSTANCE_FORMAT: &str = "mpbap-instance";
pub const REPORT_FORMAT: &str = "mpbap-report";
pub const GAME_REPORT_FORMAT: &str = "mpbap-game-report";
pub const GAME_VALUES_FORMAT: &str = "mpbap-game-values";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: at `{at}`: {message}")]
    Parse { path: PathBuf, at: String, message: String },
    #[error("{path}: expected format `{expected}` version {VERSION}, found `{found}` version {version}")]
    Format { path: PathBuf, expected: &'static str, found: String, version: u32 },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ModelError },
    #[error("{path}: {message}")]
    GameValues { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_owned(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Write { path: path.to_owned(), source })
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| IoError::Parse {
        path: path.to_owned(),
        at: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn check_header(path: &Path, text: &str, expected: &'static str) -> Result<(), IoError> {
    let h: Header = parse(path, text)?;
    if h.format != expected || h.version != VERSION {
        return Err(IoError::Format { path: path.to_owned(), expected, found: h.format, version: h.version });
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    instance: Instance,
}

pub fn instance_to_json(instance: &Instance) -> String {
    to_json(&InstanceFile { format: INSTANCE_FORMAT.into(), version: VERSION, instance: instance.clone() })
}

pub fn parse_instance(path: &Path, text: &str) -> Result<Instance, IoError> {
    check_header(path, text, INSTANCE_FORMAT)?;
    let file: InstanceFile = parse(path, text)?;
    file.instance.validate().map_err(|source| IoError::Invalid { path: path.to_owned(), source })?;
    Ok(file.instance)
}

pub fn read_instance(path: &Path) -> Result<Instance, IoError> {
    parse_instance(path, &read_text(path)?)
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), IoError> {
    write_text(path, &instance_to_json(instance))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub seconds: TimeShares,
    pub percent: TimeShares,
}

/// Solve report as written to disk. Timing is left out unless requested,
/// so that reports of identical runs compare equal byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub instance: String,
    pub cut_policy: CutPolicy,
    pub time_limit: Option<f64>,
    pub final_mip_fraction: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub gap_percent: Option<f64>,
    pub root_lower_bound: Option<f64>,
    pub nodes: usize,
    pub cg_iterations: usize,
    pub columns: usize,
    pub cuts: usize,
    pub final_mip_used: bool,
    pub cost_breakdown: Option<CostBreakdown>,
    pub infeasibility: Option<InfeasibilityCertificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl ReportFile {
    pub fn new(descriptor: &str, options: &SolveOptions, report: &SolveReport, timing: bool) -> ReportFile {
        let finite = |x: f64| x.is_finite().then_some(x);
        ReportFile {
            format: REPORT_FORMAT.into(),
            version: VERSION,
            instance: descriptor.into(),
            cut_policy: options.cut_policy,
            time_limit: finite(options.time_limit),
            final_mip_fraction: options.final_mip_fraction,
            status: report.status,
            objective: report.objective,
            lower_bound: finite(report.lower_bound),
            gap_percent: report.gap_percent,
            root_lower_bound: report.root_lower_bound,
            nodes: report.nodes,
            cg_iterations: report.cg_iterations,
            columns: report.columns,
            cuts: report.cuts,
            final_mip_used: report.final_mip_used,
            cost_breakdown: report.cost_breakdown,
            infeasibility: report.infeasibility.clone(),
            timing: timing.then(|| Timing {
                wall_seconds: report.wall_seconds,
                seconds: report.seconds,
                percent: report.seconds.percent(report.wall_seconds),
            }),
        }
    }
}

pub fn parse_report(path: &Path, text: &str) -> Result<ReportFile, IoError> {
    check_header(path, text, REPORT_FORMAT)?;
    parse(path, text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &to_json(value))
}

#[derive(Serialize)]
struct PlanRecord {
    ship: usize,
    port: usize,
    berth_type: usize,
    berth_index_within_type: u32,
    start: i64,
    end: i64,
    speed_to_next_knots: Option<f64>,
}

pub fn plan_to_csv(plan: &Plan) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &plan.rows {
        w.serialize(PlanRecord {
            ship: r.ship,
            port: r.port,
            berth_type: r.berth_type,
            berth_index_within_type: r.berth_index,
            start: r.start,
            end: r.end,
            speed_to_next_knots: r.speed_to_next_knots,
        })?;
    }
    if plan.rows.is_empty() {
        w.write_record(["ship", "port", "berth_type", "berth_index_within_type", "start", "end", "speed_to_next_knots"])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_plan(path: &Path, plan: &Plan) -> Result<(), IoError> {
    let text = plan_to_csv(plan).map_err(|source| IoError::Csv { path: path.to_owned(), source })?;
    write_text(path, &text)
}

/// Coalition label from a bitmask: player `i` is letter `'A' + i`.
pub fn coalition_label(mask: usize) -> String {
    (0..MAX_PLAYERS).filter(|i| mask >> i & 1 == 1).map(|i| (b'A' + i as u8) as char).collect()
}

fn label_mask(label: &str) -> Option<usize> {
    let mut mask = 0usize;
    for c in label.chars() {
        let i = (c as usize).checked_sub('A' as usize).filter(|&i| i < MAX_PLAYERS && c.is_ascii_uppercase())?;
        if mask >> i & 1 == 1 {
            return None;
        }
        mask |= 1 << i;
    }
    (mask != 0).then_some(mask)
}

#[derive(Serialize, Deserialize)]
struct GameValuesFile {
    format: String,
    version: u32,
    /// Coalition cost by label, e.g. `"AC"`.
    values: BTreeMap<String, f64>,
}

/// Players and mask-indexed values of a game-values document.
pub fn parse_game_values(path: &Path, text: &str) -> Result<(usize, Vec<f64>), IoError> {
    check_header(path, text, GAME_VALUES_FORMAT)?;
    let file: GameValuesFile = parse(path, text)?;
    let bad = |message: String| IoError::GameValues { path: path.to_owned(), message };
    let mut by_mask = BTreeMap::new();
    for (label, v) in &file.values {
        let mask = label_mask(label).ok_or_else(|| bad(format!("`{label}` is not a coalition of letters A..P")))?;
        if by_mask.insert(mask, *v).is_some() {
            return Err(bad(format!("coalition `{label}` is given twice")));
        }
    }
    let all = by_mask.keys().fold(0, |a, m| a | m);
    let players = usize::BITS as usize - all.leading_zeros() as usize;
    if players == 0 {
        return Err(bad("no coalition values".into()));
    }
    let mut values = vec![0.0; 1 << players];
    for mask in 1..1usize << players {
        values[mask] = *by_mask.get(&mask).ok_or_else(|| bad(format!("missing value for `{}`", coalition_label(mask))))?;
    }
    Ok((players, values))
}

pub fn read_game_values(path: &Path) -> Result<(usize, Vec<f64>), IoError> {
    parse_game_values(path, &read_text(path)?)
}

pub fn game_values_to_json(values: &[f64]) -> String {
    let map = (1..values.len()).map(|m| (coalition_label(m), values[m])).collect();
    to_json(&GameValuesFile { format: GAME_VALUES_FORMAT.into(), version: VERSION, values: map })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRow {
    pub coalition: String,
    pub carriers: Vec<usize>,
    pub cost: Option<f64>,
    pub proven_optimal: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerShare {
    pub player: String,
    pub carrier: Option<usize>,
    pub standalone: f64,
    pub cost: f64,
    pub relative_savings: Option<f64>,
    pub savings_share: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum EpmRow {
    Stable { max_difference: f64, players: Vec<PlayerShare> },
    CoreEmpty,
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReportFile {
    pub format: String,
    pub version: u32,
    pub instance: Option<String>,
    pub window_factor: Option<f64>,
    pub priority: Option<Vec<u32>>,
    pub coalitions: Vec<CoalitionRow>,
    pub grand_coalition_cost: Option<f64>,
    pub shapley: Option<Vec<PlayerShare>>,
    pub shapley_stable: Option<bool>,
    pub epm: Option<EpmRow>,
    pub superadditivity_violations: Vec<(String, String)>,
    pub terminal: Option<Vec<PortSavings>>,
}

fn shares(carriers: Option<&[usize]>, standalone: &[f64], a: &Allocation) -> Vec<PlayerShare> {
    let finite = |x: f64| x.is_finite().then_some(x);
    (0..a.costs.len())
        .map(|i| PlayerShare {
            player: coalition_label(1 << i),
            carrier: carriers.map(|c| c[i]),
            standalone: standalone[i],
            cost: a.costs[i],
            relative_savings: finite(a.relative_savings[i]),
            savings_share: finite(a.savings_share[i]),
        })
        .collect()
}

impl GameReportFile {
    /// Report for a game given by its values alone.
    pub fn from_values(
        values: &[f64],
        shapley: &Allocation,
        epm: Result<&EpmOutcome, String>,
        violations: &[(usize, usize)],
    ) -> GameReportFile {
        let n = shapley.costs.len();
        let standalone: Vec<f64> = (0..n).map(|i| values[1 << i]).collect();
        GameReportFile {
            format: GAME_REPORT_FORMAT.into(),
            version: VERSION,
            instance: None,
            window_factor: None,
            priority: None,
            coalitions: (1..values.len())
                .map(|m| CoalitionRow { coalition: coalition_label(m), carriers: Vec::new(), cost: Some(values[m]), proven_optimal: None, error: None })
                .collect(),
            grand_coalition_cost: values.last().copied(),
            shapley: Some(shares(None, &standalone, shapley)),
            shapley_stable: Some(shapley.stable),
            epm: Some(epm_row(None, &standalone, epm)),
            superadditivity_violations: violations.iter().map(|&(a, b)| (coalition_label(a), coalition_label(b))).collect(),
            terminal: None,
        }
    }

    pub fn from_analysis(descriptor: &str, window_factor: f64, a: &GameAnalysis) -> GameReportFile {
        let n = a.carriers.len();
        let cost = |m: usize| a.coalitions.iter().find(|c| c.mask == m).and_then(|c| c.cost);
        let standalone: Vec<f64> = (0..n).map(|i| cost(1 << i).unwrap_or(f64::NAN)).collect();
        let carriers = Some(a.carriers.as_slice());
        let epm = match (&a.epm, &a.epm_error) {
            (Some(o), _) => Some(epm_row(carriers, &standalone, Ok(o))),
            (None, Some(e)) => Some(EpmRow::Error { message: e.clone() }),
            (None, None) => None,
        };
        GameReportFile {
            format: GAME_REPORT_FORMAT.into(),
            version: VERSION,
            instance: Some(descriptor.into()),
            window_factor: Some(window_factor),
            priority: Some(a.priority.clone()),
            coalitions: a
                .coalitions
                .iter()
                .map(|c| CoalitionRow {
                    coalition: coalition_label(c.mask),
                    carriers: c.carriers.clone(),
                    cost: c.cost,
                    proven_optimal: Some(c.proven_optimal),
                    error: c.error.clone(),
                })
                .collect(),
            grand_coalition_cost: cost((1 << n) - 1),
            shapley: a.shapley.as_ref().map(|s| shares(carriers, &standalone, s)),
            shapley_stable: a.shapley.as_ref().map(|s| s.stable),
            epm,
            superadditivity_violations: a
                .superadditivity_violations
                .iter()
                .map(|&(x, y)| (coalition_label(x), coalition_label(y)))
                .collect(),
            terminal: a.terminal.clone(),
        }
    }
}

fn epm_row(carriers: Option<&[usize]>, standalone: &[f64], epm: Result<&EpmOutcome, String>) -> EpmRow {
    match epm {
        Ok(EpmOutcome::Stable { allocation, max_difference }) => {
            EpmRow::Stable { max_difference: *max_difference, players: shares(carriers, standalone, allocation) }
        }
        Ok(EpmOutcome::CoreEmpty) => EpmRow::CoreEmpty,
        Err(message) => EpmRow::Error { message },
    }
}

pub fn parse_game_report(path: &Path, text: &str) -> Result<GameReportFile, IoError> {
    check_header(path, text, GAME_REPORT_FORMAT)?;
    parse(path, text)
}
