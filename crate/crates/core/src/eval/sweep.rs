use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::protocol::{run_protocol_data, EvaluationReport, ProtocolData, ProtocolSettings};
use super::table::{format_table, TableRow};
use super::{EvalError, Result};
use crate::model::{gap_all, GapInput};
use crate::select::SelectorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: String,
    pub selector: Option<SelectorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvaluationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Cells sorted by Gap, computed over the successful cells; failed cells come last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn reports(&self) -> impl Iterator<Item = &EvaluationReport> {
        self.cells.iter().filter_map(|c| c.report.as_ref())
    }

    pub fn table(&self) -> String {
        let rows: Vec<TableRow> = self
            .cells
            .iter()
            .map(|c| match (&c.report, &c.error) {
                (Some(r), _) => TableRow::from_report(r),
                (None, err) => TableRow::failed(&c.method, err.as_deref().unwrap_or("failed")),
            })
            .collect();
        format_table(&rows)
    }
}

/// Runs one protocol per grid cell (`None` keeps every head) on shared source splits.
pub fn sweep_selectors(data: &ProtocolData, base: &ProtocolSettings, grid: &[Option<SelectorConfig>]) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(EvalError::Config("sweep grid is empty".into()));
    }
    base.validate()?;
    let shared = data.with_source_split(base)?;
    let mut cells: Vec<SweepCell> = grid
        .par_iter()
        .map(|selector| {
            let settings = ProtocolSettings { selector: *selector, ..base.clone() };
            let method = settings.method_name();
            match settings.validate().and_then(|_| run_protocol_data(&shared, &settings)) {
                Ok((_, report)) => SweepCell { method, selector: *selector, report: Some(report), error: None },
                Err(e) => SweepCell { method, selector: *selector, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();

    let mut input = GapInput::default();
    for c in &cells {
        if let Some(r) = &c.report {
            input.insert(c.method.clone(), r.test_triple());
        }
    }
    if !input.aucs.is_empty() {
        let gaps = gap_all(&input).map_err(EvalError::at(super::Stage::Score))?;
        for c in &mut cells {
            if let Some(r) = &mut c.report {
                r.gap = gaps.get(&c.method).copied();
            }
        }
    }
    cells.sort_by(|a, b| {
        let key = |c: &SweepCell| c.report.as_ref().and_then(|r| r.gap).unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b))
    });
    Ok(SweepReport { cells })
}
