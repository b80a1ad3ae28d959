use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ControlStrength;

/// Measurements of one sweep row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    /// Pose error in pixels against the conditioning keypoints.
    pub mpjpe: Option<f64>,
    #[serde(default)]
    pub auxiliary: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strength: f64,
    pub mpjpe: Option<f64>,
    pub auxiliary: BTreeMap<String, f64>,
    /// Where the row's output image was written, if anywhere.
    pub output: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepReport {
    pub rows: Vec<SweepRow>,
}

/// Runs `sample` once per strength and summarizes each output with `measure`.
///
/// Failures are recorded in their row and the sweep continues. Returns the
/// report together with the successful outputs, aligned with `strengths`.
pub fn phase_sweep<T, S, M>(strengths: &[f64], mut sample: S, mut measure: M) -> Result<(PhaseSweepReport, Vec<Option<T>>)>
where
    S: FnMut(ControlStrength) -> Result<T>,
    M: FnMut(&T) -> Result<RowMetrics>,
{
    if strengths.is_empty() {
        return Err(Error::Config("sweep needs at least one strength".into()));
    }
    let mut seen: Vec<f64> = Vec::new();
    let mut parsed = Vec::with_capacity(strengths.len());
    for &s in strengths {
        if seen.contains(&s) {
            return Err(Error::Config(format!("duplicate sweep strength {s}")));
        }
        seen.push(s);
        parsed.push(ControlStrength::new(s)?);
    }

    let mut rows = Vec::with_capacity(parsed.len());
    let mut outputs = Vec::with_capacity(parsed.len());
    for s in parsed {
        let mut row = SweepRow {
            strength: s.value(),
            mpjpe: None,
            auxiliary: BTreeMap::new(),
            output: None,
            error: None,
        };
        match sample(s) {
            Ok(out) => {
                match measure(&out) {
                    Ok(m) => {
                        row.mpjpe = m.mpjpe;
                        row.auxiliary = m.auxiliary;
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                outputs.push(Some(out));
            }
            Err(e) => {
                row.error = Some(e.to_string());
                outputs.push(None);
            }
        }
        rows.push(row);
    }
    Ok((PhaseSweepReport { rows }, outputs))
}

impl PhaseSweepReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV with one column per auxiliary metric (union over rows, sorted).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut keys: Vec<&String> = self.rows.iter().flat_map(|r| r.auxiliary.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["strength".to_string(), "mpjpe".to_string()];
        header.extend(keys.iter().map(|k| k.to_string()));
        header.extend(["output".to_string(), "error".to_string()]);
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.strength.to_string(), r.mpjpe.map(|v| v.to_string()).unwrap_or_default()];
            for k in &keys {
                rec.push(r.auxiliary.get(*k).map(|v| v.to_string()).unwrap_or_default());
            }
            rec.push(r.output.clone().unwrap_or_default());
            rec.push(r.error.clone().unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}
