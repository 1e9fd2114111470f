use serde::{Deserialize, Serialize};
use vbspca::diagnosis::{IndexKind, RbcMap};

pub const RBC_SCHEMA: &str = "vbspca-rbc/1";
pub const TOP_SENSORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorScore {
    /// 1-based sensor index.
    pub sensor: usize,
    pub tag: String,
    pub mean_rbc: f64,
}

/// Contribution matrix as written by `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbcDocument {
    pub schema: String,
    pub kind: IndexKind,
    pub onset: usize,
    pub tags: Vec<String>,
    pub undiagnosable: Vec<bool>,
    /// Samples × sensors; null where undiagnosable.
    pub values: Vec<Vec<Option<f64>>>,
    /// Largest-contribution sensor per sample, 1-based.
    pub dominant: Vec<Option<usize>>,
    /// Highest mean contributions over samples at or after the onset.
    pub top_sensors: Vec<SensorScore>,
}

impl RbcDocument {
    pub fn new(map: &RbcMap, onset: usize) -> Self {
        let values: Vec<Vec<Option<f64>>> = map
            .values
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(&map.undiagnosable)
                    .map(|(v, u)| (!u).then_some(*v))
                    .collect()
            })
            .collect();
        let dominant = (0..map.values.nrows()).map(|i| map.dominant(i).map(|k| k + 1)).collect();
        let start = onset.saturating_sub(1);
        let top_sensors = top_sensors(&values, &map.tags, start, values.len(), TOP_SENSORS);
        Self {
            schema: RBC_SCHEMA.into(),
            kind: map.kind,
            onset,
            tags: map.tags.clone(),
            undiagnosable: map.undiagnosable.clone(),
            values,
            dominant,
            top_sensors,
        }
    }
}

/// Sensors ranked by mean contribution over 0-based samples `start..end`.
pub fn top_sensors(
    values: &[Vec<Option<f64>>],
    tags: &[String],
    start: usize,
    end: usize,
    count: usize,
) -> Vec<SensorScore> {
    let end = end.min(values.len());
    if start >= end {
        return Vec::new();
    }
    let len = (end - start) as f64;
    let mut scores: Vec<SensorScore> = (0..tags.len())
        .filter_map(|k| {
            let mut sum = 0.0;
            for row in &values[start..end] {
                sum += row[k]?;
            }
            Some(SensorScore {
                sensor: k + 1,
                tag: tags[k].clone(),
                mean_rbc: sum / len,
            })
        })
        .collect();
    scores.sort_by(|a, b| b.mean_rbc.total_cmp(&a.mean_rbc).then(a.sensor.cmp(&b.sensor)));
    scores.truncate(count);
    scores
}
