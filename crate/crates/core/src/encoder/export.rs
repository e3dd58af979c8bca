use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EncoderError;

/// One attention weight: building `building_id`, head `head`, attending to
/// the step `offset` steps before the current one (`0` is the current step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub building_id: usize,
    pub head: usize,
    pub offset: i64,
    pub weight: f64,
}

/// `weights[i][h]` lists the window oldest-first, as returned by
/// [`super::attention_weights`].
pub fn write_attention_csv<W: Write>(
    writer: W,
    building_ids: &[usize],
    weights: &[Vec<Vec<f64>>],
) -> Result<(), EncoderError> {
    if building_ids.len() != weights.len() {
        return Err(EncoderError::Shape(format!(
            "{} building ids for {} weight sets",
            building_ids.len(),
            weights.len()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    for (&id, heads) in building_ids.iter().zip(weights) {
        for (h, alpha) in heads.iter().enumerate() {
            let span = alpha.len() as i64 - 1;
            for (k, &a) in alpha.iter().enumerate() {
                let row = AttentionRow { building_id: id, head: h, offset: k as i64 - span, weight: a };
                w.serialize(row).map_err(|e| EncoderError::Parse(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_attention_csv<R: Read>(reader: R) -> Result<Vec<AttentionRow>, EncoderError> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| EncoderError::Parse(e.to_string())))
        .collect()
}
