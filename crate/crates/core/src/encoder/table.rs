use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1, Axis};

use super::EncoderError;

/// Node features of every building over a run of consecutive steps; row
/// `t * n + i` holds building `i` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    n: usize,
    data: Array2<f64>,
}

impl FeatureTable {
    pub fn new(n: usize, dim: usize) -> Self {
        FeatureTable {
            n,
            data: Array2::zeros((0, dim)),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn steps(&self) -> usize {
        self.data.nrows() / self.n.max(1)
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn row_index(&self, t: usize, i: usize) -> usize {
        t * self.n + i
    }

    pub fn row(&self, t: usize, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(self.row_index(t, i))
    }

    /// Append one step: `features[i]` is building `i`'s vector.
    pub fn push_step(&mut self, features: &[Vec<f64>]) -> Result<(), EncoderError> {
        if features.len() != self.n {
            return Err(EncoderError::Shape(format!(
                "expected {} buildings, got {}",
                self.n,
                features.len()
            )));
        }
        for f in features {
            if f.len() != self.dim() {
                return Err(EncoderError::Shape(format!(
                    "feature length {} but table dim {}",
                    f.len(),
                    self.dim()
                )));
            }
            self.data
                .push(Axis(0), ArrayView1::from(f.as_slice()))
                .expect("row length checked");
        }
        Ok(())
    }

    /// Table rows inside the attention window ending at step `t`, oldest
    /// first. Steps before the start repeat step 0.
    pub fn window_rows(&self, t: usize, i: usize, window: usize) -> impl Iterator<Item = usize> + '_ {
        (0..=window).map(move |k| {
            let tau = (t + k).saturating_sub(window);
            self.row_index(tau, i)
        })
    }
}

/// Per-building ring buffer of the most recent `window + 1` feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHistory {
    capacity: usize,
    entries: VecDeque<Vec<f64>>,
}

impl StateHistory {
    pub fn new(window: usize) -> Self {
        StateHistory {
            capacity: window + 1,
            entries: VecDeque::with_capacity(window + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(x);
    }

    pub fn latest(&self) -> Option<&[f64]> {
        self.entries.back().map(|v| v.as_slice())
    }

    /// Exactly `capacity` entries, oldest first, front-padded by repeating
    /// the earliest stored vector.
    pub fn padded(&self) -> Vec<&[f64]> {
        let first = self.entries.front().expect("history is empty");
        let pad = self.capacity - self.entries.len();
        std::iter::repeat_n(first.as_slice(), pad)
            .chain(self.entries.iter().map(|v| v.as_slice()))
            .collect()
    }

    /// Pack histories of all buildings into a table whose last step is the current one.
    pub fn to_table(histories: &[StateHistory]) -> Result<FeatureTable, EncoderError> {
        let first = histories
            .first()
            .ok_or_else(|| EncoderError::Shape("no histories".into()))?;
        if histories.iter().any(|h| h.is_empty()) {
            return Err(EncoderError::Shape("empty history".into()));
        }
        let cap = first.capacity;
        if histories.iter().any(|h| h.capacity != cap) {
            return Err(EncoderError::Shape("histories with different windows".into()));
        }
        let dim = first.latest().unwrap().len();
        let padded: Vec<Vec<&[f64]>> = histories.iter().map(|h| h.padded()).collect();
        let mut table = FeatureTable::new(histories.len(), dim);
        for k in 0..cap {
            let step: Vec<Vec<f64>> = padded.iter().map(|p| p[k].to_vec()).collect();
            table.push_step(&step)?;
        }
        Ok(table)
    }
}
