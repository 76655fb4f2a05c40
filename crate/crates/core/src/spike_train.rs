//! Binary (time step × neuron) event matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};

/// Dense binary raster, row-major by time step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrain {
    steps: usize,
    neurons: usize,
    bits: Vec<bool>,
}

impl SpikeTrain {
    pub fn zeros(steps: usize, neurons: usize) -> Self {
        SpikeTrain {
            steps,
            neurons,
            bits: vec![false; steps * neurons],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let neurons = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(rows.len() * neurons);
        for row in rows {
            if row.len() != neurons {
                return Err(SnnError::ShapeMismatch {
                    expected: neurons,
                    actual: row.len(),
                });
            }
            bits.extend_from_slice(row);
        }
        Ok(SpikeTrain {
            steps: rows.len(),
            neurons,
            bits,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn get(&self, step: usize, neuron: usize) -> bool {
        self.bits[step * self.neurons + neuron]
    }

    pub fn set(&mut self, step: usize, neuron: usize, value: bool) {
        self.bits[step * self.neurons + neuron] = value;
    }

    pub fn row(&self, step: usize) -> &[bool] {
        &self.bits[step * self.neurons..(step + 1) * self.neurons]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.neurons];
        for step in 0..self.steps {
            for (c, s) in counts.iter_mut().zip(self.row(step)) {
                *c += usize::from(*s);
            }
        }
        counts
    }

    /// First step at which `neuron` fires.
    pub fn first_spike(&self, neuron: usize) -> Option<usize> {
        (0..self.steps).find(|&t| self.get(t, neuron))
    }

    /// `(step, neuron)` pairs in step-major order.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i / self.neurons.max(1), i % self.neurons.max(1)))
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for (step, neuron) in self.events() {
            let _ = writeln!(out, "{{\"step\":{step},\"neuron\":{neuron}}}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for n in 0..self.neurons {
            let _ = write!(out, ",n{n}");
        }
        out.push('\n');
        for step in 0..self.steps {
            let _ = write!(out, "{step}");
            for s in self.row(step) {
                out.push_str(if *s { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| SnnError::Configuration("empty spike CSV".into()))?;
        let neurons = header.split(',').count().saturating_sub(1);
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .skip(1)
                .map(|cell| match cell.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(SnnError::Configuration(format!(
                        "non-binary spike cell `{other}`"
                    ))),
                })
                .collect::<Result<Vec<bool>>>()?;
            if row.len() != neurons {
                return Err(SnnError::ShapeMismatch {
                    expected: neurons,
                    actual: row.len(),
                });
            }
            rows.push(row);
        }
        let mut train = SpikeTrain::from_rows(&rows)?;
        train.neurons = neurons;
        Ok(train)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_raster() {
        let mut t = SpikeTrain::zeros(4, 3);
        t.set(0, 2, true);
        t.set(3, 0, true);
        let back = SpikeTrain::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_train_csv_has_header() {
        let t = SpikeTrain::zeros(0, 2);
        assert_eq!(t.to_csv(), "step,n0,n1\n");
        assert_eq!(SpikeTrain::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn ndjson_lists_events() {
        let mut t = SpikeTrain::zeros(6, 3);
        t.set(5, 2, true);
        assert_eq!(t.to_ndjson(), "{\"step\":5,\"neuron\":2}\n");
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows = vec![vec![true, false], vec![true]];
        assert!(SpikeTrain::from_rows(&rows).is_err());
    }
}
