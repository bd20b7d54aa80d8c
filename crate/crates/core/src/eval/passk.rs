use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("trial matrix is empty")]
    EmptyMatrix,
    #[error("k = {k} is outside 1..={trials}")]
    KOutOfRange { k: usize, trials: usize },
    #[error("row {row} has {got} trials, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("cell value {0} is not 0 or 1")]
    NotBinary(u8),
    #[error("no oracle verdict for task {0}")]
    MissingOracle(String),
}

/// Seed of trial `trial` on task `task_id`. Distinct per cell.
pub fn cell_seed(base: u64, task_id: &str, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    h.update(task_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Rows are tasks, columns independent trials, cells 0/1 rewards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMatrix {
    pub tasks: Vec<String>,
    pub cells: Vec<Vec<u8>>,
    pub seeds: Vec<Vec<u64>>,
}

impl TrialMatrix {
    /// A matrix from raw rows, with tasks named by index and seeds from base 0.
    pub fn from_cells(cells: Vec<Vec<u8>>) -> Result<TrialMatrix, EvalError> {
        let tasks: Vec<String> = (0..cells.len()).map(|i| i.to_string()).collect();
        let seeds =
            tasks.iter().zip(&cells).map(|(t, row)| (0..row.len()).map(|j| cell_seed(0, t, j)).collect()).collect();
        let m = TrialMatrix { tasks, cells, seeds };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), EvalError> {
        let width = self.trials();
        for (row, cells) in self.cells.iter().enumerate() {
            if cells.len() != width {
                return Err(EvalError::Ragged { row, got: cells.len(), expected: width });
            }
            if let Some(&bad) = cells.iter().find(|&&c| c > 1) {
                return Err(EvalError::NotBinary(bad));
            }
        }
        Ok(())
    }

    pub fn trials(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> usize {
        self.cells.len()
    }
}

fn choose(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Probability that at least one of `k` trials drawn without replacement
/// from `n` (with `c` successes) succeeds: `1 - C(n-c, k) / C(n, k)`.
pub fn row_pass_at(n: usize, c: usize, k: usize) -> Ratio<u128> {
    let (n, c, k) = (n as u128, c as u128, k as u128);
    Ratio::from_integer(1) - Ratio::new(choose(n - c, k), choose(n, k))
}

/// Exact pass@k averaged over rows.
pub fn pass_at(m: &TrialMatrix, k: usize) -> Result<Ratio<u128>, EvalError> {
    m.check()?;
    let n = m.trials();
    if m.rows() == 0 || n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    if k == 0 || k > n {
        return Err(EvalError::KOutOfRange { k, trials: n });
    }
    let sum = m
        .cells
        .iter()
        .map(|row| row_pass_at(n, row.iter().map(|&c| usize::from(c)).sum(), k))
        .fold(Ratio::from_integer(0), |a, b| a + b);
    Ok(sum / Ratio::from_integer(m.rows() as u128))
}

pub fn ratio_to_f64(r: Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let m = TrialMatrix::from_cells(vec![vec![1, 0, 0, 0]]).unwrap();
        assert_eq!(pass_at(&m, 1).unwrap(), Ratio::new(1, 4));
        assert_eq!(pass_at(&m, 4).unwrap(), Ratio::from_integer(1));
        assert_eq!(pass_at(&m, 2).unwrap(), Ratio::new(1, 2));
    }

    #[test]
    fn errors() {
        let empty = TrialMatrix::from_cells(vec![]).unwrap();
        assert_eq!(pass_at(&empty, 1), Err(EvalError::EmptyMatrix));
        let m = TrialMatrix::from_cells(vec![vec![1, 0]]).unwrap();
        assert_eq!(pass_at(&m, 3), Err(EvalError::KOutOfRange { k: 3, trials: 2 }));
        assert!(TrialMatrix::from_cells(vec![vec![1, 0], vec![1]]).is_err());
    }

    #[test]
    fn seeds_are_distinct() {
        let mut all: Vec<u64> = (0..20).flat_map(|t| (0..8).map(move |j| cell_seed(3, &format!("t{t}"), j))).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 160);
    }
}
