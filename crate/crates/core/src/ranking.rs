//! Average-rank comparison across methods and datasets.

use thiserror::Error;

/// How tied values share ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// Tied values share the mean of the ranks they span (1.5, 1.5, 3).
    Average,
    /// Tied values share the lowest spanned rank; the next group continues
    /// from the full count (1, 1, 3).
    Competition,
    /// Tied values share a rank and the next group follows immediately
    /// (1, 1, 2).
    Dense,
}

/// Which per-method statistic is ranked, and in which direction rank 1 is
/// awarded: `BestMean`/`BestMax` give rank 1 to the largest value,
/// `WorstMean` to the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    BestMean,
    WorstMean,
    BestMax,
}

impl Criterion {
    pub fn higher_is_better(&self) -> bool {
        !matches!(self, Criterion::WorstMean)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Criterion::BestMean => "best_mean",
            Criterion::WorstMean => "worst_mean",
            Criterion::BestMax => "best_max",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("method {0} is missing a value for dataset {1}")]
    MissingCell(usize, usize),
    #[error("need at least one method and one dataset")]
    Empty,
}

/// Ranks one dataset column: `values[m]` per method, rank 1 for the best.
pub fn rank_column(values: &[f64], higher_is_better: bool, tie: TieRule) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let cmp = values[a].partial_cmp(&values[b]).unwrap();
        if higher_is_better {
            cmp.reverse()
        } else {
            cmp
        }
    });
    let mut ranks = vec![0.0; m];
    let mut pos = 0usize; // index into `order`
    let mut dense_rank = 0usize;
    while pos < m {
        let mut end = pos + 1;
        while end < m && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        dense_rank += 1;
        let shared = match tie {
            // ranks pos+1 ..= end averaged
            TieRule::Average => (pos + 1 + end) as f64 / 2.0,
            TieRule::Competition => (pos + 1) as f64,
            TieRule::Dense => dense_rank as f64,
        };
        for &idx in &order[pos..end] {
            ranks[idx] = shared;
        }
        pos = end;
    }
    ranks
}

/// Average rank per method over all dataset columns. `table[m][d]` holds the
/// ranked statistic for method `m` on dataset `d`; every row must be fully
/// populated.
pub fn average_ranks(
    table: &[Vec<f64>],
    criterion: Criterion,
    tie: TieRule,
) -> Result<Vec<f64>, RankError> {
    if table.is_empty() || table[0].is_empty() {
        return Err(RankError::Empty);
    }
    let datasets = table[0].len();
    for (m, row) in table.iter().enumerate() {
        if row.len() != datasets {
            return Err(RankError::MissingCell(m, row.len().min(datasets)));
        }
    }
    let methods = table.len();
    let mut totals = vec![0.0; methods];
    for d in 0..datasets {
        let column: Vec<f64> = table.iter().map(|row| row[d]).collect();
        let ranks = rank_column(&column, criterion.higher_is_better(), tie);
        for m in 0..methods {
            totals[m] += ranks[m];
        }
    }
    Ok(totals.iter().map(|t| t / datasets as f64).collect())
}

/// Ordinal positions (1 = lowest average rank), ties by first occurrence.
pub fn ordinal_positions(average: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..average.len()).collect();
    order.sort_by(|&a, &b| average[a].partial_cmp(&average[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0usize; average.len()];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = pos + 1;
    }
    out
}
