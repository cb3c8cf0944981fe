use super::ContingencyTable;
use crate::error::{Error, Result};
use crate::stats::{chi2_sf, TestResult};

/// Pearson chi-square test that all rows share one category distribution.
///
/// Columns with a zero total are dropped first. Expected cells below 1 are
/// flagged in `detail["warning"]` but do not fail the test.
pub fn chi2_homogeneity(t: &ContingencyTable) -> Result<TestResult> {
    if t.rows() < 2 {
        return Err(Error::Precondition(format!(
            "chi-square homogeneity needs at least 2 rows, got {}",
            t.rows()
        )));
    }
    let row_sums = t.row_sums();
    if let Some(r) = row_sums.iter().position(|&s| s == 0) {
        return Err(Error::DegenerateTable(format!("row {} is empty", r + 1)));
    }
    let col_sums = t.col_sums();
    let kept: Vec<usize> = (0..t.cols()).filter(|&c| col_sums[c] > 0).collect();
    let dropped: Vec<i64> = (0..t.cols())
        .filter(|&c| col_sums[c] == 0)
        .map(|c| c as i64 + 1)
        .collect();
    if kept.len() < 2 {
        return Err(Error::DegenerateTable(format!(
            "{} non-empty column(s), need at least 2",
            kept.len()
        )));
    }
    let total: u64 = row_sums.iter().sum();
    let total = total as f64;

    let mut statistic = 0.0;
    let mut min_expected = f64::INFINITY;
    for (row, &row_sum) in t.counts.iter().zip(&row_sums) {
        for &c in &kept {
            let expected = row_sum as f64 * col_sums[c] as f64 / total;
            let diff = row[c] as f64 - expected;
            statistic += diff * diff / expected;
            min_expected = min_expected.min(expected);
        }
    }
    let dof = ((t.rows() - 1) * (kept.len() - 1)) as u64;
    let p = chi2_sf(statistic, dof)?;

    let mut result = TestResult::new("chi2_homogeneity", statistic, Some(dof), p)
        .with("dropped_columns", dropped)
        .with("min_expected", min_expected);
    if p == 0.0 {
        result = result.with("p_underflow", 1i64);
    }
    if min_expected < 1.0 {
        result = result.with(
            "warning",
            format!(
                "minimum expected cell {min_expected:.3} < 1; chi-square approximation is poor"
            ),
        );
    }
    Ok(result)
}
