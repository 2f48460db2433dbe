//! Pearson χ² test of independence on r×c contingency tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl ContingencyTable {
    /// Builds a table with default labels (`row0`, `col0`, …).
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        Self::with_labels(
            counts,
            (0..rows).map(|i| format!("row{i}")).collect(),
            (0..cols).map(|j| format!("col{j}")).collect(),
        )
    }

    pub fn with_labels(counts: Vec<Vec<u64>>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        let table = Self {
            counts,
            row_labels,
            col_labels,
        };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        let r = self.counts.len();
        let c = self.counts.first().map_or(0, Vec::len);
        if r < 2 || c < 2 {
            return Err(Error::DegenerateTable(format!(
                "need at least 2 rows and 2 columns, got {r}x{c}"
            )));
        }
        if let Some(i) = self.counts.iter().position(|row| row.len() != c) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} cells, expected {c}",
                self.counts[i].len()
            )));
        }
        if self.row_labels.len() != r || self.col_labels.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "{} row labels and {} column labels for a {r}x{c} table",
                self.row_labels.len(),
                self.col_labels.len()
            )));
        }
        if self
            .counts
            .iter()
            .flatten()
            .try_fold(0u64, |acc, &v| acc.checked_add(v))
            .is_none()
        {
            return Err(Error::DegenerateTable("grand total overflows 64 bits".into()));
        }
        if let Some(i) = self.row_totals().iter().position(|&t| t == 0) {
            return Err(Error::DegenerateTable(format!(
                "row `{}` has zero total",
                self.row_labels[i]
            )));
        }
        if let Some(j) = self.col_totals().iter().position(|&t| t == 0) {
            return Err(Error::DegenerateTable(format!(
                "column `{}` has zero total",
                self.col_labels[j]
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts.first().map_or(0, Vec::len))
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        let c = self.counts.first().map_or(0, Vec::len);
        (0..c).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// The table restricted to the given row and column indices, in the given order.
    pub fn sub_table(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let (r, c) = self.shape();
        if let Some(&i) = rows.iter().find(|&&i| i >= r) {
            return Err(Error::InvalidConfig(format!("row index {i} out of range for {r} rows")));
        }
        if let Some(&j) = cols.iter().find(|&&j| j >= c) {
            return Err(Error::InvalidConfig(format!("column index {j} out of range for {c} columns")));
        }
        Self::with_labels(
            rows.iter()
                .map(|&i| cols.iter().map(|&j| self.counts[i][j]).collect())
                .collect(),
            rows.iter().map(|&i| self.row_labels[i].clone()).collect(),
            cols.iter().map(|&j| self.col_labels[j].clone()).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    /// Smallest expected cell count; below 5 the χ² approximation is unreliable.
    pub min_expected: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Uncorrected Pearson χ² test of independence.
pub fn chi_square_test(table: &ContingencyTable) -> Result<ChiSquareResult> {
    table.check()?;
    let (r, c) = table.shape();
    let rows = table.row_totals();
    let cols = table.col_totals();
    let total = rows.iter().sum::<u64>() as f64;

    let mut statistic = 0.0;
    let mut min_expected = f64::INFINITY;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = rows[i] as f64 * cols[j] as f64 / total;
            min_expected = min_expected.min(expected);
            statistic += (observed as f64 - expected).powi(2) / expected;
        }
    }
    let dof = ((r - 1) * (c - 1)) as u64;
    let mut warnings = Vec::new();
    if min_expected < 5.0 {
        warnings.push(format!(
            "expected count {min_expected:.3} is below 5; the chi-square approximation may be inaccurate"
        ));
    }
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        min_expected,
        warnings,
    })
}

/// Upper-tail probability of the χ² distribution with `dof` degrees of freedom.
pub fn chi_square_sf(statistic: f64, dof: u64) -> f64 {
    assert!(dof > 0, "chi-square needs at least one degree of freedom");
    if statistic <= 0.0 {
        return 1.0;
    }
    if dof == 2 {
        return (-statistic / 2.0).exp();
    }
    regularized_upper_gamma(dof as f64 / 2.0, statistic / 2.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS[0];
    for (k, &coef) in LANCZOS.iter().enumerate().skip(1) {
        sum += coef / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
///
/// Uses the power series for `P` when `x < a + 1` and a Lentz continued fraction for
/// `Q` otherwise.
pub fn regularized_upper_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = f64::MIN_POSITIVE / GAMMA_EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}
