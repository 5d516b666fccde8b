//! Series comparison: shared-column deviations between two tables.

use eetsim::io::NumericTable;
use serde::Serialize;

use crate::error::CliError;

/// Deviation summary for one shared column.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnDeviation {
    pub name: String,
    pub max_abs: f64,
    pub rms: f64,
}

/// Result of comparing two series against a tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub tolerance: f64,
    /// Number of grid points actually compared.
    pub grid_points: usize,
    /// True when the second series was linearly interpolated onto the
    /// first one's grid.
    pub interpolated: bool,
    pub columns: Vec<ColumnDeviation>,
    /// Pooled over every shared column and point.
    pub max_abs_deviation: f64,
    pub rms_deviation: f64,
    /// `max_abs_deviation <= tolerance`.
    pub pass: bool,
}

impl ComparisonReport {
    /// Pools per-column series of equal length into a report.
    ///
    /// `pairs` holds `(name, a_values, b_values)` already on a common grid.
    pub fn from_pairs(pairs: &[(String, &[f64], &[f64])], tolerance: f64, interpolated: bool) -> Self {
        let mut columns = Vec::with_capacity(pairs.len());
        let mut pool_max = 0.0f64;
        let mut pool_sq = 0.0f64;
        let mut pool_n = 0usize;
        let mut grid_points = 0;
        for (name, a, b) in pairs {
            debug_assert_eq!(a.len(), b.len());
            grid_points = a.len();
            let mut max_abs = 0.0f64;
            let mut sq = 0.0f64;
            for (&x, &y) in a.iter().zip(*b) {
                let d = (x - y).abs();
                max_abs = max_abs.max(d);
                sq += d * d;
            }
            let rms = if a.is_empty() { 0.0 } else { (sq / a.len() as f64).sqrt() };
            pool_max = pool_max.max(max_abs);
            pool_sq += sq;
            pool_n += a.len();
            columns.push(ColumnDeviation { name: name.clone(), max_abs, rms });
        }
        let rms_deviation = if pool_n == 0 { 0.0 } else { (pool_sq / pool_n as f64).sqrt() };
        ComparisonReport {
            tolerance,
            grid_points,
            interpolated,
            columns,
            max_abs_deviation: pool_max,
            rms_deviation,
            pass: pool_max <= tolerance,
        }
    }
}

/// Compares two loaded tables column-by-column.
///
/// The first column of each table is its grid and must carry the same
/// name; the remaining columns pair up by name. When the grids differ,
/// the second table is linearly interpolated onto the first table's grid
/// over their overlap; grids that do not overlap in at least two points
/// are rejected.
pub fn compare_tables(
    a: &NumericTable,
    b: &NumericTable,
    tolerance: f64,
) -> Result<ComparisonReport, CliError> {
    if !(tolerance >= 0.0) || !tolerance.is_finite() {
        return Err(CliError::Config(format!(
            "tolerance must be nonnegative, got {tolerance}"
        )));
    }
    if a.header.is_empty() || b.header.is_empty() || a.header.len() < 2 || b.header.len() < 2 {
        return Err(CliError::Config(
            "comparison needs a grid column plus at least one value column".into(),
        ));
    }
    if a.header[0] != b.header[0] {
        return Err(CliError::Config(format!(
            "grid columns differ: {:?} vs {:?}",
            a.header[0], b.header[0]
        )));
    }
    let shared: Vec<String> = a.header[1..]
        .iter()
        .filter(|name| b.header[1..].contains(name))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(CliError::Config(format!(
            "no shared value columns between {:?} and {:?}",
            a.header, b.header
        )));
    }

    let ga = &a.columns[0];
    let gb = &b.columns[0];
    for g in [ga, gb] {
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("grid columns must strictly increase".into()));
        }
    }

    let same_grid = ga.len() == gb.len()
        && ga
            .iter()
            .zip(gb)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));

    // Indices of a's grid points inside b's range, with b-values for each
    // shared column evaluated there.
    let (kept, interpolated): (Vec<usize>, bool) = if same_grid {
        ((0..ga.len()).collect(), false)
    } else {
        let lo = *gb.first().expect("nonempty grid");
        let hi = *gb.last().expect("nonempty grid");
        let kept: Vec<usize> =
            (0..ga.len()).filter(|&i| ga[i] >= lo - 1e-12 && ga[i] <= hi + 1e-12).collect();
        if kept.len() < 2 {
            return Err(CliError::Config(format!(
                "grids do not overlap: [{lo}, {hi}] misses all but {} of the reference points",
                kept.len()
            )));
        }
        (kept, true)
    };

    let mut pairs_storage: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for name in &shared {
        let ca = a.column(name).expect("shared names come from a");
        let cb = b.column(name).expect("shared names come from b");
        let sa: Vec<f64> = kept.iter().map(|&i| ca[i]).collect();
        let sb: Vec<f64> = if same_grid {
            cb.to_vec()
        } else {
            kept.iter().map(|&i| interp(gb, cb, ga[i])).collect()
        };
        pairs_storage.push((name.clone(), sa, sb));
    }
    let pairs: Vec<(String, &[f64], &[f64])> = pairs_storage
        .iter()
        .map(|(n, x, y)| (n.clone(), x.as_slice(), y.as_slice()))
        .collect();
    Ok(ComparisonReport::from_pairs(&pairs, tolerance, interpolated))
}

/// Linear interpolation on a strictly increasing grid; `x` must lie
/// within the grid's range up to the tolerance already checked.
fn interp(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let mut hi = grid.partition_point(|&g| g < x);
    if hi == 0 {
        hi = 1;
    }
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

/// Kendall rank correlation between two equal-length sequences; ties
/// count zero. Returns 0 for fewer than two points.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = xs[j] - xs[i];
            let dy = ys[j] - ys[i];
            let prod = dx * dy;
            if prod > 0.0 {
                s += 1;
            } else if prod < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}
