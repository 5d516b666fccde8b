//! Plain-text serialization for every artifact the toolkit emits: CSV
//! writers with matching parsers, and the Hamiltonian matrix text format.
//!
//! Conventions shared by every format: `.` as the decimal separator, `\n`
//! line endings, one header line first, and floats printed at 17
//! significant digits so every value round-trips to the exact same bits.

use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::grape::ControlPulse;
use crate::heom::HeomRun;
use crate::model::{HamiltonianMatrix, UnitTag};
use crate::ramsey::{Envelope, RamseyResult};
use crate::spectral::NoiseProfile;
use crate::trajectory::{EnsembleResult, NoiseRealization};
use crate::{Error, Result};

/// Formats a float at full double precision (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{context}: not a number: {field:?}")))
}

fn parse_usize(field: &str, context: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("{context}: not a count: {field:?}")))
}

/// Formats a complex entry as `re+imj` with both parts at full precision.
pub fn fmt_c64(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", fmt_f64(z.re), sign, fmt_f64(z.im.abs()))
}

/// Parses a `re+imj` complex entry.
pub fn parse_c64(field: &str) -> Result<C64> {
    let s = field.trim();
    let body = s
        .strip_suffix('j')
        .ok_or_else(|| Error::Parse(format!("complex entry must end in j: {s:?}")))?;
    // The imaginary part starts at the last +/- that is not an exponent
    // sign and not the leading mantissa sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let b = bytes[i];
        if (b == b'+' || b == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E' {
            split = Some(i);
            break;
        }
    }
    let i = split.ok_or_else(|| Error::Parse(format!("complex entry has no imaginary part: {s:?}")))?;
    let re = parse_f64(&body[..i], "complex real part")?;
    let im = parse_f64(&body[i..], "complex imaginary part")?;
    Ok(C64::new(re, im))
}

/// Writes `content` to `path`.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

/// Reads `path` as UTF-8 text.
pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

// ════════════════════════════════════════════════════════════════════
// Generic numeric CSV
// ════════════════════════════════════════════════════════════════════

/// A parsed numeric CSV: named columns of equal length.
#[derive(Debug, Clone)]
pub struct NumericTable {
    /// Column names from the header line, in file order.
    pub header: Vec<String>,
    /// One vector per header entry.
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    /// Number of data rows.
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }
}

/// Parses a numeric CSV with a mandatory header line.
pub fn parse_table(text: &str) -> Result<NumericTable> {
    let mut lines = text.lines().map(str::trim_end).filter(|l| !l.is_empty());
    let header_line =
        lines.next().ok_or_else(|| Error::Parse("empty table: no header line".into()))?;
    let header: Vec<String> = header_line.split(',').map(|h| h.trim().to_string()).collect();
    if header.iter().any(String::is_empty) {
        return Err(Error::Parse(format!("blank column name in header {header_line:?}")));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (row_idx, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {}",
                row_idx + 1,
                fields.len(),
                header.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(fields) {
            col.push(parse_f64(field, &format!("row {}", row_idx + 1))?);
        }
    }
    Ok(NumericTable { header, columns })
}

/// Reads and parses a numeric CSV file.
pub fn read_table(path: &Path) -> Result<NumericTable> {
    parse_table(&read_text(path)?)
}

// ════════════════════════════════════════════════════════════════════
// Population series
// ════════════════════════════════════════════════════════════════════

/// Hierarchy-solver populations: `t_ms,P1,...,Pd`.
pub fn populations_csv(run: &HeomRun) -> String {
    let d = run.populations.first().map_or(0, Vec::len);
    let mut out = String::from("t_ms");
    for k in 1..=d {
        out.push_str(&format!(",P{k}"));
    }
    out.push('\n');
    for (t, pops) in run.t.iter().zip(&run.populations) {
        out.push_str(&fmt_f64(*t));
        for p in pops {
            out.push(',');
            out.push_str(&fmt_f64(*p));
        }
        out.push('\n');
    }
    out
}

/// Ensemble means with standard errors: `t_ms,P1,P1_se,...,Pd,Pd_se`.
pub fn ensemble_csv(res: &EnsembleResult) -> String {
    let d = res.mean.first().map_or(0, Vec::len);
    let mut out = String::from("t_ms");
    for k in 1..=d {
        out.push_str(&format!(",P{k},P{k}_se"));
    }
    out.push('\n');
    for ((t, mean), se) in res.t_grid.iter().zip(&res.mean).zip(&res.stderr) {
        out.push_str(&fmt_f64(*t));
        for (m, s) in mean.iter().zip(se) {
            out.push(',');
            out.push_str(&fmt_f64(*m));
            out.push(',');
            out.push_str(&fmt_f64(*s));
        }
        out.push('\n');
    }
    out
}

// ════════════════════════════════════════════════════════════════════
// Ramsey series
// ════════════════════════════════════════════════════════════════════

/// Simulated fringe: `t_ms,P0_mean,P0_se`.
pub fn ramsey_simulated_csv(res: &RamseyResult) -> String {
    let mut out = String::from("t_ms,P0_mean,P0_se\n");
    for ((t, p), se) in res.t_grid.iter().zip(&res.p0_mean).zip(&res.p0_se) {
        out.push_str(&format!("{},{},{}\n", fmt_f64(*t), fmt_f64(*p), fmt_f64(*se)));
    }
    out
}

/// Analytic fringe: `t_ms,P0`.
pub fn ramsey_analytic_csv(t_grid: &[f64], p0: &[f64]) -> Result<String> {
    if t_grid.len() != p0.len() {
        return Err(Error::InvalidInput(format!(
            "grid has {} points but the series has {}",
            t_grid.len(),
            p0.len()
        )));
    }
    let mut out = String::from("t_ms,P0\n");
    for (t, p) in t_grid.iter().zip(p0) {
        out.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*p)));
    }
    Ok(out)
}

/// Extracted envelope: `t_ms,envelope`.
pub fn envelope_csv(env: &Envelope) -> String {
    let mut out = String::from("t_ms,envelope\n");
    for (t, v) in env.t.iter().zip(&env.values) {
        out.push_str(&format!("{},{}\n", fmt_f64(*t), fmt_f64(*v)));
    }
    out
}

// ════════════════════════════════════════════════════════════════════
// Control pulses
// ════════════════════════════════════════════════════════════════════

/// Pulse table with a one-line metadata header:
///
/// ```text
/// # L=<segments>,dt_ms=<dt>,n_qubits=<n>
/// segment,qubit,u_x_rad_per_ms,u_y_rad_per_ms
/// ```
pub fn pulse_csv(pulse: &ControlPulse) -> String {
    let mut out = format!(
        "# L={},dt_ms={},n_qubits={}\nsegment,qubit,u_x_rad_per_ms,u_y_rad_per_ms\n",
        pulse.segments(),
        fmt_f64(pulse.dt()),
        pulse.n_qubits()
    );
    for j in 0..pulse.segments() {
        for k in 0..pulse.n_qubits() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                j,
                k,
                fmt_f64(pulse.ux(j, k)),
                fmt_f64(pulse.uy(j, k))
            ));
        }
    }
    out
}

/// Parses a pulse file written by [`pulse_csv`].
pub fn parse_pulse_csv(text: &str) -> Result<ControlPulse> {
    let mut lines = text.lines().map(str::trim_end).filter(|l| !l.is_empty());
    let meta = lines.next().ok_or_else(|| Error::Parse("empty pulse file".into()))?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("pulse metadata must start with #, got {meta:?}")))?;
    let (mut l, mut dt, mut n_qubits) = (None, None, None);
    for item in meta.split(',') {
        let (key, value) = item
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad metadata item {item:?}")))?;
        match key.trim() {
            "L" => l = Some(parse_usize(value, "pulse L")?),
            "dt_ms" => dt = Some(parse_f64(value, "pulse dt")?),
            "n_qubits" => n_qubits = Some(parse_usize(value, "pulse n_qubits")?),
            other => return Err(Error::Parse(format!("unknown metadata key {other:?}"))),
        }
    }
    let (l, dt, n_qubits) = match (l, dt, n_qubits) {
        (Some(l), Some(dt), Some(n)) => (l, dt, n),
        _ => return Err(Error::Parse("pulse metadata needs L, dt_ms, and n_qubits".into())),
    };
    let header = lines.next().unwrap_or_default();
    if header != "segment,qubit,u_x_rad_per_ms,u_y_rad_per_ms" {
        return Err(Error::Parse(format!("unexpected pulse column header {header:?}")));
    }
    let mut ux = vec![0.0f64; l * n_qubits];
    let mut uy = vec![0.0f64; l * n_qubits];
    let mut seen = vec![false; l * n_qubits];
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("pulse row needs 4 fields: {line:?}")));
        }
        let j = parse_usize(fields[0], "pulse segment")?;
        let k = parse_usize(fields[1], "pulse qubit")?;
        if j >= l || k >= n_qubits {
            return Err(Error::Parse(format!(
                "pulse row ({j}, {k}) outside {l} segments x {n_qubits} qubits"
            )));
        }
        let idx = j * n_qubits + k;
        if seen[idx] {
            return Err(Error::Parse(format!("duplicate pulse row ({j}, {k})")));
        }
        seen[idx] = true;
        ux[idx] = parse_f64(fields[2], "pulse u_x")?;
        uy[idx] = parse_f64(fields[3], "pulse u_y")?;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Parse(format!(
            "pulse row for segment {}, qubit {} is missing",
            missing / n_qubits,
            missing % n_qubits
        )));
    }
    ControlPulse::from_controls(n_qubits, dt, ux, uy)
}

// ════════════════════════════════════════════════════════════════════
// Hamiltonian matrices
// ════════════════════════════════════════════════════════════════════

/// Plain-text matrix: first line `dim unit_tag`, then `dim` rows of `dim`
/// whitespace-separated `re+imj` entries.
pub fn hamiltonian_text(h: &HamiltonianMatrix) -> String {
    let d = h.dim();
    let mut out = format!("{d} {}\n", h.unit_tag());
    let m = h.matrix();
    for r in 0..d {
        let row: Vec<String> = (0..d).map(|c| fmt_c64(m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a matrix file written by [`hamiltonian_text`].
pub fn parse_hamiltonian_text(text: &str) -> Result<HamiltonianMatrix> {
    let mut lines = text.lines().map(str::trim_end).filter(|l| !l.is_empty());
    let first = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let mut parts = first.split_whitespace();
    let dim = parse_usize(
        parts.next().ok_or_else(|| Error::Parse("missing dimension".into()))?,
        "matrix dimension",
    )?;
    let tag = UnitTag::from_str(
        parts.next().ok_or_else(|| Error::Parse("missing unit tag".into()))?,
    )?;
    if parts.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens on the first line {first:?}")));
    }
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for r in 0..dim {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("matrix ends after {r} of {dim} rows")))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != dim {
            return Err(Error::Parse(format!(
                "row {r} has {} entries, expected {dim}",
                entries.len()
            )));
        }
        for (c, e) in entries.iter().enumerate() {
            m[(r, c)] = parse_c64(e)?;
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("matrix has more than {dim} rows")));
    }
    HamiltonianMatrix::new(m, tag)
}

// ════════════════════════════════════════════════════════════════════
// Spectra and noise audits
// ════════════════════════════════════════════════════════════════════

/// Comb audit: `j,omega_j_rad_per_ms,f_j`.
pub fn profile_audit_csv(profile: &NoiseProfile) -> String {
    let mut out = String::from("j,omega_j_rad_per_ms,f_j\n");
    for (j, f) in profile.weights().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", j + 1, fmt_f64(profile.omega_j(j + 1)), fmt_f64(*f)));
    }
    out
}

/// Per-trajectory phase audit: `trajectory,seed,j,psi_rad`, one row per
/// comb line of each realization.
pub fn realization_audit_csv(realizations: &[NoiseRealization<'_>]) -> String {
    let mut out = String::from("trajectory,seed,j,psi_rad\n");
    for (i, r) in realizations.iter().enumerate() {
        for (j, psi) in r.phases().iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", i, r.seed(), j + 1, fmt_f64(*psi)));
        }
    }
    out
}

/// Writes a tabulated spectral density: `omega_rad_per_ms,j_value`.
pub fn tabulated_spectrum_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("omega_rad_per_ms,j_value\n");
    for (w, j) in samples {
        out.push_str(&format!("{},{}\n", fmt_f64(*w), fmt_f64(*j)));
    }
    out
}

/// Parses a two-column `(omega, J)` table; the header line is optional.
pub fn parse_tabulated_spectrum(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().map(str::trim_end).enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "spectrum row {} needs 2 fields, got {}",
                idx + 1,
                fields.len()
            )));
        }
        if idx == 0 && fields[0].trim().parse::<f64>().is_err() {
            continue; // header line
        }
        let w = parse_f64(fields[0], &format!("spectrum row {}", idx + 1))?;
        let j = parse_f64(fields[1], &format!("spectrum row {}", idx + 1))?;
        samples.push((w, j));
    }
    if samples.is_empty() {
        return Err(Error::Parse("spectrum table has no samples".into()));
    }
    Ok(samples)
}
