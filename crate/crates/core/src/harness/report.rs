use std::io::{self, Write};

use crate::harness::{AlphaReport, SweepReport};

pub const SWEEP_CSV_HEADER: [&str; 14] = [
    "strategy", "T", "N0", "N1", "N2", "replicates", "failures", "mse", "bias_sq", "variance", "q25", "q75", "slope",
    "slope_stderr",
];

pub const ALPHA_CSV_HEADER: [&str; 14] = [
    "alpha1", "alpha2", "N0", "N1", "N2", "replicates", "failures", "mse", "bias_sq", "variance", "q25", "median", "q75",
    "argmin",
];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn level_columns(counts: &[u64]) -> io::Result<[String; 3]> {
    if counts.len() > 3 {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "CSV holds at most three levels"));
    }
    Ok(std::array::from_fn(|i| counts.get(i).map(u64::to_string).unwrap_or_default()))
}

pub fn write_sweep_csv(report: &SweepReport, out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for row in &report.rows {
        let fit = report.slope(&row.strategy);
        let [n0, n1, n2] = level_columns(&row.counts)?;
        let s = &row.stats;
        w.write_record([
            row.strategy.clone(),
            row.t.to_string(),
            n0,
            n1,
            n2,
            row.replicates.to_string(),
            row.failures.to_string(),
            float(s.mse),
            float(s.bias_sq),
            float(s.variance),
            float(s.q25),
            float(s.q75),
            fit.map(|f| float(f.slope)).unwrap_or_default(),
            fit.map(|f| float(f.stderr)).unwrap_or_default(),
        ])?;
    }
    w.flush()
}

/// One `key=value` record per line, for diffing runs.
pub fn write_sweep_text(report: &SweepReport, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "model={}", report.model)?;
    writeln!(out, "truth={}", float(report.truth.value))?;
    writeln!(out, "truth_std_error={}", float(report.truth.std_error))?;
    writeln!(out, "truth_provenance={}", report.truth.provenance)?;
    for (strategy, fit) in &report.slopes {
        match fit {
            Some(f) => writeln!(
                out,
                "slope strategy={strategy} value={} stderr={} points={}",
                float(f.slope),
                float(f.stderr),
                f.points
            )?,
            None => writeln!(out, "slope strategy={strategy} value= stderr= points=0")?,
        }
    }
    for row in &report.rows {
        let s = &row.stats;
        let counts: Vec<String> = row.counts.iter().map(u64::to_string).collect();
        writeln!(
            out,
            "row strategy={} T={} counts={} effective_budget={} replicates={} failures={} mse={} bias_sq={} variance={} mean={} se_mean={} q25={} median={} q75={} median_abs_error={}",
            row.strategy,
            row.t,
            counts.join(","),
            row.effective_budget,
            row.replicates,
            row.failures,
            float(s.mse),
            float(s.bias_sq),
            float(s.variance),
            float(s.mean),
            float(s.se_mean),
            float(s.q25),
            float(s.median),
            float(s.q75),
            float(s.median_abs_error),
        )?;
    }
    Ok(())
}

pub fn write_alpha_csv(report: &AlphaReport, out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ALPHA_CSV_HEADER)?;
    for (i, row) in report.rows.iter().enumerate() {
        if row.alphas.len() > 2 {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "CSV holds at most two alphas"));
        }
        let [n0, n1, n2] = level_columns(&row.counts)?;
        let s = &row.stats;
        w.write_record([
            row.alphas.first().map(|a| a.to_string()).unwrap_or_default(),
            row.alphas.get(1).map(|a| a.to_string()).unwrap_or_default(),
            n0,
            n1,
            n2,
            report.replicates.to_string(),
            row.failures.to_string(),
            float(s.mse),
            float(s.bias_sq),
            float(s.variance),
            float(s.q25),
            float(s.median),
            float(s.q75),
            u8::from(i == report.argmin).to_string(),
        ])?;
    }
    w.flush()
}

/// Validate a sweep CSV against the schema; returns the number of data rows.
pub fn check_sweep_csv(text: &str) -> Result<usize, String> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(SWEEP_CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut slopes: Vec<(String, String, String)> = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        rows += 1;
        let field = |i: usize| &record[i];
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| format!("row {rows}: bad integer in {}", SWEEP_CSV_HEADER[i]));
        let real = |i: usize| field(i).parse::<f64>().map_err(|_| format!("row {rows}: bad number in {}", SWEEP_CSV_HEADER[i]));
        if field(0).is_empty() {
            return Err(format!("row {rows}: empty strategy"));
        }
        int(1)?;
        int(2)?;
        let mut seen_empty = false;
        for i in [3, 4] {
            if field(i).is_empty() {
                seen_empty = true;
            } else if seen_empty {
                return Err(format!("row {rows}: level column after an empty one"));
            } else {
                int(i)?;
            }
        }
        int(5)?;
        int(6)?;
        for i in 7..12 {
            real(i)?;
        }
        for i in [12, 13] {
            if !field(i).is_empty() {
                real(i)?;
            }
        }
        let key = (field(0).to_string(), field(12).to_string(), field(13).to_string());
        match slopes.iter().find(|s| s.0 == key.0) {
            Some(s) if *s != key => return Err(format!("row {rows}: slope differs within strategy {}", key.0)),
            Some(_) => {}
            None => slopes.push(key),
        }
    }
    Ok(rows)
}
