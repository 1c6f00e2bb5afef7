use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Column header of [`reports_to_csv`].
pub const REPORT_CSV_HEADER: &str = "statement,trials,statistic,bound,margin,stderr,pass";

/// Outcome of one Monte-Carlo or exhaustive check.
///
/// `margin = statistic − bound`. Reports with `asserted = false` are
/// descriptive: the decision rule is still evaluated into `pass`, but a
/// failure is not an error (for example Lemma 1 on real, correlated labels).
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub statement: String,
    pub trials: u64,
    pub statistic: f64,
    pub bound: f64,
    pub margin: f64,
    pub stderr: f64,
    pub pass: bool,
    pub asserted: bool,
    /// Extra `key=value` context written to the text form only.
    pub notes: Vec<(String, String)>,
}

impl VerificationReport {
    pub fn new(statement: impl Into<String>, trials: u64, statistic: f64, bound: f64, stderr: f64, pass: bool) -> Self {
        VerificationReport {
            statement: statement.into(),
            trials,
            statistic,
            bound,
            margin: statistic - bound,
            stderr,
            pass,
            asserted: true,
            notes: Vec::new(),
        }
    }

    pub fn descriptive(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn note(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.notes.push((key.into(), value.to_string()));
        self
    }

    /// True unless this is an asserted check that did not pass.
    pub fn ok(&self) -> bool {
        self.pass || !self.asserted
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.statement, self.trials, self.statistic, self.bound, self.margin, self.stderr, self.pass
        )
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "statement={}", self.statement);
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "statistic={}", self.statistic);
        let _ = writeln!(s, "bound={}", self.bound);
        let _ = writeln!(s, "margin={}", self.margin);
        let _ = writeln!(s, "stderr={}", self.stderr);
        let _ = writeln!(s, "pass={}", self.pass);
        let _ = writeln!(s, "asserted={}", self.asserted);
        for (k, v) in &self.notes {
            let _ = writeln!(s, "note.{k}={v}");
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut r = VerificationReport::new("", 0, 0.0, 0.0, 0.0, false);
        let mut seen = 0u8;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(Some(n + 1), "expected key=value"))?;
            let bad = |what: &str| Error::format(Some(n + 1), format!("bad {what} `{v}`"));
            match k {
                "statement" => r.statement = v.to_string(),
                "trials" => r.trials = v.parse().map_err(|_| bad(k))?,
                "statistic" => r.statistic = v.parse().map_err(|_| bad(k))?,
                "bound" => r.bound = v.parse().map_err(|_| bad(k))?,
                "margin" => r.margin = v.parse().map_err(|_| bad(k))?,
                "stderr" => r.stderr = v.parse().map_err(|_| bad(k))?,
                "pass" => r.pass = v.parse().map_err(|_| bad(k))?,
                "asserted" => r.asserted = v.parse().map_err(|_| bad(k))?,
                _ => match k.strip_prefix("note.") {
                    Some(key) => r.notes.push((key.to_string(), v.to_string())),
                    None => return Err(Error::format(Some(n + 1), format!("unknown key `{k}`"))),
                },
            }
            if !k.starts_with("note.") {
                seen += 1;
            }
        }
        if seen < 8 {
            return Err(Error::format(None, "report is missing fields"));
        }
        Ok(r)
    }
}

/// Header plus one row per report.
pub fn reports_to_csv(reports: &[VerificationReport]) -> String {
    let mut s = String::from(REPORT_CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Parse [`reports_to_csv`] output. Rows come back as asserted reports
/// without notes, since the CSV carries neither.
pub fn reports_from_csv(text: &str) -> Result<Vec<VerificationReport>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == REPORT_CSV_HEADER => {}
        _ => return Err(Error::format(Some(1), "missing report header")),
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 7 {
            return Err(Error::format(Some(n + 1), format!("expected 7 fields, got {}", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse()
                .map_err(|_| Error::format(Some(n + 1), format!("bad number `{}`", f[i])))
        };
        out.push(VerificationReport {
            statement: f[0].to_string(),
            trials: f[1]
                .parse()
                .map_err(|_| Error::format(Some(n + 1), format!("bad trial count `{}`", f[1])))?,
            statistic: num(2)?,
            bound: num(3)?,
            margin: num(4)?,
            stderr: num(5)?,
            pass: f[6]
                .parse()
                .map_err(|_| Error::format(Some(n + 1), format!("bad pass flag `{}`", f[6])))?,
            asserted: true,
            notes: Vec::new(),
        });
    }
    Ok(out)
}
