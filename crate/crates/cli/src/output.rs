//! CSV trajectories, plain-text reports and plotting scripts.

use std::fmt::Write as _;
use std::path::Path;

use jetflow::integrate::Trajectory;
use jetflow::report::CheckReport;

use crate::error::{EXIT_CHECK_FAILED, EXIT_OK};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn number(x: f64) -> String {
    // -0 prints as 0
    format!("{:.16e}", x + 0.0)
}

/// Renames library state columns (`q1`, `v1`, `p1`, `dq1`, `dp1`) after the
/// coordinate labels. Default labels leave the names alone.
pub fn state_columns(names: &[String], labels: &[String]) -> Vec<String> {
    let default = labels.iter().enumerate().all(|(i, l)| *l == format!("q{}", i + 1));
    if default {
        return names.to_vec();
    }
    names
        .iter()
        .map(|n| {
            let split = n.find(|c: char| c.is_ascii_digit()).unwrap_or(n.len());
            let (prefix, index) = n.split_at(split);
            match index.parse::<usize>().ok().and_then(|i| labels.get(i.wrapping_sub(1))) {
                Some(label) if prefix == "q" => label.clone(),
                Some(label) => format!("{prefix}_{label}"),
                None => n.clone(),
            }
        })
        .collect()
}

/// Header `t,<state>,<monitors>` and one row per sample.
pub fn csv(traj: &Trajectory, labels: &[String]) -> String {
    let mut out = String::new();
    let mut header = vec!["t".to_string()];
    header.extend(state_columns(&traj.state_names, labels));
    header.extend(traj.monitor_names.iter().cloned());
    out.push_str(&header.join(","));
    out.push('\n');
    for s in &traj.samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.state.iter().copied())
            .chain(s.monitors.iter().copied())
            .map(number)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Keeps only the named monitor columns, in the given order.
pub fn select_monitors(traj: &mut Trajectory, keep: &[&str]) {
    let idx: Vec<usize> = keep
        .iter()
        .filter_map(|k| traj.monitor_names.iter().position(|n| n == k))
        .collect();
    traj.monitor_names = idx.iter().map(|&i| traj.monitor_names[i].clone()).collect();
    for s in &mut traj.samples {
        s.monitors = idx.iter().map(|&i| s.monitors[i]).collect();
    }
}

/// Appends a monitor column computed after the run.
pub fn push_monitor(traj: &mut Trajectory, name: &str, values: Vec<f64>) {
    traj.monitor_names.push(name.to_string());
    for (s, v) in traj.samples.iter_mut().zip(values) {
        s.monitors.push(v);
    }
}

pub fn gnuplot_script(csv_path: &Path, columns: usize) -> String {
    let name = csv_path
        .file_name()
        .map_or_else(|| csv_path.display().to_string(), |n| n.to_string_lossy().into_owned());
    format!(
        "set datafile separator \",\"\n\
         set key autotitle columnhead\n\
         set xlabel \"t\"\n\
         plot for [c=2:{columns}] \"{name}\" using 1:c with lines\n\
         pause -1\n"
    )
}

/// Line-oriented report: free lines plus tallied check lines.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<String>,
    passed: usize,
    failed: usize,
}

impl Report {
    pub fn new(header: impl Into<String>) -> Self {
        Self {
            lines: vec![header.into()],
            ..Self::default()
        }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn check(&mut self, c: &CheckReport) {
        if c.passed() {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        self.lines.push(c.to_string());
    }

    /// A check whose failure is only a warning.
    pub fn advisory(&mut self, c: &CheckReport) {
        let text = c.to_string();
        self.lines.push(if c.passed() {
            text
        } else {
            text.replacen("FAIL", "WARN", 1)
        });
    }

    /// A counted condition: `value` must not exceed `limit`.
    pub fn count(&mut self, name: &str, value: usize, limit: usize, extra: &str) {
        let ok = value <= limit;
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        let mut s = format!("{} {name} count={value} tol={limit}", if ok { "PASS" } else { "FAIL" });
        if !extra.is_empty() {
            let _ = write!(s, " {extra}");
        }
        self.lines.push(s);
    }

    pub fn failed(&self) -> usize {
        self.failed
    }

    pub fn finish(mut self) -> (String, i32) {
        self.lines
            .push(format!("summary: {} passed, {} failed", self.passed, self.failed));
        let code = if self.failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED };
        let mut text = self.lines.join("\n");
        text.push('\n');
        (text, code)
    }
}
