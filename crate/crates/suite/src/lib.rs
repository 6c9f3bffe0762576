//! Reporting for the workspace acceptance run (`cargo test -p litd-suite`).
//!
//! Each criterion yields one [`Verdict`], printed as a single line.
#![doc = include_str!("../../../book/src/testing.md")]

use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone)]
pub struct Verdict {
    pub criterion: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Runs `check`, which reports `(passed, detail)`, and fails it if it overruns `limit`.
pub fn judge(criterion: &'static str, limit: Option<Duration>, check: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (mut passed, mut detail) = check();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail.push_str(&format!("; over the {:.0} s limit", limit.as_secs_f64()));
        }
    }
    Verdict {
        criterion,
        passed,
        detail,
        elapsed,
    }
}
