//! Independent reference computations and a small reporter for the
//! acceptance suite. Nothing here is used by the library itself.

#[path = "../../core/tests/common/oracles.rs"]
pub mod oracles;

use std::time::Instant;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub secs: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.2}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.secs
        )
    }
}

/// Runs `check`, which returns `(passed, detail)`. A panic counts as a failure.
pub fn evaluate(id: u32, title: &'static str, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(check)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            (false, format!("panicked: {msg}"))
        }
    };
    let out = Outcome {
        id,
        title,
        passed,
        detail,
        secs: start.elapsed().as_secs_f64(),
    };
    println!("{out}");
    out
}
