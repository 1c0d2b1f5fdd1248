use std::fmt;

/// Outcome of a sampled numerical check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Jet or phase point where the largest residual occurred.
    pub witness: Option<Vec<f64>>,
    pub note: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_residual: 0.0,
            tolerance,
            samples: 0,
            witness: None,
            note: None,
        }
    }

    /// Records one residual, keeping the worst witness. NaN counts as a failure.
    pub fn record(&mut self, residual: f64, at: impl FnOnce() -> Vec<f64>) {
        self.samples += 1;
        let r = if residual.is_nan() {
            f64::INFINITY
        } else {
            residual.abs()
        };
        if self.witness.is_none() || r > self.max_residual {
            self.max_residual = r;
            self.witness = Some(at());
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} max={:.6e} tol={:e} samples={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.max_residual,
            self.tolerance,
            self.samples
        )?;
        if let (false, Some(w)) = (self.passed(), &self.witness) {
            write!(f, " witness={w:?}")?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}
