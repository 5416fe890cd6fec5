#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Greedy restarts with perturbed construction orders.
    pub restarts: usize,
    /// Local-search sweeps per restart.
    pub max_sweeps: usize,
    /// Optional wallclock cap. Determinism holds as long as the cap is not
    /// hit, so benchmark configs leave it off; the per-sweep work bound is
    /// the deterministic budget.
    pub time_budget_ms: Option<u64>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { restarts: 9, max_sweeps: 30, time_budget_ms: None, seed: 1 }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig { seed, ..Default::default() }
    }

    /// Cheaper profile for inner-loop evaluation over many days.
    pub fn fast(seed: u64) -> Self {
        SearchConfig { restarts: 3, max_sweeps: 8, time_budget_ms: None, seed }
    }
}
