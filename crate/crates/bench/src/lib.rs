//! Benchmark fixtures shared by the criterion benches.

use wm1::{CadlagPath, PadMode};

/// Deterministic 1-d step path with `jumps` alternating jumps on `[0, horizon]`.
pub fn sawtooth_steps(jumps: usize, horizon: f64, phase: f64) -> CadlagPath {
    let mut times = vec![0.0];
    let mut values = vec![vec![0.0]];
    for k in 1..=jumps {
        let t = horizon * (k as f64 - 0.5 + 0.3 * phase) / (jumps as f64 + 1.0);
        times.push(t);
        let level = if k % 2 == 0 { 0.0 } else { 1.0 + 0.1 * (k as f64).sin() };
        values.push(vec![level]);
    }
    CadlagPath::step(horizon, PadMode::HoldLeft, times, values).expect("valid fixture")
}
