//! Comparison metrics between solver objectives.

use crate::error::{contract, Result};

/// `(sse1 - sse2) / sse2`. Positive when the second algorithm is better.
pub fn relative_improvement(sse1: f64, sse2: f64) -> Result<f64> {
    if !(sse2 > 0.0) || !sse1.is_finite() || !sse2.is_finite() {
        return contract(format!("relative improvement needs a positive finite reference, got {sse2}"));
    }
    Ok((sse1 - sse2) / sse2)
}

/// Relative distance of `sse_algo` above the column generation objective.
pub fn opt_gap(sse_algo: f64, sse_cg: f64) -> Result<f64> {
    if !(sse_cg > 0.0) || !sse_algo.is_finite() || !sse_cg.is_finite() {
        return contract(format!("optimality gap needs a positive finite optimum, got {sse_cg}"));
    }
    Ok((sse_algo - sse_cg) / sse_cg)
}

/// Relative distance of `sse_algo` above the best of `sse_all`.
pub fn gap_from_best(sse_algo: f64, sse_all: &[f64]) -> Result<f64> {
    let Some(best) = sse_all.iter().copied().reduce(f64::min) else {
        return contract("gap from best needs at least one objective");
    };
    if !(best > 0.0) || !sse_algo.is_finite() || sse_all.iter().any(|v| !v.is_finite()) {
        return contract(format!("gap from best needs positive finite objectives, best is {best}"));
    }
    Ok((sse_algo - best) / best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_improvement_values() {
        assert_eq!(relative_improvement(100.0, 100.0).unwrap(), 0.0);
        assert!((relative_improvement(120.0, 100.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((relative_improvement(100.0, 120.0).unwrap() + 0.1667).abs() < 5e-5);
        assert!(relative_improvement(1.0, 0.0).is_err());
        assert!(relative_improvement(1.0, -2.0).is_err());
    }

    #[test]
    fn opt_gap_values() {
        assert_eq!(opt_gap(100.0, 100.0).unwrap(), 0.0);
        assert!((opt_gap(105.0, 100.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(opt_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn gap_from_best_values() {
        let all = [100.0, 105.0, 110.0];
        assert_eq!(gap_from_best(100.0, &all).unwrap(), 0.0);
        assert!((gap_from_best(110.0, &all).unwrap() - 0.1).abs() < 1e-15);
        assert!(all.iter().all(|&v| gap_from_best(v, &all).unwrap() >= 0.0));
        assert!(gap_from_best(1.0, &[]).is_err());
        assert!(gap_from_best(1.0, &[0.0, 2.0]).is_err());
    }
}
