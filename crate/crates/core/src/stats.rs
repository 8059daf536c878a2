//! Descriptive statistics shared by the feature extractors.
//!
//! All helpers return 0 on inputs too small for the statistic (empty input,
//! or fewer than two values for a standard deviation) so feature vectors
//! stay finite.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn max(x: &[f64]) -> f64 {
    x.iter().cloned().reduce(f64::max).unwrap_or(0.0)
}

pub fn min(x: &[f64]) -> f64 {
    x.iter().cloned().reduce(f64::min).unwrap_or(0.0)
}

/// Percentile `p` in [0, 100], interpolating linearly between the closest
/// order statistics (rank `(n - 1) * p / 100`).
pub fn percentile(x: &[f64], p: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (sorted.len() - 1) as f64 * p.clamp(0.0, 100.0) / 100.0;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(x: &[f64]) -> f64 {
    percentile(x, 50.0)
}

/// First differences `x[i+1] - x[i]`.
pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Lengths of the maximal runs of `true`.
pub fn run_lengths(flags: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for &f in flags {
        if f {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles_interpolate() {
        let x = [140.0, 100.0, 160.0, 120.0];
        assert_eq!(percentile(&x, 25.0), 115.0);
        assert_eq!(percentile(&x, 75.0), 145.0);
        assert_eq!(median(&x), 130.0);
        assert_eq!(percentile(&[7.0], 25.0), 7.0);
    }

    #[test]
    fn degenerate_inputs_are_zero() {
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert_eq!(max(&[]), 0.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
        assert!(diff(&[1.0]).is_empty());
    }

    #[test]
    fn runs() {
        assert_eq!(run_lengths(&[true, true, false, true, false, false, true]), vec![2, 1, 1]);
        assert!(run_lengths(&[false, false]).is_empty());
    }
}
