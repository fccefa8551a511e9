//! "Nice" value-axis ticks: step sizes from {1, 2, 2.5, 5} × 10^k, covering
//! the data range with close to the requested tick count.
//!
//! Ticks are constructed from decimal strings (mantissa × 10^exp) so labels
//! never show float dust; the numeric tick value is the parse of its label.

use super::SynthError;
use crate::table::canonical_number_string;

#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub value: f64,
    pub label: String,
}

/// Renders `mantissa × 10^exp` as a plain decimal string.
fn decimal_string(mantissa: i64, exp: i32) -> String {
    if mantissa == 0 {
        return "0".to_string();
    }
    let digits = mantissa.unsigned_abs().to_string();
    let mut s = if exp >= 0 {
        format!("{digits}{}", "0".repeat(exp as usize))
    } else {
        let frac = (-exp) as usize;
        let mut t = if digits.len() <= frac {
            format!("0.{}{digits}", "0".repeat(frac - digits.len()))
        } else {
            let split = digits.len() - frac;
            format!("{}.{}", &digits[..split], &digits[split..])
        };
        while t.ends_with('0') {
            t.pop();
        }
        if t.ends_with('.') {
            t.pop();
        }
        t
    };
    if mantissa < 0 {
        s.insert(0, '-');
    }
    s
}

fn tick_at(index: i64, step_mant: i64, step_exp: i32) -> Tick {
    let label = decimal_string(index * step_mant, step_exp);
    let value: f64 = label.parse().expect("decimal strings always parse");
    debug_assert_eq!(canonical_number_string(value), label);
    Tick { value, label }
}

/// Nice ticks covering `[vmin, vmax]` with between `n−1` and `n+2` entries.
/// A degenerate `vmin == vmax` range expands to `[vmin, vmin + 1]`.
pub(crate) fn nice_ticks(vmin: f64, vmax: f64, n: usize) -> Result<Vec<Tick>, SynthError> {
    if n < 2 {
        return Err(SynthError::InvalidTicks(format!("tick count {n} is below 2")));
    }
    if !vmin.is_finite() || !vmax.is_finite() || vmin > vmax {
        return Err(SynthError::InvalidTicks(format!("range [{vmin}, {vmax}] is not ordered and finite")));
    }
    if vmin.abs() > 1e12 || vmax.abs() > 1e12 {
        return Err(SynthError::InvalidTicks(format!("range [{vmin}, {vmax}] exceeds ±1e12")));
    }
    let vmax = if vmin == vmax { vmin + 1.0 } else { vmax };

    let raw_step = (vmax - vmin) / (n - 1) as f64;
    let e0 = raw_step.log10().floor() as i32;

    // (candidate count distance to n, count) — prefer the closest count,
    // then the sparser axis.
    let mut best: Option<(usize, usize, i64, i64, i64, i32)> = None;
    let mut fallback: Option<(usize, usize, i64, i64, i64, i32)> = None;
    for e in (e0 - 2)..=(e0 + 2) {
        for (m, sub) in [(1i64, 0i32), (2, 0), (25, 1), (5, 0)] {
            let step_exp = e - sub;
            let step = m as f64 * 10f64.powi(step_exp);
            if !step.is_normal() {
                continue;
            }
            let mut first = (vmin / step).floor() as i64;
            while tick_at(first, m, step_exp).value > vmin {
                first -= 1;
            }
            while tick_at(first + 1, m, step_exp).value <= vmin {
                first += 1;
            }
            let mut last = (vmax / step).ceil() as i64;
            while tick_at(last, m, step_exp).value < vmax {
                last += 1;
            }
            while last > first + 1 && tick_at(last - 1, m, step_exp).value >= vmax {
                last -= 1;
            }
            let count = (last - first + 1) as usize;
            let entry = (count.abs_diff(n), count, first, last, m, step_exp);
            if count >= n - 1 && count <= n + 2 && best.map_or(true, |b| (entry.0, entry.1) < (b.0, b.1)) {
                best = Some(entry);
            }
            if fallback.map_or(true, |f| (entry.0, entry.1) < (f.0, f.1)) {
                fallback = Some(entry);
            }
        }
    }

    let (_, _, first, last, m, step_exp) =
        best.or(fallback).ok_or_else(|| SynthError::InvalidTicks("no candidate step".to_string()))?;
    Ok((first..=last).map(|i| tick_at(i, m, step_exp)).collect())
}

/// Tick values for a value axis over `[vmin, vmax]` targeting `n` ticks.
pub fn choose_tick_values(vmin: f64, vmax: f64, n: usize) -> Result<Vec<f64>, SynthError> {
    Ok(nice_ticks(vmin, vmax, n)?.into_iter().map(|t| t.value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_ranges() {
        assert_eq!(choose_tick_values(0.0, 97.0, 5).unwrap(), vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(choose_tick_values(0.0, 1.0, 5).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn degenerate_range_expands_by_one() {
        let ticks = choose_tick_values(5.0, 5.0, 5).unwrap();
        assert_eq!(*ticks.first().unwrap(), 5.0);
        assert_eq!(*ticks.last().unwrap(), 6.0);
    }

    #[test]
    fn labels_are_clean_decimals() {
        let ticks = nice_ticks(0.0, 1.0, 5).unwrap();
        let labels: Vec<&str> = ticks.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, vec!["0", "0.25", "0.5", "0.75", "1"]);
        // Sub-unit steps that are not binary-exact still label cleanly.
        let ticks = nice_ticks(0.0, 0.9, 5).unwrap();
        for t in &ticks {
            assert_eq!(t.label.parse::<f64>().unwrap(), t.value);
            assert!(!t.label.contains("000000"), "dusty label {}", t.label);
        }
    }

    #[test]
    fn count_covering_and_monotonicity_hold_broadly() {
        let cases = [
            (0.0, 97.0, 5),
            (13.2, 14.1, 4),
            (-50.0, 75.0, 6),
            (0.001, 0.0042, 5),
            (999.0, 1001.0, 3),
            (-3.0, -1.0, 5),
            (10.0, 100.0, 2),
            (0.0, 1e9, 7),
        ];
        for (lo, hi, n) in cases {
            let ticks = choose_tick_values(lo, hi, n).unwrap();
            assert!(ticks.len() >= n - 1 && ticks.len() <= n + 2, "{lo}..{hi} n={n}: {ticks:?}");
            assert!(*ticks.first().unwrap() <= lo, "{lo}..{hi}: {ticks:?}");
            assert!(*ticks.last().unwrap() >= hi, "{lo}..{hi}: {ticks:?}");
            for w in ticks.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn steps_come_from_the_nice_family() {
        for (lo, hi, n) in [(0.0, 97.0, 5), (2.0, 7.0, 5), (0.0, 0.33, 4), (5.0, 640.0, 6)] {
            let ticks = choose_tick_values(lo, hi, n).unwrap();
            let step = ticks[1] - ticks[0];
            let exp = step.log10().floor();
            let mantissa = step / 10f64.powf(exp);
            let ok = [1.0, 2.0, 2.5, 5.0, 10.0]
                .iter()
                .any(|m| (mantissa - m).abs() < 1e-9);
            assert!(ok, "step {step} mantissa {mantissa}");
        }
    }

    #[test]
    fn invalid_requests_are_rejected() {
        assert!(choose_tick_values(1.0, 0.0, 5).is_err());
        assert!(choose_tick_values(0.0, f64::NAN, 5).is_err());
        assert!(choose_tick_values(0.0, 1.0, 1).is_err());
    }
}
