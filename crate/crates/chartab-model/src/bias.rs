//! Relative-position bucketing for attention bias, matching the reference
//! T5 scheme: half the buckets cover exact small offsets, the rest are
//! log-spaced out to `max_distance`; bidirectional variants split the range
//! by sign.

/// Bucket for a (query i, key j) pair, `relative_position = j − i`.
pub fn relative_bucket(
    relative_position: i64,
    bidirectional: bool,
    num_buckets: usize,
    max_distance: usize,
) -> usize {
    let mut ret = 0usize;
    let mut n = -relative_position;
    let mut buckets = num_buckets;
    if bidirectional {
        buckets /= 2;
        if n < 0 {
            ret += buckets;
        }
        n = n.abs();
    } else {
        n = n.max(0);
    }
    let n = n as usize;
    let max_exact = buckets / 2;
    let val = if n < max_exact {
        n
    } else {
        let large = max_exact as f64
            + (n as f64 / max_exact as f64).ln() / (max_distance as f64 / max_exact as f64).ln()
                * (buckets - max_exact) as f64;
        (large as usize).min(buckets - 1)
    };
    ret + val
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bidirectional_buckets_match_reference_values() {
        let b = |rel| relative_bucket(rel, true, 32, 128);
        assert_eq!(b(0), 0);
        assert_eq!(b(-1), 1); // key one before query
        assert_eq!(b(1), 17); // key one after query
        assert_eq!(b(-7), 7);
        assert_eq!(b(-8), 8); // first log bucket
        assert_eq!(b(-15), 9);
        assert_eq!(b(-127), 15);
        assert_eq!(b(-100000), 15); // clamped
        assert_eq!(b(100000), 31);
    }

    #[test]
    fn causal_buckets_ignore_the_future() {
        let b = |rel| relative_bucket(rel, false, 32, 128);
        assert_eq!(b(0), 0);
        assert_eq!(b(-1), 1);
        assert_eq!(b(-15), 15);
        assert_eq!(b(-16), 16);
        assert_eq!(b(-31), 21);
        assert_eq!(b(-1000), 31);
        // Future keys collapse to bucket 0 (they are masked anyway).
        assert_eq!(b(5), 0);
    }

    #[test]
    fn all_buckets_in_range() {
        for rel in -300..300 {
            assert!(relative_bucket(rel, true, 32, 128) < 32);
            assert!(relative_bucket(rel, false, 32, 128) < 32);
            assert!(relative_bucket(rel, true, 8, 16) < 8);
            assert!(relative_bucket(rel, false, 8, 16) < 8);
        }
    }
}
