use crate::error::{domain, Result};

/// Continuity-corrected rank of `observed` within `reference`:
/// `(#{ref < obs} + 0.5·#{ref = obs} + 0.5) / (n + 1)`.
///
/// Always strictly inside (0, 1).
pub fn empirical_cdf(reference: &[f64], observed: f64) -> Result<f64> {
    if reference.is_empty() {
        return domain("empirical cdf needs a nonempty reference");
    }
    if observed.is_nan() {
        return domain("empirical cdf observed value is NaN");
    }
    let (mut below, mut ties) = (0usize, 0usize);
    for &r in reference {
        if r < observed {
            below += 1;
        } else if r == observed {
            ties += 1;
        }
    }
    Ok((below as f64 + 0.5 * ties as f64 + 0.5) / (reference.len() as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        let reference: Vec<f64> = (0..999).map(|i| i as f64).collect();
        assert!((empirical_cdf(&reference, -1.0).unwrap() - 0.0005).abs() < 1e-15);
        assert!((empirical_cdf(&reference, 1e9).unwrap() - 0.9995).abs() < 1e-15);
        assert!((empirical_cdf(&reference, 499.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(empirical_cdf(&[], 0.0).is_err());
    }

    #[test]
    fn nondecreasing_in_observed() {
        let reference = [0.3, -1.0, 2.0, 0.3, 5.0];
        let mut last = 0.0;
        for i in -20..80 {
            let p = empirical_cdf(&reference, i as f64 / 10.0).unwrap();
            assert!(p >= last);
            last = p;
        }
    }
}
