//! Small descriptive statistics and the chi-square tail probability.

use alloc::vec::Vec;

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation (divides by `n`); 0 for a single value.
pub fn population_sd(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile with linear interpolation between closest ranks
/// (position `(n - 1) * q`), on already sorted input.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile_sorted(&sorted(values), 0.5)
}

/// Five-number summary `[min, q1, median, q3, max]`.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    let s = sorted(values);
    Some([
        *s.first()?,
        quantile_sorted(&s, 0.25)?,
        quantile_sorted(&s, 0.5)?,
        quantile_sorted(&s, 0.75)?,
        *s.last()?,
    ])
}

/// Regularized upper incomplete gamma function Q(a, x).
fn gamma_q(a: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 1000;
    if x <= 0.0 {
        return 1.0;
    }
    let ln_prefix = -x + a * libm::log(x) - libm::lgamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if libm::fabs(term) < libm::fabs(sum) * EPS {
                break;
            }
        }
        1.0 - sum * libm::exp(ln_prefix)
    } else {
        // Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if libm::fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if libm::fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if libm::fabs(delta - 1.0) < EPS {
                break;
            }
        }
        libm::exp(ln_prefix) * h
    }
}

/// Upper tail probability of a chi-square variable with `df` degrees of
/// freedom.
pub fn chi_square_sf(statistic: f64, df: f64) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, statistic / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sd_is_population() {
        assert_eq!(population_sd(&[0.0, 1.0]), Some(0.5));
        assert_abs_diff_eq!(population_sd(&[0.8; 3]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(population_sd(&[]), None);
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        assert_eq!(five_numbers(&[5.0, 1.0, 3.0, 2.0, 4.0]), Some([1.0, 2.0, 3.0, 4.0, 5.0]));
        let q = five_numbers(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(q[1], 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(q[2], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(q[3], 3.25, epsilon = 1e-12);
    }

    #[test]
    fn median_of_even_cohort_averages_middle() {
        assert_eq!(median(&[25.0, 30.0, 35.0, 40.0]), Some(32.5));
    }

    #[test]
    fn one_degree_of_freedom_matches_erfc_form() {
        // For df = 1 the tail has the closed form erfc(sqrt(x / 2)).
        for &x in &[0.01, 0.5, 1.0, 2.0, 3.841458820694124, 5.22, 10.0, 30.0] {
            let closed = libm::erfc(libm::sqrt(x / 2.0));
            assert_abs_diff_eq!(chi_square_sf(x, 1.0), closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_degrees_of_freedom_is_exponential() {
        for &x in &[0.1, 1.0, 4.0, 12.0] {
            assert_abs_diff_eq!(chi_square_sf(x, 2.0), libm::exp(-x / 2.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn critical_value_gives_five_percent() {
        assert_abs_diff_eq!(chi_square_sf(3.841458820694124, 1.0), 0.05, epsilon = 1e-9);
        assert_eq!(chi_square_sf(0.0, 1.0), 1.0);
    }
}
