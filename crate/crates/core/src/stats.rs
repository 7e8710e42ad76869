//! Descriptive statistics used as bin features.
//!
//! Conventions: `std` is the sample standard deviation (divisor n - 1);
//! `kurtosis` is the excess kurtosis m4 / m2^2 - 3 with divisor n for the
//! central moments, and is 0 for a constant sequence.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Compensated (Neumaier) sum.
fn sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = s + x;
        if libm::fabs(s) >= libm::fabs(x) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn non_empty(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::Empty("statistic of an empty sequence"))
    } else {
        Ok(())
    }
}

fn at_least_two(xs: &[f64]) -> Result<()> {
    non_empty(xs)?;
    if xs.len() < 2 {
        Err(Error::TooShort { needed: 2, got: xs.len() })
    } else {
        Ok(())
    }
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    non_empty(xs)?;
    Ok(sum(xs.iter().copied()) / xs.len() as f64)
}

/// Sum of `(x - mean)^power` over the sequence.
fn central_sum(xs: &[f64], mu: f64, power: i32) -> f64 {
    sum(xs.iter().map(|&x| {
        let d = x - mu;
        match power {
            2 => d * d,
            4 => {
                let d2 = d * d;
                d2 * d2
            }
            _ => libm::pow(d, f64::from(power)),
        }
    }))
}

pub fn variance(xs: &[f64]) -> Result<f64> {
    at_least_two(xs)?;
    let mu = mean(xs)?;
    Ok(central_sum(xs, mu, 2) / (xs.len() - 1) as f64)
}

pub fn std(xs: &[f64]) -> Result<f64> {
    Ok(libm::sqrt(variance(xs)?))
}

/// Variance with divisor n.
pub fn population_variance(xs: &[f64]) -> Result<f64> {
    let mu = mean(xs)?;
    Ok(central_sum(xs, mu, 2) / xs.len() as f64)
}

pub fn range(xs: &[f64]) -> Result<f64> {
    non_empty(xs)?;
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(hi - lo)
}

/// Median computed by partial sorting of `buf`, which is reordered.
pub fn median_in_place(buf: &mut [f64]) -> Result<f64> {
    non_empty(buf)?;
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(lower + (upper - lower) / 2.0)
    }
}

pub fn median(xs: &[f64]) -> Result<f64> {
    let mut buf: Vec<f64> = xs.to_vec();
    median_in_place(&mut buf)
}

pub fn kurtosis(xs: &[f64]) -> Result<f64> {
    at_least_two(xs)?;
    let n = xs.len() as f64;
    let mu = mean(xs)?;
    let m2 = central_sum(xs, mu, 2) / n;
    if m2 == 0.0 {
        return Ok(0.0);
    }
    let m4 = central_sum(xs, mu, 4) / n;
    Ok(m4 / (m2 * m2) - 3.0)
}
