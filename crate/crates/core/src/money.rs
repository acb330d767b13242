//! Integer money representation.
//!
//! Every balance in the simulation is held in integer minor units so that
//! conservation checks are exact. Rates are applied with round-half-even.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Minor units per currency unit.
///
/// Model prices sit around 1 per unit of goods while dwellings cost a few
/// hundred units, so individual wage shares are fractions of a unit.
pub const MINOR_PER_UNIT: i64 = 1_000_000;

#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

/// Round to the nearest integer, ties to even.
#[inline]
pub fn round_half_even(x: f64) -> i64 {
    x.round_ties_even() as i64
}

impl Money {
    pub const ZERO: Money = Money(0);

    #[inline]
    pub const fn from_minor(minor: i64) -> Self {
        Money(minor)
    }

    #[inline]
    pub const fn minor(self) -> i64 {
        self.0
    }

    /// Converts a currency amount, rounding half-even to the nearest minor unit.
    /// Non-finite input maps to zero.
    pub fn from_units(units: f64) -> Self {
        if !units.is_finite() {
            return Money::ZERO;
        }
        Money(round_half_even(units * MINOR_PER_UNIT as f64))
    }

    #[inline]
    pub fn to_units(self) -> f64 {
        self.0 as f64 / MINOR_PER_UNIT as f64
    }

    /// `self * rate`, rounded half-even.
    pub fn scale(self, rate: f64) -> Money {
        if !rate.is_finite() {
            return Money::ZERO;
        }
        Money(round_half_even(self.0 as f64 * rate))
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    #[inline]
    pub fn max_zero(self) -> Money {
        Money(self.0.max(0))
    }

    /// Equal split into `n` shares; the remainder is returned separately.
    pub fn split_even(self, n: usize) -> (Money, Money) {
        if n == 0 {
            return (Money::ZERO, self);
        }
        let share = self.0.div_euclid(n as i64);
        let rem = self.0 - share * n as i64;
        (Money(share), Money(rem))
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Money({})", self.to_units())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_units())
    }
}

impl Add for Money {
    type Output = Money;
    #[inline]
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    #[inline]
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl AddAssign for Money {
    #[inline]
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    #[inline]
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

/// Moves up to `want` out of `sources` in order, returning the amount drawn.
/// Each source is debited in turn until the request is met or all are empty.
pub fn draw_in_order(sources: &mut [&mut Money], want: Money) -> Money {
    let mut remaining = want.max_zero();
    let mut drawn = Money::ZERO;
    for src in sources.iter_mut() {
        if remaining.is_zero() {
            break;
        }
        let take = if **src > remaining {
            remaining
        } else {
            (**src).max_zero()
        };
        **src -= take;
        remaining -= take;
        drawn += take;
    }
    drawn
}

/// Splits `total` in proportion to `weights` so the parts sum exactly to
/// `total`. Leftover minor units go to the largest fractional parts, ties to
/// the lower index. All-zero weights yield an even split.
pub fn apportion(total: Money, weights: &[f64]) -> Vec<Money> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let exact: Vec<f64> = if sum > 0.0 {
        weights
            .iter()
            .map(|w| total.0 as f64 * w.max(0.0) / sum)
            .collect()
    } else {
        vec![total.0 as f64 / n as f64; n]
    };
    let mut parts: Vec<i64> = exact.iter().map(|x| x.floor() as i64).collect();
    let mut left = total.0 - parts.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut i = 0;
    while left != 0 {
        let k = order[i % n];
        if left > 0 {
            parts[k] += 1;
            left -= 1;
        } else {
            parts[k] -= 1;
            left += 1;
        }
        i += 1;
    }
    parts.into_iter().map(Money).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_is_exact() {
        let parts = apportion(Money::from_minor(100), &[1.0, 1.0, 1.0]);
        assert_eq!(
            parts.iter().map(|m| m.minor()).collect::<Vec<_>>(),
            vec![34, 33, 33]
        );
        let parts = apportion(Money::from_minor(7), &[0.0, 0.0]);
        assert_eq!(parts.iter().copied().sum::<Money>().minor(), 7);
        let parts = apportion(Money::from_minor(1_000_003), &[0.2, 0.5, 0.3]);
        assert_eq!(parts.iter().copied().sum::<Money>().minor(), 1_000_003);
        assert!(apportion(Money::from_minor(5), &[]).is_empty());
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.5), 0);
        assert_eq!(round_half_even(1.5), 2);
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(-0.5), 0);
        assert_eq!(round_half_even(-1.5), -2);
        assert_eq!(Money::from_minor(5).scale(0.5), Money::from_minor(2));
        assert_eq!(Money::from_minor(7).scale(0.5), Money::from_minor(4));
    }

    #[test]
    fn unit_conversion() {
        assert_eq!(Money::from_units(1.0).minor(), MINOR_PER_UNIT);
        assert_eq!(Money::from_units(f64::NAN), Money::ZERO);
        assert!((Money::from_units(12.345678).to_units() - 12.345678).abs() < 1e-12);
    }

    #[test]
    fn split_keeps_remainder() {
        let (share, rem) = Money::from_minor(103).split_even(4);
        assert_eq!(share.minor(), 25);
        assert_eq!(rem.minor(), 3);
        let (share, rem) = Money::from_minor(10).split_even(0);
        assert_eq!(share, Money::ZERO);
        assert_eq!(rem.minor(), 10);
    }

    #[test]
    fn draw_order() {
        let mut a = Money::from_minor(3);
        let mut b = Money::from_minor(5);
        let mut c = Money::from_minor(10);
        let got = draw_in_order(&mut [&mut a, &mut b, &mut c], Money::from_minor(9));
        assert_eq!(got.minor(), 9);
        assert_eq!((a.minor(), b.minor(), c.minor()), (0, 0, 9));
        let got = draw_in_order(&mut [&mut a, &mut b, &mut c], Money::from_minor(100));
        assert_eq!(got.minor(), 9);
        assert_eq!(c, Money::ZERO);
    }
}
