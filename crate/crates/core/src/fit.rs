//! Exact affine envelopes over finite tables of distances.

use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

use crate::dist::Dist;

pub type Rational = Ratio<i128>;

/// `value <= slope * x + offset` (or the lower form `value >= x / slope - offset`).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct AffineFit {
    pub slope: Rational,
    pub offset: Rational,
}

impl fmt::Display for AffineFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*r + {}", self.slope, self.offset)
    }
}

fn to_f64(q: Rational) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

impl Serialize for AffineFit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("AffineFit", 4)?;
        st.serialize_field("slope", &self.slope.to_string())?;
        st.serialize_field("offset", &self.offset.to_string())?;
        st.serialize_field("slope_approx", &to_f64(self.slope))?;
        st.serialize_field("offset_approx", &to_f64(self.offset))?;
        st.end()
    }
}

fn floor_q(d: Dist) -> Rational {
    Rational::from_integer(d.floor_int() as i128)
}

fn ceil_q(d: Dist) -> Rational {
    Rational::from_integer(d.ceil_int() as i128)
}

/// Points `(x, y)` rounded so that an upper envelope of the rounded points
/// is an upper envelope of the exact ones.
pub fn upper_points(table: &[(Dist, Dist)]) -> Vec<(Rational, Rational)> {
    table.iter().map(|&(x, y)| (floor_q(x), ceil_q(y))).collect()
}

/// Points rounded for lower envelopes.
pub fn lower_points(table: &[(Dist, Dist)]) -> Vec<(Rational, Rational)> {
    table.iter().map(|&(x, y)| (ceil_q(x), floor_q(y))).collect()
}

fn cross(o: (Rational, Rational), a: (Rational, Rational), b: (Rational, Rational)) -> Rational {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Slopes of the hull edges of `points ∪ {origin}`; `upper` selects the upper hull.
fn hull_slopes(points: &[(Rational, Rational)], upper: bool) -> Vec<Rational> {
    let zero = Rational::from_integer(0);
    let mut pts: Vec<(Rational, Rational)> = points.to_vec();
    pts.push((zero, zero));
    pts.sort();
    // keep the extreme y for each x
    let mut dedup: Vec<(Rational, Rational)> = Vec::new();
    for p in pts {
        match dedup.last_mut() {
            Some(last) if last.0 == p.0 => {
                if upper {
                    last.1 = last.1.max(p.1)
                } else {
                    last.1 = last.1.min(p.1)
                }
            }
            _ => dedup.push(p),
        }
    }
    let mut hull: Vec<(Rational, Rational)> = Vec::new();
    for p in dedup {
        while hull.len() >= 2 {
            let c = cross(hull[hull.len() - 2], hull[hull.len() - 1], p);
            let bad = if upper { c >= zero } else { c <= zero };
            if bad {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
}

/// Smallest `b >= 0` with `y <= c x + b` on every point.
pub fn upper_offset(points: &[(Rational, Rational)], c: Rational) -> Rational {
    points
        .iter()
        .map(|&(x, y)| y - c * x)
        .fold(Rational::from_integer(0), Rational::max)
}

/// Smallest `b >= 0` with `y >= x / c - b` on every point.
pub fn lower_offset(points: &[(Rational, Rational)], c: Rational) -> Rational {
    points
        .iter()
        .map(|&(x, y)| x / c - y)
        .fold(Rational::from_integer(0), Rational::max)
}

fn pick_best(candidates: impl IntoIterator<Item = Rational>, cost: impl Fn(Rational) -> Rational) -> AffineFit {
    let mut best: Option<AffineFit> = None;
    for c in candidates {
        let b = cost(c);
        let better = match best {
            None => true,
            Some(f) => (c + b, c) < (f.slope + f.offset, f.slope),
        };
        if better {
            best = Some(AffineFit { slope: c, offset: b });
        }
    }
    best.expect("nonempty candidates")
}

/// The `(c, b)` with `c, b >= 0` minimizing `c + b` subject to `y <= c x + b`,
/// ties broken by smaller `c`.
pub fn fit_upper(points: &[(Rational, Rational)]) -> AffineFit {
    let zero = Rational::from_integer(0);
    let mut candidates: Vec<Rational> = hull_slopes(points, true).into_iter().filter(|&s| s >= zero).collect();
    candidates.push(zero);
    pick_best(candidates, |c| upper_offset(points, c))
}

/// Two-sided fit `x / c - b <= y <= c x + b` with `c >= 1`, minimizing `c + b`
/// over the hull breakpoints of both sides.
pub fn fit_two_sided(upper: &[(Rational, Rational)], lower: &[(Rational, Rational)]) -> AffineFit {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    let mut candidates: Vec<Rational> = hull_slopes(upper, true).into_iter().filter(|&s| s >= one).collect();
    candidates.extend(
        hull_slopes(lower, false)
            .into_iter()
            .filter(|&s| s > zero && s <= one)
            .map(|s| s.recip()),
    );
    candidates.push(one);
    pick_best(candidates, |c| upper_offset(upper, c).max(lower_offset(lower, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(v: i128) -> Rational {
        Rational::from_integer(v)
    }

    #[test]
    fn linear_table_fits_exactly() {
        let pts: Vec<_> = (1..=50).map(|x| (q(x), q(2 * x))).collect();
        let f = fit_upper(&pts);
        assert_eq!((f.slope, f.offset), (q(2), q(0)));
    }

    #[test]
    fn bounded_table_prefers_constant() {
        let pts: Vec<_> = (1..=50).map(|x| (q(x), q(3))).collect();
        let f = fit_upper(&pts);
        assert_eq!((f.slope, f.offset), (q(0), q(3)));
    }

    #[test]
    fn two_sided_identity() {
        let pts: Vec<_> = (1..=20).map(|x| (q(x), q(x))).collect();
        let f = fit_two_sided(&pts, &pts);
        assert_eq!((f.slope, f.offset), (q(1), q(0)));
    }

    proptest! {
        #[test]
        fn upper_fit_is_feasible_and_optimal(ys in prop::collection::vec(0i128..200, 1..30)) {
            let pts: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (q(i as i128 + 1), q(y))).collect();
            let f = fit_upper(&pts);
            for &(x, y) in &pts {
                prop_assert!(y <= f.slope * x + f.offset);
            }
            // oracle: scan slopes on a fine rational grid
            for num in 0..=400 {
                let c = Rational::new(num, 2);
                let b = upper_offset(&pts, c);
                prop_assert!(f.slope + f.offset <= c + b);
            }
        }
    }
}
