//! Real roots of a sign-valued function on an interval: uniform grid
//! bracketing followed by bisection.
//!
//! The functions handled here are only trusted for their sign, and sometimes
//! not even that: an evaluation may report `None` when rounding noise could
//! have flipped the sign. Grid pairs touching such a point are not bracketed,
//! and bisection stops with [`RefineError::Unresolved`] if it reaches one.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn from_i8(s: i8) -> Sign {
        match s.signum() {
            1 => Sign::Positive,
            -1 => Sign::Negative,
            _ => Sign::Zero,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    fn opposite(self, other: Sign) -> bool {
        self.as_i8() * other.as_i8() == -1
    }
}

/// An interval on which the function changes sign. A zero-width bracket
/// (`lo == hi`, both signs `Zero`) marks a point where the function vanished.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub sign_lo: Sign,
    pub sign_hi: Sign,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64, sign_lo: Sign, sign_hi: Sign) -> Option<Bracket> {
        (lo < hi && sign_lo.opposite(sign_hi)).then_some(Bracket {
            lo,
            hi,
            sign_lo,
            sign_hi,
        })
    }

    pub fn point(x: f64) -> Bracket {
        Bracket {
            lo: x,
            hi: x,
            sign_lo: Sign::Zero,
            sign_hi: Sign::Zero,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootCandidate {
    pub alpha: f64,
    pub bracket: Bracket,
    pub width_at_stop: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefineError {
    /// `max_iter` bisection steps left the bracket wider than the tolerance.
    MaxIterations {
        bracket: Bracket,
        evaluations: usize,
    },
    /// The sign at the midpoint could not be resolved; `bracket` is the
    /// narrowest interval still known to hold a sign change.
    Unresolved {
        bracket: Bracket,
        evaluations: usize,
    },
}

/// `n_grid + 1` uniformly spaced points covering `[lo, hi]`, endpoints exact.
pub fn uniform_grid(lo: f64, hi: f64, n_grid: usize) -> Vec<f64> {
    let n = n_grid.max(1);
    let step = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + step * i as f64 })
        .collect()
}

/// Brackets from precomputed signs at grid points `xs`.
pub fn brackets_from_signs(xs: &[f64], signs: &[Option<Sign>]) -> Vec<Bracket> {
    debug_assert_eq!(xs.len(), signs.len());
    let mut out = Vec::new();
    for i in 0..xs.len() {
        if signs[i] == Some(Sign::Zero) {
            out.push(Bracket::point(xs[i]));
            continue;
        }
        if i + 1 < xs.len() {
            if let (Some(a), Some(b)) = (signs[i], signs[i + 1]) {
                if let Some(br) = Bracket::new(xs[i], xs[i + 1], a, b) {
                    out.push(br);
                }
            }
        }
    }
    out
}

/// Evaluates `f` on `n_grid + 1` uniform points in `[lo, hi]` and returns one
/// bracket per adjacent pair with opposite signs.
pub fn scan_brackets<F>(f: F, lo: f64, hi: f64, n_grid: usize) -> Vec<Bracket>
where
    F: Fn(f64) -> Option<Sign>,
{
    assert!(lo < hi, "scan window must be non-empty");
    assert!(n_grid >= 2, "need at least two grid intervals");
    let xs = uniform_grid(lo, hi, n_grid);
    let signs: Vec<_> = xs.iter().map(|&x| f(x)).collect();
    brackets_from_signs(&xs, &signs)
}

#[inline]
fn rel_width_ok(width: f64, x: f64, tol: f64) -> bool {
    width <= tol * x.abs().max(1.0)
}

/// Bisects `bracket` until its width is at most `tol * max(1, |alpha|)`.
pub fn refine_root<F>(
    f: F,
    bracket: Bracket,
    tol: f64,
    max_iter: usize,
) -> Result<RootCandidate, RefineError>
where
    F: Fn(f64) -> Option<Sign>,
{
    if bracket.lo == bracket.hi {
        return Ok(RootCandidate {
            alpha: bracket.lo,
            bracket,
            width_at_stop: 0.0,
            evaluations: 0,
        });
    }
    let mut br = bracket;
    let mut evaluations = 0;
    for _ in 0..=max_iter {
        let mid = br.midpoint();
        let width = br.width();
        // Stop on tolerance, or when the interval can no longer be split.
        if rel_width_ok(width, mid, tol) || mid <= br.lo || mid >= br.hi {
            return Ok(RootCandidate {
                alpha: mid,
                bracket: br,
                width_at_stop: width,
                evaluations,
            });
        }
        if evaluations == max_iter {
            break;
        }
        evaluations += 1;
        match f(mid) {
            Some(Sign::Zero) => {
                return Ok(RootCandidate {
                    alpha: mid,
                    bracket: br,
                    width_at_stop: 0.0,
                    evaluations,
                })
            }
            Some(s) if s == br.sign_lo => br.lo = mid,
            Some(s) => {
                br.hi = mid;
                br.sign_hi = s;
            }
            None => {
                return Err(RefineError::Unresolved {
                    bracket: br,
                    evaluations,
                })
            }
        }
    }
    Err(RefineError::MaxIterations {
        bracket: br,
        evaluations,
    })
}

/// Merges candidates closer than `rel_tol * max(1, |alpha|)`, keeping the one
/// refined to the smaller width. Output is sorted by `alpha`.
pub fn dedup_roots(mut roots: Vec<RootCandidate>, rel_tol: f64) -> Vec<RootCandidate> {
    roots.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut out: Vec<RootCandidate> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last_mut() {
            Some(prev) if (r.alpha - prev.alpha).abs() <= rel_tol * r.alpha.abs().max(1.0) => {
                if r.width_at_stop < prev.width_at_stop {
                    *prev = r;
                }
            }
            _ => out.push(r),
        }
    }
    out
}
