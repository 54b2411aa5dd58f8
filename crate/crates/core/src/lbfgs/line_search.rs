use crate::linalg::dot;

/// Accepted trial point of a line search.
#[derive(Clone, Debug)]
pub struct LineSearchPoint {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
    pub evaluations: usize,
}

/// No step satisfied the strong Wolfe conditions; `best` is the trial point
/// with the lowest finite value, if any.
#[derive(Clone, Debug)]
pub struct LineSearchFailure {
    pub best: Option<LineSearchPoint>,
    pub evaluations: usize,
}

const STEP_MAX: f64 = 1e20;

struct Searcher<'a, F> {
    oracle: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
    evaluations: usize,
    best: Option<LineSearchPoint>,
}

struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Searcher<'_, F> {
    fn eval(&mut self, alpha: f64) -> Option<(Trial, LineSearchPoint)> {
        if self.evaluations >= self.budget {
            return None;
        }
        self.evaluations += 1;
        let x: Vec<f64> = self
            .x
            .iter()
            .zip(self.d)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (f, g) = (self.oracle)(&x);
        let finite = f.is_finite() && g.iter().all(|v| v.is_finite());
        let (f, slope) = if finite {
            (f, dot(&g, self.d))
        } else {
            (f64::INFINITY, f64::NAN)
        };
        let point = LineSearchPoint {
            alpha,
            x,
            f,
            g,
            evaluations: 0,
        };
        if finite && self.best.as_ref().is_none_or(|b| f < b.f) {
            self.best = Some(point.clone());
        }
        Some((Trial { alpha, f, slope }, point))
    }

    fn sufficient_decrease(&self, t: &Trial) -> bool {
        t.f <= self.f0 + self.c1 * t.alpha * self.slope0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.slope.abs() <= -self.c2 * self.slope0
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Option<LineSearchPoint> {
        loop {
            let a = interpolate(&lo, &hi);
            let (t, point) = self.eval(a)?;
            if !self.sufficient_decrease(&t) || t.f >= lo.f {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return Some(point);
                }
                if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
            if (hi.alpha - lo.alpha).abs() <= f64::EPSILON * lo.alpha.abs().max(1e-300) {
                return None;
            }
        }
    }
}

/// Cubic interpolation between two trials, safeguarded to the middle 80%
/// of the bracket; bisection when `hi` carries no usable information.
fn interpolate(lo: &Trial, hi: &Trial) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let width = b - a;
    let (left, right) = if a < b {
        (a + 0.1 * width.abs(), b - 0.1 * width.abs())
    } else {
        (b + 0.1 * width.abs(), a - 0.1 * width.abs())
    };
    let bisect = 0.5 * (a + b);
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return bisect;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if !(disc >= 0.0) {
        return bisect;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = hi.slope - lo.slope + 2.0 * d2;
    if denom == 0.0 {
        return bisect;
    }
    let c = b - (b - a) * (hi.slope + d2 - d1) / denom;
    if c.is_finite() {
        c.clamp(left, right)
    } else {
        bisect
    }
}

/// Finds a step `α` along the descent direction `d` satisfying
/// `f(x+αd) <= f0 + c1 α slope0` and `|∇f(x+αd)ᵀd| <= c2 |slope0|`,
/// using at most `max_steps` oracle calls.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe<F>(
    oracle: &mut F,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
    c1: f64,
    c2: f64,
    max_steps: usize,
) -> Result<LineSearchPoint, LineSearchFailure>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut s = Searcher {
        oracle,
        x,
        d,
        f0,
        slope0,
        c1,
        c2,
        budget: max_steps,
        evaluations: 0,
        best: None,
    };
    let fail = |s: Searcher<'_, F>| LineSearchFailure {
        best: s.best,
        evaluations: s.evaluations,
    };
    if !(slope0 < 0.0) {
        return Err(fail(s));
    }
    let mut prev = Trial {
        alpha: 0.0,
        f: f0,
        slope: slope0,
    };
    let mut alpha = alpha0;
    let mut first = true;
    loop {
        let Some((t, point)) = s.eval(alpha) else {
            return Err(fail(s));
        };
        let found = if !t.f.is_finite() {
            // Outside the domain: retreat towards the last good step.
            alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
            continue;
        } else if !s.sufficient_decrease(&t) || (!first && t.f >= prev.f) {
            s.zoom(prev, t)
        } else if s.curvature(&t) {
            Some(point)
        } else if t.slope >= 0.0 {
            s.zoom(t, prev)
        } else {
            first = false;
            alpha = (2.0 * t.alpha).min(STEP_MAX);
            prev = t;
            continue;
        };
        return match found {
            Some(mut p) => {
                p.evaluations = s.evaluations;
                Ok(p)
            }
            None => Err(fail(s)),
        };
    }
}
