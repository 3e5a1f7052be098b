//! Fitting primitives: a Nelder-Mead simplex minimizer, closed-form
//! ordinary least squares, an exponential model fit and multi-peak
//! Lorentzian line shapes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_EVAL: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub objective_value: f64,
    pub n_evaluations: usize,
    pub converged: bool,
}

/// Nelder-Mead options.
///
/// Termination: the simplex has collapsed (every coordinate of every vertex
/// within `tol·(1 + |x_best,i|)` of the best vertex), or the objective spread
/// across vertices is at most `tol·(|f_best| + tol)` while the simplex is
/// already within `sqrt(tol)` by the same measure.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub tol: f64,
    pub max_eval: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_eval: DEFAULT_MAX_EVAL,
        }
    }
}

impl NelderMead {
    pub fn new(tol: f64, max_eval: usize) -> Self {
        Self { tol, max_eval }
    }

    pub fn minimize<F>(&self, objective: F, x0: &[f64], scale: &[f64]) -> Result<FitResult>
    where
        F: Fn(&[f64]) -> f64,
    {
        nelder_mead(objective, x0, scale, self.tol, self.max_eval)
    }

    /// Re-starts the simplex around the incumbent until a restart no longer
    /// improves the objective. Guards against premature collapse in
    /// narrow valleys; the evaluation budget is shared across restarts.
    pub fn minimize_with_restarts<F>(
        &self,
        objective: F,
        x0: &[f64],
        scale: &[f64],
        max_restarts: usize,
    ) -> Result<FitResult>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut best = nelder_mead(&objective, x0, scale, self.tol, self.max_eval)?;
        let mut used = best.n_evaluations;
        for _ in 0..max_restarts {
            if used >= self.max_eval {
                best.converged = false;
                break;
            }
            let next = nelder_mead(&objective, &best.params, scale, self.tol, self.max_eval - used)?;
            used += next.n_evaluations;
            let improvement = best.objective_value - next.objective_value;
            let improved = improvement > self.tol * (best.objective_value.abs() + self.tol);
            if next.objective_value <= best.objective_value {
                best = FitResult {
                    n_evaluations: used,
                    ..next
                };
            }
            if !improved {
                break;
            }
        }
        best.n_evaluations = used;
        Ok(best)
    }

    /// Runs `n_starts` minimizations from `x0` jittered uniformly within
    /// ±`scale` (the first start is `x0` itself) and keeps the best.
    pub fn multistart<F, R>(
        &self,
        objective: F,
        x0: &[f64],
        scale: &[f64],
        n_starts: usize,
        rng: &mut R,
    ) -> Result<FitResult>
    where
        F: Fn(&[f64]) -> f64,
        R: Rng + ?Sized,
    {
        let mut best: Option<FitResult> = None;
        let mut total = 0;
        for i in 0..n_starts.max(1) {
            let start: Vec<f64> = if i == 0 {
                x0.to_vec()
            } else {
                x0.iter()
                    .zip(scale)
                    .map(|(x, s)| x + s * rng.random_range(-1.0..=1.0))
                    .collect()
            };
            let r = self.minimize_with_restarts(&objective, &start, scale, 3)?;
            total += r.n_evaluations;
            if best.as_ref().is_none_or(|b| r.objective_value < b.objective_value) {
                best = Some(r);
            }
        }
        let mut best = best.expect("at least one start");
        best.n_evaluations = total;
        Ok(best)
    }
}

fn lexicographic_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Derivative-free minimization with the adaptive coefficients of Gao & Han
/// (reflection 1, expansion 1+2/n, contraction 0.75-1/2n, shrink 1-1/n),
/// which reduce to the classic (1, 2, 1/2, 1/2) in two dimensions.
///
/// Exhausting `max_eval` is not an error: the best vertex is returned with
/// `converged = false`. Non-finite objective values are treated as +∞.
pub fn nelder_mead<F>(objective: F, x0: &[f64], scale: &[f64], tol: f64, max_eval: usize) -> Result<FitResult>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    if scale.len() != n {
        return Err(Error::LengthMismatch(n, scale.len()));
    }
    require(n > 0, "x0", "must be non-empty")?;
    require(
        scale.iter().all(|s| *s > 0.0 && s.is_finite()),
        "scale",
        "must be strictly positive",
    )?;
    require(tol > 0.0, "tol", "must be positive")?;

    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let (beta, gamma, delta) = if n == 1 { (2.0, 0.5, 0.5) } else { (beta, gamma, delta) };

    let evals = std::cell::Cell::new(0usize);
    let f = |x: &[f64]| -> f64 {
        evals.set(evals.get() + 1);
        let v = objective(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = f(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale[i];
        let v = f(&x);
        simplex.push((x, v));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lexicographic_cmp(&a.0, &b.0)));
    };

    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    loop {
        order(&mut simplex);
        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        let spread = f_worst - f_best;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / (1.0 + b.abs())))
            })
            .fold(0.0f64, f64::max);
        // A flat spread alone is not enough: a symmetric simplex can straddle
        // the minimum with equal values at every vertex.
        let flat = f_best.is_finite() && spread <= tol * (f_best.abs() + tol);
        if diameter <= tol || (flat && diameter <= tol.sqrt()) {
            converged = f_best.is_finite();
            break;
        }
        if evals.get() >= max_eval {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let worst = simplex[n].0.clone();
        let point = |t: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + t * (c - w);
            }
        };

        point(alpha, &mut trial);
        let f_r = f(&trial);
        if f_r < f_best {
            let reflected = trial.clone();
            point(alpha * beta, &mut trial);
            let f_e = f(&trial);
            simplex[n] = if f_e < f_r {
                (trial.clone(), f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < simplex[n - 1].1 {
            simplex[n] = (trial.clone(), f_r);
            continue;
        }
        // contraction: outside if the reflected point beats the worst
        let outside = f_r < f_worst;
        let t = if outside { alpha * gamma } else { -gamma };
        let reflected_value = f_r;
        point(t, &mut trial);
        let f_c = f(&trial);
        let accept = if outside { f_c <= reflected_value } else { f_c < f_worst };
        if accept {
            simplex[n] = (trial.clone(), f_c);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = bi + delta * (*xi - bi);
            }
            *v = f(x);
        }
    }

    order(&mut simplex);
    let (params, objective_value) = simplex.swap_remove(0);
    Ok(FitResult {
        params,
        objective_value,
        n_evaluations: evals.get(),
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero when it cannot be estimated (n = 2).
    pub stderr_slope: f64,
}

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::NotEnoughData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        sxx += dx * dx;
        sxy += dx * (yi - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::SingularDesign);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr_slope = if n > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let r = yi - (intercept + slope * xi);
                r * r
            })
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        stderr_slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Exponent in y = amplitude·exp(rate·t), 1/s.
    pub rate: f64,
    pub amplitude: f64,
    /// Final residual sum of squares in linear space.
    pub residual: f64,
    pub converged: bool,
    /// False when non-positive data forced the direct Nelder-Mead path.
    pub log_linear_start: bool,
}

/// Fits y = amplitude·exp(rate·t).
///
/// With strictly positive data the log-linear OLS solution seeds a
/// Nelder-Mead refinement on squared residuals in linear space. Otherwise
/// the refinement runs from a best-effort start with the amplitude clipped
/// at zero.
pub fn exponential_fit(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if t.len() != y.len() {
        return Err(Error::LengthMismatch(t.len(), y.len()));
    }
    if t.len() < 3 {
        return Err(Error::NotEnoughData {
            needed: 3,
            got: t.len(),
        });
    }
    let all_positive = y.iter().all(|v| *v > 0.0);
    let (t_pos, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(ti, v)| (*ti, v.ln()))
        .unzip();
    let start = match linear_fit(&t_pos, &ly) {
        Ok(lf) => (lf.intercept.exp(), lf.slope),
        Err(Error::SingularDesign) | Err(Error::NotEnoughData { .. }) => {
            let ymax = y.iter().cloned().fold(0.0f64, f64::max);
            (ymax, 0.0)
        }
        Err(e) => return Err(e),
    };
    if !all_positive && t_pos.len() < 2 && start.0 == 0.0 {
        // identically zero data
        return Ok(ExponentialFit {
            rate: 0.0,
            amplitude: 0.0,
            residual: 0.0,
            converged: true,
            log_linear_start: false,
        });
    }

    let clip = !all_positive;
    let sse = |p: &[f64]| -> f64 {
        let a = if clip { p[0].max(0.0) } else { p[0] };
        t.iter()
            .zip(y)
            .map(|(ti, yi)| {
                let r = yi - a * (p[1] * ti).exp();
                r * r
            })
            .sum()
    };

    let span = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - t.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::SingularDesign);
    }
    let scale = [0.1 * start.0.abs().max(1e-12), 0.1 * start.1.abs().max(1.0 / span)];
    let x0 = [start.0, start.1];
    let f0 = sse(&x0);
    let nm = NelderMead::default().minimize_with_restarts(sse, &x0, &scale, 2)?;
    let (params, residual, converged) = if nm.objective_value <= f0 {
        (nm.params, nm.objective_value, nm.converged)
    } else {
        (x0.to_vec(), f0, true)
    };
    Ok(ExponentialFit {
        rate: params[1],
        amplitude: if clip { params[0].max(0.0) } else { params[0] },
        residual,
        converged,
        log_linear_start: all_positive,
    })
}

/// A Lorentzian line with peak value `amplitude` at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

impl LorentzianPeak {
    pub fn new(center: f64, fwhm: f64, amplitude: f64) -> Result<Self> {
        require(fwhm > 0.0, "fwhm", "must be positive")?;
        require(amplitude >= 0.0, "amplitude", "must be non-negative")?;
        Ok(Self {
            center,
            fwhm,
            amplitude,
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let hw = 0.5 * self.fwhm;
        let d = x - self.center;
        self.amplitude * hw * hw / (d * d + hw * hw)
    }
}

pub fn multi_lorentzian_eval(peaks: &[LorentzianPeak], baseline: f64, x: f64) -> f64 {
    baseline + peaks.iter().map(|p| p.eval(x)).sum::<f64>()
}
