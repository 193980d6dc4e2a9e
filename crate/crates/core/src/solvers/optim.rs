//! Derivative-free and quasi-Newton minimizers for variational energies.

use rand::Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best (or, for SPSA, current) objective after each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub step: f64,
    pub f_tol: f64,
    pub max_evals: usize,
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            step: 0.1,
            f_tol: 1e-10,
            max_evals: 20_000,
            max_restarts: 20,
        }
    }
}

struct Counter<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counter<F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        (self.f)(x)
    }
}

/// Adaptive Nelder–Mead, restarted from the best vertex until a restart no
/// longer improves the value by more than `f_tol`.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut f = Counter { f, evaluations: 0 };
    let n = x0.len();
    let mut best_x = x0.to_vec();
    let mut best = f.eval(x0)?;
    let mut trace = vec![best];
    if n == 0 {
        return Ok(Minimum {
            x: best_x,
            value: best,
            trace,
            evaluations: f.evaluations,
            converged: true,
        });
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    for _ in 0..=opts.max_restarts {
        let start = best;
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best_x.clone(), best)];
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += opts.step;
            let v = f.eval(&x)?;
            simplex.push((x, v));
        }
        let mut budget_hit = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            trace.push(simplex[0].1);
            if simplex[n].1 - simplex[0].1 <= opts.f_tol {
                break;
            }
            if f.evaluations >= opts.max_evals {
                budget_hit = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / nf;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = f.eval(&xr)?;
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = f.eval(&xe)?;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(alpha * rho);
                    let fc = f.eval(&xc)?;
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = f.eval(&xc)?;
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        for (xi, bi) in vertex.0.iter_mut().zip(&x0) {
                            *xi = bi + sigma * (*xi - bi);
                        }
                        vertex.1 = f.eval(&vertex.0)?;
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best {
            best = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if budget_hit {
            return Ok(Minimum {
                x: best_x,
                value: best,
                trace,
                evaluations: f.evaluations,
                converged: false,
            });
        }
        if start - best <= opts.f_tol {
            if *trace.last().expect("non-empty") != best {
                trace.push(best);
            }
            return Ok(Minimum {
                x: best_x,
                value: best,
                trace,
                evaluations: f.evaluations,
                converged: true,
            });
        }
    }
    trace.push(best);
    Ok(Minimum {
        x: best_x,
        value: best,
        trace,
        evaluations: f.evaluations,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsaOptions {
    pub iterations: usize,
    /// Perturbation size at the first iteration.
    pub c0: f64,
    /// Desired magnitude of the first parameter update.
    pub first_step: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Largest change of any single parameter in one iteration.
    pub max_step: f64,
    /// Iterations before the convergence test is first applied.
    pub min_iterations: usize,
    /// Reject updates that raise the objective by more than twice its
    /// noise level, estimated from repeated evaluations at the start point.
    pub blocking: bool,
    /// Convergence is declared when the mean objective over the last two
    /// windows of this many iterations differs by less than `f_tol`.
    pub window: usize,
    pub f_tol: f64,
}

impl Default for SpsaOptions {
    fn default() -> Self {
        SpsaOptions {
            iterations: 2000,
            c0: 0.1,
            first_step: 0.05,
            alpha: 0.602,
            gamma: 0.101,
            max_step: 0.1,
            min_iterations: 1000,
            blocking: true,
            window: 100,
            f_tol: 1e-3,
        }
    }
}

/// Simultaneous-perturbation stochastic approximation with the standard
/// gain decay; the first-step gain is calibrated from a few gradient draws.
pub fn spsa<F, R>(f: F, x0: &[f64], opts: &SpsaOptions, rng: &mut R) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let mut f = Counter { f, evaluations: 0 };
    let n = x0.len();
    let mut x = x0.to_vec();
    if n == 0 {
        let v = f.eval(&x)?;
        return Ok(Minimum {
            x,
            value: v,
            trace: vec![v],
            evaluations: f.evaluations,
            converged: true,
        });
    }
    let stability = 0.1 * opts.iterations as f64;
    let mut delta = vec![0.0; n];
    let probe = |x: &[f64], ck: f64, f: &mut Counter<F>, rng: &mut R, delta: &mut Vec<f64>| -> Result<(f64, f64)> {
        for d in delta.iter_mut() {
            *d = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let plus: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + ck * d).collect();
        let minus: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a - ck * d).collect();
        let yp = f.eval(&plus)?;
        let ym = f.eval(&minus)?;
        Ok((yp, ym))
    };
    const CALIBRATION: usize = 5;
    let start: Vec<f64> = (0..CALIBRATION).map(|_| f.eval(&x)).collect::<Result<_>>()?;
    let mut f_cur = start.iter().sum::<f64>() / CALIBRATION as f64;
    let noise = (start.iter().map(|v| (v - f_cur).powi(2)).sum::<f64>() / (CALIBRATION - 1) as f64).sqrt();
    let mut g0 = 0.0;
    for _ in 0..CALIBRATION {
        let (yp, ym) = probe(&x, opts.c0, &mut f, rng, &mut delta)?;
        g0 += ((yp - ym) / (2.0 * opts.c0)).abs() / CALIBRATION as f64;
    }
    let a = if g0 > 1e-12 {
        opts.first_step * (stability + 1.0).powf(opts.alpha) / g0
    } else {
        opts.first_step * (stability + 1.0).powf(opts.alpha)
    };
    let mut trace = Vec::with_capacity(opts.iterations + 1);
    let mut converged = false;
    for k in 0..opts.iterations {
        let ak = a / (k as f64 + 1.0 + stability).powf(opts.alpha);
        let ck = opts.c0 / (k as f64 + 1.0).powf(opts.gamma);
        let (yp, ym) = probe(&x, ck, &mut f, rng, &mut delta)?;
        let scale = (ak * (yp - ym) / (2.0 * ck)).clamp(-opts.max_step, opts.max_step);
        let candidate: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi - scale * d).collect();
        if opts.blocking {
            let y = f.eval(&candidate)?;
            if y <= f_cur + 2.0 * noise {
                x = candidate;
                f_cur = y;
            }
        } else {
            x = candidate;
        }
        trace.push(0.5 * (yp + ym));
        let w = opts.window;
        if w > 0 && trace.len() >= (2 * w).max(opts.min_iterations) {
            let len = trace.len();
            let recent: f64 = trace[len - w..].iter().sum::<f64>() / w as f64;
            let before: f64 = trace[len - 2 * w..len - w].iter().sum::<f64>() / w as f64;
            if (recent - before).abs() < opts.f_tol {
                converged = true;
                break;
            }
        }
    }
    let value = f.eval(&x)?;
    trace.push(value);
    Ok(Minimum {
        x,
        value,
        trace,
        evaluations: f.evaluations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub f_tol: f64,
    pub g_tol: f64,
    pub max_evals: usize,
    /// Central-difference step for the gradient.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            f_tol: 1e-12,
            g_tol: 1e-7,
            max_evals: 200_000,
            fd_step: 1e-5,
        }
    }
}

/// BFGS with central finite-difference gradients and Armijo backtracking.
pub fn bfgs<F>(f: F, x0: &[f64], opts: &BfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut f = Counter { f, evaluations: 0 };
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f.eval(&x)?;
    let mut trace = vec![fx];
    if n == 0 {
        return Ok(Minimum {
            x,
            value: fx,
            trace,
            evaluations: f.evaluations,
            converged: true,
        });
    }
    let gradient = |x: &[f64], f: &mut Counter<F>| -> Result<Vec<f64>> {
        let mut g = vec![0.0; n];
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = x[i] + opts.fd_step;
            let fp = f.eval(&y)?;
            y[i] = x[i] - opts.fd_step;
            let fm = f.eval(&y)?;
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * opts.fd_step);
        }
        Ok(g)
    };
    let identity = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let mut hinv = identity(n);
    let mut g = gradient(&x, &mut f)?;
    let mut converged = false;
    let mut small_steps = 0;
    while f.evaluations < opts.max_evals {
        if g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < opts.g_tol {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| hinv[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            hinv = identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let ft = f.eval(&trial)?;
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_)) = accepted else {
            converged = true;
            break;
        };
        let gn = gradient(&xn, &mut f)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-14 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy)
                        - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let df = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        trace.push(fx);
        if df < opts.f_tol {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    Ok(Minimum {
        x,
        value: fx,
        trace,
        evaluations: f.evaluations,
        converged,
    })
}
