//! Nelder–Mead simplex minimisation over an unconstrained vector.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Iteration cap per simplex run.
    pub max_iters: usize,
    /// Stop once every vertex lies within `x_tol` of the best one (max-norm).
    pub x_tol: f64,
    /// Stop once the spread of vertex values is below `f_tol * |f_best|`.
    pub f_tol: f64,
    /// Number of times the simplex is rebuilt around the best point after converging.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            x_tol: 1e-8,
            f_tol: 1e-10,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from `x0`; the initial simplex offsets coordinate `i` by `steps[i]`.
/// Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), steps.len(), "one step per coordinate");
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best = x0.to_vec();
    let mut best_f = eval(&best);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let run = simplex_run(&mut eval, &best, best_f, steps, opts);
        iterations += run.iterations;
        converged = run.converged;
        let improved = run.f < best_f;
        if run.f <= best_f {
            best = run.x;
            best_f = run.f;
        }
        if !converged || !improved {
            break;
        }
    }
    Minimum {
        x: best,
        f: best_f,
        iterations,
        evaluations,
        converged,
    }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

fn simplex_run<E>(eval: &mut E, x0: &[f64], f0: f64, steps: &[f64], opts: &NelderMeadOptions) -> Run
where
    E: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if is_converged(&simplex, opts) {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let point = |coef: f64, worst: &[f64], out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(worst) {
                *o = c + coef * (c - w);
            }
        };

        let worst = simplex[n].0.clone();
        point(REFLECT, &worst, &mut trial);
        let fr = eval(&trial);
        if fr < simplex[0].1 {
            let reflected = trial.clone();
            point(EXPAND, &worst, &mut trial);
            let fe = eval(&trial);
            simplex[n] = if fe < fr {
                (trial.clone(), fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (trial.clone(), fr);
            continue;
        }
        // outside contraction when the reflection beat the worst vertex, inside otherwise
        let coef = if fr < simplex[n].1 { CONTRACT } else { -CONTRACT };
        let reference = fr.min(simplex[n].1);
        point(coef, &worst, &mut trial);
        let fc = eval(&trial);
        if fc < reference {
            simplex[n] = (trial.clone(), fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (v, a) in x.iter_mut().zip(&anchor) {
                *v = a + SHRINK * (*v - a);
            }
            *fx = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Run {
        x,
        f,
        iterations,
        converged,
    }
}

fn is_converged(simplex: &[(Vec<f64>, f64)], opts: &NelderMeadOptions) -> bool {
    let f_best = simplex[0].1;
    let f_worst = simplex[simplex.len() - 1].1;
    if !f_best.is_finite() {
        return false;
    }
    let f_spread = f_worst - f_best;
    if f_spread <= opts.f_tol * f_best.abs().max(f64::MIN_POSITIVE) {
        return true;
    }
    let best = &simplex[0].0;
    let x_spread = simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    x_spread <= opts.x_tol
}
