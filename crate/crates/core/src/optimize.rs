//! Derivative-free simplex minimization.
//!
//! Plain Nelder–Mead with the standard coefficients (1, 2, ½, ½). Infeasible
//! points are signalled by returning `+∞` from the objective. Every run is a
//! pure function of its inputs, which the multistart layer relies on for
//! scheduling-independent results.

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once the spread of objective values over the simplex is below
    /// this.
    pub ftol: f64,
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Number of times the simplex is rebuilt around the incumbent after
    /// convergence; each rebuild that gains less than `ftol` ends the run.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            max_evals: 2000,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

/// Minimizes `f` from `x0`, with an axis-aligned initial simplex of edge
/// lengths `step`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x0.len(), step.len(), "step must match the dimension");
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut scale = 1.0;
    for round in 0..=opts.max_restarts {
        if evals >= opts.max_evals {
            break;
        }
        let before = best_f;
        let scaled: Vec<f64> = step.iter().map(|s| s * scale).collect();
        let (x, fx) = simplex_run(&mut eval, &mut evals, &best_x, best_f, &scaled, opts);
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
        let gained = before - best_f;
        if round > 0 && !(gained > opts.ftol) {
            break;
        }
        scale *= 0.5;
    }
    Minimum {
        x: best_x,
        f: best_f,
        evals,
    }
}

fn simplex_run<E>(
    eval: &mut E,
    evals: &mut usize,
    x0: &[f64],
    f0: f64,
    step: &[f64],
    opts: NelderMeadOptions,
) -> (Vec<f64>, f64)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let dim = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(dim + 1);
    pts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..dim {
        if *evals >= opts.max_evals {
            break;
        }
        let mut p = x0.to_vec();
        p[i] += step[i];
        let mut v = eval(&p, evals);
        if !v.is_finite() {
            // Try the other direction before giving up on this vertex.
            p[i] = x0[i] - step[i];
            v = eval(&p, evals);
        }
        pts.push(p);
        vals.push(v);
    }
    if pts.len() < dim + 1 {
        return (x0.to_vec(), f0);
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    while *evals < opts.max_evals {
        // Stable sort keeps ties in vertex order, so runs are reproducible.
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[dim];
        let second = order[dim - 1];
        if vals[best].is_finite() && (vals[worst] - vals[best]).abs() <= opts.ftol {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        for k in 0..dim {
            trial[k] = centroid[k] + (centroid[k] - pts[worst][k]);
        }
        let fr = eval(&trial, evals);
        if fr < vals[best] {
            for k in 0..dim {
                trial2[k] = centroid[k] + 2.0 * (centroid[k] - pts[worst][k]);
            }
            let fe = eval(&trial2, evals);
            if fe < fr {
                pts[worst].copy_from_slice(&trial2);
                vals[worst] = fe;
            } else {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst].copy_from_slice(&trial);
            vals[worst] = fr;
            continue;
        }
        let outside = fr < vals[worst];
        for k in 0..dim {
            trial2[k] = if outside {
                centroid[k] + 0.5 * (trial[k] - centroid[k])
            } else {
                centroid[k] + 0.5 * (pts[worst][k] - centroid[k])
            };
        }
        let fc = eval(&trial2, evals);
        if (outside && fc <= fr) || (!outside && fc < vals[worst]) {
            pts[worst].copy_from_slice(&trial2);
            vals[worst] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            if *evals >= opts.max_evals {
                break;
            }
            for k in 0..dim {
                pts[i][k] = anchor[k] + 0.5 * (pts[i][k] - anchor[k]);
            }
            vals[i] = eval(&pts[i], evals);
        }
    }
    let best = (0..=dim)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("non-empty simplex");
    (pts[best].clone(), vals[best])
}
