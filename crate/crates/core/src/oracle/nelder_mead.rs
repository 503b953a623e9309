//! Derivative-free minimization over `ℝⁿ`.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Initial simplex edge along each coordinate axis.
    pub step: f64,
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub ftol: f64,
    /// Stop once the objective itself falls below this.
    pub target: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_evals: 2000,
            ftol: 1e-16,
            target: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½,
/// shrink ½). Never exceeds `max_evals` objective calls.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
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

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    if opts.max_evals == 0 {
        return Minimum {
            x: x0.to_vec(),
            value: f64::INFINITY,
            evals: 0,
        };
    }
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        if evals >= opts.max_evals || v0 <= opts.target {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    if simplex.len() < n + 1 {
        let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        return Minimum {
            x: best.0,
            value: best.1,
            evals,
        };
    }

    let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> { c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect() };

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if best <= opts.target || (worst - best).abs() <= opts.ftol {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let xr = point(&centroid, &simplex[n].0, -1.0);
        let vr = eval(&xr, &mut evals);
        if vr < best {
            if evals >= opts.max_evals {
                simplex[n] = (xr, vr);
                break;
            }
            let xe = point(&centroid, &simplex[n].0, -2.0);
            let ve = eval(&xe, &mut evals);
            simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[n - 1].1 {
            simplex[n] = (xr, vr);
            continue;
        }
        if evals >= opts.max_evals {
            break;
        }
        // outside contraction toward the reflected point, inside otherwise
        let xc = if vr < worst {
            point(&centroid, &xr, 0.5)
        } else {
            point(&centroid, &simplex[n].0, 0.5)
        };
        let vc = eval(&xc, &mut evals);
        if vc < vr.min(worst) {
            simplex[n] = (xc, vc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            if evals >= opts.max_evals {
                break;
            }
            let x = point(&x_best, &item.0, 0.5);
            let v = eval(&x, &mut evals);
            *item = (x, v);
        }
    }
    let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    Minimum {
        x: best.0,
        value: best.1,
        evals,
    }
}
