//! Derivative-free Nelder–Mead simplex minimizer.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub max_iterations: usize,
    /// Stop once every vertex lies within this sup-norm distance of the best.
    pub x_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn eval(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&a, &b)| a + t * (b - a)).collect()
}

/// Minimizes `f` starting from the given n+1 vertices.
pub fn minimize(f: impl Fn(&[f64]) -> f64, simplex: Vec<Vec<f64>>, opts: Options) -> Outcome {
    let n = simplex.len() - 1;
    assert!(
        n >= 1 && simplex.iter().all(|v| v.len() == n),
        "simplex needs n+1 vertices of length n"
    );
    let mut pts: Vec<(Vec<f64>, f64)> = simplex
        .into_iter()
        .map(|x| {
            let fx = eval(&f, &x);
            (x, fx)
        })
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    loop {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = pts[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = pts[n].clone();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let f_ref = eval(&f, &reflected);

        if f_ref < pts[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let f_exp = eval(&f, &expanded);
            pts[n] = if f_exp < f_ref {
                (expanded, f_exp)
            } else {
                (reflected, f_ref)
            };
            continue;
        }
        if f_ref < pts[n - 1].1 {
            pts[n] = (reflected, f_ref);
            continue;
        }
        let (contracted, f_con) = if f_ref < worst.1 {
            let x = lerp(&centroid, &reflected, 0.5);
            let fx = eval(&f, &x);
            (x, fx)
        } else {
            let x = lerp(&centroid, &worst.0, 0.5);
            let fx = eval(&f, &x);
            (x, fx)
        };
        if f_con < worst.1.min(f_ref) {
            pts[n] = (contracted, f_con);
            continue;
        }
        let best = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            p.0 = lerp(&best, &p.0, 0.5);
            p.1 = eval(&f, &p.0);
        }
    }
    let (x, fx) = pts.swap_remove(0);
    Outcome {
        x,
        f: fx,
        iterations,
        converged,
    }
}

/// Axis-aligned simplex: `x0` plus one vertex per coordinate offset by `steps[i]`.
pub fn axis_simplex(x0: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![x0.to_vec()];
    for (i, &s) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        out.push(v);
    }
    out
}
