/// Nelder-Mead settings. Coefficients are the standard ones: reflection 1,
/// expansion 2, contraction 0.5, shrink 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    /// Converged once every vertex lies within this distance (max-norm) of
    /// the best one...
    pub x_tolerance: f64,
    /// ...and the objective spread across the simplex is below this.
    pub f_tolerance: f64,
    /// Evaluation budget.
    pub max_evals: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: Vec<f64>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            x_tolerance: 1e-4,
            f_tolerance: 1e-6,
            max_evals: 1000,
            initial_step: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn along(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Minimizes `f` starting from `x0`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], options: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    assert!(dim >= 1, "empty starting point");
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        let step = options.initial_step.get(i).copied().unwrap_or(0.5);
        x[i] += if step == 0.0 { 0.5 } else { step };
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);

        let best = &simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread = simplex[dim].1 - simplex[0].1;
        if diameter <= options.x_tolerance && spread <= options.f_tolerance {
            converged = true;
            break;
        }
        if evals >= options.max_evals {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let f_best = simplex[0].1;
        let f_second_worst = simplex[dim - 1].1;

        let reflected = along(&centroid, &worst.0, -REFLECT);
        let fr = eval(&reflected, &mut evals);
        if fr < f_best {
            let expanded = along(&centroid, &worst.0, -EXPAND);
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < f_second_worst {
            simplex[dim] = (reflected, fr);
            continue;
        }
        if fr < worst.1 {
            let outside = along(&centroid, &reflected, CONTRACT);
            let fo = eval(&outside, &mut evals);
            if fo <= fr {
                simplex[dim] = (outside, fo);
                continue;
            }
        } else {
            let inside = along(&centroid, &worst.0, CONTRACT);
            let fi = eval(&inside, &mut evals);
            if fi < worst.1 {
                simplex[dim] = (inside, fi);
                continue;
            }
        }
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x = along(&anchor, &vertex.0, SHRINK);
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
        }
    }

    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult {
        x,
        f,
        evals,
        iterations,
        converged,
        history,
    }
}
