//! Derivative-free Nelder-Mead simplex minimizer for the low-dimensional
//! CRPS fits in [`crate::calibration`].

/// Minimize `f` starting from `start`, one initial simplex vertex per
/// coordinate displaced by `steps`. Stops when the spread of objective
/// values across the simplex falls below `f_tol` or after `max_iter`
/// iterations. Returns the best vertex found.
pub(crate) fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    steps: &[f64],
    max_iter: usize,
    f_tol: f64,
) -> Vec<f64> {
    assert_eq!(start.len(), steps.len());
    let dim = start.len();

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for i in 0..dim {
        let mut v = start.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let centroid = |simplex: &[Vec<f64>], skip: usize| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for (i, v) in simplex.iter().enumerate() {
            if i == skip {
                continue;
            }
            for (ck, vk) in c.iter_mut().zip(v) {
                *ck += vk;
            }
        }
        for ck in &mut c {
            *ck /= dim as f64;
        }
        c
    };

    for _ in 0..max_iter {
        // Order so that values[order[0]] is best and values[order[dim]] worst.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let second_worst = order[dim - 1];
        let worst = order[dim];

        if values[worst] - values[best] < f_tol {
            break;
        }

        let c = centroid(&simplex, worst);
        let point_along = |t: f64| -> Vec<f64> {
            c.iter()
                .zip(&simplex[worst])
                .map(|(ck, wk)| ck + t * (ck - wk))
                .collect()
        };

        let reflected = point_along(1.0);
        let f_reflected = f(&reflected);
        if f_reflected < values[best] {
            let expanded = point_along(2.0);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < values[worst] {
            point_along(0.5)
        } else {
            point_along(-0.5)
        };
        let f_contracted = f(&contracted);
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }
        // Shrink toward the best vertex.
        let best_vertex = simplex[best].clone();
        for (i, v) in simplex.iter_mut().enumerate() {
            if i == best {
                continue;
            }
            for (vk, bk) in v.iter_mut().zip(&best_vertex) {
                *vk = bk + 0.5 * (*vk - bk);
            }
            values[i] = f(v);
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if values[i] < values[best] {
            best = i;
        }
    }
    simplex.swap_remove(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.5).powi(2) + 0.25;
        let best = nelder_mead(f, &[0.0, 0.0], &[0.5, 0.5], 500, 1e-12);
        assert!((best[0] - 3.0).abs() < 1e-4);
        assert!((best[1] + 1.5).abs() < 1e-4);
    }

    #[test]
    fn minimizes_rosenbrock_2d() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let best = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], 2000, 1e-14);
        assert!((best[0] - 1.0).abs() < 1e-3, "got {best:?}");
        assert!((best[1] - 1.0).abs() < 1e-3, "got {best:?}");
    }
}
