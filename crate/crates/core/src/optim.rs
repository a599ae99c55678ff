//! Derivative-free simplex minimisation over a box.
//!
//! The profile objective is continuous but loses smoothness where
//! eigenvalues cross, so a Nelder-Mead search is used instead of gradient
//! methods. Candidate points leaving the box are reflected back inside,
//! which keeps the simplex exploring the interior rather than collapsing
//! onto a bound.

use nalgebra::DVector;

use crate::numeric::{abs, Scalar};

/// Rectangular feasible region.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<S: Scalar> {
    /// Per-coordinate lower bounds.
    pub lower: DVector<S>,
    /// Per-coordinate upper bounds.
    pub upper: DVector<S>,
}

impl<S: Scalar> Bounds<S> {
    /// Fold a point into the box by reflecting at the violated bound, then
    /// clamping in case the reflection overshoots the opposite side.
    pub fn reflect_into(&self, x: &mut DVector<S>) {
        for i in 0..x.len() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if x[i] < lo {
                x[i] = lo + (lo - x[i]);
            } else if x[i] > hi {
                x[i] = hi - (x[i] - hi);
            }
            x[i] = x[i].clamp(lo, hi);
        }
    }

    /// Clamp a point onto the box.
    pub fn clamp(&self, x: &mut DVector<S>) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Search controls.
#[derive(Debug, Clone)]
pub struct SimplexOptions<S: Scalar> {
    /// Iteration cap.
    pub max_iter: usize,
    /// Stop when the objective spread over the simplex falls below
    /// `f_tol * (1 + |f_best|)`.
    pub f_tol: S,
    /// Stop when the largest coordinate spread falls below
    /// `x_tol * (1 + |x_best|)` (checked jointly with the objective rule).
    pub x_tol: S,
    /// Relative edge length of the initial simplex.
    pub init_step: S,
}

impl<S: Scalar> Default for SimplexOptions<S> {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: S::of(1e-10),
            x_tol: S::of(1e-8),
            init_step: S::of(0.1),
        }
    }
}

/// Outcome of a simplex search.
#[derive(Debug, Clone)]
pub struct SimplexResult<S: Scalar> {
    /// Best point found.
    pub x: DVector<S>,
    /// Objective at the best point.
    pub f: S,
    /// Iterations consumed.
    pub iterations: usize,
    /// Objective evaluations consumed.
    pub evals: usize,
    /// Whether the tolerance test (rather than the iteration cap) stopped
    /// the search.
    pub converged: bool,
}

/// Minimise `f` over the box starting from `x0` (clamped inside first).
pub fn minimize_simplex<S, F>(
    mut f: F,
    x0: &DVector<S>,
    bounds: &Bounds<S>,
    opts: &SimplexOptions<S>,
) -> SimplexResult<S>
where
    S: Scalar,
    F: FnMut(&DVector<S>) -> S,
{
    let dim = x0.len();
    assert!(dim > 0, "empty parameter vector");
    assert_eq!(bounds.lower.len(), dim);
    assert_eq!(bounds.upper.len(), dim);

    let (reflect, expand, contract, shrink) = (S::one(), S::of(2.0), S::of(0.5), S::of(0.5));

    let mut start = x0.clone();
    bounds.clamp(&mut start);

    // Initial simplex: perturb one coordinate per vertex, stepping towards
    // the side of the box with more room.
    let mut vertices: Vec<DVector<S>> = Vec::with_capacity(dim + 1);
    vertices.push(start.clone());
    for i in 0..dim {
        let mut v = start.clone();
        let span = bounds.upper[i] - bounds.lower[i];
        let mut step = opts.init_step * (abs(v[i]) + S::one());
        step = step.min(span * S::of(0.25));
        let room_up = bounds.upper[i] - v[i];
        let room_down = v[i] - bounds.lower[i];
        v[i] += if room_up >= room_down { step } else { -step };
        bounds.clamp(&mut v);
        vertices.push(v);
    }
    let mut values: Vec<S> = vertices.iter().map(&mut f).collect();
    let mut evals = dim + 1;

    let order_of = |values: &[S]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite objective"));
        idx
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let order = order_of(&values);
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        // Convergence: objective spread and simplex extent both small.
        let f_spread = values[worst] - values[best];
        let f_scale = S::one() + abs(values[best]);
        let mut x_spread = S::zero();
        for v in &vertices {
            for i in 0..dim {
                let d = abs(v[i] - vertices[best][i]);
                if d > x_spread {
                    x_spread = d;
                }
            }
        }
        let x_scale = S::one() + vertices[best].amax();
        if f_spread <= opts.f_tol * f_scale && x_spread <= opts.x_tol * x_scale {
            converged = true;
            break;
        }

        // Centroid of all vertices except the worst.
        let mut centroid = DVector::zeros(dim);
        for (i, v) in vertices.iter().enumerate() {
            if i != worst {
                centroid += v;
            }
        }
        centroid /= S::from_usize(dim).unwrap();

        // Fold a raw candidate into the box. Reflection can land exactly on
        // an existing vertex when the optimum hugs a bound, which would
        // collapse the simplex one step inside the boundary; blending with
        // the clamped candidate keeps the boundary reachable.
        let fold = |raw: DVector<S>, vertices: &[DVector<S>]| -> DVector<S> {
            let mut folded = raw.clone();
            bounds.reflect_into(&mut folded);
            let scale = S::of(1e-13) * (S::one() + folded.amax());
            if vertices.iter().any(|v| (v - &folded).amax() <= scale) {
                let mut clamped = raw;
                bounds.clamp(&mut clamped);
                folded = (&folded + &clamped) * S::of(0.5);
            }
            folded
        };

        let reflected =
            fold(&centroid + (&centroid - &vertices[worst]) * reflect, &vertices);
        let f_reflected = f(&reflected);
        evals += 1;

        if f_reflected < values[order[0]] {
            let expanded = fold(&centroid + (&reflected - &centroid) * expand, &vertices);
            let f_expanded = f(&expanded);
            evals += 1;
            if f_expanded < f_reflected {
                vertices[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                vertices[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let outside = f_reflected < values[worst];
            let towards = if outside { reflected.clone() } else { vertices[worst].clone() };
            let mut contracted = &centroid + (&towards - &centroid) * contract;
            bounds.clamp(&mut contracted);
            let f_contracted = f(&contracted);
            evals += 1;
            let accept = if outside {
                f_contracted <= f_reflected
            } else {
                f_contracted < values[worst]
            };
            if accept {
                vertices[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink every vertex towards the best one.
                let anchor = vertices[best].clone();
                for i in 0..vertices.len() {
                    if i == best {
                        continue;
                    }
                    vertices[i] = &anchor + (&vertices[i] - &anchor) * shrink;
                    bounds.clamp(&mut vertices[i]);
                    values[i] = f(&vertices[i]);
                    evals += 1;
                }
            }
        }
    }

    let order = order_of(&values);
    SimplexResult {
        x: vertices[order[0]].clone(),
        f: values[order[0]],
        iterations,
        evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(dim: usize, half: f64) -> Bounds<f64> {
        Bounds {
            lower: DVector::from_element(dim, -half),
            upper: DVector::from_element(dim, half),
        }
    }

    #[test]
    fn minimises_a_quadratic() {
        let target = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let f = |x: &DVector<f64>| (x - &target).norm_squared();
        let result = minimize_simplex(
            f,
            &DVector::zeros(3),
            &unit_box(3, 5.0),
            &SimplexOptions::default(),
        );
        assert!(result.converged);
        assert!((result.x - target).amax() < 1e-6, "f = {}", result.f);
    }

    #[test]
    fn respects_the_box() {
        // Unconstrained minimum at 2, box caps at 1.
        let f = |x: &DVector<f64>| (x[0] - 2.0).powi(2);
        let result = minimize_simplex(
            f,
            &DVector::zeros(1),
            &unit_box(1, 1.0),
            &SimplexOptions::default(),
        );
        assert!(result.x[0] <= 1.0 + 1e-12);
        assert!((result.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn handles_nonsmooth_objectives() {
        // Piecewise-linear vee with the kink at the minimiser.
        let f = |x: &DVector<f64>| (x[0] - 0.25).abs() + (x[1] + 0.5).abs();
        let result = minimize_simplex(
            f,
            &DVector::from_vec(vec![0.9, 0.9]),
            &unit_box(2, 1.0),
            &SimplexOptions::default(),
        );
        assert!((result.x[0] - 0.25).abs() < 1e-5);
        assert!((result.x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn reflection_folds_points_inside() {
        let bounds = unit_box(2, 1.0);
        let mut x = DVector::from_vec(vec![1.4, -1.1]);
        bounds.reflect_into(&mut x);
        assert!((x[0] - 0.6).abs() < 1e-12);
        assert!((x[1] + 0.9).abs() < 1e-12);
        // Far outside: reflection would overshoot, the clamp catches it.
        let mut far = DVector::from_vec(vec![5.0, -5.0]);
        bounds.reflect_into(&mut far);
        assert!(far[0] >= -1.0 && far[0] <= 1.0);
        assert!(far[1] >= -1.0 && far[1] <= 1.0);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &DVector<f64>| x.norm_squared();
        let opts = SimplexOptions { max_iter: 3, ..Default::default() };
        let result = minimize_simplex(f, &DVector::from_element(4, 3.0), &unit_box(4, 5.0), &opts);
        assert!(!result.converged);
        assert_eq!(result.iterations, 3);
    }
}
