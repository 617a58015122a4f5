use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Error, Result};

/// Parameters of x_n = E' √((n₀+n)/(n∞−n)) fitted to consecutive n = 0, 1, ...
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceSeries {
    pub e_scale: f64,
    pub n0: f64,
    pub n_inf: f64,
    /// RMS relative deviation of the fitted positions.
    pub residual: f64,
}

struct SeriesCost<'a> {
    positions: &'a [f64],
}

const INFEASIBLE: f64 = 1e6;

impl SeriesCost<'_> {
    fn shape(&self, n0: f64, n_inf: f64) -> Option<Vec<f64>> {
        let last = (self.positions.len() - 1) as f64;
        if !(n0 >= 0.0 && n_inf > last && n0.is_finite() && n_inf.is_finite()) {
            return None;
        }
        Some((0..self.positions.len()).map(|j| ((n0 + j as f64) / (n_inf - j as f64)).sqrt()).collect())
    }

    /// E' minimizing the relative residuals for a given shape.
    fn profile(&self, shape: &[f64]) -> f64 {
        let (num, den) = shape
            .iter()
            .zip(self.positions)
            .fold((0.0, 0.0), |(num, den), (f, x)| (num + f / x, den + f * f / (x * x)));
        num / den
    }

    fn sum_of_squares(&self, shape: &[f64], e_scale: f64) -> f64 {
        shape.iter().zip(self.positions).map(|(f, x)| ((e_scale * f - x) / x).powi(2)).sum()
    }

    fn evaluate(&self, n0: f64, n_inf: f64) -> f64 {
        let last = (self.positions.len() - 1) as f64;
        match self.shape(n0, n_inf) {
            Some(shape) if shape.iter().any(|&f| f > 0.0) => {
                let e_scale = self.profile(&shape);
                self.sum_of_squares(&shape, e_scale)
            }
            _ => INFEASIBLE + (-n0).max(0.0) + (last + 1e-9 - n_inf).max(0.0),
        }
    }
}

impl CostFunction for SeriesCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(p[0], p[1]))
    }
}

/// Fits the series law to sorted, positive resonance positions.
pub fn fit_resonance_series(positions: &[f64]) -> Result<ResonanceSeries> {
    if positions.len() < 4 {
        return Err(Error::invalid(format!("series fit needs at least 4 positions, got {}", positions.len())));
    }
    if positions.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("resonance positions must be positive"));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("resonance positions must be strictly increasing"));
    }
    let cost = SeriesCost { positions };
    let n = positions.len() as f64;

    // coarse grid for the starting simplex
    let mut start = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=40 {
        let n0 = 0.05 * i as f64;
        for j in 1..=60 {
            let n_inf = (n - 1.0) * (1.0 + 0.02 * (j as f64).powf(1.5));
            let c = cost.evaluate(n0, n_inf);
            if c < start.0 {
                start = (c, n0, n_inf);
            }
        }
    }
    let (_, n0, n_inf) = start;
    let simplex = vec![vec![n0, n_inf], vec![n0 + 0.1, n_inf], vec![n0, n_inf + 0.1 * (n_inf - n + 1.0)]];
    let solver =
        NelderMead::new(simplex).with_sd_tolerance(1e-15).map_err(|e| Error::Fit(format!("series fit setup: {e}")))?;
    let res = Executor::new(cost, solver)
        .configure(|s| s.max_iters(4000))
        .run()
        .map_err(|e| Error::Fit(format!("series fit: {e}")))?;
    let state = res.state();
    let best = state.get_best_param().ok_or_else(|| Error::Fit("series fit produced no estimate".into()))?.clone();
    let converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));

    let cost = SeriesCost { positions };
    let shape = cost
        .shape(best[0], best[1])
        .ok_or_else(|| Error::Fit(format!("series fit left the domain at n0 = {}, n_inf = {}", best[0], best[1])))?;
    let e_scale = cost.profile(&shape);
    let sum = cost.sum_of_squares(&shape, e_scale);
    if !converged {
        return Err(Error::Fit(format!(
            "series fit did not converge after {} iterations (n0 = {}, n_inf = {}, sum of squares {sum:e})",
            state.get_iter(),
            best[0],
            best[1]
        )));
    }
    Ok(ResonanceSeries { e_scale, n0: best[0], n_inf: best[1], residual: (sum / n).sqrt() })
}
