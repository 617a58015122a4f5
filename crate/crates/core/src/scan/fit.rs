use std::sync::Mutex;

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;

use super::{scan_dipole, Dataset, ScanConfig};
use crate::error::{Error, Result};
use crate::potential::CollisionSystem;
use crate::propagator::{calibrate, DEFAULT_R_MATCH};
use crate::qdt::ShortRangeParams;
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitParameter {
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
}

impl FitParameter {
    pub fn fixed(value: f64) -> Self {
        Self { initial: value, lower: value, upper: value, free: false }
    }

    pub fn free(initial: f64, lower: f64, upper: f64) -> Self {
        Self { initial, lower, upper, free: true }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.initial.is_finite() {
            return Err(Error::invalid(format!("{name}: initial value must be finite")));
        }
        if self.free && !(self.lower < self.upper && self.lower <= self.initial && self.initial <= self.upper) {
            return Err(Error::invalid(format!(
                "{name}: need lower < upper with the initial value {} inside [{}, {}]",
                self.initial, self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Which of (s, y) float, with initial guesses and bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSpec {
    pub s: FitParameter,
    pub y: FitParameter,
    pub r_match: f64,
    pub max_iterations: u64,
}

impl FitSpec {
    pub fn y_only(s: f64, y0: f64) -> Self {
        Self {
            s: FitParameter::fixed(s),
            y: FitParameter::free(y0, 0.0, 1.0),
            r_match: DEFAULT_R_MATCH,
            max_iterations: 200,
        }
    }

    pub fn s_and_y(s0: f64, y0: f64) -> Self {
        Self {
            s: FitParameter::free(s0, -5.0, 5.0),
            y: FitParameter::free(y0, 0.0, 1.0),
            r_match: DEFAULT_R_MATCH,
            max_iterations: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        self.s.validate("s")?;
        self.y.validate("y")?;
        if self.y.free && !(self.y.lower >= 0.0 && self.y.upper <= 1.0) {
            return Err(Error::invalid("y bounds must lie in [0, 1]"));
        }
        if !self.s.free && !self.y.free {
            return Err(Error::invalid("fit mask selects no parameter"));
        }
        ShortRangeParams::new(self.s.initial, self.y.initial, self.r_match)?;
        Ok(())
    }

    fn parameters(&self) -> Vec<(&'static str, FitParameter)> {
        [("s", self.s), ("y", self.y)].into_iter().filter(|(_, p)| p.free).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortRangeFit {
    pub s: f64,
    pub y: f64,
    /// Names of the fitted parameters, in covariance order.
    pub free: Vec<&'static str>,
    /// Finite-difference estimate; `None` when the Jacobian is rank deficient.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub chi2: f64,
    pub dof: usize,
    pub on_bound: Vec<&'static str>,
    pub evaluations: u64,
    pub converged: bool,
}

struct Objective<'a> {
    dataset: &'a Dataset,
    system: &'a CollisionSystem,
    energy: f64,
    spec: &'a FitSpec,
    config: &'a ScanConfig,
    d_grid: Vec<f64>,
    order: Vec<usize>,
    failure: &'a Mutex<Option<Error>>,
}

impl<'a> Objective<'a> {
    fn new(
        dataset: &'a Dataset,
        system: &'a CollisionSystem,
        energy: f64,
        spec: &'a FitSpec,
        config: &'a ScanConfig,
        failure: &'a Mutex<Option<Error>>,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..dataset.rows.len()).collect();
        order.sort_by(|&a, &b| dataset.rows[a].d_debye.total_cmp(&dataset.rows[b].d_debye));
        let mut d_grid: Vec<f64> = order.iter().map(|&i| units::debye_to_au(dataset.rows[i].d_debye)).collect();
        d_grid.dedup();
        if d_grid.len() != order.len() {
            return Err(Error::invalid("dataset repeats a dipole value"));
        }
        Ok(Self { dataset, system, energy, spec, config, d_grid, order, failure })
    }

    fn clip(&self, p: &[f64]) -> (f64, f64) {
        let mut s = self.spec.s.initial;
        let mut y = self.spec.y.initial;
        for ((name, par), v) in self.spec.parameters().into_iter().zip(p) {
            let v = v.clamp(par.lower, par.upper);
            if name == "s" {
                s = v;
            } else {
                y = v;
            }
        }
        (s, y)
    }

    /// Weighted log-rate residuals in dataset row order.
    fn residuals(&self, s: f64, y: f64) -> Result<Vec<f64>> {
        let context = |e: Error| Error::Fit(format!("objective at s = {s}, y = {y}: {e}"));
        let params = ShortRangeParams::new(s, y, self.spec.r_match).map_err(context)?;
        let calibrated = calibrate(self.system, &params, &self.config.policy).map_err(context)?;
        let curve = scan_dipole(self.system, &calibrated, self.energy, &self.d_grid, self.config)
            .map_err(|f| context(f.error))?;
        let mut out = vec![0.0; self.order.len()];
        for (point, &row) in curve.points.iter().zip(&self.order) {
            let data = &self.dataset.rows[row];
            let model = units::rate_au_to_cm3_per_s(point.total);
            if !(model > 0.0) {
                return Err(context(Error::OutOfDomain(format!("model rate {model} at d = {} D", data.d_debye))));
            }
            let weight = data.sigma.map_or(1.0, |sigma| sigma / data.k_cm3_s);
            out[row] = (model.ln() - data.k_cm3_s.ln()) / weight;
        }
        Ok(out)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        // the solver cannot abort cleanly, so failures park here and end the fit
        let mut failure = self.failure.lock().unwrap();
        if failure.is_some() {
            return Ok(f64::INFINITY);
        }
        let (s, y) = self.clip(p);
        match self.residuals(s, y) {
            Ok(r) => Ok(r.iter().map(|x| x * x).sum()),
            Err(e) => {
                *failure = Some(e);
                Ok(f64::INFINITY)
            }
        }
    }
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    match m.len() {
        1 if m[0][0] > 0.0 => Some(vec![vec![1.0 / m[0][0]]]),
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if !(det > 1e-14 * (m[0][0] * m[1][1]).abs()) {
                return None;
            }
            Some(vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]])
        }
        _ => None,
    }
}

/// Weighted least squares of ln K over the masked short-range parameters;
/// every objective evaluation is a full dipole scan at the dataset's d values.
pub fn fit_short_range(
    dataset: &Dataset,
    system: &CollisionSystem,
    energy: f64,
    spec: &FitSpec,
    config: &ScanConfig,
) -> Result<ShortRangeFit> {
    spec.validate()?;
    if !(energy > 0.0) {
        return Err(Error::invalid(format!("energy must be positive, got {energy}")));
    }
    let failure = Mutex::new(None);
    let objective = Objective::new(dataset, system, energy, spec, config, &failure)?;
    let parameters = spec.parameters();
    let start: Vec<f64> = parameters.iter().map(|(_, p)| p.initial).collect();

    let mut simplex = vec![start.clone()];
    for (i, (_, p)) in parameters.iter().enumerate() {
        let step = 0.1 * (p.upper - p.lower);
        let mut vertex = start.clone();
        vertex[i] = if p.initial + step <= p.upper { p.initial + step } else { p.initial - step };
        simplex.push(vertex);
    }
    let solver =
        NelderMead::new(simplex).with_sd_tolerance(1e-9).map_err(|e| Error::Fit(format!("optimizer setup: {e}")))?;
    let run = Executor::new(objective, solver).configure(|s| s.max_iters(spec.max_iterations)).run();
    if let Some(e) = failure.lock().unwrap().take() {
        return Err(e);
    }
    let res = run.map_err(|e| Error::Fit(format!("optimizer: {e}")))?;
    let objective = Objective::new(dataset, system, energy, spec, config, &failure)?;
    let state = res.state();
    let best = state.get_best_param().ok_or_else(|| Error::Fit("optimizer produced no estimate".into()))?;
    let converged = matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged));
    let (s, y) = objective.clip(best);
    let residuals = objective.residuals(s, y)?;
    let chi2: f64 = residuals.iter().map(|r| r * r).sum();
    let n = residuals.len();
    let dof = n.saturating_sub(parameters.len());

    let mut on_bound = Vec::new();
    let mut jacobian = vec![vec![0.0; parameters.len()]; n];
    for (j, (name, p)) in parameters.iter().enumerate() {
        let value = if *name == "s" { s } else { y };
        let width = p.upper - p.lower;
        if (value - p.lower).abs() <= 1e-6 * width || (p.upper - value).abs() <= 1e-6 * width {
            on_bound.push(*name);
        }
        let h = 1e-3 * width;
        let (lo, hi) = ((value - h).max(p.lower), (value + h).min(p.upper));
        let at = |v: f64| {
            if *name == "s" {
                objective.residuals(v, y)
            } else {
                objective.residuals(s, v)
            }
        };
        let (r_lo, r_hi) = (at(lo)?, at(hi)?);
        for i in 0..n {
            jacobian[i][j] = (r_hi[i] - r_lo[i]) / (hi - lo);
        }
    }
    let m = parameters.len();
    let normal: Vec<Vec<f64>> =
        (0..m).map(|a| (0..m).map(|b| jacobian.iter().map(|row| row[a] * row[b]).sum()).collect()).collect();
    let scale = if dataset.has_sigma() || dof == 0 { 1.0 } else { chi2 / dof as f64 };
    let covariance =
        invert(&normal).map(|c| c.into_iter().map(|row| row.into_iter().map(|v| v * scale).collect()).collect());
    if covariance.is_none() {
        log::warn!("fit Jacobian is rank deficient; no covariance reported");
    }
    if !converged {
        log::warn!("fit stopped after {} iterations without meeting the tolerance", state.get_iter());
    }

    Ok(ShortRangeFit {
        s,
        y,
        free: parameters.iter().map(|(name, _)| *name).collect(),
        covariance,
        chi2,
        dof,
        on_bound,
        evaluations: state.get_iter(),
        converged,
    })
}
