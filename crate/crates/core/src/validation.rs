//! Analytic values checked against Monte Carlo estimates.

use crate::config::Scenario;
use crate::cost::{self, Dam};
use crate::error::Result;
use crate::mc::{self, Estimate};

/// Largest accepted `|z|`.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub analytic: f64,
    pub estimate: Estimate,
    pub z: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, analytic: f64, estimate: Estimate) -> Check {
        let z = estimate.z_score(analytic);
        Check { name: name.to_string(), analytic, estimate, z, pass: z.abs() <= Z_LIMIT }
    }
}

/// Options for [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidateOptions {
    /// Relative corruption applied to every scale table.
    pub perturb: f64,
    pub skip_discounted_run: bool,
}

/// Compares fill, cycle and cost quantities started at `τ`, plus the
/// full-policy discounted cost from the scenario's start state.
pub fn validate(sc: &Scenario, opts: ValidateOptions) -> Result<Vec<Check>> {
    let dam = Dam::new(sc.model.clone(), sc.policy, sc.numerics)?.for_spec(&sc.cost).with_perturbation(opts.perturb);
    let spec = &sc.cost;
    let alpha = spec.alpha;
    let tau = sc.policy.tau;
    let lambda = sc.policy.lambda;
    let sim = mc::simulate_cycle(&sc.model, &sc.policy, spec, tau, &sc.sim.config())?;

    let mut out = Vec::new();
    if alpha > 0.0 {
        out.push(Check::new("lt_fill", dam.lt_fill(alpha, tau)?, sim.lt_fill));
        out.push(Check::new("lt_cycle", dam.lt_cycle(alpha, tau)?, sim.lt_cycle));
        out.push(Check::new("cycle_cost", cost::cycle_cost(&dam, spec, tau)?, sim.cost));
    }
    let mean_fill = dam.mean_fill(tau)?;
    let mean_cycle = dam.mean_cycle()?;
    if mean_fill.is_finite() {
        out.push(Check::new("mean_fill", mean_fill, sim.mean_fill));
    }
    if mean_cycle.is_finite() {
        out.push(Check::new("mean_cycle", mean_cycle, sim.mean_cycle));
        let spec0 = spec.with_alpha(0.0);
        out.push(Check::new("cycle_cost_undiscounted", cost::cycle_cost(&dam, &spec0, tau)?, sim.cost_undiscounted));
        out.push(Check::new("longrun_average_cost", cost::longrun_average_cost(&dam, spec)?, sim.longrun));
    }
    if !sc.model.is_brownian() && sc.policy.v.is_finite() {
        let kernel = dam.overshoot(0.0, tau)?;
        if (kernel.total_mass() - 1.0).abs() < 1e-6 {
            let cap = sc.policy.v - lambda;
            let analytic = kernel.integrate(|z| (z - lambda).min(cap));
            let clipped: Vec<f64> = sim.overshoots.iter().map(|o| o.min(cap)).collect();
            out.push(Check::new("mean_overshoot", analytic, Estimate::from_samples(&clipped, sim.mean_fill.truncated_fraction)));
        }
    }
    if alpha > 0.0 && !opts.skip_discounted_run && sc.x <= lambda {
        let est = mc::simulate_discounted(
            &sc.model,
            &sc.policy,
            spec,
            sc.x,
            sc.sim.discounted_horizon,
            &sc.sim.discounted_config(),
        )?;
        out.push(Check::new("total_discounted_cost", cost::total_discounted_cost(&dam, spec, sc.x)?, est));
    }
    Ok(out)
}
