//! The table of limit-law constants printed by the `constants` command.

use super::law_constants;
use crate::constants::{beta_law_scale, c_u, iglehart_estimate, kesten_tail_estimate, meander_moment};
use crate::env_model::EnvironmentLaw;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRow {
    pub name: &'static str,
    pub value: f64,
    pub se: Option<f64>,
    pub method: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsOptions {
    pub excursions: usize,
    /// Perpetuities for the tail fit of `C_K`; 0 skips the fit for Beta laws.
    pub kesten_series: usize,
    pub seed: u64,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions { excursions: 200_000, kesten_series: 0, seed: 1 }
    }
}

pub fn constants_table(law: &EnvironmentLaw, opts: &ConstantsOptions) -> Result<Vec<ConstantRow>> {
    let series = if opts.kesten_series == 0 { 2_000_000 } else { opts.kesten_series };
    let c = law_constants(law, series, opts.seed)?;
    let k = c.kappa.kappa;
    let row = |name, value, se, method| ConstantRow { name, value, se, method };
    let kappa_method = match c.kappa.method {
        crate::env_model::KappaMethod::ClosedForm => "closed form",
        crate::env_model::KappaMethod::Bisection => "bisection",
    };
    let mut rows = vec![
        row("kappa", k, None, kappa_method),
        row("moment", c.moment, None, "closed form"),
        row("c_k", c.c_k, c.c_k_se, c.c_k_method),
    ];
    if matches!(law, EnvironmentLaw::Beta { .. }) && opts.kesten_series > 0 {
        let t = kesten_tail_estimate(law, k, opts.kesten_series, opts.seed)?;
        rows.push(row("c_k_fit", t.constant, Some(t.constant_se), "perpetuity tail fit"));
        rows.push(row("perpetuity_index", t.index, Some(t.index_se), "Hill"));
    }
    let ig = iglehart_estimate(law, k, c.moment, opts.excursions, opts.seed)?;
    let m = meander_moment(c.c_k, ig.c_f)?;
    rows.extend([
        row("mean_ladder", ig.mean_ladder, Some(ig.mean_ladder_se), "excursion simulation"),
        row("c_i", ig.c_i, Some(ig.c_i_se), "excursion simulation"),
        row("c_f", ig.c_f, Some(ig.c_f_se), "excursion simulation"),
        row("meander_moment", m, None, "c_k / c_f"),
        row("c_u", c_u(ig.c_i, m), None, "c_i * meander_moment"),
        row("lambda_scale", c.params.lambda_scale, None, "general form"),
        row("tau_prefactor", c.params.tau_prefactor, None, "lambda_scale^(1/kappa)"),
        row("x_scale", c.params.x_scale, None, "1 / lambda_scale"),
    ]);
    if let EnvironmentLaw::Beta { alpha, beta } = *law {
        rows.push(row("lambda_scale_beta", beta_law_scale(alpha, beta)?, None, "beta-law form"));
    }
    Ok(rows)
}
