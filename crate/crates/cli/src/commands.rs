//! The accuracy, bench and validate commands.

use std::time::Instant;

use hfmm::driver::{error_metric, fmm_apply, FmmPlan};
use hfmm::greens::Point2;
use hfmm::Complex64;

use crate::checks::{check_names, run_check, CheckContext, Fault};
use crate::config::Settings;
use crate::report::{Report, Row};
use crate::CliError;

/// Runs the reference order, then each order of the sweep, on the first
/// particle count of the settings.
pub fn accuracy(s: &Settings) -> Result<Report, CliError> {
    let n = s.n_list[0];
    let particles = s.scenario.particles(n, s.seed);
    let m = s.eval_subset.unwrap_or(n).min(n);
    let name = &s.scenario.name;
    let mut report = Report::default();

    let t = Instant::now();
    let reference = fmm_apply(&particles, &s.run_config(s.p_ref))?;
    let norm = reference.values[..m].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    report.rows.push(
        Row::new(name, &s.media, "reference_norm", norm)
            .order(s.p_ref)
            .count(n)
            .seconds(t.elapsed().as_secs_f64()),
    );
    for &p in &s.p_list {
        let t = Instant::now();
        let v = fmm_apply(&particles, &s.run_config(p))?;
        let secs = t.elapsed().as_secs_f64();
        let e = error_metric(&reference.values, &v.values, m)?;
        report.rows.push(Row::new(name, &s.media, "E", e).order(p).count(n).seconds(secs));
    }
    Ok(report)
}

/// Least-squares slope of `log t` against `log n`.
pub fn fit_exponent(n: &[usize], t: &[f64]) -> Option<f64> {
    if n.len() < 2 || n.len() != t.len() || t.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = n.iter().map(|&v| (v as f64).ln()).collect();
    let ys: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Per-phase wall time for every (P, N) of the sweep. The exponent is
/// fitted twice: over evaluation time (everything except the table
/// precomputation) and over the total.
pub fn bench(s: &Settings) -> Result<Report, CliError> {
    let name = &s.scenario.name;
    let mut report = Report::default();
    for &p in &s.p_list {
        let mut eval = Vec::new();
        let mut total = Vec::new();
        for &n in &s.n_list {
            let particles = s.scenario.particles(n, s.seed);
            let pos: Vec<Point2> = particles.iter().map(|q| q.position).collect();
            let q: Vec<Complex64> = particles.iter().map(|q| q.strength).collect();
            let mut plan = FmmPlan::new(&pos, &s.run_config(p))?;
            plan.apply(&q)?;
            let t = plan.timings;
            let secs = |d: std::time::Duration| d.as_secs_f64();
            let e = secs(t.total() - t.tables);
            eval.push(e);
            total.push(secs(t.total()));
            for (metric, v) in [
                ("time_total", secs(t.total())),
                ("time_eval", e),
                ("time_tables", secs(t.tables)),
                ("time_build", secs(t.build)),
                ("time_upward", secs(t.upward)),
                ("time_downward", secs(t.downward)),
                ("time_near", secs(t.near)),
            ] {
                report
                    .rows
                    .push(Row::new(name, &s.media, metric, v).order(p).count(n).seconds(v).timing());
            }
        }
        for (metric, times) in [("beta_eval", &eval), ("beta_total", &total)] {
            if let Some(b) = fit_exponent(&s.n_list, times) {
                report.rows.push(Row::new(name, &s.media, metric, b).order(p).timing());
            }
        }
    }
    Ok(report)
}

/// Runs the named checks (all when `only` is empty).
pub fn validate(s: &Settings, only: &[String], fault: Option<Fault>) -> Result<Report, CliError> {
    let names: Vec<String> = if only.is_empty() {
        check_names().into_iter().map(String::from).collect()
    } else {
        only.to_vec()
    };
    let ctx = CheckContext {
        seed: s.seed,
        threads: s.threads,
        n: s.n_list[0],
        order: s.p_list[0],
        fault,
    };
    let mut report = Report::default();
    for name in &names {
        let t = Instant::now();
        let outcome = run_check(name, &ctx)
            .ok_or_else(|| CliError::Usage(format!("unknown check '{name}' (see --list)")))?;
        match outcome {
            Ok(o) => {
                if !o.passed() {
                    report.failures.push(format!("{name}: {:e} > {:e}", o.value, o.threshold));
                }
                report.rows.push(
                    Row::new(&s.scenario.name, &s.media, name.as_str(), o.value).seconds(t.elapsed().as_secs_f64()),
                );
            }
            Err(e) => {
                report.failures.push(format!("{name}: {e}"));
                report.rows.push(Row::new(&s.scenario.name, &s.media, name.as_str(), f64::NAN));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_fit() {
        let n = [100, 1000, 10000];
        let t: Vec<f64> = n.iter().map(|&v| 3e-6 * (v as f64).powf(1.1)).collect();
        assert!((fit_exponent(&n, &t).unwrap() - 1.1).abs() < 1e-12);
        assert!(fit_exponent(&[10], &[1.0]).is_none());
        assert!(fit_exponent(&[10, 10], &[1.0, 2.0]).is_none());
    }
}
