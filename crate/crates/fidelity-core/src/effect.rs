//! Effect sizes between driving environments and the comparison report.
//!
//! Every measure (metric or fitted model parameter) is pooled per
//! environment and compared against a baseline environment with Cohen's d:
//! the difference in means divided by the pooled standard deviation, with
//! no small-sample correction. Realism ratings are summarised separately
//! because their natural baseline is the standard simulator rather than
//! the real vehicle.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{expected_metrics, MetricCategory};
use crate::model::ModelKind;
use crate::signal::{mean, sample_sd};
use crate::trajectory::{Environment, Task};

/// |d| bands. Boundary values land in the stronger class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EffectMagnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectMagnitude {
    pub fn as_str(self) -> &'static str {
        match self {
            EffectMagnitude::Negligible => "NEGLIGIBLE",
            EffectMagnitude::Small => "SMALL",
            EffectMagnitude::Medium => "MEDIUM",
            EffectMagnitude::Large => "LARGE",
        }
    }

    pub fn parse(s: &str) -> Option<EffectMagnitude> {
        [
            EffectMagnitude::Negligible,
            EffectMagnitude::Small,
            EffectMagnitude::Medium,
            EffectMagnitude::Large,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for EffectMagnitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cohen's d for two independent samples: (mean_b − mean_a) / s_pooled,
/// s_pooled² = ((n_a−1)·s_a² + (n_b−1)·s_b²) / (n_a+n_b−2).
/// No small-sample correction is applied.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Effect(format!(
            "need at least 2 values per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (sample_sd(a), sample_sd(b));
    let pooled = (((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / (na + nb - 2.0)).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::Effect(
            "pooled standard deviation is zero; effect size undefined".into(),
        ));
    }
    Ok((mean(b) - mean(a)) / pooled)
}

/// |d| < 0.25 → NEGLIGIBLE; < 0.5 → SMALL; < 0.8 → MEDIUM; else LARGE.
pub fn classify_effect(d: f64) -> EffectMagnitude {
    debug_assert!(d.is_finite());
    let m = d.abs();
    if m < 0.25 {
        EffectMagnitude::Negligible
    } else if m < 0.5 {
        EffectMagnitude::Small
    } else if m < 0.8 {
        EffectMagnitude::Medium
    } else {
        EffectMagnitude::Large
    }
}

/// One per-attempt measure value, as read back from a metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub driver: String,
    pub environment: Environment,
    pub task: Task,
    pub attempt: u32,
    pub measure: String,
    pub value: f64,
}

/// One per-attempt model fit, as read back from a fit table.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub driver: String,
    pub environment: Environment,
    pub task: Task,
    pub attempt: u32,
    pub model: ModelKind,
    pub gain: f64,
    pub t_r: f64,
    pub t_p: f64,
    pub rms_error: f64,
    pub r_squared: f64,
    pub avg_adjustment_magnitude: Option<f64>,
    pub n_adjustments: Option<u32>,
}

impl FitRow {
    /// The compared measures this fit contributes.
    fn measures(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("t_r", self.t_r),
            ("gain", self.gain),
            ("rms_error", self.rms_error),
        ];
        if let Some(m) = self.avg_adjustment_magnitude {
            out.push(("avg_adjustment", m));
        }
        out
    }
}

/// Comparison of one measure between the baseline and one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectEntry {
    pub task: Task,
    pub measure: String,
    /// Baseline environment.
    pub env_a: Environment,
    pub env_b: Environment,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub d: f64,
    pub magnitude: EffectMagnitude,
}

/// Realism ratings for one environment in one task, compared against the
/// rating baseline when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingSummary {
    pub task: Task,
    pub environment: Environment,
    /// Mean per-driver rating, percent.
    pub mean_rating: f64,
    /// Across-driver spread; absent with fewer than 2 drivers.
    pub sd_rating: Option<f64>,
    /// Number of drivers who rated.
    pub n: usize,
    /// d against the rating baseline; absent for the baseline itself or
    /// when undefined.
    pub d: Option<f64>,
    pub magnitude: Option<EffectMagnitude>,
}

/// How per-attempt values are pooled into an environment's sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Every attempt is one observation (maximises n).
    #[default]
    PerAttempt,
    /// Each driver contributes the mean of their attempts.
    PerDriverMean,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::PerAttempt => "per-attempt",
            Pooling::PerDriverMean => "per-driver mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonConfig {
    /// Baseline for measure comparisons.
    pub measure_baseline: Environment,
    /// Baseline for realism-rating comparisons.
    pub rating_baseline: Environment,
    pub pooling: Pooling,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            measure_baseline: Environment::Real,
            rating_baseline: Environment::Std,
            pooling: Pooling::PerAttempt,
        }
    }
}

/// The full comparison, ordered by task, then measure, then environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectReport {
    pub measure_baseline: Environment,
    pub rating_baseline: Environment,
    pub entries: Vec<EffectEntry>,
    pub ratings: Vec<RatingSummary>,
    /// Sample counts, configuration and skipped comparisons.
    pub provenance: Vec<String>,
}

/// Measure name under which realism ratings travel in measure rows.
pub const RATING_MEASURE: &str = "realism_rating";

/// Canonical row order of the comparison tables for one task.
pub fn measure_order(task: Task) -> Vec<&'static str> {
    let mut names: Vec<&'static str> = expected_metrics(task, MetricCategory::Aggregate)
        .iter()
        .map(|(n, _)| *n)
        .collect();
    names.extend(expected_metrics(task, MetricCategory::TimeSeries).iter().map(|(n, _)| *n));
    names.extend(["t_r", "gain", "rms_error"]);
    if task == Task::Clv {
        names.push("avg_adjustment");
    }
    names
}

type GroupKey = (Task, String, Environment);
/// (driver, attempt) → value; the BTreeMap makes pooling independent of
/// input row order.
type Group = BTreeMap<(String, u32), f64>;

fn pool(group: &Group, pooling: Pooling) -> Vec<f64> {
    match pooling {
        Pooling::PerAttempt => group.values().copied().collect(),
        Pooling::PerDriverMean => {
            let mut by_driver: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for ((driver, _), v) in group {
                by_driver.entry(driver).or_default().push(*v);
            }
            by_driver.values().map(|vs| mean(vs)).collect()
        }
    }
}

/// Build the comparison: pool per-attempt values within each environment
/// and compute Cohen's d of every non-baseline environment against the
/// baseline, measure by measure. Ratings are compared against the rating
/// baseline per driver. Comparisons with zero pooled spread are skipped
/// and noted in the provenance.
pub fn build_comparison(
    metric_rows: &[MeasureRow],
    fit_rows: &[FitRow],
    config: &ComparisonConfig,
) -> Result<EffectReport> {
    let mut groups: BTreeMap<GroupKey, Group> = BTreeMap::new();
    let mut ratings_in: BTreeMap<(Task, Environment), BTreeMap<String, Vec<f64>>> =
        BTreeMap::new();

    let mut insert = |task: Task,
                      env: Environment,
                      driver: &str,
                      attempt: u32,
                      measure: &str,
                      value: f64|
     -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Effect(format!(
                "non-finite value for {} {measure} ({driver} attempt {attempt})",
                task.as_str()
            )));
        }
        let key = (task, measure.to_string(), env);
        let prev = groups
            .entry(key)
            .or_default()
            .insert((driver.to_string(), attempt), value);
        if prev.is_some() {
            return Err(Error::Effect(format!(
                "duplicate row for {} {measure} ({driver} attempt {attempt}, {env})",
                task.as_str()
            )));
        }
        Ok(())
    };

    for row in metric_rows {
        if row.measure == RATING_MEASURE {
            ratings_in
                .entry((row.task, row.environment))
                .or_default()
                .entry(row.driver.clone())
                .or_default()
                .push(row.value);
            continue;
        }
        if !measure_order(row.task).contains(&row.measure.as_str()) {
            return Err(Error::Effect(format!(
                "unknown measure '{}' for task {}",
                row.measure,
                row.task.as_str()
            )));
        }
        insert(row.task, row.environment, &row.driver, row.attempt, &row.measure, row.value)?;
    }
    for row in fit_rows {
        for (measure, value) in row.measures() {
            insert(row.task, row.environment, &row.driver, row.attempt, measure, value)?;
        }
    }

    let mut provenance = vec![format!(
        "baseline {} for measures, {} for ratings; pooling {}",
        config.measure_baseline,
        config.rating_baseline,
        config.pooling.as_str()
    )];
    let mut entries = Vec::new();
    let mut gaps: Vec<String> = Vec::new();

    for task in Task::ALL {
        for measure in measure_order(task) {
            let of_env = |env: Environment| {
                groups.get(&(task, measure.to_string(), env)).map(|g| pool(g, config.pooling))
            };
            let others: Vec<(Environment, Vec<f64>)> = Environment::ALL
                .into_iter()
                .filter(|e| *e != config.measure_baseline)
                .filter_map(|e| of_env(e).map(|vals| (e, vals)))
                .collect();
            if others.is_empty() {
                continue;
            }
            let Some(base) = of_env(config.measure_baseline) else {
                gaps.push(format!("{} {measure}", task.as_str()));
                continue;
            };
            for (env, vals) in others {
                match cohens_d(&base, &vals) {
                    Ok(d) => entries.push(EffectEntry {
                        task,
                        measure: measure.to_string(),
                        env_a: config.measure_baseline,
                        env_b: env,
                        mean_a: mean(&base),
                        mean_b: mean(&vals),
                        sd_a: sample_sd(&base),
                        sd_b: sample_sd(&vals),
                        n_a: base.len(),
                        n_b: vals.len(),
                        d,
                        magnitude: classify_effect(d),
                    }),
                    Err(e) => provenance.push(format!(
                        "skipped {} {measure} {} vs {env}: {e}",
                        task.as_str(),
                        config.measure_baseline
                    )),
                }
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Effect(format!(
            "no {} baseline data for: {}",
            config.measure_baseline,
            gaps.join(", ")
        )));
    }

    let mut ratings = Vec::new();
    for task in Task::ALL {
        let per_driver = |env: Environment| -> Option<Vec<f64>> {
            ratings_in
                .get(&(task, env))
                .map(|by_driver| by_driver.values().map(|vs| mean(vs)).collect())
        };
        let base = per_driver(config.rating_baseline);
        for env in Environment::ALL {
            let Some(vals) = per_driver(env) else { continue };
            let d = if env == config.rating_baseline {
                None
            } else {
                base.as_ref().and_then(|b| match cohens_d(b, &vals) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        provenance.push(format!(
                            "skipped {} rating {} vs {env}: {e}",
                            task.as_str(),
                            config.rating_baseline
                        ));
                        None
                    }
                })
            };
            ratings.push(RatingSummary {
                task,
                environment: env,
                mean_rating: mean(&vals),
                sd_rating: if vals.len() >= 2 { Some(sample_sd(&vals)) } else { None },
                n: vals.len(),
                d,
                magnitude: d.map(classify_effect),
            });
        }
    }

    for task in Task::ALL {
        for env in Environment::ALL {
            let attempts: std::collections::BTreeSet<(&str, u32)> = groups
                .iter()
                .filter(|((t, _, e), _)| *t == task && *e == env)
                .flat_map(|(_, g)| g.keys().map(|(d, a)| (d.as_str(), *a)))
                .collect();
            if !attempts.is_empty() {
                let drivers: std::collections::BTreeSet<&str> =
                    attempts.iter().map(|(d, _)| *d).collect();
                provenance.push(format!(
                    "{} {}: {} attempts from {} drivers",
                    task.as_str(),
                    env,
                    attempts.len(),
                    drivers.len()
                ));
            }
        }
    }

    Ok(EffectReport {
        measure_baseline: config.measure_baseline,
        rating_baseline: config.rating_baseline,
        entries,
        ratings,
        provenance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

fn fmt_d(d: f64, magnitude: EffectMagnitude) -> String {
    if magnitude == EffectMagnitude::Large {
        format!("**{d:.2}**")
    } else {
        format!("{d:.2}")
    }
}

fn render_markdown(report: &EffectReport) -> String {
    let mut out = String::from("# Environment comparison\n");
    for line in &report.provenance {
        out.push_str(&format!("\n- {line}"));
    }
    out.push('\n');

    for task in Task::ALL {
        let entries: Vec<&EffectEntry> =
            report.entries.iter().filter(|e| e.task == task).collect();
        let ratings: Vec<&RatingSummary> =
            report.ratings.iter().filter(|r| r.task == task).collect();
        if entries.is_empty() && ratings.is_empty() {
            continue;
        }
        let envs: Vec<Environment> = Environment::ALL
            .into_iter()
            .filter(|e| {
                entries.iter().any(|en| en.env_b == *e)
                    || ratings.iter().any(|r| r.environment == *e)
            })
            .collect();

        out.push_str(&format!("\n## {}\n\n", task.as_str()));
        out.push_str(&format!(
            "| measure (d vs {}) |{}\n",
            report.measure_baseline,
            envs.iter().map(|e| format!(" {e} |")).collect::<String>()
        ));
        out.push_str(&format!("| --- |{}\n", " --- |".repeat(envs.len())));
        for measure in measure_order(task) {
            let row: Vec<Option<&EffectEntry>> = envs
                .iter()
                .map(|env| {
                    entries.iter().copied().find(|e| e.measure == measure && e.env_b == *env)
                })
                .collect();
            if row.iter().all(Option::is_none) {
                continue;
            }
            out.push_str(&format!("| {measure} |"));
            for cell in row {
                match cell {
                    Some(e) => out.push_str(&format!(" {} |", fmt_d(e.d, e.magnitude))),
                    None => out.push_str("  |"),
                }
            }
            out.push('\n');
        }
        if !ratings.is_empty() {
            out.push_str("| realism rating (mean) |");
            for env in &envs {
                match ratings.iter().find(|r| r.environment == *env) {
                    Some(r) => out.push_str(&format!(" {:.0}% |", r.mean_rating)),
                    None => out.push_str("  |"),
                }
            }
            out.push('\n');
            out.push_str(&format!("| realism rating (d vs {}) |", report.rating_baseline));
            for env in &envs {
                let cell = ratings
                    .iter()
                    .find(|r| r.environment == *env)
                    .and_then(|r| r.d.map(|d| (d, r.magnitude.unwrap())));
                match cell {
                    Some((d, m)) => out.push_str(&format!(" {} |", fmt_d(d, m))),
                    None => out.push_str("  |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn render_csv(report: &EffectReport) -> String {
    let mut out = String::new();
    for line in &report.provenance {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str("task,measure,env_a,env_b,mean_a,mean_b,sd_a,sd_b,n_a,n_b,d,magnitude\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            e.task.as_str(),
            e.measure,
            e.env_a,
            e.env_b,
            e.mean_a,
            e.mean_b,
            e.sd_a,
            e.sd_b,
            e.n_a,
            e.n_b,
            e.d,
            e.magnitude
        ));
    }
    for r in &report.ratings {
        let base = report
            .ratings
            .iter()
            .find(|b| b.task == r.task && b.environment == report.rating_baseline);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.task.as_str(),
            RATING_MEASURE,
            report.rating_baseline,
            r.environment,
            opt(base.map(|b| b.mean_rating)),
            r.mean_rating,
            opt(base.and_then(|b| b.sd_rating)),
            opt(r.sd_rating),
            base.map(|b| b.n.to_string()).unwrap_or_default(),
            r.n,
            opt(r.d),
            r.magnitude.map(|m| m.to_string()).unwrap_or_default()
        ));
    }
    out
}

/// Render the report; markdown shows one table per task with LARGE
/// effects emphasised, the comma-separated form is flat rows.
pub fn render_report(report: &EffectReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // --- cohens_d ---------------------------------------------------------

    #[test]
    fn identical_samples_have_no_effect() {
        let d = cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(d, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unit_spread_shift_of_two_is_d_two() {
        // means 2 and 4, both sample SDs exactly 1, pooled SD 1
        let d = cohens_d(&[1.0, 2.0, 3.0], &[3.0, 4.0, 5.0]).unwrap();
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_is_undefined() {
        let err = cohens_d(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("undefined"), "{err}");
    }

    #[test]
    fn tiny_samples_are_rejected() {
        assert!(cohens_d(&[1.0], &[1.0, 2.0]).is_err());
        assert!(cohens_d(&[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn hand_pooled_example() {
        // REAL-like: n=24, mean 3.0, sample SD 1.5; STD-like: n=32, mean
        // 5.5, sample SD 2.5 (symmetric two-point samples hit the moments
        // exactly). d = 2.5 / sqrt((23*1.5^2 + 31*2.5^2)/54).
        let two_point = |n: usize, m: f64, s: f64| -> Vec<f64> {
            let delta = s * ((n as f64 - 1.0) / n as f64).sqrt();
            (0..n).map(|i| if i % 2 == 0 { m - delta } else { m + delta }).collect()
        };
        let a = two_point(24, 3.0, 1.5);
        let b = two_point(32, 5.5, 2.5);
        let d = cohens_d(&a, &b).unwrap();
        let expected = 2.5 / ((23.0 * 2.25 + 31.0 * 6.25) / 54.0f64).sqrt();
        assert_relative_eq!(d, expected, epsilon = 1e-9);
        assert!(d > 0.8);
        assert_eq!(classify_effect(d), EffectMagnitude::Large);
    }

    // --- classify_effect ----------------------------------------------------

    #[test]
    fn magnitude_bands() {
        use EffectMagnitude::*;
        for (d, want) in [
            (0.0, Negligible),
            (0.94, Large),
            (-0.51, Medium),
            (0.25, Small),
            (0.25 - 1e-9, Negligible),
            (0.5, Medium),
            (0.5 - 1e-9, Small),
            (0.8, Large),
            (0.8 - 1e-9, Medium),
            (-1.92, Large),
        ] {
            assert_eq!(classify_effect(d), want, "d = {d}");
        }
    }

    // --- properties -----------------------------------------------------------

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 2..12)
    }

    proptest! {
        #[test]
        fn antisymmetric(a in sample(), b in sample()) {
            if let (Ok(dab), Ok(dba)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
                prop_assert!((dab + dba).abs() <= 1e-9 * (1.0 + dab.abs()));
            }
        }

        #[test]
        fn shift_invariant(a in sample(), b in sample(), c in -1000.0f64..1000.0) {
            let shifted_a: Vec<f64> = a.iter().map(|v| v + c).collect();
            let shifted_b: Vec<f64> = b.iter().map(|v| v + c).collect();
            if let (Ok(d), Ok(ds)) = (cohens_d(&a, &b), cohens_d(&shifted_a, &shifted_b)) {
                prop_assert!((d - ds).abs() <= 1e-6 * (1.0 + d.abs()), "{d} vs {ds}");
            }
        }

        #[test]
        fn negation_flips_sign(a in sample(), b in sample()) {
            let neg_a: Vec<f64> = a.iter().map(|v| -v).collect();
            let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
            if let (Ok(d), Ok(dn)) = (cohens_d(&a, &b), cohens_d(&neg_a, &neg_b)) {
                prop_assert!((d + dn).abs() <= 1e-12 * (1.0 + d.abs()));
                prop_assert_eq!(classify_effect(d), classify_effect(-d));
            }
        }

        #[test]
        fn scale_invariant(a in sample(), b in sample(), c in 0.001f64..1000.0) {
            let scaled_a: Vec<f64> = a.iter().map(|v| v * c).collect();
            let scaled_b: Vec<f64> = b.iter().map(|v| v * c).collect();
            if let (Ok(d), Ok(ds)) = (cohens_d(&a, &b), cohens_d(&scaled_a, &scaled_b)) {
                prop_assert!((d - ds).abs() <= 1e-9 * (1.0 + d.abs()), "{d} vs {ds}");
            }
        }
    }

    // --- build_comparison --------------------------------------------------------

    fn row(
        driver: &str,
        env: Environment,
        task: Task,
        attempt: u32,
        measure: &str,
        value: f64,
    ) -> MeasureRow {
        MeasureRow {
            driver: driver.into(),
            environment: env,
            task,
            attempt,
            measure: measure.into(),
            value,
        }
    }

    /// speed_var rows for two drivers × two attempts per environment.
    fn speed_var_rows(env: Environment, values: [f64; 4]) -> Vec<MeasureRow> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                row(
                    if i < 2 { "d1" } else { "d2" },
                    env,
                    Task::Lct,
                    (i % 2 + 1) as u32,
                    "speed_var",
                    v,
                )
            })
            .collect()
    }

    #[test]
    fn identical_environments_give_zero_d() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.extend(speed_var_rows(Environment::Std, [1.0, 2.0, 3.0, 4.0]));
        let report =
            build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        assert_eq!(report.entries.len(), 1);
        let e = &report.entries[0];
        assert_relative_eq!(e.d, 0.0, epsilon = 1e-14);
        assert_eq!(e.magnitude, EffectMagnitude::Negligible);
        assert_eq!((e.n_a, e.n_b), (4, 4));
        assert_eq!((e.env_a, e.env_b), (Environment::Real, Environment::Std));
    }

    #[test]
    fn missing_baseline_is_an_error_listing_gaps() {
        let rows = speed_var_rows(Environment::Std, [1.0, 2.0, 3.0, 4.0]);
        let err = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("REAL") && msg.contains("LCT speed_var"), "{msg}");
    }

    #[test]
    fn constant_measures_are_skipped_with_a_note() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.extend(speed_var_rows(Environment::Std, [1.5, 2.5, 3.5, 4.5]));
        // cones_hit is 0 everywhere: pooled SD = 0
        for env in [Environment::Real, Environment::Std] {
            for (d, a) in [("d1", 1), ("d1", 2), ("d2", 1), ("d2", 2)] {
                rows.push(row(d, env, Task::Lct, a, "cones_hit", 0.0));
            }
        }
        let report = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        assert_eq!(report.entries.len(), 1, "only speed_var survives");
        assert_eq!(report.entries[0].measure, "speed_var");
        assert!(
            report.provenance.iter().any(|p| p.contains("cones_hit") && p.contains("skipped")),
            "{:?}",
            report.provenance
        );
    }

    #[test]
    fn input_order_is_irrelevant() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.extend(speed_var_rows(Environment::Std, [2.0, 3.0, 4.0, 6.0]));
        rows.extend(speed_var_rows(Environment::NoMot, [0.5, 1.0, 2.0, 2.5]));
        let forward = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        rows.reverse();
        let backward = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.push(rows[0].clone());
        let err = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn unknown_measures_are_rejected() {
        let rows = vec![row("d1", Environment::Real, Task::Lct, 1, "boost", 1.0)];
        let err = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap_err();
        assert!(err.to_string().contains("boost"), "{err}");
    }

    #[test]
    fn per_driver_pooling_shrinks_n() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.extend(speed_var_rows(Environment::Std, [2.0, 3.0, 4.0, 6.0]));
        let config = ComparisonConfig { pooling: Pooling::PerDriverMean, ..Default::default() };
        let report = build_comparison(&rows, &[], &config).unwrap();
        let e = &report.entries[0];
        assert_eq!((e.n_a, e.n_b), (2, 2));
        // driver means: REAL {1.5, 3.5}, STD {2.5, 5.0}
        assert_relative_eq!(e.mean_a, 2.5, epsilon = 1e-12);
        assert_relative_eq!(e.mean_b, 3.75, epsilon = 1e-12);
    }

    fn fit_row(driver: &str, env: Environment, attempt: u32, gain: f64, t_r: f64) -> FitRow {
        FitRow {
            driver: driver.into(),
            environment: env,
            task: Task::Lct,
            attempt,
            model: ModelKind::Dpyre,
            gain,
            t_r,
            t_p: 1.0,
            rms_error: 0.2,
            r_squared: 0.9,
            avg_adjustment_magnitude: None,
            n_adjustments: None,
        }
    }

    #[test]
    fn fit_rows_contribute_gain_delay_and_rms() {
        let fits = vec![
            fit_row("d1", Environment::Real, 1, 12.0, 0.30),
            fit_row("d1", Environment::Real, 2, 14.0, 0.35),
            fit_row("d2", Environment::Real, 1, 13.0, 0.25),
            fit_row("d1", Environment::NoMot, 1, 17.0, 0.30),
            fit_row("d1", Environment::NoMot, 2, 19.0, 0.25),
            fit_row("d2", Environment::NoMot, 1, 18.0, 0.35),
        ];
        let report = build_comparison(&[], &fits, &ComparisonConfig::default()).unwrap();
        let gain = report
            .entries
            .iter()
            .find(|e| e.measure == "gain")
            .expect("gain entry");
        assert!(gain.d > 0.8, "gain rose 13 -> 18, d = {}", gain.d);
        assert_eq!(gain.magnitude, EffectMagnitude::Large);
        assert!(report.entries.iter().any(|e| e.measure == "t_r"));
        // rms_error is constant in both groups: skipped, not an entry
        assert!(!report.entries.iter().any(|e| e.measure == "rms_error"));
        // measure rows follow the canonical order: t_r before gain
        let names: Vec<&str> = report.entries.iter().map(|e| e.measure.as_str()).collect();
        assert_eq!(names, ["t_r", "gain"]);
    }

    fn rating_rows() -> Vec<MeasureRow> {
        let mut rows = Vec::new();
        for (env, base) in [
            (Environment::Std, 70.0),
            (Environment::NoTrq, 60.0),
            (Environment::NoMot, 40.0),
        ] {
            for (i, driver) in ["d1", "d2", "d3"].iter().enumerate() {
                let value = base + 2.0 * (i as f64 - 1.0); // spread ±2 about the mean
                rows.push(row(driver, env, Task::Lct, 1, RATING_MEASURE, value));
            }
        }
        rows
    }

    #[test]
    fn ratings_compare_against_the_standard_simulator() {
        let mut rows = rating_rows();
        rows.extend(speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]));
        rows.extend(speed_var_rows(Environment::Std, [2.0, 3.0, 4.0, 6.0]));
        let report = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        assert_eq!(report.ratings.len(), 3);
        let by_env = |env| report.ratings.iter().find(|r| r.environment == env).unwrap();
        let std = by_env(Environment::Std);
        assert_relative_eq!(std.mean_rating, 70.0, epsilon = 1e-12);
        assert_eq!(std.d, None, "baseline has no d against itself");
        let nomot = by_env(Environment::NoMot);
        assert_relative_eq!(nomot.mean_rating, 40.0, epsilon = 1e-12);
        assert!(nomot.d.unwrap() < -0.8, "d = {:?}", nomot.d);
        assert_eq!(nomot.n, 3);
        let notrq = by_env(Environment::NoTrq);
        assert!(notrq.d.unwrap() < 0.0 && notrq.d.unwrap() > nomot.d.unwrap());
    }

    // --- rendering -------------------------------------------------------------

    #[test]
    fn markdown_emphasises_large_effects_and_shows_ratings() {
        let mut rows = rating_rows();
        rows.extend(speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]));
        rows.extend(speed_var_rows(Environment::Std, [7.0, 8.0, 9.0, 11.0]));
        let report = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.contains("## LCT"), "{md}");
        assert!(md.contains("**"), "large effect should be emphasised:\n{md}");
        let rating_line = md
            .lines()
            .find(|l| l.contains("realism rating (mean)"))
            .expect("rating row");
        let p70 = rating_line.find("70%").unwrap();
        let p60 = rating_line.find("60%").unwrap();
        let p40 = rating_line.find("40%").unwrap();
        assert!(p70 < p60 && p60 < p40, "{rating_line}");
        assert!(md.contains("(d vs STD)"), "{md}");
        assert!(!md.contains("SLX"), "tasks without data are omitted:\n{md}");
    }

    #[test]
    fn empty_report_renders_headers_only() {
        let report = build_comparison(&[], &[], &ComparisonConfig::default()).unwrap();
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.starts_with("# Environment comparison"));
        assert!(!md.contains("## "));
        let csv = render_csv(&report);
        let data_lines: Vec<&str> =
            csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            data_lines,
            vec!["task,measure,env_a,env_b,mean_a,mean_b,sd_a,sd_b,n_a,n_b,d,magnitude"]
        );
    }

    #[test]
    fn csv_rows_carry_full_sample_statistics() {
        let mut rows = speed_var_rows(Environment::Real, [1.0, 2.0, 3.0, 4.0]);
        rows.extend(speed_var_rows(Environment::Std, [2.0, 3.0, 4.0, 6.0]));
        rows.extend(rating_rows());
        let report = build_comparison(&rows, &[], &ComparisonConfig::default()).unwrap();
        let csv = render_report(&report, ReportFormat::Csv);
        let line = csv
            .lines()
            .find(|l| l.starts_with("LCT,speed_var,REAL,STD"))
            .expect("speed_var row");
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 12);
        assert_eq!(fields[4].parse::<f64>().unwrap(), 2.5); // mean_a
        assert_eq!(fields[8], "4");
        assert_eq!(fields[9], "4");
        // rating rows present with the STD baseline
        assert!(
            csv.lines().any(|l| l.starts_with("LCT,realism_rating,STD,NOMOT")),
            "{csv}"
        );
        assert!(csv.lines().next().unwrap().starts_with('#'), "provenance leads");
    }
}
