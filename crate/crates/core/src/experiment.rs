//! Acceptance-ratio experiments over generated task systems.
//!
//! One experiment sweeps the normalized load grid for each processor
//! count, generates a fixed number of task sets per point, runs the
//! configured assigners on identical sets, and reports acceptance counts.
//! Everything is deterministic in the master seed: per-trial generator
//! seeds are derived by splitting, and trial results are merged in trial
//! order regardless of the parallel schedule.

use crate::dualrate::dual_rate_assign;
use crate::rat::{rat, Rat};
use crate::soma::{soma_with, SomaParams};
use crate::taskgen::{generate, GeneratorConfig, Rng};
use rayon::prelude::*;
use std::fmt;

/// Assignment algorithms the harness can compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Soma,
    DualRate,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Soma => write!(f, "soma"),
            Algorithm::DualRate => write!(f, "dualrate"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soma" => Ok(Algorithm::Soma),
            "dualrate" => Ok(Algorithm::DualRate),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Sweep parameters. Overrides apply to every grid point; the load grid is
/// the swept dimension.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub processors: Vec<u32>,
    pub u_bound_grid: Vec<Rat>,
    pub trials: usize,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub p_hi: Rat,
    pub u_max: Rat,
    pub n_hi_range: Option<(usize, usize)>,
    pub fixed_lo_lo: Option<Rat>,
    pub soma_params: SomaParams,
}

impl ExperimentConfig {
    /// The standard load grid `0.50, 0.55, ..., 1.00`.
    pub fn default_grid() -> Vec<Rat> {
        (10..=20).map(|i| Rat::ratio(i, 20)).collect()
    }

    pub fn new(processors: Vec<u32>, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            processors,
            u_bound_grid: Self::default_grid(),
            trials,
            algorithms: vec![Algorithm::Soma, Algorithm::DualRate],
            seed,
            p_hi: rat("0.5"),
            u_max: rat("1.0"),
            n_hi_range: None,
            fixed_lo_lo: None,
            soma_params: SomaParams::default(),
        }
    }
}

/// Joint per-point counts, kept so conditional ratios can be derived from
/// the same runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSummary {
    pub processors: u32,
    pub u_bound: Rat,
    /// Successfully generated sets at this point.
    pub total: usize,
    /// Trials where the generator gave up (point marked, not fatal).
    pub generator_failures: usize,
    pub soma_accepted: usize,
    pub dual_accepted: usize,
    /// Sets accepted by the multi-rate search but dual-rate infeasible.
    pub soma_not_dual: usize,
}

impl PointSummary {
    /// `(soma and not dual) / (not dual)`: the fraction of dual-rate
    /// infeasible sets the multi-rate search schedules.
    pub fn conditional_improvement(&self) -> Option<Rat> {
        let not_dual = self.total - self.dual_accepted;
        (not_dual > 0).then(|| Rat::ratio(self.soma_not_dual as i64, not_dual as i64))
    }
}

/// One output row: acceptance count for one algorithm at one grid point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultRow {
    pub processors: u32,
    pub param_name: String,
    pub param_value: Rat,
    pub algorithm: Algorithm,
    pub accepted: usize,
    pub total: usize,
}

impl ResultRow {
    pub fn ratio(&self) -> Rat {
        if self.total == 0 {
            Rat::zero()
        } else {
            Rat::ratio(self.accepted as i64, self.total as i64)
        }
    }
}

/// Run the sweep, returning joint counts per grid point.
pub fn run_experiment_points(cfg: &ExperimentConfig) -> Vec<PointSummary> {
    let mut points = Vec::new();
    for (mi, &m) in cfg.processors.iter().enumerate() {
        for (ui, ub) in cfg.u_bound_grid.iter().enumerate() {
            // Identical sets for every algorithm: one generator seed per
            // trial, derived from the master seed and the point index.
            let outcomes: Vec<Option<(bool, bool)>> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed =
                        Rng::derive_seed(cfg.seed, &[mi as u64, ui as u64, trial as u64]);
                    let mut gen_cfg = GeneratorConfig::new(m, ub.clone(), cfg.p_hi.clone(), seed);
                    gen_cfg.u_max = cfg.u_max.clone();
                    if let Some(r) = cfg.n_hi_range {
                        gen_cfg.n_hi_range = r;
                    }
                    if let Some(c) = &cfg.fixed_lo_lo {
                        gen_cfg.fixed_lo_lo = Some(c.clone());
                    }
                    let ts = generate(&gen_cfg).ok()?;
                    let dual = cfg.algorithms.contains(&Algorithm::DualRate)
                        || cfg.algorithms.contains(&Algorithm::Soma);
                    let dual_ok = dual && dual_rate_assign(&ts).is_some();
                    let soma_ok = cfg.algorithms.contains(&Algorithm::Soma)
                        && soma_with(&ts, &cfg.soma_params).is_success();
                    Some((dual_ok, soma_ok))
                })
                .collect();

            let mut p = PointSummary {
                processors: m,
                u_bound: ub.clone(),
                total: 0,
                generator_failures: 0,
                soma_accepted: 0,
                dual_accepted: 0,
                soma_not_dual: 0,
            };
            for o in outcomes {
                match o {
                    None => p.generator_failures += 1,
                    Some((dual_ok, soma_ok)) => {
                        p.total += 1;
                        p.dual_accepted += usize::from(dual_ok);
                        p.soma_accepted += usize::from(soma_ok);
                        p.soma_not_dual += usize::from(soma_ok && !dual_ok);
                    }
                }
            }
            points.push(p);
        }
    }
    points
}

/// Run the sweep and flatten to result rows (one per algorithm and point).
pub fn run_experiment(cfg: &ExperimentConfig) -> Vec<ResultRow> {
    let points = run_experiment_points(cfg);
    rows_from_points(cfg, &points)
}

pub fn rows_from_points(cfg: &ExperimentConfig, points: &[PointSummary]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for p in points {
        for &alg in &cfg.algorithms {
            rows.push(ResultRow {
                processors: p.processors,
                param_name: "U_B".into(),
                param_value: p.u_bound.clone(),
                algorithm: alg,
                accepted: match alg {
                    Algorithm::Soma => p.soma_accepted,
                    Algorithm::DualRate => p.dual_accepted,
                },
                total: p.total,
            });
        }
    }
    rows
}

/// Utilization-weighted mean acceptance ratio over one algorithm's rows:
/// `sum(AR(U_B) * U_B) / sum(U_B)`. `None` on empty input.
pub fn weighted_acceptance_ratio(rows: &[ResultRow]) -> Option<Rat> {
    if rows.is_empty() {
        return None;
    }
    debug_assert!(rows.iter().all(|r| r.algorithm == rows[0].algorithm));
    let num: Rat = rows.iter().map(|r| r.ratio() * r.param_value.clone()).sum();
    let den: Rat = rows.iter().map(|r| r.param_value.clone()).sum();
    (!den.is_zero()).then(|| num / den)
}

/// Fixed six-decimal rendering of `accepted/total`, exact and byte-stable.
fn ratio_field(accepted: usize, total: usize) -> String {
    if total == 0 {
        return "0.000000".into();
    }
    let scaled = (accepted as u128 * 1_000_000 + total as u128 / 2) / total as u128;
    format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
}

/// Render rows as CSV with the fixed header.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("m,param_name,param_value,algorithm,accepted,total,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.processors,
            r.param_name,
            r.param_value,
            r.algorithm,
            r.accepted,
            r.total,
            ratio_field(r.accepted, r.total)
        ));
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("malformed results CSV at line {line}: {reason}")]
pub struct CsvError {
    pub line: usize,
    pub reason: String,
}

/// Parse rows previously rendered by [`render_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, CsvError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            continue;
        }
        let err = |reason: &str| CsvError {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err("expected 7 fields"));
        }
        rows.push(ResultRow {
            processors: f[0].parse().map_err(|_| err("bad m"))?,
            param_name: f[1].to_string(),
            param_value: f[2].parse().map_err(|_| err("bad param value"))?,
            algorithm: f[3].parse().map_err(|_| err("bad algorithm"))?,
            accepted: f[4].parse().map_err(|_| err("bad accepted"))?,
            total: f[5].parse().map_err(|_| err("bad total"))?,
        });
    }
    Ok(rows)
}

/// Render an acceptance-ratio chart: one polyline per `(algorithm, m)`
/// series over the swept parameter.
pub fn render_svg(rows: &[ResultRow]) -> String {
    let (width, height) = (640.0, 420.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 30.0, 60.0);
    let plot_w = width - ml - mr;
    let plot_h = height - mt - mb;

    let xs: Vec<f64> = rows.iter().map(|r| r.param_value.to_f64()).collect();
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let x_span = if (x_max - x_min).abs() < 1e-12 {
        1.0
    } else {
        x_max - x_min
    };
    let x_of = |v: f64| ml + (v - x_min) / x_span * plot_w;
    let y_of = |ratio: f64| mt + (1.0 - ratio) * plot_h;

    let mut series: Vec<(Algorithm, u32)> = Vec::new();
    for r in rows {
        if !series.contains(&(r.algorithm, r.processors)) {
            series.push((r.algorithm, r.processors));
        }
    }
    let palette = ["#1b6ca8", "#c23b22", "#2e8b57", "#7d3c98", "#b8860b", "#444444"];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h,
        ml + plot_w,
        mt + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + plot_h
    ));
    let param = rows.first().map_or("parameter", |r| r.param_name.as_str());
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{param}</text>\n",
        ml + plot_w / 2.0,
        height - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" \
         transform=\"rotate(-90 16 {})\">acceptance ratio</text>\n",
        mt + plot_h / 2.0,
        mt + plot_h / 2.0
    ));
    // Y ticks at 0, 0.5, 1.
    for tick in [0.0, 0.5, 1.0] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{tick}</text>\n",
            ml - 6.0,
            y_of(tick) + 4.0
        ));
    }

    for (si, (alg, m)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .filter(|r| r.algorithm == *alg && r.processors == *m)
            .map(|r| {
                format!(
                    "{:.2},{:.2}",
                    x_of(r.param_value.to_f64()),
                    y_of(r.ratio().to_f64())
                )
            })
            .collect();
        let color = palette[si % palette.len()];
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{alg} m={m}</text>\n",
            ml + plot_w + mr - 130.0,
            mt + 16.0 * (si as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Output format of [`report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

/// Render rows in the requested format. Errors on empty input.
pub fn report(rows: &[ResultRow], format: ReportFormat) -> Result<String, &'static str> {
    if rows.is_empty() {
        return Err("no rows to report");
    }
    Ok(match format {
        ReportFormat::Csv => render_csv(rows),
        ReportFormat::Svg => render_svg(rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ub: &str, alg: Algorithm, accepted: usize, total: usize) -> ResultRow {
        ResultRow {
            processors: 2,
            param_name: "U_B".into(),
            param_value: rat(ub),
            algorithm: alg,
            accepted,
            total,
        }
    }

    #[test]
    fn war_examples() {
        let rows: Vec<ResultRow> = ExperimentConfig::default_grid()
            .iter()
            .map(|ub| ResultRow {
                processors: 2,
                param_name: "U_B".into(),
                param_value: ub.clone(),
                algorithm: Algorithm::Soma,
                accepted: 10,
                total: 10,
            })
            .collect();
        assert_eq!(weighted_acceptance_ratio(&rows), Some(rat("1")));

        let rows = vec![
            row("0.5", Algorithm::Soma, 10, 10),
            row("1.0", Algorithm::Soma, 4, 10),
        ];
        // (0.5 x 1.0 + 1.0 x 0.4) / 1.5 = 0.6
        assert_eq!(weighted_acceptance_ratio(&rows), Some(rat("0.6")));

        let rows: Vec<ResultRow> = ExperimentConfig::default_grid()
            .iter()
            .map(|ub| ResultRow {
                processors: 2,
                param_name: "U_B".into(),
                param_value: ub.clone(),
                algorithm: Algorithm::Soma,
                accepted: 1,
                total: 2,
            })
            .collect();
        assert_eq!(weighted_acceptance_ratio(&rows), Some(rat("0.5")));

        assert_eq!(weighted_acceptance_ratio(&[]), None);
    }

    #[test]
    fn small_experiment_runs_and_counts() {
        let mut cfg = ExperimentConfig::new(vec![2], 25, 7);
        cfg.u_bound_grid = vec![rat("0.60"), rat("1.00")];
        let points = run_experiment_points(&cfg);
        assert_eq!(points.len(), 2);
        for p in &points {
            assert_eq!(p.total + p.generator_failures, 25);
            assert!(p.soma_accepted >= p.dual_accepted, "dominance per point");
            assert_eq!(
                p.soma_not_dual,
                p.soma_accepted - p.dual_accepted,
                "with dominance, the conditional numerator is the gap"
            );
        }
        // Low load accepts nearly everything.
        assert!(points[0].soma_accepted >= 24);

        let rows = rows_from_points(&cfg, &points);
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn determinism_byte_identical() {
        let mut cfg = ExperimentConfig::new(vec![2], 10, 42);
        cfg.u_bound_grid = vec![rat("0.80")];
        let a = render_csv(&run_experiment(&cfg));
        let b = render_csv(&run_experiment(&cfg));
        assert_eq!(a, b);
        cfg.seed = 43;
        let c = render_csv(&run_experiment(&cfg));
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip_and_format() {
        let rows = vec![
            row("0.5", Algorithm::Soma, 457, 1000),
            row("0.5", Algorithm::DualRate, 1, 3),
        ];
        let csv = render_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("m,param_name,param_value,algorithm,accepted,total,ratio")
        );
        assert_eq!(lines.next(), Some("2,U_B,0.5,soma,457,1000,0.457000"));
        assert_eq!(lines.next(), Some("2,U_B,0.5,dualrate,1,3,0.333333"));
        assert_eq!(parse_csv(&csv).unwrap(), rows);
        assert!(parse_csv("m,x\n1,2\n").is_err());
    }

    #[test]
    fn svg_output_shape() {
        let rows = vec![
            row("0.5", Algorithm::Soma, 10, 10),
            row("1.0", Algorithm::Soma, 5, 10),
            row("0.5", Algorithm::DualRate, 9, 10),
            row("1.0", Algorithm::DualRate, 3, 10),
        ];
        let svg = render_svg(&rows);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("acceptance ratio"));
        assert!(svg.contains("U_B"));
        // A single row still renders.
        let one = render_svg(&rows[..1]);
        assert_eq!(one.matches("<polyline").count(), 1);
        assert!(report(&[], ReportFormat::Svg).is_err());
    }

    #[test]
    fn conditional_improvement_math() {
        let p = PointSummary {
            processors: 2,
            u_bound: rat("0.8"),
            total: 1000,
            generator_failures: 0,
            soma_accepted: 971,
            dual_accepted: 955,
            soma_not_dual: 16,
        };
        assert_eq!(p.conditional_improvement(), Some(Rat::ratio(16, 45)));
        let full = PointSummary {
            dual_accepted: 1000,
            soma_accepted: 1000,
            soma_not_dual: 0,
            ..p
        };
        assert_eq!(full.conditional_improvement(), None);
    }
}
