//! Experiment orchestration: config ingestion, γ-sweeps, slope fits,
//! figure recipes and result files.
//!
//! Output files:
//! * `diagnostics.csv` — one row per record of a single run
//! * `sweep.csv` — γ, final ln‖u_i‖₂ per species, convergence status
//! * `report.json` — fitted vs predicted slopes and the verdict
//! * `figure.svg` — the log–log plot

pub mod config;
pub mod fit;
pub mod svg;
pub mod sweep;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use config::{Backend, ExperimentConfig, GridConfig, MeshConfig, SteadyConfig, SweepConfig};
pub use fit::{fit_slope, predict_slopes, SlopeFit};
pub use sweep::{run_single, run_sweep, RunResult, RunStatus, SweepPoint};

use crate::error::{Error, Result};
use crate::system::InteractionSystem;

/// Allowed |fitted − predicted| slope gap for a figure verdict.
pub const SLOPE_TOL: f64 = 0.05;

/// ln γ grid of the figure recipes: 0.0, 0.1, …, 1.3.
pub fn figure_ln_gamma() -> Vec<f64> {
    (0..=13).map(|k| k as f64 / 10.0).collect()
}

pub const FIGURE_S1: f64 = 15.0 / 4.0;
pub const FIGURE_S2: f64 = 12.0 / 5.0;
pub const FIGURE_DIFFUSION: f64 = 0.1;

/// Reference points (ln γ, ln‖u_i‖₂) of the published figures; the two
/// series of the self-perception case, then the cross-perception case.
pub const REFERENCE_SELF: [&[(f64, f64)]; 2] = [
    &[
        (0.0, 1.529),
        (0.1, 1.718),
        (0.2, 1.907),
        (0.3, 2.096),
        (0.4, 2.285),
        (0.5, 2.473),
        (0.6, 2.662),
        (0.7, 2.851),
        (0.8, 3.040),
        (0.9, 3.231),
        (1.0, 3.414),
        (1.1, 3.604),
        (1.2, 3.796),
        (1.3, 3.990),
    ],
    &[
        (0.0, 0.899),
        (0.1, 1.020),
        (0.2, 1.141),
        (0.3, 1.262),
        (0.4, 1.382),
        (0.5, 1.503),
        (0.6, 1.623),
        (0.7, 1.743),
        (0.8, 1.863),
        (0.9, 1.983),
        (1.0, 2.103),
        (1.1, 2.223),
        (1.2, 2.343),
        (1.3, 2.463),
        (1.4, 2.584),
    ],
];

pub const REFERENCE_CROSS: [&[(f64, f64)]; 2] = [
    &[
        (0.0, 1.196),
        (0.1, 1.347),
        (0.2, 1.498),
        (0.3, 1.648),
        (0.4, 1.797),
        (0.5, 1.946),
        (0.6, 2.095),
        (0.7, 2.243),
        (0.8, 2.391),
        (0.9, 2.538),
        (1.0, 2.686),
        (1.1, 2.833),
        (1.2, 2.981),
        (1.3, 3.129),
        (1.4, 3.279),
        (1.5, 3.429),
    ],
    &[
        (0.0, 1.070),
        (0.1, 1.208),
        (0.2, 1.345),
        (0.3, 1.481),
        (0.4, 1.619),
        (0.5, 1.752),
        (0.6, 1.887),
        (0.7, 2.021),
        (0.8, 2.1555),
        (0.9, 2.2895),
        (1.0, 2.423),
        (1.1, 2.557),
        (1.2, 2.690),
        (1.3, 2.824),
        (1.4, 2.958),
        (1.5, 3.093),
    ],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// K_11 = γW_{15/4}, K_22 = γW_{12/5}, no cross terms.
    SelfPerception,
    /// K_12 = γW_{15/4}, K_21 = γW_{12/5}, no self terms.
    CrossPerception,
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self" | "self_perception" => Ok(Figure::SelfPerception),
            "cross" | "cross_perception" => Ok(Figure::CrossPerception),
            _ => Err(Error::Invalid(format!("unknown figure '{s}' (self|cross)"))),
        }
    }
}

impl Figure {
    pub fn system(&self) -> InteractionSystem {
        match self {
            Figure::SelfPerception => InteractionSystem::self_perception(1.0, FIGURE_S1, FIGURE_S2, FIGURE_DIFFUSION),
            Figure::CrossPerception => InteractionSystem::cross_perception(1.0, FIGURE_S1, FIGURE_S2, FIGURE_DIFFUSION),
        }
    }

    /// The full recipe: indicator data on [−1, 1], D = 0.1, L = 20, t_end = 20,
    /// graded finite-volume mesh, ln γ ∈ {0, 0.1, …, 1.3}.
    pub fn config(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.system());
        c.grid.record_every = 1;
        c.sweep = Some(SweepConfig::from_ln(&figure_ln_gamma()));
        c
    }

    pub fn reference(&self) -> [&'static [(f64, f64)]; 2] {
        match self {
            Figure::SelfPerception => REFERENCE_SELF,
            Figure::CrossPerception => REFERENCE_CROSS,
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Figure::SelfPerception => "K11 = γW(15/4), K22 = γW(12/5), no cross-perception",
            Figure::CrossPerception => "K12 = γW(15/4), K21 = γW(12/5), no self-perception",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesVerdict {
    pub species: usize,
    pub fitted: SlopeFit,
    pub predicted: f64,
    pub difference: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub figure: Option<Figure>,
    pub tolerance: f64,
    pub species: Vec<SpeciesVerdict>,
    pub pass: bool,
    pub statuses: Vec<(f64, RunStatus)>,
    pub notes: Vec<String>,
}

/// ln γ → ln‖u_i‖₂ pairs of species `i` over the usable points.
pub fn species_points(points: &[SweepPoint], i: usize) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|p| matches!(p.status, RunStatus::Converged | RunStatus::NotConverged))
        .filter_map(|p| p.ln_l2().map(|v| (p.ln_gamma(), v[i])))
        .collect()
}

/// Fit every species and compare with the analytic slopes (p = 2).
pub fn evaluate_sweep(system: &InteractionSystem, points: &[SweepPoint]) -> Result<Vec<SpeciesVerdict>> {
    let predicted = predict_slopes(system, 2.0)?;
    (0..system.n())
        .map(|i| {
            let fitted = fit_slope(&species_points(points, i))?;
            let difference = fitted.slope - predicted[i];
            Ok(SpeciesVerdict { species: i + 1, pass: difference.abs() <= SLOPE_TOL, predicted: predicted[i], difference, fitted })
        })
        .collect()
}

pub fn render_figure(title: &str, verdicts: &[SpeciesVerdict]) -> String {
    let chart = svg::Chart {
        title: title.to_string(),
        x_label: "ln γ".into(),
        y_label: "ln ‖u_i‖₂ at large t".into(),
        series: verdicts
            .iter()
            .map(|v| svg::Series {
                label: format!(
                    "i = {}: fitted {:.4}, predicted {:.4}",
                    v.species, v.fitted.slope, v.predicted
                ),
                points: v.fitted.points.clone(),
                fitted: Some((v.fitted.intercept, v.fitted.slope)),
                predicted: Some(v.predicted),
            })
            .collect(),
    };
    svg::render(&chart)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Run a sweep config and write `sweep.csv`, `figure.svg` and `report.json`
/// into `out`. Run failures abort after `sweep.csv` is written.
pub fn sweep_and_report(cfg: &ExperimentConfig, figure: Option<Figure>, out: &Path) -> Result<SweepReport> {
    std::fs::create_dir_all(out)?;
    let points = run_sweep(cfg)?;
    let n = cfg.system.n();
    sweep::write_sweep_csv_file(&points, n, &out.join("sweep.csv"))?;
    if let Some(bad) = points.iter().find(|p| matches!(p.status, RunStatus::Failed | RunStatus::BlowUp | RunStatus::NonFinite)) {
        return Err(Error::Invalid(format!(
            "run at γ = {} ended as {}{}",
            bad.gamma,
            bad.status.as_str(),
            bad.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
        )));
    }
    let species = evaluate_sweep(&cfg.system, &points)?;
    let title = figure.map_or("ln‖u_i‖₂ against ln γ", |f| f.title());
    std::fs::write(out.join("figure.svg"), render_figure(title, &species))?;
    let mut notes = Vec::new();
    if figure.is_some() {
        notes.push(
            "the reference figure extends to ln γ = 1.4–1.5 with differing point counts per series; \
             this reproduction uses the common range [0, 1.3]"
                .to_string(),
        );
    }
    let unsettled = points.iter().filter(|p| p.status == RunStatus::NotConverged).count();
    if unsettled > 0 {
        notes.push(format!(
            "{unsettled} of {} runs reached t_end = {} without meeting the steady-state test \
             (relative change < {:e} over a window of {}); their final norms are used",
            points.len(),
            cfg.grid.t_end,
            cfg.steady.tol,
            cfg.steady.window
        ));
    }
    let report = SweepReport {
        figure,
        tolerance: SLOPE_TOL,
        pass: species.iter().all(|s| s.pass),
        species,
        statuses: points.iter().map(|p| (p.gamma, p.status)).collect(),
        notes,
    };
    write_json(&report, &out.join("report.json"))?;
    Ok(report)
}

/// The full figure recipe with its artifacts in `out`.
pub fn reproduce_figure(which: Figure, out: &Path) -> Result<SweepReport> {
    sweep_and_report(&which.config(), Some(which), out)
}

/// Single run with `diagnostics.csv` (and `report.json` holding the final
/// record and status) in `out`.
pub fn run_and_write(cfg: &ExperimentConfig, out: &Path) -> Result<RunResult> {
    std::fs::create_dir_all(out)?;
    let r = run_single(cfg)?;
    crate::diagnostics::write_csv_file(&r.output.records, &out.join("diagnostics.csv"))?;
    #[derive(Serialize)]
    struct RunReport<'a> {
        status: RunStatus,
        steady_at: Option<f64>,
        steps: usize,
        t: f64,
        mass_drift: &'a [f64],
        min_value: f64,
        last: &'a crate::diagnostics::DiagnosticsRecord,
    }
    write_json(
        &RunReport {
            status: r.status,
            steady_at: r.steady_at,
            steps: r.output.steps,
            t: r.output.t,
            mass_drift: &r.output.mass_drift,
            min_value: r.output.min_value,
            last: r.last(),
        },
        &out.join("report.json"),
    )?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_fit_matches_independent_ols() {
        // numpy.polyfit on the same points
        let f = fit_slope(REFERENCE_SELF[0]).unwrap();
        assert!((f.slope - 1.889450549450549).abs() < 1e-12, "{}", f.slope);
        assert!((f.intercept - 1.528714285714286).abs() < 1e-12);
        let f = fit_slope(REFERENCE_SELF[1]).unwrap();
        assert!((f.slope - 1.2025).abs() < 1e-12, "{}", f.slope);
    }

    #[test]
    fn figure_names() {
        assert_eq!("self".parse::<Figure>().unwrap(), Figure::SelfPerception);
        assert_eq!("cross".parse::<Figure>().unwrap(), Figure::CrossPerception);
        assert!("both".parse::<Figure>().is_err());
        assert_eq!(figure_ln_gamma().len(), 14);
        Figure::SelfPerception.config().validate().unwrap();
    }
}
