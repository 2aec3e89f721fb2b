//! Convergence-study driver behind the `fosls-study` binary.
//!
//! A study sweeps mesh levels `1..=levels` for every `(p_s, p_v)` pair
//! of its config, solves the least-squares system on each level, and
//! compares the last-interval decay rates with the rates predicted from
//! the approximation orders and the regularity `s` of the data
//! (`s = inf` for the smooth cases, `1/2` for the indicator case):
//!
//! ```text
//! e_u     min(s+1, 2)                    p_v = 1
//!         min(s+1, p_s, p_v+1) + 1       p_v >= 2
//! e_gradu min(s+1, p_s, p_v+1)
//! e_phi   min(s+1, p_s+1, p_v)           RT
//!         min(s+1, p_s+1, p_v+1)         BDM
//! ```
//!
//! A norm PASSes when the observed rate is at least the predicted one
//! minus 0.25. Rates above prediction pass too: the lowest-order `e_u`
//! guarantee in particular is routinely beaten in practice.
//!
//! Artifacts, all under the configured output directory: one CSV per
//! combination (schema [`crate::norms::CSV_HEADER`]), one two-panel SVG
//! chart per combination and norm, `summary.csv` with one verdict line
//! per combination and norm, and `errors.log` when combinations fail.
//! A failing combination (DOF guardrail, solver breakdown) is recorded
//! and the remaining combinations still run. Runs are deterministic:
//! the same config writes byte-identical CSV output.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use crate::assemble::{Discretization, ProblemConfig};
use crate::cases::{case_by_name, ManufacturedCase};
use crate::error::{FoslsError, Result};
use crate::geometry::Mesh;
use crate::hdiv::Family;
use crate::norms::{compute_errors, write_csv, ErrorReport};
use crate::plot::convergence_chart;

/// Largest number of free DOFs a study will solve without `force`.
pub const DOF_GUARDRAIL: usize = 300_000;

/// The three headline norms a study reports rates for.
const NORMS: [&str; 3] = ["err_u", "err_gradu", "err_phi"];

/// One convergence study: a manufactured case, a degree sweep and a
/// level range, plus output knobs.
///
/// Deserializes from a TOML manifest in which every field is optional:
///
/// ```text
/// case = "smooth"            # smooth | indicator | dirichlet-smoke
/// gamma = 1.0
/// family = "RT"              # RT | BDM
/// ps = [2, 3]
/// pv = [2, 3]
/// levels = 5
/// n_fan = 6
/// out = "study-out"
/// expected_rates = false
/// force = false
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Manufactured case name, resolved via [`case_by_name`].
    pub case: String,
    /// Reaction coefficient of the case.
    pub gamma: f64,
    /// H(div) family for the vector variable.
    #[serde(deserialize_with = "family_from_str")]
    pub family: Family,
    /// Scalar degrees to sweep.
    pub ps: Vec<usize>,
    /// Vector degrees to sweep.
    pub pv: Vec<usize>,
    /// Finest mesh level; the sweep runs levels `1..=levels`.
    pub levels: usize,
    /// Fan triangles in the level-0 disk mesh.
    pub n_fan: usize,
    /// Output directory, created if missing.
    pub out: PathBuf,
    /// Also write `expected-rates.csv` with the predicted-rate table.
    pub expected_rates: bool,
    /// Run even past [`DOF_GUARDRAIL`].
    pub force: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            case: "smooth".into(),
            gamma: 1.0,
            family: Family::RaviartThomas,
            ps: vec![2],
            pv: vec![2],
            levels: 4,
            n_fan: 6,
            out: PathBuf::from("study-out"),
            expected_rates: false,
            force: false,
        }
    }
}

impl StudyConfig {
    /// Loads a TOML manifest; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<StudyConfig> {
        toml::from_str(text).map_err(|e| FoslsError::Config(format!("manifest: {e}")))
    }

    /// Checks every constraint that does not require running anything:
    /// known case, positive gamma, non-empty degree lists within the
    /// supported orders, at least two levels, a valid fan count.
    pub fn validate(&self) -> Result<ManufacturedCase> {
        let case = case_by_name(&self.case, self.gamma)?;
        if self.levels < 2 {
            return Err(FoslsError::Config(format!(
                "a rate needs at least two levels, got levels = {}",
                self.levels
            )));
        }
        if self.ps.is_empty() || self.pv.is_empty() {
            return Err(FoslsError::Config("empty degree sweep".into()));
        }
        for (&p_s, &p_v) in iter_pairs(&self.ps, &self.pv) {
            ProblemConfig::new(self.gamma, case.bc(), self.family, p_s, p_v)?;
        }
        // Surfaces bad fan counts before any heavy work.
        Mesh::disk(self.n_fan, 0)?;
        Ok(case)
    }
}

/// Cartesian product of the two degree lists, `ps` outermost.
fn iter_pairs<'a>(
    ps: &'a [usize],
    pv: &'a [usize],
) -> impl Iterator<Item = (&'a usize, &'a usize)> {
    ps.iter().flat_map(move |p_s| pv.iter().map(move |p_v| (p_s, p_v)))
}

/// Parses `RT` or `BDM`, case-insensitively.
pub fn parse_family(s: &str) -> Result<Family> {
    match s.to_ascii_lowercase().as_str() {
        "rt" => Ok(Family::RaviartThomas),
        "bdm" => Ok(Family::BrezziDouglasMarini),
        _ => Err(FoslsError::Config(format!(
            "unknown family {s:?}, expected RT or BDM"
        ))),
    }
}

fn family_from_str<'de, D>(de: D) -> std::result::Result<Family, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let s = String::deserialize(de)?;
    parse_family(&s).map_err(serde::de::Error::custom)
}

/// Parses a degree list flag: comma-separated values and inclusive
/// ranges, e.g. `2`, `1,3`, `1-3`, `1-2,4`.
pub fn parse_degree_list(s: &str) -> Result<Vec<usize>> {
    let bad = |tok: &str| {
        FoslsError::Config(format!(
            "bad degree token {tok:?}, expected e.g. 2, 1,3 or 1-3"
        ))
    };
    let mut out = Vec::new();
    for tok in s.split(',') {
        let tok = tok.trim();
        if let Some((a, b)) = tok.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad(tok))?;
            let b: usize = b.trim().parse().map_err(|_| bad(tok))?;
            if a > b {
                return Err(bad(tok));
            }
            out.extend(a..=b);
        } else {
            out.push(tok.parse().map_err(|_| bad(tok))?);
        }
    }
    if out.is_empty() {
        return Err(bad(s));
    }
    Ok(out)
}

/// Predicted decay orders `(e_u, e_gradu, e_phi)` for data in `H^s`
/// (`s = f64::INFINITY` for smooth data) and degrees `(p_s, p_v)`.
///
/// The `e_u` guarantee drops to `min(s+1, 2)` in the lowest-order
/// vector case `p_v = 1` because the duality argument loses one order
/// there; observed rates often exceed it.
pub fn predicted_rates(s: f64, p_s: usize, p_v: usize, family: Family) -> (f64, f64, f64) {
    debug_assert!(s > 0.0 && p_s >= 1 && p_v >= 1);
    let (p_s, p_v) = (p_s as f64, p_v as f64);
    let e_u = if p_v == 1.0 {
        (s + 1.0).min(2.0)
    } else {
        (s + 1.0).min(p_s).min(p_v + 1.0) + 1.0
    };
    let e_gradu = (s + 1.0).min(p_s).min(p_v + 1.0);
    let e_phi = match family {
        Family::RaviartThomas => (s + 1.0).min(p_s + 1.0).min(p_v),
        Family::BrezziDouglasMarini => (s + 1.0).min(p_s + 1.0).min(p_v + 1.0),
    };
    (e_u, e_gradu, e_phi)
}

/// Verdict for one norm of one combination.
#[derive(Debug, Clone, Copy)]
pub struct SummaryRow {
    pub norm: &'static str,
    pub predicted: f64,
    /// Last-interval decay rate; NaN when the errors hit roundoff and no
    /// rate can be measured (counts as FAIL rather than guessing).
    pub observed: f64,
    pub pass: bool,
}

/// Everything recorded for one `(p_s, p_v)` pair.
#[derive(Debug)]
pub struct ComboReport {
    pub p_s: usize,
    pub p_v: usize,
    /// One entry per level; empty when the combination aborted.
    pub reports: Vec<ErrorReport>,
    /// One row per norm in [`NORMS`] order; empty when aborted.
    pub rows: Vec<SummaryRow>,
    /// Why the combination aborted, if it did.
    pub failure: Option<String>,
}

/// Result of a whole study; `summary` mirrors `summary.csv`.
#[derive(Debug)]
pub struct StudyReport {
    pub combos: Vec<ComboReport>,
    pub summary: String,
}

impl StudyReport {
    /// True when every combination ran and every norm passed.
    pub fn all_pass(&self) -> bool {
        self.combos
            .iter()
            .all(|c| c.failure.is_none() && c.rows.iter().all(|r| r.pass))
    }
}

fn family_label(family: Family) -> &'static str {
    match family {
        Family::RaviartThomas => "RT",
        Family::BrezziDouglasMarini => "BDM",
    }
}

/// Runs the full sweep and writes all artifacts.
///
/// Returns `Err` only for config and I/O problems; a combination that
/// fails while running is recorded in its [`ComboReport`] and the rest
/// of the sweep continues.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    let case = config.validate()?;
    fs::create_dir_all(&config.out)?;

    if config.expected_rates {
        let mut table = String::from("case,family,ps,pv,norm,predicted\n");
        for (&p_s, &p_v) in iter_pairs(&config.ps, &config.pv) {
            let rates = predicted_rates(case.regularity(), p_s, p_v, config.family);
            for (norm, rate) in NORMS.iter().zip([rates.0, rates.1, rates.2]) {
                table.push_str(&format!(
                    "{},{},{},{},{},{:.3}\n",
                    case.name(),
                    family_label(config.family),
                    p_s,
                    p_v,
                    norm,
                    rate
                ));
            }
        }
        fs::write(config.out.join("expected-rates.csv"), table)?;
    }

    let mut combos = Vec::new();
    for (&p_s, &p_v) in iter_pairs(&config.ps, &config.pv) {
        combos.push(run_combo(config, &case, p_s, p_v));
    }

    let mut summary = String::from("case,family,ps,pv,norm,predicted,observed,verdict\n");
    let mut errors = String::new();
    for combo in &combos {
        let prefix = format!(
            "{},{},{},{}",
            case.name(),
            family_label(config.family),
            combo.p_s,
            combo.p_v
        );
        match &combo.failure {
            None => {
                for row in &combo.rows {
                    summary.push_str(&format!(
                        "{},{},{:.3},{:.3},{}\n",
                        prefix,
                        row.norm,
                        row.predicted,
                        row.observed,
                        if row.pass { "PASS" } else { "FAIL" }
                    ));
                }
            }
            Some(reason) => {
                let rates = predicted_rates(case.regularity(), combo.p_s, combo.p_v, config.family);
                for (norm, rate) in NORMS.iter().zip([rates.0, rates.1, rates.2]) {
                    summary.push_str(&format!("{prefix},{norm},{rate:.3},,ERROR\n"));
                }
                errors.push_str(&format!("{prefix}: {reason}\n"));
            }
        }
    }
    fs::write(config.out.join("summary.csv"), &summary)?;
    if !errors.is_empty() {
        fs::write(config.out.join("errors.log"), errors)?;
    }

    Ok(StudyReport { combos, summary })
}

fn run_combo(
    config: &StudyConfig,
    case: &ManufacturedCase,
    p_s: usize,
    p_v: usize,
) -> ComboReport {
    match combo_inner(config, case, p_s, p_v) {
        Ok((reports, rows)) => ComboReport { p_s, p_v, reports, rows, failure: None },
        Err(e) => ComboReport {
            p_s,
            p_v,
            reports: Vec::new(),
            rows: Vec::new(),
            failure: Some(e.to_string()),
        },
    }
}

fn combo_inner(
    config: &StudyConfig,
    case: &ManufacturedCase,
    p_s: usize,
    p_v: usize,
) -> Result<(Vec<ErrorReport>, Vec<SummaryRow>)> {
    let problem = ProblemConfig::new(config.gamma, case.bc(), config.family, p_s, p_v)?;

    // Size the finest level before assembling anything; space numbering
    // is cheap, assembly and solves are not.
    let finest = Discretization::new(Mesh::disk(config.n_fan, config.levels)?, problem)?;
    let n_finest = finest.num_free();
    drop(finest);
    if n_finest > DOF_GUARDRAIL && !config.force {
        return Err(FoslsError::Guardrail(format!(
            "ps={p_s} pv={p_v} reaches {n_finest} free DOFs at level {} (limit {DOF_GUARDRAIL})",
            config.levels
        )));
    }

    let mut reports = Vec::new();
    for level in 1..=config.levels {
        let disc = Discretization::new(Mesh::disk(config.n_fan, level)?, problem)?;
        let system = disc.assemble(|x| case.f(x), case.jump_radius())?;
        let solution = disc.solve(&system)?;
        reports.push(compute_errors(&disc, &solution, case)?);
    }

    let base = format!(
        "{}-{}-ps{}-pv{}",
        case.name(),
        config.family.name(),
        p_s,
        p_v
    );
    let mut csv = Vec::new();
    write_csv(&mut csv, 1, &reports)?;
    fs::write(config.out.join(format!("{base}.csv")), csv)?;

    let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
    let root_dof: Vec<f64> = reports.iter().map(|r| (r.dof_total as f64).sqrt()).collect();
    let rates = predicted_rates(case.regularity(), p_s, p_v, config.family);
    let errors_of = |norm: &str| -> Vec<f64> {
        reports
            .iter()
            .map(|r| match norm {
                "err_u" => r.err_u,
                "err_gradu" => r.err_gradu,
                _ => r.err_phi,
            })
            .collect()
    };

    let mut rows = Vec::new();
    for (norm, predicted) in NORMS.iter().zip([rates.0, rates.1, rates.2]) {
        let errs = errors_of(norm);
        let title = format!(
            "{} {} ps={} pv={} {}",
            case.name(),
            family_label(config.family),
            p_s,
            p_v,
            norm
        );
        let svg = convergence_chart(&title, norm, &h, &root_dof, &errs, predicted)?;
        fs::write(config.out.join(format!("{base}-{norm}.svg")), svg)?;

        let n = errs.len();
        let observed = (errs[n - 2] / errs[n - 1]).ln() / (h[n - 2] / h[n - 1]).ln();
        // A non-finite rate only happens when an error reaches roundoff;
        // desk-scale studies stay far above that, so treat it as FAIL
        // rather than inventing a number.
        let pass = observed.is_finite() && observed >= predicted - 0.25;
        rows.push(SummaryRow { norm, predicted, observed, pass });
    }
    Ok((reports, rows))
}
