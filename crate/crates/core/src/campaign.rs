//! Multi-seed search campaigns over grids of `(s, t)` layouts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::discretize::{discretize, DiscretizeConfig, DiscretizeFailure};
use crate::error::{Error, Result};
use crate::layout::{enumerate_st, expand, GenCsLayout};
use crate::mmt::{build_mmt, Mmt, Shape};
use crate::pdfile::PdRecord;
use crate::solver::{al_solve, SolverConfig, Status};
use crate::transforms::{jacobian_rank, DEFAULT_RANK_TOL};

/// Which `(s, t)` cells to run: every admissible pair or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StSelection {
    All(AllKeyword),
    List(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllKeyword {
    All,
}

impl Default for StSelection {
    fn default() -> Self {
        StSelection::All(AllKeyword::All)
    }
}

impl StSelection {
    pub fn all() -> Self {
        Self::default()
    }

    /// Parses `all` or `s,t[;s,t...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        let mut list = Vec::new();
        for pair in text.split(';').filter(|p| !p.trim().is_empty()) {
            let nums: Vec<&str> = pair.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Config(format!("bad (s,t) pair `{pair}`")));
            if nums.len() != 2 {
                return Err(Error::Config(format!("bad (s,t) pair `{pair}`")));
            }
            list.push([parse(nums[0])?, parse(nums[1])?]);
        }
        if list.is_empty() {
            return Err(Error::Config("empty (s,t) list".into()));
        }
        Ok(StSelection::List(list))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretizeSection {
    pub enabled: bool,
    pub h_scale: f64,
    pub rounding_threshold: f64,
}

impl Default for DiscretizeSection {
    fn default() -> Self {
        let d = DiscretizeConfig::default();
        DiscretizeSection { enabled: true, h_scale: d.h_scale, rounding_threshold: d.rounding_threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankSection {
    pub enabled: bool,
    pub tol: f64,
}

impl Default for RankSection {
    fn default() -> Self {
        RankSection { enabled: true, tol: DEFAULT_RANK_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    /// `[m, p, n]`.
    pub shape: [usize; 3],
    pub rank: usize,
    #[serde(default)]
    pub st: StSelection,
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub discretize: DiscretizeSection,
    #[serde(default)]
    pub rank_analysis: RankSection,
    /// Where PD files and the summary go; nothing is written when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; the global pool size when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl CampaignConfig {
    pub fn new(shape: [usize; 3], rank: usize, st: StSelection, seeds: usize) -> Self {
        CampaignConfig {
            shape,
            rank,
            st,
            seeds,
            base_seed: 0,
            solver: SolverConfig::default(),
            discretize: DiscretizeSection::default(),
            rank_analysis: RankSection::default(),
            output_dir: None,
            workers: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("campaign configs serialize")
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.shape[0], self.shape[1], self.shape[2])
    }

    pub fn discretize_config(&self) -> DiscretizeConfig {
        DiscretizeConfig {
            h_scale: self.discretize.h_scale,
            rounding_threshold: self.discretize.rounding_threshold,
            solver: self.solver,
        }
    }

    /// The admissible layouts of this campaign, in table order.
    pub fn layouts(&self) -> Result<Vec<GenCsLayout>> {
        let shape = self.shape()?;
        let all = enumerate_st(self.rank);
        let pairs: Vec<(usize, usize)> = match &self.st {
            StSelection::All(_) => all,
            StSelection::List(list) => {
                let mut chosen = Vec::new();
                for &[s, t] in list {
                    if !all.contains(&(s, t)) {
                        return Err(Error::Config(format!(
                            "(s,t) = ({s},{t}) is not admissible for r = {}: need s + 3t ≤ r",
                            self.rank
                        )));
                    }
                    if !chosen.contains(&(s, t)) {
                        chosen.push((s, t));
                    }
                }
                all.into_iter().filter(|p| chosen.contains(p)).collect()
            }
        };
        pairs
            .into_iter()
            .map(|(s, t)| GenCsLayout::new(shape, self.rank, s, t).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.rank_analysis.enabled && !(self.rank_analysis.tol > 0.0 && self.rank_analysis.tol < 1.0) {
            return Err(Error::Config("rank tolerance must lie in (0, 1)".into()));
        }
        self.solver.validate()?;
        if self.discretize.enabled {
            self.discretize_config().validate()?;
        }
        self.layouts()?;
        Ok(())
    }
}

/// Result of one `(layout, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub s: usize,
    pub t: usize,
    pub seed: u64,
    pub status: Status,
    pub cost: f64,
    pub iterations: usize,
    pub rank: Option<usize>,
    pub practical: bool,
    pub discretize_failure: Option<DiscretizeFailure>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub r_cs: usize,
    pub s: usize,
    pub t: usize,
    pub jac_rows: usize,
    pub jac_cols: usize,
    pub rank_min: Option<usize>,
    pub rank_max: Option<usize>,
    pub rank_distinct: usize,
    pub n_exact: usize,
    pub n_practical: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub shape: Shape,
    pub rank: usize,
    pub seeds: usize,
    pub rows: Vec<SummaryRow>,
    pub cells: Vec<CellReport>,
    /// PD files written, in cell order.
    pub files: Vec<PathBuf>,
}

pub const CSV_HEADER: &str = "r_cs,s,t,jac_rows,jac_cols,rank_min,rank_max,rank_distinct,n_exact,n_practical,seconds";

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CampaignSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{:.3}",
                r.r_cs,
                r.s,
                r.t,
                r.jac_rows,
                r.jac_cols,
                opt(r.rank_min),
                opt(r.rank_max),
                r.rank_distinct,
                r.n_exact,
                r.n_practical,
                r.seconds
            );
        }
        out
    }

    /// The CSV without its trailing timing column.
    pub fn to_csv_untimed(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
            .map(|l| format!("{l}\n"))
            .collect()
    }

    /// Aligned text table in CSV row order. Layouts without any exact
    /// decomposition are left out and counted in a footer; the CSV keeps them.
    pub fn to_table(&self) -> String {
        let header = ["r_cs", "s", "t", "size(J)", "rank min", "max", "#", "#exact", "pract.", "sec"];
        let body: Vec<[String; 10]> = self
            .rows
            .iter()
            .filter(|r| r.n_exact > 0)
            .map(|r| {
                [
                    r.r_cs.to_string(),
                    r.s.to_string(),
                    r.t.to_string(),
                    format!("{} x {}", r.jac_rows, r.jac_cols),
                    r.rank_min.map_or("-".into(), |x| x.to_string()),
                    r.rank_max.map_or("-".into(), |x| x.to_string()),
                    r.rank_distinct.to_string(),
                    r.n_exact.to_string(),
                    r.n_practical.to_string(),
                    format!("{:.1}", r.seconds),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &body {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = format!("T_{} r={} seeds={}\n", self.shape.label(), self.rank, self.seeds);
        out += &line(&header.map(String::from));
        out += &"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1));
        out.push('\n');
        for row in &body {
            out += &line(row);
        }
        let omitted = self.rows.len() - body.len();
        if omitted > 0 {
            let _ = writeln!(out, "({omitted} layouts without exact decompositions omitted)");
        }
        out
    }

    pub fn total_exact(&self) -> usize {
        self.rows.iter().map(|r| r.n_exact).sum()
    }

    pub fn total_practical(&self) -> usize {
        self.rows.iter().map(|r| r.n_practical).sum()
    }

    pub fn row(&self, s: usize, t: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.s == s && r.t == t)
    }
}

/// File name of the decomposition found for one cell.
pub fn pd_file_name(layout: &GenCsLayout, seed: u64, practical: bool) -> String {
    format!(
        "{}_r{}_s{}_t{}_seed{}{}.json",
        layout.shape().label(),
        layout.r(),
        layout.s(),
        layout.t(),
        seed,
        if practical { "_practical" } else { "" }
    )
}

struct CellResult {
    report: CellReport,
    exact: Option<PdRecord>,
    practical: Option<PdRecord>,
}

fn run_cell(
    config: &CampaignConfig,
    tensor: &Mmt,
    layout: &GenCsLayout,
    seed: u64,
    dconf: &DiscretizeConfig,
) -> Result<CellResult> {
    let start = Instant::now();
    let outcome = al_solve(tensor, layout, &config.solver, seed)?;
    let mut report = CellReport {
        s: layout.s(),
        t: layout.t(),
        seed,
        status: outcome.status,
        cost: outcome.cost(),
        iterations: outcome.iterations,
        rank: None,
        practical: false,
        discretize_failure: None,
        seconds: 0.0,
    };
    let (mut exact, mut practical) = (None, None);
    if outcome.is_exact() {
        if config.rank_analysis.enabled {
            report.rank = Some(jacobian_rank(&outcome.point, tensor, config.rank_analysis.tol)?.rank);
        }
        let structure = (!layout.is_unstructured()).then(|| (layout.s(), layout.t()));
        let mut prov = Map::new();
        prov.insert("seed".into(), json!(seed));
        prov.insert("solver".into(), serde_json::to_value(config.solver).expect("config serializes"));
        prov.insert("status".into(), json!(outcome.status));
        prov.insert("cost".into(), json!(outcome.cost()));
        prov.insert("iterations".into(), json!(outcome.iterations));
        if let Some(rank) = report.rank {
            prov.insert("jacobian_rank".into(), json!(rank));
        }
        if config.discretize.enabled {
            match discretize(&outcome.point, tensor, dconf) {
                Ok(mut rec) => {
                    rec.provenance.insert("seed".into(), json!(seed));
                    report.practical = true;
                    practical = Some(rec);
                }
                Err(Error::Discretize(f)) => {
                    prov.insert("discretize_failure".into(), serde_json::to_value(f).expect("serializes"));
                    report.discretize_failure = Some(f);
                }
                Err(e) => return Err(e),
            }
        }
        exact = Some(PdRecord::new(expand(&outcome.point), structure, prov)?);
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(CellResult { report, exact, practical })
}

/// Runs every `(layout, seed)` cell, writes exact and practical PDs plus
/// `summary.csv` and `summary.txt` when an output directory is set.
///
/// Cells run on a worker pool; results are gathered in cell order and all
/// files are written by the calling thread.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignSummary> {
    config.validate()?;
    let shape = config.shape()?;
    let tensor = build_mmt(shape.m, shape.p, shape.n)?;
    let layouts = config.layouts()?;
    let dconf = config.discretize_config();
    let cells: Vec<(usize, u64)> =
        (0..layouts.len()).flat_map(|li| (0..config.seeds as u64).map(move |k| (li, config.base_seed + k))).collect();

    let work = || -> Vec<Result<CellResult>> {
        cells.par_iter().map(|&(li, seed)| run_cell(config, &tensor, &layouts[li], seed, &dconf)).collect()
    };
    let results = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };

    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows: Vec<SummaryRow> = layouts
        .iter()
        .map(|l| SummaryRow {
            r_cs: l.r_cs(),
            s: l.s(),
            t: l.t(),
            jac_rows: shape.tensor_len(),
            jac_cols: l.n_vars(),
            rank_min: None,
            rank_max: None,
            rank_distinct: 0,
            n_exact: 0,
            n_practical: 0,
            seconds: 0.0,
        })
        .collect();
    let mut ranks: Vec<Vec<usize>> = vec![Vec::new(); layouts.len()];
    let mut reports = Vec::with_capacity(cells.len());
    let mut files = Vec::new();
    for (&(li, seed), result) in cells.iter().zip(results) {
        let CellResult { report, exact, practical } = result?;
        let row = &mut rows[li];
        row.seconds += report.seconds;
        if let Some(rec) = exact {
            row.n_exact += 1;
            ranks[li].extend(report.rank);
            if let Some(dir) = &config.output_dir {
                let path = dir.join(pd_file_name(&layouts[li], seed, false));
                rec.write(&path)?;
                files.push(path);
            }
        }
        if let Some(rec) = practical {
            row.n_practical += 1;
            if let Some(dir) = &config.output_dir {
                let path = dir.join(pd_file_name(&layouts[li], seed, true));
                rec.write(&path)?;
                files.push(path);
            }
        }
        reports.push(report);
    }
    for (row, mut rk) in rows.iter_mut().zip(ranks) {
        rk.sort_unstable();
        row.rank_min = rk.first().copied();
        row.rank_max = rk.last().copied();
        rk.dedup();
        row.rank_distinct = rk.len();
    }
    let summary = CampaignSummary { shape, rank: config.rank, seeds: config.seeds, rows, cells: reports, files };
    if let Some(dir) = &config.output_dir {
        std::fs::write(dir.join("summary.csv"), summary.to_csv())?;
        std::fs::write(dir.join("summary.txt"), summary.to_table())?;
        let cells: Value = serde_json::to_value(&summary.cells)?;
        std::fs::write(dir.join("cells.json"), serde_json::to_string_pretty(&cells)? + "\n")?;
    }
    Ok(summary)
}
