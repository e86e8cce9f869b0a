//! Full trial analysis and its JSON / markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Group, Timepoint, TrialDataset};
use crate::error::{Result, StatsError};
use crate::lmm::{fit_lmm_random_intercept, LongRecord};
use crate::ols::{ancova, FitResult};
use crate::reliability::{cronbach_alpha, mean, sample_variance};
use crate::scales::{InstrumentRegistry, ScaleScore, SusScore, CERQ_SUBSCALES};
use crate::ttest::{paired_t_test, two_sample_t_test, TTestResult};

pub const ALPHA_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Descriptive {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        Some(Descriptive {
            n: xs.len(),
            mean: mean(xs),
            sd: if xs.len() > 1 { sample_variance(xs).sqrt() } else { 0.0 },
        })
    }
}

/// A section that may be skipped when its data are missing or degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Section<T> {
    Done(T),
    Skipped { reason: String },
}

impl<T> Section<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Section::Done(v),
            Err(e) => Section::Skipped { reason: e.to_string() },
        }
    }

    fn skipped(reason: &str) -> Self {
        Section::Skipped {
            reason: reason.to_string(),
        }
    }

    pub fn done(&self) -> Option<&T> {
        match self {
            Section::Done(v) => Some(v),
            Section::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub intervention_n: usize,
    pub control_n: usize,
    pub age: BTreeMap<Group, Descriptive>,
    pub age_test: Section<TTestResult>,
    /// Gender → (intervention count, control count).
    pub gender: BTreeMap<String, (usize, usize)>,
}

/// Group × timepoint descriptives for one score of one instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub instrument: String,
    pub score: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub group: Group,
    pub timepoint: Timepoint,
    pub stats: Descriptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeComparison {
    pub score: String,
    pub intervention_change: Descriptive,
    pub control_change: Descriptive,
    pub test: Section<TTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SusSummary {
    pub n: usize,
    pub total: Descriptive,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub usability: f64,
    pub learnability: f64,
    /// Mean contribution per item (0–4).
    pub item_contributions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaesisSummary {
    pub items: Vec<Descriptive>,
    pub total: Descriptive,
    pub cronbach_alpha: Section<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha_level: f64,
    pub baseline: Baseline,
    pub scores: Vec<ScoreSummary>,
    pub pss_ancova: Section<FitResult>,
    pub pss_paired: BTreeMap<Group, Section<TTestResult>>,
    pub vas_lmm: Section<FitResult>,
    pub vas_daily_means: BTreeMap<Group, Vec<(u32, f64)>>,
    pub cerq_changes: Vec<ChangeComparison>,
    pub geq: Vec<(String, Descriptive)>,
    pub sus: Section<SusSummary>,
    pub paesis: Section<PaesisSummary>,
}

struct Scored {
    id: String,
    group: Group,
    timepoint: Timepoint,
    score: ScaleScore,
    items: Vec<i32>,
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-person score for `(instrument, timepoint, score name)`.
fn by_person<'a>(
    scored: &'a [Scored],
    instrument: &str,
    tp: Timepoint,
    score: &str,
) -> BTreeMap<&'a str, (Group, f64)> {
    scored
        .iter()
        .filter(|s| s.score.instrument == instrument && s.timepoint == tp)
        .filter_map(|s| {
            s.score
                .values()
                .into_iter()
                .find(|(n, _)| n == score)
                .map(|(_, v)| (s.id.as_str(), (s.group, v)))
        })
        .collect()
}

/// Persons with both timepoints: `(group, t0, t2)`.
fn paired<'a>(scored: &'a [Scored], instrument: &str, score: &str) -> Vec<(&'a str, Group, f64, f64)> {
    let t0 = by_person(scored, instrument, Timepoint::T0, score);
    let t2 = by_person(scored, instrument, Timepoint::T2, score);
    t0.iter()
        .filter_map(|(id, (g, a))| t2.get(id).map(|(_, b)| (*id, *g, *a, *b)))
        .collect()
}

pub fn analyze_trial(ds: &TrialDataset, registry: &InstrumentRegistry) -> Result<AnalysisReport> {
    let mut scored = Vec::new();
    for r in &ds.scale_responses {
        let group = ds
            .group_of(&r.id)
            .ok_or_else(|| StatsError::DegenerateData(format!("unknown participant {}", r.id)))?;
        scored.push(Scored {
            id: r.id.clone(),
            group,
            timepoint: r.timepoint,
            score: registry.get(&r.instrument)?.score(&r.items)?,
            items: r.items.clone(),
        });
    }

    // baseline characteristics
    let ages = |g: Group| -> Vec<f64> {
        ds.participants.iter().filter(|p| p.group == g).map(|p| p.age).collect()
    };
    let mut age = BTreeMap::new();
    for g in [Group::Intervention, Group::Control] {
        if let Some(d) = Descriptive::of(&ages(g)) {
            age.insert(g, d);
        }
    }
    let mut gender: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for p in &ds.participants {
        let e = gender.entry(p.gender.clone()).or_default();
        match p.group {
            Group::Intervention => e.0 += 1,
            Group::Control => e.1 += 1,
        }
    }
    let baseline = Baseline {
        intervention_n: ages(Group::Intervention).len(),
        control_n: ages(Group::Control).len(),
        age,
        age_test: Section::from_result(two_sample_t_test(&ages(Group::Intervention), &ages(Group::Control))),
        gender,
    };

    // descriptives for every score present
    let mut keys: BTreeMap<(String, String), ()> = BTreeMap::new();
    for s in &scored {
        for (name, _) in s.score.values() {
            keys.insert((s.score.instrument.clone(), name), ());
        }
    }
    let mut scores = Vec::new();
    for (instrument, score) in keys.into_keys() {
        let mut cells = Vec::new();
        for g in [Group::Intervention, Group::Control] {
            for tp in [Timepoint::T0, Timepoint::T2] {
                let vals: Vec<f64> = by_person(&scored, &instrument, tp, &score)
                    .values()
                    .filter(|(gg, _)| *gg == g)
                    .map(|(_, v)| *v)
                    .collect();
                if let Some(stats) = Descriptive::of(&vals) {
                    cells.push(Cell { group: g, timepoint: tp, stats });
                }
            }
        }
        scores.push(ScoreSummary { instrument, score, cells });
    }

    // PSS-10: ANCOVA and within-group paired tests
    let pss = paired(&scored, "pss10", "total");
    let pss_ancova = if pss.is_empty() {
        Section::skipped("no PSS-10 pairs")
    } else {
        let post: Vec<f64> = pss.iter().map(|r| r.3).collect();
        let grp: Vec<f64> = pss.iter().map(|r| r.1.indicator()).collect();
        let pre: Vec<f64> = pss.iter().map(|r| r.2).collect();
        Section::from_result(ancova(&post, &grp, &pre))
    };
    let mut pss_paired = BTreeMap::new();
    for g in [Group::Intervention, Group::Control] {
        let rows: Vec<_> = pss.iter().filter(|r| r.1 == g).collect();
        let pre: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let post: Vec<f64> = rows.iter().map(|r| r.3).collect();
        pss_paired.insert(g, Section::from_result(paired_t_test(&pre, &post)));
    }

    // VAS
    let long: Vec<LongRecord> = ds
        .vas_records
        .iter()
        .filter_map(|r| {
            ds.group_of(&r.id).map(|g| LongRecord {
                id: r.id.clone(),
                group: g.indicator(),
                day: f64::from(r.day),
                y: r.vas,
            })
        })
        .collect();
    let vas_lmm = if long.is_empty() {
        Section::skipped("no VAS records")
    } else {
        Section::from_result(fit_lmm_random_intercept(&long))
    };
    let mut vas_daily_means = BTreeMap::new();
    for g in [Group::Intervention, Group::Control] {
        let mut days: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for r in &ds.vas_records {
            if ds.group_of(&r.id) == Some(g) {
                days.entry(r.day).or_default().push(r.vas);
            }
        }
        let series: Vec<(u32, f64)> = days.into_iter().map(|(d, v)| (d, mean(&v))).collect();
        if !series.is_empty() {
            vas_daily_means.insert(g, series);
        }
    }

    // CERQ change scores, intervention vs control
    let mut cerq_changes = Vec::new();
    for sub in CERQ_SUBSCALES {
        let rows = paired(&scored, "cerq", sub);
        let change = |g: Group| -> Vec<f64> { rows.iter().filter(|r| r.1 == g).map(|r| r.3 - r.2).collect() };
        let (a, b) = (change(Group::Intervention), change(Group::Control));
        if let (Some(da), Some(db)) = (Descriptive::of(&a), Descriptive::of(&b)) {
            cerq_changes.push(ChangeComparison {
                score: sub.to_string(),
                intervention_change: da,
                control_change: db,
                test: Section::from_result(two_sample_t_test(&a, &b)),
            });
        }
    }

    // experience measures (intervention arm, T2)
    let at_t2 = |name: &str| -> Vec<&Scored> {
        scored
            .iter()
            .filter(|s| s.score.instrument == name && s.timepoint == Timepoint::T2 && s.group == Group::Intervention)
            .collect()
    };
    let geq_rows = at_t2("geq_core");
    let mut geq = Vec::new();
    if let Some(first) = geq_rows.first() {
        for sub in &first.score.subscales {
            let vals: Vec<f64> = geq_rows.iter().filter_map(|s| s.score.subscale(&sub.name)).collect();
            if let Some(d) = Descriptive::of(&vals) {
                geq.push((sub.name.clone(), d));
            }
        }
    }

    let sus_rows = at_t2("sus");
    let sus = if sus_rows.is_empty() {
        Section::skipped("no SUS responses")
    } else {
        let totals: Vec<f64> = sus_rows.iter().filter_map(|s| s.score.total).collect();
        let contribs: Vec<[f64; 10]> = sus_rows.iter().map(|s| SusScore::contributions(&s.items)).collect();
        let mut means = [0.0; 10];
        for (j, m) in means.iter_mut().enumerate() {
            *m = contribs.iter().map(|c| c[j]).sum::<f64>() / contribs.len() as f64;
        }
        let from_means = SusScore::from_contributions(&means);
        Section::Done(SusSummary {
            n: totals.len(),
            total: Descriptive::of(&totals).expect("non-empty"),
            median: median(&totals),
            min: totals.iter().copied().fold(f64::INFINITY, f64::min),
            max: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            usability: from_means.usability,
            learnability: from_means.learnability,
            item_contributions: means.to_vec(),
        })
    };

    let paesis_rows = at_t2("paesis");
    let paesis = if paesis_rows.is_empty() {
        Section::skipped("no PAESIS responses")
    } else {
        let matrix: Vec<Vec<f64>> = paesis_rows
            .iter()
            .map(|s| s.items.iter().map(|&v| f64::from(v)).collect())
            .collect();
        let k = matrix[0].len();
        let items = (0..k)
            .filter_map(|j| Descriptive::of(&matrix.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let totals: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
        Section::Done(PaesisSummary {
            items,
            total: Descriptive::of(&totals).expect("non-empty"),
            cronbach_alpha: Section::from_result(cronbach_alpha(&matrix)),
        })
    };

    Ok(AnalysisReport {
        alpha_level: ALPHA_LEVEL,
        baseline,
        scores,
        pss_ancova,
        pss_paired,
        vas_lmm,
        vas_daily_means,
        cerq_changes,
        geq,
        sus,
        paesis,
    })
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn star(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < ALPHA_LEVEL {
        "*"
    } else {
        ""
    }
}

fn ms(d: &Descriptive) -> String {
    format!("{:.2}±{:.2}", d.mean, d.sd)
}

fn fit_table(out: &mut String, fit: &FitResult) {
    let stat = match fit.inference {
        crate::ols::Inference::StudentT { .. } => "t",
        crate::ols::Inference::WaldZ => "z",
    };
    let _ = writeln!(out, "| term | estimate | SE | {stat} | p |\n|---|---|---|---|---|");
    for c in fit.table() {
        let _ = writeln!(
            out,
            "| {} | {:.4} | {:.4} | {:.3} | {}{} |",
            c.term,
            c.estimate,
            c.std_error,
            c.statistic,
            fmt_p(c.p_value),
            star(c.p_value)
        );
    }
    match fit.inference {
        crate::ols::Inference::StudentT { dof } => {
            let _ = writeln!(out, "\nResidual dof: {dof}.");
        }
        crate::ols::Inference::WaldZ => {
            let _ = writeln!(out, "\np-values use the Wald z normal approximation.");
        }
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json` and `report.md` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| StatsError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.json"), self.to_json()).map_err(io)?;
        std::fs::write(dir.join("report.md"), self.to_markdown()).map_err(io)?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "# Trial analysis\n\nAll tests two-tailed, α = {}.\n", self.alpha_level);

        let b = &self.baseline;
        let _ = writeln!(o, "## Participants\n");
        let _ = writeln!(
            o,
            "| variable | intervention (N={}) | control (N={}) | p |\n|---|---|---|---|",
            b.intervention_n, b.control_n
        );
        let genders: Vec<String> = b.gender.keys().cloned().collect();
        let counts = |f: fn(&(usize, usize)) -> usize| -> String {
            b.gender.values().map(|c| f(c).to_string()).collect::<Vec<_>>().join("/")
        };
        let _ = writeln!(o, "| gender ({}) | {} | {} | |", genders.join("/"), counts(|c| c.0), counts(|c| c.1));
        let age = |g| b.age.get(&g).map_or("-".into(), ms);
        let p = b.age_test.done().map_or("-".into(), |t| fmt_p(t.p));
        let _ = writeln!(o, "| age | {} | {} | {} |", age(Group::Intervention), age(Group::Control), p);
        o.push('\n');

        let _ = writeln!(o, "## Scores by group and timepoint\n");
        let _ = writeln!(
            o,
            "| instrument | score | intervention T0 | intervention T2 | control T0 | control T2 |\n|---|---|---|---|---|---|"
        );
        for s in &self.scores {
            let cell = |g, tp| {
                s.cells
                    .iter()
                    .find(|c| c.group == g && c.timepoint == tp)
                    .map_or("-".to_string(), |c| ms(&c.stats))
            };
            let _ = writeln!(
                o,
                "| {} | {} | {} | {} | {} | {} |",
                s.instrument,
                s.score,
                cell(Group::Intervention, Timepoint::T0),
                cell(Group::Intervention, Timepoint::T2),
                cell(Group::Control, Timepoint::T0),
                cell(Group::Control, Timepoint::T2)
            );
        }
        o.push('\n');

        let _ = writeln!(o, "## PSS-10 ANCOVA (T2 ~ group + T0)\n");
        match &self.pss_ancova {
            Section::Done(f) => fit_table(&mut o, f),
            Section::Skipped { reason } => {
                let _ = writeln!(o, "Skipped: {reason}.");
            }
        }
        for (g, t) in &self.pss_paired {
            if let Section::Done(t) = t {
                let _ = writeln!(
                    o,
                    "- paired T0→T2, {g}: Δ = {:.2}, t({}) = {:.3}, p = {}",
                    t.mean_difference,
                    t.dof,
                    t.t,
                    fmt_p(t.p)
                );
            }
        }
        o.push('\n');

        let _ = writeln!(o, "## VAS mixed model (random intercept, ML)\n");
        match &self.vas_lmm {
            Section::Done(f) => {
                fit_table(&mut o, f);
                if let Some(vc) = f.variance_components {
                    let _ = writeln!(o, "σ²_u = {:.4}, σ²_e = {:.4}.", vc.sigma2_u, vc.sigma2_e);
                }
            }
            Section::Skipped { reason } => {
                let _ = writeln!(o, "Skipped: {reason}.");
            }
        }
        o.push('\n');

        if !self.cerq_changes.is_empty() {
            let _ = writeln!(
                o,
                "## CERQ change scores (T2 − T0)\n\n| subscale | intervention | control | t | p |\n|---|---|---|---|---|"
            );
            for c in &self.cerq_changes {
                let (t, p) = c.test.done().map_or(("-".into(), "-".into()), |t| {
                    (format!("{:.3}", t.t), format!("{}{}", fmt_p(t.p), star(t.p)))
                });
                let _ = writeln!(
                    o,
                    "| {} | {} | {} | {t} | {p} |",
                    c.score,
                    ms(&c.intervention_change),
                    ms(&c.control_change)
                );
            }
            o.push('\n');
        }

        if !self.geq.is_empty() {
            let _ = writeln!(o, "## GEQ-Core\n\n| dimension | M±SD |\n|---|---|");
            for (name, d) in &self.geq {
                let _ = writeln!(o, "| {name} | {} |", ms(d));
            }
            o.push('\n');
        }

        if let Section::Done(s) = &self.sus {
            let _ = writeln!(o, "## SUS\n");
            let header: Vec<String> = (1..=10).map(|i| format!("Q{i}")).collect();
            let _ = writeln!(o, "| | {} |\n|---|{}", header.join(" | "), "---|".repeat(10));
            let vals: Vec<String> = s.item_contributions.iter().map(|v| format!("{v:.2}")).collect();
            let _ = writeln!(o, "| mean contribution | {} |\n", vals.join(" | "));
            let _ = writeln!(
                o,
                "| mean | SD | min | max | median | usability | learnability |\n|---|---|---|---|---|---|---|"
            );
            let _ = writeln!(
                o,
                "| {:.2} | {:.2} | {:.1} | {:.1} | {:.1} | {:.3} | {:.1} |\n",
                s.total.mean, s.total.sd, s.min, s.max, s.median, s.usability, s.learnability
            );
        }

        if let Section::Done(p) = &self.paesis {
            let _ = writeln!(o, "## PAESIS\n");
            let header: Vec<String> = (1..=p.items.len()).map(|i| format!("Q{i}")).collect();
            let _ = writeln!(
                o,
                "| | {} | total |\n|---|{}---|",
                header.join(" | "),
                "---|".repeat(p.items.len())
            );
            let vals: Vec<String> = p.items.iter().map(ms).collect();
            let _ = writeln!(o, "| M±SD | {} | {} |\n", vals.join(" | "), ms(&p.total));
            match &p.cronbach_alpha {
                Section::Done(a) => {
                    let _ = writeln!(o, "Cronbach's α = {a:.3}.");
                }
                Section::Skipped { reason } => {
                    let _ = writeln!(o, "Cronbach's α not computed: {reason}.");
                }
            }
        }
        o
    }
}
