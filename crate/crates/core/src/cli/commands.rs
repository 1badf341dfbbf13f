use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Prepared;
use super::CommandKind;
use crate::error::Result;
use crate::experiments::{
    explore_graph_replicas, explore_tree_replicas, limit_records, neighbourhood_records,
    summaries_histogram, ExplorationSummary,
};
use crate::local_limit::{
    convergence_report, tv_with_uncertainty, CodeHistogram, CodeOptions, TvEstimate,
};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub workers: usize,
    pub out: PathBuf,
    /// `derive` only writes a file when an output directory was given.
    pub write_files: bool,
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn create(dir: &Path) -> Result<Output<'_>> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, contents)?;
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    fn jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut text = String::new();
        for r in rows {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn histogram(&self, name: &str, h: &CodeHistogram) -> Result<()> {
        let mut text = h.to_json()?;
        text.push('\n');
        self.write(name, &text)
    }
}

pub fn run_command(kind: CommandKind, p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    match kind {
        CommandKind::Derive => derive(p, opts, stdout),
        CommandKind::Convergence => convergence(p, opts, stdout),
        CommandKind::LimitSample => limit_sample(p, opts, stdout),
        CommandKind::NeighbourhoodSample => neighbourhood_sample(p, opts, stdout),
        CommandKind::Explore => explore(p, opts, stdout),
    }
}

#[derive(Serialize)]
struct DeriveOutput<'a> {
    degree: &'a crate::models::DegreeSpec,
    weight: &'a crate::models::WeightModel,
    #[serde(flatten)]
    derived: &'a crate::models::DerivedQuantities,
}

fn derive(p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    let d = &p.derived;
    writeln!(stdout, "nu={}", d.nu)?;
    match d.lambda {
        Some(l) => writeln!(stdout, "lambda={l}")?,
        None => writeln!(stdout, "lambda=none")?,
    }
    writeln!(stdout, "zeta_star={}", d.zeta_star)?;
    writeln!(stdout, "zeta={}", d.zeta)?;
    writeln!(stdout, "q_star={}", d.q_star)?;
    writeln!(stdout, "mean_degree={}", d.mean_degree)?;
    writeln!(stdout, "regular={}", d.regular)?;
    match d.cutoff {
        Some(k) => writeln!(stdout, "cutoff={k}")?,
        None => writeln!(stdout, "cutoff=none")?,
    }
    if opts.write_files {
        Output::create(&opts.out)?.json(
            "derive.json",
            &DeriveOutput {
                degree: &p.config.degree,
                weight: &p.config.weight,
                derived: d,
            },
        )?;
    }
    Ok(())
}

fn convergence(p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    let settings = p.convergence_settings(opts.workers, p.deadline());
    let report = convergence_report(&settings)?;
    let out = Output::create(&opts.out)?;
    let csv = report.to_csv();
    out.write("report.csv", &csv)?;
    out.json("report.json", &report)?;
    out.histogram("histograms/limit.json", &report.limit_hist)?;
    for h in &report.graph_hists {
        let n = h.meta.n.unwrap_or(0);
        out.histogram(&format!("histograms/graph_n{n}.json"), h)?;
    }
    write!(stdout, "{csv}")?;
    Ok(())
}

fn limit_sample(p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    let c = &p.config;
    let deadline = p.deadline();
    let code = p.code_options();
    let records = limit_records(&p.limit_sampler(), c.radius, c.samples, c.seed, opts.workers, &code)?;
    deadline.check("limit sampling")?;
    let mut hist = CodeHistogram::new(p.meta(None, &code));
    for r in &records {
        hist.add(crate::local_limit::CanonicalCode::from_hex(&r.code)?);
    }
    let out = Output::create(&opts.out)?;
    out.jsonl("limit_trees.jsonl", &records)?;
    out.histogram("limit_histogram.json", &hist)?;
    let s = records.len() as f64;
    let frac = |f: &dyn Fn(&crate::experiments::LimitRecord) -> bool| {
        records.iter().filter(|r| f(r)).count() as f64 / s
    };
    writeln!(stdout, "samples={}", records.len())?;
    writeln!(stdout, "infinite_frac={:.6}", frac(&|r| r.infinite))?;
    writeln!(stdout, "black_frac={:.6}", frac(&|r| r.red == 0))?;
    writeln!(stdout, "support={}", hist.support())?;
    Ok(())
}

fn neighbourhood_sample(p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    let c = &p.config;
    let deadline = p.deadline();
    let code = p.code_options();
    let mut outputs = Vec::new();
    for (i, &n) in c.n_grid.iter().enumerate() {
        deadline.check("neighbourhood sampling")?;
        let records = neighbourhood_records(
            n,
            i,
            &p.degree,
            &c.weight,
            c.radius,
            c.samples,
            c.graphs_per_point,
            c.seed,
            opts.workers,
            &code,
        )?;
        let mut hist = CodeHistogram::new(p.meta(Some(n), &code));
        for r in &records {
            hist.add(crate::local_limit::CanonicalCode::from_hex(&r.code)?);
        }
        outputs.push((n, records, hist));
    }
    let out = Output::create(&opts.out)?;
    writeln!(stdout, "n,samples,black_frac,connected_frac,support")?;
    for (n, records, hist) in &outputs {
        out.jsonl(&format!("neighbourhoods_n{n}.jsonl"), records)?;
        out.histogram(&format!("neighbourhood_histogram_n{n}.json"), hist)?;
        let s = records.len() as f64;
        let black = records.iter().filter(|r| r.red == 0).count() as f64 / s;
        let connected = records.iter().filter(|r| r.connected).count() as f64 / s;
        writeln!(stdout, "{n},{},{black:.6},{connected:.6},{}", records.len(), hist.support())?;
    }
    Ok(())
}

const SUMMARY_HEADER: &str =
    "side,n,replica,steps,exhausted,d_v_star,active,type_i,type_ii,type_iii,type_iv,in_branch_window,off_branch";

fn summary_rows(out: &mut String, n: Option<usize>, rows: &[ExplorationSummary]) {
    for s in rows {
        let n = n.map_or_else(|| "limit".to_string(), |n| n.to_string());
        let d = s.d_v_star.map_or_else(String::new, |d| format!("{d:.9}"));
        let (counts, window, off) = match &s.classification {
            Some(c) => {
                let (w, o) = crate::exploration::stub_counts(c);
                (c.counts.map(|x| x.to_string()), w.to_string(), o.to_string())
            }
            None => (Default::default(), String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{n},{},{},{},{d},{},{},{window},{off}",
            s.side,
            s.replica,
            s.steps,
            s.exhausted,
            s.active,
            counts.join(",")
        )
        .ok();
    }
}

fn explore(p: &Prepared, opts: &RunOptions, stdout: &mut dyn Write) -> Result<()> {
    let c = &p.config;
    let deadline = p.deadline();
    let tree_settings = p.exploration_settings(0, opts.workers, deadline);
    let trees = explore_tree_replicas(&tree_settings)?;
    let code = CodeOptions {
        include_colour: false,
        ..p.code_options()
    };
    let tree_hist = summaries_histogram(&trees, p.meta(None, &code))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    summary_rows(&mut summary, None, &trees);
    let mut tv_csv = String::from("n,samples,tv,tv_se,tv_null,tv_null_se\n");
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(t) = trees.first().and_then(|s| s.trace.clone()) {
        files.push(("trace_tree.csv".to_string(), t));
    }
    let mut hists = vec![("explored_tree.json".to_string(), tree_hist.clone())];
    for (i, &n) in c.n_grid.iter().enumerate() {
        let graphs = explore_graph_replicas(&p.exploration_settings(n, opts.workers, deadline))?;
        summary_rows(&mut summary, Some(n), &graphs);
        if let Some(t) = graphs.first().and_then(|s| s.trace.clone()) {
            files.push((format!("trace_graph_n{n}.csv"), t));
        }
        let h = summaries_histogram(&graphs, p.meta(Some(n), &code))?;
        let TvEstimate { tv, se, null_mean, null_se } = tv_with_uncertainty(
            &h,
            &tree_hist,
            c.bootstrap,
            &RngStream::new(c.seed, (1 << 59) + i as u64),
        )?;
        writeln!(tv_csv, "{n},{},{tv:.6},{se:.6},{null_mean:.6},{null_se:.6}", graphs.len()).ok();
        hists.push((format!("explored_graph_n{n}.json"), h));
    }
    let out = Output::create(&opts.out)?;
    out.write("explore_summary.csv", &summary)?;
    out.write("explore_tv.csv", &tv_csv)?;
    for (name, text) in &files {
        out.write(name, text)?;
    }
    for (name, h) in &hists {
        out.histogram(name, h)?;
    }
    write!(stdout, "{tv_csv}")?;
    Ok(())
}
