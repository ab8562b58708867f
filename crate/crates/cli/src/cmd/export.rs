use std::path::PathBuf;

use anyhow::{bail, Result};
use coalesce_flow::estimators::{read_reports_json, write_reports_csv};
use coalesce_flow::path_space::write_csv;
use coalesce_flow::skeleton::read_skeleton;

use super::estimate::REPORTS_JSON;
use crate::output::write_file_atomic;
use crate::Outcome;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Skeleton directory; exports every entry path as
    /// `path_id,t,edge_id,coord`.
    #[arg(long, conflicts_with = "reports")]
    pub skeleton: Option<PathBuf>,
    /// Estimate directory or reports JSON file; exports the summary CSV.
    #[arg(long)]
    pub reports: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: Args) -> Result<Outcome> {
    let bytes = match (&a.skeleton, &a.reports) {
        (Some(dir), None) => {
            let sk = read_skeleton(dir)?;
            let paths: Vec<_> = sk.entries().iter().map(|e| &e.path).collect();
            let mut buf = Vec::new();
            write_csv(sk.graph(), &paths, &mut buf)?;
            buf
        }
        (None, Some(src)) => {
            let file = if src.is_dir() { src.join(REPORTS_JSON) } else { src.clone() };
            let reports = read_reports_json(&file)?;
            let mut buf = Vec::new();
            write_reports_csv(&reports, &mut buf)?;
            buf
        }
        _ => bail!("pass exactly one of --skeleton or --reports"),
    };
    write_file_atomic(&a.out, &bytes)?;
    eprintln!("plot data -> {}", a.out.display());
    Ok(Outcome::Pass)
}
