//! On-disk skeleton format: a JSON header, the entry paths as CSV and the
//! merge log as CSV, all in one directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{MergeEvent, Skeleton, SkeletonWindow};
use crate::error::{Error, Result};
use crate::metric_graph::GraphFile;
use crate::path_space::{read_csv, write_csv};

pub const HEADER_FILE: &str = "skeleton.json";
pub const PATHS_FILE: &str = "paths.csv";
pub const MERGES_FILE: &str = "merges.csv";

#[derive(Debug, Serialize, Deserialize)]
pub struct SkeletonHeader {
    pub dt: f64,
    pub first_index: i64,
    pub horizon_index: i64,
    pub entries: usize,
    pub merges: usize,
    pub window: Option<SkeletonWindow>,
    pub graph: GraphFile,
    pub r_max: f64,
}

pub fn write_skeleton(sk: &Skeleton, dir: &FsPath) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = SkeletonHeader {
        dt: sk.dt(),
        first_index: sk.first_index(),
        horizon_index: sk.horizon(),
        entries: sk.len(),
        merges: sk.merges().len(),
        window: sk.window().cloned(),
        graph: GraphFile::from_graph(sk.graph()),
        r_max: sk.graph().r_max(),
    };
    let mut w = BufWriter::new(File::create(dir.join(HEADER_FILE))?);
    serde_json::to_writer_pretty(&mut w, &header)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let paths: Vec<_> = sk.entries().iter().map(|e| &e.path).collect();
    write_csv(sk.graph(), &paths, BufWriter::new(File::create(dir.join(PATHS_FILE))?))?;

    let mut m = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(MERGES_FILE))?));
    m.write_record(["m", "n", "t_merge"])?;
    for ev in sk.merges() {
        m.write_record([ev.m.to_string(), ev.n.to_string(), sk.time(ev.t).to_string()])?;
    }
    m.flush()?;
    Ok(())
}

/// Reloads a skeleton and checks that the stored merge log matches the one
/// recomputed from the paths.
pub fn read_skeleton(dir: &FsPath) -> Result<Skeleton> {
    let header: SkeletonHeader =
        serde_json::from_reader(BufReader::new(File::open(dir.join(HEADER_FILE))?))?;
    let graph = Arc::new(header.graph.into_graph()?.with_r_max(header.r_max));
    let paths = read_csv(&graph, header.dt, BufReader::new(File::open(dir.join(PATHS_FILE))?))?;
    if paths.len() != header.entries {
        return Err(Error::Format(format!(
            "header lists {} entries, found {}",
            header.entries,
            paths.len()
        )));
    }
    let mut sk = Skeleton::new(graph, header.dt, paths)?;
    if let Some(w) = header.window {
        sk = sk.with_window(w);
    }

    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(dir.join(MERGES_FILE))?));
    let mut stored = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Format("short merge record".into()))
        };
        let bad = |_| Error::Format("bad merge record".into());
        stored.push(MergeEvent {
            m: parse(0)?.parse().map_err(bad)?,
            n: parse(1)?.parse().map_err(bad)?,
            t: crate::path_space::grid_index(parse(2)?.parse::<f64>().map_err(|_| {
                Error::Format("bad merge time".into())
            })?, header.dt),
        });
    }
    if stored != sk.merges() {
        return Err(Error::Format("merge log does not match the paths".into()));
    }
    Ok(sk)
}

#[cfg(test)]
mod tests {
    use super::super::tests::line_skeleton;
    use super::*;

    #[test]
    fn round_trip_preserves_paths_and_merges() {
        let sk = line_skeleton(
            0.001,
            &[(0, vec![0.0, 0.5, 1.0, 1.0]), (0, vec![2.0, 1.5, 1.0, 1.0]), (1, vec![-0.3, -0.1, 0.7])],
        );
        let dir = tempfile::tempdir().unwrap();
        write_skeleton(&sk, dir.path()).unwrap();
        let back = read_skeleton(dir.path()).unwrap();
        assert_eq!(back.entries(), sk.entries());
        assert_eq!(back.merges(), sk.merges());
        let text = std::fs::read_to_string(dir.path().join(MERGES_FILE)).unwrap();
        assert!(text.starts_with("m,n,t_merge\n0,1,0.002\n"));
    }

    #[test]
    fn tampered_merge_log_is_rejected() {
        let sk = line_skeleton(0.1, &[(0, vec![0.0, 1.0]), (0, vec![2.0, 1.0])]);
        let dir = tempfile::tempdir().unwrap();
        write_skeleton(&sk, dir.path()).unwrap();
        std::fs::write(dir.path().join(MERGES_FILE), "m,n,t_merge\n").unwrap();
        assert!(matches!(read_skeleton(dir.path()), Err(Error::Format(_))));
    }
}
