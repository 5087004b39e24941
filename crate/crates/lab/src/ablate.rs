//! Variant × seed grids, run on a pool of worker threads.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use olnl_core::Variant;

use crate::config::{self, Overrides, RunConfig};
use crate::error::Result;
use crate::report::{self, ReportRow};
use crate::runner::{self, RunOptions};

#[derive(Debug, Clone)]
pub struct Grid {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses the available parallelism.
    pub jobs: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { variants: Variant::ALL.to_vec(), seeds: vec![0, 1, 2], jobs: 0 }
    }
}

/// Resolves every cell of the grid up front so a bad override fails before
/// any training starts.
pub fn plan(file: Option<&Path>, base: &Overrides, grid: &Grid) -> Result<Vec<RunConfig>> {
    let mut out = Vec::new();
    for &seed in &grid.seeds {
        for &variant in &grid.variants {
            let o = Overrides { seed: Some(seed), variant: Some(variant), ..base.clone() };
            out.push(config::resolve(file, &o)?);
        }
    }
    Ok(out)
}

/// Runs each configuration into `root/<run name>` and returns the
/// directories in plan order.
pub fn run_all(configs: &[RunConfig], root: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    let workers = match jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(configs.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PathBuf>>>> = Mutex::new(configs.iter().map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let dir = root.join(cfg.run_name());
                let r = runner::run(cfg, &dir, &RunOptions::default()).map(|_| dir);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("workers joined").into_iter().map(|r| r.expect("every job ran")).collect()
}

pub fn ablate(file: Option<&Path>, base: &Overrides, grid: &Grid, root: &Path) -> Result<Vec<ReportRow>> {
    let configs = plan(file, base, grid)?;
    let dirs = run_all(&configs, root, grid.jobs)?;
    report::emit_report(&dirs, root)
}
