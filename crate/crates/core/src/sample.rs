//! An i.i.d. sample of spin configurations over a common site set, and its
//! text matrix format.
//!
//! ```text
//! # ising-pairs sample
//! # dimension 2
//! # volume box 0,0 1
//! # seed 42
//! # step_cap 100000000
//! # draws 2
//! 1 -1 1 1 -1 -1 1 1 1
//! -1 -1 1 1 -1 1 1 -1 1
//! ```
//!
//! One row per draw, one column per site in lexicographic site order. The
//! volume line is either `box <center> <radius>` or `sites <p> <p> ...`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, SiteSet, VolumeSpec};
use crate::spin::{Spin, SpinConfiguration};

const MAGIC: &str = "# ising-pairs sample";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    sites: Arc<SiteSet>,
    // row-major, draws x sites
    spins: Vec<Spin>,
    seed: u64,
    step_cap: u64,
}

impl Sample {
    pub fn from_rows(
        sites: Arc<SiteSet>,
        rows: impl IntoIterator<Item = Vec<Spin>>,
        seed: u64,
        step_cap: u64,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("sample site set is empty"));
        }
        let m = sites.len();
        let mut spins = Vec::new();
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::invalid(format!(
                    "draw {k} has {} spins, expected {m}",
                    row.len()
                )));
            }
            spins.extend(row);
        }
        if spins.is_empty() {
            return Err(Error::invalid("a sample needs at least one draw"));
        }
        Ok(Sample {
            sites,
            spins,
            seed,
            step_cap,
        })
    }

    pub fn from_configurations(
        configs: &[SpinConfiguration],
        seed: u64,
        step_cap: u64,
    ) -> Result<Self> {
        let first = configs
            .first()
            .ok_or_else(|| Error::invalid("a sample needs at least one draw"))?;
        let sites = Arc::clone(first.sites());
        if configs.iter().any(|c| c.sites() != &sites) {
            return Err(Error::invalid("configurations disagree on their site set"));
        }
        Self::from_rows(
            sites,
            configs.iter().map(|c| c.spins().to_vec()),
            seed,
            step_cap,
        )
    }

    pub fn sites(&self) -> &Arc<SiteSet> {
        &self.sites
    }

    /// Number of draws `n`.
    pub fn len(&self) -> usize {
        self.spins.len() / self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_cap(&self) -> u64 {
        self.step_cap
    }

    pub fn row(&self, k: usize) -> &[Spin] {
        let m = self.sites.len();
        &self.spins[k * m..(k + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Spin]> + '_ {
        self.spins.chunks_exact(self.sites.len())
    }

    pub fn configuration(&self, k: usize) -> SpinConfiguration {
        SpinConfiguration::new(Arc::clone(&self.sites), self.row(k).to_vec())
            .expect("row length matches site count")
    }

    /// The same draws in the order given by `order` (a permutation of `0..n`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &k in order {
            if k >= self.len() || std::mem::replace(&mut seen[k], true) {
                return Err(Error::invalid("order is not a permutation of the draws"));
            }
        }
        if order.len() != self.len() {
            return Err(Error::invalid("order is not a permutation of the draws"));
        }
        Self::from_rows(
            Arc::clone(&self.sites),
            order.iter().map(|&k| self.row(k).to_vec()),
            self.seed,
            self.step_cap,
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dim = self.sites.dimension().expect("nonempty site set");
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "# dimension {dim}").unwrap();
        match VolumeSpec::describe(&self.sites) {
            VolumeSpec::Box { center, radius } => {
                writeln!(out, "# volume box {center} {radius}").unwrap()
            }
            VolumeSpec::Sites { sites } => {
                let list: Vec<String> = sites.iter().map(ToString::to_string).collect();
                writeln!(out, "# volume sites {}", list.join(" ")).unwrap()
            }
        }
        writeln!(out, "# seed {}", self.seed).unwrap();
        writeln!(out, "# step_cap {}", self.step_cap).unwrap();
        writeln!(out, "# draws {}", self.len()).unwrap();
        for row in self.rows() {
            let cells: Vec<&str> = row
                .iter()
                .map(|s| if s.is_up() { "1" } else { "-1" })
                .collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dimension = None;
        let mut volume: Option<SiteSet> = None;
        let mut seed = None;
        let mut step_cap = None;
        let mut draws: Option<usize> = None;
        let mut rows = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(Error::parse(1, format!("expected {MAGIC:?}"))),
        }
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let mut words = header.split_whitespace();
                let key = words.next().unwrap_or("");
                let rest: Vec<&str> = words.collect();
                let single = |what: &str| -> Result<u64> {
                    match rest.as_slice() {
                        [v] => v
                            .parse()
                            .map_err(|e| Error::parse(lineno, format!("bad {what}: {e}"))),
                        _ => Err(Error::parse(lineno, format!("{what} takes one value"))),
                    }
                };
                match key {
                    "dimension" => dimension = Some(single("dimension")? as usize),
                    "seed" => seed = Some(single("seed")?),
                    "step_cap" => step_cap = Some(single("step_cap")?),
                    "draws" => draws = Some(single("draws")? as usize),
                    "volume" => {
                        volume = Some(
                            parse_volume(&rest).map_err(|e| Error::parse(lineno, e.to_string()))?,
                        )
                    }
                    _ => {}
                }
                continue;
            }
            let sites = volume
                .as_ref()
                .ok_or_else(|| Error::parse(lineno, "data row before volume header"))?;
            let row = line
                .split_whitespace()
                .map(|c| {
                    c.parse::<i64>()
                        .map_err(|e| Error::parse(lineno, format!("bad spin {c:?}: {e}")))
                        .and_then(|v| {
                            Spin::from_value(v).map_err(|e| Error::parse(lineno, e.to_string()))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != sites.len() {
                return Err(Error::parse(
                    lineno,
                    format!("row has {} columns, expected {}", row.len(), sites.len()),
                ));
            }
            rows.push(row);
        }
        let sites = volume.ok_or_else(|| Error::parse(0, "missing volume header"))?;
        if let Some(d) = dimension {
            if sites.dimension() != Some(d) {
                return Err(Error::parse(0, "volume does not match declared dimension"));
            }
        }
        if let Some(n) = draws {
            if n != rows.len() {
                return Err(Error::parse(
                    0,
                    format!("header declares {n} draws, found {}", rows.len()),
                ));
            }
        }
        Self::from_rows(
            Arc::new(sites),
            rows,
            seed.ok_or_else(|| Error::parse(0, "missing seed header"))?,
            step_cap.ok_or_else(|| Error::parse(0, "missing step_cap header"))?,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_volume(words: &[&str]) -> Result<SiteSet> {
    match words {
        ["box", center, radius] => {
            let center: LatticePoint = center.parse()?;
            let radius: u32 = radius
                .parse()
                .map_err(|e| Error::invalid(format!("bad radius {radius:?}: {e}")))?;
            VolumeSpec::Box { center, radius }.to_sites()
        }
        ["sites", pts @ ..] if !pts.is_empty() => SiteSet::new(
            pts.iter()
                .map(|p| p.parse())
                .collect::<Result<Vec<LatticePoint>>>()?,
        ),
        _ => Err(Error::invalid(
            "volume must be `box <center> <radius>` or `sites <p>...`",
        )),
    }
}
