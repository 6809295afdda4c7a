//! Pairwise potentials on a finite volume of `Z^d`.
//!
//! A [`PairwisePotential`] stores `J(i, j)` once per unordered pair of sites of
//! its volume `Λ`, sparsely: pairs not stored have coupling zero, and every
//! site outside `Λ` is decoupled from everything.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticePoint, SiteSet, VolumeSpec};

/// Row-sum coefficient `r = max_i Σ_j |J(i,j)|` and whether `r < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DobrushinCoefficient {
    pub r: f64,
    pub dobrushin_satisfied: bool,
}

impl DobrushinCoefficient {
    fn new(r: f64) -> Self {
        DobrushinCoefficient {
            r,
            dobrushin_satisfied: r < 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwisePotential {
    volume: Arc<SiteSet>,
    // keyed by volume indices (a, b) with a < b; values are nonzero
    couplings: BTreeMap<(usize, usize), f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PairwisePotential {
    /// Builds a potential from edge records. Zero values are dropped; a pair
    /// listed twice, a self-pair, a non-finite value or an endpoint outside the
    /// volume is an error.
    pub fn new(
        volume: SiteSet,
        edges: impl IntoIterator<Item = (LatticePoint, LatticePoint, f64)>,
    ) -> Result<Self> {
        if volume.is_empty() {
            return Err(Error::invalid("potential volume is empty"));
        }
        let mut couplings = BTreeMap::new();
        for (i, j, value) in edges {
            if !value.is_finite() {
                return Err(Error::invalid(format!(
                    "coupling J({i}; {j}) = {value} is not finite"
                )));
            }
            let a = volume
                .index_of(&i)
                .ok_or_else(|| Error::invalid(format!("edge endpoint {i} outside the volume")))?;
            let b = volume
                .index_of(&j)
                .ok_or_else(|| Error::invalid(format!("edge endpoint {j} outside the volume")))?;
            if a == b {
                return Err(Error::invalid(format!("self-coupling at {i}")));
            }
            let key = (a.min(b), a.max(b));
            if couplings.contains_key(&key) {
                return Err(Error::invalid(format!("pair ({i}; {j}) listed twice")));
            }
            if value != 0.0 {
                couplings.insert(key, value);
            }
        }
        Ok(Self::from_indexed(Arc::new(volume), couplings))
    }

    /// The zero potential on `volume`.
    pub fn zero(volume: SiteSet) -> Self {
        Self::from_indexed(Arc::new(volume), BTreeMap::new())
    }

    /// Every pair of sites at max-norm distance 1 inside `volume` gets `coupling`.
    pub fn nearest_neighbor(volume: SiteSet, coupling: f64) -> Result<Self> {
        let pts = volume.points().to_vec();
        let mut edges = Vec::new();
        for (a, p) in pts.iter().enumerate() {
            for q in &pts[a + 1..] {
                let manhattan: u32 = p
                    .coords()
                    .iter()
                    .zip(q.coords())
                    .map(|(x, y)| x.abs_diff(*y))
                    .sum();
                if manhattan == 1 {
                    edges.push((p.clone(), q.clone(), coupling));
                }
            }
        }
        Self::new(volume, edges)
    }

    fn from_indexed(volume: Arc<SiteSet>, couplings: BTreeMap<(usize, usize), f64>) -> Self {
        let mut adjacency = vec![Vec::new(); volume.len()];
        for (&(a, b), &v) in &couplings {
            adjacency[a].push((b, v));
            adjacency[b].push((a, v));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(k, _)| k);
        }
        PairwisePotential {
            volume,
            couplings,
            adjacency,
        }
    }

    pub fn volume(&self) -> &Arc<SiteSet> {
        &self.volume
    }

    pub fn dimension(&self) -> usize {
        self.volume.dimension().expect("volume is nonempty")
    }

    /// `J(i, j)`; zero for unstored pairs, for `i == j` and outside the volume.
    pub fn coupling(&self, i: &LatticePoint, j: &LatticePoint) -> f64 {
        match (self.volume.index_of(i), self.volume.index_of(j)) {
            (Some(a), Some(b)) if a != b => self
                .couplings
                .get(&(a.min(b), a.max(b)))
                .copied()
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Stored pairs `(i, j, J(i,j))` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (&LatticePoint, &LatticePoint, f64)> + '_ {
        self.couplings
            .iter()
            .map(|(&(a, b), &v)| (self.volume.point(a), self.volume.point(b), v))
    }

    pub fn edge_count(&self) -> usize {
        self.couplings.len()
    }

    /// Couplings of the site with volume index `k`, as `(index, J)` pairs.
    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.adjacency[k]
    }

    pub fn degree(&self, i: &LatticePoint) -> usize {
        self.volume
            .index_of(i)
            .map_or(0, |k| self.adjacency[k].len())
    }

    /// Largest max-norm distance of a stored pair; 0 for the zero potential.
    pub fn range(&self) -> u32 {
        self.edges()
            .map(|(i, j, _)| i.distance(j))
            .max()
            .unwrap_or(0)
    }

    pub fn dobrushin_coefficient(&self) -> DobrushinCoefficient {
        let r = self
            .adjacency
            .iter()
            .map(|row| row.iter().map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        DobrushinCoefficient::new(r)
    }

    /// The truncated potential `J^L`: couplings beyond max-norm distance `L` set to zero.
    pub fn truncate(&self, radius: u32) -> Result<Self> {
        check_radius(radius)?;
        let couplings = self
            .couplings
            .iter()
            .filter(|(&(a, b), _)| self.volume.point(a).distance(self.volume.point(b)) <= radius)
            .map(|(&k, &v)| (k, v))
            .collect();
        Ok(Self::from_indexed(Arc::clone(&self.volume), couplings))
    }

    /// `max_i Σ_{j : |j - i| > L} |J(i,j)|`.
    pub fn tail_sum(&self, radius: u32) -> Result<f64> {
        check_radius(radius)?;
        Ok((0..self.volume.len())
            .map(|k| self.site_tail_sum(k, radius))
            .fold(0.0, f64::max))
    }

    pub(crate) fn site_tail_sum(&self, k: usize, radius: u32) -> f64 {
        let p = self.volume.point(k);
        self.adjacency[k]
            .iter()
            .filter(|&&(m, _)| p.distance(self.volume.point(m)) > radius)
            .map(|(_, v)| v.abs())
            .sum()
    }

    /// `G(i) = { j : J(i,j) != 0 }`.
    pub fn interaction_neighborhood(&self, i: &LatticePoint) -> Result<BTreeSet<LatticePoint>> {
        let k = self
            .volume
            .index_of(i)
            .ok_or_else(|| Error::invalid(format!("site {i} is outside the potential's volume")))?;
        Ok(self.adjacency[k]
            .iter()
            .map(|&(m, _)| self.volume.point(m).clone())
            .collect())
    }

    /// The potential restricted to `sites`: couplings with an endpoint outside
    /// `sites` are dropped, and sites of `sites` outside the volume become
    /// decoupled members of the new volume.
    pub fn restrict(&self, sites: &SiteSet) -> Result<Self> {
        if let (Some(a), Some(b)) = (sites.dimension(), self.volume.dimension()) {
            if a != b {
                return Err(Error::invalid(format!(
                    "cannot restrict a {b}-dimensional potential to {a}-dimensional sites"
                )));
            }
        }
        let edges: Vec<_> = self
            .edges()
            .filter(|(i, j, _)| sites.contains(i) && sites.contains(j))
            .map(|(i, j, v)| (i.clone(), j.clone(), v))
            .collect();
        Self::new(sites.clone(), edges)
    }

    pub fn to_file(&self) -> PotentialFile {
        PotentialFile {
            dimension: self.dimension(),
            volume: VolumeSpec::describe(&self.volume),
            edges: self
                .edges()
                .map(|(i, j, value)| EdgeRecord {
                    i: i.clone(),
                    j: j.clone(),
                    value,
                })
                .collect(),
        }
    }

    pub fn from_file(file: &PotentialFile) -> Result<Self> {
        let volume = file.volume.to_sites()?;
        if volume.dimension() != Some(file.dimension) {
            return Err(Error::invalid(format!(
                "volume dimension {:?} does not match declared dimension {}",
                volume.dimension(),
                file.dimension
            )));
        }
        Self::new(
            volume,
            file.edges
                .iter()
                .map(|e| (e.i.clone(), e.j.clone(), e.value)),
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("potential file is always serialisable")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: PotentialFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })?;
        Self::from_file(&file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }
}

fn check_radius(radius: u32) -> Result<()> {
    if radius < 1 {
        return Err(Error::invalid("truncation radius L must be >= 1"));
    }
    Ok(())
}

/// On-disk form of a potential (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub dimension: usize,
    pub volume: VolumeSpec,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: LatticePoint,
    pub j: LatticePoint,
    pub value: f64,
}

/// Random interaction graph on `domain`.
///
/// Unordered pairs are visited in lexicographic order. Every pair consumes one
/// uniform variate; it becomes an edge with coupling `coupling` when the
/// variate is below `edge_prob` and neither endpoint already has `degree_cap`
/// edges. Rejected pairs are not retried.
pub fn random_interaction_graph(
    domain: &LatticeBox,
    edge_prob: f64,
    degree_cap: usize,
    coupling: f64,
    seed: u64,
) -> Result<PairwisePotential> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::invalid(format!(
            "edge probability {edge_prob} outside [0, 1]"
        )));
    }
    if domain.dimension() == 0 {
        return Err(Error::invalid("box dimension must be >= 1"));
    }
    let sites = domain.sites();
    let m = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; m];
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let u: f64 = rng.random();
            if u < edge_prob && degree[a] < degree_cap && degree[b] < degree_cap {
                degree[a] += 1;
                degree[b] += 1;
                edges.push((sites.point(a).clone(), sites.point(b).clone(), coupling));
            }
        }
    }
    PairwisePotential::new(sites, edges)
}
