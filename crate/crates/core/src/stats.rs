//! Diagnostics for finite orbit prefixes: dyadic box counts, box-dimension
//! regression, 1-D star discrepancy, partition entropy and the
//! arithmetic-independence report.
//!
//! Everything works on cell indices at some maximal depth `K`. A point's
//! depth-`k` cell for `k <= K` is its depth-`K` index shifted right by
//! `K - k`, so one sorted index buffer serves every depth.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::circle::{CirclePoint, MAX_CELL_DEPTH};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::orbit::OrbitSpec;

/// Inclusive range of depths, written `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepthRange {
    pub lo: u32,
    pub hi: u32,
}

impl DepthRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo == 0 || lo > hi || hi > MAX_CELL_DEPTH {
            return Err(Error::usage(format!(
                "depth range {lo}..{hi} must satisfy 1 <= lo <= hi <= {MAX_CELL_DEPTH}"
            )));
        }
        Ok(DepthRange { lo, hi })
    }

    pub fn depths(&self) -> Vec<u32> {
        (self.lo..=self.hi).collect()
    }

    pub fn contains(&self, k: u32) -> bool {
        (self.lo..=self.hi).contains(&k)
    }
}

impl FromStr for DepthRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| Error::parse("depth range", s, "expected A..B"))
        };
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let k = parse(s)?;
                (k, k)
            }
        };
        DepthRange::new(lo, hi).map_err(|e| Error::parse("depth range", s, e.to_string()))
    }
}

impl fmt::Display for DepthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

/// Depth-`depth` cell indices of a point sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSample {
    depth: u32,
    cells: Vec<u64>,
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 || depth > MAX_CELL_DEPTH {
        return Err(Error::usage(format!(
            "cell depth must be in 1..={MAX_CELL_DEPTH}, got {depth}"
        )));
    }
    Ok(())
}

impl CellSample {
    pub fn from_cells(depth: u32, cells: Vec<u64>) -> Result<Self> {
        check_depth(depth)?;
        if depth < 64 {
            if let Some(bad) = cells.iter().find(|&&c| c >> depth != 0) {
                return Err(Error::usage(format!("cell {bad} out of range at depth {depth}")));
            }
        }
        Ok(CellSample { depth, cells })
    }

    /// Reads each point's cell as it streams past; points are not retained.
    pub fn from_points<I, P>(points: I, depth: u32) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: Borrow<CirclePoint>,
    {
        check_depth(depth)?;
        let cells = points
            .into_iter()
            .map(|p| p.borrow().top_bits(depth))
            .collect::<Result<Vec<_>>>()?;
        Ok(CellSample { depth, cells })
    }

    /// Chunked, possibly parallel, cell extraction from a materialized buffer.
    pub fn from_slice(points: &[CirclePoint], depth: u32, exec: Exec) -> Result<Self> {
        check_depth(depth)?;
        let chunk = 4096;
        let chunks: Vec<&[CirclePoint]> = points.chunks(chunk).collect();
        let parts = exec::map_collect(exec, &chunks, |c| {
            c.iter().map(|p| p.top_bits(depth)).collect::<Result<Vec<u64>>>()
        });
        let mut cells = Vec::with_capacity(points.len());
        for part in parts {
            cells.extend(part?);
        }
        Ok(CellSample { depth, cells })
    }

    /// Generates the orbit and keeps only its cell indices.
    pub fn from_orbit(spec: &OrbitSpec, depth: u32) -> Result<Self> {
        spec.check_budget(depth)?;
        let mut cells = Vec::with_capacity(usize::try_from(spec.len).unwrap_or(0));
        for p in spec.generate()? {
            cells.push(p?.point.top_bits(depth)?);
        }
        CellSample::from_cells(depth, cells)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    fn check_depths(&self, depths: &[u32]) -> Result<()> {
        for &k in depths {
            check_depth(k)?;
            if k > self.depth {
                return Err(Error::PrecisionExhausted {
                    requested: k,
                    valid: u64::from(self.depth),
                });
            }
        }
        Ok(())
    }

    fn sorted(&self, exec: Exec) -> Vec<u64> {
        let mut v = self.cells.clone();
        #[cfg(feature = "parallel")]
        if exec.is_parallel() {
            use rayon::slice::ParallelSliceMut;
            v.par_sort_unstable();
            return v;
        }
        let _ = exec;
        v.sort_unstable();
        v
    }

    /// Occupied cell counts `N_k` for each requested depth.
    pub fn box_counts(&self, depths: &[u32], exec: Exec) -> Result<BoxCountProfile> {
        self.check_depths(depths)?;
        let mut unique = self.cells.clone();
        exec::sort_dedup(exec, &mut unique);
        let entries = depths
            .iter()
            .map(|&k| BoxCountEntry {
                depth: k,
                occupied: distinct_shifted(&unique, self.depth - k),
                points: self.cells.len() as u64,
            })
            .collect();
        Ok(BoxCountProfile {
            entries,
            metadata: None,
        })
    }

    /// Shannon entropy in bits of the empirical distribution over depth-`k`
    /// cells.
    pub fn entropy(&self, k: u32) -> Result<f64> {
        Ok(self.entropy_profile(&[k], Exec::Sequential)?.entries[0].entropy)
    }

    pub fn entropy_profile(&self, depths: &[u32], exec: Exec) -> Result<EntropyProfile> {
        self.check_depths(depths)?;
        if self.cells.is_empty() {
            return Err(Error::usage("entropy of an empty sample"));
        }
        let sorted = self.sorted(exec);
        let entries = depths
            .iter()
            .map(|&k| EntropyEntry {
                depth: k,
                entropy: entropy_of_sorted(&sorted, self.depth - k),
            })
            .collect();
        Ok(EntropyProfile {
            entries,
            metadata: None,
        })
    }
}

fn distinct_shifted(sorted_unique: &[u64], shift: u32) -> u64 {
    let mut count = 0u64;
    let mut prev = None;
    for &c in sorted_unique {
        let cell = if shift >= 64 { 0 } else { c >> shift };
        if prev != Some(cell) {
            count += 1;
            prev = Some(cell);
        }
    }
    count
}

fn entropy_of_sorted(sorted: &[u64], shift: u32) -> f64 {
    // H = log2 N - (1/N) Σ c log2 c, which is exact for uniform samples.
    let n = sorted.len() as f64;
    let mut acc = 0f64;
    let mut i = 0;
    while i < sorted.len() {
        let cell = if shift >= 64 { 0 } else { sorted[i] >> shift };
        let mut j = i + 1;
        while j < sorted.len() && (if shift >= 64 { 0 } else { sorted[j] >> shift }) == cell {
            j += 1;
        }
        let c = (j - i) as f64;
        acc += c * c.log2();
        i = j;
    }
    (n.log2() - acc / n).max(0.0)
}

/// Provenance carried by every profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileMeta {
    pub spec: String,
    pub start: u64,
    pub seed: u64,
    pub bits: u64,
}

impl ProfileMeta {
    pub fn of(spec: &OrbitSpec) -> Self {
        ProfileMeta {
            spec: spec.to_string(),
            start: spec.start,
            seed: spec.seed,
            bits: spec.bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxCountEntry {
    pub depth: u32,
    pub occupied: u64,
    pub points: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellDensity {
    pub depth: u32,
    pub fraction: f64,
}

/// `N_k` per depth for one point set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoxCountProfile {
    pub entries: Vec<BoxCountEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ProfileMeta>,
}

impl BoxCountProfile {
    /// A profile from raw `(depth, occupied)` pairs.
    pub fn from_counts(counts: &[(u32, u64)], points: u64) -> Self {
        BoxCountProfile {
            entries: counts
                .iter()
                .map(|&(depth, occupied)| BoxCountEntry {
                    depth,
                    occupied,
                    points,
                })
                .collect(),
            metadata: None,
        }
    }

    pub fn with_metadata(mut self, meta: ProfileMeta) -> Self {
        self.metadata = Some(meta);
        self
    }

    pub fn occupied(&self, depth: u32) -> Option<u64> {
        self.entries
            .iter()
            .find(|e| e.depth == depth)
            .map(|e| e.occupied)
    }

    /// Fraction `N_k / 2^k` of depth-`k` cells that hold a point.
    pub fn cell_density(&self) -> Vec<CellDensity> {
        self.entries
            .iter()
            .map(|e| CellDensity {
                depth: e.depth,
                fraction: e.occupied as f64 / 2f64.powi(e.depth as i32),
            })
            .collect()
    }

    pub fn points(&self) -> u64 {
        self.entries.first().map_or(0, |e| e.points)
    }

    fn is_saturated(e: &BoxCountEntry) -> bool {
        e.occupied.saturating_mul(10) >= e.points
    }

    /// `[max(4, min depth), min(12, deepest unsaturated depth)]`, falling
    /// back to the saturated range when the guard leaves fewer than two
    /// depths.
    pub fn default_window(&self) -> Result<DepthRange> {
        let min = self.entries.iter().map(|e| e.depth).min();
        let max = self.entries.iter().map(|e| e.depth).max();
        let (Some(min), Some(max)) = (min, max) else {
            return Err(Error::usage("empty box-count profile"));
        };
        let lo = min.max(4);
        let guarded = self
            .entries
            .iter()
            .filter(|e| e.depth <= 12 && !Self::is_saturated(e))
            .map(|e| e.depth)
            .max();
        let hi = match guarded {
            Some(h) if h > lo => h,
            _ => max.min(12),
        };
        if hi <= lo {
            return Err(Error::usage(format!(
                "profile depths {min}..{max} leave no window of two or more depths"
            )));
        }
        DepthRange::new(lo, hi)
    }

    /// `depth,occupied,points` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,occupied,points\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.depth, e.occupied, e.points));
        }
        out
    }
}

/// Box counts at `depths` for a point stream.
pub fn box_counts<I, P>(points: I, depths: &[u32]) -> Result<BoxCountProfile>
where
    I: IntoIterator<Item = P>,
    P: Borrow<CirclePoint>,
{
    let depth = depths.iter().copied().max().unwrap_or(1);
    CellSample::from_points(points, depth)?.box_counts(depths, Exec::default())
}

/// Generates `spec` and box-counts it, recording provenance.
pub fn orbit_box_counts(spec: &OrbitSpec, depths: &[u32], exec: Exec) -> Result<BoxCountProfile> {
    let depth = depths.iter().copied().max().unwrap_or(1);
    let sample = CellSample::from_orbit(spec, depth)?;
    Ok(sample
        .box_counts(depths, exec)?
        .with_metadata(ProfileMeta::of(spec)))
}

/// Least-squares line through `(k, log2 N_k)` over a depth window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub window: DepthRange,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Some `N_k` in the window reached a tenth of the sample size.
    pub saturated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn estimate_dimension(profile: &BoxCountProfile, window: DepthRange) -> Result<DimensionEstimate> {
    let mut pts = Vec::new();
    let mut saturated = false;
    for k in window.depths() {
        let entry = profile
            .entries
            .iter()
            .find(|e| e.depth == k)
            .ok_or_else(|| Error::usage(format!("window {window} needs depth {k}, not in profile")))?;
        if entry.occupied == 0 {
            return Err(Error::usage(format!("no occupied cells at depth {k}")));
        }
        saturated |= BoxCountProfile::is_saturated(entry);
        pts.push((f64::from(k), (entry.occupied as f64).log2()));
    }
    if pts.len() < 2 {
        return Err(Error::usage(format!("degenerate window {window}: need two depths")));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let warning = saturated.then(|| {
        format!(
            "window {window} is saturated: counts reach N/10 = {} so they reflect sample size, not geometry",
            profile.points() / 10
        )
    });
    Ok(DimensionEstimate {
        slope,
        intercept,
        window,
        residual,
        saturated,
        warning,
    })
}

/// `D*_N = max_i max(i/N - x_(i), x_(i) - (i-1)/N)` over the sorted sample.
pub fn star_discrepancy(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::usage("star discrepancy of an empty sample"));
    }
    if let Some(bad) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::usage(format!("value {bad} outside [0, 1)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst = 0f64;
    for (i, &x) in sorted.iter().enumerate() {
        // Scaled by N first so that x = (i-1)/N yields exact integers.
        let nx = n * x;
        let above = (i + 1) as f64 - nx;
        let below = nx - i as f64;
        worst = worst.max(above).max(below);
    }
    Ok(worst / n)
}

/// Star discrepancy of circle points, read through their top 53 bits.
pub fn star_discrepancy_points<I, P>(points: I) -> Result<f64>
where
    I: IntoIterator<Item = P>,
    P: Borrow<CirclePoint>,
{
    let values: Vec<f64> = points.into_iter().map(|p| p.borrow().to_f64()).collect();
    star_discrepancy(&values)
}

/// Entropy of the empirical measure over depth-`k` cells, in bits.
pub fn empirical_entropy<I, P>(points: I, k: u32) -> Result<f64>
where
    I: IntoIterator<Item = P>,
    P: Borrow<CirclePoint>,
{
    CellSample::from_points(points, k)?.entropy(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEntry {
    pub depth: u32,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyProfile {
    pub entries: Vec<EntropyEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ProfileMeta>,
}

impl EntropyProfile {
    pub fn with_metadata(mut self, meta: ProfileMeta) -> Self {
        self.metadata = Some(meta);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("depth,entropy_bits\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.depth, e.entropy));
        }
        out
    }
}

/// Profile and fitted dimension for one of the three sets in an
/// independence report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetDimension {
    pub profile: BoxCountProfile,
    pub estimate: DimensionEstimate,
}

/// Compares `dim H(x, y)` for the pointwise sums `x_n + y_n` against
/// `min(1, dim X + dim Y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub x: SetDimension,
    pub y: SetDimension,
    pub sum: SetDimension,
    pub target: f64,
    /// `dim H(x, y) - target`
    pub margin: f64,
    pub epsilon: f64,
    pub independent: bool,
}

impl IndependenceReport {
    pub fn verdict(&self) -> String {
        if self.independent {
            format!("independent within margin {}", self.epsilon)
        } else {
            format!(
                "not independent: margin {:.4} below -{}",
                self.margin, self.epsilon
            )
        }
    }
}

/// Default tolerance on the margin for calling two sequences independent.
pub const DEFAULT_INDEPENDENCE_EPSILON: f64 = 0.05;

/// Builds the three profiles from equal-length prefixes, pairing terms by
/// position.
pub fn independence_report(
    x: &OrbitSpec,
    y: &OrbitSpec,
    depths: &[u32],
    window: Option<DepthRange>,
    epsilon: f64,
    exec: Exec,
) -> Result<IndependenceReport> {
    if x.len != y.len {
        return Err(Error::usage(format!(
            "prefix lengths differ: {} vs {}",
            x.len, y.len
        )));
    }
    let depth = depths.iter().copied().max().unwrap_or(1);
    x.check_budget(depth)?;
    y.check_budget(depth)?;
    if x.bits != y.bits {
        return Err(Error::usage(format!(
            "x and y must share a bit budget to be summed ({} vs {})",
            x.bits, y.bits
        )));
    }
    let cap = usize::try_from(x.len).unwrap_or(0);
    let (mut cx, mut cy, mut cs) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    for (px, py) in x.generate()?.zip(y.generate()?) {
        let (px, py) = (px?.point, py?.point);
        cx.push(px.top_bits(depth)?);
        cy.push(py.top_bits(depth)?);
        cs.push(px.add_mod1(&py)?.top_bits(depth)?);
    }
    let set = |cells: Vec<u64>, meta: ProfileMeta| -> Result<SetDimension> {
        let profile = CellSample::from_cells(depth, cells)?
            .box_counts(depths, exec)?
            .with_metadata(meta);
        let window = match window {
            Some(w) => w,
            None => profile.default_window()?,
        };
        let estimate = estimate_dimension(&profile, window)?;
        Ok(SetDimension { profile, estimate })
    };
    let x_set = set(cx, ProfileMeta::of(x))?;
    let y_set = set(cy, ProfileMeta::of(y))?;
    let sum_meta = ProfileMeta {
        spec: format!("sum({x}, {y})"),
        start: x.start,
        seed: x.seed,
        bits: x.bits,
    };
    // The sum set uses the x window so all three fits are comparable.
    let sum_window = window.unwrap_or(x_set.estimate.window);
    let sum_profile = CellSample::from_cells(depth, cs)?
        .box_counts(depths, exec)?
        .with_metadata(sum_meta);
    let sum_estimate = estimate_dimension(&sum_profile, sum_window)?;
    let sum_set = SetDimension {
        profile: sum_profile,
        estimate: sum_estimate,
    };
    let target = (x_set.estimate.slope + y_set.estimate.slope).min(1.0);
    let margin = sum_set.estimate.slope - target;
    Ok(IndependenceReport {
        x: x_set,
        y: y_set,
        sum: sum_set,
        target,
        margin,
        epsilon,
        independent: margin >= -epsilon,
    })
}
