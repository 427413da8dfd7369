//! Histogram feature vectors from per-voxel MF and anisotropy data.
//!
//! Anisotropy channels have universal ranges (FA in 0..1, angles in
//! 0..180 degrees), so their histogram bins are fixed. Local MF values have no
//! universal limits; their bin ranges come from the training set only and
//! are applied unchanged to test specimens (out-of-range values clamp to the
//! edge bins). Histograms are frequency-normalized so specimens with
//! different white-voxel counts stay comparable.

use std::io::Write;
use std::path::Path;

use crate::aniso_mf::{AnisoChannel, AnisotropyMap};
use crate::error::{Error, Result};
use crate::local_mf::LocalMfTable;
use crate::minkowski::MfComponent;

pub const DEFAULT_BIN_COUNT: usize = 10;

/// Uniform binning of [lo, hi] into `bin_count` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub bin_count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl HistogramSpec {
    pub fn new(bin_count: usize, lo: f64, hi: f64) -> Result<Self> {
        if bin_count < 1 {
            return Err(Error::InvalidParameter("bin_count must be >= 1".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "histogram range must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(HistogramSpec { bin_count, lo, hi })
    }

    /// Centers of the uniform bins.
    pub fn centers(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bin_count as f64;
        (0..self.bin_count).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    /// Bin of a value: nearest center, ties to the lower index, out-of-range
    /// values clamped to the edge bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let w = (self.hi - self.lo) / self.bin_count as f64;
        let t = (x - self.lo) / w;
        if t <= 0.0 {
            return 0;
        }
        let idx = (t.ceil() as usize).saturating_sub(1);
        idx.min(self.bin_count - 1)
    }
}

/// Frequency-normalized histogram; all-zero for empty input.
pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Vec<f64> {
    let mut counts = vec![0.0f64; spec.bin_count];
    for &x in values {
        counts[spec.bin_of(x)] += 1.0;
    }
    if !values.is_empty() {
        let n = values.len() as f64;
        for c in &mut counts {
            *c /= n;
        }
    }
    counts
}

/// A named run of feature values; vectors are concatenations of blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub name: String,
    pub values: Vec<f64>,
}

/// Feature vector of one specimen: named blocks in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub specimen_id: String,
    pub blocks: Vec<FeatureBlock>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn concatenated(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    /// (block name, block length) pairs; equality across specimens is the
    /// layout-compatibility contract.
    pub fn layout(&self) -> Vec<(String, usize)> {
        self.blocks.iter().map(|b| (b.name.clone(), b.values.len())).collect()
    }
}

/// Fixed channel ranges: FA in 0..1, angles in 0..180 degrees.
pub fn amf_channel_spec(channel: AnisoChannel, bin_count: usize) -> HistogramSpec {
    match channel {
        AnisoChannel::Fa => HistogramSpec { bin_count, lo: 0.0, hi: 1.0 },
        AnisoChannel::Theta | AnisoChannel::Phi => {
            HistogramSpec { bin_count, lo: 0.0, hi: 180.0 }
        }
    }
}

/// Anisotropic MF features: one fixed-range histogram per requested
/// (component, channel) pair, concatenated in the given order.
pub fn amf_features(
    map: &AnisotropyMap,
    components: &[MfComponent],
    channels: &[AnisoChannel],
    bin_count: usize,
) -> Result<Vec<FeatureBlock>> {
    if components.is_empty() || channels.is_empty() {
        return Err(Error::InvalidParameter(
            "amf_features needs at least one component and one channel".into(),
        ));
    }
    let mut blocks = Vec::new();
    for &comp in components {
        for &chan in channels {
            let spec = amf_channel_spec(chan, bin_count);
            let values = map.channel(comp, chan);
            blocks.push(FeatureBlock {
                name: format!("AMF.{}.{}", comp.name(), chan.name()),
                values: histogram(&values, &spec),
            });
        }
    }
    Ok(blocks)
}

/// Per-component (min, max) of local MF values over the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLimits {
    /// Indexed by `MfComponent::column()`.
    pub ranges: [(f64, f64); 4],
}

/// Componentwise global min/max across all rows of all training tables.
pub fn imf_train_limits(tables: &[&LocalMfTable]) -> Result<TrainLimits> {
    let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 4];
    let mut any = false;
    for table in tables {
        for row in &table.rows {
            any = true;
            for (c, &v) in row.values.iter().enumerate() {
                if v < ranges[c].0 {
                    ranges[c].0 = v;
                }
                if v > ranges[c].1 {
                    ranges[c].1 = v;
                }
            }
        }
    }
    if !any {
        return Err(Error::Degenerate(
            "training set holds no local MF rows to take limits from".into(),
        ));
    }
    Ok(TrainLimits { ranges })
}

/// Isotropic MF features: histogram of one component's column over the
/// training-set range. Degenerate limits (min = max) put all mass in the
/// first bin.
pub fn imf_features(
    table: &LocalMfTable,
    limits: &TrainLimits,
    component: MfComponent,
    bin_count: usize,
) -> Result<FeatureBlock> {
    let (lo, hi) = limits.ranges[component.column()];
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "invalid limits [{lo}, {hi}] for {}",
            component.name()
        )));
    }
    let values = table.column(component);
    let hist = if lo == hi {
        let mut h = vec![0.0; bin_count];
        if !values.is_empty() {
            h[0] = 1.0;
        }
        h
    } else {
        histogram(&values, &HistogramSpec::new(bin_count, lo, hi)?)
    };
    Ok(FeatureBlock { name: format!("IMF.{}", component.name()), values: hist })
}

/// Concatenate blocks into a specimen's feature vector; a DXA BMD scalar,
/// when present, leads as its own single-value block.
pub fn assemble(
    specimen_id: &str,
    blocks: Vec<FeatureBlock>,
    dxa_bmd: Option<f64>,
) -> FeatureVector {
    let mut all = Vec::with_capacity(blocks.len() + 1);
    if let Some(v) = dxa_bmd {
        all.push(FeatureBlock { name: "DXA_BMD".into(), values: vec![v] });
    }
    all.extend(blocks);
    FeatureVector { specimen_id: specimen_id.to_string(), blocks: all }
}

/// Feature vectors of a cohort flattened into a design matrix with optional
/// targets. Construction fails unless every specimen has the identical
/// block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub specimen_ids: Vec<String>,
    /// Column names, one per scalar feature (block name + bin suffix).
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Failure load targets, kN; None for unlabeled sets.
    pub targets: Option<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn build(vectors: &[FeatureVector], targets: Option<Vec<f64>>) -> Result<FeatureMatrix> {
        if vectors.is_empty() {
            return Err(Error::Degenerate("no feature vectors to assemble".into()));
        }
        let layout = vectors[0].layout();
        for v in vectors.iter().skip(1) {
            if v.layout() != layout {
                return Err(Error::DimensionMismatch(format!(
                    "specimen {} has block layout {:?}, expected {:?}",
                    v.specimen_id,
                    v.layout(),
                    layout
                )));
            }
        }
        if let Some(t) = &targets {
            if t.len() != vectors.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} targets for {} specimens",
                    t.len(),
                    vectors.len()
                )));
            }
        }
        let mut column_names = Vec::new();
        for (name, len) in &layout {
            if *len == 1 {
                column_names.push(name.clone());
            } else {
                for b in 0..*len {
                    column_names.push(format!("{name}.b{b}"));
                }
            }
        }
        Ok(FeatureMatrix {
            specimen_ids: vectors.iter().map(|v| v.specimen_id.clone()).collect(),
            column_names,
            rows: vectors.iter().map(|v| v.concatenated()).collect(),
            targets,
        })
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    /// CSV: `specimen_id,FL_kN,<feature columns...>`; FL_kN is left empty
    /// for unlabeled sets.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "specimen_id,FL_kN")?;
        for name in &self.column_names {
            write!(f, ",{name}")?;
        }
        writeln!(f)?;
        for (n, row) in self.rows.iter().enumerate() {
            write!(f, "{}", self.specimen_ids[n])?;
            match &self.targets {
                Some(t) => write!(f, ",{}", t[n])?,
                None => write!(f, ",")?,
            }
            for v in row {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Io("empty feature CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "specimen_id" || cols[1] != "FL_kN" {
            return Err(Error::Io("feature CSV must start with specimen_id,FL_kN".into()));
        }
        let column_names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
        let mut specimen_ids = Vec::new();
        let mut rows = Vec::new();
        let mut targets: Vec<Option<f64>> = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Io(format!(
                    "line {}: {} fields, header has {}",
                    n + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            specimen_ids.push(fields[0].to_string());
            targets.push(if fields[1].trim().is_empty() {
                None
            } else {
                Some(fields[1].trim().parse().map_err(|_| {
                    Error::Io(format!("line {}: bad FL_kN {:?}", n + 2, fields[1]))
                })?)
            });
            let row: Vec<f64> = fields[2..]
                .iter()
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Io(format!("line {}: bad value {s:?}", n + 2)))
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        let targets = if targets.iter().all(Option::is_some) {
            Some(targets.into_iter().map(Option::unwrap).collect())
        } else if targets.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Io("feature CSV mixes labeled and unlabeled rows".into()));
        };
        Ok(FeatureMatrix { specimen_ids, column_names, rows, targets })
    }
}
