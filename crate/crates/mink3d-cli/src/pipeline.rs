//! Shared machinery for the feature/evaluate subcommands: group grammar,
//! per-specimen texture computation, grid expansion and feature-group
//! assembly.
//!
//! Group grammar: blocks joined by `+`, groups separated by commas.
//! ```text
//!   DXA_BMD                      scalar from the cohort manifest
//!   AMF.<component>.<channel>    10-bin fixed-range anisotropy histogram
//!   IMF.<component>              10-bin train-limited local-MF histogram
//! ```
//! with component in {volume, surface, mean_breadth, euler} and channel in
//! {FA, theta, phi}. Example group: DXA_BMD+AMF.euler.FA+AMF.euler.phi
//!
//! Kernel sizes and sigma ratios may be lists; a group is then evaluated
//! once per applicable grid point, with the grid point appended to its id.

use std::collections::HashMap;

use rayon::prelude::*;

use mink3d_core::aniso_mf::{
    compute_anisotropy, direction_bank_default, AnisoChannel, AnisotropyMap,
};
use mink3d_core::features::{amf_channel_spec, histogram};
use mink3d_core::local_mf::{
    default_sigma_long, local_mf, make_box_kernel, make_isotropic_gaussian, LocalMfTable,
};
use mink3d_core::minkowski::MfComponent;
use mink3d_core::phantom::ManifestRow;
use mink3d_core::stats_eval::{BlockSource, FeatureGroup};
use mink3d_core::volume::{load_raw, threshold};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockSpec {
    Dxa,
    Amf(MfComponent, AnisoChannel),
    Imf(MfComponent),
}

impl BlockSpec {
    pub fn parse(token: &str) -> Result<BlockSpec, String> {
        if token == "DXA_BMD" {
            return Ok(BlockSpec::Dxa);
        }
        let parts: Vec<&str> = token.split('.').collect();
        match parts.as_slice() {
            ["AMF", comp, chan] => {
                let comp = MfComponent::parse(comp)
                    .ok_or_else(|| format!("unknown MF component in {token:?}"))?;
                let chan = AnisoChannel::parse(chan)
                    .ok_or_else(|| format!("unknown anisotropy channel in {token:?}"))?;
                Ok(BlockSpec::Amf(comp, chan))
            }
            ["IMF", comp] => {
                let comp = MfComponent::parse(comp)
                    .ok_or_else(|| format!("unknown MF component in {token:?}"))?;
                Ok(BlockSpec::Imf(comp))
            }
            _ => Err(format!(
                "unknown block {token:?} (expected DXA_BMD, AMF.<comp>.<chan> or IMF.<comp>)"
            )),
        }
    }

    pub fn name(&self) -> String {
        match self {
            BlockSpec::Dxa => "DXA_BMD".into(),
            BlockSpec::Amf(c, ch) => format!("AMF.{}.{}", c.name(), ch.name()),
            BlockSpec::Imf(c) => format!("IMF.{}", c.name()),
        }
    }
}

/// One `+`-joined group of blocks.
pub fn parse_group(spec: &str) -> Result<Vec<BlockSpec>, String> {
    let blocks: Vec<BlockSpec> = spec
        .split('+')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(BlockSpec::parse)
        .collect::<Result<_, _>>()?;
    if blocks.is_empty() {
        return Err(format!("group {spec:?} holds no blocks"));
    }
    Ok(blocks)
}

/// Texture-analysis knobs. Kernel sizes and ratios are sweep lists; the
/// single-kernel subcommands pass one-element lists.
#[derive(Debug, Clone)]
pub struct TextureParams {
    pub threshold: f32,
    pub imf_kernel_sizes: Vec<usize>,
    /// None = box kernel, Some(sigma) = isotropic Gaussian.
    pub imf_sigma: Option<f64>,
    pub amf_kernel_sizes: Vec<usize>,
    pub amf_ratios: Vec<f64>,
    /// None = size / 4 per kernel size.
    pub amf_sigma_long: Option<f64>,
    pub bins: usize,
}

impl TextureParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.imf_kernel_sizes.is_empty() || self.amf_kernel_sizes.is_empty() || self.amf_ratios.is_empty() {
            return Err("kernel size and ratio lists must be nonempty".into());
        }
        Ok(())
    }
}

fn ratio_label(r: f64) -> String {
    if (r.round() - r).abs() < 1e-12 {
        format!("{}", r.round() as i64)
    } else {
        format!("{r}")
    }
}

/// One evaluated instance of a group: which grid point its IMF and AMF
/// blocks use.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInstance {
    pub id: String,
    pub blocks: Vec<BlockSpec>,
    pub imf_size: Option<usize>,
    pub amf: Option<(usize, f64)>,
}

/// Expand a group spec over the applicable part of the kernel grid. Groups
/// without IMF/AMF blocks yield exactly one instance; grid-point suffixes
/// appear only when the respective list has more than one entry.
pub fn expand_group(spec: &str, params: &TextureParams) -> Result<Vec<GroupInstance>, String> {
    let blocks = parse_group(spec)?;
    let has_imf = blocks.iter().any(|b| matches!(b, BlockSpec::Imf(_)));
    let has_amf = blocks.iter().any(|b| matches!(b, BlockSpec::Amf(..)));

    let imf_options: Vec<Option<usize>> = if has_imf {
        params.imf_kernel_sizes.iter().map(|&s| Some(s)).collect()
    } else {
        vec![None]
    };
    let amf_options: Vec<Option<(usize, f64)>> = if has_amf {
        params
            .amf_kernel_sizes
            .iter()
            .flat_map(|&s| params.amf_ratios.iter().map(move |&r| Some((s, r))))
            .collect()
    } else {
        vec![None]
    };

    let mut out = Vec::new();
    for &imf_size in &imf_options {
        for &amf in &amf_options {
            let mut id = spec.to_string();
            if let Some(s) = imf_size {
                if params.imf_kernel_sizes.len() > 1 {
                    id.push_str(&format!("@imf_k{s}"));
                }
            }
            if let Some((s, r)) = amf {
                if params.amf_kernel_sizes.len() > 1 || params.amf_ratios.len() > 1 {
                    id.push_str(&format!("@amf_k{s}_r{}", ratio_label(r)));
                }
            }
            out.push(GroupInstance { id, blocks: blocks.clone(), imf_size, amf });
        }
    }
    Ok(out)
}

/// Per-specimen intermediate products for every grid point any instance
/// needs, computed once.
pub struct SpecimenData {
    pub dxa: f64,
    pub amf_maps: HashMap<(usize, u64), AnisotropyMap>,
    pub imf_tables: HashMap<usize, LocalMfTable>,
}

fn ratio_key(r: f64) -> u64 {
    r.to_bits()
}

/// Load every specimen of the manifest and compute whatever the instances
/// need. Parallel over specimens; ordering follows the manifest.
pub fn compute_specimen_data(
    rows: &[ManifestRow],
    instances: &[GroupInstance],
    params: &TextureParams,
) -> Result<Vec<SpecimenData>, String> {
    let mut amf_points: Vec<(usize, f64)> = Vec::new();
    let mut imf_sizes: Vec<usize> = Vec::new();
    for inst in instances {
        if let Some(p) = inst.amf {
            if !amf_points.contains(&p) {
                amf_points.push(p);
            }
        }
        if let Some(s) = inst.imf_size {
            if !imf_sizes.contains(&s) {
                imf_sizes.push(s);
            }
        }
    }
    let bank = direction_bank_default();

    rows.par_iter()
        .map(|row| {
            let mut amf_maps = HashMap::new();
            let mut imf_tables = HashMap::new();
            if !amf_points.is_empty() || !imf_sizes.is_empty() {
                let volume = load_raw(&row.volume_path)
                    .map_err(|e| format!("{}: {e}", row.specimen_id))?;
                let mask = threshold(&volume, params.threshold);
                for &(size, ratio) in &amf_points {
                    let sigma = params.amf_sigma_long.unwrap_or_else(|| default_sigma_long(size));
                    let map = compute_anisotropy(&mask, &bank, size, sigma, ratio)
                        .map_err(|e| format!("{}: {e}", row.specimen_id))?;
                    amf_maps.insert((size, ratio_key(ratio)), map);
                }
                for &size in &imf_sizes {
                    let kernel = match params.imf_sigma {
                        None => make_box_kernel(size),
                        Some(s) => make_isotropic_gaussian(size, s),
                    }
                    .map_err(|e| format!("{}: {e}", row.specimen_id))?;
                    imf_tables.insert(size, local_mf(&mask, &kernel));
                }
            }
            Ok(SpecimenData { dxa: row.dxa_bmd_surrogate, amf_maps, imf_tables })
        })
        .collect()
}

/// Assemble one protocol feature group from precomputed specimen data.
pub fn build_group(
    inst: &GroupInstance,
    data: &[SpecimenData],
    params: &TextureParams,
) -> Result<FeatureGroup, String> {
    let mut sources = Vec::new();
    for block in &inst.blocks {
        match block {
            BlockSpec::Dxa => sources.push(BlockSource::Fixed {
                name: "DXA_BMD".into(),
                per_specimen: data.iter().map(|d| vec![d.dxa]).collect(),
            }),
            BlockSpec::Amf(comp, chan) => {
                let (size, ratio) = inst.amf.expect("AMF grid point set for AMF blocks");
                let spec = amf_channel_spec(*chan, params.bins);
                let per_specimen: Vec<Vec<f64>> = data
                    .iter()
                    .map(|d| {
                        let map = &d.amf_maps[&(size, ratio_key(ratio))];
                        histogram(&map.channel(*comp, *chan), &spec)
                    })
                    .collect();
                sources.push(BlockSource::Fixed { name: block.name(), per_specimen });
            }
            BlockSpec::Imf(comp) => {
                let size = inst.imf_size.expect("IMF grid point set for IMF blocks");
                let per_specimen_values: Vec<Vec<f64>> = data
                    .iter()
                    .map(|d| d.imf_tables[&size].column(*comp))
                    .collect();
                sources.push(BlockSource::ImfHistogram {
                    component: *comp,
                    bin_count: params.bins,
                    per_specimen_values,
                });
            }
        }
    }
    Ok(FeatureGroup { id: inst.id.clone(), sources })
}
