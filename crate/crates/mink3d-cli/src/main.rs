//! mink3d: Minkowski-functional texture analysis of 3D volumes, end to end.
//!
//! Subcommands compose through files (raw volumes with sidecar headers, CSV
//! tables), so every stage is independently scriptable. Every subcommand
//! exits 0 on success and prints a single machine-parseable `error: ...`
//! line on failure. MINK3D_THREADS caps the worker count.

mod args;
mod pipeline;

use std::path::Path;

use args::{require_path_exists, split_list, Args};
use pipeline::{build_group, compute_specimen_data, expand_group, GroupInstance, TextureParams};

use mink3d_core::aniso_mf::{compute_anisotropy, direction_bank_default};
use mink3d_core::calibration::{calibrate_volume, read_calibration_file};
use mink3d_core::features::FeatureMatrix;
use mink3d_core::learn::{Dataset, Method, Model, TrainConfig};
use mink3d_core::local_mf::{
    default_sigma_long, local_mf, make_box_kernel, make_isotropic_gaussian,
};
use mink3d_core::minkowski::mf_global;
use mink3d_core::phantom::{
    generate, generate_cohort, read_manifest, write_cohort, CohortSpec, FlModel, PhantomKind,
    PhantomSpec,
};
use mink3d_core::stats_eval::{
    compare_to_baseline, read_results_csv, run_protocol, write_comparisons_csv,
    write_plot_data_csv, write_results_csv, SplitPlan,
};
use mink3d_core::voi::{fit_sphere, read_points_csv, scale_and_mask};
use mink3d_core::volume::{load_mask, load_raw, save_mask, save_raw, threshold};

const USAGE: &str = "\
mink3d - integral-geometry texture analysis and strength-prediction pipeline

USAGE: mink3d <subcommand> [--flag value ...]

Volume stages:
  calibrate   Convert an HU volume to BMD with a phantom calibration table
  threshold   Binarize a scalar volume at a fixed value
  voi-mask    Fit a sphere to surface points, shrink it, rasterize a mask
  mf-global   Print the four global Minkowski functionals of a mask
  imf         Per-voxel local Minkowski functionals (CSV table)
  amf         Per-voxel anisotropy: FA/theta/phi per functional (CSV table)

Cohort stages:
  phantom     Generate synthetic specimens (single volume or cohort)
  features    Assemble a feature matrix CSV from a cohort manifest
  train       Fit a regression model on a feature matrix
  evaluate    Repeated-split RMSE protocol over feature groups and methods
  compare     Wilcoxon + Holm-Bonferroni comparisons against a baseline
  plot-data   Quartile summaries of an evaluate results file

Every subcommand accepts --config FILE (key = value lines; flags win) and
--help. The MINK3D_THREADS environment variable caps parallelism.
";

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.is_empty() || argv[0] == "--help" || argv[0] == "help" {
        print!("{USAGE}");
        std::process::exit(if argv.is_empty() { 2 } else { 0 });
    }
    if let Ok(threads) = std::env::var("MINK3D_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MINK3D_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }
    let sub = argv[0].as_str();
    let rest = &argv[1..];
    if rest.first().map(String::as_str) == Some("--help") {
        print_subcommand_help(sub);
        return;
    }
    let outcome = match sub {
        "calibrate" => cmd_calibrate(rest),
        "threshold" => cmd_threshold(rest),
        "voi-mask" => cmd_voi_mask(rest),
        "mf-global" => cmd_mf_global(rest),
        "imf" => cmd_imf(rest),
        "amf" => cmd_amf(rest),
        "phantom" => cmd_phantom(rest),
        "features" => cmd_features(rest),
        "train" => cmd_train(rest),
        "evaluate" => cmd_evaluate(rest),
        "compare" => cmd_compare(rest),
        "plot-data" => cmd_plot_data(rest),
        other => {
            eprintln!("error: unknown subcommand {other:?} (run `mink3d --help`)");
            std::process::exit(2);
        }
    };
    if let Err(msg) = outcome {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}

fn print_subcommand_help(sub: &str) {
    let text = match sub {
        "calibrate" => "mink3d calibrate --volume HU.raw --calib calib.csv --out BMD.raw\n\
             Calibration table: `HU_W,HU_B` (global) or `slice,HU_W,HU_B` rows.\n",
        "threshold" => "mink3d threshold --volume BMD.raw [--t 400] --out mask.raw\n",
        "voi-mask" => "mink3d voi-mask --points pts.csv --volume vol.raw [--scale 0.75] --out mask.raw\n\
             Points CSV: x_mm,y_mm,z_mm rows on the head surface.\n",
        "mf-global" => "mink3d mf-global --mask mask.raw\n\
             Prints `volume surface mean_breadth euler` in lattice units.\n",
        "imf" => "mink3d imf --mask mask.raw [--kernel-size 5] [--kernel box|gaussian]\n\
             [--sigma S] --out table.csv\n",
        "amf" => "mink3d amf --mask mask.raw [--kernel-size 7] [--ratio 4] [--sigma-long S]\n\
             --out aniso.csv\n",
        "phantom" => "mink3d phantom --out DIR --cohort N [--seed 7] [--dims 28] [--fraction-lo 0.15]\n\
             [--fraction-hi 0.35] [--thickness 3] [--fl-base -0.5] [--fl-per-100bmd 1.2]\n\
             [--fl-per-alignment 3] [--fl-noise 0.12]\n\
             or: mink3d phantom --out volume.raw --kind rods|plates|blobs [--direction 1,0,0]\n\
             [--fraction 0.2] [--thickness 3] [--dims 28] [--seed 7]\n",
        "features" => "mink3d features --manifest manifest.csv --blocks DXA_BMD+AMF.euler.FA+AMF.euler.phi\n\
             [--threshold 400] [--imf-kernel-size 5] [--imf-kernel box|gaussian] [--imf-sigma S]\n\
             [--amf-kernel-size 7] [--amf-ratio 4] [--amf-sigma-long S] [--bins 10] --out features.csv\n\
             IMF bin limits here come from ALL listed specimens; `evaluate` refits\n\
             them per split from its training side only.\n",
        "train" => "mink3d train --features features.csv [--method multireg|multireg_gd|svr]\n\
             [--lambda 0] [--alpha 0.1] [--c 1] [--epsilon 0.1] [--max-iters 50000]\n\
             [--tol 1e-8] [--seed 0] --out model.txt\n",
        "evaluate" => "mink3d evaluate --manifest manifest.csv --groups G1,G2,... [--methods multireg,svr]\n\
             [--iterations 50] [--seed 42] [--threshold 400]\n\
             [--imf-kernel-size 5,7,...,19] [--imf-kernel box|gaussian] [--imf-sigma S]\n\
             [--amf-kernel-size 5,7,...,19] [--amf-ratio 2,4,8] [--amf-sigma-long S]\n\
             [--bins 10] [--lambda 0] [--c 1] [--epsilon 0.1] --out results.csv\n\
             A group is blocks joined by `+`, e.g. DXA_BMD+AMF.euler.FA+AMF.euler.phi.\n\
             Kernel-size/ratio lists sweep each group over the grid (ids get\n\
             @imf_k*/@amf_k*_r* suffixes). Splits are shared across groups and\n\
             methods (paired design).\n",
        "compare" => "mink3d compare --results results.csv --baseline GROUP[:METHOD] [--alpha 0.05]\n\
             --out comparisons.csv\n",
        "plot-data" => "mink3d plot-data --results results.csv --out plot.csv\n\
             Emits q25/median/q75 (and mean/std) per group and method.\n",
        _ => {
            print!("{USAGE}");
            return;
        }
    };
    print!("{text}");
}

fn cmd_calibrate(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let volume_path = args.require("volume")?;
    let calib_path = args.require("calib")?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&volume_path, "volume")?;
    require_path_exists(&calib_path, "calibration table")?;

    let volume = load_raw(Path::new(&volume_path)).map_err(|e| e.to_string())?;
    let calib = read_calibration_file(Path::new(&calib_path)).map_err(|e| e.to_string())?;
    let result = calibrate_volume(&volume, &calib).map_err(|e| e.to_string())?;
    save_raw(&result.volume, Path::new(&out)).map_err(|e| e.to_string())?;
    if result.out_of_range_voxels > 0 {
        eprintln!(
            "warning: {} voxels outside the plausible BMD range [-300, 1400]",
            result.out_of_range_voxels
        );
    }
    println!("calibrated {volume_path} -> {out}");
    Ok(())
}

fn cmd_threshold(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let volume_path = args.require("volume")?;
    let t = args.parse_f64("t", 400.0)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&volume_path, "volume")?;

    let volume = load_raw(Path::new(&volume_path)).map_err(|e| e.to_string())?;
    let mask = threshold(&volume, t as f32);
    save_mask(&mask, volume.spacing(), Path::new(&out)).map_err(|e| e.to_string())?;
    println!("threshold {t}: {} of {} voxels white -> {out}", mask.white_count(), mask.voxels().len());
    Ok(())
}

fn cmd_voi_mask(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let points_path = args.require("points")?;
    let volume_path = args.require("volume")?;
    let scale = args.parse_f64("scale", 0.75)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&points_path, "points file")?;
    require_path_exists(&volume_path, "volume")?;

    let points = read_points_csv(Path::new(&points_path)).map_err(|e| e.to_string())?;
    let volume = load_raw(Path::new(&volume_path)).map_err(|e| e.to_string())?;
    let fit = fit_sphere(&points).map_err(|e| e.to_string())?;
    let masked = scale_and_mask(&fit.voi, scale, &volume).map_err(|e| e.to_string())?;
    save_mask(&masked.mask, volume.spacing(), Path::new(&out)).map_err(|e| e.to_string())?;
    if masked.empty {
        eprintln!("warning: scaled sphere contains no voxel centers; mask is empty");
    }
    println!(
        "sphere c = ({:.3}, {:.3}, {:.3}) mm, r = {:.3} mm (rms residual {:.2e}); scale {scale} -> {} voxels -> {out}",
        fit.voi.center[0], fit.voi.center[1], fit.voi.center[2], fit.voi.radius,
        fit.rms_residual, masked.inside_voxels
    );
    Ok(())
}

fn cmd_mf_global(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let mask_path = args.require("mask")?;
    args.finish()?;
    require_path_exists(&mask_path, "mask")?;

    let mask = load_mask(Path::new(&mask_path)).map_err(|e| e.to_string())?;
    let mf = mf_global(&mask);
    println!("volume {}", mf.volume);
    println!("surface {}", mf.surface);
    println!("mean_breadth {}", mf.mean_breadth);
    println!("euler {}", mf.euler);
    Ok(())
}

fn cmd_imf(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let mask_path = args.require("mask")?;
    let size = args.parse_usize("kernel-size", 5)?;
    let kind = args.get_or("kernel", "box");
    let sigma = args.parse_f64("sigma", default_sigma_long(size))?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&mask_path, "mask")?;

    let mask = load_mask(Path::new(&mask_path)).map_err(|e| e.to_string())?;
    let kernel = match kind.as_str() {
        "box" => make_box_kernel(size),
        "gaussian" => make_isotropic_gaussian(size, sigma),
        other => return Err(format!("unknown kernel kind {other:?} (box or gaussian)")),
    }
    .map_err(|e| e.to_string())?;
    let table = local_mf(&mask, &kernel);
    table.write_csv(Path::new(&out)).map_err(|e| e.to_string())?;
    println!("local MF ({kind}, size {size}): {} rows -> {out}", table.len());
    Ok(())
}

fn cmd_amf(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let mask_path = args.require("mask")?;
    let size = args.parse_usize("kernel-size", 7)?;
    let ratio = args.parse_f64("ratio", 4.0)?;
    let sigma_long = args.parse_f64("sigma-long", default_sigma_long(size))?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&mask_path, "mask")?;

    let mask = load_mask(Path::new(&mask_path)).map_err(|e| e.to_string())?;
    let bank = direction_bank_default();
    let map = compute_anisotropy(&mask, &bank, size, sigma_long, ratio).map_err(|e| e.to_string())?;
    map.write_csv(Path::new(&out)).map_err(|e| e.to_string())?;
    println!(
        "anisotropy (size {size}, ratio {ratio}, {} directions): {} voxels -> {out}",
        bank.len(),
        map.voxels.len()
    );
    Ok(())
}

fn cmd_phantom(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let out = args.require("out")?;
    let dims_n = args.parse_usize("dims", 28)?;
    let dims = (dims_n, dims_n, dims_n);
    let seed = args.parse_u64("seed", 7)?;
    let thickness = args.parse_f64("thickness", 3.0)?;

    if let Some(cohort_n) = args.get("cohort") {
        let size: usize = cohort_n.parse().map_err(|_| format!("--cohort: bad count {cohort_n:?}"))?;
        let spec = CohortSpec {
            size,
            dims,
            seed,
            fraction_range: (
                args.parse_f64("fraction-lo", 0.15)?,
                args.parse_f64("fraction-hi", 0.35)?,
            ),
            thickness,
            fl: FlModel {
                base: args.parse_f64("fl-base", -0.5)?,
                per_100_bmd: args.parse_f64("fl-per-100bmd", 1.2)?,
                per_alignment: args.parse_f64("fl-per-alignment", 3.0)?,
                noise_sigma: args.parse_f64("fl-noise", 0.12)?,
            },
        };
        args.finish()?;
        let cohort = generate_cohort(&spec).map_err(|e| e.to_string())?;
        let manifest = write_cohort(Path::new(&out), &cohort).map_err(|e| e.to_string())?;
        println!("cohort of {size} specimens ({dims_n}^3, seed {seed}) -> {}", manifest.display());
        return Ok(());
    }

    let kind_name = args.require("kind")?;
    let kind = PhantomKind::parse(&kind_name)
        .ok_or_else(|| format!("unknown phantom kind {kind_name:?}"))?;
    let direction = parse_direction(&args.get_or("direction", "1,0,0"))?;
    let fraction = args.parse_f64("fraction", 0.2)?;
    args.finish()?;
    let specimen = generate(&PhantomSpec { kind, dims, direction, fraction, thickness, seed })
        .map_err(|e| e.to_string())?;
    save_raw(&specimen.volume, Path::new(&out)).map_err(|e| e.to_string())?;
    println!(
        "{} phantom ({dims_n}^3, fraction {:.3}, FL {:.3} kN) -> {out}",
        kind.name(),
        specimen.white_fraction,
        specimen.fl_kn
    );
    Ok(())
}

fn parse_direction(s: &str) -> Result<[f64; 3], String> {
    let parts = split_list(s);
    if parts.len() != 3 {
        return Err(format!("--direction needs three comma-separated numbers, got {s:?}"));
    }
    let mut d = [0.0f64; 3];
    for (slot, p) in d.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("--direction: bad number {p:?}"))?;
    }
    Ok(d)
}

fn parse_usize_list(args: &Args, key: &str, default: &str) -> Result<Vec<usize>, String> {
    split_list(&args.get_or(key, default))
        .iter()
        .map(|s| s.parse().map_err(|_| format!("--{key}: bad integer {s:?}")))
        .collect()
}

fn parse_f64_list(args: &Args, key: &str, default: &str) -> Result<Vec<f64>, String> {
    split_list(&args.get_or(key, default))
        .iter()
        .map(|s| s.parse().map_err(|_| format!("--{key}: bad number {s:?}")))
        .collect()
}

/// Sweep defaults match the protocol grid: kernel sizes 5..19 step 2 and
/// sigma ratios {2, 4, 8}.
fn texture_params(args: &Args, sweep_defaults: bool) -> Result<TextureParams, String> {
    let join_usize = |xs: &[usize]| xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    let join_f64 = |xs: &[f64]| xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    let (imf_default, amf_default, ratio_default) = if sweep_defaults {
        (
            join_usize(&mink3d_core::local_mf::KERNEL_SIZE_SWEEP),
            join_usize(&mink3d_core::local_mf::KERNEL_SIZE_SWEEP),
            join_f64(&mink3d_core::aniso_mf::SIGMA_RATIO_SWEEP),
        )
    } else {
        ("5".to_string(), "7".to_string(), "4".to_string())
    };
    let (imf_default, amf_default, ratio_default) =
        (imf_default.as_str(), amf_default.as_str(), ratio_default.as_str());
    let imf_kernel_sizes = parse_usize_list(args, "imf-kernel-size", imf_default)?;
    let sigma_flag = args.parse_f64(
        "imf-sigma",
        default_sigma_long(*imf_kernel_sizes.first().unwrap_or(&5)),
    )?;
    let imf_sigma = match args.get_or("imf-kernel", "box").as_str() {
        "box" => None,
        "gaussian" => Some(sigma_flag),
        other => return Err(format!("unknown --imf-kernel {other:?} (box or gaussian)")),
    };
    let params = TextureParams {
        threshold: args.parse_f64("threshold", 400.0)? as f32,
        imf_kernel_sizes,
        imf_sigma,
        amf_kernel_sizes: parse_usize_list(args, "amf-kernel-size", amf_default)?,
        amf_ratios: parse_f64_list(args, "amf-ratio", ratio_default)?,
        amf_sigma_long: match args.get("amf-sigma-long") {
            Some(s) => Some(s.parse().map_err(|_| format!("--amf-sigma-long: bad number {s:?}"))?),
            None => None,
        },
        bins: args.parse_usize("bins", 10)?,
    };
    params.validate()?;
    Ok(params)
}

fn cmd_features(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let manifest_path = args.require("manifest")?;
    let blocks_spec = args.require("blocks")?;
    let params = texture_params(&args, false)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&manifest_path, "manifest")?;

    let rows = read_manifest(Path::new(&manifest_path)).map_err(|e| e.to_string())?;
    let instances = expand_group(&blocks_spec, &params)?;
    if instances.len() != 1 {
        return Err(format!(
            "features needs exactly one grid point; got {} (give single-valued kernel flags)",
            instances.len()
        ));
    }
    let data = compute_specimen_data(&rows, &instances, &params)?;
    let group = build_group(&instances[0], &data, &params)?;
    // Feature export fits IMF limits on the full listed set (documented).
    let all_idx: Vec<usize> = (0..rows.len()).collect();
    let mat = group.materialize(&all_idx).map_err(|e| e.to_string())?;
    let matrix = FeatureMatrix {
        specimen_ids: rows.iter().map(|r| r.specimen_id.clone()).collect(),
        column_names: mat.column_names,
        rows: mat.rows,
        targets: Some(rows.iter().map(|r| r.fl_kn).collect()),
    };
    matrix.write_csv(Path::new(&out)).map_err(|e| e.to_string())?;
    println!(
        "feature matrix: {} specimens x {} features -> {out}",
        matrix.specimen_ids.len(),
        matrix.n_features()
    );
    Ok(())
}

fn train_config(args: &Args, method: Method) -> Result<TrainConfig, String> {
    Ok(TrainConfig {
        method,
        alpha: args.parse_f64("alpha", 0.1)?,
        lambda: args.parse_f64("lambda", 0.0)?,
        c: args.parse_f64("c", 1.0)?,
        epsilon: args.parse_f64("epsilon", 0.1)?,
        max_iters: args.parse_usize("max-iters", 50_000)?,
        tol: args.parse_f64("tol", 1e-8)?,
        seed: args.parse_u64("seed", 0)?,
    })
}

fn cmd_train(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let features_path = args.require("features")?;
    let method = Method::parse(&args.get_or("method", "multireg"))
        .ok_or_else(|| "unknown --method (multireg, multireg_gd or svr)".to_string())?;
    let config = train_config(&args, method)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&features_path, "feature matrix")?;

    let matrix = FeatureMatrix::read_csv(Path::new(&features_path)).map_err(|e| e.to_string())?;
    let data = Dataset::from_matrix(&matrix).map_err(|e| e.to_string())?;
    let model = Model::train(&data, &config).map_err(|e| e.to_string())?;
    let preds: Vec<f64> = data
        .x
        .iter()
        .map(|r| model.predict(r).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let train_rmse =
        mink3d_core::stats_eval::rmse(&preds, &data.y).map_err(|e| e.to_string())?;
    model.write_file(Path::new(&out)).map_err(|e| e.to_string())?;
    println!(
        "trained {} on {} specimens x {} features (train RMSE {:.4}) -> {out}",
        method.name(),
        data.m(),
        data.n(),
        train_rmse
    );
    Ok(())
}

fn cmd_evaluate(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let manifest_path = args.require("manifest")?;
    let group_specs = split_list(&args.require("groups")?);
    let method_names = split_list(&args.get_or("methods", "multireg,svr"));
    let iterations = args.parse_usize("iterations", 50)?;
    let seed = args.parse_u64("seed", 42)?;
    let params = texture_params(&args, true)?;
    let base_config = train_config(&args, Method::MultiregNormal)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&manifest_path, "manifest")?;
    if group_specs.is_empty() {
        return Err("--groups must name at least one feature group".into());
    }

    let methods: Vec<Method> = method_names
        .iter()
        .map(|name| {
            Method::parse(name).ok_or_else(|| format!("unknown method {name:?} in --methods"))
        })
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err("--methods must name at least one method".into());
    }

    let rows = read_manifest(Path::new(&manifest_path)).map_err(|e| e.to_string())?;
    let mut instances: Vec<GroupInstance> = Vec::new();
    for spec in &group_specs {
        instances.extend(expand_group(spec, &params)?);
    }
    let data = compute_specimen_data(&rows, &instances, &params)?;
    let groups = instances
        .iter()
        .map(|inst| build_group(inst, &data, &params))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<f64> = rows.iter().map(|r| r.fl_kn).collect();
    let plan = SplitPlan::new(seed, iterations, targets.len()).map_err(|e| e.to_string())?;
    let dists =
        run_protocol(&groups, &targets, &methods, &plan, &base_config).map_err(|e| e.to_string())?;
    write_results_csv(&dists, Path::new(&out)).map_err(|e| e.to_string())?;
    for d in &dists {
        println!("{}: RMSE {:.4} +/- {:.4} over {} splits", d.label(), d.mean(), d.std(), iterations);
    }
    println!("results -> {out}");
    Ok(())
}

fn cmd_compare(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let results_path = args.require("results")?;
    let baseline = args.require("baseline")?;
    let alpha = args.parse_f64("alpha", 0.05)?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&results_path, "results file")?;

    let dists = read_results_csv(Path::new(&results_path)).map_err(|e| e.to_string())?;
    let rows = compare_to_baseline(&dists, &baseline, alpha).map_err(|e| e.to_string())?;
    write_comparisons_csv(&rows, Path::new(&out)).map_err(|e| e.to_string())?;
    for r in &rows {
        println!(
            "{} vs {}: p = {:.4e}{}",
            r.a,
            r.b,
            r.p_raw,
            if r.reject { "  [significant]" } else { "" }
        );
    }
    println!("comparisons -> {out}");
    Ok(())
}

fn cmd_plot_data(argv: &[String]) -> Result<(), String> {
    let args = Args::parse(argv)?;
    let results_path = args.require("results")?;
    let out = args.require("out")?;
    args.finish()?;
    require_path_exists(&results_path, "results file")?;

    let dists = read_results_csv(Path::new(&results_path)).map_err(|e| e.to_string())?;
    write_plot_data_csv(&dists, Path::new(&out)).map_err(|e| e.to_string())?;
    println!("plot data for {} distributions -> {out}", dists.len());
    Ok(())
}
