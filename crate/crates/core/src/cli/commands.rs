use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::RunConfig;
use super::plot::{ablation_svg, parse_ablation_csv};
use super::run::{comment_header, RunRecorder};
use super::{CliError, Command, Common, ImageFlags, TrainFlags, OUT_ENV};
use crate::data::{parse_protocol, synth_dataset};
use crate::error::{Error, Result};
use crate::features::{minmax_normalize, represent, TfKind, TfMatrix};
use crate::model::{export_attention, ModelParams, Setting};
use crate::render::{
    build_sample, encode_image_file, evidence_image, read_manifest, render_pseudocolor, write_manifest, Sample, Split,
};
use crate::signal::wav::load_wav;
use crate::train::{evaluate, load_examples, run_ablation, train, AblationData, EvalReport};

type CliResult<T> = std::result::Result<T, CliError>;

pub(super) fn run(command: Command, argv: Vec<String>) -> CliResult<()> {
    let name = command.name();
    match command {
        Command::Featurize {
            common,
            inputs,
            manifest,
            rep,
            workers,
            csv,
        } => featurize(name, &common, argv, inputs, manifest, rep, workers, csv),
        Command::Render { common, inputs, image } => render(name, &common, argv, &inputs, &image),
        Command::BuildManifest {
            common,
            protocol,
            audio_root,
            image,
        } => build_manifest(name, &common, argv, &protocol, &audio_root, &image),
        Command::SynthData {
            common,
            n_train,
            n_dev,
            n_eval,
            notch_depth_db,
            image,
        } => {
            let mut cfg = load_config(&common)?;
            apply_image_flags(&mut cfg, &image);
            if let Some(n) = n_train {
                cfg.synth.n_train = n;
            }
            if let Some(n) = n_dev {
                cfg.synth.n_dev = n;
            }
            if let Some(n) = n_eval {
                cfg.synth.n_eval = n;
            }
            if let Some(d) = notch_depth_db {
                cfg.synth.notch_depth_db = d;
            }
            synth_data(name, &common, argv, cfg)
        }
        Command::Train {
            common,
            manifest,
            setting,
            train,
        } => train_cmd(name, &common, argv, &manifest, setting, &train),
        Command::Eval {
            common,
            manifest,
            checkpoint,
            setting,
            split,
        } => eval_cmd(name, &common, argv, &manifest, &checkpoint, setting, split),
        Command::Ablate { common, manifest, train } => ablate(name, &common, argv, &manifest, &train),
        Command::AttnDump {
            common,
            manifest,
            checkpoint,
            index,
            setting,
            layer,
            head,
        } => {
            let cfg = load_config(&common)?;
            let setting = setting.unwrap_or(cfg.train.setting);
            let mut rec = recorder(name, &common, argv, &cfg)?;
            rec.input(&manifest)?;
            rec.input(&checkpoint)?;
            let samples = read_manifest(&manifest)?;
            let sample = samples.get(index).ok_or_else(|| {
                CliError::Usage(format!("--index {index} is past the manifest's {} samples", samples.len()))
            })?;
            let params = ModelParams::load(&checkpoint)?;
            let ex = load_examples(
                std::slice::from_ref(sample),
                &params.config,
                setting.uses_audio(),
                setting.uses_image(),
            )?;
            let seq = ex[0].sequence(setting, &cfg.prompts)?;
            let export = export_attention(&seq, &params, layer, head)?;
            let header = comment_header(rec.config_echo(), cfg.seed());
            let info = format!("# sample = {}\n# setting = {setting}\n# layer = {layer}\n# head = {head}\n", ex[0].id);
            let mut full = format!("{header}{info}").into_bytes();
            export.write_full_csv(&mut full).map_err(|e| Error::io(rec.out_dir(), e))?;
            rec.write("attention_full.csv", &full)?;
            let mut regions = format!("{header}{info}").into_bytes();
            export.write_region_csv(&mut regions).map_err(|e| Error::io(rec.out_dir(), e))?;
            rec.write("attention_regions.csv", &regions)?;
            for s in &export.spans {
                let (a, b) = s.one_based();
                println!("{:<5} tokens {a}-{b}", s.role);
            }
            finish(rec)
        }
        Command::Plot { common, report } => {
            let cfg = load_config(&common)?;
            let mut rec = recorder(name, &common, argv, &cfg)?;
            rec.input(&report)?;
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let summary = parse_ablation_csv(&text)?;
            let path = rec.write("ablation.svg", ablation_svg(&summary).as_bytes())?;
            println!("wrote {}", path.display());
            finish(rec)
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.resolve_seed();
    Ok(cfg)
}

fn out_dir(common: &Common, name: &str) -> PathBuf {
    match &common.out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(name),
    }
}

fn recorder(name: &str, common: &Common, argv: Vec<String>, cfg: &RunConfig) -> CliResult<RunRecorder> {
    recorder_in(&out_dir(common, name), name, common, argv, cfg)
}

fn recorder_in(dir: &Path, name: &str, common: &Common, argv: Vec<String>, cfg: &RunConfig) -> CliResult<RunRecorder> {
    cfg.validate()?;
    let mut rec = RunRecorder::new(dir, name, argv, cfg.echo(), cfg.seed())?;
    if let Some(path) = &common.config {
        rec.input(path)?;
    }
    Ok(rec)
}

fn finish(rec: RunRecorder) -> CliResult<()> {
    let path = rec.finish()?;
    eprintln!("run manifest: {}", path.display());
    Ok(())
}

fn apply_image_flags(cfg: &mut RunConfig, flags: &ImageFlags) {
    if let Some(rep) = flags.rep {
        cfg.render.representation = rep;
    }
    if let Some(w) = flags.width {
        cfg.render.width = w;
    }
    if let Some(h) = flags.height {
        cfg.render.height = h;
    }
    if let Some(c) = flags.colormap {
        cfg.render.colormap = c;
    }
    if let Some(f) = flags.format {
        cfg.render.format = f;
    }
}

fn apply_train_flags(cfg: &mut RunConfig, flags: &TrainFlags) {
    if let Some(s) = flags.steps {
        cfg.train.steps = s;
    }
    if let Some(lr) = flags.lr {
        cfg.train.lr = lr;
    }
    if let Some(b) = flags.batch_size {
        cfg.train.batch_size = b;
    }
    if flags.target_acc.is_some() {
        cfg.train.target_train_acc = flags.target_acc;
    }
    if let Some(e) = flags.eval_every {
        cfg.train.eval_every = e;
    }
}

fn file_stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::Usage(format!("`{}` has no file name", path.display())))
}

/// Output names must be unique, or one input would overwrite another.
fn unique_stems(paths: &[PathBuf]) -> CliResult<Vec<String>> {
    let stems = paths.iter().map(|p| file_stem(p)).collect::<CliResult<Vec<_>>>()?;
    let mut seen = BTreeMap::new();
    for (s, p) in stems.iter().zip(paths) {
        if let Some(prev) = seen.insert(s.clone(), p) {
            return Err(CliError::Usage(format!(
                "`{}` and `{}` would write the same output",
                prev.display(),
                p.display()
            )));
        }
    }
    Ok(stems)
}

#[allow(clippy::too_many_arguments)]
fn featurize(
    name: &str,
    common: &Common,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    manifest: Option<PathBuf>,
    rep: Option<TfKind>,
    workers: usize,
    csv: bool,
) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    if let Some(rep) = rep {
        cfg.render.representation = rep;
    }
    let kind = cfg.render.representation;
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let mut inputs = inputs;
    if let Some(m) = &manifest {
        inputs.extend(read_manifest(m)?.into_iter().map(|s| s.audio_path));
    }
    if inputs.is_empty() {
        return Err(CliError::Usage("featurize needs --in <wav>... or --manifest <jsonl>".into()));
    }
    // `--out a.tfm` with one input names the file directly.
    let single = common
        .out
        .as_ref()
        .filter(|p| inputs.len() == 1 && p.extension().is_some_and(|e| e == "tfm" || e == "csv"));
    let (dir, names) = match single {
        Some(p) => (
            p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf(),
            vec![p.file_name().unwrap().to_string_lossy().into_owned()],
        ),
        None => {
            let ext = if csv { "csv" } else { "tfm" };
            let stems = unique_stems(&inputs)?;
            (out_dir(common, name), stems.into_iter().map(|s| format!("{s}.{ext}")).collect())
        }
    };
    let mut rec = recorder_in(&dir, name, common, argv, &cfg)?;
    if let Some(m) = &manifest {
        rec.input(m)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let features = &cfg.features;
    let mats: Vec<Result<TfMatrix>> =
        pool.install(|| inputs.par_iter().map(|p| represent(&load_wav(p)?, kind, features)).collect());
    for ((path, out_name), tf) in inputs.iter().zip(&names).zip(mats) {
        rec.input(path)?;
        let tf = tf?;
        let bytes = if out_name.ends_with(".csv") {
            let mut b = comment_header(rec.config_echo(), cfg.seed()).into_bytes();
            tf.write_csv(&mut b).map_err(|e| Error::io(path, e))?;
            b
        } else {
            tf.to_bytes()
        };
        rec.write(out_name, &bytes)?;
    }
    println!("featurized {} file(s) as {kind} into {}", inputs.len(), dir.display());
    finish(rec)
}

fn render(name: &str, common: &Common, argv: Vec<String>, inputs: &[PathBuf], flags: &ImageFlags) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    apply_image_flags(&mut cfg, flags);
    let stems = unique_stems(inputs)?;
    let mut rec = recorder(name, common, argv, &cfg)?;
    let r = cfg.render;
    for (path, stem) in inputs.iter().zip(stems) {
        rec.input(path)?;
        let image = if path.extension().is_some_and(|e| e == "tfm") {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let tf = TfMatrix::from_bytes(&bytes)?;
            render_pseudocolor(&minmax_normalize(&tf), r.width, r.height, r.colormap)?
        } else {
            evidence_image(&load_wav(path)?, &cfg.features, &r)?
        };
        let out = rec.output_path(format!("{stem}.{}", r.format.extension()))?;
        encode_image_file(&image, &out, r.format)?;
        rec.record_output(&out)?;
    }
    println!("rendered {} image(s) into {}", inputs.len(), rec.out_dir().display());
    finish(rec)
}

fn build_manifest(
    name: &str,
    common: &Common,
    argv: Vec<String>,
    protocol: &Path,
    audio_root: &Path,
    flags: &ImageFlags,
) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    apply_image_flags(&mut cfg, flags);
    let mut rec = recorder(name, common, argv, &cfg)?;
    rec.input(protocol)?;
    let parsed = parse_protocol(protocol, audio_root)?;
    let ext = cfg.render.format.extension();
    let images_dir = rec.output_path("images")?;
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let built: Vec<Sample> = parsed
        .par_iter()
        .map(|s| {
            let audio = fs::canonicalize(&s.audio_path).map_err(|e| Error::io(&s.audio_path, e))?;
            let stem = audio.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let image_rel = PathBuf::from("images").join(format!("{stem}.{ext}"));
            let wav = load_wav(&audio)?;
            let sample = build_sample(
                &wav,
                s.label,
                &cfg.features,
                &cfg.render,
                &audio,
                &images_dir.join(format!("{stem}.{ext}")),
                s.split,
                &s.domain,
            )?;
            Ok(Sample {
                image_path: image_rel,
                ..sample
            })
        })
        .collect::<Result<_>>()?;
    for s in &built {
        rec.input(&s.audio_path)?;
        rec.record_output(&rec.out_dir().join(&s.image_path))?;
    }
    let manifest = rec.output_path("manifest.jsonl")?;
    write_manifest(&manifest, &built)?;
    rec.record_output(&manifest)?;
    println!("{} samples -> {}", built.len(), manifest.display());
    finish(rec)
}

fn synth_data(name: &str, common: &Common, argv: Vec<String>, cfg: RunConfig) -> CliResult<()> {
    let mut rec = recorder(name, common, argv, &cfg)?;
    let dir = rec.out_dir().to_path_buf();
    let samples = synth_dataset(&cfg.synth, &cfg.features, &cfg.render, &dir)?;
    for s in &samples {
        rec.record_output(&dir.join(&s.audio_path))?;
        rec.record_output(&dir.join(&s.image_path))?;
    }
    rec.record_output(&dir.join("manifest.jsonl"))?;
    println!("{} samples -> {}", samples.len(), dir.join("manifest.jsonl").display());
    finish(rec)
}

fn split_samples(manifest: &Path, rec: &mut RunRecorder) -> CliResult<Vec<Sample>> {
    rec.input(manifest)?;
    let samples = read_manifest(manifest)?;
    for s in &samples {
        rec.input(&s.audio_path)?;
        if s.image_path.exists() {
            rec.input(&s.image_path)?;
        }
    }
    Ok(samples)
}

fn train_cmd(
    name: &str,
    common: &Common,
    argv: Vec<String>,
    manifest: &Path,
    setting: Option<Setting>,
    flags: &TrainFlags,
) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    apply_train_flags(&mut cfg, flags);
    if let Some(s) = setting {
        cfg.train.setting = s;
    }
    let mut rec = recorder(name, common, argv, &cfg)?;
    let samples: Vec<Sample> = split_samples(manifest, &mut rec)?
        .into_iter()
        .filter(|s| s.split == Split::Train)
        .collect();
    if samples.is_empty() {
        return Err(Error::invalid("manifest has no train split").into());
    }
    let setting = cfg.train.setting;
    let examples = load_examples(&samples, &cfg.model, setting.uses_audio(), setting.uses_image())?;
    let out = train(&examples, ModelParams::init(&cfg.model)?, &cfg.train, &cfg.prompts)?;
    let ckpt = rec.write("checkpoint.bin", &out.params.to_checkpoint_bytes())?;
    let mut curve = Vec::new();
    out.write_curve_csv(&mut curve, rec.config_echo(), cfg.seed())
        .map_err(|e| Error::io(rec.out_dir(), e))?;
    rec.write("loss_curve.csv", &curve)?;
    let last = out.curve.last().expect("at least one step");
    println!(
        "{setting}: {} steps, final loss {:.4}{}, checkpoint {} ({})",
        out.steps_run,
        last.loss,
        last.train_acc.map(|a| format!(", train acc {a:.2}")).unwrap_or_default(),
        ckpt.display(),
        out.params.digest()
    );
    finish(rec)
}

fn report_csv(reports: &[EvalReport], header: &str) -> String {
    let mut s = header.to_string();
    s.push_str("dataset,setting,acc,f1,auc,n_samples,tp,fp,tn,fn\n");
    for r in reports {
        let c = r.counts;
        let auc = r.auc.map(|a| format!("{a:.4}")).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{:.4},{:.4},{},{},{},{},{},{}\n",
            r.dataset, r.setting, r.acc, r.f1, auc, r.n_samples, c.tp, c.fp, c.tn, c.fn_
        ));
    }
    s
}

fn eval_cmd(
    name: &str,
    common: &Common,
    argv: Vec<String>,
    manifest: &Path,
    checkpoint: &Path,
    setting: Option<Setting>,
    split: Option<Split>,
) -> CliResult<()> {
    let cfg = load_config(common)?;
    let setting = setting.unwrap_or(cfg.train.setting);
    let mut rec = recorder(name, common, argv, &cfg)?;
    rec.input(checkpoint)?;
    let params = ModelParams::load(checkpoint)?;
    let samples = split_samples(manifest, &mut rec)?;
    let mut groups: BTreeMap<(String, &'static str), Vec<Sample>> = BTreeMap::new();
    for s in samples {
        let keep = match split {
            Some(want) => s.split == want,
            None => s.split != Split::Train,
        };
        if keep {
            groups.entry((s.domain.clone(), s.split.as_str())).or_default().push(s);
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid("no samples to evaluate").into());
    }
    let header = comment_header(rec.config_echo(), cfg.seed());
    let mut reports = Vec::new();
    let mut scores_csv = format!("{header}dataset,id,label,p_fake\n");
    for ((domain, split), samples) in &groups {
        let dataset = format!("{domain}_{split}");
        let examples = load_examples(samples, &params.config, setting.uses_audio(), setting.uses_image())?;
        let (report, scores) = evaluate(&examples, &params, setting, &cfg.prompts, &dataset)?;
        for (e, p) in examples.iter().zip(scores) {
            scores_csv.push_str(&format!("{dataset},{},{},{p:.8}\n", e.id, e.label));
        }
        println!(
            "{dataset:<16} {setting}: ACC {:.2} F1 {:.2} AUC {}",
            report.acc,
            report.f1,
            report.auc.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into())
        );
        reports.push(report);
    }
    rec.write("eval_report.csv", report_csv(&reports, &header).as_bytes())?;
    rec.write("scores.csv", scores_csv.as_bytes())?;
    finish(rec)
}

fn ablate(name: &str, common: &Common, argv: Vec<String>, manifest: &Path, flags: &TrainFlags) -> CliResult<()> {
    let mut cfg = load_config(common)?;
    apply_train_flags(&mut cfg, flags);
    let mut rec = recorder(name, common, argv, &cfg)?;
    let samples = split_samples(manifest, &mut rec)?;
    let pick = |split: Split| -> Vec<Sample> { samples.iter().filter(|s| s.split == split).cloned().collect() };
    let (train_s, dev_s, eval_s) = (pick(Split::Train), pick(Split::Dev), pick(Split::Eval));
    for (what, v) in [("train", &train_s), ("dev (in-domain)", &dev_s), ("eval (shifted)", &eval_s)] {
        if v.is_empty() {
            return Err(Error::invalid(format!("manifest has no {what} split")).into());
        }
    }
    let mut in_name = dev_s[0].domain.clone();
    let mut shift_name = eval_s[0].domain.clone();
    if in_name == shift_name {
        in_name.push_str("_dev");
        shift_name.push_str("_eval");
    }
    let load = |s: &[Sample]| load_examples(s, &cfg.model, true, true);
    let (train_x, dev_x, eval_x) = (load(&train_s)?, load(&dev_s)?, load(&eval_s)?);
    let data = AblationData {
        train: &train_x,
        in_domain: (&in_name, &dev_x),
        shifted: (&shift_name, &eval_x),
    };
    let out = run_ablation(&data, &cfg.model, &cfg.train, &cfg.prompts)?;
    let mut csv = Vec::new();
    out.report
        .write_csv(&mut csv, rec.config_echo(), cfg.seed())
        .map_err(|e| Error::io(rec.out_dir(), e))?;
    rec.write("ablation.csv", &csv)?;
    let mut table = Vec::new();
    out.report.write_table(&mut table).map_err(|e| Error::io(rec.out_dir(), e))?;
    rec.write("ablation.txt", &table)?;
    print!("{}", String::from_utf8_lossy(&table));
    for (setting, params) in &out.checkpoints {
        rec.write(format!("checkpoints/{setting}.bin"), &params.to_checkpoint_bytes())?;
        println!("checkpoint {setting}: {}", params.digest());
    }
    for setting in [Setting::AudioOnly, Setting::AcousticOnly] {
        if let Ok(d) = out.report.accuracy_drop(setting, &in_name, &shift_name) {
            println!("{setting} accuracy drop {in_name} -> {shift_name}: {d:.2}");
        }
    }
    finish(rec)
}
