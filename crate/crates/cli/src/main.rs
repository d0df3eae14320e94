mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use log::info;

use args::{AveragingArg, Cli, Command, EmbeddingArgs, FormatArg, GroundCommand, ImportanceCommand, ModeArg, TaskArg};
use sgeval_core::align::{align_document, AlignmentConfig};
use sgeval_core::grounding::{assemble_documents, query_manifest};
use sgeval_core::importance::{ndcg_report, rank_documents, EmbeddingSpace, ImportanceConfig};
use sgeval_core::ingest::{
    file_to_string, load_detections, load_embeddings, load_scene_graphs, load_vocabulary, parse_frame_ids, queries_to_jsonl,
    scene_graphs_to_string, DetectionIndex, ReportFile, SceneGraphFile,
};
use sgeval_core::prompt::{build_prompt, PromptMode, PromptSpec};
use sgeval_core::synth::{generate, SynthConfig};
use sgeval_core::{
    parse_generation, Averaging, DocumentKind, EmbeddingTable, Error, EvalTask, Evaluator, Exec, RelationFormat, ReportOptions,
    SceneGraphDocument, TaskVariant, Vocabulary,
};

/// A data problem the core library does not model, such as an empty parse.
#[derive(Debug)]
struct DataError(String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SGEVAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let internal = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_internal));
            ExitCode::from(if internal { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.jobs == 1 { Exec::Sequential } else { Exec::Parallel };
    with_pool(cli.jobs, || dispatch(cli.command, exec))?
}

#[cfg(feature = "parallel")]
fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_pool<R>(_jobs: usize, f: impl FnOnce() -> R) -> Result<R> {
    Ok(f())
}

fn dispatch(command: Command, exec: Exec) -> Result<()> {
    match command {
        Command::Parse(a) => parse(a),
        Command::Align(a) => align(a, exec),
        Command::Eval(a) => eval(a, exec),
        Command::Importance(c) => importance(c, exec),
        Command::Ground(c) => ground(c, exec),
        Command::Prompt(a) => prompt(a),
        Command::Synth(a) => synth(a),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse(a: args::ParseArgs) -> Result<()> {
    let format = match a.format {
        FormatArg::Triplet => RelationFormat::Triplet,
        FormatArg::Quadruplet => RelationFormat::Quadruplet,
    };
    let frame_ids = parse_frame_ids(&read_text(&a.frames)?);
    if frame_ids.is_empty() {
        bail!(DataError(format!("{}: no frame ids", a.frames.display())));
    }
    let video_id = match a.video_id {
        Some(v) => v,
        None => a
            .generation
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .context("cannot derive a video id from the generation path; pass --video-id")?,
    };
    let (frames, report) = parse_generation(&read_text(&a.generation)?, format, &frame_ids);
    let report_json = serde_json::to_string_pretty(&report)? + "\n";
    match &a.report {
        Some(p) => fs::write(p, &report_json).with_context(|| format!("writing {}", p.display()))?,
        None => eprint!("{report_json}"),
    }
    if report.frames_found == 0 {
        bail!(DataError(format!("{}: no frames recovered", a.generation.display())));
    }
    let doc = SceneGraphDocument::new(video_id, frames, DocumentKind::Prediction)?;
    emit(a.output.as_deref(), &scene_graphs_to_string(&[doc]))
}

fn align(a: args::AlignArgs, exec: Exec) -> Result<()> {
    let vocab = load_vocabulary(&a.vocab)?;
    let table = load_embeddings(&a.embeddings)?;
    let cfg = AlignmentConfig::new(a.min_sim)?;
    let docs = load_scene_graphs(&a.predictions, DocumentKind::Prediction)?;
    let aligned = exec.try_map(&docs, |d| align_document(d, &vocab, &table, &cfg))?;
    let rejected: usize = aligned.iter().map(|a| a.rejected).sum();
    eprintln!("rejected {rejected} triplets");
    let docs: Vec<SceneGraphDocument> = aligned.into_iter().map(|a| a.document).collect();
    emit(a.output.as_deref(), &scene_graphs_to_string(&docs))
}

fn eval(a: args::EvalArgs, exec: Exec) -> Result<()> {
    let variant = match a.task {
        TaskArg::SgclsStar => TaskVariant::SgclsStar,
        TaskArg::Sgdet => TaskVariant::Sgdet,
        TaskArg::SgdetAgg => TaskVariant::SgdetAgg,
    };
    let task = match (variant, a.iou) {
        (_, Some(thr)) => EvalTask::new(variant, thr)?,
        (TaskVariant::SgclsStar, None) => EvalTask::sgcls_star(),
        (TaskVariant::Sgdet, None) => EvalTask::sgdet(),
        (TaskVariant::SgdetAgg, None) => EvalTask::sgdet_agg(),
    };
    let averaging = match a.averaging {
        AveragingArg::Macro => Averaging::Macro,
        AveragingArg::Micro => Averaging::Micro,
    };
    let gt = load_scene_graphs(&a.gt, DocumentKind::GroundTruth)?;
    let pred = load_scene_graphs(&a.pred, DocumentKind::Prediction)?;
    let evaluator = Evaluator::new(task, &a.k)?.with_averaging(averaging).with_exec(exec);
    let opts = ReportOptions {
        per_class: a.per_class,
        entity: a.entity,
    };
    let report = evaluator.report(&pred, &gt, opts)?;
    info!("evaluated {} videos", gt.len());
    let file = ReportFile::from_report(task.name(), evaluator.ks(), &report);
    let text = if a.csv { file.to_csv()? } else { file.to_json() };
    emit(a.output.as_deref(), &text)
}

fn embedding_setup(emb: &EmbeddingArgs) -> Result<(EmbeddingTable, Option<EmbeddingTable>, ImportanceConfig)> {
    let frames = load_embeddings(&emb.frame_emb)?;
    let text = if emb.text_emb == emb.frame_emb {
        None
    } else {
        Some(load_embeddings(&emb.text_emb)?)
    };
    Ok((frames, text, ImportanceConfig::new(emb.lambda, !emb.no_clamp)?))
}

fn space<'a>(frames: &'a EmbeddingTable, text: &'a Option<EmbeddingTable>) -> Result<EmbeddingSpace<'a>> {
    Ok(match text {
        Some(t) => EmbeddingSpace::new(frames, t)?,
        None => EmbeddingSpace::shared(frames),
    })
}

fn importance(c: ImportanceCommand, exec: Exec) -> Result<()> {
    match c {
        ImportanceCommand::Rank {
            emb,
            ground_truth,
            output,
            input,
        } => {
            let (frames, text, cfg) = embedding_setup(&emb)?;
            let space = space(&frames, &text)?;
            let kind = if ground_truth { DocumentKind::GroundTruth } else { DocumentKind::Prediction };
            let docs = load_scene_graphs(&input, kind)?;
            let ranked = rank_documents(&docs, &space, &cfg, exec)?;
            let (docs, tis): (Vec<_>, Vec<_>) = ranked.into_iter().unzip();
            let mut file = SceneGraphFile::from_documents(&docs);
            for (video, video_tis) in file.videos.iter_mut().zip(&tis) {
                for (frame, frame_tis) in video.frames.iter_mut().zip(video_tis) {
                    for (rec, &ti) in frame.triplets.iter_mut().zip(frame_tis) {
                        rec.ti = Some(ti);
                    }
                }
            }
            emit(output.as_deref(), &file_to_string(&file))
        }
        ImportanceCommand::Ndcg { emb, gt, pred, p, output } => {
            let (frames, text, cfg) = embedding_setup(&emb)?;
            let space = space(&frames, &text)?;
            let gt = load_scene_graphs(&gt, DocumentKind::Prediction)?;
            let pred = load_scene_graphs(&pred, DocumentKind::Prediction)?;
            let value = ndcg_report(&pred, &gt, &space, &cfg, p, exec)?;
            emit(output.as_deref(), &ReportFile::ndcg_only(p, value).to_json())
        }
    }
}

fn ground(c: GroundCommand, exec: Exec) -> Result<()> {
    match c {
        GroundCommand::Queries { output, input } => {
            let docs = load_scene_graphs(&input, DocumentKind::Prediction)?;
            emit(output.as_deref(), &queries_to_jsonl(&query_manifest(&docs)))
        }
        GroundCommand::Assemble {
            detections,
            output,
            input,
        } => {
            let docs = load_scene_graphs(&input, DocumentKind::Prediction)?;
            let index = DetectionIndex::new(load_detections(&detections)?);
            let grounded = assemble_documents(&docs, &index, exec)?;
            emit(output.as_deref(), &scene_graphs_to_string(&grounded))
        }
    }
}

fn prompt(a: args::PromptArgs) -> Result<()> {
    let mode = match a.mode {
        ModeArg::ZsTriplet => PromptMode::ZeroShotTriplet,
        ModeArg::ZsQuad => PromptMode::ZeroShotQuadruplet,
        ModeArg::Ft => PromptMode::FinetuneTriplet,
    };
    let vocab = load_vocabulary(&a.vocab)?;
    let fewshot = match &a.fewshot {
        Some(p) => {
            let mut docs = load_scene_graphs(p, DocumentKind::Prediction)?;
            docs.truncate(a.fewshot_count);
            docs
        }
        None => Vec::new(),
    };
    let spec = PromptSpec::new(mode, vocab).with_fewshot(fewshot).importance_ordered(a.importance_ordered);
    let text = match (&a.frame_emb, &a.text_emb) {
        (Some(f), Some(t)) => {
            let emb = EmbeddingArgs {
                frame_emb: f.clone(),
                text_emb: t.clone(),
                lambda: a.lambda,
                no_clamp: false,
            };
            let (frames, text, cfg) = embedding_setup(&emb)?;
            let space = space(&frames, &text)?;
            build_prompt(&spec, Some((&space, &cfg)))?
        }
        _ => build_prompt(&spec, None)?,
    };
    emit(a.output.as_deref(), &text)
}

fn synth(a: args::SynthArgs) -> Result<()> {
    let vocab = match &a.vocab {
        Some(p) => load_vocabulary(p)?,
        None => Vocabulary::synthetic(a.objects, a.predicates)?,
    };
    let cfg = SynthConfig {
        seed: a.seed,
        videos: a.videos,
        frames_per_video: a.frames,
        gt_per_frame: a.gt_per_frame,
        correct_k: a.correct,
        filler_k: a.filler,
        box_jitter: a.jitter,
    };
    let (gt, pred) = generate(&cfg, &vocab)?;
    emit(Some(&a.gt_out), &scene_graphs_to_string(&gt))?;
    emit(Some(&a.pred_out), &scene_graphs_to_string(&pred))
}
