//! Pipeline orchestration: every command is a pure function of the config
//! file, the input artifacts under the workdir, and the seed.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use tlmg4eth::aig::build_account_graph;
use tlmg4eth::checkpoint;
use tlmg4eth::config::{RunConfig, TasgMode, Workspace};
use tlmg4eth::corpus::{
    build_sentences, ingest, AccountCorpus, AccountRecords, CorpusLine, Vocabulary,
};
use tlmg4eth::error::{Error, Result};
use tlmg4eth::fusion::{
    evaluate, joint_train, stratified_split, JointDataset, JointModel, LambdaConvention,
};
use tlmg4eth::metrics::EvalReport;
use tlmg4eth::synth::generate;
use tlmg4eth::tasg::{build_graph, export_edges, node_table, VocabGraph};
use tlmg4eth::tlm::{pretrain, EpochLog, PretrainConfig, TlmModel};

#[derive(Parser)]
#[command(name = "tlmg4eth", version, about = "Ethereum phishing-account detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override every seeded stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Interpolation weight between the graph and attention branches.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Vocabulary-graph edge threshold.
    #[arg(long, global = true)]
    theta: Option<f64>,

    /// Vocabulary-graph construction: npmi|tfidf|npmi-tfidf|off.
    #[arg(long = "tasg-mode", global = true)]
    tasg_mode: Option<TasgMode>,

    /// Keep transaction counts as account-graph edge weights.
    #[arg(long = "weighted-aig", global = true)]
    weighted_aig: Option<bool>,

    /// Which branch lambda multiplies: eq15 (graph) or prose (attention).
    #[arg(long = "lambda-convention", global = true, value_parser = parse_convention)]
    lambda_convention: Option<LambdaConvention>,
}

fn parse_convention(s: &str) -> std::result::Result<LambdaConvention, String> {
    match s {
        "eq15" => Ok(LambdaConvention::Eq15),
        "prose" => Ok(LambdaConvention::Prose),
        other => Err(format!("unknown lambda convention `{other}` (expected eq15|prose)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw transfer and label CSVs into the sentence corpus.
    Ingest,
    /// Generate a synthetic labeled transfer dataset.
    Synth,
    /// Masked-language-model pretraining of the transaction encoder.
    Pretrain,
    /// Build the vocabulary graph and the account interaction graph.
    BuildGraphs,
    /// Joint training of the attention classifier and the account-graph GCN.
    Train,
    /// Evaluate the trained joint checkpoint on the held-out test split.
    Eval,
    /// Retrain across the lambda grid (and theta grid unless tasg is off).
    Sweep,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BadConfig(_)
        | Error::InvalidLambda(_)
        | Error::InvalidThreshold(_)
        | Error::MalformedRow { .. }
        | Error::UnknownLabel { .. }
        | Error::Json(_) => 2,
        Error::MissingArtifact(_) => 3,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
        _ => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(lambda) = cli.lambda {
        cfg.joint.lambda = lambda;
    }
    if let Some(theta) = cli.theta {
        cfg.theta = theta;
    }
    if let Some(mode) = cli.tasg_mode {
        cfg.tasg_mode = mode;
    }
    if let Some(weighted) = cli.weighted_aig {
        cfg.weighted_aig = weighted;
    }
    if let Some(conv) = cli.lambda_convention {
        cfg.joint.lambda_convention = conv;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Synth => cmd_synth(&cfg),
        Command::Pretrain => cmd_pretrain(&cfg),
        Command::BuildGraphs => cmd_build_graphs(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    write_file(path, &out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_file(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let records = ingest(&cfg.transactions, &cfg.labels, cfg.max_transactions)?;
    let (corpora, vocab) = build_sentences(&records)?;
    let ws = cfg.workspace();
    ws.create_dirs()?;
    write_jsonl(&ws.records(), &records)?;
    let lines: Vec<CorpusLine> = corpora.iter().map(CorpusLine::from_corpus).collect();
    write_jsonl(&ws.corpus(), &lines)?;
    write_file(&ws.vocab(), &serde_json::to_string_pretty(&vocab.to_map())?)?;
    println!(
        "ingested {} accounts, {} sentences, vocabulary {}",
        corpora.len(),
        corpora.iter().map(|c| c.sentences.len()).sum::<usize>(),
        vocab.len()
    );
    Ok(())
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = generate(&cfg.synth)?;
    write_file(&cfg.transactions, &out.transactions_csv)?;
    write_file(&cfg.labels, &out.labels_csv)?;
    println!(
        "wrote {} ({} phishers of {} accounts) and {}",
        cfg.transactions.display(),
        out.n_phishers,
        cfg.synth.n_accounts,
        cfg.labels.display()
    );
    Ok(())
}

fn load_corpus(ws: &Workspace) -> Result<(Vec<AccountCorpus>, Vocabulary)> {
    ws.require(&ws.corpus())?;
    ws.require(&ws.vocab())?;
    let lines: Vec<CorpusLine> = read_jsonl(&ws.corpus())?;
    let corpora: Vec<AccountCorpus> = lines.into_iter().map(CorpusLine::into_corpus).collect();
    let map = serde_json::from_str(&read_file(&ws.vocab())?)?;
    Ok((corpora, Vocabulary::from_map(map)?))
}

fn load_records(ws: &Workspace) -> Result<Vec<AccountRecords>> {
    ws.require(&ws.records())?;
    read_jsonl(&ws.records())
}

fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let ws = cfg.workspace();
    let (corpora, vocab) = load_corpus(&ws)?;
    let pcfg = PretrainConfig {
        epochs: cfg.pretrain.epochs,
        lr: cfg.pretrain.lr,
        batch_size: cfg.pretrain.batch_size,
        mask_rate: cfg.pretrain.mask_rate,
        seed: cfg.seed,
    };
    let (model, logs) = pretrain(&corpora, &vocab, cfg.encoder.clone(), &pcfg)?;
    let hyper = serde_json::json!({
        "encoder": cfg.encoder,
        "vocab_size": vocab.len(),
        "seed": cfg.seed,
    });
    checkpoint::save(&ws.tlm_checkpoint(), &model.parameters(), hyper)?;
    write_jsonl(&ws.pretrain_log(), &logs)?;
    if let Some(last) = logs.last() {
        println!("pretrained {} epochs, final loss {:.6}", logs.len(), last.loss);
    } else {
        println!("pretrained 0 epochs (initialization only)");
    }
    Ok(())
}

fn build_vocab_graph(
    cfg: &RunConfig,
    corpora: &[AccountCorpus],
    vocab: &Vocabulary,
) -> Result<Option<VocabGraph>> {
    match cfg.tasg_mode.graph_mode() {
        Some(mode) => Ok(Some(build_graph(corpora, vocab.len(), mode, cfg.theta)?)),
        None => Ok(None),
    }
}

fn cmd_build_graphs(cfg: &RunConfig) -> Result<()> {
    let ws = cfg.workspace();
    let (corpora, vocab) = load_corpus(&ws)?;
    let records = load_records(&ws)?;

    let graph = build_vocab_graph(cfg, &corpora, &vocab)?;
    match &graph {
        Some(g) => {
            write_file(&ws.tasg_edges(), &export_edges(g))?;
            write_file(
                &ws.tasg_nodes(),
                &serde_json::to_string_pretty(&node_table(g, &vocab))?,
            )?;
        }
        None => {
            write_file(&ws.tasg_edges(), "")?;
            write_file(&ws.tasg_nodes(), "{}")?;
        }
    }

    let transactions: Vec<_> = records.iter().flat_map(|r| r.transactions.clone()).collect();
    let aig = build_account_graph(&transactions);
    write_file(&ws.aig_edges(), &aig.export_edges())?;

    let meta = serde_json::json!({
        "tasg_mode": cfg.tasg_mode.as_str(),
        "theta": cfg.theta,
        "weighted_aig": cfg.weighted_aig,
        "vocab_edges": graph.as_ref().map_or(0, |g| g.edges.len()),
        "account_nodes": aig.node_count(),
        "account_edges": aig.edges.len(),
    });
    write_file(&ws.graphs_meta(), &serde_json::to_string_pretty(&meta)?)?;
    println!(
        "built graphs: {} vocabulary edges, {} account nodes, {} account edges",
        graph.as_ref().map_or(0, |g| g.edges.len()),
        aig.node_count(),
        aig.edges.len()
    );
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<JointDataset> {
    let ws = cfg.workspace();
    let (corpora, vocab) = load_corpus(&ws)?;
    let records = load_records(&ws)?;
    ws.require(&ws.graphs_meta())?;
    let graph = build_vocab_graph(cfg, &corpora, &vocab)?;
    let transactions: Vec<_> = records.iter().flat_map(|r| r.transactions.clone()).collect();
    let aig = build_account_graph(&transactions);
    JointDataset::new(corpora, vocab, graph, aig, cfg.weighted_aig)
}

fn load_pretrained_tlm(cfg: &RunConfig, vocab_size: usize) -> Result<TlmModel> {
    let ws = cfg.workspace();
    ws.require(&ws.tlm_checkpoint())?;
    let ckpt = checkpoint::load(&ws.tlm_checkpoint())?;
    let (shape, _) = ckpt.get("tlm.tok_emb")?;
    if shape[0] != vocab_size {
        return Err(Error::VocabularyMismatch {
            checkpoint: shape[0],
            corpus: vocab_size,
        });
    }
    let model = TlmModel::new(vocab_size, cfg.encoder.clone(), cfg.seed)?;
    model.load_parameters(&ckpt)?;
    Ok(model)
}

fn make_report(cfg: &RunConfig, confusion: tlmg4eth::metrics::Confusion) -> EvalReport {
    EvalReport::new(
        cfg.dataset.clone(),
        cfg.seed,
        cfg.joint.lambda,
        cfg.theta,
        cfg.tasg_mode.as_str(),
        confusion,
    )
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let ws = cfg.workspace();
    let data = load_dataset(cfg)?;
    let tlm = load_pretrained_tlm(cfg, data.vocab.len())?;
    let splits = stratified_split(&data.labels, cfg.seed);
    let (model, _registry, logs) =
        joint_train(tlm, &data, cfg.fusion.clone(), &cfg.joint, &splits)?;

    let hyper = serde_json::json!({
        "encoder": cfg.encoder,
        "fusion": cfg.fusion,
        "joint": cfg.joint,
        "tasg_mode": cfg.tasg_mode.as_str(),
        "theta": cfg.theta,
        "weighted_aig": cfg.weighted_aig,
        "vocab_size": data.vocab.len(),
        "seed": cfg.seed,
    });
    checkpoint::save(&ws.joint_checkpoint(), &model.all_parameters(), hyper)?;
    write_jsonl(&ws.train_log(), &logs)?;

    let (_, confusion) = evaluate(
        &model,
        &data,
        &splits.test,
        cfg.joint.lambda,
        cfg.joint.lambda_convention,
    )?;
    let report = make_report(cfg, confusion);
    write_file(&ws.eval_report(), &serde_json::to_string_pretty(&report)?)?;
    let train_losses: Vec<f64> = logs
        .iter()
        .filter(|l| l.split == "train")
        .map(|l| l.loss)
        .collect();
    println!(
        "trained {} epochs, final loss {:.6}, test F1 {:.4}",
        train_losses.len(),
        train_losses.last().copied().unwrap_or(f64::NAN),
        report.f1
    );
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let ws = cfg.workspace();
    let data = load_dataset(cfg)?;
    ws.require(&ws.joint_checkpoint())?;
    let ckpt = checkpoint::load(&ws.joint_checkpoint())?;
    let tlm = TlmModel::new(data.vocab.len(), cfg.encoder.clone(), cfg.seed)?;
    let vocab_nodes = data.vocab_graph.as_ref().map(|g| g.node_count());
    let model = JointModel::new(tlm, cfg.fusion.clone(), vocab_nodes, cfg.seed)?;
    model.load_parameters(&ckpt)?;

    let splits = stratified_split(&data.labels, cfg.seed);
    let (_, confusion) = evaluate(
        &model,
        &data,
        &splits.test,
        cfg.joint.lambda,
        cfg.joint.lambda_convention,
    )?;
    let report = make_report(cfg, confusion);
    let text = serde_json::to_string_pretty(&report)?;
    write_file(&ws.eval_report(), &text)?;
    println!("{text}");
    Ok(())
}

fn sweep_row(cfg: &RunConfig) -> Result<(EvalReport, Vec<EpochLog>)> {
    let data = load_dataset(cfg)?;
    let tlm = load_pretrained_tlm(cfg, data.vocab.len())?;
    let splits = stratified_split(&data.labels, cfg.seed);
    let (model, _, logs) = joint_train(tlm, &data, cfg.fusion.clone(), &cfg.joint, &splits)?;
    let (_, confusion) = evaluate(
        &model,
        &data,
        &splits.test,
        cfg.joint.lambda,
        cfg.joint.lambda_convention,
    )?;
    Ok((make_report(cfg, confusion), logs))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let ws = cfg.workspace();

    let mut lambda_csv = String::from("lambda,precision,recall,f1,b_acc\n");
    for step in 0..=10u32 {
        let lambda = f64::from(step) / 10.0;
        let mut c = cfg.clone();
        c.joint.lambda = lambda;
        let (report, _) = sweep_row(&c)?;
        lambda_csv.push_str(&format!(
            "{:.1},{:.4},{:.4},{:.4},{:.4}\n",
            lambda, report.precision, report.recall, report.f1, report.b_acc
        ));
        println!("lambda {:.1}: f1 {:.4}", lambda, report.f1);
    }
    write_file(&ws.lambda_sweep(), &lambda_csv)?;

    if cfg.tasg_mode != TasgMode::Off {
        let mut theta_csv = String::from("theta,precision,recall,f1,b_acc\n");
        for step in 0..=9u32 {
            let theta = f64::from(step) / 10.0;
            let mut c = cfg.clone();
            c.theta = theta;
            let (report, _) = sweep_row(&c)?;
            theta_csv.push_str(&format!(
                "{:.1},{:.4},{:.4},{:.4},{:.4}\n",
                theta, report.precision, report.recall, report.f1, report.b_acc
            ));
            println!("theta {:.1}: f1 {:.4}", theta, report.f1);
        }
        write_file(&ws.theta_sweep(), &theta_csv)?;
    }
    Ok(())
}
