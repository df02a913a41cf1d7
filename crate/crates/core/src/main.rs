use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use fsmguard::corpus::{self, CorpusBase, CorpusOptions, CorpusRecord};
use fsmguard::frontend::{self, emit_verilog, SourceText};
use fsmguard::inject::{Injector, VulnClass};
use fsmguard::llm::{self, load_pipeline, temperature_grid, GenerationParams, ProviderConfig};
use fsmguard::mitigate::{mitigate, MitigationConfig};
use fsmguard::report::{self, Task, TranscriptLine};
use fsmguard::rules::{run_all_checks, RuleConfig};

/// Security rule checking, vulnerability injection and mitigation for RTL state machines.
///
/// Exit codes: 0 success, 1 violations found (check), 2 usage or I/O error.
#[derive(Parser)]
#[command(name = "fsmguard", version)]
struct Cli {
    /// TOML file with [rules], [corpus], [mitigation] and [provider] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the rule checker on a design.
    Check {
        design: PathBuf,
        /// Protected states, comma separated.
        #[arg(long, value_delimiter = ',')]
        protected: Vec<String>,
        #[arg(long)]
        json: bool,
        /// Enable every rule, FIF included.
        #[arg(long)]
        all_rules: bool,
    },
    /// Inject one vulnerability class into a design.
    Inject {
        design: PathBuf,
        #[arg(long)]
        class: VulnClass,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        protected: Vec<String>,
        /// Output design; defaults to <design>.<class>.v next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Injection plan JSON; defaults to the output path with .plan.json.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Repair rule violations in a design.
    Mitigate {
        design: PathBuf,
        #[arg(long, value_delimiter = ',')]
        protected: Vec<String>,
        /// Output design; defaults to <design>.mitigated.v.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the outcome JSON here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a labeled JSONL corpus from clean base designs.
    GenCorpus {
        bases: Vec<PathBuf>,
        /// Class counts, e.g. static_deadlock=10,missing_default=5.
        #[arg(long, value_delimiter = ',', required = true)]
        mix: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a prompt pipeline over a corpus or a single design.
    RunPipeline {
        /// Shipped pipeline name or pipeline TOML path.
        #[arg(long)]
        pipeline: String,
        #[arg(long, conflicts_with = "design")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a pipeline across a temperature grid.
    Sweep {
        #[arg(long)]
        pipeline: String,
        #[arg(long, conflicts_with = "design")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        design: Option<PathBuf>,
        /// Explicit temperatures; the 11-point 0.0..1.0 grid when omitted.
        #[arg(long, value_delimiter = ',')]
        temperatures: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score transcripts (or the built-in engines) against corpus labels.
    Score {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        corpus: PathBuf,
        /// Transcript JSONL; the built-in checker/mitigator is scored when omitted.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Intended class, for insertion scoring.
        #[arg(long)]
        class: Option<VulnClass>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        text: bool,
    },
    /// Rename keyword-bearing identifiers and scrub comments.
    Sanitize {
        design: PathBuf,
        #[arg(long, value_delimiter = ',')]
        keywords: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Rename map JSON; defaults to the output path with .map.json.
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AppConfig {
    rules: RuleConfig,
    corpus: CorpusOptions,
    mitigation: MitigationConfig,
    provider: ProviderConfig,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn read_design(path: &Path) -> Res<SourceText> {
    SourceText::from_file(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, content: &str) -> Res<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| Failure(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("design");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn protected_set(list: &[String]) -> BTreeSet<String> {
    list.iter().filter(|s| !s.is_empty()).cloned().collect()
}

fn parse_mix(items: &[String]) -> Res<BTreeMap<VulnClass, usize>> {
    let mut mix = BTreeMap::new();
    for item in items {
        let (c, n) = item
            .split_once('=')
            .ok_or_else(|| Failure(format!("mix entry `{item}` is not class=count")))?;
        let class: VulnClass = c.trim().parse()?;
        let n: usize = n.trim().parse().map_err(|_| Failure(format!("bad count in `{item}`")))?;
        *mix.entry(class).or_insert(0) += n;
    }
    Ok(mix)
}

fn pipeline_inputs(corpus: &Option<PathBuf>, design: &Option<PathBuf>) -> Res<Vec<SourceText>> {
    match (corpus, design) {
        (Some(c), _) => Ok(corpus::from_jsonl(&read_text(c)?)?
            .into_iter()
            .map(|r| SourceText::new(r.source, r.id))
            .collect()),
        (None, Some(d)) => Ok(vec![read_design(d)?]),
        (None, None) => Err(Failure("give --corpus or --design".into())),
    }
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

fn run(cli: Cli) -> Res<u8> {
    let config_text = match &cli.config {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let config: AppConfig = toml::from_str(&config_text).map_err(|e| Failure(format!("config: {e}")))?;
    match cli.command {
        Command::Check {
            design,
            protected,
            json,
            all_rules,
        } => {
            let src = read_design(&design)?;
            let rules = if all_rules { RuleConfig::all() } else { config.rules.clone() };
            let report = run_all_checks(&src, &protected_set(&protected), &rules);
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if !report.parsed {
                return Ok(2);
            }
            Ok(if report.violations.is_empty() { 0 } else { 1 })
        }
        Command::Inject {
            design,
            class,
            seed,
            protected,
            out,
            plan,
        } => {
            let src = read_design(&design)?;
            let ast = frontend::parse(&src).map_err(|d| Failure(d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")))?;
            let injector = Injector {
                protected: protected_set(&protected),
                config: config.rules.clone(),
            };
            let (bug, p) = injector.plan_injection(class, &ast, seed)?;
            let out = out.unwrap_or_else(|| with_suffix(&design, &format!(".{}.v", class.as_str().to_ascii_lowercase())));
            let plan_path = plan.unwrap_or_else(|| with_suffix(&out, ".plan.json"));
            write_atomic(&out, &emit_verilog(&bug).content)?;
            write_atomic(&plan_path, &(serde_json::to_string_pretty(&p)? + "\n"))?;
            eprintln!("wrote {} and {}", out.display(), plan_path.display());
            Ok(0)
        }
        Command::Mitigate {
            design,
            protected,
            out,
            report,
        } => {
            let src = read_design(&design)?;
            let check = run_all_checks(&src, &protected_set(&protected), &config.rules);
            if !check.parsed {
                print!("{}", check.to_text());
                return Ok(2);
            }
            let outcome = mitigate(&src, &check, &config.mitigation);
            let out = out.unwrap_or_else(|| with_suffix(&design, ".mitigated.v"));
            write_atomic(&out, &outcome.design.content)?;
            let json = serde_json::to_string_pretty(&outcome)? + "\n";
            match report {
                Some(r) => write_atomic(&r, &json)?,
                None => print!("{json}"),
            }
            Ok(0)
        }
        Command::GenCorpus { bases, mix, seed, out } => {
            if bases.is_empty() {
                return Err(Failure("no base designs given".into()));
            }
            let bases = bases
                .iter()
                .map(|p| {
                    let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("base").to_string();
                    Ok(CorpusBase::new(id, read_design(p)?))
                })
                .collect::<Res<Vec<_>>>()?;
            let mut options = config.corpus.clone();
            options.rules = config.rules.clone();
            let records = corpus::generate_corpus_with(&bases, &parse_mix(&mix)?, seed, &options)?;
            write_atomic(&out, &corpus::to_jsonl(&records))?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
            Ok(0)
        }
        Command::RunPipeline {
            pipeline,
            corpus,
            design,
            out,
        } => {
            let spec = load_pipeline(&pipeline)?;
            let provider = config.provider.build()?;
            let designs = pipeline_inputs(&corpus, &design)?;
            let params = spec.steps[0].params.clone();
            let points = llm::sweep_params(&spec, &designs, &[params], provider.as_ref(), config.provider.max_in_flight)?;
            let lines: Vec<TranscriptLine> = points
                .into_iter()
                .map(|p| TranscriptLine {
                    design: p.design,
                    temperature: None,
                    transcript: p.transcript,
                })
                .collect();
            write_atomic(&out, &jsonl(&lines))?;
            Ok(0)
        }
        Command::Sweep {
            pipeline,
            corpus,
            design,
            temperatures,
            out,
        } => {
            let spec = load_pipeline(&pipeline)?;
            let provider = config.provider.build()?;
            let designs = pipeline_inputs(&corpus, &design)?;
            let base = GenerationParams::default();
            let grid = if temperatures.is_empty() {
                temperature_grid(&base)
            } else {
                temperatures
                    .iter()
                    .map(|t| base.with_temperature(*t))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let points = llm::sweep_params(&spec, &designs, &grid, provider.as_ref(), config.provider.max_in_flight)?;
            let lines: Vec<TranscriptLine> = points
                .into_iter()
                .map(|p| TranscriptLine {
                    design: p.design,
                    temperature: Some(p.params.temperature()),
                    transcript: p.transcript,
                })
                .collect();
            write_atomic(&out, &jsonl(&lines))?;
            Ok(0)
        }
        Command::Score {
            task,
            corpus,
            transcripts,
            class,
            out,
            text,
        } => {
            let records: Vec<CorpusRecord> = corpus::from_jsonl(&read_text(&corpus)?)?;
            let (outcomes, provider) = match &transcripts {
                Some(t) => {
                    let lines = read_text(t)?
                        .lines()
                        .filter(|l| !l.trim().is_empty())
                        .map(serde_json::from_str::<TranscriptLine>)
                        .collect::<Result<Vec<_>, _>>()?;
                    if let Some(l) = lines.iter().find(|l| l.transcript.schema_version != fsmguard::SCHEMA_VERSION) {
                        return Err(Failure(format!("transcript schema version {} is not supported", l.transcript.schema_version)));
                    }
                    let ids: BTreeSet<String> = lines.iter().map(|l| l.transcript.provider.clone()).collect();
                    let ids: Vec<String> = ids.into_iter().collect();
                    (report::score_transcripts(task, class, &lines, &records, &config.rules)?, ids.join(","))
                }
                None => (report::score_static(task, &records, &config.rules), "static-oracle".to_string()),
            };
            let mut rep = report::compute_metrics(&outcomes)?;
            let seeds: BTreeSet<u64> = records.iter().map(|r| r.seed).collect();
            rep.provenance = report::Provenance {
                config_hash: report::config_hash(&config_text),
                seeds: seeds.into_iter().collect(),
                provider,
            };
            let body = if text { rep.to_text() } else { rep.to_json() + "\n" };
            match out {
                Some(o) => write_atomic(&o, &body)?,
                None => print!("{body}"),
            }
            Ok(0)
        }
        Command::Sanitize {
            design,
            keywords,
            seed,
            out,
            map,
        } => {
            let src = read_design(&design)?;
            let ast = frontend::parse(&src).map_err(|d| Failure(d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n")))?;
            let kw: Vec<&str> = if keywords.is_empty() {
                corpus::DEFAULT_KEYWORDS.to_vec()
            } else {
                keywords.iter().map(String::as_str).collect()
            };
            let (clean, renames) = corpus::sanitize_identifiers(&ast, &kw, seed)?;
            let map_path = map.unwrap_or_else(|| with_suffix(&out, ".map.json"));
            let sidecar = serde_json::json!({
                "schema_version": fsmguard::SCHEMA_VERSION,
                "renames": renames,
            });
            write_atomic(&out, &emit_verilog(&clean).content)?;
            write_atomic(&map_path, &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
