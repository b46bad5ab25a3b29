//! Command-line front end: `serve`, `chat` and `replay`.
//!
//! Exit codes: 0 success, 1 replay mismatch, 2 usage or parse error,
//! 3 environment error (bind failure, missing credential, I/O).

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use similar::TextDiff;
use thiserror::Error;

use crate::chain::{build_chain, Chain, ChainError};
use crate::messages::{format_transcript, Message, RoleLabels};
use crate::model_client::{ChatModel, ModelError, RemoteBackend, ScriptError, ScriptedBackend};
use crate::persona::{PersonaError, PersonaRegistry, DEFAULT_PERSONA_ID};
use crate::service::{self, ServeError, ServiceConfig, ServiceConfigError};
use crate::transcript::{self, TranscriptError, TranscriptWriter};

#[derive(Debug, Parser)]
#[command(name = "mindguide", version, about = "Mental-health assistant chat service and tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Remote,
    Scripted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP chat service.
    Serve {
        /// Service config (JSON). Falls back to $MINDGUIDE_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Overrides the backend in the config file.
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Chat in the terminal. `/quit` exits, `/history` prints the conversation.
    Chat {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_PERSONA_ID)]
        persona: String,
        #[arg(long, value_enum, default_value = "remote")]
        backend: BackendKind,
        /// JSON array of replies for the scripted backend.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Record the conversation to this JSONL transcript.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Re-run a transcript's human turns against a script and diff the replies.
    Replay {
        transcript: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_PERSONA_ID)]
        persona: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ServiceConfigError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("cannot start chain: {0}")]
    Chain(#[from] ChainError),
    #[error("script has {replies} replies but transcript has {turns} human turns")]
    TurnCount { replies: usize, turns: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_)
            | CliError::Config(_)
            | CliError::Persona(_)
            | CliError::Script(_)
            | CliError::Chain(_)
            | CliError::TurnCount { .. } => 2,
            CliError::Transcript(TranscriptError::Io { .. }) => 3,
            CliError::Transcript(_) => 2,
            CliError::Model(_) | CliError::Io(_) => 3,
            CliError::Serve(ServeError::Config(ServiceConfigError::Backend(_))) => 3,
            CliError::Serve(ServeError::Config(_) | ServeError::Persona(_)) => 2,
            CliError::Serve(ServeError::Bind { .. } | ServeError::Server(_)) => 3,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    let config = ServiceConfig::resolve(path)?;
    config.model.validate().map_err(ServiceConfigError::from)?;
    Ok(config)
}

fn personas(config: &ServiceConfig) -> Result<PersonaRegistry, CliError> {
    Ok(match &config.persona_dir {
        Some(dir) => PersonaRegistry::load_dir(dir)?,
        None => PersonaRegistry::default(),
    })
}

fn make_backend(kind: BackendKind, script: Option<&Path>, config: &ServiceConfig) -> Result<Arc<dyn ChatModel>, CliError> {
    match (kind, script) {
        (BackendKind::Scripted, Some(path)) => Ok(Arc::new(ScriptedBackend::from_file(path)?)),
        (BackendKind::Scripted, None) => Err(CliError::Usage("--backend scripted requires --script PATH".into())),
        (BackendKind::Remote, _) => Ok(Arc::new(RemoteBackend::from_env(&config.model.api_key_env)?)),
    }
}

/// Terminal REPL over one chain. Replies go to `out`; prompts and errors go
/// to `err`. Model errors are reported and the loop continues.
pub async fn chat_loop<R: BufRead, W: Write, E: Write>(
    chain: &mut Chain,
    input: R,
    mut out: W,
    mut err: E,
    mut transcript: Option<&mut TranscriptWriter>,
) -> Result<(), CliError> {
    if let Some(welcome) = chain.memory().preamble() {
        writeln!(out, "{}", welcome.content)?;
        if let Some(t) = transcript.as_deref_mut() {
            t.append(welcome)?;
        }
    }
    out.flush()?;
    let mut lines = input.lines();
    loop {
        write!(err, "> ")?;
        err.flush()?;
        let Some(line) = lines.next() else { break };
        let line = line?;
        match line.trim() {
            "/quit" => break,
            "/history" => {
                let text = format_transcript(&chain.memory().all_messages(), &RoleLabels::default())
                    .expect("default labels cover all roles");
                writeln!(out, "{text}")?;
            }
            "" => continue,
            _ => match chain.run(&line).await {
                Ok(output) => {
                    writeln!(out, "{}", output.reply.content)?;
                    if let Some(t) = transcript.as_deref_mut() {
                        t.append(&Message::human(line.clone()))?;
                        t.append(&output.reply)?;
                    }
                }
                Err(e) => writeln!(err, "error: {e}")?,
            },
        }
        out.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnMismatch {
    /// 1-based human turn index; 0 is the welcome message.
    pub turn: usize,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub turns: usize,
    pub mismatches: Vec<TurnMismatch>,
}

impl ReplayReport {
    pub fn is_match(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Unified diff of every mismatching turn.
    pub fn diff(&self) -> String {
        let mut out = String::new();
        for m in &self.mismatches {
            let label = if m.turn == 0 { "welcome".to_string() } else { format!("turn {}", m.turn) };
            let recorded = with_newline(&m.recorded);
            let replayed = with_newline(&m.replayed);
            let diff = TextDiff::from_lines(recorded.as_str(), replayed.as_str());
            out.push_str(
                &diff
                    .unified_diff()
                    .header(&format!("transcript {label}"), &format!("replay {label}"))
                    .to_string(),
            );
        }
        out
    }
}

fn with_newline(s: &str) -> String {
    if s.ends_with('\n') {
        s.to_string()
    } else {
        format!("{s}\n")
    }
}

/// Replays `messages` (a parsed transcript) through a fresh chain.
pub async fn replay_messages(
    messages: &[Message],
    script: Vec<String>,
    registry: &PersonaRegistry,
    persona_id: &str,
    config: &ServiceConfig,
) -> Result<ReplayReport, CliError> {
    let recorded = transcript::memory_from_messages(messages)?;
    let turns = recorded.exchanges().len();
    if script.len() != turns {
        return Err(CliError::TurnCount {
            replies: script.len(),
            turns,
        });
    }
    let persona = registry.get(persona_id)?;
    let backend = Arc::new(ScriptedBackend::new(script));
    let mut chain = build_chain(persona, backend, config.model.clone(), config.memory)?;

    let mut mismatches = Vec::new();
    if let Some(welcome) = recorded.preamble() {
        if welcome.content != persona.welcome {
            mismatches.push(TurnMismatch {
                turn: 0,
                recorded: welcome.content.clone(),
                replayed: persona.welcome.clone(),
            });
        }
    }
    for (i, exchange) in recorded.exchanges().iter().enumerate() {
        let replayed = match chain.run(&exchange.human().content).await {
            Ok(out) => out.reply.content,
            Err(e) => format!("<error: {e}>"),
        };
        if replayed != exchange.ai().content {
            mismatches.push(TurnMismatch {
                turn: i + 1,
                recorded: exchange.ai().content.clone(),
                replayed,
            });
        }
    }
    Ok(ReplayReport { turns, mismatches })
}

async fn replay(transcript_path: &Path, script: &Path, config: Option<&Path>, persona: &str) -> Result<i32, CliError> {
    let config = load_config(config)?;
    let registry = personas(&config)?;
    let messages = transcript::read_messages(transcript_path)?;
    let script: Vec<String> = {
        let text = std::fs::read_to_string(script).map_err(|source| ScriptError::Io {
            path: script.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ScriptError::Parse {
            path: script.to_path_buf(),
            source,
        })?
    };
    let report = replay_messages(&messages, script, &registry, persona, &config).await?;
    if report.is_match() {
        println!("replay ok: {} turns match", report.turns);
        Ok(0)
    } else {
        print!("{}", report.diff());
        println!("replay mismatch: {} of {} turns differ", report.mismatches.len(), report.turns);
        Ok(1)
    }
}

async fn chat(
    config: Option<&Path>,
    persona: &str,
    backend: BackendKind,
    script: Option<&Path>,
    transcript_path: Option<&Path>,
) -> Result<i32, CliError> {
    let config = load_config(config)?;
    let registry = personas(&config)?;
    let persona = registry.get(persona)?;
    let backend = make_backend(backend, script, &config)?;
    let mut chain = build_chain(persona, backend, config.model.clone(), config.memory)?;
    let mut writer = transcript_path.map(TranscriptWriter::create).transpose()?;
    let stdin = io::stdin();
    chat_loop(&mut chain, stdin.lock(), io::stdout(), io::stderr(), writer.as_mut()).await?;
    Ok(0)
}

async fn serve(config: Option<&Path>, port: Option<u16>, backend: Option<BackendKind>, script: Option<&Path>) -> Result<i32, CliError> {
    let mut config = ServiceConfig::resolve(config)?;
    if let Some(port) = port {
        config.port = port;
    }
    match (backend, script) {
        (Some(BackendKind::Scripted), Some(script)) => {
            config.backend = service::BackendConfig::Scripted { script: script.to_path_buf() }
        }
        (Some(BackendKind::Scripted), None) => {
            return Err(CliError::Usage("--backend scripted requires --script PATH".into()))
        }
        (Some(BackendKind::Remote), _) => config.backend = service::BackendConfig::Remote,
        (None, _) => {}
    }
    let svc = service::build_service(&config)?;
    let listener = service::bind(&config).await?;
    service::serve_on(listener, svc, &config, shutdown_signal()).await?;
    Ok(0)
}

/// Resolves on SIGINT, or SIGTERM on Unix.
async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut sig) => {
                sig.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {}
        _ = terminate => {}
    }
    tracing::info!("shutting down");
}

/// Runs a parsed command and returns the process exit code.
pub async fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Serve {
            config,
            port,
            backend,
            script,
        } => serve(config.as_deref(), *port, *backend, script.as_deref()).await,
        Command::Chat {
            config,
            persona,
            backend,
            script,
            transcript,
        } => chat(config.as_deref(), persona, *backend, script.as_deref(), transcript.as_deref()).await,
        Command::Replay {
            transcript,
            script,
            config,
            persona,
        } => replay(transcript, script, config.as_deref(), persona).await,
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryPolicy;
    use crate::messages::Role;
    use crate::model_client::ModelConfig;
    use crate::persona::Persona;

    fn scripted_chain(replies: &[&str]) -> Chain {
        build_chain(
            &Persona::mindguide(),
            Arc::new(ScriptedBackend::new(replies.iter().copied())),
            ModelConfig::default(),
            MemoryPolicy::Buffer,
        )
        .unwrap()
    }

    async fn run_chat(replies: &[&str], input: &str) -> (String, String) {
        let mut chain = scripted_chain(replies);
        let mut out = Vec::new();
        let mut err = Vec::new();
        chat_loop(&mut chain, input.as_bytes(), &mut out, &mut err, None).await.unwrap();
        (String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[tokio::test]
    async fn chat_golden_output() {
        let welcome = Persona::mindguide().welcome;
        let (out, _) = run_chat(&["ok"], "hello\n").await;
        assert_eq!(out, format!("{welcome}\nok\n"));
    }

    #[tokio::test]
    async fn chat_eof_and_quit() {
        let welcome = Persona::mindguide().welcome;
        assert_eq!(run_chat(&[], "").await.0, format!("{welcome}\n"));
        assert_eq!(run_chat(&["never"], "/quit\nhello\n").await.0, format!("{welcome}\n"));
    }

    #[tokio::test]
    async fn chat_errors_continue() {
        let (out, err) = run_chat(&[], "one\ntwo\n").await;
        assert_eq!(err.matches("error: scripted backend has no replies left").count(), 2);
        assert_eq!(out.lines().count(), 1);
    }

    #[tokio::test]
    async fn chat_history_command() {
        let (out, _) = run_chat(&["r1"], "q1\n/history\n").await;
        assert!(out.ends_with("Human: q1\nAI: r1\n"), "{out}");
        assert!(out.contains("\nAI: Welcome! to your therapy session"));
    }

    #[test]
    fn diff_names_turn() {
        let report = ReplayReport {
            turns: 2,
            mismatches: vec![TurnMismatch {
                turn: 2,
                recorded: "fine".into(),
                replayed: "changed".into(),
            }],
        };
        let diff = report.diff();
        assert!(diff.contains("--- transcript turn 2"), "{diff}");
        assert!(diff.contains("+++ replay turn 2"));
        assert!(diff.contains("-fine\n+changed"));
    }

    #[tokio::test]
    async fn replay_counts_and_structure() {
        let registry = PersonaRegistry::default();
        let config = ServiceConfig::default();
        let welcome = Message::ai(Persona::mindguide().welcome);
        let msgs = vec![welcome.clone(), Message::human("q"), Message::ai("a")];

        let ok = replay_messages(&msgs, vec!["a".into()], &registry, "mindguide", &config).await.unwrap();
        assert!(ok.is_match());
        let bad = replay_messages(&msgs, vec!["b".into()], &registry, "mindguide", &config).await.unwrap();
        assert_eq!(bad.mismatches[0].turn, 1);

        let err = replay_messages(&msgs, vec![], &registry, "mindguide", &config).await.unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = replay_messages(&msgs[..2], vec![], &registry, "mindguide", &config).await.unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let other_welcome = vec![Message::ai("hi"), Message::human("q"), Message::ai("a")];
        let report = replay_messages(&other_welcome, vec!["a".into()], &registry, "mindguide", &config)
            .await
            .unwrap();
        assert_eq!(report.mismatches[0].turn, 0);
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from(["mindguide", "chat", "--backend", "scripted", "--script", "s.json"]).unwrap();
        assert!(matches!(cli.command, Command::Chat { backend: BackendKind::Scripted, .. }));
        assert!(Cli::try_parse_from(["mindguide", "replay", "t.jsonl"]).is_err());
        let cli = Cli::try_parse_from(["mindguide", "serve", "--port", "9999"]).unwrap();
        assert!(matches!(cli.command, Command::Serve { port: Some(9999), .. }));
    }

    #[test]
    fn role_labels_cover_all() {
        for role in Role::ALL {
            assert!(RoleLabels::default().get(role).is_some());
        }
    }
}
