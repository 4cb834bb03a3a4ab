//! feedql: fetch, discover, query, and aggregate query-enabled Atom feeds,
//! or serve collections over HTTP.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 query rejected
//! (including HTTP 400/401 and local validation failures), 3 transport
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "feedql", version, about = "Query-enabled Atom feeds from the command line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct QueryFlags {
    /// Filter expression, e.g. 'category==java;category!=jsp'
    #[arg(long)]
    q: Option<String>,
    /// Cross-entry functions, e.g. 'window(3600,4)' or 'cooccur(a,b,10)'
    #[arg(long)]
    xq: Option<String>,
    /// Sort key: updated, published, title, or geo-distance(lat,lon)
    #[arg(long = "sort-by")]
    sort_by: Option<String>,
    /// asc or desc
    #[arg(long)]
    order: Option<String>,
    /// Group key selector, e.g. category
    #[arg(long = "group-by")]
    group_by: Option<String>,
    #[arg(long = "max-results")]
    max_results: Option<String>,
    /// 1-based index of the first returned entry
    #[arg(long = "start-index")]
    start_index: Option<String>,
}

impl QueryFlags {
    /// The URI parameter multimap these flags stand for.
    pub fn params(&self) -> Vec<(String, String)> {
        let fields = [
            ("q", &self.q),
            ("xq", &self.xq),
            ("sort-by", &self.sort_by),
            ("order", &self.order),
            ("group-by", &self.group_by),
            ("max-results", &self.max_results),
            ("start-index", &self.start_index),
        ];
        fields
            .into_iter()
            .filter_map(|(name, value)| value.as_ref().map(|v| (name.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fetch a feed and print it as Atom
    Fetch {
        url: String,
        /// Walk prev-archive links and print the merged complete history
        #[arg(long)]
        follow_archives: bool,
    },
    /// Fetch a feed and print its query capabilities
    Discover { url: String },
    /// Run a query against a collection's query endpoint
    Query {
        /// The collection's feed URL; the query endpoint is <URL>/query
        url: String,
        #[command(flatten)]
        flags: QueryFlags,
        /// API key for keyed tiers
        #[arg(long)]
        key: Option<String>,
    },
    /// Aggregate several sources client-side and query the feedset
    Aggregate {
        /// A source feed URL; repeat for each source
        #[arg(long = "source", required = true)]
        sources: Vec<String>,
        #[command(flatten)]
        flags: QueryFlags,
        /// Drop unreachable sources with a warning instead of failing
        #[arg(long)]
        partial: bool,
        /// API key sent to sources on query requests
        #[arg(long)]
        key: Option<String>,
    },
    /// Load collections and serve them over HTTP until interrupted
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Why a command failed, mapped onto the exit-code contract.
pub enum CmdError {
    Usage(String),
    Rejected(String),
    Transport(String),
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Usage(_) => 1,
            CmdError::Rejected(_) => 2,
            CmdError::Transport(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Usage(m) | CmdError::Rejected(m) | CmdError::Transport(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Fetch { url, follow_archives } => commands::fetch(&url, follow_archives),
        Command::Discover { url } => commands::discover(&url),
        Command::Query { url, flags, key } => commands::query(&url, &flags, key),
        Command::Aggregate { sources, flags, partial, key } => {
            commands::aggregate(&sources, &flags, partial, key)
        }
        Command::Serve { config } => commands::serve(&config),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("feedql: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
