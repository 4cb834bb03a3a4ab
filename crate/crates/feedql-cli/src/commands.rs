//! The five subcommands. Feeds print to stdout as Atom; diagnostics go to
//! stderr.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use feedql::aggregate::{evaluate_residual, plan_query, Fetcher};
use feedql::atom::{parse_feed, serialize_feed, Feed, Timestamp};
use feedql::capabilities::Capabilities;
use feedql::eval::EvalContext;
use feedql::query::{parse_uri_params, serialize_query, validate_against_capabilities, Query};
use feedql_service::client::{query_url, resolve, ClientError, HttpClient};
use feedql_service::config::parse_config;
use feedql_service::{RunningService, ServiceState};

use crate::{CmdError, QueryFlags};

fn transport(e: &ClientError) -> CmdError {
    CmdError::Transport(e.to_string())
}

/// Classifies a client error per the exit-code contract: connection-level
/// failures are transport errors, everything the server said is a rejection.
fn classify(e: ClientError) -> CmdError {
    match e {
        ClientError::Transport(m) => CmdError::Transport(m),
        ClientError::Status { status, body } => {
            let body = body.trim();
            if body.is_empty() {
                CmdError::Rejected(format!("HTTP {status}"))
            } else {
                CmdError::Rejected(format!("HTTP {status}: {body}"))
            }
        }
        ClientError::Atom(e) => CmdError::Rejected(format!("response is not a usable feed: {e}")),
        ClientError::Caps(e) => CmdError::Rejected(e.to_string()),
        ClientError::Url(m) => CmdError::Usage(m),
    }
}

fn print_feed(feed: &Feed, raw_fallback: Option<&str>) {
    match serialize_feed(feed) {
        Ok(xml) => print!("{xml}"),
        // a remote feed can be well-formed yet violate invariants we refuse
        // to re-serialize; pass its own bytes through instead
        Err(_) => {
            if let Some(raw) = raw_fallback {
                print!("{raw}");
            }
        }
    }
    let _ = std::io::stdout().flush();
}

pub fn fetch(url: &str, follow_archives: bool) -> Result<(), CmdError> {
    let client = HttpClient::new(None);
    let response = client.get(url).map_err(|e| transport(&e))?;
    if !(200..300).contains(&response.status) {
        return Err(classify(ClientError::Status { status: response.status, body: response.body }));
    }
    let feed = parse_feed(&response.body)
        .map_err(|e| CmdError::Rejected(format!("response is not a feed: {e}")))?;

    if !follow_archives {
        print_feed(&feed, Some(&response.body));
        return Ok(());
    }

    // walk prev-archive links, newest to oldest
    let mut history: Vec<Feed> = Vec::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut current_url = url.to_string();
    let mut current = feed;
    loop {
        let next = current
            .links
            .iter()
            .find(|l| l.rel == "prev-archive")
            .map(|l| l.href.clone());
        history.push(current);
        match next {
            Some(href) => {
                let absolute = resolve(&current_url, &href).map_err(classify)?;
                if !visited.insert(absolute.clone()) {
                    break;
                }
                current = client.fetch_feed(&absolute).map_err(classify)?;
                current_url = absolute;
            }
            None => break,
        }
    }

    // merge, dedup by id keeping the greatest updated, oldest first
    let mut merged: Vec<feedql::atom::Entry> = Vec::new();
    for feed in &history {
        for entry in &feed.entries {
            match merged.iter_mut().find(|e| e.id == entry.id) {
                Some(existing) => {
                    if entry.updated > existing.updated {
                        *existing = entry.clone();
                    }
                }
                None => merged.push(entry.clone()),
            }
        }
    }
    merged.sort_by(|a, b| a.updated.cmp(&b.updated).then_with(|| a.id.cmp(&b.id)));

    let head = &history[0];
    let mut out = Feed::new(
        head.id.clone(),
        head.title.clone(),
        merged.iter().map(|e| e.updated).max().unwrap_or_else(Timestamp::epoch),
    );
    out.authors = head.authors.clone();
    out.entries = merged;
    print_feed(&out, None);
    Ok(())
}

pub fn discover(url: &str) -> Result<(), CmdError> {
    let client = HttpClient::new(None);
    let feed = client.fetch_feed(url).map_err(classify)?;
    let caps = match client.fetch_capabilities(url, &feed).map_err(classify)? {
        Some((_, caps)) => caps,
        None => {
            println!("no query capabilities");
            return Ok(());
        }
    };

    println!("selectors:");
    for (name, scope) in &caps.selectors {
        println!("  {name:<20} {}", scope.as_str());
    }
    let operators: Vec<&str> = caps.operators.iter().map(String::as_str).collect();
    println!("operators: {}", operators.join(" "));
    let functions: Vec<String> =
        caps.functions.iter().map(|(name, arity)| format!("{name}/{arity}")).collect();
    println!("functions: {}", functions.join(" "));
    let shaping: Vec<&str> = caps.shaping.iter().map(String::as_str).collect();
    println!("shaping: {}", shaping.join(" "));
    println!("tier: {}", caps.tier.as_str());
    Ok(())
}

fn parse_flags(flags: &QueryFlags) -> Result<Query, CmdError> {
    parse_uri_params(&flags.params()).map_err(|e| CmdError::Rejected(e.to_string()))
}

pub fn query(url: &str, flags: &QueryFlags, key: Option<String>) -> Result<(), CmdError> {
    let query = parse_flags(flags)?;
    let client = HttpClient::new(key);
    let feed = client.fetch_feed(url).map_err(classify)?;

    // fail fast with the same descriptors the server would return
    match client.fetch_capabilities(url, &feed) {
        Ok(Some((_, caps))) => {
            let violations = validate_against_capabilities(&query, &caps);
            if !violations.is_empty() {
                let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                return Err(CmdError::Rejected(format!(
                    "query uses unsupported features:\n{}",
                    lines.join("\n")
                )));
            }
        }
        Ok(None) | Err(ClientError::Status { .. }) => {} // nothing to validate against
        Err(e) => return Err(classify(e)),
    }

    let target = query_url(url, &serialize_query(&query));
    let response = client.get(&target).map_err(|e| transport(&e))?;
    if !(200..300).contains(&response.status) {
        return Err(classify(ClientError::Status { status: response.status, body: response.body }));
    }
    let feed = parse_feed(&response.body)
        .map_err(|e| CmdError::Rejected(format!("response is not a feed: {e}")))?;
    print_feed(&feed, Some(&response.body));
    Ok(())
}

pub fn aggregate(
    sources: &[String],
    flags: &QueryFlags,
    partial: bool,
    key: Option<String>,
) -> Result<(), CmdError> {
    for (i, source) in sources.iter().enumerate() {
        if sources[..i].contains(source) {
            return Err(CmdError::Usage(format!("duplicate --source {source}")));
        }
    }
    let query = parse_flags(flags)?;
    let client = HttpClient::new(key);

    // discover per-source capabilities; a dead source is fatal unless
    // --partial downgrades it to a warning
    let mut live: Vec<(String, Option<Capabilities>)> = Vec::new();
    let mut dead: Vec<String> = Vec::new();
    for origin in sources {
        match client.fetch_feed(origin) {
            Ok(feed) => {
                let caps = client
                    .fetch_capabilities(origin, &feed)
                    .ok()
                    .flatten()
                    .map(|(_, caps)| caps);
                live.push((origin.clone(), caps));
            }
            Err(e) => {
                if !partial {
                    return Err(CmdError::Transport(format!("source {origin} unavailable: {e}")));
                }
                eprintln!("feedql: warning: dropping source {origin}: {e}");
                dead.push(origin.clone());
            }
        }
    }

    let plan = plan_query(&query, &live);
    let mut fetched: Vec<(String, Feed)> = Vec::new();
    for planned in &plan.per_source {
        match client.fetch(&planned.origin, &planned.params()) {
            Ok(feed) => fetched.push((planned.origin.clone(), feed)),
            Err(e) => {
                if !partial {
                    return Err(CmdError::Transport(format!(
                        "source {} unavailable: {e}",
                        planned.origin
                    )));
                }
                eprintln!("feedql: warning: dropping source {}: {e}", planned.origin);
                // keep the origin known (cooccur may name it) but contribute
                // no entries
                fetched.push((
                    planned.origin.clone(),
                    Feed::new(planned.origin.clone(), "unavailable source", Timestamp::epoch()),
                ));
            }
        }
    }
    for origin in dead {
        fetched.push((origin.clone(), Feed::new(origin, "unavailable source", Timestamp::epoch())));
    }

    let result = evaluate_residual(&plan.residual, &fetched, &EvalContext::new())
        .map_err(|e| CmdError::Rejected(e.to_string()))?;
    print_feed(&result, None);
    Ok(())
}

pub fn serve(config_path: &Path) -> Result<(), CmdError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CmdError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let base_dir = config_path.parent().unwrap_or(Path::new("."));
    let config = parse_config(&text, base_dir).map_err(|e| CmdError::Usage(e.to_string()))?;
    let state = ServiceState::from_config(&config).map_err(|e| CmdError::Usage(e.to_string()))?;
    let service = RunningService::start(state, &config.bind)
        .map_err(|e| CmdError::Usage(e.to_string()))?;

    println!("{}", service.base_url());
    let _ = std::io::stdout().flush();
    loop {
        std::thread::park();
    }
}
