//! Recursive-descent parser for the filter grammar and the query URI
//! parameters. The grammar operates on URI-decoded text; percent decoding
//! is the transport's job.

use super::{
    AtomField, CrossEntryFn, FilterExpr, Operator, Predicate, Query, QueryError, Selector,
    Shaping, SortKey, SortOrder, TextPattern, Value,
};
use crate::atom::Timestamp;
use crate::geo::{GeoPoint, GeoRegion};

/// Parses a filter expression.
///
/// Grammar: `expr := or`, `or := and ("," and)*`, `and := prim (";" prim)*`,
/// `prim := "(" expr ")" | selector operator value`. Whitespace is not
/// permitted between tokens; values containing reserved characters or spaces
/// must be double-quoted.
pub fn parse_filter(input: &str) -> Result<FilterExpr, QueryError> {
    let mut cursor = Cursor::new(input);
    if cursor.at_end() {
        return Err(QueryError::Syntax { pos: 0, expected: "a filter expression".into() });
    }
    let expr = parse_or(&mut cursor)?;
    if !cursor.at_end() {
        return Err(QueryError::Syntax {
            pos: cursor.pos,
            expected: "end of input, ';' or ','".into(),
        });
    }
    Ok(expr)
}

/// Assembles a [`Query`] from decoded URI parameters (an ordered multimap).
///
/// Recognized names: `q`, `xq`, `sort-by`, `order`, `group-by`,
/// `max-results`, `start-index`. Unrecognized parameters are ignored;
/// absent parameters yield the identity query; parameters given with an
/// empty value are treated as absent.
pub fn parse_uri_params(params: &[(String, String)]) -> Result<Query, QueryError> {
    let filter = match single(params, "q")? {
        Some(text) => Some(parse_filter(text)?),
        None => None,
    };
    let cross_entry = match single(params, "xq")? {
        Some(text) => parse_cross_entry_list(text)?,
        None => Vec::new(),
    };
    let sort_by = single(params, "sort-by")?.map(parse_sort_key).transpose()?;
    let order = match single(params, "order")? {
        Some("asc") => Some(SortOrder::Asc),
        Some("desc") => Some(SortOrder::Desc),
        Some(other) => {
            return Err(QueryError::BadParam {
                param: "order".into(),
                message: format!("expected asc or desc, got {other:?}"),
            })
        }
        None => None,
    };
    let group_by = single(params, "group-by")?.map(parse_whole_selector).transpose()?;
    let max_results = single(params, "max-results")?
        .map(|v| parse_positive(v, "max-results"))
        .transpose()?;
    let start_index = single(params, "start-index")?
        .map(|v| parse_positive(v, "start-index"))
        .transpose()?;

    Ok(Query {
        filter,
        cross_entry,
        shaping: Shaping { sort_by, order, group_by, max_results, start_index },
    })
}

fn single<'a>(params: &'a [(String, String)], name: &str) -> Result<Option<&'a str>, QueryError> {
    let mut found = None;
    for (key, value) in params {
        if key == name {
            if found.is_some() {
                return Err(QueryError::BadParam {
                    param: name.into(),
                    message: "duplicate parameter".into(),
                });
            }
            found = Some(value.as_str());
        }
    }
    Ok(found.filter(|v| !v.is_empty()))
}

fn parse_positive(value: &str, param: &str) -> Result<usize, QueryError> {
    match value.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(QueryError::BadParam {
            param: param.into(),
            message: format!("expected an integer >= 1, got {value:?}"),
        }),
    }
}

fn parse_sort_key(value: &str) -> Result<SortKey, QueryError> {
    match value {
        "updated" => return Ok(SortKey::Updated),
        "published" => return Ok(SortKey::Published),
        "title" => return Ok(SortKey::Title),
        _ => {}
    }
    if let Some(args) = value.strip_prefix("geo-distance(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(lat), Ok(lon)) = (parts[0].parse::<f64>(), parts[1].parse::<f64>()) {
                let point = GeoPoint::new(lat, lon).map_err(|e| QueryError::BadParam {
                    param: "sort-by".into(),
                    message: e.to_string(),
                })?;
                return Ok(SortKey::GeoDistance(point));
            }
        }
    }
    Err(QueryError::BadParam {
        param: "sort-by".into(),
        message: format!(
            "unknown sort key {value:?}, expected updated, published, title, or geo-distance(lat,lon)"
        ),
    })
}

fn parse_whole_selector(value: &str) -> Result<Selector, QueryError> {
    let mut cursor = Cursor::new(value);
    let selector = parse_selector(&mut cursor).map_err(|e| QueryError::BadParam {
        param: "group-by".into(),
        message: e.to_string(),
    })?;
    if !cursor.at_end() {
        return Err(QueryError::BadParam {
            param: "group-by".into(),
            message: format!("trailing input after selector in {value:?}"),
        });
    }
    Ok(selector)
}

/// Cross-entry function list: `call ("," call)*` with
/// `call := name "(" arg ("," arg)* ")"`. Arguments may not contain `,`
/// or `)`; in particular cooccur origin URIs with commas are unsupported.
fn parse_cross_entry_list(text: &str) -> Result<Vec<CrossEntryFn>, QueryError> {
    let bad = |message: String| QueryError::BadParam { param: "xq".into(), message };
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        let open = rest.find('(').ok_or_else(|| bad(format!("expected a function call in {rest:?}")))?;
        let name = &rest[..open];
        let close = rest[open..]
            .find(')')
            .map(|i| open + i)
            .ok_or_else(|| bad(format!("unterminated argument list in {rest:?}")))?;
        let args: Vec<&str> = if rest[open + 1..close].is_empty() {
            Vec::new()
        } else {
            rest[open + 1..close].split(',').collect()
        };
        out.push(build_fn(name, &args).map_err(bad)?);
        rest = &rest[close + 1..];
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix(',')
            .ok_or_else(|| bad(format!("expected ',' between function calls, got {rest:?}")))?;
    }
    Ok(out)
}

fn build_fn(name: &str, args: &[&str]) -> Result<CrossEntryFn, String> {
    match name {
        "window" => {
            if args.len() != 2 {
                return Err(format!("window takes 2 arguments, got {}", args.len()));
            }
            Ok(CrossEntryFn::Window {
                duration_s: positive_i64(args[0], "window duration")?,
                min_count: min_count(args[1])?,
            })
        }
        "cluster" => {
            if args.len() != 2 {
                return Err(format!("cluster takes 2 arguments, got {}", args.len()));
            }
            Ok(CrossEntryFn::Cluster {
                radius_km: positive_f64(args[0], "cluster radius")?,
                min_count: min_count(args[1])?,
            })
        }
        "cooccur" => {
            if args.len() != 3 && args.len() != 4 {
                return Err(format!("cooccur takes 3 or 4 arguments, got {}", args.len()));
            }
            if args[0].is_empty() || args[1].is_empty() {
                return Err("cooccur origins must be nonempty".into());
            }
            Ok(CrossEntryFn::Cooccur {
                origin_a: args[0].to_string(),
                origin_b: args[1].to_string(),
                radius_km: positive_f64(args[2], "cooccur radius")?,
                duration_s: match args.get(3) {
                    Some(d) => Some(positive_i64(d, "cooccur duration")?),
                    None => None,
                },
            })
        }
        other => Err(format!("unknown cross-entry function {other:?}")),
    }
}

fn positive_i64(text: &str, what: &str) -> Result<i64, String> {
    match text.parse::<i64>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("{what} must be a positive integer, got {text:?}")),
    }
}

fn positive_f64(text: &str, what: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(format!("{what} must be positive, got {text:?}")),
    }
}

fn min_count(text: &str) -> Result<usize, String> {
    match text.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("min-count must be an integer >= 1, got {text:?}")),
    }
}

struct Cursor<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(input: &'a str) -> Self {
        Cursor { input, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.input.len()
    }

    fn peek(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, keep: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if keep(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        &self.input[start..self.pos]
    }

    fn expect(&mut self, c: char, expected: &str) -> Result<(), QueryError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(QueryError::Syntax { pos: self.pos, expected: expected.to_string() })
        }
    }
}

fn parse_or(cursor: &mut Cursor) -> Result<FilterExpr, QueryError> {
    let mut items = vec![parse_and(cursor)?];
    while cursor.eat(',') {
        items.push(parse_and(cursor)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { FilterExpr::Or(items) })
}

fn parse_and(cursor: &mut Cursor) -> Result<FilterExpr, QueryError> {
    let mut items = vec![parse_prim(cursor)?];
    while cursor.eat(';') {
        items.push(parse_prim(cursor)?);
    }
    Ok(if items.len() == 1 { items.pop().unwrap() } else { FilterExpr::And(items) })
}

fn parse_prim(cursor: &mut Cursor) -> Result<FilterExpr, QueryError> {
    if cursor.eat('(') {
        let expr = parse_or(cursor)?;
        cursor.expect(')', "')'")?;
        Ok(expr)
    } else {
        parse_predicate(cursor)
    }
}

fn parse_predicate(cursor: &mut Cursor) -> Result<FilterExpr, QueryError> {
    let selector = parse_selector(cursor)?;
    let op_pos = cursor.pos;
    let op = parse_operator(cursor)?;

    let value = match op {
        Operator::Eq | Operator::Ne => {
            if selector == Selector::GeoPosition {
                return Err(QueryError::TypeMismatch {
                    pos: op_pos,
                    message: "geo:position supports only =within=".into(),
                });
            }
            Value::Text(TextPattern::new(parse_text_value(cursor)?))
        }
        Operator::Lt | Operator::Le | Operator::Gt | Operator::Ge => {
            let rangeable = matches!(
                selector,
                Selector::Atom(field) if field.is_timestamp()
            ) || matches!(selector, Selector::Hidden(_));
            if !rangeable {
                return Err(QueryError::TypeMismatch {
                    pos: op_pos,
                    message: format!(
                        "{} does not support range operators; only updated, published, and x: fields do",
                        selector
                    ),
                });
            }
            let value_pos = cursor.pos;
            let raw = parse_text_value(cursor)?;
            let instant = Timestamp::parse(&raw).map_err(|_| QueryError::TypeMismatch {
                pos: value_pos,
                message: format!("range operators take an RFC 3339 timestamp, got {raw:?}"),
            })?;
            Value::Time(instant)
        }
        Operator::Within => {
            if selector != Selector::GeoPosition {
                return Err(QueryError::TypeMismatch {
                    pos: op_pos,
                    message: "=within= applies only to geo:position".into(),
                });
            }
            Value::Region(parse_region(cursor)?)
        }
    };

    Ok(FilterExpr::Predicate(Predicate { selector, op, value }))
}

fn parse_selector(cursor: &mut Cursor) -> Result<Selector, QueryError> {
    let start = cursor.pos;
    let ident =
        cursor.take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | ':'));
    if ident.is_empty() {
        return Err(QueryError::Syntax { pos: start, expected: "a selector".into() });
    }
    if ident == "link" {
        cursor.expect('(', "'(' after link")?;
        let rel_pos = cursor.pos;
        let rel = cursor.take_while(|c| c != ')' && !matches!(c, ';' | ',') && !c.is_whitespace());
        if rel.is_empty() {
            return Err(QueryError::Syntax { pos: rel_pos, expected: "a link relation".into() });
        }
        let rel = rel.to_string();
        cursor.expect(')', "')' after link relation")?;
        if !cursor.input[cursor.pos..].starts_with(".href") {
            return Err(QueryError::Syntax { pos: cursor.pos, expected: "'.href'".into() });
        }
        cursor.pos += ".href".len();
        return Ok(Selector::LinkHref { rel });
    }
    if ident == "geo:position" {
        return Ok(Selector::GeoPosition);
    }
    if let Some(field) = ident.strip_prefix("x:") {
        if field.is_empty() {
            return Err(QueryError::Syntax { pos: start, expected: "a field name after x:".into() });
        }
        return Ok(Selector::Hidden(field.to_string()));
    }
    match AtomField::from_path(ident) {
        Some(field) => Ok(Selector::Atom(field)),
        None => Err(QueryError::Syntax {
            pos: start,
            expected: format!("a known selector (got {ident:?})"),
        }),
    }
}

fn parse_operator(cursor: &mut Cursor) -> Result<Operator, QueryError> {
    let start = cursor.pos;
    if cursor.eat('=') {
        if cursor.eat('=') {
            return Ok(Operator::Eq);
        }
        let name = cursor.take_while(|c| c.is_ascii_alphanumeric());
        let name = name.to_string();
        if !cursor.eat('=') {
            return Err(QueryError::Syntax { pos: cursor.pos, expected: "'=' closing the operator".into() });
        }
        return match name.as_str() {
            "lt" => Ok(Operator::Lt),
            "le" => Ok(Operator::Le),
            "gt" => Ok(Operator::Gt),
            "ge" => Ok(Operator::Ge),
            "within" => Ok(Operator::Within),
            _ => Err(QueryError::UnknownOperator { pos: start, op: format!("={name}=") }),
        };
    }
    if cursor.eat('!') {
        cursor.expect('=', "'=' after '!'")?;
        return Ok(Operator::Ne);
    }
    Err(QueryError::Syntax { pos: start, expected: "an operator (==, !=, =lt=, ...)".into() })
}

/// An unquoted value runs to the next reserved character; a double-quoted
/// value may contain anything, with `\"` and `\\` escapes.
fn parse_text_value(cursor: &mut Cursor) -> Result<String, QueryError> {
    if cursor.peek() == Some('"') {
        cursor.bump();
        let mut out = String::new();
        loop {
            match cursor.bump() {
                Some('"') => return Ok(out),
                Some('\\') => match cursor.bump() {
                    Some(c) => out.push(c),
                    None => {
                        return Err(QueryError::Syntax {
                            pos: cursor.pos,
                            expected: "an escaped character".into(),
                        })
                    }
                },
                Some(c) => out.push(c),
                None => {
                    return Err(QueryError::Syntax {
                        pos: cursor.pos,
                        expected: "a closing '\"'".into(),
                    })
                }
            }
        }
    }
    let start = cursor.pos;
    let raw = cursor
        .take_while(|c| !matches!(c, ';' | ',' | '(' | ')' | '"') && !c.is_whitespace());
    if raw.is_empty() {
        return Err(QueryError::Syntax { pos: start, expected: "a value".into() });
    }
    Ok(raw.to_string())
}

fn parse_region(cursor: &mut Cursor) -> Result<GeoRegion, QueryError> {
    let start = cursor.pos;
    let kind = cursor.take_while(|c| c.is_ascii_alphabetic()).to_string();
    cursor.expect('(', "'(' opening the region arguments")?;
    let mut numbers = Vec::new();
    loop {
        let num_pos = cursor.pos;
        let token = cursor.take_while(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'));
        let value: f64 = token.parse().map_err(|_| QueryError::Syntax {
            pos: num_pos,
            expected: format!("a number (got {token:?})"),
        })?;
        numbers.push(value);
        if cursor.eat(',') {
            continue;
        }
        cursor.expect(')', "')' or ',' in the region arguments")?;
        break;
    }
    let mismatch = |message: String| QueryError::TypeMismatch { pos: start, message };
    match kind.as_str() {
        "radius" => {
            if numbers.len() != 3 {
                return Err(mismatch(format!("radius takes (lat,lon,km), got {} numbers", numbers.len())));
            }
            let center = GeoPoint::new(numbers[0], numbers[1]).map_err(|e| mismatch(e.to_string()))?;
            GeoRegion::radius(center, numbers[2]).map_err(|e| mismatch(e.to_string()))
        }
        "box" => {
            if numbers.len() != 4 {
                return Err(mismatch(format!(
                    "box takes (swlat,swlon,nelat,nelon), got {} numbers",
                    numbers.len()
                )));
            }
            let sw = GeoPoint::new(numbers[0], numbers[1]).map_err(|e| mismatch(e.to_string()))?;
            let ne = GeoPoint::new(numbers[2], numbers[3]).map_err(|e| mismatch(e.to_string()))?;
            GeoRegion::bbox(sw, ne).map_err(|e| mismatch(e.to_string()))
        }
        other => Err(mismatch(format!(
            "unknown region {other:?}, expected radius(lat,lon,km) or box(swlat,swlon,nelat,nelon)"
        ))),
    }
}
