//! Plan text format.
//!
//! ```text
//! # question: What did the man on the stage do before sitting?
//! # analysis: find the sitting event, then look at the one before it
//! localize_node(query="man on stage sitting")
//! analyze_events(query="when did the man start sitting", node=$1)
//! sample_entity_events(node=$1, sample_start_time=$2, events_to_sample="previous:1")
//! ```
//!
//! One step per line. Values are double-quoted strings (`\"`, `\\` and `\n`
//! escapes), non-negative integers, or `$n` naming the result of an earlier
//! step (1-based). Blank lines, code fences and other `#` lines are skipped.

use std::collections::BTreeMap;

use super::{ArgType, ArgValue, Function, ReasoningPlan, ReasoningStep, ValueKind};
use crate::error::{RavuError, Result};

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.s.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        let out = &self.rest()[..len];
        self.pos += len;
        out
    }

    fn digits(&mut self) -> &'a str {
        let len = self.rest().find(|c: char| !c.is_ascii_digit()).unwrap_or(self.rest().len());
        let out = &self.rest()[..len];
        self.pos += len;
        out
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, '"')) => out.push('"'),
                    Some((_, '\\')) => out.push('\\'),
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, other)) => return Err(format!("unknown escape \\{other}")),
                    None => break,
                },
                c => out.push(c),
            }
        }
        Err("unterminated string".into())
    }
}

fn value(cur: &mut Cursor<'_>) -> std::result::Result<ArgValue, String> {
    cur.skip_ws();
    if cur.eat('"') {
        return cur.string().map(ArgValue::Text);
    }
    if cur.eat('$') {
        let d = cur.digits();
        return match d.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(ArgValue::Ref(n)),
            Ok(_) => Err("step references start at $1".into()),
            Err(_) => Err("expected a step number after '$'".into()),
        };
    }
    let d = cur.digits();
    if d.is_empty() {
        return Err(format!("expected a value, found {:?}", cur.rest()));
    }
    d.parse::<u64>().map(ArgValue::Int).map_err(|_| format!("integer {d} out of range"))
}

fn check_args(
    function: Function,
    args: &BTreeMap<String, ArgValue>,
    kinds: &[ValueKind],
) -> std::result::Result<(), (String, String)> {
    for (name, v) in args {
        let Some(p) = function.params().iter().find(|p| p.name == name) else {
            return Err((name.clone(), format!("unknown argument {name} for {function}")));
        };
        let ok = match v {
            ArgValue::Text(_) => p.accepts.contains(&ArgType::Text),
            ArgValue::Int(_) => p.accepts.contains(&ArgType::Int),
            ArgValue::Ref(n) => {
                if *n > kinds.len() {
                    return Err((name.clone(), format!("forward reference ${n}")));
                }
                let kind = kinds[n - 1];
                (kind == ValueKind::NodeRef && p.accepts.contains(&ArgType::Node))
                    || (kind == ValueKind::TimeIndex && p.accepts.contains(&ArgType::Time))
            }
        };
        if !ok {
            let got = match v {
                ArgValue::Text(_) => "a string".to_string(),
                ArgValue::Int(_) => "an integer".to_string(),
                ArgValue::Ref(n) => format!("${n} ({})", kinds[n - 1]),
            };
            return Err((name.clone(), format!("type mismatch: {name} of {function} cannot take {got}")));
        }
    }
    for p in function.params() {
        if p.required && !args.contains_key(p.name) {
            return Err((p.name.to_string(), format!("missing argument {} for {function}", p.name)));
        }
    }
    match function {
        Function::SampleEntityEvents => {
            if let Some(ArgValue::Text(s)) = args.get("events_to_sample") {
                if !valid_selector(s) {
                    return Err((
                        "events_to_sample".into(),
                        format!("bad events_to_sample {s:?}; expected previous:n, next:n, current or all"),
                    ));
                }
            }
        }
        Function::ExtractTemporalPart => {
            if let Some(ArgValue::Text(s)) = args.get("target_part") {
                if !["beginning", "middle", "end"].contains(&s.as_str()) {
                    return Err(("target_part".into(), format!("bad target_part {s:?}")));
                }
            }
        }
        Function::CountNodes => {
            if !args.contains_key("node_query") && !args.contains_key("node") {
                return Err(("node_query".into(), "count_nodes needs node_query or node".into()));
            }
        }
        Function::LocalizeNode | Function::IdentifyNode | Function::AnalyzeEvents => {
            if let Some(ArgValue::Text(q)) = args.get("query") {
                if q.trim().is_empty() {
                    return Err(("query".into(), "empty query".into()));
                }
            }
        }
        Function::GetGlobalContext => {}
    }
    Ok(())
}

/// `previous:n`, `next:n` (n >= 1), `current` or `all`.
pub(crate) fn valid_selector(s: &str) -> bool {
    match s.split_once(':') {
        Some(("previous" | "next", n)) => n.parse::<usize>().is_ok_and(|n| n >= 1) && !n.starts_with('+'),
        Some(_) => false,
        None => s == "current" || s == "all",
    }
}

fn parse_step(line: &str, kinds: &[ValueKind]) -> std::result::Result<ReasoningStep, (String, String)> {
    let mut cur = Cursor { s: line, pos: 0 };
    let name = cur.ident();
    if name.is_empty() {
        return Err(("function".into(), format!("expected a function call, found {line:?}")));
    }
    let function =
        Function::from_name(name).ok_or_else(|| ("function".to_string(), format!("unknown function {name}")))?;
    if !cur.eat('(') {
        return Err((name.into(), "expected '(' after function name".into()));
    }
    let mut args = BTreeMap::new();
    if !cur.eat(')') {
        loop {
            let arg = cur.ident();
            if arg.is_empty() {
                return Err((name.into(), format!("expected an argument name at {:?}", cur.rest())));
            }
            if !cur.eat('=') {
                return Err((arg.into(), format!("expected '=' after {arg}")));
            }
            let v = value(&mut cur).map_err(|m| (arg.to_string(), m))?;
            if args.insert(arg.to_string(), v).is_some() {
                return Err((arg.into(), format!("duplicate argument {arg}")));
            }
            if cur.eat(')') {
                break;
            }
            if !cur.eat(',') {
                return Err((arg.into(), format!("expected ',' or ')' at {:?}", cur.rest())));
            }
        }
    }
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return Err((name.into(), format!("unexpected trailing text {:?}", cur.rest())));
    }
    check_args(function, &args, kinds)?;
    Ok(ReasoningStep { function, args })
}

/// Parses plan text; errors carry the 1-based line number.
pub fn parse_plan(text: &str) -> Result<ReasoningPlan> {
    let mut plan = ReasoningPlan::default();
    let mut kinds = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if let Some(a) = c.strip_prefix("analysis:") {
                plan.analysis = a.trim().to_string();
            } else if let Some(q) = c.strip_prefix("question:") {
                plan.question = q.trim().to_string();
            }
            continue;
        }
        let step = parse_step(line, &kinds).map_err(|(field, message)| RavuError::parse(i + 1, field, message))?;
        kinds.push(step.function.output());
        plan.steps.push(step);
    }
    if plan.steps.is_empty() {
        return Err(RavuError::parse(text.lines().count().max(1), "plan", "plan has no steps"));
    }
    Ok(plan)
}

fn render_value(v: &ArgValue) -> String {
    match v {
        ArgValue::Text(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
        ArgValue::Int(n) => n.to_string(),
        ArgValue::Ref(n) => format!("${n}"),
    }
}

pub fn render_step(step: &ReasoningStep) -> String {
    let known = step.function.params().iter().map(|p| p.name);
    let extra = step
        .args
        .keys()
        .map(String::as_str)
        .filter(|k| !step.function.params().iter().any(|p| p.name == *k));
    let args: Vec<String> = known
        .chain(extra)
        .filter_map(|k| step.args.get(k).map(|v| format!("{k}={}", render_value(v))))
        .collect();
    format!("{}({})", step.function, args.join(", "))
}

/// Canonical text: question and analysis headers, then one step per line
/// with arguments in signature order.
pub fn render_plan(plan: &ReasoningPlan) -> String {
    let mut out = String::new();
    if !plan.question.is_empty() {
        out.push_str(&format!("# question: {}\n", plan.question));
    }
    if !plan.analysis.is_empty() {
        out.push_str(&format!("# analysis: {}\n", plan.analysis));
    }
    for s in &plan.steps {
        out.push_str(&render_step(s));
        out.push('\n');
    }
    out
}
