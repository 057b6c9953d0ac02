//! Plain-text game format.
//!
//! ```text
//! # comment
//! [game] agents=2 states=x y discount=0.9 0.9
//! [actions 1]
//! @order a b          # optional declared order; otherwise first appearance
//! x a b
//! y a
//! [actions 2]
//! ...
//! [reward 1]
//! x a c 1.5           # state, one action per agent, value
//! [transition]
//! x a c y 0.25        # state, joint action, next state, probability
//! ```
//!
//! Agents are numbered from 1. Transition rows are sparse: omitted next states have
//! probability 0, but every (state, joint action) needs at least one entry and every
//! agent needs a reward for it.

use super::StochasticGame;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Tok<'_> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.column, message: message.into() }
    }
}

fn tokenize(line: &str, number: usize) -> Vec<Tok<'_>> {
    let body = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (k, ch) in body.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(k),
            (true, Some(b)) => {
                out.push(Tok { text: &body[b..k], line: number, column: body[..b].chars().count() + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push(Tok { text: &body[b..], line: number, column: body[..b].chars().count() + 1 });
    }
    out
}

enum Section {
    Game,
    Actions(usize),
    Reward(usize),
    Transition,
}

struct Header {
    agents: usize,
    states: Vec<String>,
    discounts: Vec<f64>,
}

fn parse_number<T: std::str::FromStr>(tok: &Tok<'_>, text: &str, what: &str) -> Result<T, ParseError> {
    text.parse().map_err(|_| tok.err(format!("invalid {what} {text:?}")))
}

fn parse_header(toks: &[Tok<'_>], at: &Tok<'_>) -> Result<Header, ParseError> {
    let mut fields: HashMap<&str, (Tok<'_>, Vec<(Tok<'_>, &str)>)> = HashMap::new();
    let mut current: Option<&str> = None;
    for tok in toks {
        if let Some((key, value)) = tok.text.split_once('=') {
            if fields.contains_key(key) {
                return Err(tok.err(format!("duplicate key {key:?}")));
            }
            let mut values = Vec::new();
            if !value.is_empty() {
                values.push((*tok, value));
            }
            fields.insert(key, (*tok, values));
            current = Some(key);
        } else {
            let key = current.ok_or_else(|| tok.err(format!("unexpected token {:?}", tok.text)))?;
            fields.get_mut(key).unwrap().1.push((*tok, tok.text));
        }
    }
    let take = |key: &str| fields.get(key).ok_or_else(|| at.err(format!("[game] is missing {key}=")));
    let (atok, avals) = take("agents")?;
    if avals.len() != 1 {
        return Err(atok.err("agents= takes one value"));
    }
    let agents: usize = parse_number(&avals[0].0, avals[0].1, "agent count")?;
    if agents == 0 {
        return Err(atok.err("agents must be positive"));
    }
    let (stok, svals) = take("states")?;
    if svals.is_empty() {
        return Err(stok.err("states= needs at least one id"));
    }
    let mut states: Vec<String> = Vec::new();
    for (t, v) in svals {
        if states.iter().any(|s| s == v) {
            return Err(t.err(format!("duplicate state {v:?}")));
        }
        states.push(v.to_string());
    }
    let (dtok, dvals) = take("discount")?;
    let discounts: Vec<f64> =
        dvals.iter().map(|(t, v)| parse_number(t, v, "discount")).collect::<Result<_, _>>()?;
    let discounts = match discounts.len() {
        1 => vec![discounts[0]; agents],
        n if n == agents => discounts,
        _ => return Err(dtok.err(format!("discount= needs 1 or {agents} values"))),
    };
    if let Some((key, (t, _))) = fields.iter().find(|(k, _)| !["agents", "states", "discount"].contains(k)) {
        return Err(t.err(format!("unknown key {key:?}")));
    }
    Ok(Header { agents, states, discounts })
}

fn section_of(toks: &[Tok<'_>]) -> Result<Option<(Section, usize)>, ParseError> {
    let first = &toks[0];
    if !first.text.starts_with('[') {
        return Ok(None);
    }
    let mut words = Vec::new();
    let mut used = 0;
    for tok in toks {
        used += 1;
        let t = tok.text.trim_start_matches('[');
        if let Some(stripped) = t.strip_suffix(']') {
            if !stripped.is_empty() {
                words.push((tok, stripped));
            }
            break;
        }
        if !t.is_empty() {
            words.push((tok, t));
        }
        if used == toks.len() {
            return Err(first.err("unterminated section header"));
        }
    }
    let agent = |k: usize| -> Result<usize, ParseError> {
        let (tok, text) = words.get(k).ok_or_else(|| first.err("section needs an agent number"))?;
        let i: usize = parse_number(tok, text, "agent number")?;
        if i == 0 {
            return Err(tok.err("agents are numbered from 1"));
        }
        Ok(i - 1)
    };
    let name = words.first().map(|w| w.1).unwrap_or("");
    let section = match name {
        "game" => Section::Game,
        "actions" => Section::Actions(agent(1)?),
        "reward" => Section::Reward(agent(1)?),
        "transition" => Section::Transition,
        other => return Err(first.err(format!("unknown section [{other}]"))),
    };
    let expected = match section {
        Section::Game | Section::Transition => 1,
        _ => 2,
    };
    if words.len() != expected {
        return Err(first.err("malformed section header"));
    }
    Ok(Some((section, used)))
}

/// Parse a game from text.
pub fn parse_game_spec(text: &str) -> Result<StochasticGame, ParseError> {
    let lines: Vec<Vec<Tok<'_>>> = text.lines().enumerate().map(|(k, l)| tokenize(l, k + 1)).collect();
    let mut header_toks: Vec<Tok<'_>> = Vec::new();
    let mut header_at: Option<Tok<'_>> = None;
    let mut body: Vec<(Section, Tok<'_>, Vec<Vec<Tok<'_>>>)> = Vec::new();
    let mut in_game = false;
    for toks in lines.into_iter().filter(|t| !t.is_empty()) {
        match section_of(&toks)? {
            Some((Section::Game, used)) => {
                if header_at.is_some() {
                    return Err(toks[0].err("duplicate [game] section"));
                }
                if !body.is_empty() {
                    return Err(toks[0].err("[game] must come first"));
                }
                header_at = Some(toks[0]);
                header_toks.extend_from_slice(&toks[used..]);
                in_game = true;
            }
            Some((section, used)) => {
                if header_at.is_none() {
                    return Err(toks[0].err("no [game] section before this one"));
                }
                in_game = false;
                let rest = toks[used..].to_vec();
                let mut rows = Vec::new();
                if !rest.is_empty() {
                    rows.push(rest);
                }
                body.push((section, toks[0], rows));
            }
            None if in_game => header_toks.extend(toks),
            None => match body.last_mut() {
                Some(last) => last.2.push(toks),
                None => return Err(toks[0].err("content before any section")),
            },
        }
    }
    let at = header_at.ok_or(ParseError { line: 1, column: 1, message: "no [game] section".into() })?;
    let header = parse_header(&header_toks, &at)?;
    build(header, &at, body)
}

fn build(header: Header, at: &Tok<'_>, body: Vec<(Section, Tok<'_>, Vec<Vec<Tok<'_>>>)>) -> Result<StochasticGame, ParseError> {
    let n = header.agents;
    let ns = header.states.len();
    let state_of = |tok: &Tok<'_>| {
        header.states.iter().position(|s| s == tok.text).ok_or_else(|| tok.err(format!("unknown state {:?}", tok.text)))
    };
    let mut names: Vec<Option<Vec<String>>> = vec![None; n];
    let mut sets: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; ns]; n];
    let mut reward_rows: Vec<(usize, Tok<'_>, Vec<Vec<Tok<'_>>>)> = Vec::new();
    let mut transition_rows: Vec<Vec<Tok<'_>>> = Vec::new();
    let check_agent = |i: usize, tok: &Tok<'_>| {
        if i < n {
            Ok(i)
        } else {
            Err(tok.err(format!("agent {} out of range 1..={n}", i + 1)))
        }
    };
    for (section, head, rows) in body {
        match section {
            Section::Actions(i) => {
                let i = check_agent(i, &head)?;
                if names[i].is_some() {
                    return Err(head.err(format!("duplicate [actions {}] section", i + 1)));
                }
                let mut declared: Vec<String> = Vec::new();
                let mut fixed = false;
                for row in rows {
                    if row[0].text == "@order" {
                        if fixed || !declared.is_empty() {
                            return Err(row[0].err("@order must be the first line of the section"));
                        }
                        for t in &row[1..] {
                            if declared.iter().any(|d| d == t.text) {
                                return Err(t.err(format!("duplicate action {:?}", t.text)));
                            }
                            declared.push(t.text.to_string());
                        }
                        fixed = true;
                        continue;
                    }
                    let s = state_of(&row[0])?;
                    if sets[i][s].is_some() {
                        return Err(row[0].err(format!("duplicate action set for state {:?}", row[0].text)));
                    }
                    if row.len() < 2 {
                        return Err(row[0].err("state needs at least one action"));
                    }
                    let mut list = Vec::new();
                    for t in &row[1..] {
                        let idx = match declared.iter().position(|d| d == t.text) {
                            Some(k) => k,
                            None if fixed => return Err(t.err(format!("unknown action {:?}", t.text))),
                            None => {
                                declared.push(t.text.to_string());
                                declared.len() - 1
                            }
                        };
                        if list.contains(&idx) {
                            return Err(t.err(format!("duplicate action {:?}", t.text)));
                        }
                        list.push(idx);
                    }
                    sets[i][s] = Some(list);
                }
                names[i] = Some(declared);
            }
            Section::Reward(i) => reward_rows.push((check_agent(i, &head)?, head, rows)),
            Section::Transition => transition_rows.extend(rows),
            Section::Game => unreachable!(),
        }
    }
    let mut action_names = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        let declared = names[i].take().ok_or_else(|| at.err(format!("missing [actions {}] section", i + 1)))?;
        let per_state = sets[i]
            .iter_mut()
            .enumerate()
            .map(|(s, l)| {
                l.take().ok_or_else(|| at.err(format!("agent {} has no actions at state {:?}", i + 1, header.states[s])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        action_names.push(declared);
        actions.push(per_state);
    }
    let mut offsets = Vec::with_capacity(ns + 1);
    let mut total = 0;
    for s in 0..ns {
        offsets.push(total);
        total += (0..n).map(|i| actions[i][s].len()).product::<usize>();
    }
    // Resolve "s a1..aN" to a global (state, joint) row number.
    let joint_row = |toks: &[Tok<'_>]| -> Result<(usize, usize), ParseError> {
        let s = state_of(&toks[0])?;
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..n {
            let t = &toks[1 + i];
            let pos = actions[i][s]
                .iter()
                .position(|&a| action_names[i][a] == t.text)
                .ok_or_else(|| t.err(format!("unknown action {:?} for agent {} at state {:?}", t.text, i + 1, toks[0].text)))?;
            idx += pos * stride;
            stride *= actions[i][s].len();
        }
        Ok((s, offsets[s] + idx))
    };

    let mut rewards: Vec<Option<f64>> = vec![None; total * n];
    let mut reward_seen = vec![false; n];
    for (i, head, rows) in reward_rows {
        if reward_seen[i] {
            return Err(head.err(format!("duplicate [reward {}] section", i + 1)));
        }
        reward_seen[i] = true;
        for row in rows {
            if row.len() != n + 2 {
                return Err(row[0].err(format!("reward line needs state, {n} actions and a value")));
            }
            let (_, r) = joint_row(&row)?;
            let value: f64 = parse_number(&row[n + 1], row[n + 1].text, "reward")?;
            let slot = &mut rewards[r * n + i];
            if slot.is_some() {
                return Err(row[0].err("duplicate reward entry"));
            }
            *slot = Some(value);
        }
    }
    let mut kernel = vec![0.0; total * ns];
    let mut filled: Vec<Option<usize>> = vec![None; total * ns];
    let mut row_seen = vec![false; total];
    for row in transition_rows {
        if row.len() != n + 3 {
            return Err(row[0].err(format!("transition line needs state, {n} actions, next state and probability")));
        }
        let (_, r) = joint_row(&row)?;
        let next = state_of(&row[n + 1])?;
        let p: f64 = parse_number(&row[n + 2], row[n + 2].text, "probability")?;
        if let Some(line) = filled[r * ns + next] {
            return Err(row[0].err(format!("duplicate kernel entry (first given on line {line})")));
        }
        filled[r * ns + next] = Some(row[0].line);
        kernel[r * ns + next] = p;
        row_seen[r] = true;
    }
    let describe = |r: usize| {
        let s = offsets.partition_point(|&o| o <= r) - 1;
        let mut ja = r - offsets[s];
        let names: Vec<&str> = (0..n)
            .map(|i| {
                let k = actions[i][s].len();
                let pos = ja % k;
                ja /= k;
                action_names[i][actions[i][s][pos]].as_str()
            })
            .collect();
        format!("state {:?}, joint ({})", header.states[s], names.join(","))
    };
    if let Some(r) = row_seen.iter().position(|&seen| !seen) {
        return Err(at.err(format!("missing transition row for {}", describe(r))));
    }
    let rewards = rewards
        .iter()
        .enumerate()
        .map(|(k, v)| v.ok_or_else(|| at.err(format!("missing reward for agent {} at {}", k % n + 1, describe(k / n)))))
        .collect::<Result<Vec<f64>, _>>()?;
    StochasticGame::new(header.states, action_names, actions, header.discounts, kernel, rewards)
        .map_err(|e| at.err(e.to_string()))
}

/// Serialize a game; floats use the shortest round-trip representation.
pub fn serialize_game_spec(game: &StochasticGame) -> String {
    let n = game.num_agents();
    let mut out = String::new();
    let discounts: Vec<String> = game.discounts().iter().map(|g| g.to_string()).collect();
    writeln!(out, "[game] agents={n} states={} discount={}", game.states().join(" "), discounts.join(" ")).unwrap();
    for i in 0..n {
        writeln!(out, "[actions {}]", i + 1).unwrap();
        writeln!(out, "@order {}", game.action_names(i).join(" ")).unwrap();
        for s in 0..game.num_states() {
            let names: Vec<&str> = (0..game.num_actions(i, s)).map(|p| game.action_name(i, s, p)).collect();
            writeln!(out, "{} {}", game.state_name(s), names.join(" ")).unwrap();
        }
    }
    let joint_names = |s: usize, ja: usize| -> String {
        let joint = game.decode_joint(s, ja);
        joint.iter().enumerate().map(|(i, &p)| game.action_name(i, s, p)).collect::<Vec<_>>().join(" ")
    };
    for i in 0..n {
        writeln!(out, "[reward {}]", i + 1).unwrap();
        for s in 0..game.num_states() {
            for ja in 0..game.joint_count(s) {
                writeln!(out, "{} {} {}", game.state_name(s), joint_names(s, ja), game.reward(i, s, ja)).unwrap();
            }
        }
    }
    writeln!(out, "[transition]").unwrap();
    for s in 0..game.num_states() {
        for ja in 0..game.joint_count(s) {
            let row = game.row(s, ja);
            let nonzero: Vec<usize> = (0..row.len()).filter(|&t| row[t] != 0.0).collect();
            // A row of zeros still needs one entry to be representable.
            let entries = if nonzero.is_empty() { vec![0] } else { nonzero };
            for t in entries {
                writeln!(out, "{} {} {} {}", game.state_name(s), joint_names(s, ja), game.state_name(t), row[t]).unwrap();
            }
        }
    }
    out
}
