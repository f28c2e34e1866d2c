//! Reader and writer for a Cassandra-style `.pomdp` text format subset.
//!
//! Supported lines (`#` starts a comment, whitespace is insignificant):
//!
//! ```text
//! discount: 0.95
//! values: reward
//! states: 3            # or a whitespace-separated name list
//! actions: a0 a1
//! observations: 2
//! start: 0.5 0.25 0.25 # or `uniform`; defaults to uniform when absent
//! T: <a> : <s> : <s'> <prob>
//! O: <a> : <s'> : <z> <prob>
//! R: <a> : <s> : * : * <val>
//! ```
//!
//! `*` is accepted as a wildcard in the T/O/R index positions. Rewards depend
//! on `(s, a)` only, so the next-state and observation slots of `R` must be
//! wildcards. Syntax problems raise [`PomdpError::Parse`] with line/column;
//! numeric problems (non-stochastic rows, bad discount) raise
//! [`PomdpError::Validation`], so the two are distinguishable.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::belief::BeliefState;
use crate::error::{PomdpError, Result};
use crate::model::{PomdpModel, SparseRows};

/// Parses the `.pomdp` subset into a validated model. Terminal states are
/// inferred: absorbing states whose rewards are all zero.
pub fn parse_model(text: &str) -> Result<PomdpModel> {
    Parser::new(text).run()
}

#[derive(Default)]
struct Axis {
    count: Option<usize>,
    names: HashMap<String, usize>,
}

impl Axis {
    fn define(&mut self, tokens: &[Token], line: usize) -> Result<()> {
        if tokens.is_empty() {
            return Err(err(line, 1, "expected a count or a name list"));
        }
        if tokens.len() == 1 {
            if let Ok(n) = tokens[0].text.parse::<usize>() {
                if n == 0 {
                    return Err(err(line, tokens[0].col, "count must be positive"));
                }
                self.count = Some(n);
                return Ok(());
            }
        }
        for (i, t) in tokens.iter().enumerate() {
            if self.names.insert(t.text.clone(), i).is_some() {
                return Err(err(line, t.col, &format!("duplicate name `{}`", t.text)));
            }
        }
        self.count = Some(tokens.len());
        Ok(())
    }

    fn len(&self) -> Option<usize> {
        self.count
    }

    /// Resolves an index token: a name, a 0-based integer, or `*` (None).
    fn resolve(&self, token: &Token, line: usize) -> Result<Option<usize>> {
        if token.text == "*" {
            return Ok(None);
        }
        if let Some(&i) = self.names.get(&token.text) {
            return Ok(Some(i));
        }
        let n = self
            .len()
            .ok_or_else(|| err(line, token.col, "axis used before being declared"))?;
        match token.text.parse::<usize>() {
            Ok(i) if i < n => Ok(Some(i)),
            Ok(i) => Err(err(
                line,
                token.col,
                &format!("index {i} out of range (axis size {n})"),
            )),
            Err(_) => Err(err(
                line,
                token.col,
                &format!("unknown identifier `{}`", token.text),
            )),
        }
    }
}

struct Token {
    text: String,
    col: usize,
}

fn err(line: usize, column: usize, message: &str) -> PomdpError {
    PomdpError::Parse {
        line,
        column,
        message: message.to_string(),
    }
}

fn tokenize(line: &str) -> Vec<Token> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in body.char_indices().chain([(body.len(), ' ')]) {
        let boundary = c.is_whitespace() || c == ':';
        match (start, boundary) {
            (None, false) => start = Some(i),
            (Some(s), true) => {
                tokens.push(Token {
                    text: body[s..i].to_string(),
                    col: s + 1,
                });
                start = None;
            }
            _ => {}
        }
        if c == ':' {
            tokens.push(Token {
                text: ":".into(),
                col: i + 1,
            });
        }
    }
    tokens
}

struct Parser<'t> {
    lines: Vec<&'t str>,
    states: Axis,
    actions: Axis,
    observations: Axis,
    discount: Option<f64>,
    start: Option<Vec<f64>>,
    // (line, a, s, s', prob); wildcards already expanded for a, kept as
    // Option for the state slots so expansion can wait for axis sizes.
    transitions: Vec<(usize, usize, Option<usize>, Option<usize>, f64)>,
    observations_body: Vec<(usize, usize, Option<usize>, Option<usize>, f64)>,
    rewards_body: Vec<(usize, usize, Option<usize>, f64)>,
}

impl<'t> Parser<'t> {
    fn new(text: &'t str) -> Self {
        Parser {
            lines: text.lines().collect(),
            states: Axis::default(),
            actions: Axis::default(),
            observations: Axis::default(),
            discount: None,
            start: None,
            transitions: Vec::new(),
            observations_body: Vec::new(),
            rewards_body: Vec::new(),
        }
    }

    fn run(mut self) -> Result<PomdpModel> {
        for idx in 0..self.lines.len() {
            let lineno = idx + 1;
            let tokens = tokenize(self.lines[idx]);
            if tokens.is_empty() {
                continue;
            }
            let head = tokens[0].text.to_ascii_lowercase();
            let rest = &tokens[1..];
            match head.as_str() {
                "discount" => {
                    let v = self.keyword_value(rest, lineno)?;
                    self.discount = Some(v.text.parse::<f64>().map_err(|_| {
                        err(lineno, v.col, &format!("bad discount `{}`", v.text))
                    })?);
                }
                "values" => {
                    let v = self.keyword_value(rest, lineno)?;
                    if !v.text.eq_ignore_ascii_case("reward") {
                        return Err(err(lineno, v.col, "only `values: reward` is supported"));
                    }
                }
                "states" => self.states.define(self.after_colon(rest, lineno)?, lineno)?,
                "actions" => self
                    .actions
                    .define(self.after_colon(rest, lineno)?, lineno)?,
                "observations" => self
                    .observations
                    .define(self.after_colon(rest, lineno)?, lineno)?,
                "start" => {
                    let body = self.after_colon(rest, lineno)?;
                    self.parse_start(body, lineno)?;
                }
                "t" => self.parse_entry(rest, lineno, EntryKind::Transition)?,
                "o" => self.parse_entry(rest, lineno, EntryKind::Observation)?,
                "r" => self.parse_reward(rest, lineno)?,
                _ => {
                    return Err(err(
                        lineno,
                        tokens[0].col,
                        &format!("unrecognized directive `{}`", tokens[0].text),
                    ))
                }
            }
        }
        self.build()
    }

    fn keyword_value<'a>(&self, rest: &'a [Token], line: usize) -> Result<&'a Token> {
        match rest {
            [colon, value] if colon.text == ":" => Ok(value),
            _ => Err(err(line, 1, "expected `: <value>`")),
        }
    }

    fn after_colon<'a>(&self, rest: &'a [Token], line: usize) -> Result<&'a [Token]> {
        match rest.first() {
            Some(colon) if colon.text == ":" => Ok(&rest[1..]),
            _ => Err(err(line, 1, "expected `:`")),
        }
    }

    fn parse_start(&mut self, body: &[Token], line: usize) -> Result<()> {
        if body.len() == 1 && body[0].text.eq_ignore_ascii_case("uniform") {
            self.start = Some(Vec::new()); // empty marks uniform
            return Ok(());
        }
        let mut probs = Vec::with_capacity(body.len());
        for t in body {
            probs.push(
                t.text
                    .parse::<f64>()
                    .map_err(|_| err(line, t.col, &format!("bad probability `{}`", t.text)))?,
            );
        }
        if probs.is_empty() {
            return Err(err(line, 1, "empty start distribution"));
        }
        self.start = Some(probs);
        Ok(())
    }

    /// `T: <a> : <s> : <s'> <prob>` and `O: <a> : <s'> : <z> <prob>`.
    fn parse_entry(&mut self, rest: &[Token], line: usize, kind: EntryKind) -> Result<()> {
        let parts = split_colons(rest, line, 3)?;
        let (a_tok, row_tok, col_tok, value_toks) = parts;
        let value_tok = match value_toks {
            [v] => v,
            _ => return Err(err(line, 1, "expected a single probability value")),
        };
        let value = value_tok
            .text
            .parse::<f64>()
            .map_err(|_| err(line, value_tok.col, &format!("bad value `{}`", value_tok.text)))?;
        let actions = self.expand_actions(a_tok, line)?;
        let row = self.states.resolve(row_tok, line)?;
        let col = match kind {
            EntryKind::Transition => self.states.resolve(col_tok, line)?,
            EntryKind::Observation => self.observations.resolve(col_tok, line)?,
        };
        let sink = match kind {
            EntryKind::Transition => &mut self.transitions,
            EntryKind::Observation => &mut self.observations_body,
        };
        for a in actions {
            sink.push((line, a, row, col, value));
        }
        Ok(())
    }

    /// `R: <a> : <s> : <s'> : <z> <val>` where `<s'>` and `<z>` must be `*`.
    fn parse_reward(&mut self, rest: &[Token], line: usize) -> Result<()> {
        let mut groups: Vec<Vec<&Token>> = vec![Vec::new()];
        for t in rest {
            if t.text == ":" {
                groups.push(Vec::new());
            } else {
                groups.last_mut().unwrap().push(t);
            }
        }
        // Leading group before the first colon must be empty (R: starts with a colon).
        if groups.len() != 5 || !groups[0].is_empty() {
            return Err(err(line, 1, "expected `R: <a> : <s> : * : * <val>`"));
        }
        let (a_grp, s_grp, s2_grp, z_grp) = (&groups[1], &groups[2], &groups[3], &groups[4]);
        let (a_tok, s_tok) = match (a_grp.as_slice(), s_grp.as_slice()) {
            ([a], [s]) => (*a, *s),
            _ => return Err(err(line, 1, "expected `R: <a> : <s> : * : * <val>`")),
        };
        let s2_tok = match s2_grp.as_slice() {
            [t] => *t,
            _ => return Err(err(line, 1, "expected `R: <a> : <s> : * : * <val>`")),
        };
        let (z_tok, value_tok) = match z_grp.as_slice() {
            [z, v] => (*z, *v),
            _ => return Err(err(line, 1, "expected `R: <a> : <s> : * : * <val>`")),
        };
        if s2_tok.text != "*" || z_tok.text != "*" {
            return Err(err(
                line,
                s2_tok.col,
                "rewards may only depend on (s, a); use `*` for next state and observation",
            ));
        }
        let value = value_tok
            .text
            .parse::<f64>()
            .map_err(|_| err(line, value_tok.col, &format!("bad value `{}`", value_tok.text)))?;
        let actions = self.expand_actions(a_tok, line)?;
        let s = self.states.resolve(s_tok, line)?;
        for a in actions {
            self.rewards_body.push((line, a, s, value));
        }
        Ok(())
    }

    fn expand_actions(&self, token: &Token, line: usize) -> Result<Vec<usize>> {
        match self.actions.resolve(token, line)? {
            Some(a) => Ok(vec![a]),
            None => {
                let n = self
                    .actions
                    .len()
                    .ok_or_else(|| err(line, token.col, "actions used before being declared"))?;
                Ok((0..n).collect())
            }
        }
    }

    fn build(self) -> Result<PomdpModel> {
        let num_states = self
            .states
            .len()
            .ok_or_else(|| err(self.lines.len(), 1, "missing `states:` declaration"))?;
        let num_actions = self
            .actions
            .len()
            .ok_or_else(|| err(self.lines.len(), 1, "missing `actions:` declaration"))?;
        let num_observations = self
            .observations
            .len()
            .ok_or_else(|| err(self.lines.len(), 1, "missing `observations:` declaration"))?;
        let discount = self
            .discount
            .ok_or_else(|| err(self.lines.len(), 1, "missing `discount:` declaration"))?;

        let mut t_maps: Vec<HashMap<(usize, usize), f64>> = vec![HashMap::new(); num_actions];
        for (_, a, s, s2, v) in &self.transitions {
            for s in expand(*s, num_states) {
                for s2 in expand(*s2, num_states) {
                    t_maps[*a].insert((s, s2), *v);
                }
            }
        }
        let mut o_maps: Vec<HashMap<(usize, usize), f64>> = vec![HashMap::new(); num_actions];
        for (_, a, s2, z, v) in &self.observations_body {
            for s2 in expand(*s2, num_states) {
                for z in expand(*z, num_observations) {
                    o_maps[*a].insert((s2, z), *v);
                }
            }
        }
        let mut rewards = vec![0.0; num_states * num_actions];
        for (_, a, s, v) in &self.rewards_body {
            for s in expand(*s, num_states) {
                rewards[s * num_actions + a] = *v;
            }
        }

        let to_sparse = |maps: Vec<HashMap<(usize, usize), f64>>, cols: usize| {
            maps.into_iter()
                .map(|m| {
                    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); num_states];
                    for ((r, c), v) in m {
                        rows[r].push((c as u32, v));
                    }
                    SparseRows::from_rows(cols, rows)
                })
                .collect::<Vec<_>>()
        };
        let transitions = to_sparse(t_maps, num_states);
        let observations = to_sparse(o_maps, num_observations);

        let initial_belief = match self.start {
            None => BeliefState::uniform_over(0..num_states)?,
            Some(probs) if probs.is_empty() => BeliefState::uniform_over(0..num_states)?,
            Some(probs) => {
                if probs.len() != num_states {
                    return Err(PomdpError::Validation(format!(
                        "start distribution has {} entries, expected {num_states}",
                        probs.len()
                    )));
                }
                BeliefState::from_dense(&probs)?
            }
        };

        let mut model = PomdpModel::new(
            transitions,
            observations,
            rewards,
            discount,
            initial_belief,
            None,
        )?;
        model.infer_terminal_states();
        Ok(model)
    }
}

enum EntryKind {
    Transition,
    Observation,
}

fn expand(idx: Option<usize>, n: usize) -> Vec<usize> {
    match idx {
        Some(i) => vec![i],
        None => (0..n).collect(),
    }
}

/// Splits `<a> : <x> : <y> <values...>` into its parts.
fn split_colons<'a>(
    rest: &'a [Token],
    line: usize,
    _expected: usize,
) -> Result<(&'a Token, &'a Token, &'a Token, &'a [Token])> {
    // Expected shape: `: A : X : Y v...`
    let fail = || err(line, 1, "expected `: <a> : <x> : <y> <value>`");
    if rest.len() < 7 || rest[0].text != ":" || rest[2].text != ":" || rest[4].text != ":" {
        return Err(fail());
    }
    Ok((&rest[1], &rest[3], &rest[5], &rest[6..]))
}

/// Serializes a model to the `.pomdp` subset. Floats are printed with Rust's
/// shortest round-trip formatting, so `parse_model` reproduces the exact
/// model (terminal states are re-inferred from structure).
pub fn model_to_text(model: &PomdpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# generated by pomdp-core");
    let _ = writeln!(out, "discount: {}", model.discount());
    let _ = writeln!(out, "values: reward");
    let _ = writeln!(out, "states: {}", model.num_states());
    let _ = writeln!(out, "actions: {}", model.num_actions());
    let _ = writeln!(out, "observations: {}", model.num_observations());
    let mut start = vec![0.0; model.num_states()];
    for &(s, p) in model.initial_belief().entries() {
        start[s as usize] = p;
    }
    let _ = write!(out, "start:");
    for p in start {
        let _ = write!(out, " {p}");
    }
    out.push('\n');
    for a in 0..model.num_actions() {
        for s in 0..model.num_states() {
            for &(s2, p) in model.transition_row(a, s) {
                let _ = writeln!(out, "T: {a} : {s} : {s2} {p}");
            }
        }
    }
    for a in 0..model.num_actions() {
        for s2 in 0..model.num_states() {
            for &(z, p) in model.observation_row(a, s2) {
                let _ = writeln!(out, "O: {a} : {s2} : {z} {p}");
            }
        }
    }
    for a in 0..model.num_actions() {
        for s in 0..model.num_states() {
            let r = model.reward(s, a);
            if r != 0.0 {
                let _ = writeln!(out, "R: {a} : {s} : * : * {r}");
            }
        }
    }
    out
}
