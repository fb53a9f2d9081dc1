//! Turning raw generations into spans and labels.
//!
//! Every function here is total: malformed output degrades to a dropped span
//! or a `failed` outcome, never an error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{LabelId, Sentence, Span};
use crate::prompting::OptionSet;
use crate::schema::LabelSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMethod {
    ExactLetter,
    LetterPrefix,
    OptionTextMatch,
    LabelTextMatch,
    Failed,
}

impl ParseMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseMethod::ExactLetter => "exact_letter",
            ParseMethod::LetterPrefix => "letter_prefix",
            ParseMethod::OptionTextMatch => "option_text_match",
            ParseMethod::LabelTextMatch => "label_text_match",
            ParseMethod::Failed => "failed",
        }
    }
}

impl fmt::Display for ParseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed label. On failure `value` is the fallback: the NOTA label when
/// the prompt offered one, otherwise `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub value: Option<LabelId>,
    pub method: ParseMethod,
    pub raw: String,
}

impl ParseOutcome {
    fn matched(label: &str, method: ParseMethod, raw: &str) -> Self {
        ParseOutcome {
            value: Some(label.to_owned()),
            method,
            raw: raw.to_owned(),
        }
    }

    fn failed(fallback: Option<&str>, raw: &str) -> Self {
        ParseOutcome {
            value: fallback.map(str::to_owned),
            method: ParseMethod::Failed,
            raw: raw.to_owned(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SpanParse {
    pub spans: Vec<Span>,
    /// Non-empty items that could not be grounded in the sentence.
    pub dropped: usize,
}

const LEADING_STRIP: &[char] = &['"', '\''];
const TRAILING_STRIP: &[char] = &['.', ',', '"', '\'', ')'];

/// Strips surrounding quotes and trailing punctuation. A trailing period is
/// kept when the item already contains another period, so abbreviations such
/// as "U.S." survive.
fn clean_item(item: &str) -> &str {
    let mut s = item.trim().trim_start_matches(LEADING_STRIP).trim();
    while let Some(last) = s.chars().last() {
        if !TRAILING_STRIP.contains(&last) {
            break;
        }
        let rest = &s[..s.len() - last.len_utf8()];
        if last == '.' && rest.contains('.') {
            break;
        }
        s = rest.trim_end();
    }
    s
}

fn ground(sentence: &Sentence, item: &str, case_sensitive: bool) -> Option<Span> {
    if case_sensitive {
        return sentence.find(item).map(|start| Span::at(item, start));
    }
    let hay: Vec<char> = sentence.text.chars().collect();
    let needle: Vec<char> = item.chars().collect();
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    let same = |a: char, b: char| a == b || a.to_lowercase().eq(b.to_lowercase());
    (0..=hay.len() - needle.len())
        .find(|&i| needle.iter().zip(&hay[i..]).all(|(n, h)| same(*n, *h)))
        .map(|i| Span::at(hay[i..i + needle.len()].iter().collect::<String>(), i))
}

/// Splits a comma/newline separated answer into spans grounded in the
/// sentence. Order is preserved and exact duplicates are dropped.
pub fn parse_span_list(text: &str, sentence: &Sentence, case_sensitive: bool) -> SpanParse {
    let mut out = SpanParse::default();
    for raw in text.split([',', '\n']) {
        let item = clean_item(raw);
        if item.is_empty() {
            continue;
        }
        match ground(sentence, item, case_sensitive) {
            Some(span) => {
                if !out.spans.iter().any(|s| s.surface == span.surface) {
                    out.spans.push(span);
                }
            }
            None => out.dropped += 1,
        }
    }
    out
}

/// Letter at the start of `s` written as `X.`, `X)` or `X:`.
fn leading_letter_token(s: &str) -> Option<char> {
    let s = s.trim_start().trim_start_matches('(');
    let mut chars = s.chars();
    let letter = chars.next()?;
    let delim = chars.next()?;
    (letter.is_ascii_uppercase() && matches!(delim, '.' | ')' | ':')).then_some(letter)
}

/// Keeps matches that are not substrings of another match.
fn maximal(matches: Vec<(&str, String)>) -> Vec<&str> {
    matches
        .iter()
        .filter(|(_, text)| {
            !matches
                .iter()
                .any(|(_, other)| other.len() > text.len() && other.contains(text.as_str()))
        })
        .map(|(label, _)| *label)
        .collect()
}

/// Maps a generation to an option label:
/// 1. the whole answer is a letter, optionally followed by `.` or `)`;
/// 2. the answer starts with a letter token (`B.`, `B)`, `B:`) and no other
///    line starts with a different one;
/// 3. the answer contains exactly one option's wording (case-insensitive);
/// 4. otherwise the parse fails and yields the NOTA label.
pub fn parse_choice(text: &str, options: &OptionSet) -> ParseOutcome {
    let fallback = options.nota_label();
    let trimmed = text.trim();

    let bare = trimmed
        .strip_suffix('.')
        .or_else(|| trimmed.strip_suffix(')'))
        .unwrap_or(trimmed);
    let mut bare_chars = bare.chars();
    if let (Some(c), None) = (bare_chars.next(), bare_chars.next()) {
        if let Some(label) = options.decode(c) {
            return ParseOutcome::matched(label, ParseMethod::ExactLetter, text);
        }
    }

    if let Some(first) = leading_letter_token(trimmed).filter(|c| options.decode(*c).is_some()) {
        let conflicting = trimmed
            .lines()
            .filter_map(leading_letter_token)
            .any(|c| c != first && options.decode(c).is_some());
        if conflicting {
            return ParseOutcome::failed(fallback, text);
        }
        let label = options.decode(first).expect("checked above");
        return ParseOutcome::matched(label, ParseMethod::LetterPrefix, text);
    }

    let lower = trimmed.to_lowercase();
    let matches: Vec<(&str, String)> = options
        .options()
        .iter()
        .map(|o| (o.label.as_str(), o.text.to_lowercase()))
        .filter(|(_, t)| !t.is_empty() && lower.contains(t.as_str()))
        .collect();
    match maximal(matches).as_slice() {
        [label] => ParseOutcome::matched(label, ParseMethod::OptionTextMatch, text),
        _ => ParseOutcome::failed(fallback, text),
    }
}

fn aliases(id: &str, display: &str) -> Vec<String> {
    let mut out = vec![display.to_lowercase(), id.to_lowercase()];
    if let Some(tail) = display.rsplit(['/', ':']).next() {
        out.push(tail.to_lowercase());
    }
    out.retain(|a| !a.is_empty());
    out.dedup();
    out
}

/// Maps a free-text label answer onto one of `candidates` by exact
/// (case-insensitive) name, then by unique containment. Names are matched by
/// display name, label id, or the last `/`- or `:`-separated segment of the
/// display name.
pub fn parse_vanilla_label(text: &str, schema: &LabelSchema, candidates: &[LabelId]) -> ParseOutcome {
    let fallback = Some(schema.nota.id.as_str());
    let norm = text
        .trim()
        .trim_start_matches(['-', '*'])
        .trim()
        .trim_end_matches('.')
        .trim()
        .to_lowercase();
    if norm.is_empty() {
        return ParseOutcome::failed(fallback, text);
    }
    let named: Vec<(&str, Vec<String>)> = candidates
        .iter()
        .map(|c| (c.as_str(), aliases(c, schema.display(c).unwrap_or(c))))
        .collect();

    // Full names first, then short segment aliases.
    for depth in [2usize, usize::MAX] {
        let exact: Vec<&str> = named
            .iter()
            .filter(|(_, a)| a.iter().take(depth).any(|x| *x == norm))
            .map(|(c, _)| *c)
            .collect();
        if let [label] = exact.as_slice() {
            return ParseOutcome::matched(label, ParseMethod::LabelTextMatch, text);
        }
    }

    let contained: Vec<(&str, String)> = named
        .iter()
        .filter_map(|(c, a)| {
            a.iter()
                .filter(|x| norm.contains(x.as_str()))
                .max_by_key(|x| x.len())
                .map(|x| (*c, x.clone()))
        })
        .collect();
    match maximal(contained).as_slice() {
        [label] => ParseOutcome::matched(label, ParseMethod::LabelTextMatch, text),
        _ => ParseOutcome::failed(fallback, text),
    }
}
