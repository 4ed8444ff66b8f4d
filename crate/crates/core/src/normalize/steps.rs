use std::sync::OnceLock;

use regex::Regex;

fn tag_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // comments, doctype/processing instructions, and start/end tags
        Regex::new(r"(?s)<!--.*?-->|<[!?][A-Za-z][^<>]*>|</?[A-Za-z][^<>]*>").expect("static regex")
    })
}

/// Replaces each HTML tag with a single space. A `<` that does not open a
/// well-formed tag is left as is.
pub fn strip_html(text: &str) -> String {
    tag_pattern().replace_all(text, " ").into_owned()
}

/// Decodes named and numeric character references. Unknown or invalid
/// references stay verbatim. Double-encoded input (`&amp;amp;`) is decoded
/// until no reference remains.
pub fn decode_entities(text: &str) -> String {
    let mut cur = html_escape::decode_html_entities(text).into_owned();
    while cur.contains('&') {
        let next = html_escape::decode_html_entities(&cur);
        if next == cur {
            break;
        }
        cur = next.into_owned();
    }
    cur
}

/// Inserts a space between a lowercase letter and a following uppercase one.
pub fn split_camel_case(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 8);
    let mut prev_lower = false;
    for c in text.chars() {
        if prev_lower && c.is_uppercase() {
            out.push(' ');
        }
        out.push(c);
        prev_lower = c.is_lowercase();
    }
    out
}

/// Drops characters outside the allowed set.
///
/// With `ascii_only`, only ASCII alphanumerics, ASCII whitespace and
/// `keep_punct` survive. Otherwise any letter, digit or whitespace is kept
/// along with `keep_punct`, and everything else (controls, symbols, other
/// punctuation) is removed.
pub fn filter_charset(text: &str, ascii_only: bool, keep_punct: &str) -> String {
    text.chars()
        .filter(|&c| {
            if keep_punct.contains(c) {
                return true;
            }
            if ascii_only {
                c.is_ascii_alphanumeric() || c.is_ascii_whitespace()
            } else {
                c.is_alphanumeric() || c.is_whitespace()
            }
        })
        .collect()
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

/// Collapses runs of one punctuation character to a single occurrence and
/// runs of whitespace to one space, then trims.
pub fn collapse_punct_and_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            if !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            prev = Some(' ');
        }
        if is_punct(c) && prev == Some(c) {
            continue;
        }
        out.push(c);
        prev = Some(c);
    }
    out
}
