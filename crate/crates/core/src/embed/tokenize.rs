/// Splits text into word-level tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Whitespace split, with leading and trailing punctuation peeled off into
/// one token per character.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

impl Tokenizer for WordTokenizer {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        tokenize(text)
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let core_start = word.find(|c: char| !is_punct(c));
        let Some(core_start) = core_start else {
            // all punctuation
            out.extend(char_slices(word));
            continue;
        };
        let core_end = word
            .char_indices()
            .rev()
            .find(|&(_, c)| !is_punct(c))
            .map(|(i, c)| i + c.len_utf8())
            .expect("word has a non-punctuation char");
        out.extend(char_slices(&word[..core_start]));
        out.push(&word[core_start..core_end]);
        out.extend(char_slices(&word[core_end..]));
    }
    out
}

fn char_slices(s: &str) -> impl Iterator<Item = &str> {
    s.char_indices().map(move |(i, c)| &s[i..i + c.len_utf8()])
}
