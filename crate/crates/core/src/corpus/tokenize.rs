use serde::{Deserialize, Serialize};

/// Default minimum token length in characters.
pub const DEFAULT_MIN_TOKEN_LEN: usize = 2;

/// A lowercase word produced by [`tokenize`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Tokenizes with the default minimum length.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_with(text, DEFAULT_MIN_TOKEN_LEN)
}

/// Lowercases and splits on runs of non-alphanumeric characters. Whitespace
/// chunks starting with `http` are URLs and are dropped whole; tokens shorter
/// than `min_len` characters are dropped.
pub fn tokenize_with(text: &str, min_len: usize) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        if lower.starts_with("http") {
            continue;
        }
        out.extend(
            lower
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty() && w.chars().count() >= min_len)
                .map(|w| Token(w.to_string())),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(Token::into_string).collect()
    }

    #[test]
    fn lowercases_and_strips_punctuation() {
        assert_eq!(words("Resist the RIGGING!"), ["resist", "the", "rigging"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn drops_urls_and_hashes() {
        assert_eq!(
            words("vote2015 http://t.co/x #NigeriaDecides"),
            ["vote2015", "nigeriadecides"]
        );
        assert_eq!(words("see HTTPS://example.com/a-b now"), ["see", "now"]);
    }

    #[test]
    fn short_tokens_dropped() {
        assert_eq!(words("a I go x-y we"), ["go", "we"]);
        assert_eq!(tokenize_with("a go", 1).len(), 2);
    }

    #[test]
    fn splits_inner_punctuation_and_keeps_order() {
        assert_eq!(words("don't@stop--now,ok"), ["don", "stop", "now", "ok"]);
    }

    #[test]
    fn unicode_letters_are_alphanumeric() {
        assert_eq!(words("ÉLECTION Ọyọ"), ["élection", "ọyọ"]);
    }
}
