use serde::{Deserialize, Serialize};

/// A word-level unit of a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub index: usize,
}

/// Lowercase, split on whitespace, and strip leading/trailing punctuation from
/// every word. Words that are pure punctuation vanish. Inner punctuation
/// ("winter's", "u.s") is kept.
pub fn tokenize(text: &str) -> Vec<Token> {
    words(text)
        .enumerate()
        .map(|(index, text)| Token { text, index })
        .collect()
}

/// Same normalization as [`tokenize`], without the index bookkeeping.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
        (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn lowercases_and_splits() {
        assert_eq!(texts("Los Angeles County"), ["los", "angeles", "county"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t ").is_empty());
        assert!(tokenize(" , . ").is_empty());
    }

    #[test]
    fn strips_terminal_punctuation_only() {
        let golden: Vec<String> =
            serde_json::from_str(include_str!("../../tests/fixtures/tokenize_winters_tale.json"))
                .unwrap();
        assert_eq!(texts("Winter's Tale is a 1983 novel."), golden);
    }

    #[test]
    fn indices_are_consecutive() {
        let toks = tokenize("a , b c.");
        assert_eq!(toks.iter().map(|t| t.index).collect::<Vec<_>>(), [0, 1, 2]);
    }
}
