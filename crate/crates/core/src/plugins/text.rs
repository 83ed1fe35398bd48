//! Word matching over free text.

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Whether `word` occurs in `text` with no word character on either side.
/// Case-insensitive.
pub fn mentions(text: &str, word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    let text = text.to_lowercase();
    let word = word.to_lowercase();
    let mut from = 0;
    while let Some(i) = text[from..].find(&word) {
        let start = from + i;
        let end = start + word.len();
        let before = text[..start].chars().next_back();
        let after = text[end..].chars().next();
        if !before.is_some_and(is_word) && !after.is_some_and(is_word) {
            return true;
        }
        from = start + word.len().max(1);
    }
    false
}

/// Whether `phrase` occurs in `text`, matching whole words at its start
/// only, so `disable` also finds `disabled`.
pub fn has_keyword(text: &str, phrase: &str) -> bool {
    let text = text.to_lowercase();
    let phrase = phrase.to_lowercase();
    let mut from = 0;
    while let Some(i) = text[from..].find(&phrase) {
        let start = from + i;
        if !text[..start].chars().next_back().is_some_and(is_word) {
            return true;
        }
        from = start + phrase.len().max(1);
    }
    false
}

/// Split free text into sentences at `.`, `;` or a blank line. A period
/// between digits does not end a sentence.
pub fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let end = match c {
            ';' => true,
            '.' => {
                !(i > 0
                    && chars[i - 1].is_ascii_digit()
                    && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit()))
            }
            '\n' => chars.get(i + 1) == Some(&'\n'),
            _ => false,
        };
        cur.push(c);
        if end {
            let s = cur.split_whitespace().collect::<Vec<_>>().join(" ");
            if !s.is_empty() {
                out.push(s);
            }
            cur.clear();
        }
    }
    let s = cur.split_whitespace().collect::<Vec<_>>().join(" ");
    if !s.is_empty() {
        out.push(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_boundaries() {
        assert!(mentions("resize: size must be positive", "size"));
        assert!(!mentions("mkfs: blocksize too big", "size"));
        assert!(!mentions("bad cluster_size", "size"));
        assert!(mentions("value '4k' for blocksize", "4k"));
        assert!(mentions("Blocksize is wrong", "blocksize"));
    }

    #[test]
    fn keywords_match_word_starts() {
        assert!(has_keyword("cannot be disabled", "disable"));
        assert!(!has_keyword("undisable", "disable"));
        assert!(has_keyword("must be at least the block size", "at least"));
    }

    #[test]
    fn sentence_split() {
        let s = sentences("Uses 1.5 blocks. Requires x;\nthen y\n\nNew one");
        assert_eq!(s, ["Uses 1.5 blocks.", "Requires x;", "then y", "New one"]);
    }
}
