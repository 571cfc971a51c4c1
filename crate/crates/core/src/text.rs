//! Word-unit helpers. Non-CJK text is measured in whitespace words, CJK text
//! in characters.

pub fn is_cjk_char(c: char) -> bool {
    ('\u{4E00}'..='\u{9FFF}').contains(&c)
}

/// True when at least half of the non-whitespace characters are CJK ideographs.
pub fn is_cjk(s: &str) -> bool {
    let (mut total, mut cjk) = (0usize, 0usize);
    for c in s.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if is_cjk_char(c) {
            cjk += 1;
        }
    }
    total > 0 && 2 * cjk >= total
}

/// Length of one word entry in units.
pub fn word_units(word: &str) -> usize {
    if is_cjk(word) {
        word.chars().filter(|c| !c.is_whitespace()).count()
    } else {
        1
    }
}

/// Splits text into metric units: whitespace words, with every CJK
/// ideograph broken out as its own unit.
pub fn units(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut start = 0;
        for (i, c) in word.char_indices() {
            if is_cjk_char(c) {
                if start < i {
                    out.push(&word[start..i]);
                }
                let end = i + c.len_utf8();
                out.push(&word[i..end]);
                start = end;
            }
        }
        if start < word.len() {
            out.push(&word[start..]);
        }
    }
    out
}
