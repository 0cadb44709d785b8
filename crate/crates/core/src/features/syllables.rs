fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate: the number of maximal runs of
/// `a e i o u y`, minus one for a word-final `e` not preceded by `l`,
/// floored at 1. Hyphens are ignored. Empty or non-alphabetic input yields
/// 0 and logs a warning.
pub fn syllable_count(word: &str) -> usize {
    let letters: alloc::vec::Vec<char> = word.chars().filter(|c| *c != '-').flat_map(char::to_lowercase).collect();
    if letters.is_empty() || !letters.iter().all(|c| c.is_alphabetic()) {
        log::warn!("syllable count requested for non-alphabetic word {word:?}");
        return 0;
    }
    let mut groups = 0usize;
    let mut in_group = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = letters.len();
    if letters[n - 1] == 'e' && (n < 2 || letters[n - 2] != 'l') {
        groups = groups.saturating_sub(1);
    }
    groups.max(1)
}
