//! Word-level text helpers shared by the mock backend and the reasoning
//! functions.

use std::collections::BTreeSet;

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "appear", "appears", "are", "as", "at", "be",
    "before", "began", "begin", "by", "did", "do", "does", "doing", "during", "end", "ended",
    "finish", "finished", "for", "from", "has", "have", "how", "in", "into", "is", "it", "its",
    "many", "of", "on", "or", "start", "started", "starts", "stop", "stopped", "that", "the",
    "their", "then", "there", "this", "to", "up", "was", "were", "what", "when", "where", "which",
    "while", "who", "why", "with",
];

/// Lowercased alphanumeric words, in order of appearance.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn word_set(text: &str) -> BTreeSet<String> {
    words(text).into_iter().collect()
}

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// Distinct words of `text` that are not stopwords.
pub fn content_words(text: &str) -> BTreeSet<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).collect()
}

/// Number of distinct words of `query` that also occur in `candidate`.
pub fn word_overlap(query: &str, candidate: &str) -> usize {
    let cand = word_set(candidate);
    word_set(query).iter().filter(|w| cand.contains(*w)).count()
}

/// True when every non-stopword of `query` occurs in `text`. An all-stopword
/// query matches nothing.
pub fn contains_all_content_words(text: &str, query: &str) -> bool {
    let needed = content_words(query);
    if needed.is_empty() {
        return false;
    }
    let have = word_set(text);
    needed.iter().all(|w| have.contains(w))
}

/// Whitespace token count, used as the prompt-size proxy.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Replaces line breaks so a value fits on one payload line.
pub fn one_line(text: &str) -> String {
    text.replace(['\r', '\n'], " ")
}

/// Picks `budget` items spread evenly over `items`, keeping both endpoints
/// when `budget >= 2`. Position `i` maps to `ceil(i * (n - 1) / (budget - 1))`.
pub fn uniform_sample<T: Copy>(items: &[T], budget: usize) -> Vec<T> {
    let n = items.len();
    if budget == 0 || n == 0 {
        return Vec::new();
    }
    if budget >= n {
        return items.to_vec();
    }
    if budget == 1 {
        return vec![items[(n - 1) / 2]];
    }
    (0..budget)
        .map(|i| items[(i * (n - 1)).div_ceil(budget - 1)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_sorted_for_binary_search() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn words_split_on_punctuation() {
        assert_eq!(words("[E3] Runs, fast!"), vec!["e3", "runs", "fast"]);
    }

    #[test]
    fn overlap_counts_distinct_query_words() {
        assert_eq!(word_overlap("dog running up the stairs", "dog sleeping"), 1);
        assert_eq!(
            word_overlap("dog running up the stairs", "dog running up the stairs"),
            5
        );
    }

    #[test]
    fn uniform_sample_keeps_endpoints() {
        let frames: Vec<usize> = (0..20).collect();
        assert_eq!(uniform_sample(&frames, 5), vec![0, 5, 10, 15, 19]);
        assert_eq!(uniform_sample(&frames, 2), vec![0, 19]);
        assert_eq!(uniform_sample(&frames, 30), frames);
        assert_eq!(uniform_sample(&[0usize], 5), vec![0]);
        assert_eq!(uniform_sample(&[4usize, 5, 6], 1), vec![5]);
    }

    #[test]
    fn content_word_matching() {
        assert!(contains_all_content_words(
            "man in red shirt; sitting",
            "when did the man start sitting"
        ));
        assert!(!contains_all_content_words("man walking", "when did the man start sitting"));
        assert!(!contains_all_content_words("anything", "when did the"));
    }
}
