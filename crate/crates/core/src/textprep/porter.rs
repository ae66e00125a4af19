//! Porter suffix-stripping stemmer, original 1980 rule set (steps 1a to 5b).
//!
//! Operates on lowercase ASCII; anything else is returned unchanged.

pub fn stem(token: &str) -> String {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()) {
        return token.to_string();
    }
    let mut w = token.as_bytes().to_vec();
    step1a(&mut w);
    step1b(&mut w);
    step1c(&mut w);
    step2(&mut w);
    step3(&mut w);
    step4(&mut w);
    step5a(&mut w);
    step5b(&mut w);
    // Only ASCII bytes are ever written.
    String::from_utf8(w).expect("ascii")
}

/// `y` is a consonant at the start of a word or after a vowel.
fn is_consonant(w: &[u8], mut i: usize) -> bool {
    let mut flipped = false;
    loop {
        match w[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => return flipped,
            b'y' if i > 0 => {
                flipped = !flipped;
                i -= 1;
            }
            _ => return !flipped,
        }
    }
}

/// m in `[C](VC)^m[V]`.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let cons = is_consonant(w, i);
        if cons && prev_vowel {
            m += 1;
        }
        prev_vowel = !cons;
    }
    m
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[u8]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

/// `*o`: ends consonant-vowel-consonant, last consonant not w, x or y.
fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn stem_len(w: &[u8], suffix: &str) -> Option<usize> {
    w.ends_with(suffix.as_bytes()).then(|| w.len() - suffix.len())
}

fn replace(w: &mut Vec<u8>, keep: usize, with: &str) {
    w.truncate(keep);
    w.extend_from_slice(with.as_bytes());
}

/// The first rule whose suffix matches decides; its condition gates the
/// replacement and no later rule is tried.
fn apply_rules(w: &mut Vec<u8>, rules: &[(&str, &str)], cond: impl Fn(&[u8]) -> bool) {
    for &(suffix, with) in rules {
        if let Some(keep) = stem_len(w, suffix) {
            if cond(&w[..keep]) {
                replace(w, keep, with);
            }
            return;
        }
    }
}

fn step1a(w: &mut Vec<u8>) {
    apply_rules(w, &[("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", "")], |_| true);
}

fn step1b(w: &mut Vec<u8>) {
    if let Some(keep) = stem_len(w, "eed") {
        if measure(&w[..keep]) > 0 {
            replace(w, keep, "ee");
        }
        return;
    }
    let stripped = ["ed", "ing"]
        .iter()
        .filter_map(|s| stem_len(w, s))
        .find(|&keep| has_vowel(&w[..keep]));
    let Some(keep) = stripped else {
        return;
    };
    w.truncate(keep);
    if w.ends_with(b"at") || w.ends_with(b"bl") || w.ends_with(b"iz") {
        w.push(b'e');
    } else if ends_double_consonant(w) {
        if !matches!(w[w.len() - 1], b'l' | b's' | b'z') {
            w.pop();
        }
    } else if measure(w) == 1 && ends_cvc(w) {
        w.push(b'e');
    }
}

fn step1c(w: &mut [u8]) {
    if let Some(keep) = stem_len(w, "y") {
        if has_vowel(&w[..keep]) {
            w[keep] = b'i';
        }
    }
}

fn step2(w: &mut Vec<u8>) {
    const RULES: [(&str, &str); 20] = [
        ("ational", "ate"),
        ("tional", "tion"),
        ("enci", "ence"),
        ("anci", "ance"),
        ("izer", "ize"),
        ("abli", "able"),
        ("alli", "al"),
        ("entli", "ent"),
        ("eli", "e"),
        ("ousli", "ous"),
        ("ization", "ize"),
        ("ation", "ate"),
        ("ator", "ate"),
        ("alism", "al"),
        ("iveness", "ive"),
        ("fulness", "ful"),
        ("ousness", "ous"),
        ("aliti", "al"),
        ("iviti", "ive"),
        ("biliti", "ble"),
    ];
    apply_rules(w, &RULES, |s| measure(s) > 0);
}

fn step3(w: &mut Vec<u8>) {
    const RULES: [(&str, &str); 7] = [
        ("icate", "ic"),
        ("ative", ""),
        ("alize", "al"),
        ("iciti", "ic"),
        ("ical", "ic"),
        ("ful", ""),
        ("ness", ""),
    ];
    apply_rules(w, &RULES, |s| measure(s) > 0);
}

fn step4(w: &mut Vec<u8>) {
    const SUFFIXES: [&str; 19] = [
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion",
        "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    ];
    for suffix in SUFFIXES {
        if let Some(keep) = stem_len(w, suffix) {
            let stem = &w[..keep];
            let ok = measure(stem) > 1
                && (suffix != "ion" || matches!(stem.last(), Some(b's' | b't')));
            if ok {
                w.truncate(keep);
            }
            return;
        }
    }
}

fn step5a(w: &mut Vec<u8>) {
    if let Some(keep) = stem_len(w, "e") {
        let m = measure(&w[..keep]);
        if m > 1 || (m == 1 && !ends_cvc(&w[..keep])) {
            w.truncate(keep);
        }
    }
}

fn step5b(w: &mut Vec<u8>) {
    if w.ends_with(b"ll") && measure(&w[..w.len() - 1]) > 1 {
        w.pop();
    }
}
