//! Offline text generation: a pure function of the prompt.

use crate::explain::{CONTRASTIVE_TAIL, PLAIN_HEAD, PLAIN_TAIL};

type Pairs<'a> = Vec<(&'a str, &'a str)>;

fn parse_pairs(s: &str) -> Option<Pairs<'_>> {
    s.split(", ").map(|p| p.split_once(": ")).collect::<Option<Vec<_>>>().filter(|v| !v.is_empty())
}

enum Parsed<'a> {
    Plain { name: &'a str, pairs: Pairs<'a> },
    Contrastive { a: &'a str, b: &'a str, pairs_a: Pairs<'a>, pairs_b: Pairs<'a> },
}

fn parse(prompt: &str) -> Option<Parsed<'_>> {
    let rest = prompt.strip_prefix(PLAIN_HEAD)?;

    if let Some((a, tail)) = rest.split_once(CONTRASTIVE_TAIL) {
        let (b, tail) = tail.split_once("', given for '")?;
        let tail = tail.strip_prefix(a)?.strip_prefix("' \u{2014} ")?;
        let (pairs_a, pairs_b) = tail.split_once(&format!("; and for '{b}' \u{2014} "))?;
        return Some(Parsed::Contrastive { a, b, pairs_a: parse_pairs(pairs_a)?, pairs_b: parse_pairs(pairs_b)? });
    }

    let (name, pairs) = rest.split_once(PLAIN_TAIL)?;
    Some(Parsed::Plain { name, pairs: parse_pairs(pairs)? })
}

/// Render a lay explanation from a plain or contrastive prompt. Total: any
/// input, including text that matches neither template, yields non-empty text.
pub fn render(prompt: &str) -> String {
    match parse(prompt) {
        Some(Parsed::Plain { name, pairs }) => {
            let clauses: Vec<String> = pairs.iter().map(|(n, v)| format!("{n} is {v}")).collect();
            format!("{name} suits you: {}", clauses.join("; "))
        }
        Some(Parsed::Contrastive { a, b, pairs_a, pairs_b }) => {
            let n = pairs_a.len().max(pairs_b.len());
            let clauses: Vec<String> = (0..n)
                .map(|i| match (pairs_a.get(i), pairs_b.get(i)) {
                    (Some((na, va)), Some((nb, vb))) => {
                        format!("for {a}, {na} is {va} while for {b}, {nb} is {vb}")
                    }
                    (Some((na, va)), None) => format!("for {a}, {na} is {va}"),
                    (None, Some((nb, vb))) => format!("for {b}, {nb} is {vb}"),
                    (None, None) => unreachable!(),
                })
                .collect();
            format!("{a} suits you better than {b}: {}", clauses.join("; "))
        }
        None if prompt.trim().is_empty() => "No details were provided for this recommendation.".to_string(),
        None => format!("Here is why this may suit you: {}", prompt.trim()),
    }
}
