use tracing::warn;

use super::AliasTable;

/// One alias occurrence in a text, as byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasMatch {
    pub start: usize,
    pub end: usize,
    /// Registered spelling of the alias that matched.
    pub alias: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Case-insensitive prefix test; returns the byte length consumed in `text`.
fn match_at(text: &str, alias: &str) -> Option<usize> {
    let mut consumed = 0;
    let mut chars = text.chars();
    for a in alias.chars() {
        let t = chars.next()?;
        if !t.to_lowercase().eq(a.to_lowercase()) {
            return None;
        }
        consumed += t.len_utf8();
    }
    Some(consumed)
}

/// Scans left to right; at each word start the longest alias that matches
/// there and ends on a word boundary is taken, and scanning resumes after it.
pub fn find_alias_matches<'a>(text: &str, aliases: impl IntoIterator<Item = &'a str>) -> Vec<AliasMatch> {
    let mut aliases: Vec<&str> = aliases.into_iter().filter(|a| !a.is_empty()).collect();
    aliases.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    aliases.dedup();

    let mut out = Vec::new();
    let mut pos = 0;
    let mut prev: Option<char> = None;
    while pos < text.len() {
        let rest = &text[pos..];
        let at_word_start = prev.is_none_or(|c| !is_word_char(c));
        let hit = if at_word_start {
            aliases.iter().find_map(|alias| {
                let len = match_at(rest, alias)?;
                let next = rest[len..].chars().next();
                next.is_none_or(|c| !is_word_char(c)).then_some((len, *alias))
            })
        } else {
            None
        };
        match hit {
            Some((len, alias)) => {
                out.push(AliasMatch {
                    start: pos,
                    end: pos + len,
                    alias: alias.to_owned(),
                });
                prev = text[..pos + len].chars().next_back();
                pos += len;
            }
            None => {
                let c = rest.chars().next().expect("pos < len");
                prev = Some(c);
                pos += c.len_utf8();
            }
        }
    }
    out
}

/// Replaces every registered alias in `text` with its real road name in one
/// left-to-right pass. Replaced spans are never rescanned.
pub fn substitute_aliases(text: &str, table: &AliasTable) -> String {
    let matches = find_alias_matches(text, table.entries.keys().map(String::as_str));
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in &matches {
        out.push_str(&text[last..m.start]);
        out.push_str(&table.entries[&m.alias]);
        last = m.end;
    }
    out.push_str(&text[last..]);
    warn_unmatched_sections(text, &matches, &table.camera_id);
    out
}

/// Logs "Section X"-shaped tokens that no registered alias covered; these
/// usually mean the model invented a section.
fn warn_unmatched_sections(text: &str, matches: &[AliasMatch], camera_id: &str) {
    let lowered = text.to_lowercase();
    if lowered.len() != text.len() {
        // byte offsets would not line up; skip the diagnostic
        return;
    }
    let mut from = 0;
    while let Some(i) = lowered[from..].find("section ") {
        let start = from + i;
        from = start + "section ".len();
        let boundary = text[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let covered = matches.iter().any(|m| m.start <= start && start < m.end);
        if !boundary || covered {
            continue;
        }
        let token: String = text[from..].chars().take_while(|c| is_word_char(*c)).collect();
        if !token.is_empty() {
            warn!(camera = camera_id, token = %format!("{}{}", &text[start..from], token), "unregistered section alias");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn table(pairs: &[(&str, &str)]) -> AliasTable {
        AliasTable {
            camera_id: "cam".into(),
            entries: pairs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn identity_without_aliases() {
        let t = table(&[("Section C", "King Street")]);
        assert_eq!(substitute_aliases("no aliases here", &t), "no aliases here");
    }

    #[test]
    fn direct_substitution() {
        let t = table(&[("Section C", "King Street")]);
        assert_eq!(
            substitute_aliases("Vehicle 1 is on Section C.", &t),
            "Vehicle 1 is on King Street."
        );
    }

    #[test]
    fn longest_alias_wins() {
        let t = table(&[("Section A", "Alpha Road"), ("Section AB", "Beta Road")]);
        assert_eq!(
            substitute_aliases("on Section AB and Section A.", &t),
            "on Beta Road and Alpha Road."
        );
    }

    #[test]
    fn case_insensitive_and_word_bounded() {
        let t = table(&[("the roundabout", "Elgin Circle"), ("Section A", "Bank Street")]);
        assert_eq!(
            substitute_aliases("The Roundabout, not Section Alpha nor xSection A.", &t),
            "Elgin Circle, not Section Alpha nor xSection A."
        );
    }

    #[test]
    fn replaced_spans_not_rescanned() {
        // the replacement text itself looks like another alias
        let t = table(&[("Section A", "Section B"), ("Section B", "Somewhere")]);
        assert_eq!(substitute_aliases("Section A", &t), "Section B");
    }

    #[test]
    fn unicode_text_survives() {
        let t = table(&[("Section A", "Rue Saint-Denis")]);
        assert_eq!(
            substitute_aliases("Café près de Section A — fin", &t),
            "Café près de Rue Saint-Denis — fin"
        );
    }
}
