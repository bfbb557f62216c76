use super::phrases::tokenize;
use crate::calendar::UserId;
use crate::env::UserDirectory;

/// Directory users named in the sentence, in order of first mention.
/// Multi-word names are matched longest first; unknown words are ignored.
pub fn parse_participants(directory: &UserDirectory, sentence: &str) -> Vec<UserId> {
    let tokens = tokenize(sentence);
    let mut names: Vec<(Vec<String>, UserId)> = directory.iter().map(|(id, n)| (tokenize(n), id)).collect();
    names.retain(|(t, _)| !t.is_empty());
    names.sort_by_key(|(t, _)| std::cmp::Reverse(t.len()));
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let hit = names
            .iter()
            .find(|(t, _)| tokens.len() - i >= t.len() && tokens[i..i + t.len()] == t[..]);
        match hit {
            Some((t, id)) => {
                if !out.contains(id) {
                    out.push(*id);
                }
                i += t.len();
            }
            None => i += 1,
        }
    }
    out
}
