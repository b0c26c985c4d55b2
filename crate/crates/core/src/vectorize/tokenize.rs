/// Lower-cased word tokens. A token is a maximal run of alphanumeric
/// characters, joined across single internal apostrophes (`can't`).
/// Typographic apostrophes are folded to `'`.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered
        .chars()
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if c == '\''
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric())
        {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            tokenize("Happy New Years Everyone"),
            ["happy", "new", "years", "everyone"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("I can't--stop"), ["i", "can't", "stop"]);
        assert_eq!(tokenize("'quoted' rock'n'roll x'"), ["quoted", "rock'n'roll", "x"]);
        assert_eq!(tokenize("Words can\u{2019}t describe"), ["words", "can't", "describe"]);
        assert_eq!(tokenize("a''b"), ["a", "b"]);
    }

    proptest! {
        #[test]
        fn idempotent_on_space_join(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            for t in &once {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }
    }
}
