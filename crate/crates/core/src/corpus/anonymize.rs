/// Characters allowed in a user handle.
pub fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Replaces every user handle with the literal `@user`.
///
/// A handle is `@` followed by one or more handle characters, where the `@`
/// is not itself preceded by a handle character (so `ana@mail.com` is left
/// alone). Runs longer than the platform's 15-character limit are replaced
/// as well so that no raw account name survives.
pub fn anonymize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    let mut prev: Option<char> = None;
    while let Some((i, c)) = chars.next() {
        if c == '@' && !prev.is_some_and(is_handle_char) {
            let start = i + 1;
            let mut end = start;
            while let Some(&(j, d)) = chars.peek() {
                if !is_handle_char(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            if end > start {
                out.push_str("@user");
                prev = Some('r');
                continue;
            }
        }
        out.push(c);
        prev = Some(c);
    }
    out
}
