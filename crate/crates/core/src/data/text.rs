//! Profile composition and text cleanup ahead of featurization.

use super::UserRecord;
use crate::labeling::HashtagLexicon;

/// Codepoint ranges treated as emoji. Covers the pictographic blocks, the
/// dingbat and miscellaneous-symbol blocks, regional indicators, and the
/// joiners and selectors that glue emoji sequences together.
pub const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x200D, 0x200D),   // zero width joiner
    (0x20E3, 0x20E3),   // combining enclosing keycap
    (0x2600, 0x26FF),   // miscellaneous symbols
    (0x2700, 0x27BF),   // dingbats
    (0x2B50, 0x2B50),   // white medium star
    (0x2B55, 0x2B55),   // heavy large circle
    (0xFE0E, 0xFE0F),   // variation selectors 15, 16
    (0x1F000, 0x1F0FF), // mahjong, domino, playing cards
    (0x1F100, 0x1F1FF), // enclosed alphanumeric supplement, regional indicators
    (0x1F300, 0x1F5FF), // miscellaneous symbols and pictographs
    (0x1F600, 0x1F64F), // emoticons
    (0x1F680, 0x1F6FF), // transport and map symbols
    (0x1F700, 0x1F7FF), // alchemical symbols, geometric shapes extended
    (0x1F800, 0x1F8FF), // supplemental arrows-c
    (0x1F900, 0x1F9FF), // supplemental symbols and pictographs
    (0x1FA00, 0x1FAFF), // chess symbols, symbols and pictographs extended-a
    (0xE0020, 0xE007F), // tag characters
];

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

fn is_link(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Profile text followed by one templated sentence per optional field,
/// location first, then extra fields in key order.
pub fn compose_profile(user: &UserRecord) -> String {
    let mut parts: Vec<String> = Vec::new();
    let profile = user.profile.trim();
    if !profile.is_empty() {
        parts.push(profile.to_string());
    }
    if let Some(loc) = user.location.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
        parts.push(format!("My location is {loc}."));
    }
    if let Some(extra) = &user.extra {
        for (key, value) in extra {
            let value = value.trim();
            if !value.is_empty() {
                parts.push(format!("My {key} is {value}."));
            }
        }
    }
    parts.join(" ")
}

/// Drops links, emoji and (when a lexicon is given) annotation hashtags,
/// then collapses whitespace. Idempotent.
pub fn clean_text(text: &str, lexicon: Option<&HashtagLexicon>) -> String {
    let mut kept: Vec<String> = Vec::new();
    for raw in text.split_whitespace() {
        let token: String = raw.chars().filter(|c| !is_emoji(*c)).collect();
        if token.is_empty() || is_link(&token) {
            continue;
        }
        if token.starts_with('#') && lexicon.is_some_and(|l| l.contains(&token)) {
            continue;
        }
        kept.push(token);
    }
    kept.join(" ")
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}
