//! The built-in emoji label universe and its sentiment clusters.
//!
//! Labels are Unicode codepoint sequences (the red heart carries the
//! `U+FE0F` presentation selector; all others are single codepoints).
//! Three groups of near-synonymous emojis collapse onto one representative
//! each: hearts onto the red heart, broad smiles onto 😊, and the
//! smirking/negative faces onto 😬.  Every other emoji represents itself.

/// Red heart, `U+2764 U+FE0F`.
pub const RED_HEART: &str = "\u{2764}\u{FE0F}";

/// The 18 emojis the synthetic generator and default corpus cleaning know
/// about.  The first entries are chosen so that any prefix of up to seven
/// labels draws from seven *different* clusters (useful when generating
/// small separable corpora); the remaining entries fill out the three
/// clusters.
pub const EMOJI_18: [&str; 18] = [
    "😊",      // smiling face with smiling eyes
    RED_HEART, // ❤️
    "😬",      // grimacing face
    "😡",      // pouting face
    "😭",      // loudly crying face
    "😐",      // neutral face
    "😱",      // face screaming in fear
    "😄",      // grinning face with smiling eyes
    "💜",      // purple heart
    "😏",      // smirking face
    "😁",      // beaming face with smiling eyes
    "💙",      // blue heart
    "😜",      // winking face with tongue
    "😆",      // grinning squinting face
    "💖",      // sparkling heart
    "😝",      // squinting face with tongue
    "😇",      // smiling face with halo
    "😞",      // disappointed face
];

/// Map an emoji label onto its cluster representative.
///
/// Hearts (red, purple, blue, sparkling) map to the red heart; smiles
/// (😊 😄 😁 😆 😇) map to 😊; the smirking/negative group (😬 😏 😜 😝 😞)
/// maps to 😬.  Any other label maps to itself, so the function is total
/// and idempotent.
pub fn cluster_representative(label: &str) -> &str {
    match label {
        "\u{2764}" | RED_HEART | "💜" | "💙" | "💖" => RED_HEART,
        "😊" | "😄" | "😁" | "😆" | "😇" => "😊",
        "😬" | "😏" | "😜" | "😝" | "😞" => "😬",
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn builtin_labels_are_distinct() {
        let set: HashSet<&str> = EMOJI_18.iter().copied().collect();
        assert_eq!(set.len(), 18);
    }

    #[test]
    fn first_seven_labels_live_in_distinct_clusters() {
        let reps: HashSet<&str> = EMOJI_18[..7]
            .iter()
            .map(|e| cluster_representative(e))
            .collect();
        assert_eq!(reps.len(), 7);
    }

    #[test]
    fn builtin_labels_reduce_to_seven_clusters() {
        let reps: HashSet<&str> = EMOJI_18.iter().map(|e| cluster_representative(e)).collect();
        assert_eq!(reps.len(), 7);
    }

    #[test]
    fn clustering_is_idempotent_on_the_builtin_universe() {
        for e in EMOJI_18 {
            let rep = cluster_representative(e);
            assert_eq!(cluster_representative(rep), rep, "label {e}");
        }
    }

    #[test]
    fn bare_heart_normalizes_to_presentation_form() {
        assert_eq!(cluster_representative("\u{2764}"), RED_HEART);
    }
}
