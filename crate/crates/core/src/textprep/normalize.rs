use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

static HTML_TAG: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?s)<!--.*?-->|<[!/?]?[A-Za-z][^<>]*>").expect("valid tag pattern"));

static HTML_ENTITY: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"&(#[0-9]{1,7}|#[xX][0-9a-fA-F]{1,6}|[a-zA-Z]{2,8});").expect("valid entity pattern"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PunctuationPolicy {
    /// Every character that is neither alphanumeric nor whitespace becomes a space.
    #[default]
    Strip,
    /// Like `Strip`, but a hyphen between two alphanumerics survives ("well-known").
    KeepIntrawordHyphen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_html: bool,
    pub punctuation_policy: PunctuationPolicy,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_html: true,
            punctuation_policy: PunctuationPolicy::Strip,
        }
    }
}

fn decode_entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        _ => return None,
    })
}

/// Normalize raw description text.
///
/// HTML tags and comments are replaced by a space, character entities are
/// decoded, letters are lowercased, punctuation is handled per policy and
/// whitespace runs collapse to a single space with no leading or trailing
/// blank. Malformed markup is never an error: a stray `<` is punctuation.
pub fn normalize_text(raw: &str, cfg: &NormalizationConfig) -> String {
    let mut text = std::borrow::Cow::Borrowed(raw);
    if cfg.strip_html {
        text = HTML_TAG.replace_all(&text, " ").into_owned().into();
        text = HTML_ENTITY
            .replace_all(&text, |caps: &regex::Captures<'_>| match decode_entity(&caps[1]) {
                Some(c) => c.to_string(),
                None => " ".to_string(),
            })
            .into_owned()
            .into();
    }

    let chars: Vec<char> = if cfg.lowercase {
        text.chars().flat_map(char::to_lowercase).collect()
    } else {
        text.chars().collect()
    };

    let mut out = String::with_capacity(chars.len());
    let mut pending_space = false;
    for (i, &c) in chars.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            true
        } else if c == '-' && cfg.punctuation_policy == PunctuationPolicy::KeepIntrawordHyphen {
            let before = i > 0 && chars[i - 1].is_alphanumeric();
            let after = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            before && after
        } else {
            false
        };
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Split normalized text into maximal non-whitespace runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}
