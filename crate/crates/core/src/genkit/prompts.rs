//! Prompt templates for translation and for LLM self-selection.
//!
//! Lines of a template are joined with a single `\n`. The source sentence is
//! inserted verbatim, without adding punctuation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("template `{template}` requires slot `{slot}`")]
    UnboundSlot { template: TemplateId, slot: &'static str },
    #[error("template `{0}` has no few-shot layout")]
    NoShotLayout(TemplateId),
    #[error("template `{0}` is not a translation template")]
    NotTranslation(TemplateId),
    #[error("multiple-choice prompts take 2 to 26 options, got {0}")]
    OptionCount(usize),
    #[error("no option letter found in completion {0:?}")]
    NoOption(String),
    #[error("option {letter} is beyond the {n_options} offered")]
    OptionOutOfRange { letter: char, n_options: usize },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Hendy,
    Peng,
    Gao,
    Zhang,
    MultiN,
    LlamaVariant,
    ChooseBest,
    GenerateBest,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::Hendy,
        TemplateId::Peng,
        TemplateId::Gao,
        TemplateId::Zhang,
        TemplateId::MultiN,
        TemplateId::LlamaVariant,
        TemplateId::ChooseBest,
        TemplateId::GenerateBest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::Hendy => "hendy",
            TemplateId::Peng => "peng",
            TemplateId::Gao => "gao",
            TemplateId::Zhang => "zhang",
            TemplateId::MultiN => "multi_n",
            TemplateId::LlamaVariant => "llama_variant",
            TemplateId::ChooseBest => "choose_best",
            TemplateId::GenerateBest => "generate_best",
        }
    }

    pub fn is_translation(&self) -> bool {
        !matches!(self, TemplateId::ChooseBest | TemplateId::GenerateBest)
    }

    /// Placeholders that must be bound to render this template.
    pub fn slots(&self) -> &'static [&'static str] {
        match self {
            TemplateId::Peng => &["target language", "source sentence"],
            TemplateId::MultiN => &["source language", "target language", "N", "source sentence"],
            TemplateId::ChooseBest | TemplateId::GenerateBest => {
                &["source language", "target language", "source", "hypotheses"]
            }
            _ => &["source language", "target language", "source sentence"],
        }
    }

    fn has_shot_layout(&self) -> bool {
        self.is_translation() && *self != TemplateId::MultiN
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

/// A completed `(source, translation)` pair shown before the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub source: String,
    pub translation: String,
}

/// English display name for common ISO 639-1 codes, used in prompts.
pub fn language_name(code: &str) -> Option<&'static str> {
    Some(match code {
        "en" => "English",
        "de" => "German",
        "cs" => "Czech",
        "ru" => "Russian",
        "uk" => "Ukrainian",
        "fr" => "French",
        "es" => "Spanish",
        "it" => "Italian",
        "pt" => "Portuguese",
        "nl" => "Dutch",
        "pl" => "Polish",
        "zh" => "Chinese",
        "ja" => "Japanese",
        "ko" => "Korean",
        "is" => "Icelandic",
        "ha" => "Hausa",
        "he" => "Hebrew",
        "hr" => "Croatian",
        "liv" => "Livonian",
        "sah" => "Yakut",
        _ => return None,
    })
}

fn bound(template: TemplateId, slot: &'static str, value: &str) -> Result<(), PromptError> {
    if value.is_empty() {
        Err(PromptError::UnboundSlot { template, slot })
    } else {
        Ok(())
    }
}

fn render_translation(
    template: TemplateId,
    src_lang: &str,
    tgt_lang: &str,
    source: &str,
    n: Option<usize>,
) -> Result<String, PromptError> {
    Ok(match template {
        TemplateId::Hendy => {
            format!("Translate this sentence from {src_lang} to {tgt_lang}.\nSource: {source}\nTarget:")
        }
        TemplateId::Peng => {
            format!("Please provide the {tgt_lang} translation for this sentence: {source}")
        }
        TemplateId::Gao => format!(
            "This is a {src_lang} to {tgt_lang} translation task, please provide the {tgt_lang} translation for this sentence: {source}"
        ),
        TemplateId::Zhang => format!("{src_lang}: {source}\n{tgt_lang}:"),
        TemplateId::MultiN => {
            let n = n.ok_or(PromptError::UnboundSlot { template, slot: "N" })?;
            format!(
                "Translate this sentence from {src_lang} to {tgt_lang} in {n} different ways.\nSource: {source}\n{n} translations:"
            )
        }
        TemplateId::LlamaVariant => format!(
            "Translate this sentence from {src_lang} to {tgt_lang}.\n{src_lang} Source: {source}\n{tgt_lang} Translation:"
        ),
        TemplateId::ChooseBest | TemplateId::GenerateBest => {
            return Err(PromptError::NotTranslation(template))
        }
    })
}

/// Renders a translation prompt, optionally preceded by few-shot examples.
///
/// Each shot is rendered with the same template and completed with its
/// translation (after a space when the prompt ends in `:`, otherwise on the
/// next line). Shots and the query are separated by a blank line.
pub fn build_translation_prompt(
    template: TemplateId,
    src_lang: &str,
    tgt_lang: &str,
    source: &str,
    n: Option<usize>,
    shots: &[Shot],
) -> Result<String, PromptError> {
    if !template.is_translation() {
        return Err(PromptError::NotTranslation(template));
    }
    if template != TemplateId::Peng {
        bound(template, "source language", src_lang)?;
    }
    bound(template, "target language", tgt_lang)?;
    bound(template, "source sentence", source)?;
    if !shots.is_empty() && !template.has_shot_layout() {
        return Err(PromptError::NoShotLayout(template));
    }

    let mut out = String::new();
    for shot in shots {
        let head = render_translation(template, src_lang, tgt_lang, &shot.source, n)?;
        let sep = if head.ends_with(':') { " " } else { "\n" };
        out.push_str(&head);
        out.push_str(sep);
        out.push_str(&shot.translation);
        out.push_str("\n\n");
    }
    out.push_str(&render_translation(template, src_lang, tgt_lang, source, n)?);
    Ok(out)
}

pub const MAX_OPTIONS: usize = 26;

fn option_letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// Multiple-choice prompt asking the model to pick the best hypothesis.
pub fn build_choosebest_prompt(
    src_lang: &str,
    tgt_lang: &str,
    source: &str,
    hyps: &[&str],
) -> Result<String, PromptError> {
    const T: TemplateId = TemplateId::ChooseBest;
    if !(2..=MAX_OPTIONS).contains(&hyps.len()) {
        return Err(PromptError::OptionCount(hyps.len()));
    }
    bound(T, "source language", src_lang)?;
    bound(T, "target language", tgt_lang)?;
    bound(T, "source", source)?;
    let mut out = format!(
        "This is a multiple choice question, choose a single answer. What is the best {tgt_lang} translation for this {src_lang} sentence?\nSource: {source}\n"
    );
    for (i, h) in hyps.iter().enumerate() {
        out.push_str(&format!("Option {}. {h}\n", option_letter(i)));
    }
    out.push_str("Correct answer: Option");
    Ok(out)
}

/// Prompt asking the model to write a final translation from the hypotheses.
pub fn build_generatebest_prompt(
    src_lang: &str,
    tgt_lang: &str,
    source: &str,
    hyps: &[&str],
) -> Result<String, PromptError> {
    const T: TemplateId = TemplateId::GenerateBest;
    if hyps.is_empty() {
        return Err(PromptError::UnboundSlot {
            template: T,
            slot: "hypotheses",
        });
    }
    bound(T, "source language", src_lang)?;
    bound(T, "target language", tgt_lang)?;
    bound(T, "source", source)?;
    let mut out = format!(
        "Use the following translation hypotheses to generate the best possible {tgt_lang} translation for this {src_lang} sentence.\nSource: {source}\nTranslation hypotheses:\n"
    );
    for h in hyps {
        out.push_str(h);
        out.push('\n');
    }
    out.push_str("Best possible translation:");
    Ok(out)
}

/// Zero-based option index from a ChooseBest completion.
///
/// Takes the letter after the first `Option` if there is one, otherwise the
/// first standalone capital letter, e.g. `"B"`, `" Option C. because…"`,
/// `"The best is D"`.
pub fn parse_choosebest_answer(completion: &str, n_options: usize) -> Result<usize, PromptError> {
    let chars: Vec<char> = completion.chars().collect();
    let standalone = |i: usize| {
        chars[i].is_ascii_uppercase()
            && (i == 0 || !chars[i - 1].is_alphanumeric())
            && chars.get(i + 1).map_or(true, |n| !n.is_alphanumeric())
    };

    let after_option = completion.match_indices("Option").find_map(|(byte, word)| {
        let start = completion[..byte].chars().count() + word.len();
        let i = (start..chars.len()).find(|&i| !chars[i].is_whitespace())?;
        standalone(i).then_some(i)
    });
    let pos = after_option
        .or_else(|| (0..chars.len()).find(|&i| standalone(i)))
        .ok_or_else(|| PromptError::NoOption(completion.to_string()))?;

    let letter = chars[pos];
    let index = (letter as u8 - b'A') as usize;
    if index >= n_options {
        return Err(PromptError::OptionOutOfRange { letter, n_options });
    }
    Ok(index)
}
