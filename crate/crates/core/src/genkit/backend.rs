//! Completion backends.
//!
//! Wire shape (JSON over HTTP POST):
//!
//! ```text
//! request  {"prompt":…,"n":…,"temperature":…,"top_p":…,"max_tokens":…,"stop":[…]}
//! response {"choices":[{"text":…,"completion_tokens":…}],"prompt_tokens":…}
//! ```

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Environment variable holding a bearer token for HTTP backends.
pub const API_KEY_ENV: &str = "MT_ENSEMBLE_API_KEY";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend transport failed: {0}")]
    Transport(String),
    #[error("backend returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("stub backend: {0}")]
    Stub(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionChoice {
    pub text: String,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub choices: Vec<CompletionChoice>,
    pub prompt_tokens: u64,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

/// HTTP backend with bounded exponential backoff on transport errors and 5xx.
pub struct HttpBackend {
    url: String,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    max_retries: u32,
    base_delay: Duration,
}

impl HttpBackend {
    pub fn new(url: &str) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            url: url.to_string(),
            client,
            api_key: std::env::var(API_KEY_ENV).ok(),
            max_retries: 4,
            base_delay: Duration::from_millis(250),
        })
    }

    pub fn with_retries(mut self, max_retries: u32, base_delay: Duration) -> Self {
        self.max_retries = max_retries;
        self.base_delay = base_delay;
        self
    }

    fn attempt(&self, req: &CompletionRequest) -> Result<CompletionResponse, (bool, BackendError)> {
        let mut call = self.client.post(&self.url).json(req);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call
            .send()
            .map_err(|e| (true, BackendError::Transport(e.to_string())))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err((
                status.is_server_error() || status.as_u16() == 429,
                BackendError::Status {
                    status: status.as_u16(),
                    body,
                },
            ));
        }
        resp.json()
            .map_err(|e| (false, BackendError::Transport(format!("bad response body: {e}"))))
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let mut delay = self.base_delay;
        let mut tries = 0;
        loop {
            match self.attempt(req) {
                Ok(r) => return Ok(r),
                Err((retryable, err)) => {
                    if !retryable || tries >= self.max_retries {
                        return Err(err);
                    }
                    tries += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

/// Returns the prompt itself as every completion.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl CompletionBackend for EchoBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let choice = CompletionChoice {
            text: req.prompt.clone(),
            completion_tokens: word_count(&req.prompt),
        };
        Ok(CompletionResponse {
            choices: vec![choice; req.n as usize],
            prompt_tokens: word_count(&req.prompt),
        })
    }
}

/// Returns a fixed text, reporting either fixed token counts or word counts.
#[derive(Debug, Clone)]
pub struct FixedBackend {
    text: String,
    prompt_tokens: Option<u64>,
    completion_tokens: u64,
    max_choices: Option<usize>,
}

impl FixedBackend {
    pub fn new(text: &str, prompt_tokens: u64, completion_tokens: u64) -> Self {
        FixedBackend {
            text: text.to_string(),
            prompt_tokens: Some(prompt_tokens),
            completion_tokens,
            max_choices: None,
        }
    }

    /// Token counts are whitespace word counts of the prompt and the text.
    pub fn counting(text: &str) -> Self {
        FixedBackend {
            text: text.to_string(),
            prompt_tokens: None,
            completion_tokens: word_count(text),
            max_choices: None,
        }
    }

    /// Caps the number of choices returned, simulating a short batch.
    pub fn with_max_choices(mut self, max: usize) -> Self {
        self.max_choices = Some(max);
        self
    }
}

impl CompletionBackend for FixedBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let n = self.max_choices.map_or(req.n as usize, |m| m.min(req.n as usize));
        Ok(CompletionResponse {
            choices: vec![
                CompletionChoice {
                    text: self.text.clone(),
                    completion_tokens: self.completion_tokens,
                };
                n
            ],
            prompt_tokens: self.prompt_tokens.unwrap_or_else(|| word_count(&req.prompt)),
        })
    }
}

/// Synthetic model that emits noisy copies of hidden references.
///
/// For a prompt containing a known source sentence, each sample starts from
/// that source's reference and corrupts every word independently with
/// probability `min(1, noise_scale * temperature * top_p)`: the word is
/// dropped, replaced by a filler word, or has two adjacent characters
/// swapped. Noise therefore grows monotonically with temperature, and
/// temperature 0 reproduces the reference exactly.
///
/// Multiple-choice prompts are answered with a uniformly drawn option letter.
/// Output is a pure function of `(seed, request)`.
#[derive(Debug, Clone)]
pub struct NoisyCopyBackend {
    pairs: Vec<(String, String)>,
    noise_scale: f64,
    seed: u64,
}

const FILLER: &[&str] = &[
    "etwa", "also", "doch", "nun", "eben", "wohl", "schon", "halt", "gar", "bloss",
];

impl NoisyCopyBackend {
    pub fn new(pairs: Vec<(String, String)>, noise_scale: f64, seed: u64) -> Self {
        let mut pairs = pairs;
        // longest source first so a source that contains another wins
        pairs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        NoisyCopyBackend {
            pairs,
            noise_scale,
            seed,
        }
    }

    fn rng(&self, req: &CompletionRequest) -> ChaCha8Rng {
        let key = seed::mix64(seed::fnv1a(&req.prompt) ^ req.temperature.to_bits().rotate_left(17))
            ^ req.top_p.to_bits();
        ChaCha8Rng::seed_from_u64(seed::mix64(self.seed ^ key))
    }

    fn corrupt(&self, reference: &str, p: f64, rng: &mut ChaCha8Rng) -> String {
        let mut out: Vec<String> = Vec::new();
        for word in reference.split_whitespace() {
            if rng.gen::<f64>() >= p {
                out.push(word.to_string());
                continue;
            }
            match rng.gen_range(0..3) {
                0 => {}
                1 => out.push(FILLER.choose(rng).expect("non-empty").to_string()),
                _ => {
                    let mut chars: Vec<char> = word.chars().collect();
                    if chars.len() >= 2 {
                        let i = rng.gen_range(0..chars.len() - 1);
                        chars.swap(i, i + 1);
                        out.push(chars.into_iter().collect());
                    } else {
                        out.push(FILLER.choose(rng).expect("non-empty").to_string());
                    }
                }
            }
        }
        if out.is_empty() {
            out.push(FILLER.choose(rng).expect("non-empty").to_string());
        }
        out.join(" ")
    }
}

impl CompletionBackend for NoisyCopyBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let mut rng = self.rng(req);
        let prompt_tokens = word_count(&req.prompt);

        if req.prompt.ends_with("Correct answer: Option") {
            let options = req.prompt.matches("\nOption ").count().max(1);
            let choices = (0..req.n)
                .map(|_| CompletionChoice {
                    text: format!(" {}.", (b'A' + rng.gen_range(0..options) as u8) as char),
                    completion_tokens: 1,
                })
                .collect();
            return Ok(CompletionResponse {
                choices,
                prompt_tokens,
            });
        }

        let (_, reference) = self
            .pairs
            .iter()
            .find(|(src, _)| req.prompt.contains(src.as_str()))
            .ok_or_else(|| BackendError::Stub("prompt contains no known source sentence".into()))?;
        let p = (self.noise_scale * req.temperature * req.top_p).clamp(0.0, 1.0);
        let choices = (0..req.n)
            .map(|_| {
                let text = self.corrupt(reference, p, &mut rng);
                CompletionChoice {
                    completion_tokens: word_count(&text),
                    text,
                }
            })
            .collect();
        Ok(CompletionResponse {
            choices,
            prompt_tokens,
        })
    }
}
