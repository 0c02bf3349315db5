use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::time::Duration;

use mt_ensemble::genkit::{
    build_choosebest_prompt, build_generatebest_prompt, build_translation_prompt, choose_best, parse_choosebest_answer,
    relative_cost, sample_hypotheses, CompletionBackend, CompletionRequest, CostLedger, CostRecord, FixedBackend,
    GenError, HttpBackend, NoisyCopyBackend, SamplingConfig, Shot, TemplateId,
};

const SRC: &str = "The cat sleeps.";
const HYPS: [&str; 3] = ["Die Katze schläft.", "Die Katze schlaeft.", "Katze schläft."];

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/prompts/{name}.txt", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

fn render(t: TemplateId) -> String {
    match t {
        TemplateId::ChooseBest => build_choosebest_prompt("English", "German", SRC, &HYPS).unwrap(),
        TemplateId::GenerateBest => build_generatebest_prompt("English", "German", SRC, &HYPS).unwrap(),
        TemplateId::MultiN => build_translation_prompt(t, "English", "German", SRC, Some(3), &[]).unwrap(),
        _ => build_translation_prompt(t, "English", "German", SRC, None, &[]).unwrap(),
    }
}

#[test]
fn all_templates_match_golden_fixtures() {
    for t in TemplateId::ALL {
        assert_eq!(render(t), fixture(t.as_str()), "template {t}");
    }
}

#[test]
fn few_shot_layouts_match_golden_fixtures() {
    let shots = [
        Shot {
            source: "Good morning.".into(),
            translation: "Guten Morgen.".into(),
        },
        Shot {
            source: "Thank you.".into(),
            translation: "Danke.".into(),
        },
    ];
    let p = build_translation_prompt(TemplateId::Hendy, "English", "German", SRC, None, &shots).unwrap();
    assert_eq!(p, fixture("hendy_two_shot"));
    let p = build_translation_prompt(TemplateId::Peng, "English", "German", SRC, None, &shots[..1]).unwrap();
    assert_eq!(p, fixture("peng_one_shot"));
    assert!(build_translation_prompt(TemplateId::MultiN, "English", "German", SRC, Some(2), &shots).is_err());
}

#[test]
fn unbound_slots_are_errors() {
    assert!(build_translation_prompt(TemplateId::Hendy, "", "German", SRC, None, &[]).is_err());
    assert!(build_translation_prompt(TemplateId::Hendy, "English", "German", "", None, &[]).is_err());
    assert!(build_translation_prompt(TemplateId::MultiN, "English", "German", SRC, None, &[]).is_err());
    // peng names only the target language
    assert!(build_translation_prompt(TemplateId::Peng, "", "German", SRC, None, &[]).is_ok());
    assert!(build_choosebest_prompt("English", "German", SRC, &HYPS[..1]).is_err());
}

#[test]
fn two_option_prompt_lists_exactly_a_and_b() {
    let p = build_choosebest_prompt("English", "German", SRC, &HYPS[..2]).unwrap();
    assert!(p.contains("Option A.") && p.contains("Option B.") && !p.contains("Option C."));
    assert!(p.ends_with("Correct answer: Option"));
}

#[test]
fn choosebest_answers() {
    assert_eq!(parse_choosebest_answer(" B.", 3).unwrap(), 1);
    assert_eq!(parse_choosebest_answer("Option C is best", 3).unwrap(), 2);
    assert_eq!(parse_choosebest_answer("I think Option A", 3).unwrap(), 0);
    assert!(parse_choosebest_answer(" D.", 3).is_err());
    assert!(parse_choosebest_answer("none of them", 3).is_err());
}

#[test]
fn cost_arithmetic_example() {
    // greedy: 50 prompt + 25 completion; 20 samples of 25 tokens reuse the one prompt
    let greedy = CostLedger::from_records(vec![CostRecord {
        segment_id: "s".into(),
        purpose: "generate".into(),
        prompt_tokens: 50,
        completion_tokens: 25,
    }]);
    let ledger = CostLedger::new();
    let backend = FixedBackend::new("Hallo", 50, 25);
    sample_hypotheses(&backend, "s", "hendy", "p", &SamplingConfig::unbiased(20), &ledger, "generate").unwrap();
    assert_eq!(ledger.total_tokens(), 550);
    let rel = relative_cost(&ledger, &greedy).unwrap();
    assert!((rel - 550.0 / 75.0).abs() < 1e-12);
    assert!(relative_cost(&ledger, &CostLedger::new()).is_err());
}

#[test]
fn cost_is_sublinear_in_sample_count() {
    let backend = FixedBackend::new("Hallo Welt", 40, 12);
    let base = CostLedger::new();
    sample_hypotheses(&backend, "s", "hendy", "p", &SamplingConfig::greedy(), &base, "generate").unwrap();
    for n in [5, 20, 50] {
        let l = CostLedger::new();
        sample_hypotheses(&backend, "s", "hendy", "p", &SamplingConfig::unbiased(n), &l, "generate").unwrap();
        let rel = relative_cost(&l, &base).unwrap();
        assert!(rel < f64::from(n), "n={n}: {rel}");
        assert!((rel - (40.0 + 12.0 * f64::from(n)) / 52.0).abs() < 1e-12);
    }
}

#[test]
fn short_batch_keeps_partial_results() {
    let backend = FixedBackend::new("Hallo", 3, 1).with_max_choices(2);
    let ledger = CostLedger::new();
    let err = sample_hypotheses(&backend, "s", "hendy", "p", &SamplingConfig::unbiased(5), &ledger, "generate").unwrap_err();
    match err {
        GenError::ShortBatch { requested, got, partial } => {
            assert_eq!((requested, got, partial.len()), (5, 2, 2));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(ledger.completion_tokens(), 2);
}

#[test]
fn noisy_copy_is_deterministic_and_temperature_driven() {
    let b = NoisyCopyBackend::new(vec![("the cat sleeps".into(), "die Katze schläft heute tief".into())], 1.0, 7);
    let req = |t: f64| CompletionRequest {
        prompt: "Source: the cat sleeps\nTarget:".into(),
        n: 30,
        temperature: t,
        top_p: 1.0,
        max_tokens: 32,
        stop: vec![],
    };
    assert_eq!(b.complete(&req(0.7)).unwrap(), b.complete(&req(0.7)).unwrap());
    let zero = b.complete(&req(0.0)).unwrap();
    assert!(zero.choices.iter().all(|c| c.text == "die Katze schläft heute tief"));
    let exact = |t: f64| b.complete(&req(t)).unwrap().choices.iter().filter(|c| c.text == "die Katze schläft heute tief").count();
    assert!(exact(0.1) > exact(1.0));
    let unknown = CompletionRequest {
        prompt: "Source: something else".into(),
        ..req(0.5)
    };
    assert!(b.complete(&unknown).is_err());
}

#[test]
fn choose_best_with_fixed_answer() {
    let seg = mt_ensemble::data::SourceSegment {
        id: "s".into(),
        src_lang: "en".into(),
        tgt_lang: "de".into(),
        text: SRC.into(),
        reference: None,
    };
    let set = mt_ensemble::data::HypothesisSet {
        segment_id: "s".into(),
        hypotheses: HYPS
            .iter()
            .map(|t| mt_ensemble::data::Hypothesis {
                text: t.to_string(),
                template_id: "hendy".into(),
                temperature: 1.0,
                top_p: 1.0,
                prompt_tokens: 1,
                completion_tokens: 1,
            })
            .collect(),
    };
    let ledger = CostLedger::new();
    let sel = choose_best(&FixedBackend::new(" C.", 60, 1), &seg, &set, &SamplingConfig::greedy(), &ledger).unwrap();
    assert_eq!(sel.chosen_index, Some(2));
    assert_eq!(sel.chosen_text, HYPS[2]);
    assert_eq!(ledger.records()[0].purpose, "choose_best");
}

/// Minimal HTTP/1.1 server: answers each connection with the next canned
/// `(status, body)` and reports the request it saw.
fn http_server(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/complete", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut req_body = vec![0; length];
            reader.read_exact(&mut req_body).unwrap();
            tx.send((headers, String::from_utf8(req_body).unwrap())).unwrap();
            let mut w = stream;
            write!(
                w,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

#[test]
fn http_backend_wire_shape_auth_and_retries() {
    let ok = r#"{"choices":[{"text":" Hallo.\nmore","completion_tokens":2},{"text":"Servus.","completion_tokens":1}],"prompt_tokens":9}"#;
    let (url, seen) = http_server(vec![(503, "busy".into()), (200, ok.into()), (400, "bad".into())]);
    std::env::set_var("MT_ENSEMBLE_API_KEY", "secret-token");
    let backend = HttpBackend::new(&url).unwrap().with_retries(2, Duration::from_millis(1));
    std::env::remove_var("MT_ENSEMBLE_API_KEY");

    let ledger = CostLedger::new();
    let set = sample_hypotheses(&backend, "s", "hendy", "Translate", &SamplingConfig::biased(2), &ledger, "generate").unwrap();
    assert_eq!(set.texts(), vec!["Hallo.", "Servus."]);
    assert_eq!((ledger.prompt_tokens(), ledger.completion_tokens()), (9, 3));

    let (headers, _) = seen.recv().unwrap();
    assert!(headers.to_ascii_lowercase().contains("authorization: bearer secret-token"), "{headers}");
    let (_, body) = seen.recv().unwrap();
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["prompt"], "Translate");
    assert_eq!(v["n"], 2);
    assert_eq!(v["temperature"], 0.8);
    assert_eq!(v["top_p"], 0.95);
    assert!(v["max_tokens"].is_u64() && v["stop"].is_array());

    // client errors are not retried
    let err = sample_hypotheses(&backend, "s", "hendy", "x", &SamplingConfig::unbiased(1), &ledger, "generate");
    assert!(err.is_err());
}
