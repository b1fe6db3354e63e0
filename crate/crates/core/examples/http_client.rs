//! Sends one prompt to an OpenAI-compatible endpoint configured through
//! FEATLING_API_KEY and FEATLING_BASE_URL.

use featling::llm::{CompletionRequest, HttpClient, HttpConfig, LlmClient};

fn main() {
    let cfg = match HttpConfig::from_env(None) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let model = std::env::args().nth(1).unwrap_or_else(|| "gpt-3.5-turbo-0613".into());
    let client = HttpClient::new(cfg);
    let request = CompletionRequest::new("List three risk factors for heart disease, one per line.", model);
    match client.complete(&request) {
        Ok(r) => {
            println!("{}", r.text);
            println!("-- {:?}, {:?}, {} ms", r.finish_reason, r.usage, r.latency_ms);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
