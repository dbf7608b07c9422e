use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{CAPTION_PREFIX, OBJECTS_PREFIX, RELATIONS_PREFIX};
use super::template::{sentence_case, template_caption};
use super::CaptionError;
use crate::model::{Atom, ObjectNode, RelEdge, SceneGraph};
use crate::parser::{parse_detailed, Lexicon};

pub const ENDPOINT_VAR: &str = "FORGE_GEN_ENDPOINT";
pub const API_KEY_VAR: &str = "FORGE_GEN_API_KEY";
pub const TIMEOUT_VAR: &str = "FORGE_GEN_TIMEOUT_SECS";

/// A text-generation backend.
pub trait GenClient: Send + Sync {
    /// Identifies the backend in manifests; nondeterministic backends say so
    /// here.
    fn name(&self) -> &str;

    fn generate(&self, prompt: &str, max_tokens: usize) -> Result<String, CaptionError>;
}

/// Offline client: reads the query block of a prompt back into a graph and
/// returns its template caption in sentence case.
#[derive(Debug, Clone)]
pub struct MockClient {
    lexicon: Arc<Lexicon>,
}

impl MockClient {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        MockClient { lexicon }
    }

    fn read_query(&self, prompt: &str) -> Result<SceneGraph, CaptionError> {
        let bad = |what: &str| CaptionError::Client(format!("mock client: {what}"));
        let query = prompt
            .rsplit("\n\n")
            .next()
            .ok_or_else(|| bad("empty prompt"))?;
        let mut objects_line = None;
        let mut relations_line = "";
        for line in query.lines() {
            if let Some(rest) = line.strip_prefix(OBJECTS_PREFIX) {
                objects_line = Some(rest);
            } else if let Some(rest) = line.strip_prefix(RELATIONS_PREFIX) {
                relations_line = rest;
            } else if !line.starts_with(CAPTION_PREFIX) && !line.trim().is_empty() {
                return Err(bad("unexpected line in query"));
            }
        }
        let objects_line = objects_line.ok_or_else(|| bad("no objects line"))?;

        let mut names: BTreeMap<String, u64> = BTreeMap::new();
        let mut objects = Vec::new();
        for (i, entry) in objects_line.split("; ").enumerate() {
            let last = entry.rsplit(' ').next().unwrap_or(entry);
            let name_key = last.to_string();
            let base = entry.trim_end_matches(|c: char| c.is_ascii_digit());
            let parsed = parse_detailed(base, &self.lexicon).map_err(|e| bad(&e.to_string()))?;
            let [node] = parsed.graph.objects() else {
                return Err(bad(&format!("object entry {entry:?} is not one object")));
            };
            names.insert(name_key, i as u64);
            objects.push(ObjectNode {
                id: i as u64,
                atom: node.atom.clone(),
                attributes: node.attributes.clone(),
                bbox: None,
            });
        }

        let mut edges = Vec::new();
        if !relations_line.is_empty() {
            for clause in relations_line.split("; ") {
                let subject = names
                    .iter()
                    .filter(|(k, _)| clause.starts_with(&format!("{k} ")))
                    .max_by_key(|(k, _)| k.len())
                    .ok_or_else(|| bad("unknown subject"))?;
                let object = names
                    .iter()
                    .filter(|(k, _)| clause.ends_with(&format!(" {k}")))
                    .max_by_key(|(k, _)| k.len())
                    .ok_or_else(|| bad("unknown object"))?;
                let middle = clause
                    .get(subject.0.len()..clause.len() - object.0.len())
                    .map(str::trim)
                    .filter(|m| !m.is_empty())
                    .ok_or_else(|| bad("missing relationship"))?;
                edges.push(RelEdge {
                    subject_id: *subject.1,
                    relationship: Atom::relationship(middle).map_err(|e| bad(&e.to_string()))?,
                    object_id: *object.1,
                });
            }
        }
        SceneGraph::new("prompt", None, objects, edges).map_err(|e| bad(&e.to_string()))
    }
}

impl GenClient for MockClient {
    fn name(&self) -> &str {
        "mock-template"
    }

    fn generate(&self, prompt: &str, _max_tokens: usize) -> Result<String, CaptionError> {
        let graph = self.read_query(prompt)?;
        Ok(sentence_case(&template_caption(&graph)?))
    }
}

#[derive(Serialize)]
struct GenRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct GenResponse {
    text: String,
}

/// JSON-over-HTTP client: POSTs `{"prompt", "max_tokens"}` and reads
/// `{"text"}`.
#[derive(Debug)]
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    name: String,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let endpoint = endpoint.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpClient {
            name: format!("http(nondeterministic):{endpoint}"),
            endpoint,
            api_key,
            agent,
        }
    }

    /// Reads the endpoint, key and timeout from the environment.
    pub fn from_env() -> Result<Self, CaptionError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| CaptionError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        let timeout = match std::env::var(TIMEOUT_VAR) {
            Ok(v) => v.parse().map_err(|_| {
                CaptionError::Config(format!("{TIMEOUT_VAR} must be whole seconds"))
            })?,
            Err(_) => 60,
        };
        Ok(HttpClient::new(
            endpoint,
            api_key,
            Duration::from_secs(timeout),
        ))
    }
}

impl GenClient for HttpClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, prompt: &str, max_tokens: usize) -> Result<String, CaptionError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(GenRequest { prompt, max_tokens })
            .map_err(|e| CaptionError::Client(e.to_string()))?;
        let body: GenResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| CaptionError::Client(e.to_string()))?;
        Ok(body.text.trim().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caption::prompt::{build_prompt, FewShotBank, FewShotExample};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn bank(n: usize) -> FewShotBank {
        let g = SceneGraph::builder("fs")
            .object(0, "dog", &["black"])
            .object(1, "bed", &["white"])
            .object(2, "floor", &[])
            .relation(0, "on", 1)
            .build()
            .unwrap();
        FewShotBank::new(
            (0..5)
                .map(|i| FewShotExample {
                    n,
                    graph: g.clone(),
                    caption: format!("A black dog on a white bed {i}"),
                })
                .collect(),
        )
    }

    #[test]
    fn mock_renders_query_graph() {
        let g = SceneGraph::builder("g")
            .object(4, "window", &["white"])
            .object(2, "window", &[])
            .object(9, "house", &["tall", "red"])
            .relation(2, "on", 9)
            .relation(4, "next to", 9)
            .build()
            .unwrap();
        let prompt = build_prompt(&g, &bank(g.atom_count())).unwrap().render();
        let mock = MockClient::new(Arc::new(Lexicon::bundled()));
        let text = mock.generate(&prompt, 64).unwrap();
        let back = crate::parser::parse_caption(&text, &Lexicon::bundled()).unwrap();
        assert_eq!(back.canonical(), g.canonical());
        assert!(text.starts_with('W'));
    }

    #[test]
    fn http_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let reply = format!(
                "{{\"text\": \" echo {} {} \"}}",
                req["prompt"].as_str().unwrap(),
                req["max_tokens"]
            );
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
            auth
        });
        let client = HttpClient::new(
            format!("http://{addr}/gen"),
            Some("k1".into()),
            Duration::from_secs(5),
        );
        assert_eq!(client.generate("hello", 32).unwrap(), "echo hello 32");
        assert_eq!(
            server.join().unwrap().to_ascii_lowercase(),
            "authorization: bearer k1"
        );
    }

    #[test]
    fn http_error_is_client_error() {
        let client = HttpClient::new("http://127.0.0.1:9/none", None, Duration::from_secs(2));
        assert!(matches!(
            client.generate("x", 1),
            Err(CaptionError::Client(_))
        ));
    }
}
