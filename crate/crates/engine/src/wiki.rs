//! Live wiki article source speaking the public REST conventions: the
//! search endpoint for phrase lookup and the page-source endpoint for
//! article wikitext, from which links and plain text are extracted.

use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde_json::Value;

use edukg_core::source::{ArticleRef, ArticleSource, FetchedArticle, SourceError};

/// Blocking JSON GET, pluggable for tests.
pub trait HttpGet: Send + Sync {
    fn get_json(&self, url: &str) -> Result<(u16, String), String>;
}

pub struct ReqwestGet {
    client: reqwest::blocking::Client,
}

impl ReqwestGet {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent("edukg-engine/0.1")
            .build()
            .context("building http client")?;
        Ok(Self { client })
    }
}

impl HttpGet for ReqwestGet {
    fn get_json(&self, url: &str) -> Result<(u16, String), String> {
        let response = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

pub struct WikiRestSource {
    transport: Arc<dyn HttpGet>,
    base_url: String,
    search_limit: usize,
}

impl WikiRestSource {
    pub fn new(transport: Arc<dyn HttpGet>, base_url: impl Into<String>) -> Self {
        Self {
            transport,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            search_limit: 5,
        }
    }

    fn get(&self, url: &str) -> Result<Value, SourceError> {
        let (status, body) = self
            .transport
            .get_json(url)
            .map_err(|message| SourceError::Unavailable { message })?;
        match status {
            200 => serde_json::from_str(&body).map_err(|e| SourceError::Unavailable {
                message: format!("invalid response body: {e}"),
            }),
            404 => Err(SourceError::NotFound {
                title: url.to_string(),
            }),
            _ => Err(SourceError::Unavailable {
                message: format!("status {status}"),
            }),
        }
    }
}

impl ArticleSource for WikiRestSource {
    fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
        let url = format!(
            "{}/w/rest.php/v1/search/page?q={}&limit={}",
            self.base_url,
            utf8_percent_encode(phrase, NON_ALPHANUMERIC),
            self.search_limit
        );
        let value = self.get(&url)?;
        let Some(pages) = value["pages"].as_array() else {
            return Ok(Vec::new());
        };
        Ok(pages
            .iter()
            .filter_map(|page| {
                let title = page["title"].as_str()?;
                let id = page["id"]
                    .as_u64()
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| title.to_lowercase().replace(' ', "_"));
                let summary = page["description"].as_str().unwrap_or_default();
                // Search results carry no link lists; fetch() fills them.
                Some(ArticleRef::new(title, id, summary, Vec::new()))
            })
            .collect())
    }

    fn fetch(&self, title: &str) -> Result<FetchedArticle, SourceError> {
        let url = format!(
            "{}/w/rest.php/v1/page/{}",
            self.base_url,
            utf8_percent_encode(title, NON_ALPHANUMERIC)
        );
        let value = match self.get(&url) {
            Ok(v) => v,
            Err(SourceError::NotFound { .. }) => {
                return Err(SourceError::NotFound {
                    title: title.to_string(),
                })
            }
            Err(e) => return Err(e),
        };
        let wikitext = value["source"]
            .as_str()
            .ok_or_else(|| SourceError::Unavailable {
                message: "page response missing source".to_string(),
            })?;
        let canonical = value["title"].as_str().unwrap_or(title).to_string();
        Ok(FetchedArticle {
            title: canonical,
            text: strip_wikitext(wikitext),
            link_titles: extract_links(wikitext),
        })
    }
}

/// Internal wiki links in order of appearance: `[[Target|label]]` → Target,
/// skipping namespaced targets (`File:`, `Category:`, …) and section
/// anchors.
pub fn extract_links(wikitext: &str) -> Vec<String> {
    let mut links = Vec::new();
    let mut rest = wikitext;
    while let Some(start) = rest.find("[[") {
        rest = &rest[start + 2..];
        let Some(end) = rest.find("]]") else { break };
        let inner = &rest[..end];
        rest = &rest[end + 2..];
        let target = inner.split('|').next().unwrap_or_default().trim();
        let target = target.split('#').next().unwrap_or_default().trim();
        if target.is_empty() || target.contains(':') {
            continue;
        }
        links.push(target.to_string());
    }
    links
}

/// Best-effort plain text from wikitext: drops templates, ref tags, file
/// links, and markup; keeps link labels and paragraph structure.
pub fn strip_wikitext(wikitext: &str) -> String {
    let mut text = String::with_capacity(wikitext.len());
    let mut chars = wikitext.chars().peekable();
    let mut template_depth = 0usize;
    while let Some(c) = chars.next() {
        if c == '{' && chars.peek() == Some(&'{') {
            chars.next();
            template_depth += 1;
            continue;
        }
        if c == '}' && chars.peek() == Some(&'}') {
            chars.next();
            template_depth = template_depth.saturating_sub(1);
            continue;
        }
        if template_depth > 0 {
            continue;
        }
        text.push(c);
    }

    let mut out = String::with_capacity(text.len());
    let mut rest = text.as_str();
    // Strip <ref>...</ref> and self-closing ref tags.
    while let Some(start) = rest.find("<ref") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        if let Some(close) = tail.find("/>") {
            rest = &tail[close + 2..];
        } else if let Some(close) = tail.find("</ref>") {
            rest = &tail[close + 6..];
        } else {
            rest = "";
        }
    }
    out.push_str(rest);

    let mut result = String::with_capacity(out.len());
    let mut line_out: Vec<String> = Vec::new();
    for line in out.lines() {
        let mut line = line.trim().to_string();
        if line.starts_with("==") {
            // Section heading: keep the title as its own paragraph break.
            line = line.trim_matches(|c| c == '=' || c == ' ').to_string();
            if !line.is_empty() {
                line_out.push(String::new());
                line_out.push(format!("{line}."));
                line_out.push(String::new());
            }
            continue;
        }
        line = resolve_links(&line);
        line = line.replace("'''", "").replace("''", "");
        line_out.push(line);
    }
    for line in line_out {
        result.push_str(&line);
        result.push('\n');
    }
    result.trim().to_string()
}

fn resolve_links(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    while let Some(start) = rest.find("[[") {
        out.push_str(&rest[..start]);
        rest = &rest[start + 2..];
        let Some(end) = rest.find("]]") else {
            break;
        };
        let inner = &rest[..end];
        rest = &rest[end + 2..];
        if inner.split('|').next().unwrap_or_default().contains(':') {
            continue; // file/category link: drop entirely
        }
        let label = inner.rsplit('|').next().unwrap_or_default();
        out.push_str(label.split('#').next().unwrap_or(label));
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    const SAMPLE: &str = "{{Infobox|name=ML}}'''Machine learning''' is a field of \
        [[artificial intelligence|AI]].<ref>cite</ref>\n\n\
        == Approaches ==\n\
        It includes [[Supervised learning]] and [[File:Diagram.png|thumb]] methods \
        described in [[Hyperparameter optimization#Grid search|grid search]].";

    #[test]
    fn link_extraction_keeps_order_and_skips_namespaces() {
        assert_eq!(
            extract_links(SAMPLE),
            vec![
                "artificial intelligence".to_string(),
                "Supervised learning".to_string(),
                "Hyperparameter optimization".to_string(),
            ]
        );
    }

    #[test]
    fn strip_produces_readable_text() {
        let text = strip_wikitext(SAMPLE);
        assert!(
            text.starts_with("Machine learning is a field of AI."),
            "{text}"
        );
        assert!(text.contains("Approaches."));
        assert!(text.contains("Supervised learning and  methods"), "{text}");
        assert!(!text.contains("{{"));
        assert!(!text.contains("<ref>"));
        assert!(!text.contains("[["));
    }

    struct CannedGet {
        responses: Mutex<Vec<(u16, String)>>,
        pub urls: Mutex<Vec<String>>,
    }

    impl HttpGet for CannedGet {
        fn get_json(&self, url: &str) -> Result<(u16, String), String> {
            self.urls.lock().unwrap().push(url.to_string());
            let mut responses = self.responses.lock().unwrap();
            if responses.is_empty() {
                return Err("exhausted".to_string());
            }
            Ok(responses.remove(0))
        }
    }

    #[test]
    fn search_and_fetch_speak_rest_endpoints() {
        let transport = Arc::new(CannedGet {
            responses: Mutex::new(vec![
                (
                    200,
                    r#"{"pages":[{"id":12,"title":"Machine learning","description":"Study of algorithms"}]}"#
                        .to_string(),
                ),
                (
                    200,
                    r#"{"title":"Machine learning","source":"'''Machine learning''' links [[Statistics]]."}"#
                        .to_string(),
                ),
                (404, "{}".to_string()),
            ]),
            urls: Mutex::new(Vec::new()),
        });
        let source = WikiRestSource::new(transport.clone(), "https://wiki.test/");

        let hits = source.search("machine learning").unwrap();
        assert_eq!(hits[0].title, "Machine learning");
        assert_eq!(hits[0].article_id, "12");

        let article = source.fetch("Machine learning").unwrap();
        assert_eq!(article.link_titles, vec!["Statistics".to_string()]);
        assert!(article.text.contains("Machine learning links Statistics."));

        assert!(matches!(
            source.fetch("Missing page").unwrap_err(),
            SourceError::NotFound { .. }
        ));

        let urls = transport.urls.lock().unwrap();
        assert_eq!(
            urls[0],
            "https://wiki.test/w/rest.php/v1/search/page?q=machine%20learning&limit=5"
        );
        assert_eq!(
            urls[1],
            "https://wiki.test/w/rest.php/v1/page/Machine%20learning"
        );
    }
}
