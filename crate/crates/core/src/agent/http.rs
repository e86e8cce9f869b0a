//! OpenAI-compatible chat-completion and image endpoints over HTTPS.
//!
//! The API key is read from the configured environment variable and only ever
//! sent as the `Authorization` header to `base_url`.

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatProvider, ChatRequest, ProviderConfig, ProviderError};

pub struct HttpProvider {
    client: Client,
    base_url: String,
    model: String,
    image_model: String,
    api_key: String,
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Serialize)]
struct ImageBody<'a> {
    model: &'a str,
    prompt: &'a str,
    n: u32,
}

#[derive(Deserialize)]
struct ImageResponse {
    data: Vec<ImageDatum>,
}

#[derive(Deserialize)]
struct ImageDatum {
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    b64_json: Option<String>,
}

fn classify(e: reqwest::Error) -> ProviderError {
    if e.is_timeout() {
        ProviderError::Timeout
    } else {
        // strip the URL so nothing request-specific leaks into logs
        ProviderError::Transport(e.without_url().to_string())
    }
}

impl HttpProvider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self, ProviderError> {
        let api_key =
            std::env::var(&cfg.api_key_env).map_err(|_| ProviderError::MissingApiKey(cfg.api_key_env.clone()))?;
        Self::with_key(cfg, api_key)
    }

    pub fn with_key(cfg: &ProviderConfig, api_key: String) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let client = Client::builder()
            .timeout(cfg.timeout())
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(HttpProvider {
            client,
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            model: cfg.model.clone(),
            image_model: cfg.image_model.clone(),
            api_key,
        })
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, path: &str, body: &B) -> Result<R, ProviderError> {
        let resp = self
            .client
            .post(format!("{}/{path}", self.base_url))
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(classify)?;
        let status = resp.status();
        if !status.is_success() {
            let body: String = resp.text().unwrap_or_default().chars().take(500).collect();
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body,
            });
        }
        resp.json::<R>().map_err(|e| ProviderError::BadResponse(e.without_url().to_string()))
    }
}

impl ChatProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = CompletionBody {
            model: &self.model,
            messages: &request.messages,
            temperature: request.temperature,
        };
        let resp: CompletionResponse = self.post("chat/completions", &body)?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ProviderError::BadResponse("response has no first choice content".into()))
    }

    fn generate_image(&self, prompt: &str) -> Result<String, ProviderError> {
        let body = ImageBody {
            model: &self.image_model,
            prompt,
            n: 1,
        };
        let resp: ImageResponse = self.post("images/generations", &body)?;
        let datum = resp
            .data
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::BadResponse("image response has no data".into()))?;
        match (datum.url, datum.b64_json) {
            (Some(url), _) => Ok(url),
            (None, Some(b64)) => Ok(format!("data:image/png;base64,{b64}")),
            (None, None) => Err(ProviderError::BadResponse("image datum has neither url nor b64_json".into())),
        }
    }
}
