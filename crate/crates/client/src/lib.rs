//! Typed HTTP client for the gait auto-encoder service.

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use gaitae_core::api::*;

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:7878";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request to {url} failed: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("server returned {status}: {}", body.error.message)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response from {url}: {message}")]
    Decode { url: String, message: String },
}

impl ClientError {
    /// Same shape the server uses for its own errors.
    pub fn to_body(&self) -> ErrorBody {
        match self {
            ClientError::Api { body, .. } => body.clone(),
            ClientError::Transport { .. } => ErrorBody::new("transport", self.to_string()),
            ClientError::Decode { .. } => ErrorBody::new("decode", self.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(url: String, resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        if !status.is_success() {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(body) => ClientError::Api { status, body },
                Err(_) => ClientError::Api {
                    status,
                    body: ErrorBody::new("http", String::from_utf8_lossy(&bytes).into_owned()),
                },
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode { url, message: e.to_string() })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(body)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        Self::decode(url, resp).await
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .get(&url)
            .send()
            .await
            .map_err(|source| ClientError::Transport { url: url.clone(), source })?;
        Self::decode(url, resp).await
    }

    pub async fn health(&self) -> Result<Health, ClientError> {
        self.get("/health").await
    }

    pub async fn synth(&self, req: &SynthRequest) -> Result<SynthResponse, ClientError> {
        self.post("/v1/synth", req).await
    }

    /// Trains three axis models; `with_logs` also returns per-batch losses.
    pub async fn train(&self, req: &TrainRequest, with_logs: bool) -> Result<TrainResponse, ClientError> {
        let path = if with_logs { "/v1/train?logs=true" } else { "/v1/train" };
        self.post(path, req).await
    }

    pub async fn create_bundle(&self, req: &BundleRequest) -> Result<BundleInfo, ClientError> {
        self.post("/v1/bundles", req).await
    }

    pub async fn bundle(&self, id: &str) -> Result<BundleInfo, ClientError> {
        self.get(&format!("/v1/bundles/{id}")).await
    }

    pub async fn score_with_bundle(&self, id: &str, req: &BundleScoreRequest) -> Result<ScoreResponse, ClientError> {
        self.post(&format!("/v1/bundles/{id}/score"), req).await
    }

    pub async fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, ClientError> {
        self.post("/v1/score", req).await
    }

    pub async fn eval(&self, req: &EvalRequest) -> Result<EvalResponse, ClientError> {
        self.post("/v1/eval", req).await
    }

    pub async fn filters(&self, req: &FiltersRequest) -> Result<FiltersResponse, ClientError> {
        self.post("/v1/filters", req).await
    }

    pub async fn experiment(&self, req: &ExperimentRequest) -> Result<ExperimentResponse, ClientError> {
        self.post("/v1/experiments", req).await
    }
}
