//! Blocking HTTP client for the inference service.

use std::time::{Duration, Instant};

use base64::Engine;
use edl_server::api::DatasetSummary;
use edl_server::{InferenceJob, JobStatus};
use reqwest::blocking::{Client, RequestBuilder, Response};
use serde::Deserialize;
use serde_json::json;

use crate::ClientError;

#[derive(Clone, Debug)]
pub struct ClientOptions {
    pub timeout: Duration,
    /// Extra attempts after a connection failure or a 503.
    pub retries: u32,
    pub retry_delay: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(300),
            retries: 2,
            retry_delay: Duration::from_millis(500),
        }
    }
}

/// A job as the server reports it, with the decoded result frame once done.
#[derive(Clone, Debug)]
pub struct JobView {
    pub job: InferenceJob,
    pub result: Option<Vec<u8>>,
}

#[derive(Deserialize)]
struct RawJob {
    #[serde(flatten)]
    job: InferenceJob,
    #[serde(default)]
    result: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, serde::Serialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub depth: usize,
    pub window_length: usize,
    pub feature_count: usize,
}

pub struct ApiClient {
    base: String,
    token: String,
    options: ClientOptions,
    http: Client,
}

impl ApiClient {
    pub fn new(base: &str, token: &str, options: ClientOptions) -> Result<Self, ClientError> {
        let http = Client::builder()
            .timeout(options.timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            base: base.trim_end_matches('/').to_string(),
            token: token.to_string(),
            options,
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn send(&self, build: impl Fn(&Client) -> RequestBuilder) -> Result<Response, ClientError> {
        let mut attempt = 0;
        loop {
            let outcome = build(&self.http).bearer_auth(&self.token).send();
            let retryable = match &outcome {
                Ok(r) => r.status() == reqwest::StatusCode::SERVICE_UNAVAILABLE,
                Err(e) => e.is_connect(),
            };
            if retryable && attempt < self.options.retries {
                attempt += 1;
                std::thread::sleep(self.options.retry_delay);
                continue;
            }
            let response = outcome.map_err(|e| ClientError::Transport(e.to_string()))?;
            if response.status().is_success() {
                return Ok(response);
            }
            let status = response.status().as_u16();
            let body = response.text().unwrap_or_default();
            return Err(ClientError::Http { status, body });
        }
    }

    fn json<T: serde::de::DeserializeOwned>(response: Response) -> Result<T, ClientError> {
        response.json().map_err(|e| ClientError::Transport(e.to_string()))
    }

    pub fn health(&self) -> Result<(), ClientError> {
        self.send(|c| c.get(self.url("/health"))).map(|_| ())
    }

    /// Uploads a transmission-form record frame; returns the dataset id.
    pub fn submit(&self, frame: &[u8]) -> Result<String, ClientError> {
        #[derive(Deserialize)]
        struct Created {
            dataset_id: String,
        }
        let response = self.send(|c| {
            c.post(self.url("/datasets"))
                .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
                .body(frame.to_vec())
        })?;
        Ok(Self::json::<Created>(response)?.dataset_id)
    }

    pub fn list(&self, owner: Option<&str>) -> Result<Vec<DatasetSummary>, ClientError> {
        let response = self.send(|c| {
            let req = c.get(self.url("/datasets"));
            match owner {
                Some(o) => req.query(&[("owner", o)]),
                None => req,
            }
        })?;
        Self::json(response)
    }

    pub fn models(&self) -> Result<Vec<ModelSummary>, ClientError> {
        Self::json(self.send(|c| c.get(self.url("/models")))?)
    }

    /// Starts an inference job; returns its id.
    pub fn infer(&self, dataset_id: &str, model_id: &str) -> Result<String, ClientError> {
        #[derive(Deserialize)]
        struct Accepted {
            job_id: String,
        }
        let body = json!({ "dataset_id": dataset_id, "model_id": model_id });
        let response = self.send(|c| c.post(self.url("/inferences")).json(&body))?;
        Ok(Self::json::<Accepted>(response)?.job_id)
    }

    pub fn fetch(&self, job_id: &str) -> Result<JobView, ClientError> {
        let raw: RawJob = Self::json(self.send(|c| c.get(self.url(&format!("/inferences/{job_id}"))))?)?;
        let result = raw
            .result
            .map(|b| base64::engine::general_purpose::STANDARD.decode(b))
            .transpose()
            .map_err(|e| ClientError::Transport(format!("bad result encoding: {e}")))?;
        Ok(JobView { job: raw.job, result })
    }

    /// Polls until the job is done or failed.
    pub fn wait(&self, job_id: &str, poll: Duration, deadline: Duration) -> Result<JobView, ClientError> {
        let start = Instant::now();
        loop {
            let view = self.fetch(job_id)?;
            match view.job.status {
                JobStatus::Done => return Ok(view),
                JobStatus::Failed => {
                    return Err(ClientError::JobFailed {
                        job_id: job_id.to_string(),
                        error: view.job.error.unwrap_or_default(),
                    })
                }
                JobStatus::Queued | JobStatus::Running => {}
            }
            if start.elapsed() >= deadline {
                return Err(ClientError::Timeout(job_id.to_string()));
            }
            std::thread::sleep(poll);
        }
    }
}
