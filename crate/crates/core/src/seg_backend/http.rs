//! Remote inference over HTTP.
//!
//! `POST {endpoint}/segment` with the RGBA view as an `image/png` body; a 200
//! response carries an 8-bit single-channel PNG of the same size whose values
//! are class ids or 255. Connection failures, 5xx and 429 are retried with
//! exponential backoff; anything else fails immediately.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use crate::asset_io::{decode_label_png, encode_rgba_png, TextureImage};

use super::{validate_labels, LabelMap, SegError, SegmentationBackend};

const MAX_RESPONSE_BYTES: u64 = 256 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles for each further one.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpOutcome {
    pub labels: LabelMap,
    pub retry_count: u32,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Transient(String),
    Fatal(SegError),
}

pub struct HttpBackend {
    url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    in_flight: Semaphore,
    retries: AtomicUsize,
    /// Set once a request has exhausted its retries; later views fail fast.
    down: AtomicBool,
}

impl HttpBackend {
    pub fn new(endpoint: &str, retry: RetryPolicy, max_in_flight: usize) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpBackend {
            url: format!("{}/segment", endpoint.trim_end_matches('/')),
            agent: config.into(),
            retry,
            in_flight: Semaphore::new(max_in_flight),
            retries: AtomicUsize::new(0),
            down: AtomicBool::new(false),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// One request with retries; reports how many retries it took.
    pub fn http_segment(&self, image: &TextureImage) -> Result<HttpOutcome, SegError> {
        let body = encode_rgba_png(image);
        let _permit = self.in_flight.acquire();
        let mut retry = 0u32;
        loop {
            if self.down.load(Ordering::Relaxed) {
                return Err(SegError::BackendUnavailable(format!(
                    "{} gave up on an earlier request",
                    self.url
                )));
            }
            match self.attempt(&body, image) {
                Ok(labels) => {
                    return Ok(HttpOutcome {
                        labels,
                        retry_count: retry,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => {
                    if retry >= self.retry.max_retries {
                        self.down.store(true, Ordering::Relaxed);
                        return Err(SegError::BackendUnavailable(format!(
                            "{} failed after {} attempt(s): {msg}",
                            self.url,
                            retry + 1
                        )));
                    }
                    log::warn!("{}: {msg}; retrying", self.url);
                    std::thread::sleep(self.retry.delay(retry));
                    retry += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }

    fn attempt(&self, body: &[u8], image: &TextureImage) -> Result<LabelMap, Attempt> {
        let mut response = self
            .agent
            .post(&self.url)
            .header("Content-Type", "image/png")
            .send(body)
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let msg = format!("HTTP status {status}");
            return if status >= 500 || status == 429 {
                Err(Attempt::Transient(msg))
            } else {
                Err(Attempt::Fatal(SegError::Protocol(msg)))
            };
        }
        let content_type = response
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        let essence = content_type.split(';').next().unwrap_or("").trim();
        if !essence.eq_ignore_ascii_case("image/png") {
            return Err(Attempt::Fatal(SegError::Protocol(format!(
                "wrong content type `{content_type}`"
            ))));
        }
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| Attempt::Transient(e.to_string()))?;
        let (width, height, labels) = decode_label_png(&bytes)
            .map_err(|e| Attempt::Fatal(SegError::Protocol(e.to_string())))?;
        validate_labels(&labels, width, height, (image.width(), image.height())).map_err(|e| {
            match e {
                SegError::ShapeMismatch { expected, actual } => Attempt::Fatal(SegError::Protocol(
                    format!("wrong dimensions: got {actual:?}, expected {expected:?}"),
                )),
                other => Attempt::Fatal(other),
            }
        })?;
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }
}

impl SegmentationBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn segment_raw(&self, _view: usize, image: &TextureImage) -> Result<LabelMap, SegError> {
        self.http_segment(image).map(|o| o.labels)
    }

    fn retry_count(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(500));
        assert_eq!(p.delay(1), Duration::from_millis(1000));
        assert_eq!(p.delay(2), Duration::from_millis(2000));
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        // Port 9 on localhost is almost never served; connection is refused.
        let backend = HttpBackend::new(
            "http://127.0.0.1:9",
            RetryPolicy {
                max_retries: 1,
                base_delay: Duration::from_millis(1),
            },
            1,
        );
        let img = TextureImage::filled(2, 2, [0, 0, 0, 255]);
        assert!(matches!(
            backend.http_segment(&img),
            Err(SegError::BackendUnavailable(_))
        ));
        assert_eq!(backend.retry_count(), 1);
        // A second view does not retry against the dead endpoint.
        assert!(matches!(
            backend.http_segment(&img),
            Err(SegError::BackendUnavailable(_))
        ));
        assert_eq!(backend.retry_count(), 1);
    }
}
