//! Blocking HTTP transport for [`LogApi`].

use std::time::Duration;

use larch_core::api::*;
use reqwest::blocking::{Client, RequestBuilder, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub struct HttpTransport {
    base: String,
    http: Client,
}

fn transport(e: reqwest::Error) -> ApiError {
    ApiError::Transport(e.to_string())
}

impl HttpTransport {
    pub fn new(base_url: &str) -> Result<HttpTransport, ApiError> {
        let http = Client::builder().timeout(Duration::from_secs(600)).build().map_err(transport)?;
        Ok(HttpTransport { base: base_url.trim_end_matches('/').to_string(), http })
    }

    fn request(&self, method: reqwest::Method, path: &str, c: Option<&Credentials>) -> RequestBuilder {
        let rb = self.http.request(method, format!("{}{path}", self.base));
        match c {
            Some(c) => rb.bearer_auth(c.bearer()),
            None => rb,
        }
    }

    fn finish(resp: Response) -> Result<Response, ApiError> {
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status();
        let body = resp.bytes().map_err(transport)?;
        Err(serde_json::from_slice::<ApiError>(&body)
            .unwrap_or_else(|_| ApiError::Transport(format!("HTTP {status}: {}", String::from_utf8_lossy(&body)))))
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        c: Option<&Credentials>,
        req: &Req,
    ) -> Result<Resp, ApiError> {
        let resp = self.request(reqwest::Method::POST, path, c).json(req).send().map_err(transport)?;
        Self::finish(resp)?.json().map_err(transport)
    }
}

impl LogApi for HttpTransport {
    fn enroll(&self, req: &EnrollRequest) -> Result<EnrollResponse, ApiError> {
        self.post("/enroll", None, req)
    }
    fn fido2_presign(&self, c: &Credentials, req: &PresignUpload) -> Result<BatchInfo, ApiError> {
        self.post("/fido2/presign", Some(c), req)
    }
    fn fido2_object(&self, c: &Credentials, req: &ObjectRequest) -> Result<BatchInfo, ApiError> {
        self.post("/fido2/presign/object", Some(c), req)
    }
    fn fido2_auth(&self, c: &Credentials, req: &Fido2AuthRequest) -> Result<Fido2AuthResponse, ApiError> {
        self.post("/fido2/auth", Some(c), req)
    }
    fn fido2_auth_mac(&self, c: &Credentials, req: &Fido2MacRequest) -> Result<Fido2MacResponse, ApiError> {
        self.post("/fido2/auth/mac", Some(c), req)
    }
    fn fido2_auth_check(&self, c: &Credentials, req: &Fido2CheckRequest) -> Result<Fido2CheckResponse, ApiError> {
        self.post("/fido2/auth/check", Some(c), req)
    }
    fn totp_register(&self, c: &Credentials, req: &TotpRegisterRequest) -> Result<TotpListInfo, ApiError> {
        self.post("/totp/register", Some(c), req)
    }
    fn totp_unregister(&self, c: &Credentials, req: &TotpUnregisterRequest) -> Result<TotpListInfo, ApiError> {
        self.post("/totp/unregister", Some(c), req)
    }
    fn totp_session(&self, c: &Credentials, step: TotpStep, frames: &[u8]) -> Result<Vec<u8>, ApiError> {
        let resp = self
            .request(reqwest::Method::POST, step.path(), Some(c))
            .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
            .body(frames.to_vec())
            .send()
            .map_err(transport)?;
        Ok(Self::finish(resp)?.bytes().map_err(transport)?.to_vec())
    }
    fn pw_register(&self, c: &Credentials, req: &PwRegisterRequest) -> Result<PwRegisterResponse, ApiError> {
        self.post("/pw/register", Some(c), req)
    }
    fn pw_list(&self, c: &Credentials) -> Result<PwListResponse, ApiError> {
        let resp = self.request(reqwest::Method::GET, "/pw/list", Some(c)).send().map_err(transport)?;
        Self::finish(resp)?.json().map_err(transport)
    }
    fn pw_auth(&self, c: &Credentials, req: &PwAuthRequest) -> Result<PwAuthResponse, ApiError> {
        self.post("/pw/auth", Some(c), req)
    }
    fn audit(&self, c: &Credentials, req: &AuditRequest) -> Result<AuditResponse, ApiError> {
        self.post("/audit", Some(c), req)
    }
}
