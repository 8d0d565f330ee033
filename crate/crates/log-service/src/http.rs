//! HTTP/1.1 front end. Unary endpoints take and return JSON; the TOTP
//! session endpoints carry encoded session frames as
//! `application/octet-stream`. Errors are JSON [`ApiError`] bodies.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, DefaultBodyLimit, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use larch_core::api::{ApiError, Credentials, TotpStep};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::service::LogService;

/// Bodies carry FIDO2 proofs of about 1.5 MB at the production profile.
const BODY_LIMIT: usize = 64 << 20;

type Svc = Arc<LogService>;

fn error_response(e: ApiError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(e)).into_response()
}

fn credentials(headers: &HeaderMap) -> Result<Credentials, ApiError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .and_then(Credentials::from_bearer)
        .ok_or(ApiError::Unauthorized)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Storage(format!("worker failed: {e}")))?
}

/// Authenticated JSON endpoint.
async fn json_call<Req, Resp>(
    svc: Svc,
    headers: HeaderMap,
    addr: SocketAddr,
    body: Bytes,
    f: fn(&LogService, &Credentials, &str, &Req) -> Result<Resp, ApiError>,
) -> Response
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    let run = async {
        let c = credentials(&headers)?;
        let req: Req = serde_json::from_slice(&body).map_err(|e| ApiError::bad(format!("malformed body: {e}")))?;
        let ip = addr.ip().to_string();
        blocking(move || f(&svc, &c, &ip, &req)).await
    };
    respond(run).await
}

async fn respond<Resp: Serialize>(fut: impl Future<Output = Result<Resp, ApiError>>) -> Response {
    match fut.await {
        Ok(r) => Json(r).into_response(),
        Err(e) => error_response(e),
    }
}

async fn enroll(State(svc): State<Svc>, body: Bytes) -> Response {
    respond(async {
        let req = serde_json::from_slice(&body).map_err(|e| ApiError::bad(format!("malformed body: {e}")))?;
        blocking(move || svc.enroll(&req)).await
    })
    .await
}

macro_rules! json_endpoint {
    ($name:ident, $req:ty, |$s:ident, $c:ident, $ip:ident, $r:ident| $body:expr) => {
        async fn $name(
            State(svc): State<Svc>,
            ConnectInfo(addr): ConnectInfo<SocketAddr>,
            headers: HeaderMap,
            body: Bytes,
        ) -> Response {
            #[allow(unused_variables)]
            fn call($s: &LogService, $c: &Credentials, $ip: &str, $r: &$req) -> Result<impl Serialize + Send + 'static, ApiError> {
                $body
            }
            json_call(svc, headers, addr, body, call).await
        }
    };
}

json_endpoint!(presign, larch_core::api::PresignUpload, |s, c, ip, r| s.fido2_presign(c, r));
json_endpoint!(object, larch_core::api::ObjectRequest, |s, c, ip, r| s.fido2_object(c, r));
json_endpoint!(fido2_auth, larch_core::api::Fido2AuthRequest, |s, c, ip, r| s.fido2_auth(c, ip, r));
json_endpoint!(fido2_mac, larch_core::api::Fido2MacRequest, |s, c, ip, r| s.fido2_auth_mac(c, r));
json_endpoint!(fido2_check, larch_core::api::Fido2CheckRequest, |s, c, ip, r| s.fido2_auth_check(c, r));
json_endpoint!(totp_register, larch_core::api::TotpRegisterRequest, |s, c, ip, r| s.totp_register(c, r));
json_endpoint!(totp_unregister, larch_core::api::TotpUnregisterRequest, |s, c, ip, r| s.totp_unregister(c, r));
json_endpoint!(pw_register, larch_core::api::PwRegisterRequest, |s, c, ip, r| s.pw_register(c, r));
json_endpoint!(pw_auth, larch_core::api::PwAuthRequest, |s, c, ip, r| s.pw_auth(c, ip, r));
json_endpoint!(audit, larch_core::api::AuditRequest, |s, c, ip, r| s.audit(c, r));

async fn pw_list(State(svc): State<Svc>, headers: HeaderMap) -> Response {
    respond(async {
        let c = credentials(&headers)?;
        blocking(move || svc.pw_list(&c)).await
    })
    .await
}

async fn totp_step(svc: Svc, step: TotpStep, addr: SocketAddr, headers: HeaderMap, body: Bytes) -> Response {
    let run = async {
        let c = credentials(&headers)?;
        let ip = addr.ip().to_string();
        blocking(move || svc.totp_session(&c, &ip, step, &body)).await
    };
    match run.await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        Err(e) => error_response(e),
    }
}

async fn totp_open(State(svc): State<Svc>, ConnectInfo(addr): ConnectInfo<SocketAddr>, h: HeaderMap, b: Bytes) -> Response {
    totp_step(svc, TotpStep::Open, addr, h, b).await
}

async fn totp_ot(State(svc): State<Svc>, ConnectInfo(addr): ConnectInfo<SocketAddr>, h: HeaderMap, b: Bytes) -> Response {
    totp_step(svc, TotpStep::Ot, addr, h, b).await
}

async fn totp_finish(State(svc): State<Svc>, ConnectInfo(addr): ConnectInfo<SocketAddr>, h: HeaderMap, b: Bytes) -> Response {
    totp_step(svc, TotpStep::Finish, addr, h, b).await
}

async fn not_found() -> Response {
    error_response(ApiError::NotFound("no such endpoint".into()))
}

pub fn router(svc: Svc) -> Router {
    Router::new()
        .route("/enroll", post(enroll))
        .route("/fido2/presign", post(presign))
        .route("/fido2/presign/object", post(object))
        .route("/fido2/auth", post(fido2_auth))
        .route("/fido2/auth/mac", post(fido2_mac))
        .route("/fido2/auth/check", post(fido2_check))
        .route("/totp/register", post(totp_register))
        .route("/totp/unregister", post(totp_unregister))
        .route(TotpStep::Open.path(), post(totp_open))
        .route(TotpStep::Ot.path(), post(totp_ot))
        .route(TotpStep::Finish.path(), post(totp_finish))
        .route("/pw/register", post(pw_register))
        .route("/pw/list", get(pw_list))
        .route("/pw/auth", post(pw_auth))
        .route("/audit", post(audit))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(svc)
}

pub async fn serve(listener: TcpListener, svc: Svc, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
    axum::serve(listener, router(svc).into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server on its own runtime thread; stops when dropped.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<io::Result<()>>>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn(svc: Svc, bind: SocketAddr) -> io::Result<ServerHandle> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let listener = rt.block_on(TcpListener::bind(bind))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel();
    let thread = std::thread::spawn(move || {
        rt.block_on(serve(listener, svc, async {
            let _ = rx.await;
        }))
    });
    Ok(ServerHandle { addr, stop: Some(tx), thread: Some(thread) })
}
