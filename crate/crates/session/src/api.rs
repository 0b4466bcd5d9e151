//! JSON-over-HTTP session service.
//!
//! | method | path                     | body                 |
//! |--------|--------------------------|----------------------|
//! | POST   | `/sessions`              | instruction          |
//! | GET    | `/sessions/{id}`         | –                    |
//! | PUT    | `/sessions/{id}/points`  | `{points, mask?}`    |
//! | POST   | `/sessions/{id}/step`    | –                    |
//! | POST   | `/sessions/{id}/reset`   | –                    |
//! | DELETE | `/sessions/{id}`         | –                    |

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use freedrag_core::instruction::{PointPair, RleMask};
use freedrag_core::Instruction;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::SessionError;
use crate::worker::Registry;

pub const PORT_ENV: &str = "FREEDRAG_PORT";
pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetPointsRequest {
    pub points: Vec<PointPair>,
    #[serde(default)]
    pub mask: Option<RleMask>,
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let (code, body) = match &self {
            SessionError::NotFound(_) => {
                (StatusCode::NOT_FOUND, json!({ "error": self.to_string() }))
            }
            SessionError::BadRequest(_) => (
                StatusCode::BAD_REQUEST,
                json!({ "error": self.to_string() }),
            ),
            SessionError::Finished(status) => (
                StatusCode::CONFLICT,
                json!({ "error": self.to_string(), "status": status }),
            ),
            _ => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "error": self.to_string() }),
            ),
        };
        (code, Json(body)).into_response()
    }
}

/// Parses a JSON body, answering 400 on any malformation.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, SessionError> {
    serde_json::from_slice(body).map_err(|e| SessionError::BadRequest(e.to_string()))
}

async fn create(State(reg): State<Registry>, body: Bytes) -> Result<Response, SessionError> {
    let inst: Instruction = parse(&body)?;
    let reg2 = reg.clone();
    let (_, handle) = tokio::task::spawn_blocking(move || reg2.create(inst))
        .await
        .map_err(|_| SessionError::WorkerGone)??;
    Ok((StatusCode::CREATED, Json(handle.summary().await?)).into_response())
}

async fn snapshot(
    State(reg): State<Registry>,
    Path(id): Path<String>,
) -> Result<Response, SessionError> {
    Ok(Json(reg.get(&id)?.snapshot().await?).into_response())
}

async fn set_points(
    State(reg): State<Registry>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, SessionError> {
    let handle = reg.get(&id)?;
    let req: SetPointsRequest = parse(&body)?;
    Ok(Json(handle.set_points(req.points, req.mask).await?).into_response())
}

async fn step(
    State(reg): State<Registry>,
    Path(id): Path<String>,
) -> Result<Response, SessionError> {
    Ok(Json(reg.get(&id)?.step().await?).into_response())
}

async fn reset(
    State(reg): State<Registry>,
    Path(id): Path<String>,
) -> Result<Response, SessionError> {
    Ok(Json(reg.get(&id)?.reset().await?).into_response())
}

async fn delete(
    State(reg): State<Registry>,
    Path(id): Path<String>,
) -> Result<StatusCode, SessionError> {
    reg.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(reg: Registry) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(snapshot).delete(delete))
        .route("/sessions/{id}/points", put(set_points))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/reset", post(reset))
        .with_state(reg)
}

/// Port from `FREEDRAG_PORT`, else the default.
pub fn port_from_env() -> Result<u16, SessionError> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v
            .parse()
            .map_err(|_| SessionError::BadRequest(format!("{PORT_ENV}={v} is not a port number"))),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

pub async fn serve(reg: Registry, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(reg)).await
}
