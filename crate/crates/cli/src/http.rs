//! JSON over HTTP. Every handler runs the synchronous core on the blocking
//! pool; errors are `{"error": "..."}` bodies without internal detail.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Utc};
use serde::Deserialize;
use serde_json::json;
use topicrag::evalstore::{
    funnel_report, query_records, usage_stats, EvalError, KeyTerm, Period, VerdictPatch,
};
use topicrag::pipeline::{read_log, AskRequest, FeedbackEvent, LogLine, Outcome, PipelineError, Rating};

use crate::app::App;

pub const ADMIN_HEADER: &str = "x-admin-token";

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn internal(detail: impl std::fmt::Display) -> Self {
        log::error!("internal error: {detail}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    // The rejection text can quote the body, which may hold unscreened input.
    fn from(r: JsonRejection) -> Self {
        let message = match r {
            JsonRejection::JsonDataError(_) => "request body does not match the expected schema",
            JsonRejection::JsonSyntaxError(_) => "request body is not valid JSON",
            JsonRejection::MissingJsonContentType(_) => "expected Content-Type: application/json",
            _ => "unreadable request body",
        };
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<QueryRejection> for ApiError {
    fn from(_: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid query string")
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let status = match &e {
            EvalError::UnknownRecord(_) | EvalError::EmptyPeriod => StatusCode::NOT_FOUND,
            EvalError::BadFilter(_) => StatusCode::BAD_REQUEST,
            EvalError::WorkflowViolation(_) | EvalError::BadKeyTerm { .. } | EvalError::NothingToExport(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            EvalError::DuplicateRecordId(_) | EvalError::NotIngestible(_) => StatusCode::CONFLICT,
            EvalError::Corrupt { .. } | EvalError::Io(_) => return ApiError::internal(e),
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

fn presented_token(headers: &HeaderMap) -> Option<&str> {
    if let Some(v) = headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok()) {
        return Some(v.trim());
    }
    headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
}

/// 403 when no admin token is configured, 401 when it is missing or wrong.
fn require_admin(app: &App, headers: &HeaderMap) -> ApiResult<()> {
    let Some(expected) = app.config.admin_token.as_deref().filter(|t| !t.is_empty()) else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "admin endpoints are disabled"));
    };
    match presented_token(headers) {
        Some(t) if t == expected => Ok(()),
        _ => Err(ApiError::new(StatusCode::UNAUTHORIZED, "admin token required")),
    }
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/ask", post(ask))
        .route("/feedback", post(feedback))
        .route("/eval/records", get(list_records))
        .route("/eval/records/{id}/annotate", post(annotate))
        .route("/eval/funnel", get(funnel))
        .route("/eval/stats", get(stats))
        .route("/admin/reload", post(reload))
        .route("/admin/curate/{id}", post(curate))
        .route("/health", get(health))
        .with_state(app)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskBody {
    text: String,
    #[serde(default)]
    locale: Option<String>,
}

#[derive(Deserialize, Default)]
struct AskQuery {
    #[serde(default)]
    debug: Option<String>,
}

async fn ask(
    State(app): State<Arc<App>>,
    headers: HeaderMap,
    query: Result<Query<AskQuery>, QueryRejection>,
    body: Result<Json<AskBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Query(query) = query?;
    let Json(body) = body?;
    let debug = matches!(query.debug.as_deref(), Some("1" | "true")) && require_admin(&app, &headers).is_ok();
    let mut req = AskRequest::new(body.text);
    if let Some(loc) = body.locale.filter(|l| !l.trim().is_empty()) {
        req = req.with_locale(loc);
    }
    let pipeline = Arc::clone(&app.pipeline);
    let mut resp = blocking(move || pipeline.answer_question(&req)).await?;
    if !debug {
        resp.trace.clear();
    }
    let status = if resp.outcome == Outcome::Rejected {
        StatusCode::UNPROCESSABLE_ENTITY
    } else {
        StatusCode::OK
    };
    Ok((status, Json(resp)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackBody {
    request_id: String,
    rating: Rating,
    #[serde(default)]
    at: Option<DateTime<Utc>>,
}

async fn feedback(
    State(app): State<Arc<App>>,
    body: Result<Json<FeedbackBody>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(body) = body?;
    let event = FeedbackEvent {
        request_id: body.request_id,
        rating: body.rating,
        at: body.at.unwrap_or_else(Utc::now),
    };
    let pipeline = Arc::clone(&app.pipeline);
    match blocking(move || pipeline.record_feedback(&event)).await? {
        Ok(ack) => Ok(Json(json!({ "request_id": ack.request_id, "orphan": ack.orphan }))),
        Err(e @ PipelineError::UnknownRequestId(_)) => Err(ApiError::new(StatusCode::NOT_FOUND, e.to_string())),
        Err(e) => Err(ApiError::internal(e)),
    }
}

#[derive(Deserialize, Default)]
struct RecordsQuery {
    #[serde(default)]
    filter: Option<String>,
}

async fn list_records(
    State(app): State<Arc<App>>,
    query: Result<Query<RecordsQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(query) = query?;
    let expr = query.filter.unwrap_or_default();
    let store = Arc::clone(&app.store);
    let records = blocking(move || {
        let store = store.lock().unwrap_or_else(|p| p.into_inner());
        query_records(store.records(), &expr)
    })
    .await??;
    Ok(Json(json!({ "count": records.len(), "records": records })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotateBody {
    #[serde(default)]
    verdicts: VerdictPatch,
    #[serde(default)]
    key_terms: Vec<KeyTerm>,
    #[serde(default)]
    tags: Vec<String>,
    annotator: String,
}

async fn annotate(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Result<Json<AnnotateBody>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(body) = body?;
    if body.annotator.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "annotator is required"));
    }
    let store = Arc::clone(&app.store);
    let record = blocking(move || {
        let mut store = store.lock().unwrap_or_else(|p| p.into_inner());
        store.annotate(&id, body.verdicts, body.key_terms, body.tags, &body.annotator)
    })
    .await??;
    Ok(Json(serde_json::to_value(record).map_err(ApiError::internal)?))
}

/// RFC 3339, or a bare date meaning midnight UTC.
pub fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    Some(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0)?))
}

#[derive(Deserialize, Default)]
struct PeriodQuery {
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    bucket: Option<String>,
}

impl PeriodQuery {
    fn period(&self) -> ApiResult<Period> {
        let bound = |v: &Option<String>, name: &str| -> ApiResult<Option<DateTime<Utc>>> {
            match v.as_deref().filter(|s| !s.is_empty()) {
                None => Ok(None),
                Some(s) => parse_time(s)
                    .map(Some)
                    .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("bad {name} time"))),
            }
        };
        let period = Period {
            from: bound(&self.from, "from")?,
            to: bound(&self.to, "to")?,
        };
        if let (Some(f), Some(t)) = (period.from, period.to) {
            if f >= t {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "from must be before to"));
            }
        }
        Ok(period)
    }
}

async fn funnel(
    State(app): State<Arc<App>>,
    query: Result<Query<PeriodQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(query) = query?;
    let period = query.period()?;
    let store = Arc::clone(&app.store);
    let report = blocking(move || {
        let store = store.lock().unwrap_or_else(|p| p.into_inner());
        funnel_report(store.records(), period)
    })
    .await??;
    Ok(Json(serde_json::to_value(report).map_err(ApiError::internal)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    Month,
    Week,
}

impl std::str::FromStr for Bucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "month" => Ok(Bucket::Month),
            "week" => Ok(Bucket::Week),
            _ => Err(format!("unknown bucket {s:?}; expected month or week")),
        }
    }
}

fn month_start(t: DateTime<Utc>) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(t.year(), t.month(), 1, 0, 0, 0).single().expect("first of month exists")
}

fn next_month(t: DateTime<Utc>) -> DateTime<Utc> {
    let (y, m) = if t.month() == 12 { (t.year() + 1, 1) } else { (t.year(), t.month() + 1) };
    Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0).single().expect("first of month exists")
}

fn week_start(t: DateTime<Utc>) -> DateTime<Utc> {
    let day = t.date_naive() - Duration::days(t.weekday().num_days_from_monday() as i64);
    Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).expect("midnight exists"))
}

/// Calendar buckets (months, or weeks starting Monday) covering
/// `[first, last]`.
pub fn calendar_buckets(first: DateTime<Utc>, last: DateTime<Utc>, bucket: Bucket) -> Vec<Period> {
    let mut out = Vec::new();
    let mut start = match bucket {
        Bucket::Month => month_start(first),
        Bucket::Week => week_start(first),
    };
    while start <= last {
        let end = match bucket {
            Bucket::Month => next_month(start),
            Bucket::Week => start + Duration::days(7),
        };
        out.push(Period::between(start, end));
        start = end;
    }
    out
}

fn line_time(l: &LogLine) -> DateTime<Utc> {
    match l {
        LogLine::Response(r) => r.ts,
        LogLine::Feedback(f) => f.at,
    }
}

/// Usage statistics over the response log, restricted to `period` and
/// bucketed by calendar month or week.
pub fn log_stats(lines: Vec<LogLine>, period: Period, bucket: Bucket) -> topicrag::evalstore::UsageStats {
    let lines: Vec<LogLine> = lines.into_iter().filter(|l| period.contains(line_time(l))).collect();
    let times = lines.iter().map(line_time);
    let buckets = match (times.clone().min(), times.max()) {
        (Some(first), Some(last)) => calendar_buckets(first, last, bucket),
        _ => Vec::new(),
    };
    usage_stats(&lines, &buckets)
}

async fn stats(
    State(app): State<Arc<App>>,
    query: Result<Query<PeriodQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(query) = query?;
    let period = query.period()?;
    let bucket: Bucket = query
        .bucket
        .as_deref()
        .unwrap_or("month")
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    let Some(path) = app.response_log().cloned() else {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "no response log configured"));
    };
    let stats = blocking(move || -> std::io::Result<_> {
        let lines = if path.exists() { read_log(&path)? } else { Vec::new() };
        Ok(log_stats(lines, period, bucket))
    })
    .await?
    .map_err(ApiError::internal)?;
    Ok(Json(serde_json::to_value(stats).map_err(ApiError::internal)?))
}

async fn reload(State(app): State<Arc<App>>, headers: HeaderMap) -> ApiResult<Json<serde_json::Value>> {
    require_admin(&app, &headers)?;
    let a = Arc::clone(&app);
    match blocking(move || a.reload()).await? {
        Ok(topics) => Ok(Json(json!({ "reloaded": true, "topics": topics }))),
        Err(e) => {
            // The previous snapshot stays in service.
            log::error!("reload failed: {e:#}");
            Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "reload failed; previous corpus kept"))
        }
    }
}

async fn curate(
    State(app): State<Arc<App>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<serde_json::Value>> {
    require_admin(&app, &headers)?;
    let a = Arc::clone(&app);
    let result = blocking(move || {
        let record = a.store.lock().unwrap_or_else(|p| p.into_inner()).get(&id).cloned();
        record.map(|r| a.pipeline.curate(&r)).ok_or(id)
    })
    .await?;
    match result {
        Err(id) => Err(ApiError::from(EvalError::UnknownRecord(id))),
        Ok(Ok(entry)) => Ok(Json(serde_json::to_value(entry).map_err(ApiError::internal)?)),
        Ok(Err(PipelineError::Faq(topicrag::faq::FaqError::Io(e)))) => Err(ApiError::internal(e)),
        Ok(Err(e)) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string())),
    }
}

async fn health(State(app): State<Arc<App>>) -> Json<serde_json::Value> {
    let snap = app.pipeline.snapshot();
    Json(json!({
        "status": "ok",
        "topics": snap.corpus.len(),
        "faq_entries": snap.faq.len(),
        "generators": app.pipeline.generator_ids(),
    }))
}

/// Bind and serve until Ctrl-C.
pub async fn serve(app: Arc<App>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(&app.config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> DateTime<Utc> {
        parse_time(s).unwrap()
    }

    #[test]
    fn times_accept_dates_and_rfc3339() {
        assert_eq!(t("2024-03-01"), t("2024-03-01T00:00:00Z"));
        assert_eq!(t("2024-03-01T02:00:00+02:00"), t("2024-03-01"));
        assert!(parse_time("March 1").is_none());
    }

    #[test]
    fn month_buckets_cover_the_range() {
        let b = calendar_buckets(t("2023-11-15"), t("2024-01-02"), Bucket::Month);
        let starts: Vec<_> = b.iter().map(|p| p.from.unwrap()).collect();
        assert_eq!(starts, vec![t("2023-11-01"), t("2023-12-01"), t("2024-01-01")]);
        assert_eq!(b[2].to, Some(t("2024-02-01")));
    }

    #[test]
    fn week_buckets_start_on_monday() {
        // 2024-03-06 is a Wednesday.
        let b = calendar_buckets(t("2024-03-06"), t("2024-03-11"), Bucket::Week);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].from, Some(t("2024-03-04")));
        assert_eq!(b[1].from, Some(t("2024-03-11")));
    }
}
