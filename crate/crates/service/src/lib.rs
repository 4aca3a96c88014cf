//! HTTP service for interactive configuration sessions.
//!
//! A session configures a solution, waits for the user to rate it and
//! commits the ratings to the shared relevance store. All bodies are JSON;
//! failures answer `{"error": "..."}`.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | `/sessions` | `{"root"?, "task_class"?, "seed"?}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/rewards` | `{"rewards": {key: r}}`, `{"broadcast": r}` or `{"scripted": true}` |
//! | POST | `/sessions/{id}/restart` | |
//! | GET | `/relevance?class=&root=` | |
//! | POST | `/maintenance/sweep` | `{"threshold": x}` |
//! | POST | `/classes/{c}/split` | `{"into": [c1, c2]}` |

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use rkf::relevance::RelevanceError;
use rkf::reward::{broadcast, RewardError};
use rkf::{
    ConfigRequest, Configurator, DomainError, DomainSchema, ObjectKey, RelevanceStore, RewardMap, RewardMode, RewardScript,
    SearchError, Solution,
};
use serde::{Deserialize, Serialize};

/// Upper bound on complete combinations one configure call may test.
const SEARCH_LIMIT: u64 = 2_000_000;

pub struct ServiceConfig {
    pub schema: DomainSchema,
    /// Needed for `{"scripted": true}` ratings; its mode is reported to
    /// clients.
    pub rewards: Option<RewardScript>,
    pub store: RelevanceStore,
    /// Where the store is written after every change.
    pub store_path: Option<PathBuf>,
    pub default_class: String,
    /// Sessions untouched for this long are dropped without committing.
    pub idle_timeout: Duration,
}

impl ServiceConfig {
    pub fn new(schema: DomainSchema, store: RelevanceStore) -> Self {
        Self {
            schema,
            rewards: None,
            store,
            store_path: None,
            default_class: "default".into(),
            idle_timeout: Duration::from_secs(30 * 60),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    AwaitingRewards,
    Idle,
}

struct Session {
    task_class: String,
    root: String,
    seed: u64,
    /// Solutions configured so far; the next one uses `seed + attempts`.
    attempts: u64,
    solution: Solution,
    state: SessionState,
    last_touch: Instant,
}

struct Inner {
    schema: DomainSchema,
    rewards: Option<RewardScript>,
    store: RelevanceStore,
    store_path: Option<PathBuf>,
    default_class: String,
    idle_timeout: Duration,
    sessions: HashMap<String, Session>,
}

#[derive(Clone)]
pub struct AppState(Arc<Mutex<Inner>>);

impl AppState {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panicking handler leaves the data consistent: every mutation
        // validates before it writes
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Snapshot of the relevance store.
    pub fn store(&self) -> RelevanceStore {
        self.lock().store.clone()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<RelevanceError> for ApiError {
    fn from(e: RelevanceError) -> Self {
        let status = match e {
            RelevanceError::UnknownClass(_) | RelevanceError::MissingRecord { .. } => StatusCode::NOT_FOUND,
            RelevanceError::ClassExists(_) | RelevanceError::DuplicateObject { .. } => StatusCode::CONFLICT,
            RelevanceError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl From<DomainError> for ApiError {
    fn from(e: DomainError) -> Self {
        match e {
            DomainError::Unknown { .. } => Self::not_found(e.to_string()),
            _ => Self::unprocessable(e.to_string()),
        }
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Domain(d) => d.into(),
            SearchError::Relevance(r) => r.into(),
            SearchError::Unregistered { .. } => Self::new(StatusCode::CONFLICT, e.to_string()),
            SearchError::NoSolution { .. } | SearchError::LimitReached { .. } => Self::unprocessable(e.to_string()),
        }
    }
}

impl From<RewardError> for ApiError {
    fn from(e: RewardError) -> Self {
        Self::unprocessable(e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn parse<T: for<'de> Deserialize<'de> + Default>(body: &str) -> Result<T, ApiError> {
    if body.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(body).map_err(|e| ApiError::unprocessable(format!("bad request body: {e}")))
}

impl Inner {
    fn expire_idle(&mut self) {
        let timeout = self.idle_timeout;
        self.sessions.retain(|id, s| {
            let keep = s.last_touch.elapsed() < timeout;
            if !keep {
                log::info!("session {id} expired without commit");
            }
            keep
        });
    }

    fn session(&mut self, id: &str) -> Result<&mut Session, ApiError> {
        self.expire_idle();
        let s = self.sessions.get_mut(id).ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))?;
        s.last_touch = Instant::now();
        Ok(s)
    }

    /// Creates the class on first use and registers objects it lacks.
    fn ensure_class(&mut self, class: &str) -> Result<(), ApiError> {
        if !self.store.has_class(class) {
            self.store.add_class(class)?;
        }
        for key in self.schema.objects() {
            if !self.store.is_registered(&key, class) {
                self.store.register_object(key, class, None)?;
            }
        }
        Ok(())
    }

    fn configure(&self, root: &str, class: &str, seed: u64) -> Result<Solution, ApiError> {
        let request = ConfigRequest { root: root.to_string(), task_class: class.to_string(), rng_seed: seed };
        Ok(Configurator::new(&self.schema).with_limit(SEARCH_LIMIT).configure(&request, &self.store)?)
    }

    fn persist(&self) -> Result<(), ApiError> {
        if let Some(path) = &self.store_path {
            self.store.save(path)?;
        }
        Ok(())
    }

    fn reward_mode(&self) -> RewardMode {
        self.rewards.as_ref().map(|r| r.mode).unwrap_or_default()
    }

    fn view(&self, id: &str) -> Result<SessionView, ApiError> {
        let s = self.sessions.get(id).ok_or_else(|| ApiError::not_found(format!("unknown session {id:?}")))?;
        Ok(SessionView {
            session_id: id.to_string(),
            task_class: s.task_class.clone(),
            root: s.root.clone(),
            seed: s.seed,
            attempt: s.attempts,
            state: s.state,
            reward_mode: self.reward_mode(),
            run: self.store.clock(&s.task_class).map(|c| c + u64::from(s.state == SessionState::AwaitingRewards)).ok(),
            decision_objects: s.solution.distinct_decisions(),
            solution: s.solution.clone(),
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    root: Option<String>,
    task_class: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub task_class: String,
    pub root: String,
    pub seed: u64,
    pub attempt: u64,
    pub state: SessionState,
    pub reward_mode: RewardMode,
    /// Run index the solution is (or was) committed as.
    pub run: Option<u64>,
    /// One entry per object to rate.
    pub decision_objects: Vec<ObjectKey>,
    pub solution: Solution,
}

async fn create_session(State(app): State<AppState>, body: String) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse(&body)?;
    let mut inner = app.lock();
    inner.expire_idle();
    let root = match req.root {
        Some(r) => r,
        None => inner.schema.roots().first().cloned().ok_or_else(|| ApiError::unprocessable("domain has no root"))?,
    };
    inner.schema.require_root(&root)?;
    let class = req.task_class.unwrap_or_else(|| inner.default_class.clone());
    if class.trim().is_empty() {
        return Err(ApiError::unprocessable("task class must not be empty"));
    }
    let mut rng = rand::thread_rng();
    let seed = req.seed.unwrap_or_else(|| rng.gen());
    let before = inner.store.clone();
    let created = inner.ensure_class(&class).and_then(|()| inner.configure(&root, &class, seed));
    let solution = match created {
        Ok(s) => s,
        Err(e) => {
            // undo a class registration made for a request that failed
            inner.store = before;
            return Err(e);
        }
    };
    if inner.store != before {
        inner.persist()?;
    }
    let id = loop {
        let id = format!("{:016x}", rng.gen::<u64>());
        if !inner.sessions.contains_key(&id) {
            break id;
        }
    };
    inner.sessions.insert(
        id.clone(),
        Session {
            task_class: class,
            root,
            seed,
            attempts: 1,
            solution,
            state: SessionState::AwaitingRewards,
            last_touch: Instant::now(),
        },
    );
    Ok((StatusCode::CREATED, Json(inner.view(&id)?)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let mut inner = app.lock();
    inner.session(&id)?;
    Ok(Json(inner.view(&id)?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardBody {
    rewards: Option<BTreeMap<ObjectKey, f64>>,
    broadcast: Option<f64>,
    #[serde(default)]
    scripted: bool,
}

#[derive(Debug, Serialize)]
pub struct RewardAck {
    pub session_id: String,
    pub run: u64,
    /// Relevance of every rewarded object after the commit.
    pub relevance: BTreeMap<ObjectKey, f64>,
}

async fn submit_rewards(State(app): State<AppState>, Path(id): Path<String>, body: String) -> ApiResult<RewardAck> {
    let body: RewardBody = parse(&body)?;
    let mut inner = app.lock();
    let session = inner.session(&id)?;
    if session.state != SessionState::AwaitingRewards {
        return Err(ApiError::new(StatusCode::CONFLICT, "rewards for this solution were already submitted"));
    }
    let class = session.task_class.clone();
    let solution = session.solution.clone();
    let given = usize::from(body.rewards.is_some()) + usize::from(body.broadcast.is_some()) + usize::from(body.scripted);
    if given != 1 {
        return Err(ApiError::unprocessable("give exactly one of \"rewards\", \"broadcast\" or \"scripted\""));
    }
    let expected = solution.distinct_decisions();
    let rewards: RewardMap = if let Some(map) = body.rewards {
        let missing: Vec<String> = expected.iter().filter(|k| !map.contains_key(k)).map(ToString::to_string).collect();
        if !missing.is_empty() {
            return Err(ApiError::unprocessable(format!("missing rewards for {}", missing.join(", "))));
        }
        let extra: Vec<String> = map.keys().filter(|k| !expected.contains(k)).map(ToString::to_string).collect();
        if !extra.is_empty() {
            return Err(ApiError::unprocessable(format!("not part of the solution: {}", extra.join(", "))));
        }
        if let Some((k, r)) = map.iter().find(|(_, r)| !(0.0..=1.0).contains(*r)) {
            return Err(ApiError::unprocessable(format!("reward {r} for {k} is outside [0, 1]")));
        }
        map
    } else if let Some(value) = body.broadcast {
        broadcast(&solution, value)?
    } else {
        let script = inner.rewards.as_ref().ok_or_else(|| ApiError::unprocessable("no reward script loaded"))?;
        script.rate(&solution, inner.store.clock(&class)? + 1)?
    };
    let run = inner.store.commit_run(&rewards, &class)?;
    inner.sessions.get_mut(&id).expect("checked above").state = SessionState::Idle;
    let relevance = rewards
        .keys()
        .map(|k| Ok((k.clone(), inner.store.current_relevance(k, &class)?)))
        .collect::<Result<_, RelevanceError>>()?;
    inner.persist()?;
    Ok(Json(RewardAck { session_id: id, run, relevance }))
}

async fn restart(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let mut inner = app.lock();
    let s = inner.session(&id)?;
    let (root, class, seed) = (s.root.clone(), s.task_class.clone(), s.seed.wrapping_add(s.attempts));
    let solution = inner.configure(&root, &class, seed)?;
    let s = inner.sessions.get_mut(&id).expect("checked above");
    s.attempts += 1;
    s.solution = solution;
    s.state = SessionState::AwaitingRewards;
    Ok(Json(inner.view(&id)?))
}

#[derive(Debug, Deserialize)]
struct RelevanceQuery {
    class: Option<String>,
    root: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RelevanceEntry {
    pub class: String,
    pub object: ObjectKey,
    /// As seen by the class's next run.
    pub relevance: f64,
    pub last_use: u64,
    pub last_use_rel: f64,
}

#[derive(Debug, Serialize)]
pub struct RelevanceView {
    pub clocks: BTreeMap<String, u64>,
    pub entries: Vec<RelevanceEntry>,
}

async fn relevance(State(app): State<AppState>, Query(q): Query<RelevanceQuery>) -> ApiResult<RelevanceView> {
    let inner = app.lock();
    let classes: Vec<String> = match q.class.filter(|c| !c.is_empty()) {
        Some(c) if inner.store.has_class(&c) => vec![c],
        Some(c) => return Err(ApiError::not_found(format!("unknown task class {c:?}"))),
        None => inner.store.classes().map(str::to_string).collect(),
    };
    let filter = match q.root.filter(|r| !r.is_empty()) {
        Some(r) => Some(inner.schema.reachable_objects(&r)?),
        None => None,
    };
    let mut view = RelevanceView { clocks: BTreeMap::new(), entries: Vec::new() };
    for class in classes {
        view.clocks.insert(class.clone(), inner.store.clock(&class)?);
        for (key, record) in inner.store.records(&class)? {
            if filter.as_ref().is_some_and(|f| !f.contains(key)) {
                continue;
            }
            view.entries.push(RelevanceEntry {
                class: class.clone(),
                object: key.clone(),
                relevance: inner.store.current_relevance(key, &class)?,
                last_use: record.last_use,
                last_use_rel: record.last_use_rel,
            });
        }
    }
    Ok(Json(view))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepBody {
    threshold: Option<f64>,
}

async fn sweep(State(app): State<AppState>, body: String) -> ApiResult<serde_json::Value> {
    let body: SweepBody = parse(&body)?;
    let threshold = body.threshold.ok_or_else(|| ApiError::unprocessable("missing \"threshold\""))?;
    let mut inner = app.lock();
    let deleted = inner.store.sweep_at_clocks(threshold)?;
    inner.persist()?;
    Ok(Json(serde_json::json!({ "deleted": deleted })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitBody {
    into: Vec<String>,
}

async fn split(State(app): State<AppState>, Path(class): Path<String>, body: String) -> ApiResult<serde_json::Value> {
    let body: SplitBody = parse(&body)?;
    let [c1, c2] = body.into.as_slice() else {
        return Err(ApiError::unprocessable("\"into\" must name exactly two classes"));
    };
    let mut inner = app.lock();
    inner.store.split_task_class(&class, c1, c2)?;
    inner.persist()?;
    let classes: Vec<&str> = inner.store.classes().collect();
    Ok(Json(serde_json::json!({ "classes": classes })))
}

pub fn router(config: ServiceConfig) -> Router {
    router_with_state(state(config))
}

/// Router over an existing state, so callers can keep a handle on it.
pub fn router_with_state(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/rewards", post(submit_rewards))
        .route("/sessions/{id}/restart", post(restart))
        .route("/relevance", get(relevance))
        .route("/maintenance/sweep", post(sweep))
        .route("/classes/{class}/split", post(split))
        .with_state(state)
}

pub fn state(config: ServiceConfig) -> AppState {
    AppState(Arc::new(Mutex::new(Inner {
        schema: config.schema,
        rewards: config.rewards,
        store: config.store,
        store_path: config.store_path,
        default_class: config.default_class,
        idle_timeout: config.idle_timeout,
        sessions: HashMap::new(),
    })))
}

/// Serves until interrupted with Ctrl-C.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
