//! Human filtering of generated candidates: per-seed queues with positive and
//! negative quotas, an undoable decision log persisted as JSONL, and an HTTP
//! API over it.

mod server;
mod session;
mod store;

pub use server::{router, serve_forever, spawn, ApiError, AppState, CandidatePool, CreateRequest, LabelRequest, ServerHandle, SessionView};
pub use session::{Decision, Finalized, LabelEvent, Next, Quotas, SeedProgress, Session, SessionEvent};
pub use store::SessionStore;
