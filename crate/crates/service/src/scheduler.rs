//! Periodic refresh of active feeds.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::generation::{GenerateError, Trigger};
use crate::AppState;

/// `base` scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
pub fn jittered(base: Duration, jitter: f64) -> Duration {
    if jitter <= 0.0 {
        return base;
    }
    let factor = rand::thread_rng().gen_range((1.0 - jitter)..=(1.0 + jitter));
    base.mul_f64(factor)
}

fn poll_period(interval: Duration) -> Duration {
    (interval / 20).clamp(Duration::from_millis(50), Duration::from_secs(1))
}

pub fn spawn(state: AppState, stop: watch::Receiver<bool>) -> JoinHandle<()> {
    tokio::spawn(refresh_loop(state, stop))
}

/// Each active feed gets its own jittered due time. A feed whose run is
/// still in flight when it comes due is skipped until its next slot.
pub async fn refresh_loop(state: AppState, mut stop: watch::Receiver<bool>) {
    let interval = Duration::from_secs_f64(state.config.scheduler.interval_secs);
    let jitter = state.config.scheduler.jitter;
    let mut due: HashMap<String, Instant> = HashMap::new();
    tracing::info!(interval_secs = interval.as_secs_f64(), jitter, "refresh scheduler started");
    loop {
        tokio::select! {
            _ = tokio::time::sleep(poll_period(interval)) => {}
            changed = stop.changed() => {
                if changed.is_err() || *stop.borrow() {
                    break;
                }
            }
        }
        let ids = match state.store.list_feed_ids() {
            Ok(ids) => ids,
            Err(e) => {
                tracing::warn!(error = %e, "scheduler cannot list feeds");
                continue;
            }
        };
        let now = Instant::now();
        due.retain(|id, _| ids.contains(id));
        for id in ids {
            let active = match state.store.load_config(&id) {
                Ok(Some(cfg)) => cfg.active,
                Ok(None) => false,
                Err(e) => {
                    tracing::warn!(feed_id = %id, error = %e, "scheduler cannot read config");
                    false
                }
            };
            if !active {
                due.remove(&id);
                continue;
            }
            let slot = due.entry(id.clone()).or_insert_with(|| now + jittered(interval, jitter));
            if now < *slot {
                continue;
            }
            *slot = now + jittered(interval, jitter);
            if state.generator.flights().is_running(&id) {
                tracing::info!(feed_id = %id, "scheduled refresh skipped, run in flight");
                continue;
            }
            let generator = Arc::clone(&state.generator);
            tokio::spawn(async move {
                match generator.run(&id, Trigger::Scheduled).await {
                    Ok(_) => {}
                    Err(GenerateError::InFlight(_)) => {
                        tracing::info!(feed_id = %id, "scheduled refresh skipped, run in flight")
                    }
                    Err(e) => tracing::warn!(feed_id = %id, code = %e.code(), error = %e, "scheduled refresh failed"),
                }
            });
        }
    }
    tracing::info!("refresh scheduler stopped");
}
